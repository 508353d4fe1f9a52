"""Experiment orchestration: corpora, train/test PER matrices, diagnostics.

The grid mirrors the cross-domain protocol: models trained on conversational
or broadcast corpora, tested on conversational, broadcast and scripted test
sets, for several feature kinds (baseline window-3, augmented, speaker-
embedded, bottleneck window-1).
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import corpus, dsp, nnet, scoring, training, viz
from .augment import AugmentPlan, build_multicondition_corpus
from .bottleneck import FeatureExtractor, compute_bottleneck, save_extractor, train_extractor
from .features import compute_baseline, compute_extractor_input, training_views
from .manifest import read_manifest
from .scoring import PerMatrix
from .spkembed import build_embedded_features
from .types import FeatureMatrix, Utterance

TRAIN_DOMAINS = ("conversational", "broadcast")
TEST_DOMAINS = ("conversational", "broadcast", "scripted")

FEATURE_KINDS = ("baseline_w3", "baseline_w1", "baseline_aug_w3", "baseline_spk_w3", "bottleneck_w1")

# Published reference PERs from the original restricted-corpus Turkish systems
# (not reproducible here; kept for side-by-side context in summaries).
REFERENCE_BASELINE = {
    ("conversational", "conversational"): 34.5,
    ("conversational", "broadcast"): 34.8,
    ("conversational", "scripted"): 40.1,
    ("broadcast", "conversational"): 60.8,
    ("broadcast", "broadcast"): 5.8,
    ("broadcast", "scripted"): 67.1,
}
REFERENCE_PROPOSED = {
    ("conversational", "conversational"): 32.6,
    ("conversational", "broadcast"): 24.7,
    ("conversational", "scripted"): 33.2,
    ("broadcast", "conversational"): 53.4,
    ("broadcast", "broadcast"): 4.9,
    ("broadcast", "scripted"): 35.0,
}


@dataclass
class ExperimentConfig:
    out_dir: str = "runs/default"
    seed: int = 7
    sample_rate: int = 8000

    # target corpora
    n_phones: int = 20
    inventory_seed: int = 11
    train_speakers: int = 6
    train_utts: int = 6
    test_speakers: int = 3
    test_utts: int = 4

    # source corpus (feature-extractor training); short utterances keep the
    # TDNN's CTC training well-conditioned
    source_phones: int = 24
    source_inventory_seed: int = 29
    source_speakers: int = 10
    source_utts: int = 12
    source_min_phones: int = 3
    source_max_phones: int = 8

    # augmentation
    aug_copies: int = 3
    snr_grid_db: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0, 20.0)

    # features
    window: int = 3
    subsample_stride: int = 2
    embed_dim: int = 16
    bottleneck_cmvn: bool = False

    # target models
    bilstm_layers: int = 2
    bilstm_hidden: int = 48
    epochs: int = 20
    lr: float = 0.03
    lr_decay: float = 0.95
    momentum: float = 0.9
    grad_clip: float = 5.0

    # extractor (lower lr and tighter clipping than the BiLSTMs: the deep
    # ReLU stack diverges under the target-model settings)
    tdnn_width: int = 128
    tap_layer: int = 3
    extractor_epochs: int = 18
    extractor_lr: float = 0.01
    extractor_clip: float = 2.0

    # diagnostics
    viz_frames: int = 10000

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        data = json.loads(text)
        if "snr_grid_db" in data:
            data["snr_grid_db"] = tuple(data["snr_grid_db"])
        return ExperimentConfig(**data)


def desk_config(out_dir: str, seed: int = 7) -> ExperimentConfig:
    """Default full-repro scale (tens of minutes of wall clock)."""
    return ExperimentConfig(
        out_dir=out_dir,
        seed=seed,
        train_speakers=8,
        train_utts=8,
        test_speakers=4,
        test_utts=5,
        source_speakers=12,
        source_utts=12,
    )


def tiny_config(out_dir: str, seed: int = 7) -> ExperimentConfig:
    """Small grid for smoke tests and CI."""
    return ExperimentConfig(
        out_dir=out_dir,
        seed=seed,
        train_speakers=3,
        train_utts=3,
        test_speakers=2,
        test_utts=2,
        source_speakers=4,
        source_utts=5,
        bilstm_layers=1,
        bilstm_hidden=24,
        epochs=4,
        tdnn_width=48,
        extractor_epochs=3,
        viz_frames=500,
    )


@dataclass
class CorpusSet:
    root: Path
    inventory: corpus.PhoneInventory
    source_inventory: corpus.PhoneInventory
    train: dict[str, list[Utterance]] = field(default_factory=dict)
    test: dict[str, list[Utterance]] = field(default_factory=dict)
    train_aug: dict[str, list[Utterance]] = field(default_factory=dict)
    source: list[Utterance] = field(default_factory=list)
    source_aug: list[Utterance] = field(default_factory=list)

    def dir_for(self, name: str) -> Path:
        return self.root / name


def build_corpora(cfg: ExperimentConfig, augment_targets: tuple[str, ...] = TRAIN_DOMAINS) -> CorpusSet:
    """Generate target train/test corpora, the source corpus, and augmented
    variants, under <out_dir>/corpus."""
    root = Path(cfg.out_dir) / "corpus"
    inventory = corpus.make_inventory(cfg.n_phones, cfg.inventory_seed)
    source_inventory = corpus.make_inventory(cfg.source_phones, cfg.source_inventory_seed)
    cs = CorpusSet(root=root, inventory=inventory, source_inventory=source_inventory)

    for domain in TRAIN_DOMAINS:
        profile = corpus.DOMAIN_PROFILES[domain]
        cs.train[domain] = corpus.generate_corpus(
            cfg.train_speakers,
            cfg.train_utts,
            profile,
            inventory,
            seed=cfg.seed,
            out_dir=root / f"{domain}_train",
            split="train",
            sample_rate=cfg.sample_rate,
        )
    for domain in TEST_DOMAINS:
        profile = corpus.DOMAIN_PROFILES[domain]
        cs.test[domain] = corpus.generate_corpus(
            cfg.test_speakers,
            cfg.test_utts,
            profile,
            inventory,
            seed=cfg.seed + 1,
            out_dir=root / f"{domain}_test",
            split="test",
            sample_rate=cfg.sample_rate,
        )

    # Source-language corpus rendered through a mildly band-limited channel
    # with wide speaking-rate coverage, then expanded into multi-condition
    # copies covering reverb and noise.
    source_profile = corpus.DomainProfile(
        name="source",
        band_hz=(200.0, 3700.0),
        reverb_t60_s=(0.0, 0.0),
        noise_kind="none",
        noise_snr_db=(0.0, 0.0),
        speaking_rate=(0.85, 1.25),
    )
    cs.source = corpus.generate_corpus(
        cfg.source_speakers,
        cfg.source_utts,
        source_profile,
        source_inventory,
        seed=cfg.seed + 2,
        out_dir=root / "source_train",
        split="train",
        sample_rate=cfg.sample_rate,
        min_phones=cfg.source_min_phones,
        max_phones=cfg.source_max_phones,
    )
    plan = AugmentPlan(
        n_copies=cfg.aug_copies,
        snr_grid_db=cfg.snr_grid_db,
        seed=cfg.seed + 3,
        rirs=corpus.make_rir_pool(cfg.sample_rate, cfg.seed + 4),
        noises=[("pool", n) for n in corpus.make_noise_pool(cfg.sample_rate, cfg.seed + 5)],
    )
    cs.source_aug = build_multicondition_corpus(
        cs.source, plan, root / "source_train", root / "source_train_aug"
    )
    for domain in augment_targets:
        dplan = replace(plan, seed=cfg.seed + 6 + TRAIN_DOMAINS.index(domain))
        cs.train_aug[domain] = build_multicondition_corpus(
            cs.train[domain], dplan, root / f"{domain}_train", root / f"{domain}_train_aug"
        )

    symbols_path = root / "target_symbols.txt"
    symbols_path.write_text("\n".join(sorted(inventory.symbols)) + "\n", encoding="utf-8")
    return cs


def _train_config(cfg: ExperimentConfig, seed_offset: int = 0) -> training.TrainConfig:
    return training.TrainConfig(
        epochs=cfg.epochs,
        lr=cfg.lr,
        lr_decay=cfg.lr_decay,
        momentum=cfg.momentum,
        grad_clip=cfg.grad_clip,
        seed=cfg.seed + seed_offset,
    )


def _fit_model(
    cfg: ExperimentConfig,
    train_feats: list[FeatureMatrix],
    train_utts: list[Utterance],
    phone_map: dict[str, int],
    window: int,
    seed_offset: int,
) -> nnet.Network:
    views: list[tuple[FeatureMatrix, list[int]]] = []
    for fm, utt in zip(train_feats, train_utts):
        ids = training.labels_to_ids(utt.labels, phone_map)
        for view in training_views(fm, window, cfg.subsample_stride):
            views.append((view, ids))
    input_dim = views[0][0].dim
    n_out = max(phone_map.values()) + 1
    net = nnet.Network(
        nnet.bilstm_arch(input_dim, cfg.bilstm_hidden, cfg.bilstm_layers, n_out),
        seed=cfg.seed + seed_offset,
    )
    training.train_ctc(net, views, _train_config(cfg, seed_offset))
    return net


def _score_model(
    net: nnet.Network,
    test_feats: list[FeatureMatrix],
    test_utts: list[Utterance],
    phone_map: dict[str, int],
    window: int,
) -> scoring.PerReport:
    stacked = [dsp.stack_window(fm, window) for fm in test_feats]
    hyp_ids = training.decode_features(net, stacked)
    hyps = [(u.utt_id, training.ids_to_labels(ids, phone_map)) for u, ids in zip(test_utts, hyp_ids)]
    refs = [(u.utt_id, list(u.labels)) for u in test_utts]
    return scoring.per(refs, hyps)


class FeatureBank:
    """Caches per-corpus features across matrix runs within one experiment."""

    def __init__(self, cfg: ExperimentConfig, cs: CorpusSet):
        self.cfg = cfg
        self.cs = cs
        self._cache: dict[tuple, list[FeatureMatrix]] = {}

    def baseline(self, domain: str, split: str) -> list[FeatureMatrix]:
        key = ("baseline", domain, split)
        if key not in self._cache:
            utts = (self.cs.train if split == "train" else self.cs.test)[domain]
            root = self.cs.dir_for(f"{domain}_{split}")
            self._cache[key] = compute_baseline(utts, root)
        return self._cache[key]

    def baseline_aug(self, domain: str) -> list[FeatureMatrix]:
        key = ("baseline_aug", domain)
        if key not in self._cache:
            utts = self.cs.train_aug[domain]
            root = self.cs.dir_for(f"{domain}_train_aug")
            self._cache[key] = compute_baseline(utts, root)
        return self._cache[key]

    def bottleneck(self, ext: FeatureExtractor, domain: str, split: str) -> list[FeatureMatrix]:
        key = ("bottleneck", domain, split)
        if key not in self._cache:
            utts = (self.cs.train if split == "train" else self.cs.test)[domain]
            root = self.cs.dir_for(f"{domain}_{split}")
            self._cache[key] = compute_bottleneck(ext, utts, root, cmvn=self.cfg.bottleneck_cmvn)
        return self._cache[key]


def _new_matrix(model: str) -> PerMatrix:
    return PerMatrix(rows=list(TRAIN_DOMAINS), cols=list(TEST_DOMAINS), model=model)


def baseline_matrix(
    cfg: ExperimentConfig, cs: CorpusSet, bank: FeatureBank, window: int | None = None
) -> PerMatrix:
    window = cfg.window if window is None else window
    phone_map = training.build_phone_map(cs.inventory.symbols)
    matrix = _new_matrix(f"baseline_w{window}")
    for ti, train_domain in enumerate(TRAIN_DOMAINS):
        net = _fit_model(
            cfg, bank.baseline(train_domain, "train"), cs.train[train_domain], phone_map, window, 10 + ti
        )
        for test_domain in TEST_DOMAINS:
            report = _score_model(
                net, bank.baseline(test_domain, "test"), cs.test[test_domain], phone_map, window
            )
            matrix.set(train_domain, test_domain, report)
    return matrix


def augmented_matrix(
    cfg: ExperimentConfig,
    cs: CorpusSet,
    bank: FeatureBank,
    rows: tuple[str, ...] = TRAIN_DOMAINS,
) -> PerMatrix:
    phone_map = training.build_phone_map(cs.inventory.symbols)
    matrix = _new_matrix(f"baseline_aug_w{cfg.window}")
    for ti, train_domain in enumerate(TRAIN_DOMAINS):
        if train_domain not in rows:
            continue
        net = _fit_model(
            cfg,
            bank.baseline_aug(train_domain),
            cs.train_aug[train_domain],
            phone_map,
            cfg.window,
            20 + ti,
        )
        for test_domain in TEST_DOMAINS:
            report = _score_model(
                net, bank.baseline(test_domain, "test"), cs.test[test_domain], phone_map, cfg.window
            )
            matrix.set(train_domain, test_domain, report)
    return matrix


def speaker_matrix(
    cfg: ExperimentConfig,
    cs: CorpusSet,
    bank: FeatureBank,
    rows: tuple[str, ...] = TRAIN_DOMAINS,
) -> PerMatrix:
    phone_map = training.build_phone_map(cs.inventory.symbols)
    matrix = _new_matrix(f"baseline_spk_w{cfg.window}")
    for ti, train_domain in enumerate(TRAIN_DOMAINS):
        if train_domain not in rows:
            continue
        train_base = bank.baseline(train_domain, "train")
        train_feats = build_embedded_features(train_base, train_base, cfg.embed_dim)
        net = _fit_model(cfg, train_feats, cs.train[train_domain], phone_map, cfg.window, 30 + ti)
        for test_domain in TEST_DOMAINS:
            test_feats = build_embedded_features(
                train_base, bank.baseline(test_domain, "test"), cfg.embed_dim
            )
            report = _score_model(net, test_feats, cs.test[test_domain], phone_map, cfg.window)
            matrix.set(train_domain, test_domain, report)
    return matrix


def fit_extractor(cfg: ExperimentConfig, cs: CorpusSet) -> FeatureExtractor:
    source_map = training.build_phone_map(cs.source_inventory.symbols)
    ext, _ = train_extractor(
        cs.source_aug,
        cs.dir_for("source_train_aug"),
        source_map,
        width=cfg.tdnn_width,
        tap_layer=cfg.tap_layer,
        train_cfg=training.TrainConfig(
            epochs=cfg.extractor_epochs,
            lr=cfg.extractor_lr,
            lr_decay=cfg.lr_decay,
            momentum=cfg.momentum,
            grad_clip=cfg.extractor_clip,
            seed=cfg.seed + 40,
        ),
        sample_rate_hz=cfg.sample_rate,
    )
    return ext


def bottleneck_matrix(
    cfg: ExperimentConfig, cs: CorpusSet, bank: FeatureBank, ext: FeatureExtractor
) -> PerMatrix:
    phone_map = training.build_phone_map(cs.inventory.symbols)
    matrix = _new_matrix("bottleneck_w1")
    for ti, train_domain in enumerate(TRAIN_DOMAINS):
        net = _fit_model(
            cfg, bank.bottleneck(ext, train_domain, "train"), cs.train[train_domain], phone_map, 1, 50 + ti
        )
        for test_domain in TEST_DOMAINS:
            report = _score_model(
                net, bank.bottleneck(ext, test_domain, "test"), cs.test[test_domain], phone_map, 1
            )
            matrix.set(train_domain, test_domain, report)
    return matrix


def compare_runs(baseline: PerMatrix, proposed: PerMatrix) -> list[dict]:
    """Cell-wise relative improvement, flagging cross-domain cells."""
    if baseline.rows != proposed.rows or baseline.cols != proposed.cols:
        raise ValueError("matrices cover different grids")
    rows = []
    for train_domain in baseline.rows:
        for test_domain in baseline.cols:
            b = baseline.get(train_domain, test_domain)
            p = proposed.get(train_domain, test_domain)
            if b is None or p is None:
                continue
            rows.append(
                {
                    "train": train_domain,
                    "test": test_domain,
                    "baseline_per": b.per,
                    "proposed_per": p.per,
                    "relative_improvement": scoring.relative_improvement(b.per, p.per),
                    "cross_domain": train_domain != test_domain,
                }
            )
    return rows


def improvement_csv(rows: list[dict]) -> str:
    lines = ["train_corpus,test_corpus,baseline_per,proposed_per,relative_improvement,cross_domain"]
    for r in rows:
        lines.append(
            f"{r['train']},{r['test']},{r['baseline_per']:.4f},{r['proposed_per']:.4f},"
            f"{r['relative_improvement']:+.2f},{int(r['cross_domain'])}"
        )
    return "\n".join(lines) + "\n"


def feature_distribution_report(
    cfg: ExperimentConfig, cs: CorpusSet, bank: FeatureBank, ext: FeatureExtractor, plots_dir: Path
) -> dict[str, float]:
    """PCA scatter + separation ratio for the three feature views."""
    plots_dir.mkdir(parents=True, exist_ok=True)
    views: dict[str, dict[str, np.ndarray]] = {"baseline": {}, "extractor_input": {}, "bottleneck": {}}
    for domain in TEST_DOMAINS:
        pools = {
            "baseline": bank.baseline(domain, "test"),
            "bottleneck": bank.bottleneck(ext, domain, "test"),
            "extractor_input": compute_extractor_input(
                cs.test[domain], cs.dir_for(f"{domain}_test"), ext.frontend
            ),
        }
        if domain in TRAIN_DOMAINS:
            pools["baseline"] = pools["baseline"] + bank.baseline(domain, "train")
            pools["bottleneck"] = pools["bottleneck"] + bank.bottleneck(ext, domain, "train")
            pools["extractor_input"] = pools["extractor_input"] + compute_extractor_input(
                cs.train[domain], cs.dir_for(f"{domain}_train"), ext.frontend
            )
        for view, feats in pools.items():
            views[view][domain] = np.vstack([fm.data for fm in feats])

    separations: dict[str, float] = {}
    for view, by_domain in views.items():
        frames, labels = viz.sample_frames(by_domain, cfg.viz_frames, seed=cfg.seed + 60)
        projector = viz.pca_fit(frames, k=2, seed=cfg.seed + 61)
        points = viz.project(projector, frames)
        viz.emit_scatter(points, labels, plots_dir / f"{view}.svg")
        separations[view] = viz.domain_separation(points, labels)
    return separations


def full_repro(cfg: ExperimentConfig, augment_rows: tuple[str, ...] = TRAIN_DOMAINS) -> dict:
    """Corpora -> baseline matrix -> bottleneck matrix -> diagnostics -> plots
    -> summary. Returns the result bundle; writes everything under out_dir."""
    started = time.time()
    out = Path(cfg.out_dir)
    tables = out / "tables"
    plots = out / "plots"
    models = out / "models"
    for d in (tables, plots, models):
        d.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json() + "\n", encoding="utf-8")

    cs = build_corpora(cfg, augment_targets=augment_rows)
    bank = FeatureBank(cfg, cs)

    base = baseline_matrix(cfg, cs, bank)
    ext = fit_extractor(cfg, cs)
    save_extractor(models / "extractor.xdck", ext, {"seed": cfg.seed})
    bn = bottleneck_matrix(cfg, cs, bank, ext)
    aug = augmented_matrix(cfg, cs, bank, rows=augment_rows)
    spk = speaker_matrix(cfg, cs, bank)

    improvements = compare_runs(base, bn)
    separations = feature_distribution_report(cfg, cs, bank, ext, plots)

    (tables / "baseline.csv").write_text(scoring.matrix_to_csv(base), encoding="utf-8")
    (tables / "bottleneck.csv").write_text(scoring.matrix_to_csv(bn), encoding="utf-8")
    (tables / "augmented.csv").write_text(scoring.matrix_to_csv(aug), encoding="utf-8")
    (tables / "speaker.csv").write_text(scoring.matrix_to_csv(spk), encoding="utf-8")
    (tables / "improvements.csv").write_text(improvement_csv(improvements), encoding="utf-8")

    summary = render_summary(cfg, base, bn, aug, spk, improvements, separations, time.time() - started)
    (out / "summary.txt").write_text(summary, encoding="utf-8")
    return {
        "baseline": base,
        "bottleneck": bn,
        "augmented": aug,
        "speaker": spk,
        "improvements": improvements,
        "separations": separations,
        "extractor": ext,
        "corpora": cs,
        "summary_path": out / "summary.txt",
    }


def _reference_matrix(values: dict[tuple[str, str], float], model: str) -> PerMatrix:
    m = _new_matrix(model)
    for (train_domain, test_domain), val in values.items():
        # Synthesize counts that reproduce the published percentage.
        m.set(train_domain, test_domain, scoring.PerReport(int(round(val * 10)), 0, 0, 1000))
    return m


def render_summary(
    cfg: ExperimentConfig,
    base: PerMatrix,
    bn: PerMatrix,
    aug: PerMatrix,
    spk: PerMatrix,
    improvements: list[dict],
    separations: dict[str, float],
    elapsed_s: float,
) -> str:
    names = corpus.DISPLAY_NAMES
    lines = []
    lines.append(f"Cross-domain phoneme recognition summary (seed {cfg.seed})")
    lines.append("=" * 60)
    lines.append("")
    lines.append("Synthetic corpora PER matrices (rows: training corpus, cols: test corpus)")
    lines.append("")
    for title, matrix in (
        ("Baseline (CMVN fbank+pitch, window 3)", base),
        ("Bottleneck (frozen TDNN tap, window 1)", bn),
        ("Baseline + multi-condition augmentation", aug),
        ("Baseline + sub-speaker embeddings", spk),
    ):
        lines.append(title)
        lines.append(scoring.render_matrix(matrix, names))
        lines.append("")
    lines.append("Cell-wise relative improvement, baseline -> bottleneck (%):")
    for r in improvements:
        tag = "cross-domain" if r["cross_domain"] else "in-domain"
        lines.append(
            f"  {names.get(r['train'], r['train'])} -> {names.get(r['test'], r['test'])}: "
            f"{r['baseline_per']:.1f} -> {r['proposed_per']:.1f}  "
            f"({r['relative_improvement']:+.1f}%, {tag})"
        )
    lines.append("")
    lines.append("Feature-distribution separation (2-D PCA, centroid/within-spread ratio):")
    for view in ("baseline", "extractor_input", "bottleneck"):
        if view in separations:
            lines.append(f"  {view}: {separations[view]:.3f}")
    lines.append("")
    lines.append("Published reference PERs (restricted corpora; not directly comparable):")
    lines.append(scoring.render_matrix(_reference_matrix(REFERENCE_BASELINE, "reference_baseline"), names))
    lines.append(scoring.render_matrix(_reference_matrix(REFERENCE_PROPOSED, "reference_proposed"), names))
    lines.append(f"Elapsed: {elapsed_s:.1f} s")
    lines.append("")
    return "\n".join(lines)
