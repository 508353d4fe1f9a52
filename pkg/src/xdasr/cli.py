"""Command-line interface.

Subcommands map 1:1 onto pipeline stages; `full-repro` chains them all. Every
stage is deterministic under its --seed, so stage-by-stage invocation and the
orchestrated run produce identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import archive, corpus, dsp, nnet, scoring, training, viz
from .augment import AugmentPlan, build_multicondition_corpus
from .bottleneck import load_extractor, save_extractor, FeatureExtractor
from .experiment import (
    ExperimentConfig,
    FeatureBank,
    augmented_matrix,
    baseline_matrix,
    bottleneck_matrix,
    build_corpora,
    desk_config,
    fit_extractor,
    full_repro,
    speaker_matrix,
    tiny_config,
)
from .features import compute_baseline, compute_extractor_input, training_views
from .manifest import read_manifest, write_manifest
from .types import Utterance


def _cmd_gen_corpus(args) -> int:
    profile = corpus.DOMAIN_PROFILES[args.domain]
    inventory = corpus.make_inventory(args.phones, args.inventory_seed)
    utts = corpus.generate_corpus(
        args.speakers,
        args.utts,
        profile,
        inventory,
        seed=args.seed,
        out_dir=args.out,
        split=args.split,
        sample_rate=args.sample_rate,
    )
    symbols = Path(args.out) / "symbols.txt"
    symbols.write_text("\n".join(sorted(inventory.symbols)) + "\n", encoding="utf-8")
    print(f"wrote {len(utts)} utterances under {args.out}")
    return 0


def _cmd_augment(args) -> int:
    utts = read_manifest(args.manifest)
    root = Path(args.manifest).parent
    snr_grid = tuple(float(x) for x in args.snr_grid.split(","))
    plan = AugmentPlan(
        n_copies=args.copies,
        snr_grid_db=snr_grid,
        seed=args.seed,
        rirs=corpus.make_rir_pool(args.sample_rate, args.pool_seed),
        noises=[("pool", n) for n in corpus.make_noise_pool(args.sample_rate, args.pool_seed + 1)],
    )
    out_utts = build_multicondition_corpus(utts, plan, root, args.out)
    print(f"wrote {len(out_utts)} utterances under {args.out}")
    return 0


def _cmd_make_features(args) -> int:
    utts = read_manifest(args.manifest)
    root = Path(args.manifest).parent
    if args.kind == "baseline":
        feats = compute_baseline(utts, root, cmvn=not args.no_cmvn)
    elif args.kind == "extractor-input":
        feats = compute_extractor_input(utts, root)
    elif args.kind == "bottleneck":
        if not args.extractor:
            print("--extractor is required for bottleneck features", file=sys.stderr)
            return 2
        from .bottleneck import compute_bottleneck

        ext = load_extractor(args.extractor)
        feats = compute_bottleneck(ext, utts, root, cmvn=args.bottleneck_cmvn)
    else:
        print(f"unknown feature kind {args.kind!r}", file=sys.stderr)
        return 2
    archive.save_features(args.out, feats)
    print(f"wrote {len(feats)} matrices ({feats[0].dim} dims) to {args.out}")
    return 0


def _load_symbols(path: str | None, utts: list[Utterance]) -> list[str]:
    if path:
        return [s for s in Path(path).read_text(encoding="utf-8").split() if s]
    return sorted({sym for u in utts for sym in u.labels})


def _cmd_train(args) -> int:
    utts = read_manifest(args.manifest)
    feats = archive.load_features(args.features, utts)
    symbols = _load_symbols(args.symbols, utts)
    phone_map = training.build_phone_map(symbols)
    n_out = max(phone_map.values()) + 1

    views = []
    for fm, utt in zip(feats, utts):
        ids = training.labels_to_ids(utt.labels, phone_map)
        for view in training_views(fm, args.window, args.stride):
            views.append((view, ids))
    input_dim = views[0][0].dim
    if args.arch == "bilstm":
        specs = nnet.bilstm_arch(input_dim, args.hidden, args.layers, n_out)
    else:
        specs = nnet.tdnn_arch(input_dim, args.hidden, n_out)
    net = nnet.Network(specs, seed=args.seed)
    cfg = training.TrainConfig(
        epochs=args.epochs,
        lr=args.lr,
        lr_decay=args.lr_decay,
        momentum=args.momentum,
        grad_clip=args.clip,
        seed=args.seed,
    )
    history = training.train_ctc(net, views, cfg)
    meta = {
        "phone_map": phone_map,
        "window": args.window,
        "stride": args.stride,
        "feature_kind": feats[0].kind or "archived",
        "epoch": args.epochs,
        "seed": args.seed,
        "final_loss": history[-1],
    }
    if args.arch == "tdnn":
        ext = FeatureExtractor(
            net=net,
            tap_layer=args.tap_layer,
            frontend=dsp.FrontendConfig(),
            sample_rate_hz=args.sample_rate,
        )
        save_extractor(args.out, ext, meta)
    else:
        nnet.save_checkpoint(args.out, net, meta)
    print(f"trained {args.arch} ({net.num_params} params), final loss/frame {history[-1]:.4f}")
    return 0


def _cmd_decode(args) -> int:
    utts = read_manifest(args.manifest)
    feats = archive.load_features(args.features, utts)
    net, meta = nnet.load_checkpoint(args.model)
    window = meta.get("window", 1)
    phone_map = {k: int(v) for k, v in meta["phone_map"].items()}
    stacked = [dsp.stack_window(fm, window) for fm in feats]
    hyp_ids = training.decode_features(net, stacked, beam=args.beam)
    hyp_utts = [
        Utterance(
            utt_id=u.utt_id,
            speaker=u.speaker,
            domain=u.domain,
            audio_path=u.audio_path,
            labels=tuple(training.ids_to_labels(ids, phone_map)),
        )
        for u, ids in zip(utts, hyp_ids)
    ]
    write_manifest(args.out, hyp_utts)
    print(f"decoded {len(hyp_utts)} utterances -> {args.out}")
    return 0


def _cmd_score(args) -> int:
    refs = [(u.utt_id, list(u.labels)) for u in read_manifest(args.ref)]
    hyps = [(u.utt_id, list(u.labels)) for u in read_manifest(args.hyp)]
    tags = frozenset(args.filter.split(",")) if args.filter else frozenset()
    report = scoring.per(refs, hyps, tags)
    print(
        f"PER {report.per:.2f} "
        f"(S={report.substitutions} I={report.insertions} D={report.deletions} N={report.ref_length})"
    )
    return 0


def _experiment_config(args) -> ExperimentConfig:
    seed = args.seed if args.seed is not None else 7
    if args.config:
        cfg = ExperimentConfig.from_json(Path(args.config).read_text(encoding="utf-8"))
        if args.seed is not None:
            cfg.seed = args.seed
    elif args.scale == "tiny":
        cfg = tiny_config(args.out, seed)
    else:
        cfg = desk_config(args.out, seed)
    cfg.out_dir = args.out
    return cfg


def _cmd_matrix(args) -> int:
    cfg = _experiment_config(args)
    need_aug = args.kind.startswith("baseline_aug")
    cs = build_corpora(cfg, augment_targets=("conversational", "broadcast") if need_aug else ())
    bank = FeatureBank(cfg, cs)
    if args.kind in ("baseline_w3", "baseline_w1"):
        matrix = baseline_matrix(cfg, cs, bank, window=3 if args.kind.endswith("w3") else 1)
    elif args.kind == "baseline_aug_w3":
        matrix = augmented_matrix(cfg, cs, bank)
    elif args.kind == "baseline_spk_w3":
        matrix = speaker_matrix(cfg, cs, bank)
    elif args.kind == "bottleneck_w1":
        ext = fit_extractor(cfg, cs)
        matrix = bottleneck_matrix(cfg, cs, bank, ext)
    else:
        print(f"unknown feature kind {args.kind!r}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{args.kind}.csv"
    csv_path.write_text(scoring.matrix_to_csv(matrix), encoding="utf-8")
    print(scoring.render_matrix(matrix, corpus.DISPLAY_NAMES))
    print(f"wrote {csv_path}")
    return 0


def _cmd_viz(args) -> int:
    by_domain = {}
    for spec in args.archive:
        domain, _, path = spec.partition("=")
        if not path:
            print(f"--archive expects domain=archive.xdaf, got {spec!r}", file=sys.stderr)
            return 2
        items = archive.read_archive(path)
        by_domain[domain] = np.vstack(list(items.values()))
    frames, labels = viz.sample_frames(by_domain, args.frames, args.seed)
    projector = viz.pca_fit(frames, k=2, seed=args.seed)
    points = viz.project(projector, frames)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    viz.emit_scatter(points, labels, out)
    separation = viz.domain_separation(points, labels)
    print(f"domain separation: {separation:.4f}")
    print(f"wrote {out} and {out.with_suffix('.csv')}")
    return 0


def _cmd_full_repro(args) -> int:
    cfg = _experiment_config(args)
    results = full_repro(cfg)
    print(results["summary_path"].read_text(encoding="utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xdasr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="render a synthetic corpus for one domain")
    p.add_argument("--out", required=True)
    p.add_argument("--domain", required=True, choices=sorted(corpus.DOMAIN_PROFILES))
    p.add_argument("--speakers", type=int, default=6)
    p.add_argument("--utts", type=int, default=6)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--split", default="train")
    p.add_argument("--phones", type=int, default=20)
    p.add_argument("--inventory-seed", type=int, default=11)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.set_defaults(func=_cmd_gen_corpus)

    p = sub.add_parser("augment", help="build a multi-condition copy of a corpus")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--copies", type=int, default=3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--snr-grid", default="0,5,10,15,20")
    p.add_argument("--pool-seed", type=int, default=100)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("make-features", help="featurize a manifest into an archive")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default="baseline", choices=["baseline", "extractor-input", "bottleneck"])
    p.add_argument("--extractor")
    p.add_argument("--no-cmvn", action="store_true")
    p.add_argument("--bottleneck-cmvn", action="store_true")
    p.set_defaults(func=_cmd_make_features)

    p = sub.add_parser("train", help="train a CTC model on archived features")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--arch", default="bilstm", choices=["bilstm", "tdnn"])
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--hidden", type=int, default=48)
    p.add_argument("--window", type=int, default=3)
    p.add_argument("--stride", type=int, default=2)
    p.add_argument("--epochs", type=int, default=12)
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--lr-decay", type=float, default=0.9)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--clip", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--symbols", help="file with one phone symbol per line")
    p.add_argument("--tap-layer", type=int, default=3)
    p.add_argument("--sample-rate", type=int, default=8000)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("decode", help="decode archived features with a model")
    p.add_argument("--features", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--beam", type=int, default=0, help="prefix beam width (0 = greedy)")
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("score", help="PER between reference and hypothesis manifests")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--filter", default="sil,nsn")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("matrix", help="train/test PER matrix for one feature kind")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default="baseline_w3")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scale", default="desk", choices=["desk", "tiny"])
    p.add_argument("--config")
    p.set_defaults(func=_cmd_matrix)

    p = sub.add_parser("viz", help="PCA scatter + separation for feature archives")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--archive", action="append", required=True, metavar="DOMAIN=PATH")
    p.add_argument("--frames", type=int, default=10000)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_viz)

    p = sub.add_parser("full-repro", help="end-to-end run: corpora, matrices, plots, summary")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--scale", default="desk", choices=["desk", "tiny"])
    p.add_argument("--config")
    p.set_defaults(func=_cmd_full_repro)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
