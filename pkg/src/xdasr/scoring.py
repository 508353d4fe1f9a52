"""Phoneme error rate scoring and train-by-test result matrices."""

from __future__ import annotations

import io
from dataclasses import dataclass, field


@dataclass(frozen=True)
class PerReport:
    substitutions: int
    insertions: int
    deletions: int
    ref_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def per(self) -> float:
        return 100.0 * self.errors / self.ref_length


def edit_distance(ref, hyp) -> tuple[int, int, int]:
    """Minimal unit-cost alignment counts (substitutions, insertions, deletions).

    Ties prefer substitutions over insert+delete pairs; remaining ties prefer
    deletions, so the backtrace is deterministic.
    """
    ref = list(ref)
    hyp = list(hyp)
    n, m = len(ref), len(hyp)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
    for j in range(1, m + 1):
        cost[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            sub = cost[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1])
            dele = cost[i - 1][j] + 1
            ins = cost[i][j - 1] + 1
            cost[i][j] = min(sub, dele, ins)
    subs = ins = dels = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and cost[i][j] == cost[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i -= 1
            j -= 1
        elif i > 0 and cost[i][j] == cost[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return subs, ins, dels


def per(
    refs: list[tuple[str, list]],
    hyps: list[tuple[str, list]],
    filter_tags: frozenset | set = frozenset({"sil", "nsn"}),
) -> PerReport:
    """Corpus-level PER over (utt_id, labels) pairs aligned by id.

    Filter tags are removed from both sides before alignment; errors are
    aggregated corpus-wide (total errors over total reference length).
    """
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} reference vs {len(hyps)} hypothesis utterances")
    hyp_by_id = dict(hyps)
    if len(hyp_by_id) != len(hyps):
        raise ValueError("duplicate hypothesis utterance ids")
    subs = ins = dels = ref_len = 0
    for utt_id, ref_labels in refs:
        if utt_id not in hyp_by_id:
            raise ValueError(f"hypothesis missing utterance {utt_id!r}")
        ref_f = [s for s in ref_labels if s not in filter_tags]
        hyp_f = [s for s in hyp_by_id[utt_id] if s not in filter_tags]
        s, i, d = edit_distance(ref_f, hyp_f)
        subs += s
        ins += i
        dels += d
        ref_len += len(ref_f)
    if ref_len == 0:
        raise ValueError("no reference frames")
    return PerReport(subs, ins, dels, ref_len)


def relative_improvement(baseline_per: float, new_per: float) -> float:
    """Percent improvement of new over baseline: 100*(baseline-new)/baseline."""
    if baseline_per <= 0:
        raise ValueError("baseline PER must be positive")
    return 100.0 * (baseline_per - new_per) / baseline_per


@dataclass
class PerMatrix:
    """Train-corpus x test-corpus grid of PER reports."""

    rows: list[str]
    cols: list[str]
    model: str = ""
    cells: dict[tuple[str, str], PerReport] = field(default_factory=dict)

    def set(self, train: str, test: str, report: PerReport) -> None:
        if train not in self.rows or test not in self.cols:
            raise KeyError((train, test))
        self.cells[(train, test)] = report

    def get(self, train: str, test: str) -> PerReport | None:
        return self.cells.get((train, test))

    def per(self, train: str, test: str) -> float:
        report = self.get(train, test)
        if report is None:
            raise KeyError((train, test))
        return report.per


def render_matrix(m: PerMatrix, row_names: dict[str, str] | None = None) -> str:
    """Plain-text grid: rows are training corpora, columns test corpora, one
    decimal place, '-' for absent cells. The label column is padded to a common
    width; cells are bare values separated by ' | '."""
    names = row_names or {}
    labels = [names.get(r, r) for r in m.rows]
    col_labels = [names.get(c, c) for c in m.cols]
    width = max([len(s) for s in labels] + [len(m.model), 1])
    out = io.StringIO()
    out.write(f"{m.model:<{width}} | " + " | ".join(col_labels) + "\n")
    for row, label in zip(m.rows, labels):
        cells = []
        for col in m.cols:
            report = m.get(row, col)
            cells.append("-" if report is None else f"{report.per:.1f}")
        out.write(f"{label:<{width}} | " + " | ".join(cells) + "\n")
    return out.getvalue()


def matrix_to_csv(m: PerMatrix) -> str:
    """CSV rows: train_corpus,test_corpus,per,S,I,D,N."""
    lines = ["train_corpus,test_corpus,per,S,I,D,N"]
    for train in m.rows:
        for test in m.cols:
            report = m.get(train, test)
            if report is None:
                lines.append(f"{train},{test},,,,,")
            else:
                lines.append(
                    f"{train},{test},{report.per:.4f},{report.substitutions},"
                    f"{report.insertions},{report.deletions},{report.ref_length}"
                )
    return "\n".join(lines) + "\n"
