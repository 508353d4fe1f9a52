"""2-D feature-distribution analysis: frame sampling, PCA, separation ratio,
scatter output (SVG + CSV)."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .types import FeatureMatrix

DOMAIN_COLORS = {"conversational": "red", "broadcast": "green", "scripted": "blue"}
_FALLBACK_COLORS = ("red", "green", "blue", "orange", "purple", "brown")

POWER_ITER_TOL = 1e-10
POWER_ITER_MAX = 10000


@dataclass
class Projector:
    mean: np.ndarray
    axes: np.ndarray  # k x D, orthonormal rows
    explained: np.ndarray  # fraction of total variance per axis, non-increasing


def sample_frames(
    frames_by_domain: dict[str, list[FeatureMatrix]] | dict[str, np.ndarray],
    n_per_domain: int,
    seed: int,
) -> tuple[np.ndarray, list[str]]:
    """Seeded uniform sample without replacement, per domain.

    Domains with fewer than n frames contribute everything (with a warning).
    Returns (frames, domain labels) with domains in sorted order.
    """
    rows = []
    labels: list[str] = []
    for dom_index, domain in enumerate(sorted(frames_by_domain)):
        mats = frames_by_domain[domain]
        pool = mats if isinstance(mats, np.ndarray) else np.vstack([fm.data for fm in mats])
        if pool.shape[0] == 0:
            raise ValueError(f"domain {domain!r} has no frames")
        rng = np.random.default_rng(np.random.SeedSequence([seed, dom_index]))
        if pool.shape[0] <= n_per_domain:
            if pool.shape[0] < n_per_domain:
                warnings.warn(
                    f"domain {domain!r} has only {pool.shape[0]} frames; sampling all",
                    stacklevel=2,
                )
            chosen = pool
        else:
            idx = rng.choice(pool.shape[0], size=n_per_domain, replace=False)
            chosen = pool[np.sort(idx)]
        rows.append(chosen)
        labels.extend([domain] * chosen.shape[0])
    return np.vstack(rows), labels


def _power_iteration(cov: np.ndarray, prior_axes: list[np.ndarray], rng) -> tuple[np.ndarray, float]:
    d = cov.shape[0]
    v = rng.standard_normal(d)
    for prev in prior_axes:
        v -= (v @ prev) * prev
    norm = np.linalg.norm(v)
    v = v / norm if norm > 0 else np.eye(d)[0]
    for _ in range(POWER_ITER_MAX):
        w = cov @ v
        for prev in prior_axes:
            w -= (w @ prev) * prev
        norm = np.linalg.norm(w)
        if norm < 1e-30:
            # Deflated matrix is (numerically) zero: any orthonormal completion works.
            return v, 0.0
        w /= norm
        if w @ v < 0:
            w = -w
        delta = np.max(np.abs(w - v))
        v = w
        if delta < POWER_ITER_TOL:
            return v, float(v @ cov @ v)
    raise RuntimeError(f"power iteration failed to converge (residual {delta:.3e})")


def pca_fit(frames: np.ndarray, k: int = 2, seed: int = 0) -> Projector:
    """Top-k principal axes by deflated power iteration on the covariance."""
    x = np.asarray(frames, dtype=np.float64)
    if x.shape[0] < k + 1:
        raise ValueError(f"need at least {k + 1} frames to fit {k} axes")
    if x.shape[1] < k:
        raise ValueError(f"need dimensionality >= {k}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = (centered.T @ centered) / x.shape[0]
    total_var = float(np.trace(cov))
    rng = np.random.default_rng(np.random.SeedSequence([seed, 23]))
    axes: list[np.ndarray] = []
    variances: list[float] = []
    deflated = cov.copy()
    for _ in range(k):
        v, lam = _power_iteration(deflated, axes, rng)
        axes.append(v)
        variances.append(lam)
        deflated = deflated - lam * np.outer(v, v)
    explained = np.array(variances) / total_var if total_var > 0 else np.zeros(k)
    return Projector(mean=mean, axes=np.array(axes), explained=explained)


def project(projector: Projector, frames: np.ndarray) -> np.ndarray:
    x = np.asarray(frames, dtype=np.float64)
    if x.shape[-1] != projector.mean.shape[0]:
        raise ValueError(
            f"frames have dim {x.shape[-1]}, projector expects {projector.mean.shape[0]}"
        )
    return (x - projector.mean) @ projector.axes.T


def domain_separation(points: np.ndarray, domains: list[str]) -> float:
    """Mean pairwise distance between domain centroids over the pooled
    within-domain standard deviation (rigid-motion invariant)."""
    points = np.asarray(points, dtype=np.float64)
    domains = list(domains)
    uniq = sorted(set(domains))
    if len(uniq) < 2:
        raise ValueError("need at least two domains")
    tags = np.array(domains)
    centroids = {}
    sq_sum = 0.0
    for dom in uniq:
        cloud = points[tags == dom]
        centroids[dom] = cloud.mean(axis=0)
        sq_sum += float(((cloud - centroids[dom]) ** 2).sum())
    within_std = np.sqrt(sq_sum / points.shape[0])
    dists = [
        np.linalg.norm(centroids[a] - centroids[b])
        for i, a in enumerate(uniq)
        for b in uniq[i + 1 :]
    ]
    if within_std == 0.0:
        return 0.0 if max(dists) == 0.0 else np.inf
    return float(np.mean(dists) / within_std)


def _domain_color(domain: str, uniq: list[str]) -> str:
    if domain in DOMAIN_COLORS:
        return DOMAIN_COLORS[domain]
    return _FALLBACK_COLORS[uniq.index(domain) % len(_FALLBACK_COLORS)]


def emit_scatter(points: np.ndarray, domains: list[str], path: str | os.PathLike) -> None:
    """Write an 800x800 SVG scatter and a sibling .csv with x,y,domain rows."""
    path = Path(path)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    domains = list(domains)
    uniq = sorted(set(domains))
    size = 800
    margin = 20
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">\n'
        f'<rect width="{size}" height="{size}" fill="white"/>\n'
    ]
    if points.shape[0]:
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        scaled = margin + (points - lo) / span * (size - 2 * margin)
        for (x, y), dom in zip(scaled, domains):
            color = _domain_color(dom, uniq)
            # SVG y axis points down; flip so larger component-2 plots higher.
            parts.append(
                f'<circle cx="{x:.2f}" cy="{size - y:.2f}" r="2" fill="{color}" fill-opacity="0.5"/>\n'
            )
    parts.append("</svg>\n")
    path.write_text("".join(parts), encoding="utf-8")
    csv_lines = ["x,y,domain"]
    csv_lines += [f"{x:.6f},{y:.6f},{dom}" for (x, y), dom in zip(points, domains)]
    path.with_suffix(".csv").write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
