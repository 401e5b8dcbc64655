"""Mean FDS probability versus scatterer number density."""

from __future__ import annotations

import numpy as np

from .model import predict_probability


def density_sweep(
    model, phantoms_by_density: dict, interval: float = 95.0, flip_average: bool = False
) -> dict:
    """Mean and percentile interval of FDS probability per density.

    ``phantoms_by_density`` maps density -> list of (2, H, W) input arrays
    (one per simulated phantom). Per phantom the score is the mean FDS
    probability over pixels; the interval is the central ``interval``
    percentile range of the per-phantom scores.
    """
    lo_q = (100.0 - interval) / 2.0
    hi_q = 100.0 - lo_q
    out = {}
    for density in sorted(phantoms_by_density):
        scores = [
            float(predict_probability(model, inputs, flip_average=flip_average).mean())
            for inputs in phantoms_by_density[density]
        ]
        scores = np.array(scores)
        out[float(density)] = {
            "mean": float(scores.mean()),
            "lo": float(np.percentile(scores, lo_q)),
            "hi": float(np.percentile(scores, hi_q)),
            "n": int(scores.size),
        }
    return out


def interval_widths(sweep: dict) -> dict:
    return {d: v["hi"] - v["lo"] for d, v in sweep.items()}


def spearman_rho(xs, ys) -> float:
    """Spearman rank correlation (average ranks for ties)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)

    def ranks(v):
        order = np.argsort(v, kind="mergesort")
        r = np.empty(v.size)
        r[order] = np.arange(1, v.size + 1)
        for val in np.unique(v):
            mask = v == val
            if mask.sum() > 1:
                r[mask] = r[mask].mean()
        return r

    rx, ry = ranks(xs), ranks(ys)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx**2).sum() * (ry**2).sum())
    return float((rx * ry).sum() / denom) if denom > 0 else 0.0
