"""Shared helpers: seeded substreams, regressions, report serialization."""

from __future__ import annotations

import csv
import json
import zlib
from pathlib import Path

import numpy as np


def substream(seed: int, *key) -> np.random.Generator:
    """Deterministic RNG substream keyed by (seed, key...).

    String keys are hashed with crc32 so tags like "uhc" or "probe-3"
    can be mixed with integer indices; the same (seed, key) always
    yields the same stream regardless of call order.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for k in key:
        if isinstance(k, str):
            words.append(zlib.crc32(k.encode()))
        else:
            words.append(int(k) & 0xFFFFFFFF)
    return np.random.default_rng(words)


def ls_slope(x, y, w=None):
    """Weighted least-squares slope/intercept of y against x.

    Returns (slope, intercept, rms_residual). Degenerate inputs
    (fewer than 2 distinct x) give slope 0 with infinite residual
    so callers can flag the fit as unusable.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if w is None:
        w = np.ones_like(x)
    w = np.asarray(w, dtype=float)
    if x.size < 2 or np.ptp(x) == 0.0:
        if x.size == 0:
            return 0.0, 0.0, np.inf
        return 0.0, float(np.average(y, weights=w)), np.inf if x.size < 2 else 0.0
    sw = w.sum()
    xm = np.average(x, weights=w)
    ym = np.average(y, weights=w)
    cov = np.sum(w * (x - xm) * (y - ym)) / sw
    var = np.sum(w * (x - xm) ** 2) / sw
    slope = cov / var
    intercept = ym - slope * xm
    res = y - (slope * x + intercept)
    rms = float(np.sqrt(np.sum(w * res**2) / sw))
    return float(slope), float(intercept), rms


def pooled_slope(groups):
    """Common slope across groups that share it but not their intercepts.

    `groups` is an iterable of (x_list, y_list).  Classic within-group
    least squares: slope = sum_g cov_g / sum_g var_g, each group fitted
    with its own intercept.  Returns (slope, rms_residual); degenerate
    input gives (0, inf).
    """
    num = den = 0.0
    residsq = wtot = 0.0
    pieces = []
    for xs, ys in groups:
        x = np.asarray(xs, dtype=float)
        y = np.asarray(ys, dtype=float)
        if x.size < 2 or np.ptp(x) == 0.0:
            continue
        xm, ym = x.mean(), y.mean()
        num += np.sum((x - xm) * (y - ym))
        den += np.sum((x - xm) ** 2)
        pieces.append((x - xm, y - ym))
    if den == 0.0:
        return 0.0, np.inf
    slope = num / den
    for dx, dy in pieces:
        residsq += np.sum((dy - slope * dx) ** 2)
        wtot += dx.size
    return float(slope), float(np.sqrt(residsq / max(wtot, 1)))


def decade_bins(values, ref=1.0):
    """Dyadic decade index j = floor(log2(ref / value)) per entry."""
    v = np.asarray(values, dtype=float)
    out = np.full(v.shape, -1, dtype=int)
    ok = v > 0
    out[ok] = np.floor(np.log2(ref / v[ok])).astype(int)
    return out


def profile_slope(contributions, min_count=20, counts=None):
    """Trend of log2(contribution) across consecutive scale bins.

    `contributions` maps bin index -> positive mass. Bins with fewer
    than `min_count` supporting samples (when counts given) are
    dropped. Returns the fitted slope, or None when fewer than two
    usable bins remain.
    """
    js, cs, ws = [], [], []
    for j in sorted(contributions):
        c = contributions[j]
        if c <= 0:
            continue
        if counts is not None and counts.get(j, 0) < min_count:
            continue
        js.append(j)
        cs.append(np.log2(c))
        ws.append(1.0 if counts is None else np.sqrt(counts[j]))
    if len(js) < 2:
        return None
    slope, _, _ = ls_slope(js, cs, ws)
    return slope


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path
