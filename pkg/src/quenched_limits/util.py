"""Small shared helpers: power-law fits and deterministic serialization."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def fit_loglog(n: np.ndarray, y: np.ndarray, window: tuple[float, float]) -> dict:
    """Least-squares slope of log y against log n over a window of n.

    Returns the decay exponent (positive for decaying curves) and the r^2
    of the fit; points with y <= 0 are excluded.
    """
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (n >= window[0]) & (n <= window[1]) & (y > 0) & (n > 0)
    if mask.sum() < 2:
        raise ValueError("fewer than 2 usable points in the fit window")
    lx, ly = np.log(n[mask]), np.log(y[mask])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return {"exponent": float(-slope), "intercept": float(intercept),
            "window": [float(window[0]), float(window[1])],
            "n_points": int(mask.sum()), "r2": float(r2)}


def fit_loglinear(n: np.ndarray, y: np.ndarray, window: tuple[float, float]) -> dict:
    """Least-squares fit of log y against n (geometric decay rate)."""
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    mask = (n >= window[0]) & (n <= window[1]) & (y > 0)
    if mask.sum() < 2:
        raise ValueError("fewer than 2 usable points in the fit window")
    slope, intercept = np.polyfit(n[mask], np.log(y[mask]), 1)
    return {"rate": float(-slope), "intercept": float(intercept),
            "window": [float(window[0]), float(window[1])],
            "n_points": int(mask.sum())}


def fmt17(x) -> str:
    """17-significant-digit decimal form; round-trips float64 exactly."""
    return format(float(x), ".17g")


def write_csv(path: Path, header: list[str], columns: list[np.ndarray]):
    """Deterministic CSV emission with fixed float formatting."""
    rows = zip(*columns)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt17(v) if isinstance(v, (float, np.floating)) else str(v)
                              for v in row) + "\n")


def write_json(path: Path, obj: dict):
    with open(path, "w") as fh:
        json.dump(_jsonify(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonify(obj):
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


def sha256_of(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
