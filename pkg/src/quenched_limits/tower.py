"""Induced return-time structure on the base interval [1/2, 1].

First returns of the composed maps to Lambda = [1/2, 1], the return-time
partition, tail statistics, separation times, and empirical distortion /
expansion checks for the induced map.

For both map families the orbit of a base point stays in [0, 1/2) between
returns and every branch involved is increasing, so {R = n} is a single
interval and the return-time value labels the partition cell uniquely.  In
particular first returns and Markov-partition returns coincide; the
``mode`` flag on records is metadata only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .maps import FiberMap, apply, derivative, left_branch_inverse
from .omega import ParamSequence

BASE_LO = 0.5
CAP_DEFAULT = 10 ** 6


@dataclass
class ReturnRecord:
    x: float
    R: int | None              # None when the cap was hit
    itinerary: str
    capped: bool
    mode: str = "first"


@dataclass
class ReturnPartition:
    omega: ParamSequence
    cells: list            # (lo, hi, R, image_ok)
    depth_cap: int
    refine_tol: float
    residual_mass: float   # Lebesgue mass of {R > depth_cap} plus merged slivers

    def masses(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for lo, hi, r, _ in self.cells:
            out[r] = out.get(r, 0.0) + (hi - lo)
        return out


def _check_base(x: float):
    if not (BASE_LO <= x <= 1.0):
        raise ValueError(f"point {x} outside the base [1/2, 1]")


def return_time(seq: ParamSequence, x: float, cap: int = CAP_DEFAULT) -> ReturnRecord:
    """First n >= 1 with f^n(x) back in [1/2, 1], or a capped record."""
    _check_base(x)
    if cap < 1:
        raise ValueError("cap must be >= 1")
    itin = []
    y = x
    for n in range(1, cap + 1):
        fmap = FiberMap(seq.family, seq.param(n - 1))
        itin.append("R" if y >= 0.5 else "L")
        y = apply(fmap, y)
        if y >= BASE_LO:
            return ReturnRecord(x, n, "".join(itin), False)
    return ReturnRecord(x, None, "".join(itin), True)


def return_times_vec(seq: ParamSequence, xs: np.ndarray, cap: int = CAP_DEFAULT) -> np.ndarray:
    """Vectorized first-return times; capped points get cap + 1."""
    xs = np.asarray(xs, dtype=float)
    R = np.full(xs.shape, cap + 1, dtype=np.int64)
    y = xs.copy()
    active = np.arange(xs.size)
    for n in range(1, cap + 1):
        if active.size == 0:
            break
        fmap = FiberMap(seq.family, seq.param(n - 1))
        y[active] = apply(fmap, y[active])
        returned = y[active] >= BASE_LO
        R[active[returned]] = n
        active = active[~returned]
    return R


def nth_return(seq: ParamSequence, x: float, n: int, cap: int = CAP_DEFAULT):
    """Cumulative n-th return time R^n (R^0 = 0); None once any leg caps."""
    _check_base(x)
    if n < 0:
        raise ValueError("n must be >= 0")
    total = 0
    y = x
    for _ in range(n):
        rec = return_time(seq.shift(total), y, cap)
        if rec.capped:
            return None
        total += rec.R
        for k in range(rec.R):
            y = apply(FiberMap(seq.family, seq.param(total - rec.R + k)), y)
    return total


def return_state(seq: ParamSequence, x: float, n: int, cap: int = CAP_DEFAULT):
    """(R^n, f^{R^n}(x)) in one pass, or (None, None) when capped."""
    _check_base(x)
    total = 0
    y = x
    for _ in range(n):
        for step in range(1, cap + 1):
            fmap = FiberMap(seq.family, seq.param(total))
            y = apply(fmap, y)
            total += 1
            if y >= BASE_LO:
                break
        else:
            return None, None
    return total, y


def build_partition(seq: ParamSequence, depth_cap: int, refine_tol: float = 1e-12) -> ReturnPartition:
    """Return-time cells {R = n}, n <= depth_cap, by boundary bisection.

    The boundary of {R > n} is the base point whose orbit sits exactly at
    1/2 at time n; it is found by pulling 1/2 back through the left-branch
    inverses of the fiber maps at steps n-1, ..., 1 and then through the
    right branch at step 0.
    """
    if depth_cap < 1:
        raise ValueError("depth_cap must be >= 1")
    boundaries = [1.0]   # b_0
    for n in range(1, depth_cap + 1):
        w = 0.5
        for k in range(n - 1, 0, -1):
            w = left_branch_inverse(FiberMap(seq.family, seq.param(k)), w)
        boundaries.append((w + 1.0) / 2.0)   # right branch inverse of w
    cells = []
    residual = boundaries[depth_cap] - BASE_LO
    for n in range(1, depth_cap + 1):
        lo, hi = boundaries[n], boundaries[n - 1]
        if hi - lo < refine_tol:
            residual += hi - lo
            continue
        cells.append((lo, hi, n, _image_ok(seq, lo, hi, n, refine_tol)))
    cells.sort(key=lambda c: c[0])
    return ReturnPartition(seq, cells, depth_cap, refine_tol, residual)


def _image_ok(seq: ParamSequence, lo: float, hi: float, R: int, tol: float) -> bool:
    """Does f^R map (lo, hi) onto the base up to tol at both ends?"""
    def f_R(x):
        y = x
        for k in range(R):
            y = apply(FiberMap(seq.family, seq.param(k)), y)
        return y

    width = hi - lo
    low_ok = any(f_R(lo + width * 10.0 ** -j) <= BASE_LO + max(tol, 1e-9)
                 for j in range(1, 13))
    high_ok = any(f_R(hi - width * 10.0 ** -j) >= 1.0 - max(tol, 1e-6)
                  for j in range(1, 13))
    return low_ok and high_ok


def exact_tail(family: str, alpha: float, n_max: int) -> np.ndarray:
    """Deterministic tail Leb(R > n)/Leb(base) for a constant-parameter map.

    Computed by tracking the boundary of {R > n} through left-branch
    preimages of 1/2; exact to bisection precision, so it resolves tails far
    below any Monte Carlo floor.  Index n of the result is the tail at n.
    """
    tail = np.empty(n_max + 1)
    tail[0] = 1.0
    if family == "doubling":
        tail[1:] = 0.5 ** np.arange(1, n_max + 1)
        return tail
    fmap = FiberMap(family, alpha)
    z = 0.5
    tail[1] = z
    for n in range(2, n_max + 1):
        z = left_branch_inverse(fmap, z)
        tail[n] = z
    return tail


@dataclass
class TailCurve:
    n: np.ndarray
    tail: np.ndarray
    std_err: np.ndarray
    n_eff: int
    capped_fraction: float
    warnings: list = field(default_factory=list)


def tail_curve(family: str, bounds: tuple[float, float], seeds: list[int],
               n_max: int, samples_per_omega: int, cap: int = CAP_DEFAULT) -> TailCurve:
    """Monte Carlo estimate of the annealed return-time tail.

    Base points are drawn uniformly on [1/2, 1] for each driving seed; the
    curve is the pooled fraction of samples with R > n.
    """
    from .omega import make_sequence

    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    ns = np.arange(0, n_max + 1)
    per_seed = np.empty((len(seeds), n_max + 1))
    capped_total = 0
    for si, seed in enumerate(seeds):
        seq = make_sequence(seed, family, bounds)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 0xA11))))
        xs = BASE_LO + 0.5 * rng.random(samples_per_omega)
        R = return_times_vec(seq, xs, cap)
        capped_total += int(np.sum(R > cap))
        per_seed[si] = np.array([np.mean(R > n) for n in ns])
    tail = per_seed.mean(axis=0)
    n_eff = len(seeds) * samples_per_omega
    if len(seeds) > 1:
        se = per_seed.std(axis=0, ddof=1) / math.sqrt(len(seeds))
    else:
        se = np.sqrt(np.clip(tail * (1 - tail), 0, None) / n_eff)
    capped_fraction = capped_total / n_eff
    warnings = []
    if capped_fraction > 0.01:
        warnings.append(f"capped fraction {capped_fraction:.3f} exceeds 1%")
    return TailCurve(ns, tail, se, n_eff, capped_fraction, warnings)


def gcd_check(partition: ReturnPartition, mass_floor: float) -> int:
    """gcd of the return times whose cells carry mass above mass_floor."""
    times = [r for r, m in partition.masses().items() if m > mass_floor]
    if not times:
        raise ValueError(f"no cell carries mass above {mass_floor}")
    return math.gcd(*times) if len(times) > 1 else times[0]


@dataclass
class SeparationResult:
    n: float                # number of joint returns before separation; inf if never
    capped: bool


def separation_time(seq: ParamSequence, x: float, y: float, cap: int = 64,
                    return_cap: int = CAP_DEFAULT) -> SeparationResult:
    """Markov returns survived together before x and y land in different cells.

    Cells of the return partition are labeled by the return-time value (one
    interval per value for these families), so separation is detected by the
    first disagreement of the successive return times.
    """
    _check_base(x)
    _check_base(y)
    if x == y:
        return SeparationResult(math.inf, False)
    t = 0
    px, py = x, y
    for n in range(cap):
        rx = return_time(seq.shift(t), px, return_cap)
        ry = return_time(seq.shift(t), py, return_cap)
        if rx.capped or ry.capped:
            return SeparationResult(math.inf, True)
        if rx.R != ry.R:
            return SeparationResult(n, False)
        for k in range(rx.R):
            fmap = FiberMap(seq.family, seq.param(t + k))
            px = apply(fmap, px)
            py = apply(fmap, py)
        t += rx.R
    return SeparationResult(math.inf, False)


def induced_jacobian(seq: ParamSequence, x: float, R: int) -> float:
    """Product of the fiber-map derivatives along the first R orbit steps."""
    jac = 1.0
    y = x
    for k in range(R):
        fmap = FiberMap(seq.family, seq.param(k))
        jac *= derivative(fmap, y)
        y = apply(fmap, y)
    return jac


def distortion_check(seq: ParamSequence, partition: ReturnPartition,
                     pair_samples: int, beta: float = 0.5,
                     rng_seed: int = 0) -> dict:
    """Sampled distortion and expansion diagnostics for the induced map.

    For same-cell pairs (x, y): the Jacobian-ratio deviation
    |J f^R(x)/J f^R(y) - 1| is compared against beta^s with s the
    separation time, and the one-return expansion |f^R x - f^R y| / |x - y|
    is checked against 1/beta.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((rng_seed, 0xD157))))
    cells = partition.cells
    masses = np.array([hi - lo for lo, hi, _, _ in cells])
    probs = masses / masses.sum()
    max_cf = 0.0
    min_expansion = math.inf
    beta_hat = 0.0
    violations = 0
    for _ in range(pair_samples):
        ci = rng.choice(len(cells), p=probs)
        lo, hi, R, _ = cells[ci]
        x, y = lo + (hi - lo) * rng.random(2)
        if x == y:
            continue
        jr = induced_jacobian(seq, x, R) / induced_jacobian(seq, y, R)
        dev = abs(jr - 1.0)
        fx = _iterate(seq, x, R)
        fy = _iterate(seq, y, R)
        expansion = abs(fx - fy) / abs(x - y)
        min_expansion = min(min_expansion, expansion)
        beta_hat = max(beta_hat, 1.0 / expansion)
        if expansion < 1.0 / beta:
            violations += 1
        if dev > 0.0:
            s = separation_time(seq, x, y, cap=64)
            denom = beta ** s.n if s.n != math.inf else 0.0
            if denom > 0:
                max_cf = max(max_cf, dev / denom)
    return {
        "empirical_CF": max_cf,
        "beta_hat": beta_hat,
        "min_expansion": min_expansion,
        "violations": violations,
        "pair_samples": pair_samples,
        "beta": beta,
    }


def _iterate(seq: ParamSequence, x: float, n: int) -> float:
    y = x
    for k in range(n):
        y = apply(FiberMap(seq.family, seq.param(k)), y)
    return y
