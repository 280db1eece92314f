"""Ulam-discretized transfer operators, equivariant densities, dual operator.

Measures are stored as bin masses (not density values), which keeps every
pushforward exactly mass-conserving; densities are masses times n_bins.
The equivariant density h_w is obtained by pushing Lebesgue forward through
the fiber maps of the recent past (finite pullback), which is the direct
discretization of its construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .maps import FiberMap, Observable, apply
from .omega import ParamSequence

MASS_FLOOR = 1e-12


@dataclass
class GridDensity:
    mass: np.ndarray           # probability mass per bin, sums to 1

    @property
    def n_bins(self) -> int:
        return self.mass.size

    @property
    def density(self) -> np.ndarray:
        return self.mass * self.mass.size

    def mean_of(self, values: np.ndarray) -> float:
        return float(self.mass @ values)


@dataclass
class GridFunction:
    values: np.ndarray         # bin-averaged values

    @property
    def n_bins(self) -> int:
        return self.values.size


def uniform_density(n_bins: int) -> GridDensity:
    return GridDensity(np.full(n_bins, 1.0 / n_bins))


def bin_centers(n_bins: int) -> np.ndarray:
    return (np.arange(n_bins) + 0.5) / n_bins


def bin_average(fn, n_bins: int, subsamples: int = 16) -> GridFunction:
    """Bin-averaged observable values via stratified midpoint subsampling."""
    pts = _stratified_points(n_bins, subsamples)
    vals = np.asarray(fn(pts)).reshape(n_bins, subsamples).mean(axis=1)
    return GridFunction(vals)


def _stratified_points(n_bins: int, subsamples: int) -> np.ndarray:
    offs = (np.arange(subsamples) + 0.5) / subsamples
    return ((np.arange(n_bins)[:, None] + offs[None, :]) / n_bins).ravel()


def ulam_matrix(fmap: FiberMap, n_bins: int, subsamples: int = 64) -> sp.csr_matrix:
    """Row-stochastic bin-to-bin transition fractions under one fiber map.

    M[i, j] estimates Leb(bin_i intersect f^-1 bin_j) / Leb(bin_i) by
    stratified midpoint subsampling of bin i.  Row sums are exactly 1 when
    subsamples is a power of two (dyadic weights add exactly).
    """
    if n_bins < 2 or subsamples < 1:
        raise ValueError("need n_bins >= 2 and subsamples >= 1")
    pts = _stratified_points(n_bins, subsamples)
    img = apply(fmap, pts)
    j = np.minimum((img * n_bins).astype(np.int64), n_bins - 1)
    i = np.repeat(np.arange(n_bins, dtype=np.int64), subsamples)
    w = np.full(pts.size, 1.0 / subsamples)
    M = sp.coo_matrix((w, (i, j)), shape=(n_bins, n_bins)).tocsr()
    M.sum_duplicates()
    return M


def row_stochasticity_defect(M: sp.csr_matrix) -> float:
    return float(np.max(np.abs(np.asarray(M.sum(axis=1)).ravel() - 1.0)))


def pushforward(M: sp.csr_matrix, rho: GridDensity) -> GridDensity:
    """Image of a mass vector under one Ulam step; preserves total mass."""
    if M.shape[0] != rho.n_bins:
        raise ValueError("dimension mismatch between matrix and density")
    return GridDensity(rho.mass @ M)


def matrices_along(seq: ParamSequence, k_lo: int, k_hi: int, n_bins: int,
                   subsamples: int = 64):
    """Yield the Ulam matrices of the fiber maps at steps k_lo .. k_hi-1.

    Caches a single matrix when the parameter sequence is degenerate
    (constant parameter), which covers the deterministic baselines.
    """
    if seq.alpha_min == seq.alpha_max:
        M = ulam_matrix(FiberMap(seq.family, seq.alpha_min), n_bins, subsamples)
        for _ in range(k_lo, k_hi):
            yield M
        return
    for k in range(k_lo, k_hi):
        yield ulam_matrix(FiberMap(seq.family, seq.param(k)), n_bins, subsamples)


def equivariant_density(seq: ParamSequence, n_bins: int, pullback_depth: int,
                        subsamples: int = 64) -> GridDensity:
    """h_w approximated by pushing Lebesgue through the past fiber maps.

    Depth 0 returns the uniform density by convention.
    """
    if pullback_depth < 0:
        raise ValueError("pullback_depth must be >= 0")
    rho = uniform_density(n_bins)
    for M in matrices_along(seq, -pullback_depth, 0, n_bins, subsamples):
        rho = pushforward(M, rho)
    return rho


def equivariance_residual(seq: ParamSequence, n_bins: int, pullback_depth: int,
                          subsamples: int = 64) -> float:
    """L1 gap between push(h_w) and the independently pulled-back h_{shift w}."""
    h = equivariant_density(seq, n_bins, pullback_depth, subsamples)
    M0 = next(matrices_along(seq, 0, 1, n_bins, subsamples))
    pushed = pushforward(M0, h)
    h_next = equivariant_density(seq.shift(1), n_bins, pullback_depth, subsamples)
    return float(np.abs(pushed.mass - h_next.mass).sum())


@dataclass
class DualResult:
    values: np.ndarray
    mask: np.ndarray           # True where the target density is resolvable
    masked_fraction: float


def dual_apply_step(M: sp.csr_matrix, h: GridDensity, psi: np.ndarray,
                    mass_floor: float = MASS_FLOOR) -> tuple[DualResult, GridDensity]:
    """One application of the dual operator on the Ulam grid.

    (P psi)[j] = sum_i psi[i] h_mass[i] M[i, j] / h_mass'[j], with
    h_mass' = push(h); bins whose target mass falls below mass_floor are
    masked.  Returns the result together with the pushed density, so chains
    stay exactly composition-consistent.
    """
    num = (psi * h.mass) @ M
    h_next = pushforward(M, h)
    mask = h_next.mass >= mass_floor
    out = np.zeros_like(num)
    out[mask] = num[mask] / h_next.mass[mask]
    return DualResult(out, mask, 1.0 - mask.mean()), h_next


def dual_apply(seq: ParamSequence, psi: GridFunction, n_bins: int,
               pullback_depth: int, subsamples: int = 64,
               mass_floor: float = MASS_FLOOR) -> DualResult:
    """P_w applied to a grid function on fiber w (single step to fiber sw)."""
    if psi.n_bins != n_bins:
        raise ValueError("grid size mismatch")
    h = equivariant_density(seq, n_bins, pullback_depth, subsamples)
    M0 = next(matrices_along(seq, 0, 1, n_bins, subsamples))
    res, _ = dual_apply_step(M0, h, psi.values, mass_floor)
    if res.masked_fraction > 0.10:
        raise RuntimeError(f"masked-bin fraction {res.masked_fraction:.3f} exceeds 10%")
    return res


@dataclass
class DecayCurve:
    n: np.ndarray
    decay: np.ndarray
    std_err: np.ndarray
    masked_fraction: np.ndarray
    warnings: list = field(default_factory=list)


def decay_curve(family: str, bounds: tuple[float, float], seeds: list[int],
                phi: Observable, n_max: int, n_bins: int, pullback_depth: int,
                subsamples: int = 64, mass_floor: float = MASS_FLOOR) -> DecayCurve:
    """Annealed L1 decay of the iterated dual on the centered observable.

    Per seed the signed measure (phi - mean) d mu_w is pushed forward step
    by step; its total variation at step n equals the L1(mu) norm of
    P^n(phi_w - int phi_w d mu_w), so no divisions are needed except for
    the mask bookkeeping.
    """
    from .omega import make_sequence

    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    phi_bar = bin_average(phi, n_bins).values
    curves = np.empty((len(seeds), n_max + 1))
    masked = np.zeros((len(seeds), n_max + 1))
    for si, seed in enumerate(seeds):
        seq = make_sequence(seed, family, bounds)
        h = equivariant_density(seq, n_bins, pullback_depth, subsamples)
        centered = phi_bar - h.mean_of(phi_bar)
        w = centered * h.mass
        mask = h.mass >= mass_floor
        curves[si, 0] = np.abs(w[mask]).sum()
        masked[si, 0] = 1.0 - mask.mean()
        for n, M in enumerate(matrices_along(seq, 0, n_max, n_bins, subsamples), start=1):
            w = w @ M
            h = pushforward(M, h)
            mask = h.mass >= mass_floor
            curves[si, n] = np.abs(w[mask]).sum()
            masked[si, n] = 1.0 - mask.mean()
    decay = curves.mean(axis=0)
    if len(seeds) > 1:
        se = curves.std(axis=0, ddof=1) / math.sqrt(len(seeds))
    else:
        se = np.zeros(n_max + 1)
    masked_mean = masked.mean(axis=0)
    warnings = []
    if masked_mean[-1] > masked_mean[0] + 0.01:
        warnings.append("masked-bin fraction grows along the chain")
    return DecayCurve(np.arange(n_max + 1), decay, se, masked_mean, warnings)
