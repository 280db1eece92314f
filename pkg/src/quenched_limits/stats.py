"""Birkhoff-sum Monte Carlo and the quenched limit-law verification suite.

Partial sums S_k = sum_{j<=k} phi_{s^j w}(f^j_w x) are accumulated over an
ensemble of initial points; the stored per-sample summaries (checkpointed
sums, path extrema, iterated-logarithm envelopes) feed the CLT, LIL and
functional-CLT tests without keeping the full trajectory matrix.

The doubling family is iterated on sliding windows of an explicit random
bit stream: in float64 arithmetic x -> 2x mod 1 exhausts its 53 mantissa
bits after ~52 steps and every orbit collapses to 0, so long doubling
orbits must be simulated on fresh bits (exact in distribution for
Lebesgue-random initial points).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decomp import sample_from_density
from .kstest import ks_statistic, ks_pvalue, ks_2samp, normal_cdf
from .maps import FiberMap, Observable, apply
from .omega import ParamSequence
from .transfer import bin_average, equivariant_density, matrices_along, pushforward

LIL_MIN_N = 16


@dataclass
class BirkhoffEnsemble:
    family: str
    n_steps: int
    n_samples: int
    sampling: str                      # "equivariant" or "lebesgue"
    record_ns: np.ndarray              # checkpointed times, ends at n_steps
    S_records: np.ndarray              # [len(record_ns), n_samples]
    path_max: np.ndarray               # max_k S_k including S_0 = 0
    path_min: np.ndarray
    path_absmax: np.ndarray
    lil_max_c1: np.ndarray             # max_{k>=16} S_k / sqrt(k loglog k)
    lil_min_c1: np.ndarray
    lil_max_c2: np.ndarray             # same with sqrt(2 k loglog k)
    lil_min_c2: np.ndarray

    @property
    def terminal(self) -> np.ndarray:
        return self.S_records[-1]


def _dyadic_records(n_steps: int) -> np.ndarray:
    ks = [2 ** j for j in range(2, n_steps.bit_length()) if 2 ** j < n_steps]
    return np.array(sorted(set(ks + [n_steps])))


def _doubling_orbit_values(n_samples: int, n_steps: int, rng: np.random.Generator):
    """Yield x_k arrays for k = 1..n_steps from i.i.d. random bit streams."""
    n_words = (n_steps + 54) // 64 + 2
    words = rng.integers(0, 2 ** 64, size=(n_samples, n_words), dtype=np.uint64)
    scale = 2.0 ** -53
    for k in range(1, n_steps + 1):
        wi, off = divmod(k, 64)
        if off == 0:
            chunk = words[:, wi]
        else:
            chunk = (words[:, wi] << np.uint64(off)) | (words[:, wi + 1] >> np.uint64(64 - off))
        yield (chunk >> np.uint64(11)).astype(np.float64) * scale


def birkhoff_ensemble(seq: ParamSequence, phi: Observable, n_steps: int,
                      n_samples: int, sampling_mode: str = "equivariant",
                      n_bins: int = 2 ** 12, depth: int = 32,
                      subsamples: int = 32, rng_seed: int = 0,
                      record_ns: np.ndarray | None = None) -> BirkhoffEnsemble:
    """Simulate partial sums of the fiberwise-centered observable.

    Centering constants are grid quadratures of phi against the equivariant
    density chained forward fiber by fiber; initial points are drawn from
    the fiber-0 density (inverse CDF) or from Lebesgue.
    """
    if sampling_mode not in ("equivariant", "lebesgue"):
        raise ValueError("sampling_mode must be 'equivariant' or 'lebesgue'")
    if record_ns is None:
        record_ns = _dyadic_records(n_steps)
    record_ns = np.unique(np.append(np.asarray(record_ns, dtype=np.int64), n_steps))
    if record_ns[0] < 1 or record_ns[-1] > n_steps:
        raise ValueError("record times must lie in [1, n_steps]")
    rng = np.random.Generator(np.random.Philox(
        np.random.SeedSequence((seq.master_seed, seq.origin_offset, 0xB1F, rng_seed))))

    phi_bar = bin_average(phi, n_bins).values
    h = equivariant_density(seq, n_bins, depth, subsamples)
    means = np.empty(n_steps + 1)
    means[0] = h.mean_of(phi_bar)
    h_run = h
    for k, M in enumerate(matrices_along(seq, 0, n_steps, n_bins, subsamples), start=1):
        h_run = pushforward(M, h_run)
        means[k] = h_run.mean_of(phi_bar)

    use_bits = seq.family == "doubling"
    if use_bits:
        value_iter = _doubling_orbit_values(n_samples, n_steps, rng)
        x = None
    else:
        if sampling_mode == "equivariant":
            x = sample_from_density(h, n_samples, rng)
        else:
            x = rng.random(n_samples)
        params = seq.params(0, n_steps)

    S = np.zeros(n_samples)
    S_records = np.empty((record_ns.size, n_samples))
    path_max = np.zeros(n_samples)
    path_min = np.zeros(n_samples)
    path_absmax = np.zeros(n_samples)
    lil_max_c1 = np.full(n_samples, -np.inf)
    lil_min_c1 = np.full(n_samples, np.inf)
    lil_max_c2 = np.full(n_samples, -np.inf)
    lil_min_c2 = np.full(n_samples, np.inf)
    ri = 0
    for k in range(1, n_steps + 1):
        if use_bits:
            xk = next(value_iter)
        else:
            x = apply(FiberMap(seq.family, params[k - 1]), x)
            xk = x
        S += phi(xk) - means[k]
        np.maximum(path_max, S, out=path_max)
        np.minimum(path_min, S, out=path_min)
        np.maximum(path_absmax, np.abs(S), out=path_absmax)
        if k >= LIL_MIN_N:
            norm1 = math.sqrt(k * math.log(math.log(k)))
            z = S / norm1
            np.maximum(lil_max_c1, z, out=lil_max_c1)
            np.minimum(lil_min_c1, z, out=lil_min_c1)
            z2 = z / math.sqrt(2.0)
            np.maximum(lil_max_c2, z2, out=lil_max_c2)
            np.minimum(lil_min_c2, z2, out=lil_min_c2)
        if ri < record_ns.size and k == record_ns[ri]:
            S_records[ri] = S
            ri += 1
    return BirkhoffEnsemble(seq.family, n_steps, n_samples, sampling_mode,
                            record_ns, S_records, path_max, path_min,
                            path_absmax, lil_max_c1, lil_min_c1,
                            lil_max_c2, lil_min_c2)


def variance_growth(ens: BirkhoffEnsemble, n_boot: int = 200,
                    rng_seed: int = 1, ci_level: float = 0.95) -> dict:
    """Per-checkpoint sample variance of S_n over n, with bootstrap CIs.

    ci_level is per checkpoint; joint statements over many checkpoints
    should widen it accordingly.
    """
    if not (0.0 < ci_level < 1.0):
        raise ValueError("ci_level must be in (0, 1)")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((rng_seed, 0xB007))))
    ns = ens.record_ns
    v = np.empty(ns.size)
    lo = np.empty(ns.size)
    hi = np.empty(ns.size)
    tail = 0.5 * (1.0 - ci_level)
    idx = rng.integers(0, ens.n_samples, size=(n_boot, ens.n_samples))
    for i, n in enumerate(ns):
        s = ens.S_records[i]
        v[i] = s.var(ddof=1) / n
        boots = s[idx].var(axis=1, ddof=1) / n
        lo[i], hi[i] = np.quantile(boots, [tail, 1.0 - tail])
    return {"n": ns, "var_over_n": v, "ci_lo": lo, "ci_hi": hi}


def qclt_test(ens: BirkhoffEnsemble, sigma2: float) -> dict:
    """KS distance of S_n / (sigma sqrt n) against the standard normal."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive; degenerate observables "
                         "belong to the coboundary route")
    z = ens.terminal / math.sqrt(sigma2 * ens.n_steps)
    d = ks_statistic(z, normal_cdf)
    return {"ks_distance": d, "p_value": ks_pvalue(d, z.size), "n_samples": z.size}


def qclt_null_calibration(n_samples: int, n_steps: int = 256, reps: int = 100,
                          level: float = 0.01, rng_seed: int = 7) -> dict:
    """Rejection rate of the KS test on injected i.i.d. Gaussian increments."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((rng_seed, 0xCA1))))
    rejections = 0
    for _ in range(reps):
        z = rng.standard_normal((n_samples, n_steps)).sum(axis=1) / math.sqrt(n_steps)
        d = ks_statistic(z, normal_cdf)
        if ks_pvalue(d, n_samples) < level:
            rejections += 1
    return {"rejection_rate": rejections / reps, "reps": reps, "level": level}


def qlil_envelope(ens: BirkhoffEnsemble, sigma2: float) -> dict:
    """Iterated-logarithm envelope statistics under both normalizations.

    c=1 is the normalization sqrt(n loglog n); c=2 the classical
    sqrt(2 n loglog n).  Summaries are the ensemble median and IQR of the
    per-sample trajectory max (and min).
    """
    if ens.n_steps < LIL_MIN_N:
        raise ValueError(f"need n_steps >= {LIL_MIN_N} for loglog normalization")

    def summary(arr):
        q1, q2, q3 = np.quantile(arr, [0.25, 0.5, 0.75])
        return {"median": float(q2), "iqr": float(q3 - q1)}

    return {
        "sigma": math.sqrt(max(sigma2, 0.0)),
        "c1": {"max": summary(ens.lil_max_c1), "min": summary(ens.lil_min_c1)},
        "c2": {"max": summary(ens.lil_max_c2), "min": summary(ens.lil_min_c2)},
    }


def brownian_functional_samples(functional: str, sigma: float, n_paths: int,
                                n_steps: int = 2 ** 10, rng_seed: int = 11,
                                chunk: int = 4096) -> np.ndarray:
    """Monte Carlo samples of a path functional of sigma * B on [0, 1].

    For the running sup the per-step maximum is drawn exactly from the
    Brownian-bridge reflection law, removing the discrete-grid bias that a
    plain max over grid points would carry.
    """
    if functional not in ("sup", "sup_abs", "terminal"):
        raise ValueError(f"unknown functional {functional!r}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((rng_seed, 0xB2))))
    dt = 1.0 / n_steps
    out = np.empty(n_paths)
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        inc = rng.standard_normal((m, n_steps)) * (sigma * math.sqrt(dt))
        w = np.cumsum(inc, axis=1)
        if functional == "terminal":
            out[done:done + m] = w[:, -1]
        elif functional == "sup_abs":
            out[done:done + m] = np.max(np.abs(w), axis=1)
        else:
            a = np.concatenate([np.zeros((m, 1)), w[:, :-1]], axis=1)
            b = w
            u = rng.random((m, n_steps))
            step_max = 0.5 * (a + b + np.sqrt((b - a) ** 2
                                              - 2.0 * sigma * sigma * dt * np.log(u)))
            out[done:done + m] = step_max.max(axis=1)
        done += m
    return out


def brownian_sup_cdf(a: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Reflection principle: P(sup_{[0,1]} sigma B <= a) = 2 Phi(a/sigma) - 1."""
    a = np.asarray(a, dtype=float)
    return np.clip(2.0 * normal_cdf(a / sigma) - 1.0, 0.0, 1.0)


def brownian_oracle_self_test(n_paths: int = 10 ** 5, n_steps: int = 2 ** 10,
                              rng_seed: int = 13) -> dict:
    """KS of simulated Brownian sup samples against the reflection-law CDF."""
    sup = brownian_functional_samples("sup", 1.0, n_paths, n_steps, rng_seed)
    d = ks_statistic(sup, brownian_sup_cdf)
    return {"ks_distance": d, "n_paths": n_paths}


def qfclt_paths(ens: BirkhoffEnsemble, sigma2: float, functional: str,
                brownian_paths: int = 10 ** 5, brownian_steps: int = 2 ** 10,
                rng_seed: int = 17) -> dict:
    """Compare a path functional of S^{n,w} with the same functional of sigma B.

    The piecewise-linear path attains its extrema at the nodes S_k / sqrt n,
    so the stored path extrema determine the sup functionals exactly.  The
    terminal functional reduces to the CLT statistic (bit for bit).
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if functional == "terminal":
        res = qclt_test(ens, sigma2)
        res["functional"] = "terminal"
        return res
    root_n = math.sqrt(ens.n_steps)
    if functional == "sup":
        emp = ens.path_max / root_n
    elif functional == "sup_abs":
        emp = ens.path_absmax / root_n
    else:
        raise ValueError(f"unknown functional {functional!r}")
    ref = brownian_functional_samples(functional, math.sqrt(sigma2),
                                      brownian_paths, brownian_steps, rng_seed)
    d, p = ks_2samp(emp, ref)
    return {"functional": functional, "ks_distance": d, "p_value": p,
            "n_samples": emp.size, "brownian_paths": brownian_paths}


@dataclass(frozen=True)
class RateParams:
    p: float                       # integrability exponent, may be math.inf
    D: float = 0.0                 # polynomial tail exponent
    exponential: bool = False
    a: float = 1.0
    b: float = 1.0


def asip_rate(params: RateParams) -> dict:
    """Explicit convergence-rate exponents for the invariance principle.

    Polynomial tails 1/n^D need D > 2 + 4p/(p-1); then
    eps_1 = 2p / ((p-1)(D-2)) and
    eps_D = max{1/4 + (3e - 2e^3 - e^2)/4, e, (1+e)/4} - 1/4 at e = eps_1,
    with any rate exponent in (eps_D, 1/4) attainable.  Exponential tails
    admit arbitrarily small exponents.
    """
    if params.exponential:
        if not (params.a > 0 and 0 < params.b <= 1):
            raise ValueError("exponential tails need a > 0 and b in (0, 1]")
        return {"epsilon_0_interval": [0.0, 0.25],
                "arbitrarily_small": True, "tail": "exponential"}
    p, D = params.p, params.D
    if not p > 1:
        raise ValueError(f"need p > 1, got p={p}")
    ratio = 4.0 if math.isinf(p) else 4.0 * p / (p - 1.0)
    if not D > 2.0 + ratio:
        raise ValueError(
            f"inadmissible tail exponent: D={D} is not > 2 + 4p/(p-1) = {2.0 + ratio}")
    e1 = 2.0 / (D - 2.0) if math.isinf(p) else 2.0 * p / ((p - 1.0) * (D - 2.0))
    eD = max(0.25 + (3.0 * e1 - 2.0 * e1 ** 3 - e1 ** 2) / 4.0,
             e1, (1.0 + e1) / 4.0) - 0.25
    return {"epsilon_1": e1, "epsilon_D": eD,
            "epsilon_0_interval": [eD, 0.25], "tail": "polynomial"}
