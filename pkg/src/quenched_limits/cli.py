"""Experiment runner: config parsing, subcommand dispatch, reproducible output.

Config files are flat ``key=value`` text (``#`` comments allowed); any key
can be overridden on the command line as ``--key value``.  Floats are
serialized with 17 significant digits and every reduction runs in a fixed
order, so identical configs produce byte-identical CSV/JSON output.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import coupling as coupling_mod
from . import decomp as decomp_mod
from . import stats as stats_mod
from . import tower as tower_mod
from . import transfer as transfer_mod
from .maps import get_observable
from .omega import make_sequence
from .util import fit_loglinear, fit_loglog, fmt17, sha256_of, write_csv, write_json

SUBCOMMANDS = ("tail", "partition", "density", "decay", "decompose",
               "couple", "clt", "lil", "fclt", "rate")


class ConfigError(Exception):
    pass


class NumericError(Exception):
    pass


@dataclass
class ExperimentConfig:
    family: str = "lsv"
    alpha_min: float = 0.05
    alpha_max: float = 0.15
    seed: int = 1
    n_seeds: int = 1
    n_bins: int = 4096
    depth: int = 32
    k_trunc: int = 16
    subsamples: int = 64
    n_steps: int = 4096
    n_samples: int = 10000
    observable: str = "cos2pi"
    gamma: float = 0.5
    sampling: str = "equivariant"
    n_max: int = 64
    samples: int = 100000
    cap: int = 1000000
    depth_cap: int = 32
    refine_tol: float = 1e-12
    mass_floor: float = 0.01
    l0: int = 1
    alpha_exp: float = 0.1
    pairs: int = 1000
    window_lo: float = 0.0      # 0 means per-subcommand default
    window_hi: float = 0.0
    functional: str = "sup"
    p: float = math.inf
    D: float = 10.0
    exponential: bool = False
    tail_a: float = 1.0
    tail_b: float = 1.0

    def seeds(self) -> list[int]:
        return [self.seed + i for i in range(self.n_seeds)]

    def sequence(self):
        return make_sequence(self.seed, self.family, (self.alpha_min, self.alpha_max))

    def phi(self):
        return get_observable(self.observable, self.gamma)

    def bounds(self) -> tuple[float, float]:
        return (self.alpha_min, self.alpha_max)

    def validate(self):
        if self.family not in ("lsv", "doubling"):
            raise ConfigError(f"family must be lsv or doubling, got {self.family!r}")
        if self.alpha_min > self.alpha_max:
            raise ConfigError("alpha_min must be <= alpha_max")
        if self.family == "lsv" and not (0.0 < self.alpha_min and self.alpha_max < 1.0):
            raise ConfigError("lsv parameters must lie in (0, 1)")
        positive_ints = ("n_seeds", "n_bins", "depth_cap", "n_steps", "n_samples",
                         "samples", "cap", "l0", "pairs", "subsamples")
        for name in positive_ints:
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.depth < 0 or self.k_trunc < 0:
            raise ConfigError("depth and k_trunc must be >= 0")
        if not (0.0 < self.alpha_exp < 1.0):
            raise ConfigError("alpha_exp must be in (0, 1)")
        if self.sampling not in ("equivariant", "lebesgue"):
            raise ConfigError("sampling must be equivariant or lebesgue")
        if self.functional not in ("sup", "sup_abs", "terminal"):
            raise ConfigError("functional must be sup, sup_abs or terminal")
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError("gamma must be in (0, 1]")
        if self.n_max < 2:
            raise ConfigError("n_max must be >= 2")

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = fmt17(v) if isinstance(v, float) else v
        return out


def _parse_value(name: str, raw: str):
    proto = ExperimentConfig.__dataclass_fields__.get(name)
    if proto is None:
        raise ConfigError(f"unknown config key {name!r}")
    kind = proto.type
    raw = raw.strip()
    try:
        if kind == "bool":
            if raw.lower() in ("1", "true", "yes"):
                return True
            if raw.lower() in ("0", "false", "no"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)   # accepts "inf"
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {raw!r}") from exc


def load_config(path: str | None, overrides: list[tuple[str, str]]) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            setattr(cfg, key, _parse_value(key, raw))
    for key, raw in overrides:
        setattr(cfg, key, _parse_value(key, raw))
    cfg.validate()
    return cfg


def _default_window(cfg: ExperimentConfig, lo: float, hi: float) -> tuple[float, float]:
    wl = cfg.window_lo if cfg.window_lo > 0 else lo
    wh = cfg.window_hi if cfg.window_hi > 0 else hi
    return (wl, wh)


def run_tail(cfg: ExperimentConfig, out: Path) -> list[Path]:
    tc = tower_mod.tail_curve(cfg.family, cfg.bounds(), cfg.seeds(),
                              cfg.n_max, cfg.samples, cfg.cap)
    csv = out / "tail.csv"
    write_csv(csv, ["n", "tail_estimate", "std_err", "n_eff"],
              [tc.n, tc.tail, tc.std_err, np.full(tc.n.size, tc.n_eff)])
    fit = fit_loglog(tc.n, tc.tail, _default_window(cfg, 2, cfg.n_max))
    fit["warnings"] = tc.warnings
    fit["capped_fraction"] = tc.capped_fraction
    fj = out / "tail_fit.json"
    write_json(fj, fit)
    return [csv, fj]


def run_partition(cfg: ExperimentConfig, out: Path) -> list[Path]:
    part = tower_mod.build_partition(cfg.sequence(), cfg.depth_cap, cfg.refine_tol)
    csv = out / "partition.csv"
    los = np.array([c[0] for c in part.cells])
    his = np.array([c[1] for c in part.cells])
    rs = np.array([c[2] for c in part.cells])
    oks = np.array([int(c[3]) for c in part.cells])
    write_csv(csv, ["lo", "hi", "R", "image_ok"], [los, his, rs, oks])
    info = {"residual_mass": part.residual_mass, "depth_cap": part.depth_cap,
            "gcd": tower_mod.gcd_check(part, cfg.mass_floor),
            "n_cells": len(part.cells)}
    pj = out / "partition.json"
    write_json(pj, info)
    return [csv, pj]


def run_density(cfg: ExperimentConfig, out: Path) -> list[Path]:
    seq = cfg.sequence()
    h = transfer_mod.equivariant_density(seq, cfg.n_bins, cfg.depth, cfg.subsamples)
    csv = out / "density.csv"
    write_csv(csv, ["bin", "mass", "density"],
              [np.arange(cfg.n_bins), h.mass, h.density])
    resid = transfer_mod.equivariance_residual(seq, cfg.n_bins, cfg.depth, cfg.subsamples)
    dj = out / "density.json"
    write_json(dj, {"equivariance_residual_l1": resid, "depth": cfg.depth,
                    "n_bins": cfg.n_bins})
    return [csv, dj]


def run_decay(cfg: ExperimentConfig, out: Path) -> list[Path]:
    dc = transfer_mod.decay_curve(cfg.family, cfg.bounds(), cfg.seeds(), cfg.phi(),
                                  cfg.n_max, cfg.n_bins, cfg.depth, cfg.subsamples)
    csv = out / "decay.csv"
    write_csv(csv, ["n", "decay_estimate", "std_err"],
              [dc.n, dc.decay, dc.std_err])
    fit = fit_loglog(dc.n, dc.decay, _default_window(cfg, 1, cfg.n_max))
    fit["warnings"] = dc.warnings
    fj = out / "decay_fit.json"
    write_json(fj, fit)
    return [csv, fj]


def run_decompose(cfg: ExperimentConfig, out: Path) -> list[Path]:
    d = decomp_mod.martingale_psi(cfg.sequence(), cfg.phi(), cfg.k_trunc,
                                  cfg.n_bins, cfg.depth, cfg.subsamples)
    s2, se, _ = decomp_mod.sigma_squared(cfg.family, cfg.bounds(), cfg.seeds(),
                                         cfg.phi(), cfg.k_trunc, cfg.n_bins,
                                         cfg.depth, cfg.subsamples)
    csv = out / "decompose.csv"
    write_csv(csv, ["bin", "g", "g_next", "psi"],
              [np.arange(cfg.n_bins), d.g.values, d.g_next.values, d.psi.values])
    rep = d.report()
    rep.update({"sigma2": s2, "sigma2_se": se, "warnings": d.warnings})
    dj = out / "decompose.json"
    write_json(dj, rep)
    return [csv, dj]


def run_couple(cfg: ExperimentConfig, out: Path) -> list[Path]:
    ct = coupling_mod.coupling_tail(cfg.family, cfg.bounds(), cfg.seeds(), cfg.l0,
                                    cfg.alpha_exp, cfg.n_max, cfg.pairs, cfg.cap)
    csv = out / "couple.csv"
    write_csv(csv, ["n", "tail_estimate", "std_err", "capped_fraction"],
              [ct.n, ct.tail, ct.std_err, np.full(ct.n.size, ct.capped_fraction)])
    fit = fit_loglinear(ct.n, ct.tail, _default_window(cfg, 1, cfg.n_max))
    fj = out / "couple_fit.json"
    write_json(fj, fit)
    return [csv, fj]


def _ensemble_and_sigma(cfg: ExperimentConfig):
    s2, se, _ = decomp_mod.sigma_squared(cfg.family, cfg.bounds(), cfg.seeds(),
                                         cfg.phi(), cfg.k_trunc, cfg.n_bins,
                                         cfg.depth, cfg.subsamples)
    ens = stats_mod.birkhoff_ensemble(cfg.sequence(), cfg.phi(), cfg.n_steps,
                                      cfg.n_samples, cfg.sampling, cfg.n_bins,
                                      cfg.depth, min(cfg.subsamples, 32))
    return ens, s2, se


def run_clt(cfg: ExperimentConfig, out: Path) -> list[Path]:
    ens, s2, se = _ensemble_and_sigma(cfg)
    if s2 <= 0:
        raise NumericError("sigma2 estimate is not positive; use the coboundary route")
    vg = stats_mod.variance_growth(ens)
    csv = out / "clt.csv"
    write_csv(csv, ["n", "var_over_n", "ci_lo", "ci_hi"],
              [vg["n"], vg["var_over_n"], vg["ci_lo"], vg["ci_hi"]])
    res = stats_mod.qclt_test(ens, s2)
    res.update({"sigma2": s2, "sigma2_se": se,
                "verdict": "pass" if res["ks_distance"] < 0.03 else "fail"})
    cj = out / "clt.json"
    write_json(cj, res)
    return [csv, cj]


def run_lil(cfg: ExperimentConfig, out: Path) -> list[Path]:
    ens, s2, se = _ensemble_and_sigma(cfg)
    env = stats_mod.qlil_envelope(ens, s2)
    env["sigma2_se"] = se
    csv = out / "lil.csv"
    write_csv(csv, ["sample", "max_c1", "min_c1", "max_c2", "min_c2"],
              [np.arange(ens.n_samples), ens.lil_max_c1, ens.lil_min_c1,
               ens.lil_max_c2, ens.lil_min_c2])
    lj = out / "lil.json"
    write_json(lj, env)
    return [csv, lj]


def run_fclt(cfg: ExperimentConfig, out: Path) -> list[Path]:
    ens, s2, se = _ensemble_and_sigma(cfg)
    if s2 <= 0:
        raise NumericError("sigma2 estimate is not positive; use the coboundary route")
    res = stats_mod.qfclt_paths(ens, s2, cfg.functional)
    res.update({"sigma2": s2, "sigma2_se": se})
    if cfg.functional == "sup":
        res["brownian_self_test"] = stats_mod.brownian_oracle_self_test(
            n_paths=min(10 ** 5, 10 * cfg.n_samples))
    if cfg.functional == "terminal":
        emp = ens.terminal / math.sqrt(s2 * ens.n_steps)
    elif cfg.functional == "sup":
        emp = ens.path_max / math.sqrt(ens.n_steps)
    else:
        emp = ens.path_absmax / math.sqrt(ens.n_steps)
    csv = out / "fclt.csv"
    write_csv(csv, ["sample", "functional_value"],
              [np.arange(ens.n_samples), emp])
    fj = out / "fclt.json"
    write_json(fj, res)
    return [csv, fj]


def run_rate(cfg: ExperimentConfig, out: Path) -> list[Path]:
    params = stats_mod.RateParams(cfg.p, cfg.D, cfg.exponential, cfg.tail_a, cfg.tail_b)
    try:
        res = stats_mod.asip_rate(params)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rj = out / "rate.json"
    write_json(rj, res)
    return [rj]


HANDLERS = {
    "tail": run_tail, "partition": run_partition, "density": run_density,
    "decay": run_decay, "decompose": run_decompose, "couple": run_couple,
    "clt": run_clt, "lil": run_lil, "fclt": run_fclt, "rate": run_rate,
}


def run(subcommand: str, cfg: ExperimentConfig, out_dir: str | Path) -> int:
    """Execute one subcommand; returns the process exit status."""
    t0 = time.perf_counter()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = HANDLERS[subcommand](cfg, out)
        manifest = {
            "subcommand": subcommand,
            "config": cfg.as_dict(),
            "version": __version__,
            "wall_time_s": time.perf_counter() - t0,
            "files": {f.name: sha256_of(f) for f in files},
        }
        write_json(out / "manifest.json", manifest)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, RuntimeError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quenched-limits",
        description="Quenched limit-law experiments for random interval maps. "
                    "CSV columns per subcommand are documented in docs/formats.md.")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="flat key=value config file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="reserved; execution is currently single-threaded")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # peel off --key value overrides the parser does not know about
    known = {"--config", "--out", "--threads"}
    passthrough, overrides = [], []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and tok not in known and not tok.startswith("--help"):
            if i + 1 >= len(argv):
                print(f"config error: missing value for {tok}", file=sys.stderr)
                return 2
            overrides.append((tok[2:], argv[i + 1]))
            i += 2
        else:
            if tok in known:
                if i + 1 >= len(argv):
                    print(f"config error: missing value for {tok}", file=sys.stderr)
                    return 2
                passthrough.extend(argv[i:i + 2])
                i += 2
            else:
                passthrough.append(tok)
                i += 1
    args = _build_parser().parse_args(passthrough)
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return run(args.subcommand, cfg, args.out)


if __name__ == "__main__":
    sys.exit(main())
