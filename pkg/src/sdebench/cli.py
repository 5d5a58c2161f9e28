"""Command-line front end.

Subcommands drive the three experiment labs plus two self-check
reports.  Option values resolve in precedence order: explicit flag >
``SDEBENCH_<NAME>`` environment variable > ``--config`` manifest file >
built-in default.  Every run writes its CSVs and a reproducible
``run_summary.json`` under the output directory and nowhere else.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .convergence import (CURVE_CSV_HEADER, FIT_CSV_HEADER,
                          ConvergenceConfig, fit_power_law, run_convergence)
from .equilibrium import (CELL_CSV_HEADER, METRICS_CSV_HEADER,
                          HistogramConfig, sweep)
from .increments import (GaussianTriple, Z3Representation, integral_moments,
                         make_increment, representation_moments)
from .model import benchmark_problem, validation_problem
from .parallel import default_workers
from .reporting import read_config, write_csv, write_summary
from .schemes import SchemeId, dispatch
from .stability import (GRID_CSV_HEADER, SUMMARY_CSV_HEADER, StabilityConfig,
                        run_stability, stable_count)
from .streams import RandomStream

ENV_PREFIX = "SDEBENCH_"


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


# ---------------------------------------------------------------- parsing

def _float(text):
    return float(text)


def _int(text):
    return int(text)


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _schemes(text):
    if isinstance(text, (list, tuple)):
        return tuple(SchemeId.parse(str(t)) for t in text)
    if text.strip().lower() == "all":
        return tuple(SchemeId)
    try:
        return tuple(SchemeId.parse(t.strip()) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _float_list(text):
    if isinstance(text, (list, tuple)):
        return tuple(float(t) for t in text)
    return tuple(float(t) for t in text.split(","))


def _grid(text):
    """lo:hi:n[:log|lin] -> tuple of grid values."""
    if isinstance(text, (list, tuple)):
        return tuple(float(t) for t in text)
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise ConfigError(f"grid spec must be lo:hi:n[:log|lin], got {text!r}")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    mode = parts[3] if len(parts) == 4 else "log"
    if n < 1 or lo <= 0 and mode == "log":
        raise ConfigError(f"bad grid spec {text!r}")
    if mode == "log":
        return tuple(np.geomspace(lo, hi, n))
    if mode == "lin":
        return tuple(np.linspace(lo, hi, n))
    raise ConfigError(f"grid mode must be log or lin, got {mode!r}")


def _pair(text, kind=float):
    if isinstance(text, (list, tuple)):
        a, b = text
        return kind(a), kind(b)
    parts = text.split(":")
    if len(parts) != 2:
        raise ConfigError(f"expected lo:hi, got {text!r}")
    return kind(parts[0]), kind(parts[1])


def _resolve(args, file_cfg: dict, name: str, parse, default):
    """Flag > environment > config file > default."""
    flag = getattr(args, name, None)
    if flag is not None:
        return parse(flag)
    env = os.environ.get(ENV_PREFIX + name.upper())
    if env is not None:
        return parse(env)
    if name in file_cfg:
        return parse(file_cfg[name])
    return default


def _load_file_cfg(args) -> dict:
    if getattr(args, "config", None) is None:
        return {}
    path = Path(args.config)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return read_config(path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _common_flags(sub):
    sub.add_argument("--config", help="manifest file (key=value or JSON; "
                                      "a previous run_summary.json works)")
    sub.add_argument("--seed", help="master seed (default 0)")
    sub.add_argument("--workers", help="worker processes "
                                       "(default: available cores)")
    sub.add_argument("--out", help="output directory "
                                   "(default ./sdebench_out)")


def _common(args):
    file_cfg = _load_file_cfg(args)
    seed = _resolve(args, file_cfg, "seed", _int, 0)
    workers = _resolve(args, file_cfg, "workers", _int, default_workers())
    out = Path(_resolve(args, file_cfg, "out", str, "sdebench_out"))
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")
    return file_cfg, seed, workers, out


# ------------------------------------------------------------ convergence

def _cmd_convergence(args) -> int:
    file_cfg, seed, workers, out = _common(args)
    schemes = _resolve(args, file_cfg, "scheme", _schemes,
                       (SchemeId.HEUN,))
    problem = _resolve(args, file_cfg, "problem", str, "benchmark")
    reference = _resolve(args, file_cfg, "reference", str,
                         "exact" if problem == "validation" else "self")
    # The asymptotic window differs per problem: the weak-noise
    # validation SDE needs smaller h before its 1/2- and 1-order error
    # terms dominate the deterministic ones.
    default_window = (1e-4, 1e-3) if problem == "validation" else (1e-3, 1e-2)
    fit_window = _resolve(args, file_cfg, "fit_window", _pair, default_window)
    levels = _resolve(args, file_cfg, "levels", lambda t: _pair(t, int),
                      (1, 8))
    base = dict(
        D=_resolve(args, file_cfg, "d", _float, 0.05),
        t_end=_resolve(args, file_cfg, "t_end", _float, 1.0),
        ref_exponent=_resolve(args, file_cfg, "ref_exponent", _int, 14),
        level_lo=levels[0], level_hi=levels[1],
        trajectories=_resolve(args, file_cfg, "trajectories", _int, 20_000),
        fit_h_min=fit_window[0], fit_h_max=fit_window[1],
        seed=seed, problem=problem, reference=reference,
        x0=_resolve(args, file_cfg, "x0", _float, 1.0),
        pc_iterations=_resolve(args, file_cfg, "pc_iterations", _int, 4),
        chunk_size=_resolve(args, file_cfg, "chunk_size", _int, 512),
    )
    configs = []
    for scheme in schemes:
        cfg = ConvergenceConfig(scheme=scheme, **base)
        try:
            cfg.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        in_window = [n for n in range(cfg.level_lo, cfg.level_hi + 1)
                     if cfg.fit_h_min <= cfg.level_h(n) <= cfg.fit_h_max]
        if len(in_window) < 3:
            raise ConfigError(
                f"fit window [{cfg.fit_h_min}, {cfg.fit_h_max}] covers only "
                f"{len(in_window)} levels; need >= 3")
        configs.append(cfg)

    t0 = time.time()
    curve_rows, fit_rows = [], []
    for cfg in configs:
        curve = run_convergence(cfg, workers=workers)
        fit = fit_power_law(curve, window=(cfg.fit_h_min, cfg.fit_h_max))
        curve_rows.extend(curve.rows())
        fit_rows.append(fit.row(cfg.scheme.label, cfg.D))
        print(f"{cfg.scheme.label}: alpha = {fit.alpha:.4f} "
              f"+- {fit.sigma_alpha:.4f}, A = {fit.A:.5g} +- {fit.sigma_A:.2g}")
    outputs = [
        write_csv(out / "convergence_curve.csv", CURVE_CSV_HEADER, curve_rows),
        write_csv(out / "convergence_fit.csv", FIT_CSV_HEADER, fit_rows),
    ]
    manifest = dict(base, scheme=",".join(s.label for s in schemes),
                    fit_window=f"{fit_window[0]}:{fit_window[1]}",
                    levels=f"{levels[0]}:{levels[1]}",
                    workers=workers, out=str(out))
    for k in ("level_lo", "level_hi", "fit_h_min", "fit_h_max"):
        manifest.pop(k)
    write_summary(out, "convergence", manifest, seed, workers,
                  time.time() - t0, outputs)
    return 0


# -------------------------------------------------------------- stability

def _cmd_stability(args) -> int:
    file_cfg, seed, workers, out = _common(args)
    cfg = StabilityConfig(
        schemes=_resolve(args, file_cfg, "schemes", _schemes,
                         tuple(SchemeId)),
        D_values=_resolve(args, file_cfg, "grid_d", _grid,
                          tuple(np.geomspace(1e-2, 0.5, 10))),
        h_values=_resolve(args, file_cfg, "grid_h", _grid,
                          tuple(np.geomspace(1e-3, 0.5, 10))),
        trajectories=_resolve(args, file_cfg, "trajectories", _int, 300),
        t_end=_resolve(args, file_cfg, "t_end", _float, 1e3),
        threshold=_resolve(args, file_cfg, "threshold", _float, 100.0),
        seed=seed,
        pc_iterations=_resolve(args, file_cfg, "pc_iterations", _int, 4),
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    t0 = time.time()
    grid = run_stability(cfg, workers=workers)
    outputs = [
        write_csv(out / "stability_grid.csv", GRID_CSV_HEADER, grid.rows()),
        write_csv(out / "stability_summary.csv", SUMMARY_CSV_HEADER,
                  grid.summary_rows()),
    ]
    for scheme in cfg.schemes:
        total = len(cfg.D_values) * len(cfg.h_values)
        print(f"{scheme.label}: {stable_count(grid, scheme)}/{total} "
              f"stable cells")
    manifest = dict(
        schemes=",".join(s.label for s in cfg.schemes),
        grid_d=",".join(repr(float(v)) for v in cfg.D_values),
        grid_h=",".join(repr(float(v)) for v in cfg.h_values),
        trajectories=cfg.trajectories, t_end=cfg.t_end,
        threshold=cfg.threshold, pc_iterations=cfg.pc_iterations,
        workers=workers, out=str(out))
    write_summary(out, "stability", manifest, seed, workers,
                  time.time() - t0, outputs)
    return 0


# ------------------------------------------------------------ equilibrium

def _cmd_equilibrium(args) -> int:
    file_cfg, seed, workers, out = _common(args)
    schemes = _resolve(args, file_cfg, "schemes", _schemes, tuple(SchemeId))
    D_values = _resolve(args, file_cfg, "d", _float_list, None)
    if D_values is None:
        D_values = _resolve(args, file_cfg, "grid_d", _grid,
                            tuple(np.linspace(0.01, 0.25, 10)))
    h_values = _resolve(args, file_cfg, "h", _float_list, None)
    if h_values is None:
        h_values = _resolve(args, file_cfg, "grid_h", _grid,
                            tuple(np.linspace(0.01, 0.2, 20)))
    cfg = HistogramConfig(
        bin_width=_resolve(args, file_cfg, "bin_width", _float, 0.02),
        x_max=_resolve(args, file_cfg, "x_max", _float, 10.0),
        sample_interval=_resolve(args, file_cfg, "sample_interval",
                                 _float, 1.0),
        t_end=_resolve(args, file_cfg, "t_end", _float, 500.0),
        trajectories=_resolve(args, file_cfg, "trajectories", _int, 2000),
        guard=_resolve(args, file_cfg, "guard", _float, 100.0),
    )
    pc_iterations = _resolve(args, file_cfg, "pc_iterations", _int, 4)
    with_cells = _resolve(args, file_cfg, "histograms", _bool, True)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    t0 = time.time()
    metrics, histograms = sweep(schemes, D_values, h_values, cfg, seed=seed,
                                workers=workers, pc_iterations=pc_iterations)
    outputs = [write_csv(out / "equilibrium_metrics.csv", METRICS_CSV_HEADER,
                         (m.row() for m in metrics))]
    if with_cells:
        def cell_rows():
            for (scheme, D, h), hist in histograms.items():
                centers = hist.bin_centers
                for i in np.nonzero(hist.counts)[0]:
                    yield (scheme.label, D, h, centers[i],
                           int(hist.counts[i]))
        outputs.append(write_csv(out / "equilibrium_cells.csv",
                                 CELL_CSV_HEADER, cell_rows()))
    for m in metrics:
        print(f"{m.scheme.label} D={m.D:g} h={m.h:g} (n={m.density_n}): "
              f"distance={m.distance:.5f} ratio={m.ratio:.5f} "
              f"diverged={m.n_diverged}")
    manifest = dict(
        schemes=",".join(s.label for s in schemes),
        d=",".join(repr(float(v)) for v in D_values),
        h=",".join(repr(float(v)) for v in h_values),
        bin_width=cfg.bin_width, x_max=cfg.x_max,
        sample_interval=cfg.sample_interval, t_end=cfg.t_end,
        trajectories=cfg.trajectories, guard=cfg.guard,
        pc_iterations=pc_iterations, histograms=with_cells,
        workers=workers, out=str(out))
    write_summary(out, "equilibrium", manifest, seed, workers,
                  time.time() - t0, outputs)
    return 0


# ---------------------------------------------------------------- validate

def _validate_checks(seed, trajectories, ref_exponent, workers):
    """Self-validation: analytic orders, reductions, increment moments."""
    from .schemes import euler_step, hepc_step, heun_step

    checks = []

    # strong orders on the solvable linear SDE, exact endpoint reference
    order_bands = {
        SchemeId.EULER: (0.35, 0.70),
        SchemeId.HEUN: (0.85, 1.20),
        SchemeId.CUP2: (0.85, 1.25),
    }
    for scheme, (lo, hi) in order_bands.items():
        cfg = ConvergenceConfig(
            scheme=scheme, D=0.2, t_end=1.0, ref_exponent=ref_exponent,
            level_lo=1, level_hi=min(8, ref_exponent),
            trajectories=trajectories, fit_h_min=0.9 / 2 ** ref_exponent,
            fit_h_max=9.0 / 2 ** ref_exponent, seed=seed,
            problem="validation", reference="exact")
        curve = run_convergence(cfg, workers=workers)
        fit = fit_power_law(curve, (cfg.fit_h_min, cfg.fit_h_max))
        checks.append((f"analytic order {scheme.label}",
                       f"alpha={fit.alpha:.3f}", f"[{lo}, {hi}]",
                       lo <= fit.alpha <= hi))

    # exact reduction identities at a representative point
    p = benchmark_problem(0.05)
    rng = np.random.default_rng(seed)
    x, t, h = 0.7, 0.0, 0.01
    z1 = float(rng.standard_normal()) * np.sqrt(h)
    inc = make_increment(h, GaussianTriple(z1 / np.sqrt(h), 0.0, 0.0),
                         Z3Representation.ALT)
    pairs = [
        ("hepc(iterations=1) == heun",
         hepc_step(p, x, t, inc, iterations=1), heun_step(p, x, t, inc)),
    ]
    const_g = validation_problem(0.0)[0]  # f=x, g=0
    det = [
        ("heun(g=0) == deterministic heun", heun_step(const_g, x, t, inc),
         x + (h / 2) * (x + (x + h * x))),
        ("euler(g=0) == deterministic euler",
         euler_step(const_g, x, t, inc), x + h * x),
    ]
    for name, a, b in pairs + det:
        rel = abs(a - b) / max(abs(b), 1e-300)
        checks.append((name, f"rel_err={rel:.2e}", "<= 1e-12", rel <= 1e-12))

    # increment moments over a quick Monte Carlo
    n = 200_000
    h = 0.1
    stream = RandomStream(seed, 10_000_001)
    y = stream.generator.standard_normal((3, n))
    inc = make_increment(h, GaussianTriple(*y), Z3Representation.ALT)
    for name, sample, expect in [
        ("var(z2) = h^3/3", inc.z2 * inc.z2, h ** 3 / 3),
        ("cov(z1,z2) = h^2/2", inc.z1 * inc.z2, h ** 2 / 2),
        ("<z3> = 0 (mean-free z3)", inc.z3, 0.0),
        ("<z1 z3> = 0", inc.z1 * inc.z3, 0.0),
    ]:
        se = float(sample.std(ddof=1)) / np.sqrt(n)
        dev = abs(float(sample.mean()) - expect)
        checks.append((name, f"dev={dev:.3e}", f"<= 5 se ({5 * se:.3e})",
                       dev <= 5 * se))
    return checks


def _cmd_validate(args) -> int:
    file_cfg, seed, workers, out = _common(args)
    trajectories = _resolve(args, file_cfg, "trajectories", _int, 2000)
    ref_exponent = _resolve(args, file_cfg, "ref_exponent", _int, 13)
    t0 = time.time()
    checks = _validate_checks(seed, trajectories, ref_exponent, workers)
    width = max(len(c[0]) for c in checks)
    n_fail = 0
    for name, value, expected, ok in checks:
        status = "PASS" if ok else "FAIL"
        n_fail += not ok
        print(f"{name:<{width}}  {value:<18} expected {expected:<22} "
              f"[{status}]")
    outputs = [write_csv(out / "validate_report.csv",
                         ["check", "value", "expected", "status"],
                         ((n, v, e, "PASS" if ok else "FAIL")
                          for n, v, e, ok in checks))]
    write_summary(out, "validate",
                  dict(trajectories=trajectories, ref_exponent=ref_exponent,
                       workers=workers, out=str(out)),
                  seed, workers, time.time() - t0, outputs)
    print(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return 0 if n_fail == 0 else 2


# ------------------------------------------------------------------ moments

def _cmd_moments(args) -> int:
    file_cfg, seed, workers, out = _common(args)
    h = _resolve(args, file_cfg, "h", _float, 0.1)
    n = _resolve(args, file_cfg, "samples", _int, 1_000_000)
    t0 = time.time()
    rows = []
    for rep in Z3Representation:
        stream = RandomStream(seed, 0 if rep is Z3Representation.CUP else 1)
        y = stream.generator.standard_normal((3, n))
        inc = make_increment(h, GaussianTriple(*y), rep)
        samples = {
            "<z2^2>": inc.z2 * inc.z2,
            "<z1 z2>": inc.z1 * inc.z2,
            "<z3>": inc.z3,
            "<z1 z3>": inc.z1 * inc.z3,
            "<z2 z3>": inc.z2 * inc.z3,
            "<z3^2>": inc.z3 * inc.z3,
            "<z1^2 z3>": inc.z1 * inc.z1 * inc.z3,
            "<z1 z2 z3>": inc.z1 * inc.z2 * inc.z3,
            "<z2^2 z3>": inc.z2 * inc.z2 * inc.z3,
        }
        rep_exact = representation_moments(h, rep)
        true_exact = integral_moments(h)
        print(f"-- representation {rep.value} (h={h:g}, n={n})")
        for name, s in samples.items():
            mean = float(s.mean())
            se = float(s.std(ddof=1)) / np.sqrt(n)
            print(f"  {name:<12} measured {mean:+.6e} +- {se:.1e}   "
                  f"rep-exact {rep_exact[name]:+.6e}   "
                  f"integral {true_exact[name]:+.6e}")
            rows.append((rep.value, name, mean, se, rep_exact[name],
                         true_exact[name]))
    outputs = [write_csv(out / "moments.csv",
                         ["representation", "moment", "measured",
                          "std_error", "representation_exact",
                          "integral_exact"], rows)]
    write_summary(out, "moments", dict(h=h, samples=n, workers=workers,
                                       out=str(out)),
                  seed, workers, time.time() - t0, outputs)
    return 0


# --------------------------------------------------------------------- main

def build_parser() -> _Parser:
    parser = _Parser(prog="sdebench",
                     description="SDE integration-scheme benchmark workbench")
    parser.add_argument("--version", action="version",
                        version=f"sdebench {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("convergence", help="strong-convergence order fit")
    p.add_argument("--scheme", help="scheme label(s), comma separated or "
                                    "'all' (default Heun)")
    p.add_argument("--D", dest="d", help="noise intensity (default 0.05)")
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--ref-exponent", dest="ref_exponent",
                   help="k: reference step is t_end/2^k (default 14)")
    p.add_argument("--levels", help="coarsening level range lo:hi "
                                    "(default 1:8)")
    p.add_argument("--trajectories")
    p.add_argument("--fit-window", dest="fit_window",
                   help="h range for the fit, lo:hi")
    p.add_argument("--problem", choices=["benchmark", "validation"])
    p.add_argument("--reference", choices=["self", "exact"])
    p.add_argument("--x0", help="fixed start point (validation runs)")
    p.add_argument("--pc-iterations", dest="pc_iterations")
    p.add_argument("--chunk-size", dest="chunk_size")
    _common_flags(p)
    p.set_defaults(fn=_cmd_convergence)

    p = sub.add_parser("stability", help="(D, h) stability-region scan")
    p.add_argument("--schemes", help="comma list or 'all' (default all)")
    p.add_argument("--grid-D", dest="grid_d", help="lo:hi:n[:log|lin]")
    p.add_argument("--grid-h", dest="grid_h", help="lo:hi:n[:log|lin]")
    p.add_argument("--trajectories")
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--threshold", help="|x| divergence threshold "
                                       "(default 100)")
    p.add_argument("--pc-iterations", dest="pc_iterations")
    _common_flags(p)
    p.set_defaults(fn=_cmd_stability)

    p = sub.add_parser("equilibrium",
                       help="stationary-distribution metrics sweep")
    p.add_argument("--schemes", help="comma list or 'all' (default all)")
    p.add_argument("--D", dest="d", help="comma list of D values")
    p.add_argument("--h", help="comma list of h values")
    p.add_argument("--grid-D", dest="grid_d", help="lo:hi:n[:log|lin]")
    p.add_argument("--grid-h", dest="grid_h", help="lo:hi:n[:log|lin]")
    p.add_argument("--trajectories")
    p.add_argument("--t-end", dest="t_end")
    p.add_argument("--sample-interval", dest="sample_interval")
    p.add_argument("--bin-width", dest="bin_width")
    p.add_argument("--x-max", dest="x_max")
    p.add_argument("--guard", help="|x| trajectory-drop threshold")
    p.add_argument("--histograms", help="also write per-cell bin counts "
                                        "(default true)")
    p.add_argument("--pc-iterations", dest="pc_iterations")
    _common_flags(p)
    p.set_defaults(fn=_cmd_equilibrium)

    p = sub.add_parser("validate",
                       help="self-check: analytic orders, reductions, "
                            "increment moments")
    p.add_argument("--trajectories", help="(default 2000)")
    p.add_argument("--ref-exponent", dest="ref_exponent", help="(default 13)")
    _common_flags(p)
    p.set_defaults(fn=_cmd_validate)

    p = sub.add_parser("moments", help="z-representation moment report")
    p.add_argument("--h", help="step size (default 0.1)")
    p.add_argument("--samples", help="Monte Carlo sample count "
                                     "(default 1e6)")
    _common_flags(p)
    p.set_defaults(fn=_cmd_moments)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "fn", None) is None:
            parser.print_usage(sys.stderr)
            print("error: a subcommand is required", file=sys.stderr)
            return 1
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:   # runtime failure, not a usage problem
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
