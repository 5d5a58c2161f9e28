"""Strong-convergence measurement by fine-reference path coarsening.

Protocol (after Higham, SIAM Review 2001, adapted to unknown solutions):
integrate each trajectory once with a very small step h_s = t_end / 2^k,
storing every per-step noise increment.  Re-integrate the same
trajectory from the same start with steps h_n = 2^n h_s, building the
coarse noise by exact pairwise composition of the stored increments, so
fine and coarse runs share one Brownian path.  The mean absolute
difference of the endpoints, as a function of h_n, is fitted to A h^a
in log-log space.

For the analytically solvable validation problem the reference endpoint
is replaced by the exact pathwise solution, which depends only on the
path's total Wiener increment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .increments import (NoiseIncrement, Z3Representation, compose_pairs,
                         sample_path_increments)
from .model import (CalculusConvention, EquilibriumSpec, SdeProblem,
                    benchmark_problem, convert_drift, sample_equilibrium,
                    validation_problem)
from .parallel import run_tasks
from .schemes import SchemeId, Stepper, dispatch
from .streams import RandomStream

__all__ = [
    "ConvergenceConfig",
    "ErrorCurve",
    "PowerLawFit",
    "run_convergence",
    "fit_power_law",
    "CURVE_CSV_HEADER",
    "FIT_CSV_HEADER",
]

CURVE_CSV_HEADER = ["scheme", "D", "level", "h", "mean_abs_error",
                    "std_error", "n_samples", "n_diverged"]
FIT_CSV_HEADER = ["scheme", "D", "A", "sigma_A", "alpha", "sigma_alpha",
                  "h_min", "h_max"]


@dataclass(frozen=True)
class ConvergenceConfig:
    """Parameters of one strong-convergence run.

    ``ref_exponent`` k sets the reference step h_s = t_end / 2^k;
    coarse levels n in [level_lo, level_hi] use h_n = 2^n h_s.
    ``problem`` selects the benchmark model or the solvable validation
    model; with ``reference="exact"`` (validation only) the analytic
    endpoint replaces the fine trajectory's.  ``chunk_size`` fixes the
    reduction granularity and is part of the manifest, so sums are
    reproducible at any worker count.
    """

    scheme: SchemeId
    D: float = 0.05
    t_end: float = 1.0
    ref_exponent: int = 14
    level_lo: int = 1
    level_hi: int = 8
    trajectories: int = 20_000
    fit_h_min: float = 1e-3
    fit_h_max: float = 1e-2
    seed: int = 0
    problem: str = "benchmark"           # "benchmark" | "validation"
    reference: str = "self"              # "self" | "exact"
    x0: float = 1.0                      # start point for the validation run
    divergence_guard: float = 1e6
    pc_iterations: int = 4
    chunk_size: int = 512

    def validate(self):
        if self.problem not in ("benchmark", "validation"):
            raise ValueError(f"unknown problem {self.problem!r}")
        if self.reference not in ("self", "exact"):
            raise ValueError(f"unknown reference {self.reference!r}")
        if self.reference == "exact" and self.problem != "validation":
            raise ValueError("exact reference requires the validation problem")
        if not 1 <= self.level_lo <= self.level_hi <= self.ref_exponent:
            raise ValueError(
                f"need 1 <= level_lo <= level_hi <= ref_exponent, got "
                f"[{self.level_lo}, {self.level_hi}] with k={self.ref_exponent}")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.fit_h_min < self.fit_h_max:
            raise ValueError("need 0 < fit_h_min < fit_h_max")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be >= 1")

    @property
    def h_ref(self) -> float:
        return self.t_end / 2 ** self.ref_exponent

    def level_h(self, n: int) -> float:
        return 2 ** n * self.h_ref


@dataclass(frozen=True)
class ErrorCurve:
    """Mean absolute endpoint error per coarsening level."""

    scheme: str                          # scheme label
    D: float
    levels: tuple                        # level exponents n
    h: tuple
    mean_abs_error: tuple
    std_error: tuple
    n_samples: tuple
    n_diverged: tuple

    def rows(self):
        for i, n in enumerate(self.levels):
            yield (self.scheme, self.D, n, self.h[i],
                   self.mean_abs_error[i], self.std_error[i],
                   self.n_samples[i], self.n_diverged[i])


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of error = A h^alpha over a window in h."""

    A: float
    sigma_A: float
    alpha: float
    sigma_alpha: float
    h_min: float
    h_max: float
    n_points: int

    def row(self, scheme_label: str, D: float):
        return (scheme_label, D, self.A, self.sigma_A, self.alpha,
                self.sigma_alpha, self.h_min, self.h_max)


def _resolve(cfg: ConvergenceConfig):
    """Problem, stepper (drift-converted if needed) and exact solution."""
    stepper = dispatch(cfg.scheme, pc_iterations=cfg.pc_iterations)
    if cfg.problem == "validation":
        problem, exact = validation_problem(cfg.D)
        # The validation SDE is posed in the Stratonovich sense; schemes
        # converging to the Ito reading integrate the converted drift so
        # every scheme targets the same pathwise solution.
        if stepper.calculus is CalculusConvention.ITO:
            problem = convert_drift(problem, CalculusConvention.STRATONOVICH,
                                    CalculusConvention.ITO)
        return problem, stepper, exact
    return benchmark_problem(cfg.D), stepper, None


def integrate_endpoint(stepper: Stepper, problem: SdeProblem, x0, t0: float,
                       inc: NoiseIncrement) -> np.ndarray:
    """Step a batch of trajectories through array increments; returns
    the endpoint states (inf/nan where a trajectory blew up)."""
    nsteps = np.shape(inc.z1)[-1]
    x = np.asarray(x0, dtype=float)
    t = t0
    with np.errstate(all="ignore"):
        for i in range(nsteps):
            step = NoiseIncrement(
                inc.h, inc.z1[..., i],
                None if inc.z2 is None else inc.z2[..., i],
                None if inc.z3 is None else inc.z3[..., i])
            x = stepper(problem, x, t, step)
            t += inc.h
    return x


def _run_chunk(args):
    cfg, start, count, custom_stepper = args
    problem, stepper, exact = _resolve(cfg)
    if custom_stepper is not None:
        stepper = custom_stepper
    nsteps = 2 ** cfg.ref_exponent
    levels = range(cfg.level_lo, cfg.level_hi + 1)
    eq_spec = EquilibriumSpec(cfg.D, n=0)

    sums = {n: [0.0, 0.0, 0, 0] for n in levels}   # sum, sumsq, n_ok, n_div
    depth = stepper.noise_depth
    rep = stepper.z3_rep or Z3Representation.ALT

    # One full-width noise batch per chunk: each trajectory's increments
    # come from its own stream, drawn in step order, then stacked.
    x_init = np.empty(count)
    z = [np.empty((count, nsteps)) if d < depth else None for d in range(3)]
    for j in range(count):
        stream = RandomStream(cfg.seed, start + j)
        if cfg.problem == "benchmark":
            x_init[j] = sample_equilibrium(stream, eq_spec)
        else:
            x_init[j] = cfg.x0
        traj = sample_path_increments(stream, cfg.h_ref, nsteps,
                                      rep=rep, depth=depth)
        for d, comp in enumerate((traj.z1, traj.z2, traj.z3)):
            if comp is not None:
                z[d][j] = comp
    inc = NoiseIncrement(cfg.h_ref, z[0], z[1], z[2])
    del z

    if exact is not None and cfg.reference == "exact":
        x_ref = exact(x_init, cfg.t_end, inc.z1.sum(axis=-1))
    else:
        x_ref = integrate_endpoint(stepper, problem, x_init, 0.0, inc)

    level_inc = inc
    for n in range(1, cfg.level_hi + 1):
        level_inc = compose_pairs(level_inc)
        if n < cfg.level_lo:
            continue
        x_f = integrate_endpoint(stepper, problem, x_init, 0.0, level_inc)
        err = np.abs(x_f - x_ref)
        ok = (np.isfinite(err) & (np.abs(x_f) <= cfg.divergence_guard)
              & (np.abs(x_ref) <= cfg.divergence_guard))
        rec = sums[n]
        rec[0] += float(err[ok].sum())
        rec[1] += float((err[ok] ** 2).sum())
        rec[2] += int(ok.sum())
        rec[3] += int(count - ok.sum())
    return sums


def run_convergence(cfg: ConvergenceConfig, workers: int = 1,
                    stepper: Optional[Stepper] = None) -> ErrorCurve:
    """Measure the error-vs-h curve for one scheme.

    ``stepper`` overrides the dispatched step function (used to probe
    building blocks that are not catalogued schemes); its noise
    requirements are honoured.  Work is split into ``cfg.chunk_size``
    trajectory chunks; partial sums merge in chunk order, so the result
    is identical for any worker count.
    """
    cfg.validate()
    label = stepper.label if stepper is not None else cfg.scheme.label
    chunks = []
    for start in range(0, cfg.trajectories, cfg.chunk_size):
        count = min(cfg.chunk_size, cfg.trajectories - start)
        chunks.append((cfg, start, count, stepper))
    results = run_tasks(_run_chunk, chunks, workers)

    levels = list(range(cfg.level_lo, cfg.level_hi + 1))
    merged = {n: [0.0, 0.0, 0, 0] for n in levels}
    for part in results:
        for n in levels:
            for k in range(4):
                merged[n][k] += part[n][k]

    h, mean, se, n_ok, n_div = [], [], [], [], []
    for n in levels:
        s, s2, cnt, div = merged[n]
        h.append(cfg.level_h(n))
        n_ok.append(cnt)
        n_div.append(div)
        if cnt > 0:
            mu = s / cnt
            var = max(s2 / cnt - mu * mu, 0.0)
            mean.append(mu)
            se.append(math.sqrt(var / cnt) if cnt > 1 else float("nan"))
        else:
            mean.append(float("nan"))
            se.append(float("nan"))
    return ErrorCurve(scheme=label, D=cfg.D, levels=tuple(levels),
                      h=tuple(h), mean_abs_error=tuple(mean),
                      std_error=tuple(se), n_samples=tuple(n_ok),
                      n_diverged=tuple(n_div))


def fit_power_law(curve: ErrorCurve, window=None) -> PowerLawFit:
    """Fit log(error) = log A + alpha log h over the window.

    Plain least squares on the transformed points; parameter standard
    errors come from the regression covariance, with sigma_A mapped
    through A = exp(intercept).
    """
    if window is None:
        h_min, h_max = min(curve.h), max(curve.h)
    else:
        h_min, h_max = window
    pts = [(h, e) for h, e, n in zip(curve.h, curve.mean_abs_error,
                                     curve.n_samples)
           if h_min <= h <= h_max and n > 0]
    if any(e <= 0 or not math.isfinite(e) for _, e in pts):
        raise ValueError("power-law fit needs positive, finite errors")
    if len(pts) < 3:
        raise ValueError(f"power-law fit needs >= 3 points in "
                         f"[{h_min}, {h_max}], got {len(pts)}")
    logh = np.array([math.log(h) for h, _ in pts])
    loge = np.array([math.log(e) for _, e in pts])
    X = np.column_stack([np.ones_like(logh), logh])
    coef, *_ = np.linalg.lstsq(X, loge, rcond=None)
    resid = loge - X @ coef
    dof = len(pts) - 2
    s2 = float(resid @ resid) / dof if dof > 0 else 0.0
    cov = s2 * np.linalg.inv(X.T @ X)
    intercept, alpha = coef
    A = math.exp(intercept)
    return PowerLawFit(A=A, sigma_A=A * math.sqrt(max(cov[0, 0], 0.0)),
                       alpha=float(alpha),
                       sigma_alpha=math.sqrt(max(cov[1, 1], 0.0)),
                       h_min=h_min, h_max=h_max, n_points=len(pts))
