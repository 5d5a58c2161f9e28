"""Long-run sampling of the stationary distribution and its comparison
against the closed-form density.

Each (scheme, D, h) cell integrates a batch of trajectories started in
equilibrium, records the state every ``sample_interval`` time units into
an integer-count histogram, and scores the empirical density with two
L1-type metrics:

  distance:  integral of |P_eq - P| dx over the histogram range, which
             weights the well-sampled bulk;
  ratio:     integral of |1 - P/P_eq| dx restricted to where
             P_eq(x) >= 1e-4 P_eq(0), which weights the tails.

Trajectories that blow up are dropped from the moment they cross the
guard and reported; their earlier samples remain (they were valid draws
at the time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .increments import (GaussianTriple, NoiseIncrement, Z3Representation,
                         make_increment)
from .model import (EquilibriumSpec, benchmark_problem, equilibrium_density,
                    sample_equilibrium)
from .parallel import run_tasks
from .schemes import SchemeId, dispatch
from .streams import RandomStream

__all__ = [
    "HistogramConfig",
    "EmpiricalDistribution",
    "DistributionMetrics",
    "run_equilibrium",
    "distance_metric",
    "ratio_metric",
    "support_cut",
    "sweep",
    "CELL_CSV_HEADER",
    "METRICS_CSV_HEADER",
]

CELL_CSV_HEADER = ["scheme", "D", "h", "bin_center", "count"]
METRICS_CSV_HEADER = ["scheme", "D", "h", "density_n", "distance", "ratio",
                      "n_samples", "n_diverged"]


@dataclass(frozen=True)
class HistogramConfig:
    """Sampling and binning parameters for stationary-distribution runs.

    Defaults give 1e6 samples per cell (2000 trajectories, horizon 500,
    one sample per unit time) on uniform 0.02-wide bins over [-10, 10],
    wide enough to cover the ratio metric's support for every D in use.
    """

    bin_width: float = 0.02
    x_max: float = 10.0
    sample_interval: float = 1.0
    t_end: float = 500.0
    trajectories: int = 2000
    guard: float = 100.0
    block_steps: int = 2048

    def validate(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if self.x_max <= 0:
            raise ValueError("x_max must be positive")
        if self.sample_interval <= 0 or self.t_end <= 0:
            raise ValueError("sample_interval and t_end must be positive")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")

    def edges(self) -> np.ndarray:
        n_bins = int(round(2 * self.x_max / self.bin_width))
        return -self.x_max + self.bin_width * np.arange(n_bins + 1)


@dataclass
class EmpiricalDistribution:
    """Integer-count histogram with its binning metadata.

    ``total_samples`` counts every recorded state including those that
    fell outside the bin range, so the density view integrates to
    (total - out_of_range) / total.  Merging across workers is exact
    integer addition.
    """

    edges: np.ndarray
    counts: np.ndarray
    total_samples: int = 0
    out_of_range: int = 0

    @classmethod
    def empty(cls, edges: np.ndarray) -> "EmpiricalDistribution":
        return cls(edges=np.asarray(edges, dtype=float),
                   counts=np.zeros(len(edges) - 1, dtype=np.int64))

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def record(self, values: np.ndarray):
        c, _ = np.histogram(values, bins=self.edges)
        self.counts += c
        self.total_samples += values.size
        self.out_of_range += values.size - int(c.sum())

    def merge(self, other: "EmpiricalDistribution"):
        if not np.array_equal(self.edges, other.edges):
            raise ValueError("cannot merge histograms with different binning")
        self.counts += other.counts
        self.total_samples += other.total_samples
        self.out_of_range += other.out_of_range

    def density(self) -> np.ndarray:
        if self.total_samples == 0:
            raise ValueError("empty histogram has no density")
        return self.counts / (self.total_samples * self.bin_width)


@dataclass(frozen=True)
class DistributionMetrics:
    scheme: SchemeId
    D: float
    h: float
    density_n: int
    distance: float
    ratio: float
    x_cut: float
    n_samples: int
    n_diverged: int

    def row(self):
        return (self.scheme.label, self.D, self.h, self.density_n,
                self.distance, self.ratio, self.n_samples, self.n_diverged)


def support_cut(spec: EquilibriumSpec) -> float:
    """|x| below which P_eq(x) >= 1e-4 P_eq(0): the ratio metric's range."""
    return math.sqrt(10 ** (4 / spec.exponent) - 1)


def distance_metric(e: EmpiricalDistribution, spec: EquilibriumSpec) -> float:
    """Midpoint-rule integral of |P_eq - P| over the histogram range.

    Exact in the empirical factor, since the empirical density is
    constant on each bin.
    """
    p_th = equilibrium_density(e.bin_centers, spec)
    return float(np.sum(np.abs(p_th - e.density())) * e.bin_width)


def ratio_metric(e: EmpiricalDistribution, spec: EquilibriumSpec) -> float:
    """Midpoint-rule integral of |1 - P/P_eq| over |x| <= support cut.

    A bin contributes when its centre lies inside the cut.
    """
    cut = support_cut(spec)
    centers = e.bin_centers
    inside = np.abs(centers) <= cut
    p_th = equilibrium_density(centers[inside], spec)
    p_emp = e.density()[inside]
    return float(np.sum(np.abs(1 - p_emp / p_th)) * e.bin_width)


def run_equilibrium(scheme: SchemeId, D: float, h: float,
                    cfg: HistogramConfig, seed: int = 0,
                    cell_index: int = 0, pc_iterations: int = 4):
    """Integrate one cell and histogram its sampled states.

    Returns ``(EmpiricalDistribution, n_diverged)``.  With
    ``cfg.t_end == 0`` only the initial equilibrium draws are recorded
    (sampler-only mode, useful as a noise-floor reference).
    """
    cfg.validate()
    stepper = dispatch(scheme, pc_iterations=pc_iterations)
    depth = stepper.noise_depth
    rep = stepper.z3_rep or Z3Representation.ALT
    problem = benchmark_problem(D)
    spec = EquilibriumSpec(D, n=0)
    ntraj = cfg.trajectories

    streams = []
    x = np.empty(ntraj)
    for j in range(ntraj):
        stream = RandomStream(seed, cell_index * ntraj + j)
        x[j] = sample_equilibrium(stream, spec)
        streams.append(stream)

    hist = EmpiricalDistribution.empty(cfg.edges())
    alive = np.ones(ntraj, dtype=bool)
    if cfg.t_end == 0:
        hist.record(x)
        return hist, 0

    nsteps = int(round(cfg.t_end / h))
    stride = max(1, int(round(cfg.sample_interval / h)))
    block = max(256, cfg.block_steps // depth)
    pad = (None,) * (3 - depth)
    done = 0
    with np.errstate(all="ignore"):
        while done < nsteps:
            m = min(block, nsteps - done)
            y = np.empty((depth, ntraj, m))
            for j, stream in enumerate(streams):
                y[:, j, :] = stream.normal_block(m, depth)
            inc = make_increment(h, GaussianTriple(*y, *pad), rep, depth=depth)
            for i in range(m):
                step = NoiseIncrement(
                    h, inc.z1[:, i],
                    None if inc.z2 is None else inc.z2[:, i],
                    None if inc.z3 is None else inc.z3[:, i])
                x = stepper(problem, x, (done + i) * h, step)
                bad = alive & ~(np.abs(x) <= cfg.guard)
                if bad.any():
                    alive &= ~bad
                    x = np.where(alive, x, 0.0)
                if (done + i + 1) % stride == 0 and alive.any():
                    hist.record(x[alive])
            done += m
            if not alive.any():
                break
    return hist, int(ntraj - alive.sum())


def cell_metrics(scheme: SchemeId, D: float, h: float,
                 hist: EmpiricalDistribution, n_diverged: int,
                 density_n: int = 0) -> DistributionMetrics:
    spec = EquilibriumSpec(D, n=density_n)
    return DistributionMetrics(
        scheme=scheme, D=D, h=h, density_n=density_n,
        distance=distance_metric(hist, spec),
        ratio=ratio_metric(hist, spec),
        x_cut=support_cut(spec),
        n_samples=hist.total_samples,
        n_diverged=n_diverged)


def _run_cell(args):
    scheme, D, h, cfg, seed, cell_index, pc_iterations = args
    hist, n_div = run_equilibrium(scheme, D, h, cfg, seed=seed,
                                  cell_index=cell_index,
                                  pc_iterations=pc_iterations)
    metrics = [cell_metrics(scheme, D, h, hist, n_div, density_n=0)]
    # Euler converges to the Ito reading of the model, so it is scored
    # against that density as well.
    if scheme is SchemeId.EULER:
        metrics.append(cell_metrics(scheme, D, h, hist, n_div, density_n=1))
    return hist, metrics


def sweep(schemes, D_values, h_values, cfg: HistogramConfig, seed: int = 0,
          workers: int = 1, pc_iterations: int = 4):
    """Run every (scheme, D, h) cell; returns (metrics, histograms).

    ``metrics`` is a flat list of DistributionMetrics in grid order;
    ``histograms`` maps (scheme, D, h) to the cell's histogram.
    Cell stream indices follow the (scheme-major) grid layout, so a
    sweep's cells match identically parameterised single-cell runs.
    """
    cfg.validate()
    tasks = []
    n_cells_per_scheme = len(D_values) * len(h_values)
    for s_i, scheme in enumerate(schemes):
        for d_i, D in enumerate(D_values):
            for h_i, h in enumerate(h_values):
                cell = s_i * n_cells_per_scheme + d_i * len(h_values) + h_i
                tasks.append((scheme, float(D), float(h), cfg, seed, cell,
                              pc_iterations))
    results = run_tasks(_run_cell, tasks, workers)
    metrics, histograms = [], {}
    for task, (hist, cell_m) in zip(tasks, results):
        scheme, D, h = task[0], task[1], task[2]
        metrics.extend(cell_m)
        histograms[(scheme, D, h)] = hist
    return metrics, histograms
