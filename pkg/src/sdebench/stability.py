"""Stability-region scan over a (D, h) parameter grid.

For each (scheme, D, h) cell a batch of trajectories starts from the
stationary distribution and integrates to the horizon.  The first time
any trajectory leaves [-threshold, threshold] (or goes non-finite) the
cell is marked unstable; blow-up is data, not an error.  Cells sharing
a step size are integrated together as one wide batch since they share
a step count, with diverged cells frozen in place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .increments import (GaussianTriple, NoiseIncrement, Z3Representation,
                         make_increment)
from .model import EquilibriumSpec, benchmark_problem, sample_equilibrium
from .parallel import run_tasks
from .schemes import SchemeId, dispatch
from .streams import RandomStream

__all__ = [
    "StabilityConfig",
    "CellResult",
    "StabilityGrid",
    "run_stability",
    "stable_count",
    "GRID_CSV_HEADER",
    "SUMMARY_CSV_HEADER",
]

GRID_CSV_HEADER = ["scheme", "D", "h", "stable", "n_trajectories",
                   "first_divergence_time"]
SUMMARY_CSV_HEADER = ["scheme", "stable_count", "total_cells"]


@dataclass(frozen=True)
class StabilityConfig:
    """Grid scan parameters.

    Default grids are logarithmic in both D and h; the paper-style scan
    is wider in h than the distribution runs because instability is the
    object of interest.  Stream indices derive from (cell, trajectory),
    so the grid is reproducible regardless of how cells are scheduled.
    """

    schemes: tuple = tuple(SchemeId)
    D_values: tuple = tuple(np.geomspace(1e-2, 0.5, 10))
    h_values: tuple = tuple(np.geomspace(1e-3, 0.5, 10))
    trajectories: int = 300
    t_end: float = 1e3
    threshold: float = 100.0
    seed: int = 0
    pc_iterations: int = 4
    block_steps: int = 4096

    def validate(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if not self.schemes or not len(self.D_values) or not len(self.h_values):
            raise ValueError("schemes, D_values and h_values must be non-empty")
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")

    def cell_index(self, i_D: int, i_h: int) -> int:
        return i_D * len(self.h_values) + i_h


@dataclass(frozen=True)
class CellResult:
    scheme: SchemeId
    D: float
    h: float
    stable: bool
    first_divergence_time: Optional[float]
    trajectories: int

    def row(self):
        return (self.scheme.label, self.D, self.h, self.stable,
                self.trajectories, self.first_divergence_time)


@dataclass(frozen=True)
class StabilityGrid:
    """All cell verdicts of a scan, in (scheme, D, h) grid order."""

    config: StabilityConfig
    cells: tuple

    def for_scheme(self, scheme: SchemeId):
        return [c for c in self.cells if c.scheme is scheme]

    def rows(self):
        return (c.row() for c in self.cells)

    def summary_rows(self):
        total = len(self.config.D_values) * len(self.config.h_values)
        for scheme in self.config.schemes:
            yield (scheme.label, stable_count(self, scheme), total)


def stable_count(grid: StabilityGrid, scheme: SchemeId) -> int:
    """Number of grid cells where no trajectory of the scheme blew up."""
    cells = grid.for_scheme(scheme)
    expected = len(grid.config.D_values) * len(grid.config.h_values)
    if len(cells) != expected:
        raise ValueError(f"grid incomplete for {scheme.label}: "
                         f"{len(cells)}/{expected} cells")
    return sum(c.stable for c in cells)


def _scan_column(args):
    """Integrate all D-cells of one (scheme, h) column as a wide batch."""
    cfg, scheme, i_h = args
    h = float(cfg.h_values[i_h])
    stepper = dispatch(scheme, pc_iterations=cfg.pc_iterations)
    depth = stepper.noise_depth
    rep = stepper.z3_rep or Z3Representation.ALT
    n_D = len(cfg.D_values)
    ntraj = cfg.trajectories
    nsteps = int(round(cfg.t_end / h))
    width = n_D * ntraj

    # One spatially varying problem covers all D-cells at once: only the
    # diffusion scale differs per lane, the drift does not.
    scale = np.repeat([np.sqrt(2 * float(D)) for D in cfg.D_values], ntraj)
    base = benchmark_problem(float(cfg.D_values[0]))
    column_problem = type(base)(
        f=base.f, fp=base.fp, fpp=base.fpp,
        g=lambda x, t: scale * (1 + x * x),
        gp=lambda x, t: scale * 2 * x,
        gpp=lambda x, t: scale * 2 + 0 * x,
        gppp=base.gppp,
        label=f"benchmark-column(h={h})",
    )

    streams = []
    x = np.empty(width)
    for i_D, D in enumerate(cfg.D_values):
        spec = EquilibriumSpec(float(D), n=0)
        for j in range(ntraj):
            stream = RandomStream(
                cfg.seed, cfg.cell_index(i_D, i_h) * ntraj + j)
            x[i_D * ntraj + j] = sample_equilibrium(stream, spec)
            streams.append(stream)

    cell_div_time = np.full(n_D, np.nan)
    lane_dead = np.zeros(width, dtype=bool)
    pad = (None,) * (3 - depth)

    done = 0
    block = max(512, cfg.block_steps // depth)   # bound noise-buffer memory
    with np.errstate(all="ignore"):
        while done < nsteps:
            m = min(block, nsteps - done)
            y = np.empty((depth, width, m))
            for j, stream in enumerate(streams):
                y[:, j, :] = stream.normal_block(m, depth)
            inc = make_increment(h, GaussianTriple(*y, *pad), rep, depth=depth)
            for i in range(m):
                step = NoiseIncrement(
                    h, inc.z1[:, i],
                    None if inc.z2 is None else inc.z2[:, i],
                    None if inc.z3 is None else inc.z3[:, i])
                x = stepper(column_problem, x, (done + i) * h, step)
                bad = ~(np.abs(x) <= cfg.threshold)     # catches nan/inf too
                bad &= ~lane_dead
                if bad.any():
                    lane_dead |= bad
                    x = np.where(lane_dead, 0.0, x)
                    newly = np.isnan(cell_div_time) & bad.reshape(
                        n_D, ntraj).any(axis=1)
                    cell_div_time[newly] = (done + i + 1) * h
            done += m
            if not np.isnan(cell_div_time).any():
                break   # every cell in the column already diverged

    results = []
    for i_D, D in enumerate(cfg.D_values):
        t_div = cell_div_time[i_D]
        results.append(CellResult(
            scheme=scheme, D=float(D), h=h, stable=bool(np.isnan(t_div)),
            first_divergence_time=None if np.isnan(t_div) else float(t_div),
            trajectories=ntraj))
    return results


def run_stability(cfg: StabilityConfig, workers: int = 1) -> StabilityGrid:
    """Scan the whole grid; one task per (scheme, h) column."""
    cfg.validate()
    tasks = [(cfg, scheme, i_h)
             for scheme in cfg.schemes
             for i_h in range(len(cfg.h_values))]
    columns = run_tasks(_scan_column, tasks, workers)
    by_key = {}
    for task, cells in zip(tasks, columns):
        _, scheme, i_h = task
        for cell in cells:
            by_key[(scheme, cell.D, i_h)] = cell
    ordered = []
    for scheme in cfg.schemes:
        for D in cfg.D_values:
            for i_h in range(len(cfg.h_values)):
                ordered.append(by_key[(scheme, float(D), i_h)])
    return StabilityGrid(config=cfg, cells=tuple(ordered))
