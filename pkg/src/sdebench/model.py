"""Problem definitions: drift/diffusion with derivatives, the benchmark
model with its closed-form stationary density, and an analytically
solvable linear SDE used to validate the integration machinery.

All coefficient callables take ``(x, t)`` and broadcast over arrays.
Derivatives are supplied in closed form because the second-order
schemes consume up to g''' and their accuracy hinges on it; finite
differences appear only in tests, as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .streams import RandomStream

__all__ = [
    "CalculusConvention",
    "SdeProblem",
    "EquilibriumSpec",
    "benchmark_problem",
    "validation_problem",
    "equilibrium_density",
    "sample_equilibrium",
    "convert_drift",
]

Coef = Callable[..., float]


class CalculusConvention(Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"


@dataclass(frozen=True)
class SdeProblem:
    """Scalar SDE  dx = f(x,t) dt + g(x,t) dW  with x-derivatives.

    ``fp``/``fpp`` are df/dx and d2f/dx2; ``gp``/``gpp``/``gppp``
    likewise for g.  Instances are immutable and safe to share across
    workers.
    """

    f: Coef
    fp: Coef
    fpp: Coef
    g: Coef
    gp: Coef
    gpp: Coef
    gppp: Coef
    label: str = ""


def benchmark_problem(D: float) -> SdeProblem:
    """The cubic-drift test model  dx = -x(1+x^2) dt + sqrt(2D)(1+x^2) dW.

    Its stationary density is the power law of :func:`equilibrium_density`,
    so long-run histograms can be scored against a closed form.  The
    fat tail forces every scheme to stay accurate at large |x|.
    """
    if D <= 0:
        raise ValueError(f"noise intensity D must be positive, got {D}")
    s = math.sqrt(2 * D)
    return SdeProblem(
        f=lambda x, t: -x * (1 + x * x),
        fp=lambda x, t: -1 - 3 * x * x,
        fpp=lambda x, t: -6 * x,
        g=lambda x, t: s * (1 + x * x),
        gp=lambda x, t: s * 2 * x,
        gpp=lambda x, t: s * 2 + 0 * x,
        gppp=lambda x, t: 0 * x,
        label=f"benchmark(D={D})",
    )


def validation_problem(D: float):
    """Linear Stratonovich SDE  dx = x dt + D x o dW  and its solution.

    Returns ``(problem, exact)`` where ``exact(x0, t, w)`` evaluates the
    pathwise solution x(t) = x0 exp(t + D W(t)).  Because the solution
    depends on the driving path only through W(t), it provides an
    implementation-independent reference for strong-error measurements.
    """
    if D < 0:
        raise ValueError(f"noise intensity D must be >= 0, got {D}")
    problem = SdeProblem(
        f=lambda x, t: x,
        fp=lambda x, t: 1 + 0 * x,
        fpp=lambda x, t: 0 * x,
        g=lambda x, t: D * x,
        gp=lambda x, t: D + 0 * x,
        gpp=lambda x, t: 0 * x,
        gppp=lambda x, t: 0 * x,
        label=f"validation(D={D})",
    )

    def exact(x0, t, w):
        return x0 * np.exp(t + D * w)

    return problem, exact


@dataclass(frozen=True)
class EquilibriumSpec:
    """Parameters of the benchmark's stationary density.

    The density is N (1+x^2)^-(1+alpha+n) with alpha = 1/(2D) and
    n = 0 (Stratonovich reading) or 1 (Ito reading).  The normalisation
    is N = Gamma(1+n+alpha) / (Gamma(1/2+n+alpha) sqrt(pi)); evaluated
    via log-gamma so small D (large alpha) stays finite.
    """

    D: float
    n: int = 0

    def __post_init__(self):
        if self.D <= 0:
            raise ValueError(f"noise intensity D must be positive, got {self.D}")
        if self.n not in (0, 1):
            raise ValueError(f"calculus flag n must be 0 or 1, got {self.n}")

    @property
    def alpha(self) -> float:
        return 1.0 / (2.0 * self.D)

    @property
    def exponent(self) -> float:
        """Power of (1+x^2) in the density."""
        return 1.0 + self.alpha + self.n

    @property
    def norm(self) -> float:
        a = self.alpha + self.n
        return math.exp(gammaln(1 + a) - gammaln(0.5 + a)) / math.sqrt(math.pi)

    @classmethod
    def for_convention(cls, D: float,
                       calculus: CalculusConvention) -> "EquilibriumSpec":
        return cls(D=D, n=1 if calculus is CalculusConvention.ITO else 0)


def equilibrium_density(x, spec: EquilibriumSpec):
    """Stationary probability density of the benchmark model at x."""
    return spec.norm * (1 + np.asarray(x) ** 2) ** (-spec.exponent)


def sample_equilibrium(stream: RandomStream, spec: EquilibriumSpec, size=None):
    """Draw exactly from the stationary density.

    With nu = 1 + 2 alpha + 2n degrees of freedom, x = t / sqrt(nu) for
    Student-t t (i.e. normal / sqrt(chi2/nu)) has density proportional
    to (1+x^2)^-((nu+1)/2), which matches the equilibrium exponent.
    Exact and tail-correct, unlike rejection from a Gaussian proposal.
    """
    nu = 1 + 2 * spec.alpha + 2 * spec.n
    t = stream.generator.standard_t(nu, size=size)
    return t / math.sqrt(nu)


def convert_drift(problem: SdeProblem, frm: CalculusConvention,
                  to: CalculusConvention) -> SdeProblem:
    """Re-express a problem's drift under the other stochastic calculus.

    Stratonovich -> Ito adds (1/2) g g'; Ito -> Stratonovich subtracts
    it.  The drift derivatives shift consistently:

        (1/2 g g')'  = 1/2 (g'^2 + g g'')
        (1/2 g g')'' = 1/2 (3 g' g'' + g g''')

    Identity when the conventions coincide.
    """
    if frm is to:
        return problem
    sign = 1.0 if to is CalculusConvention.ITO else -1.0
    f, fp, fpp = problem.f, problem.fp, problem.fpp
    g, gp, gpp, gppp = problem.g, problem.gp, problem.gpp, problem.gppp
    return replace(
        problem,
        f=lambda x, t: f(x, t) + sign * 0.5 * g(x, t) * gp(x, t),
        fp=lambda x, t: fp(x, t) + sign * 0.5 * (gp(x, t) ** 2
                                                 + g(x, t) * gpp(x, t)),
        fpp=lambda x, t: fpp(x, t) + sign * 0.5 * (3 * gp(x, t) * gpp(x, t)
                                                   + g(x, t) * gppp(x, t)),
        label=f"{problem.label}|{frm.value}->{to.value}",
    )
