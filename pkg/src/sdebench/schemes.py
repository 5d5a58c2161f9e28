"""Single-step update rules for the eleven benchmarked integrators.

Every stepper is a pure function ``(problem, x, t, inc) -> x_next``
operating elementwise, so ``x`` and the increment components may be
scalars or aligned arrays.  Steppers never guard against overflow:
a diverging trajectory simply produces inf/nan, which the experiment
drivers detect and record as data.

Predictor-corrector construction notes (labels follow the benchmark
naming):

* Heun averages explicit and implicit Euler-Maruyama steps and
  converges to the Stratonovich solution.
* Miln / Mil- replace both stages with Milstein blocks; the corrector
  averages the block evaluated at the initial and predicted points,
  with Mil- flipping the sign of the predicted-point (z1^2 - h)
  correction the way the final-point Stratonovich expansion does.
* HePC / HPC- re-insert the corrector output as the predicted point;
  the iteration count is the number of corrector passes in total.
* T3/2 and CUP are Taylor schemes (Stratonovich form) truncated after
  the h^(3/2) and h^2 terms respectively; CUP needs a z3 realisation
  (CUP1 uses the CUP representation, CUP2 the ALT one).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import partial
from typing import Callable, Optional

from .increments import NoiseIncrement, Z3Representation, make_increment
from .model import CalculusConvention, SdeProblem

__all__ = [
    "SchemeId",
    "Stepper",
    "dispatch",
    "euler_step",
    "heun_step",
    "stra_step",
    "stra_final_increment",
    "milstein_step",
    "miln_step",
    "mil_minus_step",
    "hest_step",
    "hepc_step",
    "hpc_minus_step",
    "t32_step",
    "cup_step",
]


class SchemeId(Enum):
    """Stable identifiers; values are the conventional text labels."""

    EULER = "Euler"
    HEUN = "Heun"
    STRA = "Stra"
    MILN = "Miln"
    HEST = "HeSt"
    HEPC = "HePC"
    MIL_MINUS = "Mil-"
    T32 = "T3/2"
    HPC_MINUS = "HPC-"
    CUP1 = "CUP1"
    CUP2 = "CUP2"

    @property
    def label(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "SchemeId":
        for sid in cls:
            if text == sid.value or text.lower() == sid.name.lower():
                return sid
        known = ", ".join(s.value for s in cls)
        raise ValueError(f"unknown scheme {text!r}; known schemes: {known}")


def euler_step(p: SdeProblem, x, t, inc: NoiseIncrement):
    """Euler-Maruyama:  x + h f + g z1  (Ito solution)."""
    return x + inc.h * p.f(x, t) + p.g(x, t) * inc.z1


def heun_step(p: SdeProblem, x, t, inc: NoiseIncrement):
    """Stochastic Heun: average of explicit/implicit Euler stages.

    xt = x + h f0 + g0 z1
    x' = x + (h/2)(f0 + f(xt)) + (1/2)(g0 + g(xt)) z1
    """
    h, z1 = inc.h, inc.z1
    f0, g0 = p.f(x, t), p.g(x, t)
    xt = x + h * f0 + g0 * z1
    t1 = t + h
    return x + (h / 2) * (f0 + p.f(xt, t1)) + 0.5 * (g0 + p.g(xt, t1)) * z1


def stra_step(p: SdeProblem, x, t, inc: NoiseIncrement):
    """Euler-Stratonovich:  x + g0 z1 + h f0 + (1/2) g0 g0' z1^2."""
    h, z1 = inc.h, inc.z1
    g0 = p.g(x, t)
    return x + g0 * z1 + h * p.f(x, t) + 0.5 * g0 * p.gp(x, t) * z1 * z1


def stra_final_increment(p: SdeProblem, x_eval, t, inc: NoiseIncrement):
    """Stratonovich-Euler increment expanded around the interval's end.

    Returns  g z1 + h f - (1/2) g g' z1^2  with coefficients at x_eval;
    note the z1^2 term enters with the opposite sign to the forward
    form.  Used as the corrector block of HeSt and HPC-.
    """
    h, z1 = inc.h, inc.z1
    g1 = p.g(x_eval, t)
    return g1 * z1 + h * p.f(x_eval, t) - 0.5 * g1 * p.gp(x_eval, t) * z1 * z1


def milstein_step(p: SdeProblem, x, t, inc: NoiseIncrement):
    """Milstein:  x + g0 z1 + h f0 + (1/2) g0 g0' (z1^2 - h)."""
    h, z1 = inc.h, inc.z1
    g0 = p.g(x, t)
    return (x + g0 * z1 + h * p.f(x, t)
            + 0.5 * g0 * p.gp(x, t) * (z1 * z1 - h))


def _milstein_avg_step(p, x, t, inc, corr_sign):
    h, z1 = inc.h, inc.z1
    zz = z1 * z1 - h
    f0, g0, gp0 = p.f(x, t), p.g(x, t), p.gp(x, t)
    xt = x + h * f0 + g0 * z1 + 0.5 * g0 * gp0 * zz
    t1 = t + h
    g1, gp1 = p.g(xt, t1), p.gp(xt, t1)
    return (x + (h / 2) * (f0 + p.f(xt, t1)) + 0.5 * (g0 + g1) * z1
            + 0.25 * (g0 * gp0 + corr_sign * g1 * gp1) * zz)


def miln_step(p: SdeProblem, x, t, inc: NoiseIncrement):
    """Heun built from Milstein blocks.

    Predictor is a Milstein step; the corrector averages the Milstein
    increment evaluated at x and at the predicted point:

    x' = x + (h/2)(f0 + f~) + (1/2)(g0 + g~) z1
           + (1/4)(g0 g0' + g~ g~') (z1^2 - h)
    """
    return _milstein_avg_step(p, x, t, inc, corr_sign=+1.0)


def mil_minus_step(p: SdeProblem, x, t, inc: NoiseIncrement):
    """Miln with the predicted-point correction sign flipped:
    (1/4)(g0 g0' - g~ g~')(z1^2 - h) in the corrector."""
    return _milstein_avg_step(p, x, t, inc, corr_sign=-1.0)


def hest_step(p: SdeProblem, x, t, inc: NoiseIncrement):
    """Heun with Euler-Stratonovich stages.

    Predictor is the forward Stratonovich step; the corrector averages
    the forward increment at x with the final-point increment at the
    predicted point.
    """
    h, z1 = inc.h, inc.z1
    f0, g0, gp0 = p.f(x, t), p.g(x, t), p.gp(x, t)
    inc0 = g0 * z1 + h * f0 + 0.5 * g0 * gp0 * z1 * z1
    xt = x + inc0
    return x + 0.5 * (inc0 + stra_final_increment(p, xt, t + h, inc))


def hepc_step(p: SdeProblem, x, t, inc: NoiseIncrement, iterations: int = 4):
    """Iterated Heun: re-insert the corrector output as predicted point.

    ``iterations`` counts corrector passes in total, so iterations=1
    is exactly the Heun step.
    """
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    h, z1 = inc.h, inc.z1
    f0, g0 = p.f(x, t), p.g(x, t)
    t1 = t + h
    xt = x + h * f0 + g0 * z1
    for _ in range(iterations):
        xt = x + (h / 2) * (f0 + p.f(xt, t1)) + 0.5 * (g0 + p.g(xt, t1)) * z1
    return xt


def hpc_minus_step(p: SdeProblem, x, t, inc: NoiseIncrement,
                   iterations: int = 4):
    """Iterated HeSt: like hepc_step but with Stratonovich stages."""
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    h, z1 = inc.h, inc.z1
    f0, g0, gp0 = p.f(x, t), p.g(x, t), p.gp(x, t)
    inc0 = g0 * z1 + h * f0 + 0.5 * g0 * gp0 * z1 * z1
    xt = x + inc0
    t1 = t + h
    for _ in range(iterations):
        xt = x + 0.5 * (inc0 + stra_final_increment(p, xt, t1, inc))
    return xt


def t32_step(p: SdeProblem, x, t, inc: NoiseIncrement):
    """Stratonovich Taylor scheme through the h^(3/2) stochastic terms.

    x' = x + g0 z1 + h f0 + (1/2) g0 g0' z1^2
           + (g0 f0' - f0 g0') z2 + h f0 g0' z1
           + (1/6) g0 (g0'^2 + g0'' g0) z1^3
    """
    h, z1, z2 = inc.h, inc.z1, inc.z2
    f0, fp0 = p.f(x, t), p.fp(x, t)
    g0, gp0, gpp0 = p.g(x, t), p.gp(x, t), p.gpp(x, t)
    return (x + g0 * z1 + h * f0 + 0.5 * g0 * gp0 * z1 * z1
            + (g0 * fp0 - f0 * gp0) * z2 + h * f0 * gp0 * z1
            + (g0 * (gp0 * gp0 + gpp0 * g0) / 6) * z1 ** 3)


def cup_step(p: SdeProblem, x, t, inc: NoiseIncrement,
             rep: Optional[Z3Representation] = None):
    """Stratonovich Taylor scheme with all terms through h^2.

    Extends :func:`t32_step` by the second-order rows

        (h^2/2) f0 f0'
        + (1/2) f0' g0' g0 (z1 z2 - z3) + (1/2) f0'' g0^2 (z1 z2 - z3)
        + g0' (g0 f0' - f0 g0') z3
        + (1/2) g0'^2 f0 (h z1^2 - z1 z2 / 2 + z3 / 2)
        + (1/24) g0 (g0^2 g0''' + g0' (g0'^2 + g0 g0'')) z1^4
        + (h/4) g0'' g0 f0 (z1^2 - (z1 z2 - z3)/2)

    ``rep`` recomputes z3 from the increment's source triple, letting
    one sampled increment drive either z3 realisation; by default the
    increment's stored z3 is used.
    """
    h, z1, z2 = inc.h, inc.z1, inc.z2
    if rep is not None and inc.triple is not None:
        z3 = make_increment(h, inc.triple, rep).z3
    else:
        z3 = inc.z3
    f0, fp0, fpp0 = p.f(x, t), p.fp(x, t), p.fpp(x, t)
    g0, gp0, gpp0, gppp0 = p.g(x, t), p.gp(x, t), p.gpp(x, t), p.gppp(x, t)
    zz = z1 * z2 - z3
    return (x + g0 * z1 + h * f0 + 0.5 * g0 * gp0 * z1 * z1
            + (g0 * fp0 - f0 * gp0) * z2 + h * f0 * gp0 * z1
            + (g0 * (gp0 * gp0 + gpp0 * g0) / 6) * z1 ** 3
            + (h * h / 2) * f0 * fp0
            + 0.5 * fp0 * gp0 * g0 * zz
            + 0.5 * fpp0 * g0 * g0 * zz
            + gp0 * (g0 * fp0 - f0 * gp0) * z3
            + 0.5 * gp0 * gp0 * f0 * (h * z1 * z1 - 0.5 * z1 * z2 + 0.5 * z3)
            + (g0 * (g0 * g0 * gppp0 + gp0 * (gp0 * gp0 + g0 * gpp0)) / 24)
            * z1 ** 4
            + (h / 4) * gpp0 * g0 * f0 * (z1 * z1 - 0.5 * zz))


@dataclass(frozen=True)
class Stepper:
    """A scheme's step function bundled with its noise requirements.

    ``id`` is None for ad-hoc steppers (building blocks probed outside
    the catalogue); ``name`` then supplies the label.
    """

    id: Optional[SchemeId]
    fn: Callable
    noise_depth: int                      # 1: z1, 2: +z2, 3: +z3
    z3_rep: Optional[Z3Representation]
    calculus: CalculusConvention
    name: str = ""

    @property
    def label(self) -> str:
        return self.id.label if self.id is not None else self.name

    def __call__(self, p, x, t, inc):
        return self.fn(p, x, t, inc)


_ITO = CalculusConvention.ITO
_STRAT = CalculusConvention.STRATONOVICH


def dispatch(sid: SchemeId, pc_iterations: int = 4) -> Stepper:
    """Resolve a scheme id to its stepper and noise requirements.

    ``pc_iterations`` sets the corrector pass count of the iterated
    schemes (HePC, HPC-); the benchmark default is 4.
    """
    table = {
        SchemeId.EULER: (euler_step, 1, None, _ITO),
        SchemeId.HEUN: (heun_step, 1, None, _STRAT),
        SchemeId.STRA: (stra_step, 1, None, _STRAT),
        SchemeId.MILN: (miln_step, 1, None, _STRAT),
        SchemeId.HEST: (hest_step, 1, None, _STRAT),
        SchemeId.HEPC: (partial(hepc_step, iterations=pc_iterations),
                        1, None, _STRAT),
        SchemeId.MIL_MINUS: (mil_minus_step, 1, None, _STRAT),
        SchemeId.T32: (t32_step, 2, None, _STRAT),
        SchemeId.HPC_MINUS: (partial(hpc_minus_step,
                                     iterations=pc_iterations),
                             1, None, _STRAT),
        SchemeId.CUP1: (cup_step, 3, Z3Representation.CUP, _STRAT),
        SchemeId.CUP2: (cup_step, 3, Z3Representation.ALT, _STRAT),
    }
    try:
        fn, depth, rep, calculus = table[sid]
    except KeyError:
        raise ValueError(f"unknown scheme id: {sid!r}") from None
    return Stepper(id=sid, fn=fn, noise_depth=depth, z3_rep=rep,
                   calculus=calculus)
