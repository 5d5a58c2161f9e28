"""Stochastic increments for one step of a scalar SDE.

Per step of size h three integrals of the driving Wiener process are
needed, in increasing order of scheme sophistication:

    z1 = W(h)                         ~ sqrt(h)
    z2 = int_0^h W(s) ds              ~ h^(3/2)
    z3 = int_0^h z2(s) dW(s)          ~ h^2

z1 and z2 are jointly Gaussian and sampled exactly.  z3 cannot be
expressed in the step's Gaussian variates alone, so two approximate
representations are provided (see :class:`Z3Representation`); their
measured moments are reported by the ``moments`` CLI command.

Increments over adjacent intervals can be merged exactly with
:func:`compose`, which is how one Brownian path is shared between a
fine reference trajectory and its coarsened re-integrations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Union

import numpy as np

from .streams import RandomStream

__all__ = [
    "Z3Representation",
    "GaussianTriple",
    "NoiseIncrement",
    "sample_triple",
    "make_increment",
    "compose",
    "sample_path_increments",
    "compose_pairs",
    "representation_moments",
    "integral_moments",
]

Scalar = Union[float, np.ndarray]

_INV_2SQRT3 = 1.0 / (2.0 * math.sqrt(3.0))


class Z3Representation(Enum):
    """Which three-variate stand-in to use for z3.

    CUP:  z3 = (h^2/6) (y1^2 - h + y3).  Kept verbatim, including the
          dimensionally odd "- h" term; its mean is (h^2/6)(1 - h),
          not 0, which is measurable (see the moments report).
    ALT:  z3 = z1 z2 - (h^2/2) (1 + y3/3).  Mean-free and uncorrelated
          with z1 and z2.
    """

    CUP = "cup"
    ALT = "alt"


class GaussianTriple(NamedTuple):
    """Three independent N(0,1) variates backing one step's increments."""

    y1: Scalar
    y2: Scalar
    y3: Scalar


@dataclass(frozen=True)
class NoiseIncrement:
    """The integrals (z1, z2, z3) over one interval of length h.

    ``z2``/``z3`` may be None when a scheme only consumes the lower
    integrals.  ``triple`` records the generating variates for freshly
    sampled increments and is None for composed ones.
    """

    h: float
    z1: Scalar
    z2: Optional[Scalar] = None
    z3: Optional[Scalar] = None
    triple: Optional[GaussianTriple] = None


def sample_triple(stream: RandomStream) -> GaussianTriple:
    """Draw one step's variates; consumes y1, then y2, then y3."""
    y = stream.normals(3)
    return GaussianTriple(y[0], y[1], y[2])


def make_increment(h: float, triple: GaussianTriple,
                   rep: Z3Representation = Z3Representation.ALT,
                   depth: int = 3) -> NoiseIncrement:
    """Build the increment over one step from its Gaussian variates.

    ``depth`` limits which integrals are materialised (1: z1 only,
    2: z1+z2, 3: all).  Components are plain arithmetic in the triple,
    so array-valued triples give array-valued increments.
    """
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    sqrt_h = math.sqrt(h)
    z1 = sqrt_h * triple.y1
    z2 = z3 = None
    if depth >= 2:
        z2 = h * (z1 / 2 + (sqrt_h * _INV_2SQRT3) * triple.y2)
    if depth >= 3:
        if rep is Z3Representation.CUP:
            z3 = (h * h / 6) * (triple.y1 * triple.y1 - h + triple.y3)
        else:
            z3 = z1 * z2 - (h * h / 2) * (1 + triple.y3 / 3)
    return NoiseIncrement(h=h, z1=z1, z2=z2, z3=z3, triple=triple)


def compose(a: NoiseIncrement, b: NoiseIncrement) -> NoiseIncrement:
    """Merge increments over adjacent intervals [0,s] and [s,s+t].

    Exact in distribution, from splitting the defining integrals:

        z1(s+t) = z1(s) + z1(t)
        z2(s+t) = z2(s) + t z1(s) + z2(t)
        z3(s+t) = z3(s) + z2(s) z1(t) + z1(s) (t z1(t) - z2(t)) + z3(t)

    (the third uses int_0^t u dW = t z1(t) - z2(t)).  Associative, so
    repeated pairwise composition equals direct composition of a run.
    """
    z1 = a.z1 + b.z1
    z2 = z3 = None
    if a.z2 is not None and b.z2 is not None:
        z2 = a.z2 + b.h * a.z1 + b.z2
        if a.z3 is not None and b.z3 is not None:
            z3 = a.z3 + a.z2 * b.z1 + a.z1 * (b.h * b.z1 - b.z2) + b.z3
    return NoiseIncrement(h=a.h + b.h, z1=z1, z2=z2, z3=z3)


def sample_path_increments(stream: RandomStream, h: float, nsteps: int,
                           rep: Z3Representation = Z3Representation.ALT,
                           depth: int = 1) -> NoiseIncrement:
    """Sample a whole trajectory's per-step increments in one draw.

    Returns a NoiseIncrement whose components are arrays of shape
    ``(nsteps,)``, consuming the stream exactly as ``nsteps`` sequential
    :func:`sample_triple` calls at the same depth would.
    """
    y = stream.normal_block(nsteps, depth)
    pad = (None,) * (3 - depth)
    return make_increment(h, GaussianTriple(*y, *pad), rep, depth=depth)


def integral_moments(h: float) -> dict:
    """Exact low-order moments of the true integrals (z1, z2, z3).

    Derived from Ito isometry and the identity
    z3 = z1 z2 - int_0^h W(s)^2 ds; any faithful z3 sampler would have
    to reproduce these.  Useful as the yardstick for the approximate
    representations, whose defects show up in the cubic moments.
    """
    return {
        "<z2^2>": h ** 3 / 3,
        "<z1 z2>": h ** 2 / 2,
        "<z3>": 0.0,
        "<z1 z3>": 0.0,
        "<z2 z3>": 0.0,
        "<z3^2>": h ** 4 / 12,
        "<z1^2 z3>": h ** 3 / 3,
        "<z1 z2 z3>": h ** 4 / 6,
        "<z2^2 z3>": h ** 5 / 15,
    }


def representation_moments(h: float, rep: Z3Representation) -> dict:
    """Exact moments of the *sampled* increments under a representation.

    (z1, z2) are exact, so their moments match :func:`integral_moments`;
    the z3 rows are straightforward Gaussian-moment algebra on the
    representation formulas and differ from the true values beyond the
    orders the representations were built to satisfy.
    """
    out = {
        "<z2^2>": h ** 3 / 3,
        "<z1 z2>": h ** 2 / 2,
    }
    if rep is Z3Representation.CUP:
        out.update({
            "<z3>": (h ** 2 / 6) * (1 - h),
            "<z1 z3>": 0.0,
            "<z2 z3>": 0.0,
            "<z3^2>": (h ** 4 / 36) * (4 - 2 * h + h * h),
            "<z1^2 z3>": (h ** 3 / 6) * (3 - h),
            "<z1 z2 z3>": (h ** 4 / 12) * (3 - h),
            "<z2^2 z3>": 5 * h ** 5 / 36 - h ** 6 / 18,
        })
    else:
        out.update({
            "<z3>": 0.0,
            "<z1 z3>": 0.0,
            "<z2 z3>": 0.0,
            "<z3^2>": 11 * h ** 4 / 18,
            "<z1^2 z3>": h ** 3,
            "<z1 z2 z3>": 7 * h ** 4 / 12,
            "<z2^2 z3>": h ** 5 / 3,
        })
    return out


def compose_pairs(inc: NoiseIncrement) -> NoiseIncrement:
    """Compose adjacent pairs along the last axis of array increments.

    Maps an even-length run of n equal-h increments to n/2 increments
    of size 2h; used level by level when coarsening a stored path.
    """
    n = np.shape(inc.z1)[-1]
    if n % 2:
        raise ValueError(f"need an even number of increments, got {n}")

    def halves(z):
        return (None, None) if z is None else (z[..., ::2], z[..., 1::2])

    a1, b1 = halves(inc.z1)
    a2, b2 = halves(inc.z2)
    a3, b3 = halves(inc.z3)
    return compose(NoiseIncrement(inc.h, a1, a2, a3),
                   NoiseIncrement(inc.h, b1, b2, b3))
