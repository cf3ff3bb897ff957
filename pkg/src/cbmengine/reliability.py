"""Lifetime and failure-curve mathematics.

Two-parameter Weibull models (shape beta, scale eta), hazard and
conditional-failure functions, censored maximum-likelihood fitting, and
classification of sampled hazard curves into the six failure-pattern
classes A-F (E is the bathtub shape).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np

from ._kernels import weibull_sums


class ReliabilityError(Exception):
    """Base class for lifetime-math failures."""


class InsufficientData(ReliabilityError):
    """Fewer than three uncensored lifetimes."""


class DegenerateSample(ReliabilityError):
    """All uncensored lifetimes identical; the shape parameter is unbounded."""


class NonConvergence(ReliabilityError):
    """The shape-parameter root-find exceeded its iteration cap."""


class UnclassifiableShape(ReliabilityError):
    """Hazard-curve features are contradictory beyond tolerance."""


@dataclass(frozen=True)
class WeibullModel:
    """Fitted or hand-set lifetime model.

    `fit_n` is the number of observations used by the fit (0 when hand-set);
    `log_likelihood` is populated only by fits.
    """

    shape_beta: float
    scale_eta: float
    fit_n: int = 0
    log_likelihood: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.shape_beta > 0 and math.isfinite(self.shape_beta)):
            raise ValueError("shape_beta must be a positive finite real")
        if not (self.scale_eta > 0 and math.isfinite(self.scale_eta)):
            raise ValueError("scale_eta must be a positive finite real")
        if self.fit_n > 0 and (
            self.log_likelihood is None or not math.isfinite(self.log_likelihood)
        ):
            raise ValueError("fitted models must carry a finite log_likelihood")


@dataclass(frozen=True)
class PFInterval:
    """Potential-to-functional failure window length.

    `unit_kind` distinguishes time from non-time usage units (cycles,
    output units); the math treats the length as hours when unit_kind is
    "time".
    """

    length: float
    unit_kind: str = "time"

    _UNIT_KINDS = ("time", "cycles", "output-units")

    def __post_init__(self) -> None:
        if not (self.length > 0 and math.isfinite(self.length)):
            raise ValueError("P-F interval length must be a positive finite real")
        if self.unit_kind not in self._UNIT_KINDS:
            raise ValueError(f"unit_kind must be one of {self._UNIT_KINDS}")


class FailurePatternClass(Enum):
    """The six conditional-failure-curve shapes."""

    A = "constant hazard ending in a terminal wear-out jump"
    B = "steadily increasing hazard"
    C = "gradually increasing hazard with no distinct wear-out"
    D = "constant hazard (random failures)"
    E = "bathtub: early decline, stable mid-life, late wear-out"
    F = "infant mortality declining to a constant level"

    @property
    def description(self) -> str:
        return self.value


@dataclass(frozen=True)
class HazardCurve:
    """Sampled hazard over normalized age in [0, 1]."""

    grid: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        ages = [a for a, _ in self.grid]
        values = [h for _, h in self.grid]
        if any(not (0.0 <= a <= 1.0) for a in ages):
            raise ValueError("ages must lie in [0, 1]")
        if any(a2 <= a1 for a1, a2 in zip(ages, ages[1:])):
            raise ValueError("ages must be strictly increasing")
        if any(h < 0 or not math.isfinite(h) for h in values):
            raise ValueError("hazard values must be non-negative and finite")


def weibull_cdf(t: float, model: WeibullModel) -> float:
    """F(t) = 1 - exp(-(t/eta)^beta) for t >= 0."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return -math.expm1(-((t / model.scale_eta) ** model.shape_beta))


def weibull_hazard(t: float, model: WeibullModel) -> float:
    """Instantaneous failure rate h(t) = (beta/eta) * (t/eta)^(beta-1).

    Constant for beta = 1, increasing for beta > 1, decreasing for beta < 1
    (where it diverges at t = 0, hence the domain error).
    """
    beta, eta = model.shape_beta, model.scale_eta
    if t < 0 or (t == 0 and beta < 1):
        raise ValueError("hazard undefined: t must be positive (beta < 1 diverges at 0)")
    if t == 0:
        return 1.0 / eta if beta == 1 else 0.0
    return (beta / eta) * (t / eta) ** (beta - 1)


def weibull_cumulative_hazard(t: float, model: WeibullModel) -> float:
    """H(t) = (t/eta)^beta; survival is exp(-H(t))."""
    if t < 0:
        raise ValueError("t must be non-negative")
    return (t / model.scale_eta) ** model.shape_beta


def conditional_failure_probability(
    model: WeibullModel, age: float, horizon: float
) -> float:
    """Probability of failing within `horizon` given survival to `age`.

    1 - S(age + horizon)/S(age), evaluated through the cumulative hazard so
    the survival ratio stays stable for old assets.
    """
    if age < 0 or horizon < 0:
        raise ValueError("age and horizon must be non-negative")
    h_age = weibull_cumulative_hazard(age, model)
    h_end = weibull_cumulative_hazard(age + horizon, model)
    return -math.expm1(h_age - h_end)


def fit_weibull(
    lifetimes: Sequence[float], censored: Optional[Sequence[bool]] = None
) -> WeibullModel:
    """Maximum-likelihood Weibull fit with right-censoring.

    The scale is profiled out analytically and the shape found by a
    safeguarded Newton iteration (bisection fallback inside a sign-change
    bracket), iteration cap 200, convergence |delta beta| < 1e-10.
    Observations are normalized by their geometric mean before the solve,
    which makes the fit scale-equivariant.
    """
    t = np.asarray(list(lifetimes), dtype=np.float64)
    if censored is None:
        cens = np.zeros(t.size, dtype=bool)
    else:
        cens = np.asarray(list(censored), dtype=bool)
        if cens.size != t.size:
            raise ValueError("censored flags must parallel lifetimes")
    if t.size and (not np.all(np.isfinite(t)) or np.any(t <= 0)):
        raise ValueError("lifetimes must be positive finite reals")

    events = ~cens
    r = int(events.sum())
    if r < 3:
        raise InsufficientData(f"need at least 3 uncensored lifetimes, got {r}")
    t_unc = t[events]
    if float(t_unc.max()) == float(t_unc.min()):
        raise DegenerateSample("all uncensored lifetimes identical; shape is unbounded")

    # Normalize to geometric mean 1 for conditioning and scale-equivariance.
    scale_c = float(np.exp(np.mean(np.log(t))))
    logts = np.log(t / scale_c)
    m = float(logts.max())
    a_sum = float(logts[events].sum())

    def score(beta: float):
        s0, s1, s2 = weibull_sums(logts, beta)
        g = r / beta + a_sum - r * (s1 / s0)
        gp = -r / (beta * beta) - r * ((s2 * s0 - s1 * s1) / (s0 * s0))
        return g, gp

    # The profile score is strictly decreasing in beta, so a sign-change
    # bracket always contains the unique root.
    lo = hi = None
    beta = 1.0
    g, _ = score(beta)
    if g == 0.0:
        lo = hi = beta
    elif g > 0:
        lo = beta
        b = beta
        while b < 1e6:
            b *= 2.0
            if score(b)[0] <= 0:
                hi = b
                break
            lo = b
    else:
        hi = beta
        b = beta
        while b > 1e-6:
            b *= 0.5
            if score(b)[0] >= 0:
                lo = b
                break
            hi = b
    if lo is None or hi is None:
        raise NonConvergence("could not bracket the shape-parameter root")

    beta = 0.5 * (lo + hi)
    if lo != hi:
        for _ in range(200):
            g, gp = score(beta)
            if g > 0:
                lo = beta
            else:
                hi = beta
            step = -g / gp if gp != 0 else 0.0
            nb = beta + step
            if not math.isfinite(nb) or not (lo < nb < hi):
                nb = 0.5 * (lo + hi)
            if abs(nb - beta) < 1e-10:
                beta = nb
                break
            beta = nb
        else:
            raise NonConvergence("shape root-find exceeded 200 iterations")

    s0, _, _ = weibull_sums(logts, beta)
    # Unshift: log sum t'^beta = log(s0) + beta*m; eta'^beta = that / r.
    log_eta_norm = (math.log(s0) + beta * m - math.log(r)) / beta
    eta = math.exp(log_eta_norm) * scale_c

    log_t_unc = np.log(t_unc)
    cum = float(np.exp(beta * (np.log(t) - math.log(eta))).sum())
    loglik = (
        r * math.log(beta)
        - r * beta * math.log(eta)
        + (beta - 1.0) * float(log_t_unc.sum())
        - cum
    )
    return WeibullModel(
        shape_beta=beta, scale_eta=eta, fit_n=int(t.size), log_likelihood=loglik
    )


_FLATNESS = 0.10  # |relative change| below this over a segment reads as flat


def _direction(h_from: float, h_to: float) -> int:
    """-1 falling, 0 flat, +1 rising; flat when |rel change| < 10%."""
    rel = (h_to - h_from) / max(abs(h_from), 1e-12)
    if rel > _FLATNESS:
        return 1
    if rel < -_FLATNESS:
        return -1
    return 0


def classify_hazard_shape(curve: HazardCurve) -> FailurePatternClass:
    """Map a sampled hazard curve to one of the classes A-F.

    Features are the hazard directions across the first quartile, the middle
    half, and the last quartile of the age range (values taken at the grid
    points nearest the quartile boundaries). A U shape always maps to E;
    rise-then-fall shapes are contradictory and unclassifiable.
    """
    if len(curve.grid) < 8:
        raise ValueError("need at least 8 grid points to classify")
    ages = np.array([a for a, _ in curve.grid])
    values = np.array([h for _, h in curve.grid])
    span = ages[-1] - ages[0]

    def value_at(q: float) -> float:
        return float(values[int(np.argmin(np.abs(ages - (ages[0] + q * span))))])

    h0, h1, h3, h4 = value_at(0.0), value_at(0.25), value_at(0.75), value_at(1.0)
    early = _direction(h0, h1)
    mid = _direction(h1, h3)
    late = _direction(h3, h4)

    if early < 0:
        return FailurePatternClass.E if late > 0 else FailurePatternClass.F
    if mid < 0 or late < 0:
        raise UnclassifiableShape(
            f"hazard rises then falls (early={early}, mid={mid}, late={late})"
        )
    if early == 0 and mid == 0:
        return FailurePatternClass.A if late > 0 else FailurePatternClass.D
    if early > 0 and mid > 0 and late > 0:
        return FailurePatternClass.B
    return FailurePatternClass.C


def hazard_curve_from_model(
    model: WeibullModel, n: int = 64, t_max: Optional[float] = None
) -> HazardCurve:
    """Sample a model's hazard over (0, t_max] onto a normalized age grid."""
    if n < 8:
        raise ValueError("need at least 8 samples")
    horizon = t_max if t_max is not None else 2.0 * model.scale_eta
    ages = np.linspace(1.0 / n, 1.0, n)
    grid = tuple(
        (float(a), weibull_hazard(float(a) * horizon, model)) for a in ages
    )
    return HazardCurve(grid=grid)
