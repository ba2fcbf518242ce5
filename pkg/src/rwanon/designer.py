"""Destination-distance designs that make the source posterior uniform.

A design ``p`` over distances ``[ell_min, ell_max]`` induces, at a destination
that centres its timing window on the (possibly side-information) mean hitting
time, the posterior ``W(ell) ∝ p(ell) L(ell)`` where ``L`` is the windowed
likelihood of :mod:`rwanon.closed_form`. Choosing ``p ∝ 1/L`` flattens ``W``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import closed_form as cf
from .closed_form import RRGContext
from .distributions import DistanceDistribution, entropy
from .errors import DegenerateNormalizer, DomainError, InvalidParameters

log = logging.getLogger(__name__)

ASSUMPTION = "assumption"
EXACT = "exact"

# shell sizes: None (tree value), a sequence indexed by distance, or a callable
Shells = None | Sequence[float] | Callable[[int], float]


@dataclass(frozen=True)
class DesignParams:
    delta: int = 5
    ell_min: int = 2
    ell_max: int = 6
    kappa: float = 634.0
    delta_prime: float = 0.3

    def __post_init__(self):
        if self.delta < 1:
            raise InvalidParameters("delta must be >= 1")
        if self.ell_min < 2:
            raise InvalidParameters("ell_min must be >= 2 (direct neighbors are excluded)")
        if self.ell_max < self.ell_min:
            raise InvalidParameters("ell_max must be >= ell_min")
        if not self.kappa > self.ell_max:
            raise InvalidParameters("kappa must exceed ell_max")
        if not 0 < self.delta_prime < 1:
            raise InvalidParameters("delta_prime must lie in (0, 1)")

    @property
    def d(self) -> int:
        return self.ell_max - self.ell_min

    def check_graph(self, diameter: int) -> None:
        if self.ell_max > diameter:
            raise InvalidParameters(f"ell_max={self.ell_max} exceeds the graph diameter {diameter}")


def shell_size(shells: Shells, ctx: RRGContext, ell: int) -> float:
    if shells is None:
        return float(ctx.c * (ctx.c - 1) ** (ell - 1))
    if callable(shells):
        return float(shells(ell))
    return float(shells[ell])


def likelihoods(ctx: RRGContext, ells, delta: int, kappa: float | None = None,
                mode: str = ASSUMPTION, shells: Shells = None, exact_phi: bool = False) -> np.ndarray:
    """Windowed likelihood factors ``L(ell)`` for each distance.

    ``kappa=None`` (or ``inf``) means no side information. ``mode="exact"``
    sums the full mixture pmf over the integer window instead of using the
    nsp-only closed form.
    """
    kappa = math.inf if kappa is None else kappa
    out = []
    for ell in ells:
        a = shell_size(shells, ctx, int(ell))
        if mode == EXACT:
            out.append(cf.E_delta_exact(ctx, int(ell), delta, kappa, shell_size=a))
        elif mode == ASSUMPTION:
            if math.isinf(kappa):
                out.append(cf.E_delta(ctx, int(ell), delta, shell_size=a))
            else:
                out.append(cf.E_delta_kappa(ctx, int(ell), delta, kappa, shell_size=a, exact_phi=exact_phi))
        else:
            raise InvalidParameters(f"unknown likelihood mode {mode!r}")
    return np.array(out)


def _check_support(ell_min, ell_max):
    if ell_min < 2 or ell_max < ell_min:
        raise InvalidParameters(f"need 2 <= ell_min <= ell_max, got [{ell_min}, {ell_max}]")
    if ell_min == ell_max:
        log.warning("degenerate support [%d, %d]: every posterior is a point mass", ell_min, ell_max)


def design_basic(ctx: RRGContext, delta: int, ell_min: int, ell_max: int,
                 mode: str = ASSUMPTION, shells: Shells = None) -> DistanceDistribution:
    """Inverse-likelihood design for a destination without side information."""
    _check_support(ell_min, ell_max)
    ells = np.arange(ell_min, ell_max + 1)
    lik = likelihoods(ctx, ells, delta, None, mode, shells)
    return DistanceDistribution.from_weights(ell_min, 1.0 / lik)


def design_side_info(ctx: RRGContext, delta: int, kappa: float, ell_min: int, ell_max: int,
                     mode: str = ASSUMPTION, shells: Shells = None,
                     exact_phi: bool = False) -> DistanceDistribution:
    """Inverse-likelihood design for a destination assumed to know ``T <= kappa``."""
    _check_support(ell_min, ell_max)
    if not kappa > ell_max:
        raise DomainError(f"kappa={kappa} must exceed ell_max={ell_max}")
    ells = np.arange(ell_min, ell_max + 1)
    lik = likelihoods(ctx, ells, delta, kappa, mode, shells, exact_phi)
    return DistanceDistribution.from_weights(ell_min, 1.0 / lik)


def induced_posterior(ctx: RRGContext, p: DistanceDistribution, delta: int,
                      kappa_obs: float | None = None, exact: bool = False,
                      shells: Shells = None, exact_phi: bool = False) -> DistanceDistribution:
    """Posterior over source distances seen by a destination observing ``T <= kappa_obs``.

    ``kappa_obs=None`` is the no-side-information posterior.
    """
    if kappa_obs is not None and not kappa_obs > p.support_max:
        raise DomainError(f"kappa'={kappa_obs} must exceed the support maximum {p.support_max}")
    lik = likelihoods(ctx, p.ells, delta, kappa_obs, EXACT if exact else ASSUMPTION, shells, exact_phi)
    w = p.mass * lik
    if not w.sum() > 0:
        raise DegenerateNormalizer("all posterior weights are zero")
    return DistanceDistribution.from_weights(p.support_min, w)


def mean_iteration_time(ctx: RRGContext, p: DistanceDistribution) -> float:
    """Expected delivery time ``sum_l p(l) E[T_FH | l]``."""
    return float(sum(m * cf.fht_mean(ctx, int(l)) for l, m in zip(p.ells, p.mass) if m > 0))


# ---------------------------------------------------------------------------
# choice of the design point kappa

def side_info_lower_end(ctx: RRGContext, delta_prime: float, ell_min: int) -> float:
    """Smallest observable return time kept with probability ``1 - delta_prime``."""
    return -math.log(1.0 - delta_prime) / ctx.rate + 2 * ell_min


def golden_section(f, a: float, b: float, tol: float = 1e-3) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (a + b) / 2


@dataclass(frozen=True)
class KappaChoice:
    kappa: float
    t1: float
    t2: float
    gap_t1: float
    gap_t2: float

    @property
    def objective(self) -> float:
        return max(self.gap_t1, self.gap_t2)


def _symmetric_set(ctx, kappa, delta_prime, ell_min):
    x = ctx.rate
    h = (1.0 - delta_prime) / (2 * math.exp(2 * ell_min * x))
    e = math.exp(-x * kappa)
    t1 = -math.log(e + h) / x
    t2 = -math.log(e - h) / x if e > h else math.inf
    return t1, t2


def optimize_kappa(ctx: RRGContext, delta: int, delta_prime: float, ell_min: int, ell_max: int,
                   split: str = "infinite", tol: float = 1e-3, upper: float | None = None) -> KappaChoice:
    """Design point minimising the worst entropy gap over the observable set.

    The observable set is ``[t1, inf)`` (``split="infinite"``) or the
    ``kappa``-centred interval with equal probability on both sides
    (``split="symmetric"``). The worst case sits at an endpoint, so the
    objective is ``max(gap(t1), gap(t2))``, minimised by golden-section search
    over ``(ell_max, upper]`` with ``upper = 100 N``.
    """
    if not 0 < delta_prime < 1:
        raise InvalidParameters("delta_prime must lie in (0, 1)")
    upper = 100.0 * ctx.n if upper is None else upper
    h_max = math.log(ell_max - ell_min + 1)

    def endpoints(kappa):
        if split == "infinite":
            return side_info_lower_end(ctx, delta_prime, ell_min), math.inf
        if split == "symmetric":
            return _symmetric_set(ctx, kappa, delta_prime, ell_min)
        raise InvalidParameters(f"unknown split {split!r}")

    def gaps(kappa):
        t1, t2 = endpoints(kappa)
        if not t1 > ell_max:
            raise DomainError(f"observable lower end t1={t1:.3f} does not exceed ell_max={ell_max}")
        p = design_side_info(ctx, delta, kappa, ell_min, ell_max)
        g1 = abs(h_max - entropy(induced_posterior(ctx, p, delta, t1)))
        g2 = abs(h_max - entropy(induced_posterior(ctx, p, delta, None if math.isinf(t2) else t2)))
        return t1, t2, g1, g2

    def objective(kappa):
        return max(gaps(kappa)[2:])

    lo = math.nextafter(float(ell_max), math.inf) + tol
    kappa = golden_section(objective, lo, upper, tol)
    t1, t2, g1, g2 = gaps(kappa)
    return KappaChoice(kappa, t1, t2, g1, g2)
