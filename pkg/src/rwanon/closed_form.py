"""Closed-form hitting- and return-time quantities for random regular graphs.

Everything here is a pure function of an :class:`RRGContext` (``N``, ``c``)
and integer distances/times. Functions accept scalars or numpy arrays for the
time argument; distances are scalars.

Notation used throughout: ``rate = c'/N`` with ``c' = (c-2)/(c-1)``. The
non-shortest-path (``nsp``) first hitting time is a geometric tail with that
rate starting one step after the distance ``ell``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, InvalidParameters

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RRGContext:
    n: int
    c: int

    def __post_init__(self):
        if self.c < 3:
            raise InvalidParameters(f"degree must be >= 3, got {self.c}")
        if self.n <= self.c:
            raise InvalidParameters(f"need N > c, got N={self.n}, c={self.c}")

    @property
    def c_prime(self) -> float:
        return (self.c - 2) / (self.c - 1)

    @property
    def rate(self) -> float:
        return self.c_prime / self.n


def _check_ell(ell):
    if ell < 1:
        raise DomainError(f"distance must be >= 1, got {ell}")


# ---------------------------------------------------------------------------
# case probabilities

def sp_prob(ctx: RRGContext, ell: int) -> float:
    """Probability that a walk between nodes at distance ``ell`` is shortest-path-like."""
    _check_ell(ell)
    p = (1.0 / (ctx.c - 1)) ** ell + 1.0 / ctx.n
    if p > 1.0:
        log.warning("P(SP|%d) = %.6g > 1 for N=%d, c=%d; clamped to 1", ell, p, ctx.n, ctx.c)
        return 1.0
    return p


def nsp_prob(ctx: RRGContext, ell: int) -> float:
    return 1.0 - sp_prob(ctx, ell)


# ---------------------------------------------------------------------------
# first hitting time pmfs

def fht_pmf_sp(ctx: RRGContext, ell: int, t):
    """Shortest-path first hitting time pmf, zero unless ``t >= ell`` and ``t - ell`` even.

    Evaluated through log-gamma so ``t`` in the millions is fine.
    """
    _check_ell(ell)
    t = np.asarray(t, dtype=np.int64)
    ok = (t >= ell) & ((t - ell) % 2 == 0)
    tt = np.where(ok, t, ell)
    k = (tt + ell) // 2
    logp = (
        math.log(ell)
        - np.log(tt)
        + gammaln(tt + 1)
        - gammaln(k + 1)
        - gammaln(tt - k + 1)
        + k * math.log1p(-1.0 / ctx.c)
        + 0.5 * (ell - tt) * math.log(ctx.c)
    )
    out = np.where(ok, np.exp(logp), 0.0)
    return out if out.ndim else float(out)


def fht_pmf_nsp(ctx: RRGContext, ell: int, t):
    """Geometric first hitting time pmf of the non-shortest-path case; zero for ``t <= ell``.

    ``t`` may be real-valued (the window-sum identities step through
    non-integer centres).
    """
    _check_ell(ell)
    t = np.asarray(t, dtype=float)
    x = ctx.rate
    out = np.where(t > ell, math.expm1(x) * np.exp(-x * (t - ell)), 0.0)
    return out if out.ndim else float(out)


def fht_tail_nsp(ctx: RRGContext, ell: int, t):
    """``P(T > t | ell, nsp)``: 1 up to ``ell``, then ``exp(-rate (t - ell))``."""
    t = np.asarray(t, dtype=float)
    out = np.where(t <= ell, 1.0, np.exp(-ctx.rate * (t - ell)))
    return out if out.ndim else float(out)


def fht_pmf(ctx: RRGContext, ell: int, t):
    sp = sp_prob(ctx, ell)
    return sp * fht_pmf_sp(ctx, ell, t) + (1.0 - sp) * fht_pmf_nsp(ctx, ell, t)


# ---------------------------------------------------------------------------
# means

def fht_mean_sp(ctx: RRGContext, ell: int) -> float:
    _check_ell(ell)
    return ctx.c / (ctx.c - 2) * ell


def fht_mean_nsp(ctx: RRGContext, ell: int) -> float:
    _check_ell(ell)
    return ell - 1.0 / math.expm1(-ctx.rate)


def fht_mean(ctx: RRGContext, ell: int) -> float:
    sp = sp_prob(ctx, ell)
    return fht_mean_sp(ctx, ell) * sp + fht_mean_nsp(ctx, ell) * (1.0 - sp)


def fht_tail_sum_nsp(ctx: RRGContext, ell: int, kappa: float) -> float:
    """Closed form of ``sum_{t=0}^{kappa-1} P(T > t | ell, nsp)``."""
    x = ctx.rate
    return ell + math.expm1(-x * (kappa - ell)) / math.expm1(-x)


def fht_mean_nsp_truncated(ctx: RRGContext, ell: int, kappa: float) -> float:
    """Side-information mean of the nsp hitting time when it is known to be at most ``kappa``.

    Equals ``ell / (1 - exp(-rate (kappa - ell))) + 1 / (1 - exp(-rate))`` and
    tends to :func:`fht_mean_nsp` as ``kappa`` grows. Accepts ``math.inf``.
    """
    _check_ell(ell)
    if not kappa > ell:
        raise DomainError(f"kappa must exceed the distance: kappa={kappa}, ell={ell}")
    x = ctx.rate
    return ell / -math.expm1(-x * (kappa - ell)) - 1.0 / math.expm1(-x)


def _sp_cdf(ctx: RRGContext, ell: int, kmax: int) -> float:
    if kmax < ell:
        return 0.0
    return float(np.sum(fht_pmf_sp(ctx, ell, np.arange(ell, kmax + 1))))


def nsp_prob_truncated(ctx: RRGContext, ell: int, kappa: float, exact: bool = False) -> float:
    """``P(nsp | ell, T <= kappa)``.

    By default the unconditioned ``P(nsp | ell)`` is returned, which is the
    relaxed approximation. ``exact=True`` conditions by
    summing both case pmfs up to ``floor(kappa)``.
    """
    nsp = nsp_prob(ctx, ell)
    if not exact or math.isinf(kappa):
        return nsp
    k = math.floor(kappa)
    a = nsp * -math.expm1(-ctx.rate * (k - ell)) if k > ell else 0.0
    b = (1.0 - nsp) * _sp_cdf(ctx, ell, k)
    return a / (a + b)


def fht_mean_truncated(ctx: RRGContext, ell: int, kappa: float, exact: bool = False,
                       exact_phi: bool = False) -> float:
    """Hitting-time mean used by a destination that knows ``T <= kappa``.

    Default: the nsp-dominated form, nsp truncated mean weighted by
    ``P(nsp | ell, T <= kappa)``, plus the (untruncated, sub-unit) SP term so
    that ``kappa -> inf`` recovers :func:`fht_mean` exactly.

    ``exact=True`` applies the same tail-sum estimator,
    ``sum_{t<K} P(T > t | ell) / P(T <= K | ell)`` with ``K = floor(kappa)``,
    directly to the full mixture pmf.
    """
    _check_ell(ell)
    if not kappa > ell:
        raise DomainError(f"kappa must exceed the distance: kappa={kappa}, ell={ell}")
    if math.isinf(kappa):
        return fht_mean(ctx, ell)
    if not exact:
        phi = nsp_prob_truncated(ctx, ell, kappa, exact=exact_phi)
        return fht_mean_sp(ctx, ell) * (1.0 - phi) + fht_mean_nsp_truncated(ctx, ell, kappa) * phi
    k = math.floor(kappa)
    sp = sp_prob(ctx, ell)
    t = np.arange(k)
    sp_tail = np.clip(1.0 - np.cumsum(fht_pmf_sp(ctx, ell, t)), 0.0, 1.0)
    tail = sp * sp_tail + (1.0 - sp) * fht_tail_nsp(ctx, ell, t)
    cdf = sp * _sp_cdf(ctx, ell, k) + (1.0 - sp) * -math.expm1(-ctx.rate * (k - ell))
    return float(np.sum(tail) / cdf)


# ---------------------------------------------------------------------------
# windowed likelihood factors

def _log_window_factor(ctx: RRGContext, ell: int, delta: int) -> float:
    # log of P(nsp|ell) (e^x - 1) e^{x(delta+ell)} (e^{-x(2delta+1)} - 1)/(e^{-x} - 1)
    x = ctx.rate
    return (
        math.log(nsp_prob(ctx, ell))
        + math.log(math.expm1(x))
        + x * (delta + ell)
        + math.log(math.expm1(-x * (2 * delta + 1)) / math.expm1(-x))
    )


def _check_delta(delta):
    if delta < 1:
        raise InvalidParameters(f"window half-width must be >= 1, got {delta}")


def K_delta(ctx: RRGContext, ell: int, delta: int, shell_size: float | None = None) -> float:
    """Distance-dependent prefactor of the windowed likelihood.

    ``shell_size`` defaults to the tree value ``c (c-1)^(ell-1)``.
    """
    _check_ell(ell)
    _check_delta(delta)
    a = _tree_shell(ctx, ell) if shell_size is None else shell_size
    if a <= 0:
        raise DomainError(f"shell size must be positive, got {a}")
    return math.exp(_log_window_factor(ctx, ell, delta) - math.log(a))


def _tree_shell(ctx: RRGContext, ell: int) -> float:
    return float(ctx.c * (ctx.c - 1) ** (ell - 1))


def window_likelihood(ctx: RRGContext, ell: int, delta: int, center: float) -> float:
    """``P(nsp|ell) * sum_{k=0}^{2 delta} P(T = center - delta + k | ell, nsp)`` in closed form.

    This is the per-source likelihood before dividing by the shell size.
    Valid when the window starts after ``ell``.
    """
    return math.exp(_log_window_factor(ctx, ell, delta) - ctx.rate * center)


def E_delta(ctx: RRGContext, ell: int, delta: int, shell_size: float | None = None) -> float:
    """Windowed likelihood around the unconditioned mean hitting time."""
    k = K_delta(ctx, ell, delta, shell_size)
    return k * math.exp(-ctx.rate * fht_mean(ctx, ell))


def E_delta_kappa(ctx: RRGContext, ell: int, delta: int, kappa: float,
                  shell_size: float | None = None, exact_phi: bool = False) -> float:
    """Windowed likelihood around the side-information mean for ``T <= kappa``."""
    k = K_delta(ctx, ell, delta, shell_size)
    return k * math.exp(-ctx.rate * fht_mean_truncated(ctx, ell, kappa, exact_phi=exact_phi))


def window_bounds(center: float, delta: int) -> tuple[int, int]:
    return math.ceil(center - delta), math.floor(center + delta)


def window_likelihood_exact(ctx: RRGContext, ell: int, delta: int, center: float) -> float:
    """Sum of the full mixture pmf over the integer window ``[ceil(c-d), floor(c+d)]``."""
    lo, hi = window_bounds(center, delta)
    t = np.arange(max(lo, 0), hi + 1)
    return float(np.sum(fht_pmf(ctx, ell, t)))


def E_delta_exact(ctx: RRGContext, ell: int, delta: int, kappa: float = math.inf,
                  shell_size: float | None = None) -> float:
    """Windowed likelihood without the nsp-dominance relaxation.

    Uses the full mixture pmf and the directly summed (side-information)
    mean; ``kappa=inf`` gives the no-side-information case.
    """
    _check_delta(delta)
    a = _tree_shell(ctx, ell) if shell_size is None else shell_size
    center = fht_mean_truncated(ctx, ell, kappa, exact=True)
    return window_likelihood_exact(ctx, ell, delta, center) / a


def sp_dominance_ratio(ctx: RRGContext, ell: int, delta: int, center: float | None = None) -> float:
    """Largest SP-term/nsp-term ratio of the mixture pmf over the integer window."""
    center = fht_mean(ctx, ell) if center is None else center
    lo, hi = window_bounds(center, delta)
    t = np.arange(lo, hi + 1)
    sp = sp_prob(ctx, ell)
    num = sp * fht_pmf_sp(ctx, ell, t)
    den = (1.0 - sp) * fht_pmf_nsp(ctx, ell, t)
    return float(np.max(num / den))


def sp_decay_rate(c: int) -> float:
    """Exponential decay rate ``log c - log(c-1)/2 - log 2`` of the SP pmf."""
    return math.log(c) - 0.5 * math.log(c - 1) - math.log(2)


# ---------------------------------------------------------------------------
# first return time (non-retroceding part)

def frt_tail(ctx: RRGContext, t):
    """``P(T_FR > t | not retro)``."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 3, np.exp(-ctx.c_prime * (t - 2) / (ctx.n - 2)), 1.0)
    return out if out.ndim else float(out)


def frt_conditional_tail(ctx: RRGContext, t, ell_min: int):
    """``P(T_FR >= t | not retro, T_FR >= 2 ell_min)`` for ``t >= 2 ell_min``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 2 * ell_min):
        raise DomainError(f"conditional return tail needs t >= {2 * ell_min}")
    out = np.exp(-ctx.c_prime * (t - 2 * ell_min) / (ctx.n - 2))
    return out if out.ndim else float(out)


def frt_mean_nretro(ctx: RRGContext) -> float:
    return 2.0 - 1.0 / math.expm1(-ctx.c_prime / (ctx.n - 2))
