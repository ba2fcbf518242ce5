"""Anonymity metrics, the side-information bounds and the node-level evaluator."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import closed_form as cf
from .closed_form import RRGContext
from .designer import (DesignParams, design_side_info, induced_posterior, mean_iteration_time,
                       optimize_kappa)
from .distributions import DistanceDistribution, entropy, total_variation
from .errors import InvalidParameters, UnreachableDestination, ValidationError

__all__ = [
    "entropy", "total_variation", "tv_bound", "entropy_lower_bound", "alpha_guarantee",
    "AlphaGuarantee", "node_design_matrix", "alpha_privacy_node_level", "NodeLevelResult",
    "PrivacyReport", "privacy_report", "expanded_entropy", "guarantee_rho",
]


def _inv_one_minus_exp(x: float) -> float:
    # 1 / (1 - e^{-x}); x = inf gives 1
    return 1.0 / -math.expm1(-x)


def tv_bound(ctx: RRGContext, delta: int, kappa: float, kappa_obs: float, ell_min: int,
             ell_max: int, phi: float | None = None) -> float:
    """Upper bound on ``TV(W_kappa_obs, W_kappa)`` for the side-information design.

    ``phi`` defaults to ``P(nsp | ell_max)``. ``delta`` does not enter the
    bound; it is accepted so callers can pass a full configuration.
    """
    if ell_max <= ell_min:
        raise InvalidParameters("the bound needs ell_max > ell_min")
    if not (kappa > ell_max and kappa_obs > ell_max):
        raise InvalidParameters("kappa and kappa' must exceed ell_max")
    phi = cf.nsp_prob(ctx, ell_max) if phi is None else phi
    x = ctx.rate
    total = 0.0
    for ell in range(ell_min, ell_max + 1):
        gap = ell * abs(_inv_one_minus_exp(x * (kappa_obs - ell)) - _inv_one_minus_exp(x * (kappa - ell)))
        total += math.expm1(x * phi * gap)
    return total / (ell_max - ell_min)


def entropy_lower_bound(rho: float, d: int) -> float:
    """``(1 - rho) log(d + 1) + rho log rho - rho``; may be negative (vacuous)."""
    if not 0.0 <= rho <= 1.0:
        raise InvalidParameters(f"rho must lie in [0, 1], got {rho}")
    if d < 1:
        raise InvalidParameters("d must be >= 1")
    rlogr = rho * math.log(rho) if rho > 0 else 0.0
    return (1.0 - rho) * math.log(d + 1) + rlogr - rho


def expanded_entropy(marginal: DistanceDistribution, shells) -> float:
    """Entropy of spreading each distance mass uniformly over its shell.

    ``H(M) + sum_l M(l) log A(l)``; ``shells`` is indexed by distance.
    """
    return entropy(marginal) + float(sum(m * math.log(shells[int(l)])
                                         for l, m in zip(marginal.ells, marginal.mass) if m > 0))


# ---------------------------------------------------------------------------
# probabilistic guarantee

def guarantee_epsilon(ctx: RRGContext, delta_prime: float, ell_min: int, ell_max: int) -> float:
    """Order-wise deviation scale of the side-information mean (constants set to 1)."""
    q = 1.0 - delta_prime
    small = q * math.exp(-(2 * ell_min - ell_max) * ctx.rate) - 1.0
    large = (-2.0 - math.log(q)) / (2.0 * math.log(q))
    return ell_max / 2.0 * max(small, large)


def guarantee_rho(ctx: RRGContext, eps: float, ell_min: int, ell_max: int, phi: float) -> float:
    """Unclamped TV level ``(1/d) sum_l exp(c' phi eps l / 2N) - 1``."""
    a = ctx.rate * phi * eps / 2.0
    d = ell_max - ell_min
    return sum(math.exp(a * l) for l in range(ell_min, ell_max + 1)) / d - 1.0


@dataclass(frozen=True)
class AlphaGuarantee:
    alpha: float
    eps: float
    rho: float
    kappa: float
    alpha_raw: float
    rho_raw: float
    mode: str

    @property
    def vacuous(self) -> bool:
        return self.alpha_raw <= 0.0 or self.rho_raw > 1.0


def alpha_guarantee(ctx: RRGContext, delta: int, delta_prime: float, ell_min: int, ell_max: int,
                    phi: float | None = None, mode: str = "optimized") -> AlphaGuarantee:
    """Order-wise alpha-privacy level holding with probability ``1 - delta_prime``.

    ``mode="optimized"`` pairs the guarantee with the optimised design point;
    ``mode="average"`` is the average-return-time (or infinite) design point,
    which doubles ``eps``. ``alpha`` is floored at 0 and ``rho`` clamped to
    ``[0, 1]``; the unclamped values are kept in ``alpha_raw``/``rho_raw``.
    """
    if ell_max <= ell_min:
        raise InvalidParameters("the guarantee needs ell_max > ell_min")
    phi = cf.nsp_prob(ctx, ell_max) if phi is None else phi
    eps = guarantee_epsilon(ctx, delta_prime, ell_min, ell_max)
    if mode == "optimized":
        kappa = optimize_kappa(ctx, delta, delta_prime, ell_min, ell_max).kappa
    elif mode == "average":
        eps *= 2.0
        kappa = cf.frt_mean_nretro(ctx)
    else:
        raise InvalidParameters(f"unknown mode {mode!r}")
    rho_raw = guarantee_rho(ctx, eps, ell_min, ell_max, phi)
    rho = min(max(rho_raw, 0.0), 1.0)
    alpha_raw = entropy_lower_bound(rho, ell_max - ell_min)
    alpha = 0.0 if rho_raw > 1.0 else max(alpha_raw, 0.0)
    return AlphaGuarantee(alpha, eps, rho, kappa, alpha_raw, rho_raw, mode)


# ---------------------------------------------------------------------------
# node-level evaluation on a concrete graph

def node_design_matrix(g, p: DistanceDistribution, shells: str = "analytic") -> np.ndarray:
    """``D[i, j] = p(d(i, j)) / A(d(i, j))`` for a distance-symmetric design.

    ``shells="analytic"`` divides by the tree shell size, ``"per-node"`` by
    the true shell size of the source ``i``, which makes each row a proper
    distribution over destinations.
    """
    n = g.n_nodes
    dist = g.distances if g.distances is not None else np.stack([g.distances_from(i) for i in range(n)])
    pm = np.zeros(dist.max() + 1)
    for l, m in zip(p.ells, p.mass):
        if l < len(pm):
            pm[l] = m
    if shells == "analytic":
        a = np.array([1.0] + [float(g.degree * (g.degree - 1) ** (l - 1)) for l in range(1, len(pm))])
        return pm[dist] / a[dist]
    if shells == "per-node":
        a = np.where(g.shells > 0, g.shells, 1).astype(float)
        rows = np.arange(n)[:, None]
        return pm[dist] / a[rows, dist]
    raise InvalidParameters(f"unknown shell strategy {shells!r}")


def _source_likelihoods(ctx: RRGContext, delta: int, max_ell: int, kappa_obs: float | None) -> np.ndarray:
    """Per-source window likelihood indexed by distance (0 where impossible)."""
    lik = np.zeros(max_ell + 1)
    for ell in range(1, max_ell + 1):
        if kappa_obs is None or math.isinf(kappa_obs):
            center = cf.fht_mean(ctx, ell)
        elif kappa_obs > ell:
            center = cf.fht_mean_truncated(ctx, ell, kappa_obs)
        else:
            continue
        lik[ell] = cf.window_likelihood(ctx, ell, delta, center)
    return lik


@dataclass
class NodeLevelResult:
    alpha: float
    per_destination_entropy: np.ndarray
    alpha_distance: float
    per_destination_distance_entropy: np.ndarray
    posteriors: np.ndarray = field(repr=False)
    distance_marginals: np.ndarray = field(repr=False)


def alpha_privacy_node_level(g, design, delta: int, estimator: str = "mean",
                             kappa_obs: float | None = None, shells: str = "analytic") -> NodeLevelResult:
    """Minimum over destinations of the source-posterior entropy on a concrete graph.

    ``design`` is a :class:`DistanceDistribution` (expanded with
    :func:`node_design_matrix` using ``shells``) or an ``N x N`` matrix with
    ``design[i, j] = p_{D_i}(j)``. The destination centres its window on the
    mean hitting time (``estimator="mean"``) or on the side-information mean
    for ``T <= kappa_obs`` (``estimator="truncated"``).

    Besides the node-level entropies this reports the distance-level entropy
    of each destination: the per-source weight averaged over each shell and
    renormalised over distances.
    """
    ctx = g.context
    n = g.n_nodes
    if isinstance(design, DistanceDistribution):
        design = node_design_matrix(g, design, shells)
    design = np.asarray(design, dtype=float)
    if design.shape != (n, n):
        raise InvalidParameters(f"design matrix must be {n}x{n}")
    if estimator == "mean":
        kappa_obs = None
    elif estimator != "truncated" or kappa_obs is None:
        raise InvalidParameters("estimator must be 'mean' or 'truncated' with kappa_obs")
    dist = g.distances if g.distances is not None else np.stack([g.distances_from(i) for i in range(n)])
    diam = int(dist.max())
    lik = _source_likelihoods(ctx, delta, diam, kappa_obs)
    weights = design * lik[dist]
    np.fill_diagonal(weights, 0.0)
    totals = weights.sum(axis=0)
    if np.any(totals <= 0):
        bad = int(np.flatnonzero(totals <= 0)[0])
        raise UnreachableDestination(f"destination {bad} has no support-compatible source")
    post = weights / totals
    with np.errstate(divide="ignore", invalid="ignore"):
        node_h = -np.nansum(np.where(post > 0, post * np.log(post), 0.0), axis=0)

    marg = np.zeros((n, diam + 1))
    dist_h = np.zeros(n)
    for j in range(n):
        sums = np.bincount(dist[:, j], weights=weights[:, j], minlength=diam + 1)
        marg[j] = sums / sums.sum()
        counts = g.shells[j]
        means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
        dist_h[j] = entropy(means / means.sum())
    return NodeLevelResult(float(node_h.min()), node_h, float(dist_h.min()), dist_h, post, marg)


# ---------------------------------------------------------------------------
# report

@dataclass
class PrivacyReport:
    """Summary of one design evaluated at an observed side-information level."""

    alpha: float
    per_destination_entropy: dict
    tv_actual: float
    tv_bound: float
    entropy_bound: float
    mean_iteration_time: float
    config_echo: dict
    alpha_distance: float | None = None
    per_destination_distance_entropy: dict | None = None
    posterior_entropy: float | None = None
    order_wise_alpha: float | None = None

    FLAT_FIELDS = ("alpha", "alpha_distance", "posterior_entropy", "tv_actual", "tv_bound",
                   "entropy_bound", "entropy_bound_floored", "order_wise_alpha", "mean_iteration_time")

    @property
    def entropy_bound_floored(self) -> float:
        """The entropy bound clipped at 0; the raw value can be negative."""
        return max(self.entropy_bound, 0.0)

    def flat_row(self) -> dict:
        row = {k: getattr(self, k) for k in self.FLAT_FIELDS}
        row.update(self.config_echo)
        return row

    def to_csv(self, path=None) -> str:
        row = self.flat_row()
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        w.writeheader()
        w.writerow({k: _fmt(v) for k, v in row.items()})
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def destinations_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dest", "entropy", "distance_entropy"])
        dist = self.per_destination_distance_entropy or {}
        for j in sorted(self.per_destination_entropy):
            w.writerow([j, _fmt(self.per_destination_entropy[j]), _fmt(dist.get(j))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def privacy_report(ctx: RRGContext, params: DesignParams, kappa_obs: float, graph=None,
                   shells: str = "analytic") -> PrivacyReport:
    """Evaluate the side-information design of ``params`` when ``kappa_obs`` is observed.

    Without a graph the report is distance-level only and ``alpha`` is the
    entropy of the induced posterior. With a graph ``alpha`` is the node-level
    minimum over destinations.
    """
    p = design_side_info(ctx, params.delta, params.kappa, params.ell_min, params.ell_max)
    w_obs = induced_posterior(ctx, p, params.delta, kappa_obs)
    w_ref = induced_posterior(ctx, p, params.delta, params.kappa)
    rho = total_variation(w_obs, w_ref)
    h_obs = entropy(w_obs)
    if params.ell_max > params.ell_min:
        bound = tv_bound(ctx, params.delta, params.kappa, kappa_obs, params.ell_min, params.ell_max)
        h_bound = entropy_lower_bound(min(bound, 1.0), params.d)
        order_alpha = alpha_guarantee(ctx, params.delta, params.delta_prime, params.ell_min,
                                      params.ell_max).alpha
    else:
        bound, h_bound, order_alpha = 0.0, 0.0, 0.0
    echo = {"n": ctx.n, "c": ctx.c, **asdict(params), "kappa_obs": kappa_obs}
    report = PrivacyReport(
        alpha=h_obs, per_destination_entropy={}, tv_actual=rho, tv_bound=bound,
        entropy_bound=h_bound, mean_iteration_time=mean_iteration_time(ctx, p),
        config_echo=echo, posterior_entropy=h_obs, order_wise_alpha=order_alpha,
    )
    if graph is not None:
        res = alpha_privacy_node_level(graph, p, params.delta, "truncated", kappa_obs, shells)
        report.alpha = res.alpha
        report.alpha_distance = res.alpha_distance
        report.per_destination_entropy = {j: float(h) for j, h in enumerate(res.per_destination_entropy)}
        report.per_destination_distance_entropy = {
            j: float(h) for j, h in enumerate(res.per_destination_distance_entropy)}
    if rho <= bound and h_bound > h_obs + 1e-9:
        raise ValidationError("entropy bound exceeds the observed entropy although TV is within its bound")
    return report
