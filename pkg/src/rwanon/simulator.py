"""Monte Carlo ground truth for hitting times, return times and the protocol.

Random streams: trials are processed in fixed-size blocks and block ``b``
draws from ``default_rng(SeedSequence([seed, b]))``, so results depend only on
``(seed, trials, block)`` and never on execution order.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import closed_form as cf
from .distributions import DistanceDistribution
from .errors import InvalidParameters, NoNodeAtDistance
from .privacy import node_design_matrix

BLOCK = 1000


@dataclass(frozen=True)
class SimConfig:
    trials: int
    master_seed: int
    max_steps: int
    graph_ref: object = field(repr=False)
    design_ref: DistanceDistribution | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidParameters("trials must be >= 1")
        if self.max_steps < 100 * self.graph_ref.n_nodes:
            raise InvalidParameters("max_steps must be at least 100 N")

    @classmethod
    def default(cls, g, trials: int, seed: int, design=None) -> "SimConfig":
        return cls(trials, seed, 100 * g.n_nodes, g, design)


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, block]))


def _blocks(trials: int, size: int = BLOCK):
    for b, start in enumerate(range(0, trials, size)):
        yield b, min(size, trials - start)


def _vector_walk(nbr: np.ndarray, pos: np.ndarray, elapsed: np.ndarray, target: int,
                 rng: np.random.Generator, max_steps: int) -> np.ndarray:
    """Advance independent walkers until each sits on ``target``; -1 past ``max_steps``."""
    c = nbr.shape[1]
    out = np.full(len(pos), -1, dtype=np.int64)
    idx = np.arange(len(pos))
    pos, elapsed = pos.copy(), elapsed.copy()
    while len(idx):
        pos = nbr[pos, rng.integers(0, c, size=len(pos))]
        elapsed += 1
        hit = pos == target
        out[idx[hit]] = elapsed[hit]
        keep = ~hit & (elapsed < max_steps)
        idx, pos, elapsed = idx[keep], pos[keep], elapsed[keep]
    return out


def _tree_phase(nbr: list, start: int, target: int, rng: np.random.Generator, max_steps: int):
    """Walk from ``start`` while the traversed subgraph stays a tree.

    Returns ``(position, steps, hit, depth_at_hit)``: ``hit`` is True when
    ``target`` was reached with the trajectory still a tree (``depth_at_hit``
    is then the tree distance start->target); otherwise the walk closed a
    cycle at ``position`` after ``steps`` steps. ``target == start`` detects
    retroceding returns.
    """
    c = len(nbr[start])
    depth = {start: 0}
    edges = set()
    u, steps = start, 0
    draws = iter(())
    while steps < max_steps:
        try:
            r = next(draws)
        except StopIteration:
            draws = iter(rng.integers(0, c, size=64).tolist())
            r = next(draws)
        v = nbr[u][r]
        steps += 1
        e = (u, v) if u < v else (v, u)
        if e in edges:
            u = v
            if v == target:
                return v, steps, True, depth[v]
            continue
        if v in depth:
            return v, steps, False, -1
        edges.add(e)
        depth[v] = depth[u] + 1
        u = v
        if v == target:
            return v, steps, True, depth[v]
    return u, steps, False, -1


@dataclass
class WalkSample:
    """First hitting/return times of independent walks (-1 marks a cutoff)."""

    times: np.ndarray
    tree_flags: np.ndarray | None
    max_steps: int

    @property
    def n_cutoff(self) -> int:
        return int(np.sum(self.times < 0))

    @property
    def completed(self) -> np.ndarray:
        return self.times[self.times >= 0]

    @property
    def mean(self) -> float:
        return float(self.completed.mean())

    def histogram(self) -> tuple[np.ndarray, np.ndarray]:
        t, counts = np.unique(self.completed, return_counts=True)
        return t, counts

    def histogram_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "count"])
        for t, n in zip(*self.histogram()):
            w.writerow([int(t), int(n)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def _simulate(g, start: int, target: int, trials: int, seed: int, max_steps: int | None,
              classify: bool, block: int) -> WalkSample:
    max_steps = 100 * g.n_nodes if max_steps is None else max_steps
    nbr = g.adjacency
    nbr_list = nbr.tolist()
    times, flags = [], []
    for b, size in _blocks(trials, block):
        rng = block_rng(seed, b)
        if not classify:
            pos = np.full(size, start, dtype=np.int64)
            times.append(_vector_walk(nbr, pos, np.zeros(size, dtype=np.int64), target, rng, max_steps))
            continue
        t_blk = np.full(size, -1, dtype=np.int64)
        f_blk = np.zeros(size, dtype=bool)
        pos, el, rest = [], [], []
        for k in range(size):
            u, steps, hit, depth = _tree_phase(nbr_list, start, target, rng, max_steps)
            if hit:
                t_blk[k] = steps
                f_blk[k] = True if target == start else depth == g.distance(start, target)
            elif u == target:
                t_blk[k] = steps
            elif steps < max_steps:
                pos.append(u)
                el.append(steps)
                rest.append(k)
        if rest:
            t_blk[rest] = _vector_walk(nbr, np.array(pos), np.array(el), target, rng, max_steps)
        times.append(t_blk)
        flags.append(f_blk)
    return WalkSample(np.concatenate(times), np.concatenate(flags) if classify else None, max_steps)


def simulate_fht(g, source: int, target: int, trials: int, seed: int, max_steps: int | None = None,
                 classify: bool = False, block: int = BLOCK) -> WalkSample:
    """First hitting times source -> target of simple random walks.

    With ``classify=True`` each walk is also labelled shortest-path-like
    (``tree_flags``): its traversed subgraph is a tree in which the target
    sits at the true graph distance.
    """
    if source == target:
        raise InvalidParameters("source and target must differ")
    return _simulate(g, source, target, trials, seed, max_steps, classify, block)


def simulate_frt(g, node: int, trials: int, seed: int, max_steps: int | None = None,
                 classify: bool = True, block: int = BLOCK) -> WalkSample:
    """First return times to ``node``; ``tree_flags`` marks retroceding returns."""
    return _simulate(g, node, node, trials, seed, max_steps, classify, block)


def classify_trajectory(g, path) -> bool:
    """True iff a completed source->target walk is shortest-path-like.

    The traversed nodes and edges must form a tree and the source-target
    distance inside that tree must equal the graph distance.
    """
    path = [int(v) for v in path]
    source, target = path[0], path[-1]
    nodes = set(path)
    edges = {(min(u, v), max(u, v)) for u, v in zip(path, path[1:])}
    if len(edges) != len(nodes) - 1:
        return False
    adj = {v: [] for v in nodes}
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    nxt.append(w)
        frontier = nxt
    return dist.get(target) == g.distance(source, target)


def walk_path(g, source: int, target: int, rng: np.random.Generator, max_steps: int) -> list[int]:
    """One full source->target trajectory (for tests and small diagnostics)."""
    nbr = g.adjacency
    path = [source]
    u = source
    while u != target and len(path) <= max_steps:
        u = int(nbr[u, rng.integers(0, g.degree)])
        path.append(u)
    return path


# ---------------------------------------------------------------------------
# distribution comparisons

def ks_distance(samples, model_cdf, support) -> float:
    """Sup-distance between the empirical and model CDFs over integer ``support``."""
    samples = np.sort(np.asarray(samples))
    support = np.asarray(support)
    emp = np.searchsorted(samples, support, side="right") / len(samples)
    return float(np.max(np.abs(emp - model_cdf(support))))


def fht_ks(ctx, ell: int, times) -> float:
    times = np.asarray(times)
    t = np.arange(0, int(times.max()) + 1)
    cdf = np.cumsum(cf.fht_pmf(ctx, ell, t))
    return ks_distance(times, lambda s: cdf[s], t)


def frt_conditional_ks(ctx, sample: WalkSample, ell_min: int, nonretro_only: bool = True) -> float:
    """KS distance of ``T_FR | T_FR >= 2 ell_min`` against the exponential tail model."""
    t = sample.times
    keep = t >= 2 * ell_min
    if nonretro_only:
        keep &= ~sample.tree_flags
    x = t[keep]
    support = np.arange(2 * ell_min, int(x.max()) + 1)
    # model CDF P(T <= s) = 1 - P(T >= s + 1)
    return ks_distance(x, lambda s: 1.0 - cf.frt_conditional_tail(ctx, s + 1, ell_min), support)


def markov_mean_hitting_times(g, target: int) -> np.ndarray:
    """Exact mean hitting times to ``target`` from the linear system ``(I - P) m = 1``."""
    n = g.n_nodes
    P = np.zeros((n, n))
    rows = np.repeat(np.arange(n), g.degree)
    np.add.at(P, (rows, g.adjacency.ravel()), 1.0 / g.degree)
    A = np.eye(n) - P
    A[target, :] = 0.0
    A[target, target] = 1.0
    b = np.ones(n)
    b[target] = 0.0
    return np.linalg.solve(A, b)


# ---------------------------------------------------------------------------
# protocol

PLAIN = "plain"
SIDE_INFO = "side-info"


@dataclass
class ProtocolTrace:
    """One row per delivery of the sealed envelope.

    ``kappa_obs`` is NaN when the destination had never been visited.
    ``posterior_entropy`` is distance-level, ``node_entropy`` over source ids.
    """

    iteration: np.ndarray
    source: np.ndarray
    dest: np.ndarray
    ell: np.ndarray
    t: np.ndarray
    kappa_obs: np.ndarray
    posterior_entropy: np.ndarray
    node_entropy: np.ndarray
    map_correct: np.ndarray
    prev_delivery: np.ndarray
    posteriors: np.ndarray | None = field(default=None, repr=False)
    resamples: int = 0
    cutoffs: int = 0

    COLUMNS = ("iter", "source", "dest", "ell", "t", "kappa_obs", "posterior_entropy", "map_correct")

    def __len__(self):
        return len(self.iteration)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for k in range(len(self)):
            kap = "" if math.isnan(self.kappa_obs[k]) else int(self.kappa_obs[k])
            w.writerow([int(self.iteration[k]), int(self.source[k]), int(self.dest[k]), int(self.ell[k]),
                        int(self.t[k]), kap, repr(float(self.posterior_entropy[k])),
                        int(self.map_correct[k])])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


class _Adversary:
    def __init__(self, g, design, delta, mode, shells):
        self.ctx = g.context
        self.g = g
        self.delta = delta
        self.mode = mode
        self.dist = g.distances if g.distances is not None else None
        self.design = node_design_matrix(g, design, shells)
        self.diam = g.diameter
        self._plain = self._lik(None)

    def _lik(self, kappa_obs):
        lik = np.zeros(self.diam + 1)
        for ell in range(1, self.diam + 1):
            if kappa_obs is None:
                center = cf.fht_mean(self.ctx, ell)
            elif kappa_obs > ell:
                center = cf.fht_mean_truncated(self.ctx, ell, kappa_obs)
            else:
                continue
            lik[ell] = cf.window_likelihood(self.ctx, ell, self.delta, center)
        return lik

    def posterior(self, dest: int, kappa_obs: float):
        if self.mode == SIDE_INFO and not math.isnan(kappa_obs):
            lik = self._lik(kappa_obs)
        else:
            lik = self._plain
        d = self.g.distances_from(dest)
        w = self.design[:, dest] * lik[d]
        w[dest] = 0.0
        post = w / w.sum()
        sums = np.bincount(d, weights=w, minlength=self.diam + 1)
        counts = self.g.shells[dest]
        means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
        return post, _entropy(means / means.sum())


def _entropy(p):
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def simulate_protocol(g, design: DistanceDistribution, iterations: int, delta: int, seed: int,
                      adversary_mode: str = SIDE_INFO, shells: str = "analytic", start: int = 0,
                      max_steps: int | None = None, keep_posteriors: bool = False) -> ProtocolTrace:
    """Run the sealed-envelope protocol with every destination acting as adversary.

    Each iteration the holder draws a distance from ``design``, a uniform
    destination in its own shell at that distance, and forwards the envelope
    along a simple random walk until the first arrival at the destination.
    The destination then scores every other node as a potential source with
    the window likelihood centred on the mean hitting time (``plain``) or on
    the side-information mean given the steps since it last saw the walk
    (``side-info``).
    """
    if adversary_mode not in (PLAIN, SIDE_INFO):
        raise InvalidParameters(f"unknown adversary mode {adversary_mode!r}")
    if design.support_max > g.diameter:
        raise InvalidParameters("design support exceeds the graph diameter")
    n = g.n_nodes
    max_steps = 100 * n if max_steps is None else max_steps
    rng = block_rng(seed, 0)
    adv = _Adversary(g, design, delta, adversary_mode, shells)
    nbr = g.adjacency.tolist()
    c = g.degree

    last = np.full(n, -1, dtype=np.int64)
    delivered = np.zeros(n, dtype=bool)
    clock = 0
    cur = start
    last[cur] = 0
    rows = {k: [] for k in ("iteration", "source", "dest", "ell", "t", "kappa_obs",
                            "posterior_entropy", "node_entropy", "map_correct", "prev_delivery")}
    posts = []
    resamples = cutoffs = 0
    draws = []
    pos_in = 0

    for it in range(iterations):
        ell = int(rng.choice(design.ells, p=design.mass))
        shell = g.shell(cur, ell)
        if len(shell) == 0:
            resamples += 1
            ell = int(rng.choice(design.ells, p=design.mass))
            shell = g.shell(cur, ell)
            if len(shell) == 0:
                raise NoNodeAtDistance(f"node {cur} has no node at distance {ell}")
        dest = int(shell[rng.integers(len(shell))])
        source = cur
        t = 0
        while cur != dest and t < max_steps:
            if pos_in >= len(draws):
                draws = rng.integers(0, c, size=4096).tolist()
                pos_in = 0
            cur = nbr[cur][draws[pos_in]]
            pos_in += 1
            clock += 1
            t += 1
            if cur != dest:
                last[cur] = clock
                delivered[cur] = False
        if cur != dest:
            cutoffs += 1
            continue
        kappa_obs = float(clock - last[dest]) if last[dest] >= 0 else math.nan
        prev = bool(delivered[dest])
        last[dest] = clock
        delivered[dest] = True

        post, h_dist = adv.posterior(dest, kappa_obs)
        top = np.flatnonzero(post >= post.max() * (1 - 1e-12))
        guess = int(top[rng.integers(len(top))]) if len(top) > 1 else int(top[0])
        for k, v in (("iteration", it), ("source", source), ("dest", dest), ("ell", ell), ("t", t),
                     ("kappa_obs", kappa_obs), ("posterior_entropy", h_dist),
                     ("node_entropy", _entropy(post)), ("map_correct", guess == source),
                     ("prev_delivery", prev)):
            rows[k].append(v)
        if keep_posteriors:
            posts.append(post)

    arr = {k: np.array(v) for k, v in rows.items()}
    arr["kappa_obs"] = arr["kappa_obs"].astype(float)
    return ProtocolTrace(**arr, posteriors=np.array(posts) if keep_posteriors else None,
                         resamples=resamples, cutoffs=cutoffs)
