"""Experiment manifests, figure sweeps, Monte Carlo validation and the CLI.

Every figure command writes a CSV whose leading ``#`` lines echo the full
manifest; the numeric body is a deterministic function of that manifest.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import closed_form as cf
from .closed_form import RRGContext
from .designer import (EXACT, DesignParams, design_basic, design_side_info, induced_posterior,
                       mean_iteration_time, optimize_kappa, side_info_lower_end)
from .distributions import DistanceDistribution, entropy, nats_to_bits
from .errors import InvalidParameters, ValidationError
from .graph import GraphTopology, generate_rrg
from .privacy import alpha_guarantee, entropy_lower_bound, privacy_report, tv_bound
from .simulator import (fht_ks, frt_conditional_ks, simulate_fht, simulate_frt, simulate_protocol)

log = logging.getLogger(__name__)

FIG2_PROBS = tuple(np.round(np.linspace(0.5, 0.99, 50), 10))
MIN_TRIALS = 1000


@dataclass(frozen=True)
class ExperimentManifest:
    """Parameters of one experiment; defaults are the reference configuration."""

    experiment: str = "fig1"
    n: int = 300
    c: int = 4
    delta: int = 5
    delta_prime: float = 0.3
    kappa: float = 634.0
    ell_min: int = 2
    ell_max: int = 6
    seed: int = 7
    trials: int = 10_000
    out: str | None = None
    mode: str | None = None
    grid: tuple | None = None
    grid_points: int = 200
    ell2_values: tuple = (2, 3, 4, 5, 6, 7)
    design: str | None = None
    graph: str | None = None

    def __post_init__(self):
        for name in ("grid", "ell2_values"):
            v = getattr(self, name)
            if v is not None:
                v = tuple(v)
                object.__setattr__(self, name, v)
                if not v or any(b <= a for a, b in zip(v, v[1:])):
                    raise InvalidParameters(f"{name} must be nonempty and strictly increasing")
        if self.out is not None:
            parent = Path(self.out).parent
            if not parent.exists():
                raise InvalidParameters(f"output directory {parent} does not exist")

    @property
    def ctx(self) -> RRGContext:
        return RRGContext(self.n, self.c)

    @property
    def params(self) -> DesignParams:
        return DesignParams(self.delta, self.ell_min, self.ell_max, self.kappa, self.delta_prime)

    def header(self) -> str:
        lines = [f"# {k}: {v}" for k, v in asdict(self).items() if k != "out"]
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path=None, **overrides) -> "ExperimentManifest":
        data = {}
        if path is not None:
            loaded = yaml.safe_load(Path(path).read_text()) or {}
            if not isinstance(loaded, dict):
                raise InvalidParameters(f"{path}: expected a key-value mapping")
            data.update(loaded)
        data.update({k: v for k, v in overrides.items() if v is not None})
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameters(f"unknown manifest keys: {sorted(unknown)}")
        return cls(**data)


def _write_csv(manifest: ExperimentManifest, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(manifest.header())
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    text = buf.getvalue()
    if manifest.out:
        Path(manifest.out).write_text(text)
    return text


def read_csv_rows(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return [{k: float(v) if v not in ("", None) else math.nan for k, v in r.items()}
            for r in csv.DictReader(lines)]


# ---------------------------------------------------------------------------
# figures

def _fig1_grid(m: ExperimentManifest) -> np.ndarray:
    if m.grid is not None:
        return np.asarray(m.grid, dtype=float)
    t1 = side_info_lower_end(m.ctx, m.delta_prime, m.ell_min)
    grid = np.linspace(t1, 3 * m.kappa, m.grid_points)
    return np.unique(np.append(grid, m.kappa))


def fig1_rows(m: ExperimentManifest) -> list[tuple]:
    ctx, p = m.ctx, m.params
    design = design_side_info(ctx, p.delta, p.kappa, p.ell_min, p.ell_max)
    design_ex = design_side_info(ctx, p.delta, p.kappa, p.ell_min, p.ell_max, mode=EXACT)
    base = DistanceDistribution.uniform(p.ell_min, p.ell_max)
    rows = []
    for kp in _fig1_grid(m):
        h = entropy(induced_posterior(ctx, design, p.delta, kp))
        h_ex = entropy(induced_posterior(ctx, design_ex, p.delta, kp, exact=True))
        h_base = entropy(induced_posterior(ctx, base, p.delta, kp))
        if p.ell_max > p.ell_min:
            rho = min(tv_bound(ctx, p.delta, p.kappa, kp, p.ell_min, p.ell_max), 1.0)
            h_bound = entropy_lower_bound(rho, p.d)
        else:
            h_bound = 0.0
        rows.append((float(kp), h, h_ex, h_base, h_bound))
    return rows


def run_fig1(m: ExperimentManifest) -> str:
    """Posterior entropy against observed side information."""
    return _write_csv(m, ("kappa_prime", "H_assumption1", "H_exact", "H_baseline", "H_bound"), fig1_rows(m))


class _EntropyCurve:
    """Posterior entropy of a fixed design on a shared side-information grid.

    The minimum over ``[t1, inf)`` is taken over the grid points above ``t1``
    together with ``t1`` itself and the no-side-information limit.
    """

    def __init__(self, ctx, design, delta, lo, exact=False, points=400):
        self.ctx, self.design, self.delta, self.exact = ctx, design, delta, exact
        self.grid = np.geomspace(lo, 100 * ctx.n, points)
        self.values = np.array([self._h(k) for k in self.grid])
        self.at_inf = self._h(None)

    def _h(self, kappa_obs):
        return entropy(induced_posterior(self.ctx, self.design, self.delta, kappa_obs, exact=self.exact))

    def min_above(self, t1: float) -> float:
        inside = self.values[self.grid >= t1]
        return float(min(self._h(t1), self.at_inf, inside.min(initial=math.inf)))


def min_entropy_over_set(ctx, design, delta, t1, exact=False, points: int = 400) -> float:
    """Smallest posterior entropy for side information in ``[t1, inf)``."""
    return _EntropyCurve(ctx, design, delta, t1, exact, points).min_above(t1)


def fig2_rows(m: ExperimentManifest) -> list[tuple]:
    ctx, p = m.ctx, m.params
    design = design_side_info(ctx, p.delta, p.kappa, p.ell_min, p.ell_max)
    design_ex = design_side_info(ctx, p.delta, p.kappa, p.ell_min, p.ell_max, mode=EXACT)
    base = DistanceDistribution.uniform(p.ell_min, p.ell_max)
    probs = m.grid if m.grid is not None else FIG2_PROBS
    lo = side_info_lower_end(ctx, 1.0 - float(min(probs)), p.ell_min)
    curves = [_EntropyCurve(ctx, design, p.delta, lo),
              _EntropyCurve(ctx, design_ex, p.delta, lo, exact=True, points=100),
              _EntropyCurve(ctx, base, p.delta, lo, points=100)]
    rows = []
    for prob in probs:
        dp = 1.0 - float(prob)
        a3 = alpha_guarantee(ctx, p.delta, dp, p.ell_min, p.ell_max).alpha
        acor = alpha_guarantee(ctx, p.delta, dp, p.ell_min, p.ell_max, mode="average").alpha
        t1 = side_info_lower_end(ctx, dp, p.ell_min)
        rows.append((float(prob), a3, acor, *(cv.min_above(t1) for cv in curves)))
    return rows


def run_fig2(m: ExperimentManifest) -> str:
    """Alpha-privacy against the probability ``1 - delta'`` of the guarantee."""
    cols = ("prob", "alpha_theorem3", "alpha_corollary", "min_entropy_numeric",
            "min_entropy_exact", "min_entropy_baseline")
    return _write_csv(m, cols, fig2_rows(m))


def fig3_rows(m: ExperimentManifest, shells=None) -> list[tuple]:
    ctx = m.ctx
    rows = []
    for ell2 in m.ell2_values:
        if ell2 < m.ell_min:
            raise InvalidParameters(f"ell2={ell2} is below ell_min={m.ell_min}")
        p = design_side_info(ctx, m.delta, m.kappa, m.ell_min, ell2, shells=shells)
        w = induced_posterior(ctx, p, m.delta, m.kappa, shells=shells)
        rows.append((int(ell2), mean_iteration_time(ctx, p), entropy(w)))
    return rows


def run_fig3(m: ExperimentManifest) -> str:
    """Posterior entropy at the design point against the mean delivery time."""
    return _write_csv(m, ("ell2", "T_mean", "entropy"), fig3_rows(m))


# ---------------------------------------------------------------------------
# validation

@dataclass
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    warning: str = ""

    @property
    def status(self) -> str:
        if self.warning:
            return "warn"
        return "pass" if self.passed else "fail"


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed or c.warning for c in self.checks)

    def add(self, name, value, threshold, passed, trials=None):
        warning = ""
        if trials is not None and trials < MIN_TRIALS and not passed:
            warning = f"insufficient samples ({trials} < {MIN_TRIALS})"
        self.checks.append(Check(name, float(value), float(threshold), bool(passed), warning))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "status", "value", "threshold", "note"])
        for c in self.checks:
            w.writerow([c.name, c.status, repr(c.value), repr(c.threshold), c.warning])
        return buf.getvalue()


def load_graph(m: ExperimentManifest) -> GraphTopology:
    if m.graph:
        return GraphTopology.read_edgelist(m.graph)
    return generate_rrg(m.n, m.c, m.seed)


def audit_graph(g: GraphTopology) -> list[str]:
    problems = []
    adj = g.adjacency
    if adj.shape != (g.n_nodes, g.degree):
        problems.append("adjacency shape")
    if np.any(adj == np.arange(g.n_nodes)[:, None]):
        problems.append("self-loop")
    if any(len(set(row)) != g.degree for row in adj.tolist()):
        problems.append("parallel edge")
    if g.distances is not None:
        d = g.distances
        if not np.array_equal(d, d.T) or np.any(np.diag(d) != 0):
            problems.append("distance matrix not symmetric with zero diagonal")
    if np.any(g.shells[:, 1:].sum(axis=1) != g.n_nodes - 1):
        problems.append("shell sums")
    return problems


def run_validate(m: ExperimentManifest, frt_trials: int | None = None) -> ValidationReport:
    """Monte Carlo against closed forms on a sampled graph.

    Hitting-time means use ``m.trials`` walks per pair; the SP fraction,
    hitting-time KS and return-time KS use ``10 * m.trials`` walks. Checks
    that fail with fewer than ``MIN_TRIALS`` walks are reported as warnings.
    """
    rep = ValidationReport()
    if m.design:
        try:
            DistanceDistribution.from_csv(m.design)
        except (InvalidParameters, ValueError, KeyError) as e:
            raise ValidationError(f"design {m.design}: {e}") from e
    g = load_graph(m)
    ctx = g.context
    problems = audit_graph(g)
    rep.add("graph_audit", len(problems), 0, not problems)
    rep.add("diameter_covers_ell_max", g.diameter, m.ell_max, g.diameter >= m.ell_max)
    many = 10 * m.trials if frt_trials is None else frt_trials
    for k, ell in enumerate((2, 3, 4)):
        targets = np.flatnonzero(g.distances_from(0) == ell)
        if len(targets) == 0:
            rep.add(f"fht_mean_l{ell}", math.nan, 0.05, False)
            continue
        s = simulate_fht(g, 0, int(targets[0]), m.trials, m.seed + 101 + k)
        rel = abs(s.mean / cf.fht_mean(ctx, ell) - 1)
        rep.add(f"fht_mean_rel_err_l{ell}", rel, 0.05, rel <= 0.05, m.trials)
        s = simulate_fht(g, 0, int(targets[0]), many, m.seed + 201 + k, classify=(ell == 2))
        ks = fht_ks(ctx, ell, s.completed)
        rep.add(f"fht_ks_l{ell}", ks, 0.05, ks < 0.05, many)
        if ell == 2:
            gap = abs(s.tree_flags.mean() - cf.sp_prob(ctx, 2))
            rep.add("sp_prob_abs_err_l2", gap, 0.01, gap <= 0.01, many)
    r = simulate_frt(g, 0, many, m.seed + 301)
    ks = frt_conditional_ks(ctx, r, m.ell_min)
    rep.add("frt_conditional_ks", ks, 0.05, ks < 0.05, many)
    rel = abs(r.mean / g.n_nodes - 1)
    rep.add("frt_mean_rel_err", rel, 0.05, rel <= 0.05, many)
    rep.add("cutoffs", r.n_cutoff, 0, r.n_cutoff == 0)
    return rep


# ---------------------------------------------------------------------------
# CLI

def _common(p: argparse.ArgumentParser):
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--config", help="YAML key-value manifest")
    p.add_argument("--n", type=int)
    p.add_argument("--c", type=int)
    p.add_argument("--delta", type=int)
    p.add_argument("--delta-prime", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--ell-min", type=int)
    p.add_argument("--ell-max", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--mode")
    p.add_argument("--design", help="distance-distribution CSV (ell,mass)")
    p.add_argument("--graph", help="edge-list file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rwanon", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("graph-gen", "sample a random regular graph and write its edge list"),
        ("design", "destination-distance design (--mode basic|side-info|exact|optimize)"),
        ("posterior", "induced source posterior and privacy report at --kappa-obs"),
        ("fig1", "entropy against observed side information"),
        ("fig2", "alpha-privacy against guarantee probability"),
        ("fig3", "entropy against mean iteration time"),
        ("simulate", "Monte Carlo (--mode protocol|fht|frt)"),
        ("validate", "Monte Carlo vs closed-form checks"),
    ]:
        p = sub.add_parser(name, help=help_)
        _common(p)
        if name == "posterior":
            p.add_argument("--kappa-obs", type=float, help="observed side information (omit for none)")
            p.add_argument("--bits", action="store_true", help="print entropies in bits")
            p.add_argument("--posterior-out", help="write the posterior as ell,mass CSV")
            p.add_argument("--destinations-out", help="per-destination CSV (needs --graph or --node-level)")
            p.add_argument("--node-level", action="store_true", help="evaluate on a sampled graph")
        if name == "simulate":
            p.add_argument("--iterations", type=int, default=2000)
            p.add_argument("--adversary", choices=("plain", "side-info"), default="side-info")
            p.add_argument("--source", type=int, default=0)
            p.add_argument("--target", type=int)
        if name in ("fig1", "fig2"):
            p.add_argument("--grid", help="comma-separated sweep values")
        if name == "fig3":
            p.add_argument("--ell2", help="comma-separated ell_max values")
    return parser


def _manifest(args) -> ExperimentManifest:
    over = {k: getattr(args, k, None) for k in
            ("n", "c", "delta", "delta_prime", "kappa", "ell_min", "ell_max", "seed", "trials",
             "out", "mode", "design", "graph")}
    over["experiment"] = args.command
    if getattr(args, "grid", None):
        over["grid"] = tuple(float(x) for x in args.grid.split(","))
    if getattr(args, "ell2", None):
        over["ell2_values"] = tuple(int(x) for x in args.ell2.split(","))
    return ExperimentManifest.load(args.config, **over)


def _emit(text: str, m: ExperimentManifest):
    if not m.out:
        sys.stdout.write(text)


def _cmd_design(m: ExperimentManifest) -> str:
    ctx, p = m.ctx, m.params
    mode = m.mode or "side-info"
    if mode == "basic":
        d = design_basic(ctx, p.delta, p.ell_min, p.ell_max)
    elif mode == "side-info":
        d = design_side_info(ctx, p.delta, p.kappa, p.ell_min, p.ell_max)
    elif mode == "exact":
        d = design_side_info(ctx, p.delta, p.kappa, p.ell_min, p.ell_max, mode=EXACT)
    elif mode == "optimize":
        k = optimize_kappa(ctx, p.delta, p.delta_prime, p.ell_min, p.ell_max)
        log.info("optimised kappa=%.3f on [%.3f, %s)", k.kappa, k.t1, k.t2)
        d = design_side_info(ctx, p.delta, k.kappa, p.ell_min, p.ell_max)
    elif mode == "uniform":
        d = DistanceDistribution.uniform(p.ell_min, p.ell_max)
    else:
        raise InvalidParameters(f"unknown design mode {mode!r}")
    text = d.to_csv()
    if m.out:
        Path(m.out).write_text(text)
    return text


def _design_for(m: ExperimentManifest) -> DistanceDistribution:
    if m.design:
        return DistanceDistribution.from_csv(m.design)
    p = m.params
    return design_side_info(m.ctx, p.delta, p.kappa, p.ell_min, p.ell_max)


def _cmd_posterior(m: ExperimentManifest, args) -> str:
    ctx, p = m.ctx, m.params
    design = _design_for(m)
    w = induced_posterior(ctx, design, p.delta, args.kappa_obs, exact=(m.mode == "exact"))
    graph = load_graph(m) if (args.node_level or m.graph) else None
    report = privacy_report(ctx, p, args.kappa_obs if args.kappa_obs else math.inf, graph)
    if args.destinations_out and graph is not None:
        report.destinations_csv(args.destinations_out)
    h = entropy(w)
    log.info("posterior entropy %.6f %s", nats_to_bits(h) if args.bits else h, "bits" if args.bits else "nats")
    if args.posterior_out:
        w.to_csv(args.posterior_out)
    return report.to_csv(m.out)


def _cmd_simulate(m: ExperimentManifest, args) -> str:
    g = load_graph(m)
    mode = m.mode or "protocol"
    if mode == "protocol":
        trace = simulate_protocol(g, _design_for(m), args.iterations, m.delta, m.seed, args.adversary)
        return trace.to_csv(m.out)
    if mode == "fht":
        target = args.target
        if target is None:
            target = int(np.flatnonzero(g.distances_from(args.source) == m.ell_min)[0])
        return simulate_fht(g, args.source, target, m.trials, m.seed).histogram_csv(m.out)
    if mode == "frt":
        return simulate_frt(g, args.source, m.trials, m.seed).histogram_csv(m.out)
    raise InvalidParameters(f"unknown simulate mode {mode!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        m = _manifest(args)
        m.ctx  # validates N, c
        if args.command not in ("graph-gen", "simulate", "validate"):
            m.params
    except (InvalidParameters, ValueError, TypeError, OSError, yaml.YAMLError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    try:
        if args.command == "graph-gen":
            g = generate_rrg(m.n, m.c, m.seed)
            path = m.out or f"rrg_n{m.n}_c{m.c}_s{m.seed}.edges"
            g.write_edgelist(path)
            print(f"wrote {path}: N={g.n_nodes} c={g.degree} diameter={g.diameter}", file=sys.stderr)
            return 0
        if args.command == "design":
            _emit(_cmd_design(m), m)
        elif args.command == "posterior":
            _emit(_cmd_posterior(m, args), m)
        elif args.command == "fig1":
            _emit(run_fig1(m), m)
        elif args.command == "fig2":
            _emit(run_fig2(m), m)
        elif args.command == "fig3":
            _emit(run_fig3(m), m)
        elif args.command == "simulate":
            _emit(_cmd_simulate(m, args), m)
        elif args.command == "validate":
            rep = run_validate(m)
            text = rep.to_csv()
            if m.out:
                Path(m.out).write_text(text)
            sys.stdout.write(text)
            return 0 if rep.ok else 1
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return 1
    except InvalidParameters as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
