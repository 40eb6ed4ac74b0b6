"""``heavytail`` command line.

Exit codes: 0 when the claimed relation holds (or the command simply
succeeded), 2 when a comparison is violated or a catalog expectation
fails, 1 on usage or input errors, 3 when an exact enumeration
runs out of budget.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path

from . import __version__
from .distributions import (
    FellerParetoSpec,
    GPDSpec,
    MarginTransform,
    ParetoSpec,
    StPetersburgSpec,
    TwoPointSpec,
)
from .errors import BudgetError, ConfigurationError, HeavyTailError
from .exact import DEFAULT_NODE_BUDGET, format_fraction, stp_sum_cdf_exact
from .majorization import WeightVector, majorizes
from .montecarlo import (
    EmpiricalDistribution,
    GridSpec,
    crossing_detect,
    empirical_fsd_test,
    write_document,
    write_rows,
)
from . import portfolio, scenarios

EXIT_OK, EXIT_USAGE, EXIT_VIOLATED, EXIT_BUDGET = 0, 1, 2, 3
MIN_SAMPLES = 1000
NOISY_FIGURE_SAMPLES = 10**5

log = logging.getLogger("heavytail")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# configuration


def parse_count(text) -> int:
    """Accept ``1000``, ``1e6`` or ``10**6``."""
    s = str(text).strip().replace("_", "")
    try:
        if "**" in s:
            base, exp = s.split("**")
            value = int(base) ** int(exp)
        else:
            value = float(s)
    except ValueError as exc:
        raise ConfigurationError(f"not a count: {text!r}") from exc
    if value != int(value):
        raise ConfigurationError(f"not a whole number: {text!r}")
    return int(value)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    samples: int = 10**6
    confidence: float = 0.99
    grid_points: int = 512
    output_dir: str = "heavytail-out"
    format: str = "csv"
    workers: int = 1

    def __post_init__(self):
        if self.samples < MIN_SAMPLES:
            raise ConfigurationError(f"samples must be at least {MIN_SAMPLES}, got {self.samples}")
        if not 0.5 < self.confidence < 1:
            raise ConfigurationError(f"confidence must lie in (0.5, 1), got {self.confidence}")
        if self.format not in ("csv", "json-lines"):
            raise ConfigurationError(f"format must be csv or json-lines, got {self.format!r}")
        if self.grid_points < 2:
            raise ConfigurationError("grid needs at least 2 points")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(points=self.grid_points)

    @property
    def suffix(self) -> str:
        return ".csv" if self.format == "csv" else ".jsonl"

    def as_fields(self) -> dict:
        return {f"config.{k}": v for k, v in asdict(self).items()}


_CONVERTERS = {"seed": parse_count, "samples": parse_count, "confidence": float,
               "grid_points": parse_count, "output_dir": str, "format": str, "workers": parse_count}


def read_config_file(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for num, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in _CONVERTERS:
            raise ConfigurationError(f"{path}:{num}: expected one of {', '.join(_CONVERTERS)} as key=value")
        out[key] = _CONVERTERS[key](value.strip())
    return out


def resolve_config(args, environ=None) -> RunConfig:
    """Defaults, then config file, then ``HEAVYTAIL_SEED`` for the seed, then flags."""
    environ = os.environ if environ is None else environ
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    if "seed" not in values and environ.get("HEAVYTAIL_SEED"):
        values["seed"] = parse_count(environ["HEAVYTAIL_SEED"])
    for f in fields(RunConfig):
        flag = getattr(args, f.name, None)
        if flag is not None:
            values[f.name] = _CONVERTERS[f.name](flag)
    return RunConfig(**values)


def _add_run_options(p, samples=True):
    p.add_argument("--config", help="key=value configuration file")
    p.add_argument("--seed", help="master seed (falls back to HEAVYTAIL_SEED, then 0)")
    if samples:
        p.add_argument("--samples", help="Monte Carlo sample size per arm, e.g. 1e6")
        p.add_argument("--confidence", help="confidence of the DKW bands (default 0.99)")
        p.add_argument("--grid-points", dest="grid_points", help="evaluation grid size (default 512)")
        p.add_argument("--workers", help="threads used for sampling; output does not depend on it")
    p.add_argument("--output-dir", dest="output_dir", help="where result files go (default heavytail-out)")
    p.add_argument("--format", choices=("csv", "json-lines"), help="curve file format")


# ---------------------------------------------------------------------------
# margins from flags


def _floats(text) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_margin(text: str):
    """``pareto:0.5``, ``gpd:xi:beta``, ``fp:alpha:beta:gamma``, ``stp`` or ``twopoint:a:b:p``."""
    kind, *params = text.split(":")
    try:
        nums = [float(v) for v in params]
        if kind == "pareto" and len(nums) == 1:
            return ParetoSpec(nums[0])
        if kind == "gpd" and len(nums) in (1, 2):
            return GPDSpec(*nums)
        if kind == "fp" and len(nums) in (1, 2, 3):
            return FellerParetoSpec(*nums)
        if kind == "stp" and not nums:
            return StPetersburgSpec()
        if kind == "twopoint" and len(nums) in (2, 3):
            return TwoPointSpec(*nums)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse margin {text!r}") from exc
    raise ConfigurationError(f"unknown margin {text!r}; use pareto:a, gpd:xi:beta, fp:a:b:g, stp or twopoint:a:b:p")


def _margins(args, n) -> tuple:
    if args.margin:
        specs = [parse_margin(m) for m in args.margin.split(",")] if "," in args.margin else [parse_margin(args.margin)]
    else:
        specs = [ParetoSpec(a) for a in _floats(args.alpha)]
    if len(specs) == 1:
        specs = specs * n
    if len(specs) != n:
        raise ConfigurationError(f"{len(specs)} margins for {n} weights")
    return tuple(specs)


def _dependence(text, margins) -> scenarios.Dependence:
    kind, _, arg = text.partition(":")
    if kind == "iid":
        return scenarios.IID
    if kind == "comonotone":
        return scenarios.Dependence("comonotone")
    first = margins[0]
    if kind == "common-shock":
        if isinstance(first, FellerParetoSpec):
            return scenarios.Dependence.common_shock(first.alpha, first.beta, first.gamma)
        return scenarios.Dependence.common_shock(first.alpha)
    if kind == "mixture":
        mix = tuple(_floats(arg)) if arg else (1 / 3, 1 / 3, 1 / 3)
        return scenarios.Dependence("mixture", alpha=first.alpha, mix=mix)
    raise ConfigurationError(f"unknown dependence {text!r}; use iid, comonotone, common-shock or mixture:a,b,c")


# ---------------------------------------------------------------------------
# commands


def _document(cfg: RunConfig, anchor: str, argv, extra) -> dict:
    doc = {"anchor": anchor, "command": " ".join(argv), "seed": cfg.seed}
    doc.update(cfg.as_fields())
    doc.update(extra)
    return doc


def cmd_compare(args, cfg: RunConfig, argv) -> int:
    eta, theta = WeightVector.parse(args.eta), WeightVector.parse(args.theta)
    if len(eta) != len(theta):
        raise ConfigurationError(f"eta has {len(eta)} entries, theta has {len(theta)}")
    check = majorizes(eta, theta)
    if not check:
        print(f"order violated: {check.explain()}", file=sys.stderr)
        return EXIT_USAGE
    margins = _margins(args, len(eta))
    finite = not all(getattr(m, "infinite_mean", False) for m in margins)
    region = None
    if args.region:
        lo, _, hi = args.region.partition(",")
        region = (float(lo) if lo.strip() else None, float(hi) if hi.strip() else None)
    spec = scenarios.ScenarioSpec(
        margins, tuple(eta), tuple(theta),
        dependence=_dependence(args.dependence, margins),
        transform=MarginTransform.parse(args.transform) if args.transform else MarginTransform(),
        trigger_coupling=args.coupling, pairing=args.pairing, region=region, finite_mean=finite)
    sampler = scenarios.build(spec)
    low, high = sampler.draw(cfg.samples, cfg.seed, ("compare",), cfg.workers)
    low, high = EmpiricalDistribution(low), EmpiricalDistribution(high)
    grid = cfg.grid.with_region(sampler.region)
    verdict = empirical_fsd_test(low, high, grid, cfg.confidence)
    crossings = crossing_detect(low, high, grid, cfg.confidence)
    out = Path(cfg.output_dir)
    doc = _document(cfg, "compare", argv, {
        "components": ";".join(map(str, margins)), "eta": args.eta, "theta": args.theta,
        "dependence": args.dependence, "transform": args.transform or "identity",
        "region": sampler.region, "crossings": ";".join(f"{a:.6g}-{b:.6g}" for a, b in crossings)})
    doc.update(verdict.to_fields())
    write_document(out / "compare.txt", doc)
    write_rows(out / f"compare_curves{cfg.suffix}", verdict.curve_rows(), cfg.format)
    print(f"{verdict.relation}  min margin {verdict.strictness:+.3e}  band {verdict.band:.3e}  "
          f"(N={cfg.samples}, seed={cfg.seed})")
    if crossings:
        for a, b in crossings:
            print(f"crossing: CDFs swap order between x={a:.6g} and x={b:.6g}")
    elif not verdict.consistent:
        print(f"violation at x={verdict.grid[verdict.worst_index()]:.6g}")
    print(f"wrote {out / 'compare.txt'}")
    return EXIT_OK if verdict.consistent else EXIT_VIOLATED


def cmd_catalog(args, cfg: RunConfig, argv) -> int:
    ids = scenarios.catalog_ids() if args.entry == "all" else [args.entry]
    unknown = [i for i in ids if i not in scenarios.CATALOG]
    if unknown:
        print(f"unknown catalog entry {unknown[0]!r}; known entries: {', '.join(scenarios.catalog_ids())}",
              file=sys.stderr)
        return EXIT_USAGE
    out = Path(cfg.output_dir) / "catalog"
    rows = []
    print(f"{'id':<16} {'expected':<20} {'observed':<20} {'min_margin':>11} {'seed':>6}  status")
    for entry_id in ids:
        res = scenarios.run_catalog(entry_id, cfg.samples, cfg.seed, cfg.confidence, cfg.grid,
                                    out, cfg.format, cfg.workers)
        row = res.row()
        rows.append(row)
        print(f"{row['id']:<16} {row['expected']:<20} {row['observed']:<20} {row['min_margin']:>11} "
              f"{row['seed']:>6}  {row['status']}")
    write_rows(out / f"summary{cfg.suffix}", rows, cfg.format)
    write_document(out / "summary.txt", _document(cfg, "catalog", argv, {
        "entries": ",".join(ids), "passed": sum(r["status"] == "PASS" for r in rows)}))
    return EXIT_OK if all(r["status"] == "PASS" for r in rows) else EXIT_VIOLATED


def cmd_stp(args, cfg, argv) -> int:
    try:
        weights = [Fraction(w.strip()) for w in args.weights.split(",") if w.strip()]
        x = Fraction(args.x)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigurationError(f"weights and x must be rationals such as 1/3: {exc}") from exc
    try:
        value = stp_sum_cdf_exact(weights, x, strict=args.strict, budget=args.budget)
    except BudgetError as exc:
        print(f"budget exhausted after {exc.used} nodes; probability lies in "
              f"[{format_fraction(exc.lower)}, {format_fraction(exc.upper)}]", file=sys.stderr)
        return EXIT_BUDGET
    print(format_fraction(value))
    return EXIT_OK


def cmd_figure(args, cfg: RunConfig, argv) -> int:
    out = Path(cfg.output_dir)
    if cfg.samples < NOISY_FIGURE_SAMPLES:
        print(f"warning: {cfg.samples} samples per curve; expect wide sampling noise "
              f"(use at least {NOISY_FIGURE_SAMPLES})", file=sys.stderr)
    if args.fig == "fig1":
        data = scenarios.figure1_data(cfg.samples, cfg.seed, cfg.confidence, cfg.grid, cfg.workers)
        for idx, item in enumerate(data):
            rows = ({"x": r["x"], "cdf_low": 1 - r["survival_low"], "cdf_high": 1 - r["survival_high"]}
                    for r in item["verdict"].curve_rows())
            path = write_rows(out / f"fig1_{idx}{cfg.suffix}", rows, cfg.format)
            state = "ordering violated" if item["violation"] else "no violation beyond the band"
            print(f"eta={item['eta']} theta={item['theta']}: {state}; "
                  f"min margin {item['verdict'].strictness:+.3e}; wrote {path}")
        write_document(out / "fig1.txt", _document(cfg, "FIG1-reversed", argv, {
            "alphas": ",".join(map(str, scenarios.FIG1_ALPHAS)),
            "violations": sum(i["violation"] for i in data)}))
        return EXIT_OK
    alpha = float(args.alpha) if args.alpha else 0.5
    curves = scenarios.figure2_data(alpha, cfg.samples, cfg.seed, workers=cfg.workers,
                                    bootstrap=args.bootstrap)
    path = write_rows(out / f"fig2{cfg.suffix}", curves.rows(), cfg.format)
    write_document(out / "fig2.txt", _document(cfg, "FIG2", argv, {
        "alpha": alpha, "monotone": curves.monotone,
        "separated": curves.separated if args.bootstrap else "not-checked"}))
    print(f"{len(curves.ns)} curves over p in [{curves.p[0]:.2f}, {curves.p[-1]:.2f}]; "
          f"monotone in n: {curves.monotone}; wrote {path}")
    return EXIT_OK


def cmd_optimize(args, cfg: RunConfig, argv) -> int:
    pref = portfolio.parse_preference(args.pref)
    penalty = portfolio.PenaltySpec.parse(args.penalty)
    margins = _margins(args, args.n)
    model = scenarios.ComponentModel(margins)
    out = Path(cfg.output_dir)
    try:
        portfolio.check_admissible(pref, model)
    except HeavyTailError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_USAGE
    resolution = args.resolution
    if args.problem == "p1":
        res = portfolio.optimize_p1(pref, model, args.total, resolution, penalty, cfg.samples, cfg.seed)
        results = [res]
        best = res
    else:
        totals = _floats(args.totals)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            p2 = portfolio.optimize_p2(pref, model, penalty, totals, resolution, cfg.samples, cfg.seed)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        results = p2.per_total
        best = next(r for r in results if r.argmax == p2.argmax)
        print("every per-total argmax is the lattice point nearest the uniform ray" if p2.on_uniform_ray
              else "warning: some per-total argmax is off the uniform ray")
    for res in results:
        path = res.write_surface(out / f"surface_{args.problem}_total{res.total:g}{cfg.suffix}", cfg.format)
        print(f"total {res.total:g}: argmax {_fmt_w(res.argmax)}  value {res.value:.6g}  "
              f"noise band {res.band:.3g}  distance from uniform {res.distance_from_uniform:.4g}")
    print(f"best: {_fmt_w(best.argmax)}  value {best.value:.6g}  "
          f"distance from uniform ray {best.distance_from_uniform:.4g}")
    write_document(out / f"optimize_{args.problem}.txt", _document(cfg, f"optimize-{args.problem}", argv, {
        "preference": pref.label(), "penalty": penalty.label(), "n": args.n, "resolution": resolution,
        "argmax": _fmt_w(best.argmax), "value": best.value, "noise_band": best.band,
        "distance_from_uniform": best.distance_from_uniform, "exact": best.exact}))
    return EXIT_OK


def _fmt_w(w) -> str:
    return "(" + ", ".join(f"{x:.4g}" for x in w) + ")"


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heavytail", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"heavytail {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compare", help="Monte Carlo dominance check of eta.X against theta.X")
    p.add_argument("--eta", required=True, help="less diversified weights, e.g. 1,0")
    p.add_argument("--theta", required=True, help="more diversified weights, e.g. 0.5,0.5")
    p.add_argument("--alpha", default="0.5", help="Pareto tail index, one value or one per component")
    p.add_argument("--margin", help="margin spec instead of --alpha, e.g. gpd:1.5:2 or fp:0.5:2:1")
    p.add_argument("--dependence", default="iid", help="iid, comonotone, common-shock or mixture:a,b,c")
    p.add_argument("--transform", help="cap:c, floor:c, excess:c, tail:c or trigger:p")
    p.add_argument("--coupling", default="independent-events", choices=scenarios.COUPLINGS)
    p.add_argument("--pairing", default="sorted", choices=scenarios.PAIRINGS)
    p.add_argument("--region", help="restrict the comparison to lo,hi (either side may be empty)")
    _add_run_options(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("catalog", help="run one catalog entry or all of them")
    p.add_argument("entry", help=f"entry id or 'all' ({', '.join(scenarios.catalog_ids())})")
    _add_run_options(p)
    p.set_defaults(func=cmd_catalog)

    p = sub.add_parser("stp", help="exact P(sum w_i X_i < x) for iid St. Petersburg X_i")
    p.add_argument("--weights", required=True, help="rational weights, e.g. 1/3,1/3,1/3")
    p.add_argument("--x", required=True, help="threshold, rational")
    p.add_argument("--strict", action="store_true", help="P(S < x) instead of P(S <= x)")
    p.add_argument("--budget", type=parse_count, default=DEFAULT_NODE_BUDGET, help="enumeration node budget")
    p.set_defaults(func=cmd_stp, needs_config=False)

    p = sub.add_parser("figure", help="write the data behind a figure")
    p.add_argument("fig", choices=("fig1", "fig2"))
    p.add_argument("--alpha", help="tail index for fig2 (default 0.5)")
    p.add_argument("--bootstrap", type=int, default=200, help="fig2 bootstrap resamples (0 disables)")
    _add_run_options(p)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("optimize", help="lattice search for the best weights")
    p.add_argument("problem", choices=("p1", "p2"), help="p1: fixed total exposure, p2: totals from --totals")
    p.add_argument("--alpha", default="0.5", help="Pareto tail index (iid components)")
    p.add_argument("--margin", help="margin spec instead of --alpha")
    p.add_argument("--pref", default="quantile:0.95", help="quantile:p, eu:<utility> or rvar:p1:p2")
    p.add_argument("--penalty", default="none", help="none, sumsq:c or max:c")
    p.add_argument("--n", type=int, default=3, help="number of components")
    p.add_argument("--resolution", type=int, default=portfolio.DEFAULT_RESOLUTION)
    p.add_argument("--total", type=float, default=1.0, help="total exposure for p1")
    p.add_argument("--totals", default="0.5,1,1.5,2", help="candidate totals for p2")
    _add_run_options(p)
    p.set_defaults(func=cmd_optimize)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = None if getattr(args, "needs_config", True) is False else resolve_config(args)
        return args.func(args, cfg, ["heavytail"] + argv)
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (HeavyTailError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
