"""Preferences over portfolio outcomes, Schur probes and lattice optimizers.

Preferences come in three flavours: a left quantile, an expected utility
and a range-averaged quantile (a bounded distortion). The optimizers search
the full simplex lattice with one shared bank of component draws, so every
lattice point is scored on the same random numbers.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .distributions import TwoPointSpec
from .errors import BudgetError, ConfigurationError, SpecError
from .exact import two_point_eu_enumerate
from .majorization import TTransform, apply_chain
from .montecarlo import EmpiricalDistribution, dkw_epsilon, stream, write_rows
from .scenarios import ComponentModel

log = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 20
DEFAULT_LATTICE_BUDGET = 200_000
MONOTONE_PROBE_POINTS = 2048


# ---------------------------------------------------------------------------
# utilities


@dataclass(frozen=True)
class Utility:
    name: str
    fn: Callable
    bounded: bool = False
    concave: bool = False
    strictly_increasing: bool = True

    def __call__(self, x):
        return self.fn(x)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Minimum (concave) or maximum (convex) of affine pieces.

    Works on :class:`~fractions.Fraction` inputs, so expected utilities
    over two-point outcomes stay exact.
    """

    slopes: tuple
    intercepts: tuple
    convex: bool = False

    def __post_init__(self):
        if len(self.slopes) != len(self.intercepts) or not self.slopes:
            raise ConfigurationError("need matching, non-empty slopes and intercepts")
        if any(s < 0 for s in self.slopes):
            raise ConfigurationError("slopes must be non-negative for an increasing utility")

    def __call__(self, x):
        vals = [s * x + c for s, c in zip(self.slopes, self.intercepts)]
        return max(vals) if self.convex else min(vals)

    @classmethod
    def random(cls, rng: np.random.Generator, pieces: int = 3, convex: bool = False,
               denominator: int = 16) -> "PiecewiseLinear":
        """Random increasing piecewise-linear utility with rational coefficients."""
        slopes = sorted((Fraction(int(k), denominator) for k in rng.integers(1, 4 * denominator, pieces)),
                        reverse=not convex)
        intercepts = []
        for i, s in enumerate(slopes):
            if i == 0:
                intercepts.append(Fraction(0))
                continue
            # each new piece takes over at a random kink point x_i > 0
            kink = Fraction(int(rng.integers(1, 8 * denominator)), denominator)
            prev = slopes[i - 1] * kink + intercepts[-1]
            intercepts.append(prev - s * kink)
        return cls(tuple(slopes), tuple(intercepts), convex)


def _min_utility(c):
    return Utility(f"min:{c}", lambda x: np.minimum(x, c), bounded=True, concave=True, strictly_increasing=False)


def _cara(k):
    if k <= 0:
        raise ConfigurationError("cara coefficient must be positive")
    return Utility(f"cara:{k}", lambda x: -np.expm1(-k * np.asarray(x, dtype=float)), bounded=True, concave=True)


def _power(q):
    if q <= 0:
        raise ConfigurationError("power exponent must be positive")
    return Utility(f"power:{q}", lambda x: np.power(np.maximum(x, 0.0), q), concave=q <= 1)


UTILITIES = {
    "identity": lambda: Utility("identity", lambda x: x, concave=True),
    "sqrt": lambda: Utility("sqrt", lambda x: np.sqrt(np.maximum(x, 0.0)), concave=True),
    "log1p": lambda: Utility("log1p", lambda x: np.log1p(np.maximum(x, 0.0)), concave=True),
    "exp": lambda: Utility("exp", lambda x: np.exp(np.minimum(x, 709.0))),
    "square": lambda: Utility("square", lambda x: np.square(np.maximum(x, 0.0))),
}
PARAMETRIC_UTILITIES = {"min": _min_utility, "cara": _cara, "power": _power}


def parse_utility(text: str) -> Utility:
    name, _, arg = text.partition(":")
    if name in UTILITIES and not arg:
        return UTILITIES[name]()
    if name in PARAMETRIC_UTILITIES and arg:
        try:
            return PARAMETRIC_UTILITIES[name](float(arg))
        except ValueError as exc:
            raise ConfigurationError(f"bad utility parameter in {text!r}") from exc
    known = sorted(UTILITIES) + [f"{k}:<c>" for k in PARAMETRIC_UTILITIES]
    raise ConfigurationError(f"unknown utility {text!r}; known: {', '.join(known)}")


# ---------------------------------------------------------------------------
# preferences and penalties

PREFERENCE_KINDS = ("quantile", "expected-utility", "bounded-distortion")


@dataclass(frozen=True)
class PreferenceSpec:
    """A preference functional; larger values are preferred.

    ``quantile`` uses level ``p``; ``bounded-distortion`` averages quantiles
    over ``(p, p_upper)``; ``expected-utility`` uses ``utility``.
    """

    kind: str
    p: float | None = None
    p_upper: float | None = None
    utility: Callable | None = None

    def __post_init__(self):
        if self.kind not in PREFERENCE_KINDS:
            raise ConfigurationError(f"unknown preference kind {self.kind!r}")
        if self.kind in ("quantile", "bounded-distortion") and not (self.p is not None and 0 < self.p < 1):
            raise ConfigurationError(f"quantile level must lie in (0, 1), got {self.p}")
        if self.kind == "bounded-distortion" and not (self.p_upper is not None and self.p < self.p_upper < 1):
            raise ConfigurationError("bounded distortion needs p < p_upper < 1")
        if self.kind == "expected-utility" and self.utility is None:
            raise ConfigurationError("expected-utility preference needs a utility")

    @property
    def monotonicity_class(self) -> str:
        if self.kind == "expected-utility":
            return "mild" if getattr(self.utility, "strictly_increasing", False) else "weak"
        return "mild"

    @property
    def bounded(self) -> bool:
        """Whether the functional is finite for every law (utilities must be bounded)."""
        return self.kind != "expected-utility" or bool(getattr(self.utility, "bounded", False))

    def label(self) -> str:
        if self.kind == "quantile":
            return f"quantile:{self.p}"
        if self.kind == "bounded-distortion":
            return f"rvar:{self.p}:{self.p_upper}"
        return f"eu:{getattr(self.utility, 'name', 'custom')}"


def parse_preference(text: str) -> PreferenceSpec:
    """``quantile:0.95``, ``eu:sqrt``, ``eu:min:100`` or ``rvar:0.9:0.99``."""
    head, _, rest = text.partition(":")
    try:
        if head == "quantile":
            return PreferenceSpec("quantile", p=float(rest))
        if head == "rvar":
            lo, _, hi = rest.partition(":")
            return PreferenceSpec("bounded-distortion", p=float(lo), p_upper=float(hi))
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse preference {text!r}") from exc
    if head == "eu":
        return PreferenceSpec("expected-utility", utility=parse_utility(rest))
    raise ConfigurationError(f"unknown preference {text!r}; use quantile:p, eu:<utility> or rvar:p1:p2")


@dataclass(frozen=True)
class PenaltySpec:
    """Schur-convex penalty on the weights: ``c * sum(w**2)`` or ``c * max(w)``."""

    kind: str = "none"
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "sumsq", "max"):
            raise ConfigurationError(f"unknown penalty {self.kind!r}")
        if self.c < 0:
            raise ConfigurationError("penalty coefficient must be non-negative")

    @classmethod
    def parse(cls, text: str) -> "PenaltySpec":
        kind, _, arg = text.partition(":")
        if kind == "none":
            return cls()
        try:
            return cls(kind, float(arg))
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse penalty {text!r}; use none, sumsq:c or max:c") from exc

    def __call__(self, w) -> float:
        w = np.asarray(w, dtype=float)
        if self.kind == "sumsq":
            return self.c * float(np.dot(w, w))
        if self.kind == "max":
            return self.c * float(w.max())
        return 0.0

    def label(self) -> str:
        return "none" if self.kind == "none" else f"{self.kind}:{self.c}"


def _check_monotone(u, lo, hi):
    xs = np.linspace(lo, hi, MONOTONE_PROBE_POINTS) if hi > lo else np.array([lo])
    vals = np.asarray(u(xs), dtype=float)
    if np.any(np.diff(vals) < -1e-12 * np.maximum(1.0, np.abs(vals[:-1]))):
        raise SpecError("utility is not non-decreasing on the sample range")
    return vals


def evaluate(pref: PreferenceSpec, sample) -> float:
    """Preference value of an empirical law (raw array or EmpiricalDistribution)."""
    if isinstance(sample, EmpiricalDistribution):
        values, presorted = sample.sorted_values, True
    else:
        values, presorted = np.asarray(sample, dtype=float).ravel(), False
    n = values.size
    if n == 0:
        raise SpecError("cannot evaluate a preference on an empty sample")
    if pref.kind == "quantile":
        idx = _left_index(pref.p, n)
        return float(values[idx] if presorted else np.partition(values, idx)[idx])
    if pref.kind == "bounded-distortion":
        lo, hi = _left_index(pref.p, n), _left_index(pref.p_upper, n)
        part = values if presorted else np.partition(values, (lo, hi))
        block = part[lo:hi + 1] if presorted else np.sort(part[lo:hi + 1])
        return float(block.mean())
    _check_monotone(pref.utility, float(values.min()), float(values.max()))
    u = np.asarray(pref.utility(values), dtype=float)
    if not np.all(np.isfinite(u)):
        raise SpecError("utility is not finite on the sample")
    return math.fsum(u) / n


def _left_index(p, n):
    return min(max(math.ceil(p * n - 1e-9 * max(1.0, p * n)) - 1, 0), n - 1)


def noise_band(pref: PreferenceSpec, sample, confidence: float = 0.99) -> float:
    """Half-width estimate of sampling noise in ``evaluate``.

    For quantile-type preferences this is half of ``Q(p + eps) - Q(p - eps)``
    with ``eps`` the DKW half-width; for expected utility it is a normal
    band on the mean.
    """
    emp = EmpiricalDistribution.of(sample)
    eps = dkw_epsilon(emp.n, confidence)
    if pref.kind in ("quantile", "bounded-distortion"):
        lo = max(pref.p - eps, 1.0 / emp.n)
        hi = min((pref.p_upper or pref.p) + eps, 1.0 - 1.0 / emp.n)
        q = emp.quantile(np.array([lo, hi]))
        return float(q[1] - q[0]) / 2.0
    u = np.asarray(pref.utility(emp.sorted_values), dtype=float)
    z = stats.norm.ppf(0.5 + confidence / 2)
    return z * float(u.std(ddof=1)) / math.sqrt(emp.n) if emp.n > 1 else math.inf


def check_admissible(pref: PreferenceSpec, model: ComponentModel):
    """Refuse unbounded utilities on infinite-mean components."""
    if pref.kind == "expected-utility" and not pref.bounded and model.transform.kind not in ("cap",) \
            and any(getattr(m, "infinite_mean", False) for m in model.margins):
        raise SpecError(
            f"utility {pref.label()} is unbounded and the components have infinite mean: its expectation "
            "may be infinite and sample averages do not settle. Use a quantile or rvar preference, "
            "or a bounded utility such as min:c or cara:k")


# ---------------------------------------------------------------------------
# Schur probe


@dataclass
class ProbeResult:
    """Values along a chain with per-point bands and, optionally, paired step bands.

    ``bands`` are marginal noise half-widths. ``step_bands`` come from a
    paired bootstrap of each step's difference on the shared draws; when
    absent, a step's band is the sum of its two marginal bands.
    """

    weights: list
    values: np.ndarray
    bands: np.ndarray
    step_bands: np.ndarray | None = None

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.values)

    def _step_tolerance(self):
        if self.step_bands is not None:
            return self.step_bands
        return self.bands[:-1] + self.bands[1:]

    def nondecreasing_steps(self) -> np.ndarray:
        """Per step: no drop larger than the step's noise band."""
        return self.steps >= -self._step_tolerance()

    def strict_steps(self) -> np.ndarray:
        return self.steps > self._step_tolerance()


def schur_probe(pref: PreferenceSpec, model: ComponentModel, eta, chain: Sequence[TTransform],
                samples: int, seed: int, key=("schur-probe",), confidence: float = 0.99,
                bank: np.ndarray | None = None, bootstrap: int = 0) -> ProbeResult:
    """Preference values along ``eta`` and every vector reached by ``chain``.

    With ``bootstrap > 0`` rows are resampled jointly and each step's band
    is a normal-quantile multiple of the bootstrap spread of its difference.
    """
    check_admissible(pref, model)
    if bank is None:
        bank = model.draw(samples, seed, key)
    weights = apply_chain(eta, chain)
    values, bands = [], []
    for w in weights:
        emp = EmpiricalDistribution(bank @ w)
        values.append(evaluate(pref, emp))
        bands.append(noise_band(pref, emp, confidence))
    step_bands = None
    if bootstrap and len(weights) > 1:
        rng = stream(seed, *key, "bootstrap")
        diffs = np.empty((bootstrap, len(weights) - 1))
        for b in range(bootstrap):
            rows = bank[rng.integers(0, bank.shape[0], bank.shape[0])]
            diffs[b] = np.diff([evaluate(pref, rows @ w) for w in weights])
        step_bands = stats.norm.ppf(0.5 + confidence / 2) * diffs.std(axis=0, ddof=1)
    return ProbeResult(weights, np.array(values), np.array(bands), step_bands)


# ---------------------------------------------------------------------------
# lattice optimizers


def lattice_size(n: int, resolution: int) -> int:
    return math.comb(resolution + n - 1, n - 1)


def simplex_lattice(n: int, resolution: int):
    """Integer compositions of ``resolution`` into ``n`` parts, lexicographically ascending."""
    if n < 1 or resolution < 1:
        raise ConfigurationError("need n >= 1 and resolution >= 1")
    for head in itertools.product(range(resolution + 1), repeat=n - 1):
        rest = resolution - sum(head)
        if rest >= 0:
            yield head + (rest,)


def nearest_to_uniform(n: int, resolution: int, total: float = 1.0) -> list[tuple]:
    """All lattice points at minimal Euclidean distance from the uniform vector."""
    pts = list(simplex_lattice(n, resolution))
    target = resolution / n
    dists = [sum((k - target) ** 2 for k in pt) for pt in pts]
    best = min(dists)
    return [tuple(total * k / resolution for k in pt) for pt, d in zip(pts, dists) if abs(d - best) < 1e-12]


def distance_from_uniform_ray(w) -> float:
    w = np.asarray(w, dtype=float)
    return float(np.linalg.norm(w - w.mean()))


@dataclass
class OptimizationResult:
    argmax: tuple
    value: float
    points: list
    values: np.ndarray
    band: float
    total: float
    resolution: int
    samples: int | None
    seed: int | None
    exact: bool = False
    ties: list = field(default_factory=list)

    @property
    def distance_from_uniform(self) -> float:
        return distance_from_uniform_ray(self.argmax)

    def surface_rows(self):
        for w, v in zip(self.points, self.values):
            row = {f"w{i + 1}": float(x) for i, x in enumerate(w)}
            row["value"] = float(v)
            yield row

    def write_surface(self, path, fmt: str = "csv"):
        return write_rows(path, self.surface_rows(), fmt)


def _exact_path(pref, model):
    m = model.margins[0]
    return (pref.kind == "expected-utility" and isinstance(m, TwoPointSpec) and model.identical_margins
            and model.dependence.kind == "iid" and model.transform.kind == "identity")


def optimize_p1(pref: PreferenceSpec, model: ComponentModel, total: float = 1.0,
                resolution: int = DEFAULT_RESOLUTION, penalty: PenaltySpec = PenaltySpec(),
                samples: int = 10**6, seed: int = 0, budget: int = DEFAULT_LATTICE_BUDGET,
                bank: np.ndarray | None = None, confidence: float = 0.99) -> OptimizationResult:
    """Maximise ``pref(w . X - g(w))`` over the simplex lattice with ``sum(w) = total``.

    Exhaustive search; ties go to the lexicographically smallest lattice
    point. Two-point iid margins with an expected-utility preference are
    scored by exact enumeration instead of sampling.
    """
    n = model.n
    if resolution < 2:
        raise ConfigurationError("lattice resolution must be at least 2")
    if total <= 0:
        raise ConfigurationError("total exposure must be positive")
    size = lattice_size(n, resolution)
    if size > budget:
        raise BudgetError(f"lattice has {size} points, budget is {budget}", used=size)
    check_admissible(pref, model)
    exact = _exact_path(pref, model)
    points, values = [], []
    if exact:
        m = model.margins[0]
        ftotal = Fraction(total).limit_denominator(10**9)
        for pt in simplex_lattice(n, resolution):
            w = [ftotal * k / resolution for k in pt]
            g = Fraction(penalty([float(x) for x in w])).limit_denominator(10**12) if penalty.kind != "none" else 0
            u = pref.utility
            v = two_point_eu_enumerate(m.a, m.b, m.prob_a, w, (lambda x, u=u, g=g: u(x - g)))
            points.append(tuple(w))
            values.append(v)
        best = max(range(len(values)), key=lambda i: (values[i], -i))
        ties = [points[i] for i, v in enumerate(values) if v == values[best]]
        return OptimizationResult(tuple(float(x) for x in points[best]), float(values[best]),
                                  [tuple(float(x) for x in p) for p in points],
                                  np.array([float(v) for v in values]), 0.0, total, resolution,
                                  None, None, exact=True, ties=ties)
    if bank is None:
        bank = model.draw(samples, seed, ("optimize",))
    for pt in simplex_lattice(n, resolution):
        w = np.array(pt, dtype=float) / resolution * total
        points.append(tuple(float(x) for x in w))
        values.append(evaluate(pref, bank @ w - penalty(w)))
    values = np.array(values)
    best = int(np.argmax(values))  # first maximum is the lexicographically smallest
    ties = [points[i] for i in np.nonzero(values == values[best])[0]]
    band = noise_band(pref, bank @ np.array(points[best]) - penalty(points[best]), confidence)
    return OptimizationResult(points[best], float(values[best]), points, values, band, total,
                              resolution, bank.shape[0], seed, ties=ties)


@dataclass
class P2Result:
    argmax: tuple
    value: float
    per_total: list
    on_uniform_ray: bool

    @property
    def distance_from_uniform(self) -> float:
        return distance_from_uniform_ray(self.argmax)


def optimize_p2(pref: PreferenceSpec, model: ComponentModel, penalty: PenaltySpec,
                w_grid: Sequence[float], resolution: int = DEFAULT_RESOLUTION,
                samples: int = 10**6, seed: int = 0, budget: int = DEFAULT_LATTICE_BUDGET) -> P2Result:
    """Unconstrained problem: best (p1) solution across the totals in ``w_grid``."""
    totals = sorted(float(t) for t in w_grid)
    if not totals or any(t <= 0 or not math.isfinite(t) for t in totals):
        raise ConfigurationError("w_grid must be a non-empty list of positive finite totals")
    if penalty.kind == "none" or penalty.c == 0:
        warnings.warn("no penalty: the value typically grows with the total, so the largest total in "
                      "the grid wins by construction", RuntimeWarning, stacklevel=2)
    check_admissible(pref, model)
    bank = None if _exact_path(pref, model) else model.draw(samples, seed, ("optimize",))
    per_total = [optimize_p1(pref, model, t, resolution, penalty, samples, seed, budget, bank=bank)
                 for t in totals]
    best = max(range(len(per_total)), key=lambda i: (per_total[i].value, -i))
    on_ray = True
    for res in per_total:
        near = nearest_to_uniform(model.n, resolution, res.total)
        if not any(np.allclose(res.argmax, p, atol=1e-12) for p in near):
            on_ray = False
            log.warning("total %g: argmax %s is not the lattice point nearest the uniform ray",
                        res.total, res.argmax)
    return P2Result(per_total[best].argmax, per_total[best].value, per_total, on_ray)
