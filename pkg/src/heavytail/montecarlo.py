"""Seeded sampling, empirical distributions and dominance tests.

Streams are derived from ``(seed, key..., chunk)`` through
``numpy.random.SeedSequence``; large draws are cut into fixed-size chunks
so results are bit-identical whatever the worker count.
"""

from __future__ import annotations

import csv
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import __version__
from .errors import DomainError, InputError

CHUNK_ROWS = 1 << 18
MAX_SAMPLES_PER_ARM = 10**8
DOCUMENT_FORMAT = "heavytail-result"
DOCUMENT_VERSION = 1


def key_id(key) -> int:
    """Stable non-negative integer for a stream key (strings hashed with CRC32)."""
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    return int(key)


def stream(seed: int, *key) -> np.random.Generator:
    entropy = [int(seed) & ((1 << 64) - 1)] + [key_id(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def draw_chunked(fn: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
                 key: Sequence = (), workers: int = 1) -> np.ndarray:
    """Concatenate ``fn(rng, rows)`` over fixed chunks, each with its own stream."""
    if n < 1:
        raise DomainError(f"sample size must be positive, got {n}")
    if n > MAX_SAMPLES_PER_ARM:
        raise DomainError(f"sample size {n} exceeds the cap of {MAX_SAMPLES_PER_ARM}")
    sizes = [CHUNK_ROWS] * (n // CHUNK_ROWS)
    if n % CHUNK_ROWS:
        sizes.append(n % CHUNK_ROWS)

    def job(idx):
        return fn(stream(seed, *key, idx), sizes[idx])

    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(i) for i in range(len(sizes))]
    return np.concatenate(parts, axis=0)


def dkw_epsilon(n: int, confidence: float) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band at the given confidence."""
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * n))


class EmpiricalDistribution:
    """Sorted sample with CDF, survival and left-continuous quantile lookups."""

    def __init__(self, values, *, presorted: bool = False):
        arr = np.asarray(values, dtype=float).ravel()
        if arr.size == 0:
            raise InputError("empirical distribution needs at least one value")
        if np.isnan(arr).any():
            raise InputError("sample contains NaN")
        self.sorted_values = arr if presorted else np.sort(arr)

    @classmethod
    def of(cls, sample) -> "EmpiricalDistribution":
        return sample if isinstance(sample, cls) else cls(sample)

    @property
    def n(self) -> int:
        return self.sorted_values.size

    def cdf(self, x):
        return np.searchsorted(self.sorted_values, x, side="right") / self.n

    def survival(self, x):
        return 1.0 - self.cdf(x)

    def quantile(self, p):
        """inf{t : F_n(t) >= p}, i.e. the value at index ceil(p n) - 1."""
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise DomainError("quantile levels must lie in (0, 1)")
        # guard against p * n landing a hair above an integer
        idx = np.ceil(p * self.n - 1e-9 * np.maximum(1.0, p * self.n)).astype(np.int64) - 1
        out = self.sorted_values[np.clip(idx, 0, self.n - 1)]
        return float(out) if out.ndim == 0 else out

    @cached_property
    def _prefix(self):
        return np.concatenate(([0.0], np.cumsum(self.sorted_values)))

    def integrated_cdf(self, x):
        """Integral of the empirical CDF up to x, i.e. the mean of (x - X)_+."""
        x = np.asarray(x, dtype=float)
        k = np.searchsorted(self.sorted_values, x, side="right")
        return (k * x - self._prefix[k]) / self.n

    def mean(self) -> float:
        return float(self._prefix[-1] / self.n)


def ks_distance(sample, cdf: Callable) -> float:
    """Exact sup-distance between an empirical CDF and a continuous CDF."""
    emp = EmpiricalDistribution.of(sample)
    f = np.asarray(cdf(emp.sorted_values), dtype=float)
    i = np.arange(1, emp.n + 1)
    return float(max(np.max(i / emp.n - f), np.max(f - (i - 1) / emp.n)))


@dataclass(frozen=True)
class GridSpec:
    """Evaluation grid: log-spaced between pooled quantiles unless told otherwise.

    ``region`` is an open interval ``(lo, hi)``; either end may be None.
    """

    points: int = 512
    lower_q: float = 0.01
    upper_q: float = 0.9999
    spacing: str = "log"
    region: tuple | None = None

    def __post_init__(self):
        if self.points < 2:
            raise DomainError("a grid needs at least two points")
        if self.spacing not in ("log", "linear"):
            raise DomainError(f"unknown spacing {self.spacing!r}")

    def with_region(self, region) -> "GridSpec":
        return GridSpec(self.points, self.lower_q, self.upper_q, self.spacing, region)

    def refined(self) -> "GridSpec":
        return GridSpec(2 * self.points - 1, self.lower_q, self.upper_q, self.spacing, self.region)

    def build(self, *samples: EmpiricalDistribution) -> np.ndarray:
        pooled = np.concatenate([s.sorted_values for s in samples])
        lo = float(np.quantile(pooled, self.lower_q, method="inverted_cdf"))
        hi = float(np.quantile(pooled, self.upper_q, method="inverted_cdf"))
        r_lo, r_hi = self.region if self.region is not None else (None, None)
        if r_lo is not None:
            lo = _nudge_up(r_lo)
        if r_hi is not None:
            hi = _nudge_down(r_hi)
        if self.spacing == "log" and lo <= 0:
            positive = pooled[pooled > max(lo, 0.0)]
            if positive.size == 0:
                raise InputError("log grid needs positive sample values")
            lo = float(positive.min())
        if not hi > lo:
            hi = lo * (1 + 1e-6) + 1e-12
        if self.spacing == "log":
            return np.geomspace(lo, hi, self.points)
        return np.linspace(lo, hi, self.points)


def _nudge_up(v):
    return v + 1e-9 * max(abs(v), 1.0)


def _nudge_down(v):
    return v - 1e-9 * max(abs(v), 1.0)


@dataclass
class DominanceVerdict:
    """Result of comparing ``low`` against ``high`` on a grid.

    ``margins`` are survival differences ``S_high - S_low`` (FSD) or
    integrated-CDF differences ``A_low - A_high`` (SSD); positive values
    point in the claimed direction. ``strictness`` is the smallest margin.
    """

    relation: str
    grid: np.ndarray
    margins: np.ndarray
    band: object
    strictness: float
    kind: str = "FSD"
    n_low: int = 0
    n_high: int = 0
    confidence: float = 0.99
    survival_low: np.ndarray | None = None
    survival_high: np.ndarray | None = None

    @property
    def consistent(self) -> bool:
        return self.relation.endswith("consistent")

    def worst_index(self) -> int:
        slack = self.margins + np.broadcast_to(self.band, self.margins.shape)
        return int(np.argmin(slack))

    def to_fields(self) -> dict:
        band = np.broadcast_to(np.asarray(self.band, dtype=float), self.margins.shape)
        return {
            "kind": self.kind,
            "relation": self.relation,
            "confidence": self.confidence,
            "n_low": self.n_low,
            "n_high": self.n_high,
            "band": float(band.max()) if self.kind == "FSD" else _join(band),
            "strictness": self.strictness,
            "grid_points": self.grid.size,
            "grid": _join(self.grid),
            "margins": _join(self.margins),
        }

    def curve_rows(self):
        for i, x in enumerate(self.grid):
            row = {"x": float(x), "margin": float(self.margins[i])}
            if self.survival_low is not None:
                row["survival_low"] = float(self.survival_low[i])
                row["survival_high"] = float(self.survival_high[i])
            yield row


def _join(arr) -> str:
    return ",".join(repr(float(v)) for v in np.ravel(arr))


def _check_nonempty(*samples):
    out = []
    for s in samples:
        if isinstance(s, EmpiricalDistribution):
            out.append(s)
            continue
        arr = np.asarray(s, dtype=float)
        if arr.size == 0:
            raise InputError("sample is empty")
        out.append(EmpiricalDistribution(arr))
    return out


def empirical_fsd_test(sample_low, sample_high, grid_spec: GridSpec | None = None,
                       confidence: float = 0.99, grid=None) -> DominanceVerdict:
    """Test ``low <=_st high`` with one DKW band per sample.

    Consistent iff ``S_high(x) >= S_low(x) - (eps_low + eps_high)`` at every
    grid point; violated otherwise. A positive ``strictness`` is the only
    evidence of strict dominance a finite sample can give.
    """
    low, high = _check_nonempty(sample_low, sample_high)
    xs = np.asarray(grid, dtype=float) if grid is not None else (grid_spec or GridSpec()).build(low, high)
    band = dkw_epsilon(low.n, confidence) + dkw_epsilon(high.n, confidence)
    s_low, s_high = low.survival(xs), high.survival(xs)
    margins = s_high - s_low
    relation = "FSD-consistent" if np.all(margins >= -band) else "FSD-violated"
    return DominanceVerdict(relation, xs, margins, band, float(margins.min()), "FSD",
                            low.n, high.n, confidence, s_low, s_high)


def empirical_ssd_test(sample_low, sample_high, grid_spec: GridSpec | None = None,
                       confidence: float = 0.99, grid=None) -> DominanceVerdict:
    """Test ``low <=_ssd high`` through integrated CDFs.

    Consistent iff ``A_low(x) >= A_high(x) - band(x)`` on the grid, with
    ``A(x) = E[(x - X)_+]`` and ``band(x) = (eps_low + eps_high) * (x - m)``,
    m being the pooled minimum.
    """
    low, high = _check_nonempty(sample_low, sample_high)
    if not (np.isfinite(low.mean()) and np.isfinite(high.mean())):
        raise InputError("second-order comparison needs finite sample means")
    xs = np.asarray(grid, dtype=float) if grid is not None else (grid_spec or GridSpec()).build(low, high)
    floor = min(low.sorted_values[0], high.sorted_values[0])
    band = (dkw_epsilon(low.n, confidence) + dkw_epsilon(high.n, confidence)) * np.maximum(xs - floor, 0.0)
    margins = low.integrated_cdf(xs) - high.integrated_cdf(xs)
    relation = "SSD-consistent" if np.all(margins >= -band) else "SSD-violated"
    return DominanceVerdict(relation, xs, margins, band, float(margins.min()), "SSD",
                            low.n, high.n, confidence)


def crossing_detect(sample_a, sample_b, grid_spec: GridSpec | None = None,
                    confidence: float = 0.99, grid=None) -> list[tuple[float, float]]:
    """Intervals where ``F_a - F_b`` changes sign by more than the band on both sides."""
    a, b = _check_nonempty(sample_a, sample_b)
    xs = np.asarray(grid, dtype=float) if grid is not None else (grid_spec or GridSpec()).build(a, b)
    band = dkw_epsilon(a.n, confidence) + dkw_epsilon(b.n, confidence)
    diff = a.cdf(xs) - b.cdf(xs)
    sign = np.where(diff > band, 1, np.where(diff < -band, -1, 0))
    idx = np.nonzero(sign)[0]
    out = []
    for left, right in zip(idx[:-1], idx[1:]):
        if sign[left] != sign[right]:
            out.append((float(xs[left]), float(xs[right])))
    return out


def exchangeable_correlation(rows) -> float:
    """Common pairwise correlation of exchangeable columns.

    Mean off-diagonal covariance over mean variance. With heavy tails this
    is far less noisy than a single pairwise Pearson coefficient, since
    every column pair contributes.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] < 2 or rows.shape[0] < 2:
        raise InputError("need a 2-d array with at least two rows and two columns")
    c = np.cov(rows, rowvar=False)
    d = c.shape[0]
    off = (c.sum() - np.trace(c)) / (d * (d - 1))
    return float(off / (np.trace(c) / d))


def quantile_curve(sample, p_grid) -> np.ndarray:
    p = np.atleast_1d(np.asarray(p_grid, dtype=float))
    return np.atleast_1d(EmpiricalDistribution.of(sample).quantile(p))


# ---------------------------------------------------------------------------
# result documents


def write_document(path, fields: Mapping) -> Path:
    """Write a ``key=value`` result document, one key per line, header first."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"format={DOCUMENT_FORMAT}", f"format_version={DOCUMENT_VERSION}", f"tool_version={__version__}"]
    for key, value in fields.items():
        if "\n" in str(value) or "=" in str(key):
            raise DomainError(f"field {key!r} cannot be serialised on one line")
        lines.append(f"{key}={value}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_document(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            key, _, value = line.partition("=")
            out[key] = value
    if out.get("format") != DOCUMENT_FORMAT:
        raise InputError(f"{path} is not a {DOCUMENT_FORMAT} document")
    return out


def write_rows(path, rows, fmt: str = "csv") -> Path:
    """Write dict rows as CSV (header from the first row) or JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    with path.open("w", newline="") as fh:
        if fmt == "json-lines":
            for row in rows:
                fh.write(json.dumps(row, sort_keys=False) + "\n")
        elif fmt == "csv":
            if rows:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows(rows)
        else:
            raise DomainError(f"unknown output format {fmt!r}")
    return path
