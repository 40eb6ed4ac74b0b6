"""Majorization order on non-negative weight vectors and T-transform chains."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, OrderError

TOTAL_RTOL = 1e-12
PARTIAL_SUM_ATOL = 1e-12


@dataclass(frozen=True)
class WeightVector:
    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if not w:
            raise DomainError("weight vector must be non-empty")
        if any(not np.isfinite(v) or v < 0 for v in w):
            raise DomainError(f"weights must be finite and non-negative, got {w}")
        object.__setattr__(self, "weights", w)

    @classmethod
    def parse(cls, text: str) -> "WeightVector":
        """Parse a comma-separated list such as ``"0.5,0.5"``."""
        try:
            return cls(tuple(float(part) for part in text.split(",") if part.strip()))
        except ValueError as exc:
            raise DomainError(f"cannot parse weight vector {text!r}") from exc

    @classmethod
    def uniform(cls, n: int, total: float = 1.0) -> "WeightVector":
        return cls((total / n,) * n)

    @classmethod
    def concentrated(cls, n: int, total: float = 1.0) -> "WeightVector":
        return cls((total,) + (0.0,) * (n - 1))

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        return iter(self.weights)

    def as_array(self) -> np.ndarray:
        return np.array(self.weights)

    @property
    def total(self) -> float:
        return float(sum(self.weights))

    @property
    def increasing(self) -> np.ndarray:
        return np.sort(self.as_array(), kind="stable")

    def apply(self, transform: "TTransform") -> "WeightVector":
        return WeightVector(tuple(transform.apply(self.as_array())))


def _as_weights(w) -> WeightVector:
    return w if isinstance(w, WeightVector) else WeightVector(tuple(w))


@dataclass(frozen=True)
class TTransform:
    """Averaging step on coordinates ``i`` and ``j`` (zero-based)."""

    i: int
    j: int
    lam: float

    def __post_init__(self):
        if self.i == self.j:
            raise DomainError("a T-transform needs two distinct indices")
        if not 0 <= self.lam <= 1:
            raise DomainError(f"lambda must lie in [0, 1], got {self.lam}")

    def apply(self, v) -> np.ndarray:
        out = np.array(v, dtype=float)
        vi, vj = out[self.i], out[self.j]
        out[self.i] = self.lam * vi + (1.0 - self.lam) * vj
        out[self.j] = (1.0 - self.lam) * vi + self.lam * vj
        return out


@dataclass(frozen=True)
class MajorizationCheck:
    """Outcome of comparing ``theta`` against ``eta`` in majorization order.

    ``holds`` means theta is majorized by eta. ``failure_index`` is the
    first k (1-based) whose increasing partial sums violate the order.
    """

    holds: bool
    strict: bool
    totals_equal: bool
    failure_index: int | None = None

    def __bool__(self):
        return self.holds

    @property
    def outcome(self) -> str:
        if not self.totals_equal:
            return "incomparable-totals"
        return "true" if self.holds else "false"

    def explain(self) -> str:
        if not self.totals_equal:
            return "weight totals differ; majorization needs equal totals"
        if self.holds:
            return "theta is strictly majorized by eta" if self.strict else "theta equals eta up to permutation"
        return (f"increasing partial sums fail at k={self.failure_index}: "
                "theta's smallest entries must sum to at least eta's")


def majorizes(eta, theta) -> MajorizationCheck:
    """Check whether ``theta`` is majorized by ``eta`` (theta is more balanced)."""
    eta, theta = _as_weights(eta), _as_weights(theta)
    if len(eta) != len(theta):
        raise DimensionError(f"length mismatch: {len(eta)} vs {len(theta)}")
    te, tt = eta.total, theta.total
    if abs(te - tt) > TOTAL_RTOL * max(abs(te), abs(tt), 1e-300):
        return MajorizationCheck(False, False, False)
    ce = np.cumsum(eta.increasing)
    ct = np.cumsum(theta.increasing)
    tol = PARTIAL_SUM_ATOL * max(te, 1.0)
    bad = np.nonzero(ct[:-1] < ce[:-1] - tol)[0]
    if bad.size:
        return MajorizationCheck(False, False, True, int(bad[0]) + 1)
    strict = not np.allclose(eta.increasing, theta.increasing, rtol=0, atol=tol)
    return MajorizationCheck(True, strict, True)


def t_transform_chain(eta, theta, atol: float = 1e-10) -> list[TTransform]:
    """T-transforms turning ``eta`` into a permutation of ``theta``.

    Works on the decreasing rearrangement: take the last index ``j`` where
    the current vector still exceeds the target and the first later index
    ``k`` where it falls short, then move the smaller of the two gaps from
    ``j`` to ``k``. Each step fixes at least one coordinate, so at most
    ``n - 1`` steps are returned. Indices refer to ``eta``'s positions.
    """
    eta, theta = _as_weights(eta), _as_weights(theta)
    check = majorizes(eta, theta)
    if not check.holds:
        raise OrderError(f"theta is not majorized by eta: {check.explain()}")
    n = len(eta)
    # descending order, ties broken by original index
    order = np.argsort(-eta.as_array(), kind="stable")
    v = eta.as_array()[order]
    target = -np.sort(-theta.as_array(), kind="stable")
    chain: list[TTransform] = []
    for _ in range(n - 1):
        diff = v - target
        over = np.nonzero(diff > atol)[0]
        if over.size == 0:
            break
        j = over[-1]
        under = np.nonzero(diff[j + 1:] < -atol)[0]
        if under.size == 0:
            break
        k = j + 1 + under[0]
        delta = min(v[j] - target[j], target[k] - v[k])
        lam = (v[j] - delta - v[k]) / (v[j] - v[k])
        lam = min(max(lam, 0.0), 1.0)
        step = TTransform(int(j), int(k), float(lam))
        v = step.apply(v)
        # snap the coordinate this step was meant to fix
        if abs(v[j] - target[j]) <= abs(v[k] - target[k]):
            v[j] = target[j]
        else:
            v[k] = target[k]
        chain.append(TTransform(int(order[j]), int(order[k]), float(lam)))
    return chain


def apply_chain(v, chain: Iterable[TTransform]) -> list[np.ndarray]:
    """Every intermediate vector of a chain, starting with ``v`` itself."""
    out = [np.array(v, dtype=float)]
    for step in chain:
        out.append(step.apply(out[-1]))
    return out


def random_majorizing_pair(n: int, rng: np.random.Generator,
                           lam_range: Sequence[float] = (0.1, 0.9)) -> tuple[WeightVector, WeightVector]:
    """A random pair ``(eta, theta)`` with theta strictly majorized by eta.

    eta is a flat Dirichlet draw; theta follows from 1 to n-1 T-transforms
    with lambda strictly inside (0, 1) on unequal coordinates.
    """
    if n < 2:
        raise DomainError(f"need n >= 2, got {n}")
    eta = rng.dirichlet(np.ones(n))
    theta = eta.copy()
    steps = int(rng.integers(1, n))
    for _ in range(steps):
        i, j = rng.choice(n, size=2, replace=False)
        if abs(theta[i] - theta[j]) < 1e-9:
            j = int(np.argmax(np.abs(theta - theta[i])))
        lam = rng.uniform(*lam_range)
        theta = TTransform(int(i), int(j), lam).apply(theta)
    # renormalise theta's total to eta's exactly so the pair is comparable
    theta *= eta.sum() / theta.sum()
    return WeightVector(tuple(eta)), WeightVector(tuple(theta))
