"""Model parameters, exponents, boundary configurations and link patterns.

Everything here is immutable after construction and safe to share between
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidConfigError, InvalidParameterError

MAX_LINK_PATTERN_N = 12

__all__ = [
    "ModelParams",
    "BoundaryConfig",
    "LinkPattern",
    "Exponents",
    "derived_parameters",
    "exponents",
    "enumerate_link_patterns",
    "arm_exponent",
    "lambda_exponent",
]


@dataclass(frozen=True)
class ModelParams:
    """SLE parameter kappa and the scalars derived from it.

    beta = 8/kappa, b = (6-kappa)/(2 kappa), c = (6-kappa)(3 kappa-8)/(2 kappa).

    Construction is allowed for kappa in (0, 8) so the Dyson simulator can be
    used at every beta > 1; entry points that implement multichordal results
    must call :meth:`require_multichordal` which enforces kappa <= 4.
    """

    kappa: float
    beta: float
    b: float
    c: float

    def require_multichordal(self) -> None:
        if self.kappa > 4.0:
            raise InvalidParameterError(
                f"multichordal operations require kappa <= 4, got {self.kappa}"
            )

    @property
    def noise_scale(self) -> float:
        """Diffusion coefficient sqrt(kappa) of each driving coordinate."""
        return math.sqrt(self.kappa)


def derived_parameters(kappa: float) -> ModelParams:
    """Build :class:`ModelParams` from kappa.

    Raises :class:`InvalidParameterError` for non-finite or non-positive
    kappa, or kappa >= 8 (where the Dyson system may collide).
    """
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa <= 0.0:
        raise InvalidParameterError(f"kappa must be finite and positive, got {kappa}")
    if kappa >= 8.0:
        raise InvalidParameterError(f"kappa must be below 8, got {kappa}")
    return ModelParams(
        kappa=kappa,
        beta=8.0 / kappa,
        b=(6.0 - kappa) / (2.0 * kappa),
        c=(6.0 - kappa) * (3.0 * kappa - 8.0) / (2.0 * kappa),
    )


@dataclass(frozen=True)
class BoundaryConfig:
    """Ordered marked points on the boundary line.

    Invariant: strictly increasing.  Use :func:`config_points` to coerce
    array-likes in numeric code.
    """

    points: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = tuple(float(v) for v in self.points)
        if len(pts) < 1:
            raise InvalidConfigError("boundary configuration needs at least one point")
        if not all(math.isfinite(v) for v in pts):
            raise InvalidConfigError("boundary points must be finite")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise InvalidConfigError(f"boundary points must be strictly increasing: {pts}")
        object.__setattr__(self, "points", pts)

    @property
    def arity(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.float64)


def config_points(x: "BoundaryConfig | Sequence[float] | np.ndarray") -> np.ndarray:
    """Coerce to a validated, strictly increasing float array."""
    if isinstance(x, BoundaryConfig):
        return x.as_array()
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise InvalidConfigError("expected a one-dimensional point sequence")
    if not np.all(np.isfinite(arr)):
        raise InvalidConfigError("boundary points must be finite")
    if arr.size > 1 and not np.all(np.diff(arr) > 0):
        raise InvalidConfigError(f"boundary points must be strictly increasing: {arr}")
    return arr


@dataclass(frozen=True)
class LinkPattern:
    """Planar pairing of the indices 1..2n.

    Stored canonically as a sorted tuple of sorted pairs.
    """

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        canon = tuple(sorted(tuple(sorted(p)) for p in self.pairs))
        object.__setattr__(self, "pairs", canon)
        n = len(canon)
        flat = [i for p in canon for i in p]
        if sorted(flat) != list(range(1, 2 * n + 1)):
            raise InvalidConfigError(f"pairs must partition 1..{2 * n}: {canon}")
        for a, b in canon:
            for c, d in canon:
                if a < c < b < d:
                    raise InvalidConfigError(f"crossing links {{{a},{b}}} and {{{c},{d}}}")

    @property
    def n(self) -> int:
        return len(self.pairs)


def _noncrossing(indices: list[int]) -> Iterable[list[tuple[int, int]]]:
    if not indices:
        yield []
        return
    first = indices[0]
    for pos in range(1, len(indices), 2):
        mate = indices[pos]
        inner = indices[1:pos]
        outer = indices[pos + 1 :]
        for left in _noncrossing(inner):
            for right in _noncrossing(outer):
                yield [(first, mate)] + left + right


def enumerate_link_patterns(n: int) -> list[LinkPattern]:
    """All planar pairings of 1..2n in lexicographic order of the pair lists.

    The count is the Catalan number C_n.  n is capped at
    ``MAX_LINK_PATTERN_N`` to bound memory.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    if n > MAX_LINK_PATTERN_N:
        raise InvalidParameterError(f"n={n} exceeds the cap {MAX_LINK_PATTERN_N}")
    patterns = [LinkPattern(tuple(p)) for p in _noncrossing(list(range(1, 2 * n + 1)))]
    patterns.sort(key=lambda lp: lp.pairs)
    return patterns


def arm_exponent(n: int, kappa: float) -> float:
    """Half-plane arm exponent n(4n + 4 - kappa)/kappa."""
    return n * (4.0 * n + 4.0 - kappa) / kappa


def lambda_exponent(p: int, kappa: float) -> float:
    """Dyson transition-density decay exponent p(4p - 4 + kappa)/kappa."""
    return p * (4.0 * p - 4.0 + kappa) / kappa


@dataclass(frozen=True)
class Exponents:
    """The three decay exponents used for a 2n-point system."""

    arm: float
    lambda_2n: float
    lambda_prime_2n: float


def exponents(n: int, kappa: float) -> Exponents:
    """Arm and Lambda exponents for a 2n-point system at the given kappa.

    Satisfies arm = lambda_2n - lambda_prime_2n identically.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa <= 0:
        raise InvalidParameterError(f"kappa must be finite and positive, got {kappa}")
    return Exponents(
        arm=arm_exponent(n, kappa),
        lambda_2n=lambda_exponent(2 * n, kappa),
        lambda_prime_2n=n * (12.0 * n - 12.0 + 3.0 * kappa) / kappa,
    )
