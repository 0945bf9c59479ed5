"""Partition functions, Green's functions and finite-difference residuals.

All built-in partition functions are products of powers of point gaps and
are evaluated in log space: log Z(x) = sum over pairs of e_jk * log(x_k - x_j).
Exponentiation happens only at the API boundary, so large arity or extreme
gaps do not overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import BoundaryConfig, ModelParams, arm_exponent, config_points
from .errors import InvalidConfigError, StepTooLargeError

__all__ = [
    "PartitionFunction",
    "GreenFunction",
    "f_v",
    "z_shuffle",
    "z_gff",
    "z_pure_pair",
    "shuffle_partition",
    "gff_partition",
    "pure_pair_partition",
    "green",
    "bpz_residual",
]

ArrayLike = "BoundaryConfig | np.ndarray | list[float] | tuple[float, ...]"


def _pair_log_sum(x: np.ndarray, expo: np.ndarray) -> float:
    # expo is a symmetric (p, p) matrix of pair exponents; diagonal ignored
    p = x.size
    total = 0.0
    for j in range(p - 1):
        gaps = x[j + 1 :] - x[j]
        total += float(np.dot(expo[j, j + 1 :], np.log(gaps)))
    return total


@dataclass(frozen=True)
class PartitionFunction:
    """Evaluation handle for a positive function Z on ordered configurations.

    ``log_eval``/``log_grad`` are the primitive operations; ``eval`` wraps
    them.  ``pair_exponents``, when present, marks Z as a pure product of gap
    powers, which unlocks the closed-form drift used by the SDE module.
    """

    arity: int
    label: str
    log_eval_fn: Callable[[np.ndarray], float]
    log_grad_fn: Callable[[np.ndarray, int], float]
    pair_exponents: Optional[np.ndarray] = field(default=None, repr=False)

    def _points(self, x) -> np.ndarray:
        pts = config_points(x)
        if pts.size != self.arity:
            raise InvalidConfigError(
                f"{self.label}: expected {self.arity} points, got {pts.size}"
            )
        return pts

    def log_eval(self, x) -> float:
        return self.log_eval_fn(self._points(x))

    def eval(self, x) -> float:
        return math.exp(self.log_eval(x))

    def log_grad(self, x, j: int) -> float:
        """d/dx_j of log Z at x; j is a zero-based coordinate index."""
        pts = self._points(x)
        if not 0 <= j < self.arity:
            raise InvalidConfigError(f"coordinate index {j} out of range")
        return self.log_grad_fn(pts, j)

    def log_eval_many(self, X: np.ndarray) -> np.ndarray:
        """Vectorized log Z over rows of X (each row an ordered config)."""
        X = np.asarray(X, dtype=np.float64)
        if self.pair_exponents is not None:
            out = np.zeros(X.shape[0])
            p = self.arity
            for j in range(p - 1):
                for k in range(j + 1, p):
                    e = self.pair_exponents[j, k]
                    if e != 0.0:
                        out += e * np.log(X[:, k] - X[:, j])
            return out
        return np.array([self.log_eval_fn(row) for row in X])


def product_partition(expo: np.ndarray, label: str) -> PartitionFunction:
    """Partition function prod_{j<k} (x_k - x_j)^{expo[j, k]}."""
    expo = np.asarray(expo, dtype=np.float64)
    p = expo.shape[0]
    sym = expo + expo.T  # accept upper-triangular or symmetric input
    sym[np.diag_indices(p)] = 0.0
    if np.allclose(expo, expo.T):
        sym = expo.copy()
        sym[np.diag_indices(p)] = 0.0

    def log_eval(x: np.ndarray) -> float:
        return _pair_log_sum(x, sym)

    def log_grad(x: np.ndarray, j: int) -> float:
        diffs = x[j] - np.delete(x, j)
        coeffs = np.delete(sym[j], j)
        return float(np.sum(coeffs / diffs))

    return PartitionFunction(
        arity=p,
        label=label,
        log_eval_fn=log_eval,
        log_grad_fn=log_grad,
        pair_exponents=sym,
    )


def shuffle_partition(p: int, params: ModelParams) -> PartitionFunction:
    """Half-watermelon partition function: all pair exponents 2/kappa."""
    expo = np.full((p, p), 2.0 / params.kappa)
    return product_partition(expo, label=f"shuffle_{p}")


def gff_partition(n: int) -> PartitionFunction:
    """Level-line partition function at kappa=4: exponents (1/2)(-1)^(j-k)."""
    p = 2 * n
    idx = np.arange(p)
    expo = 0.5 * np.where((idx[:, None] - idx[None, :]) % 2 == 0, 1.0, -1.0)
    return product_partition(expo, label=f"gff_{n}")


def pure_pair_partition(params: ModelParams) -> PartitionFunction:
    """The n=1 pure partition function (x2 - x1)^(-2b)."""
    expo = np.full((2, 2), -2.0 * params.b)
    return product_partition(expo, label="pure_pair")


def f_v(x, v: float) -> float:
    """prod_{j<k} (x_k - x_j)^v; the empty product (p=1) is 1."""
    pts = config_points(x)
    if pts.size == 1:
        return 1.0
    total = 0.0
    for j in range(pts.size - 1):
        total += float(np.sum(np.log(pts[j + 1 :] - pts[j])))
    return math.exp(v * total)


def z_shuffle(x, params: ModelParams) -> float:
    """Half-watermelon partition function value, prod (x_k - x_j)^(2/kappa)."""
    return f_v(x, 2.0 / params.kappa)


def z_gff(x) -> float:
    """GFF level-line partition function value (even arity required)."""
    pts = config_points(x)
    if pts.size % 2 != 0:
        raise InvalidConfigError(f"z_gff needs even arity, got {pts.size}")
    return gff_partition(pts.size // 2).eval(pts)


def z_pure_pair(x, params: ModelParams) -> float:
    """The arity-2 pure partition function (x2 - x1)^(-2b)."""
    pts = config_points(x)
    if pts.size != 2:
        raise InvalidConfigError(f"z_pure_pair needs arity 2, got {pts.size}")
    return (pts[1] - pts[0]) ** (-2.0 * params.b)


@dataclass(frozen=True)
class GreenFunction:
    """Ratio Z_shuffle / Z_alpha, homogeneous of degree A+_{2n}."""

    arity: int
    homogeneity_degree: float
    log_eval_fn: Callable[[np.ndarray], float] = field(repr=False)

    def log_eval(self, x) -> float:
        pts = config_points(x)
        if pts.size != self.arity:
            raise InvalidConfigError(
                f"Green function: expected {self.arity} points, got {pts.size}"
            )
        return self.log_eval_fn(pts)

    def eval(self, x) -> float:
        return math.exp(self.log_eval(x))


def green(z_alpha: PartitionFunction, params: ModelParams) -> GreenFunction:
    """Green's function Z_shuffle/Z_alpha for a 2n-point system."""
    params.require_multichordal()
    if z_alpha.arity % 2 != 0:
        raise InvalidConfigError(f"Green function needs even arity, got {z_alpha.arity}")
    n = z_alpha.arity // 2
    shuf = shuffle_partition(z_alpha.arity, params)

    def log_eval(pts: np.ndarray) -> float:
        return shuf.log_eval_fn(pts) - z_alpha.log_eval_fn(pts)

    return GreenFunction(
        arity=z_alpha.arity,
        homogeneity_degree=arm_exponent(n, params.kappa),
        log_eval_fn=log_eval,
    )


def bpz_residual(
    z: PartitionFunction,
    x,
    j: int,
    params: ModelParams,
    h: float = 1e-4,
) -> tuple[float, float]:
    """Central finite-difference residual of the null-state operator at x.

    Applies (kappa/2) d_j^2 + sum_{l != j} [2/(x_l - x_j) d_l
    - 2b/(x_l - x_j)^2] to z, with second-order central differences of step
    h.  Returns (residual, scale) where scale = |z(x)| (1 + 1/min_gap^2) is
    the natural magnitude for relative comparisons.
    """
    pts = config_points(x)
    if pts.size != z.arity:
        raise InvalidConfigError(f"expected {z.arity} points, got {pts.size}")
    if not 0 <= j < pts.size:
        raise InvalidConfigError(f"coordinate index {j} out of range")
    min_gap = float(np.min(np.diff(pts))) if pts.size > 1 else math.inf
    if min_gap <= 10.0 * h:
        raise StepTooLargeError(
            f"finite-difference step {h} too large for minimum gap {min_gap}"
        )

    def val(pts_shifted: np.ndarray) -> float:
        return math.exp(z.log_eval_fn(pts_shifted))

    z0 = val(pts)

    def shifted(i: int, delta: float) -> np.ndarray:
        out = pts.copy()
        out[i] += delta
        return out

    d2j = (val(shifted(j, h)) - 2.0 * z0 + val(shifted(j, -h))) / (h * h)
    residual = 0.5 * params.kappa * d2j
    for ell in range(pts.size):
        if ell == j:
            continue
        gap = pts[ell] - pts[j]
        dl = (val(shifted(ell, h)) - val(shifted(ell, -h))) / (2.0 * h)
        residual += 2.0 / gap * dl - 2.0 * params.b / (gap * gap) * z0
    scale = abs(z0) * (1.0 + 1.0 / (min_gap * min_gap))
    return residual, scale
