"""Driving-function SDE systems in common time, with collision detection.

Every built-in drift reduces to the pairwise form

    drift_j(x) = sum_{k != j} C[j, k] / (x_j - x_k),

with a per-coordinate noise scale.  The Dyson system has C = 4 everywhere,
a product-form partition function Z with gap exponents E gives
C = kappa * E + 2, the level-line system at kappa=4 gives
C[j, k] = 2((-1)^(j-k) + 1), and the force-point variant uses an asymmetric
C (rho weights on the driving row, 2 on the force rows) with noise only on
the driving coordinate.

Integration is Euler-Maruyama with adaptive sub-stepping: the effective
step is min(dt, theta * min_gap^2 / kappa), which keeps both the drift
impulse and the noise displacement per step small relative to the smallest
gap.  A proposed step that breaks the ordering is discarded and retried at
half the step with fresh noise; after 40 consecutive halvings the path is
flagged numerically absorbed.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit, prange

from .core import ModelParams, config_points
from .errors import InvalidConfigError, InvalidParameterError
from .partition import PartitionFunction
from .rng import counter_normal

__all__ = [
    "DriftSpec",
    "SimConfig",
    "PathEnsemble",
    "dyson_spec",
    "pure_spec",
    "gff_spec",
    "sle_rho_spec",
    "drift",
    "simulate",
    "write_ensemble_csv",
    "write_ensemble_binary",
    "read_ensemble_binary",
]

DEFAULT_THETA = 0.01
MAX_HALVINGS = 40

BINARY_MAGIC = b"MSLE"
BINARY_VERSION = 1


@dataclass(frozen=True)
class DriftSpec:
    """Drift variant plus model parameters.

    ``coeff`` is the pairwise coefficient matrix; ``noise_scale`` the
    per-coordinate diffusion.  ``z_alpha`` is kept for generic
    (non-product-form) partition-function handles, which fall back to a
    slower evaluation path.
    """

    variant: str
    params: ModelParams
    arity: int
    coeff: np.ndarray = field(repr=False)
    noise_scale: np.ndarray = field(repr=False)
    z_alpha: Optional[PartitionFunction] = None


def dyson_spec(p: int, params: ModelParams) -> DriftSpec:
    """Dyson Brownian motion with beta = 8/kappa: all coefficients 4."""
    if p < 2:
        raise InvalidParameterError(f"Dyson system needs p >= 2, got {p}")
    coeff = np.full((p, p), 4.0)
    np.fill_diagonal(coeff, 0.0)
    return DriftSpec("dyson", params, p, coeff, np.full(p, params.noise_scale))


def pure_spec(z_alpha: PartitionFunction, params: ModelParams) -> DriftSpec:
    """Multichordal driving SDE for the partition function z_alpha."""
    params.require_multichordal()
    if z_alpha.arity % 2 != 0:
        raise InvalidConfigError(
            f"pure drift needs even arity, got {z_alpha.arity}"
        )
    if z_alpha.pair_exponents is not None:
        coeff = params.kappa * z_alpha.pair_exponents + 2.0
        np.fill_diagonal(coeff, 0.0)
    else:
        coeff = None
    return DriftSpec(
        "pure",
        params,
        z_alpha.arity,
        coeff,
        np.full(z_alpha.arity, params.noise_scale),
        z_alpha=z_alpha,
    )


def gff_spec(n: int) -> DriftSpec:
    """Level-line driving SDE at kappa=4: C[j,k] = 2((-1)^(j-k)+1)."""
    from .core import derived_parameters

    p = 2 * n
    idx = np.arange(p)
    coeff = 2.0 * (np.where((idx[:, None] - idx[None, :]) % 2 == 0, 1.0, -1.0) + 1.0)
    np.fill_diagonal(coeff, 0.0)
    return DriftSpec("gff", derived_parameters(4.0), p, coeff, np.full(p, 2.0))


def sle_rho_spec(
    params: ModelParams,
    rho_left: Sequence[float],
    rho_right: Sequence[float],
) -> DriftSpec:
    """Driving point with force points; state is (x^L_l..x^L_1, W, x^R_1..x^R_r).

    The driving coordinate carries the noise and the rho weights; each force
    point moves by 2/(V - W) dt and carries no noise.
    """
    rho_left = list(rho_left)
    rho_right = list(rho_right)
    nl, nr = len(rho_left), len(rho_right)
    p = nl + 1 + nr
    w = nl  # index of the driving coordinate
    coeff = np.zeros((p, p))
    # rho_left is ordered (rho_l, ..., rho_1) to match ascending positions
    for i in range(nl):
        coeff[w, i] = rho_left[i]
        coeff[i, w] = 2.0
    for i in range(nr):
        coeff[w, w + 1 + i] = rho_right[i]
        coeff[w + 1 + i, w] = 2.0
    noise = np.zeros(p)
    noise[w] = params.noise_scale
    return DriftSpec("sle_rho", params, p, coeff, noise)


def drift(spec: DriftSpec, x) -> np.ndarray:
    """Closed-form drift vector at an ordered configuration."""
    pts = config_points(x)
    if pts.size != spec.arity:
        raise InvalidConfigError(f"expected {spec.arity} points, got {pts.size}")
    if spec.coeff is not None:
        diffs = pts[:, None] - pts[None, :]
        np.fill_diagonal(diffs, 1.0)
        contrib = spec.coeff / diffs
        np.fill_diagonal(contrib, 0.0)
        return contrib.sum(axis=1)
    # generic partition-function handle
    out = np.empty(spec.arity)
    for j in range(spec.arity):
        inter = np.sum(2.0 / (pts[j] - np.delete(pts, j)))
        out[j] = spec.params.kappa * spec.z_alpha.log_grad_fn(pts, j) + inter
    return out


@dataclass(frozen=True)
class SimConfig:
    """Ensemble-simulation settings.

    ``collision_eps`` defaults to 1e-6 times the initial configuration
    diameter.  ``store_times`` selects the snapshot grid (default: none,
    lifetimes only).  ``theta`` controls the adaptive step
    dt_eff = min(dt, theta * min_gap^2 / kappa).
    """

    dt: float = 0.1
    t_end: float = 1.0
    collision_eps: Optional[float] = None
    seed: int = 0
    paths: int = 1
    theta: float = DEFAULT_THETA
    store_times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if not (self.dt > 0 and self.t_end > 0 and self.paths >= 1):
            raise InvalidParameterError("dt, t_end must be positive and paths >= 1")
        if self.collision_eps is not None and self.collision_eps <= 0:
            raise InvalidParameterError("collision_eps must be positive")
        if not 0 < self.theta <= 1:
            raise InvalidParameterError("theta must lie in (0, 1]")
        st = tuple(float(t) for t in self.store_times)
        if any(t <= 0 or t > self.t_end for t in st) or list(st) != sorted(set(st)):
            raise InvalidParameterError(
                "store_times must be strictly increasing in (0, t_end]"
            )
        object.__setattr__(self, "store_times", st)


@dataclass(frozen=True)
class PathEnsemble:
    """Batch of simulated driving trajectories with per-path lifetimes.

    ``lifetime[i]`` is +inf when path i survived to t_end; snapshots after
    death are NaN.  ``absorbed[i]`` marks paths stopped by step-size
    underflow (40 consecutive halvings) rather than the gap threshold.
    """

    grid: np.ndarray
    trajectories: np.ndarray  # (paths, len(grid), p)
    lifetime: np.ndarray
    absorbed: np.ndarray
    diffused_scale: float
    collision_eps: float
    seed: int

    @property
    def paths(self) -> int:
        return self.lifetime.size

    @property
    def arity(self) -> int:
        return self.trajectories.shape[2]

    def survival_fraction(self, t: float) -> float:
        return float(np.mean(self.lifetime > t))


@njit(cache=True)
def _step_path(x, xn, coeff, noise, kappa, dt, theta, t_end, eps,
               store, traj_row, seed, pid):
    """Advance one path to t_end or collision.  Returns (lifetime, absorbed)."""
    p = x.size
    t = 0.0
    ctr = np.uint64(0)
    halve = 1.0
    fails = 0
    s_idx = 0
    n_store = store.size
    while True:
        min_gap = 1e300
        for j in range(p - 1):
            g = x[j + 1] - x[j]
            if g < min_gap:
                min_gap = g
        dte = dt
        cap = theta * min_gap * min_gap / kappa
        if cap < dte:
            dte = cap
        land = -1
        if s_idx < n_store and t + dte >= store[s_idx]:
            dte = store[s_idx] - t
            land = s_idx
        if t + dte >= t_end:
            dte = t_end - t
        dte *= halve
        if halve < 1.0:
            land = -1
        if dte <= 0.0 or t + dte == t:  # step underflow
            return t, True
        sq = math.sqrt(dte)
        ok = True
        for j in range(p):
            dr = 0.0
            for k in range(p):
                if k != j:
                    dr += coeff[j, k] / (x[j] - x[k])
            z = counter_normal(seed, pid, j, ctr)
            xn[j] = x[j] + dr * dte + noise[j] * sq * z
        ctr += np.uint64(1)
        for j in range(p - 1):
            if xn[j + 1] <= xn[j]:
                ok = False
        if not ok:
            halve *= 0.5
            fails += 1
            if fails > MAX_HALVINGS:
                return t, True
            continue
        halve = 1.0
        fails = 0
        for j in range(p):
            x[j] = xn[j]
        if land >= 0:
            t = store[land]
        else:
            t += dte
        min_gap = 1e300
        for j in range(p - 1):
            g = x[j + 1] - x[j]
            if g < min_gap:
                min_gap = g
        if min_gap < eps:
            return t, False
        if land >= 0:
            for j in range(p):
                traj_row[land, j] = x[j]
            s_idx += 1
        if t >= t_end:
            return math.inf, False


@njit(parallel=True, cache=True)
def _run_ensemble(x0, coeff, noise, kappa, dt, theta, t_end, eps, store,
                  seed, npaths):
    p = x0.size
    lifetime = np.empty(npaths)
    absorbed = np.zeros(npaths, dtype=np.bool_)
    traj = np.full((npaths, store.size, p), np.nan)
    for pid in prange(npaths):
        x = x0.copy()
        xn = np.empty(p)
        lt, ab = _step_path(x, xn, coeff, noise, kappa, dt, theta, t_end, eps,
                            store, traj[pid], seed, pid)
        lifetime[pid] = lt
        absorbed[pid] = ab
    return lifetime, absorbed, traj


def simulate(spec: DriftSpec, x0, cfg: SimConfig) -> PathEnsemble:
    """Simulate an ensemble of driving trajectories.

    Deterministic given (spec, x0, cfg): each path consumes only counters
    keyed by (cfg.seed, path index, coordinate, step attempt).
    """
    pts = config_points(x0)
    if pts.size != spec.arity:
        raise InvalidConfigError(f"expected {spec.arity} points, got {pts.size}")
    if pts.size < 2:
        raise InvalidConfigError("need at least two points to simulate gaps")
    if spec.coeff is None:
        return _simulate_generic(spec, pts, cfg)
    diam = float(pts[-1] - pts[0])
    eps = cfg.collision_eps if cfg.collision_eps is not None else 1e-6 * diam
    store = np.asarray(cfg.store_times, dtype=np.float64)
    lifetime, absorbed, traj = _run_ensemble(
        pts, spec.coeff, spec.noise_scale, spec.params.kappa,
        float(cfg.dt), float(cfg.theta), float(cfg.t_end), float(eps),
        store, cfg.seed, cfg.paths,
    )
    return PathEnsemble(
        grid=store,
        trajectories=traj,
        lifetime=lifetime,
        absorbed=absorbed,
        diffused_scale=spec.params.noise_scale,
        collision_eps=eps,
        seed=cfg.seed,
    )


def _simulate_generic(spec: DriftSpec, pts: np.ndarray, cfg: SimConfig) -> PathEnsemble:
    """Python fallback for caller-supplied non-product partition functions."""
    p = pts.size
    diam = float(pts[-1] - pts[0])
    eps = cfg.collision_eps if cfg.collision_eps is not None else 1e-6 * diam
    store = np.asarray(cfg.store_times, dtype=np.float64)
    lifetime = np.empty(cfg.paths)
    absorbed = np.zeros(cfg.paths, dtype=np.bool_)
    traj = np.full((cfg.paths, store.size, p), np.nan)
    kappa = spec.params.kappa
    for pid in range(cfg.paths):
        x = pts.copy()
        t, ctr, halve, fails, s_idx = 0.0, 0, 1.0, 0, 0
        while True:
            min_gap = float(np.min(np.diff(x)))
            dte = min(cfg.dt, cfg.theta * min_gap * min_gap / kappa)
            land = -1
            if s_idx < store.size and t + dte >= store[s_idx]:
                dte = store[s_idx] - t
                land = s_idx
            if t + dte >= cfg.t_end:
                dte = cfg.t_end - t
            dte *= halve
            if halve < 1.0:
                land = -1
            if dte <= 0.0 or t + dte == t:
                lifetime[pid], absorbed[pid] = t, True
                break
            xn = x + drift(spec, x) * dte
            for j in range(p):
                xn[j] += spec.noise_scale[j] * math.sqrt(dte) * counter_normal(
                    cfg.seed, pid, j, ctr)
            ctr += 1
            if np.any(np.diff(xn) <= 0):
                halve *= 0.5
                fails += 1
                if fails > MAX_HALVINGS:
                    lifetime[pid], absorbed[pid] = t, True
                    break
                continue
            halve, fails = 1.0, 0
            x = xn
            t = store[land] if land >= 0 else t + dte
            if float(np.min(np.diff(x))) < eps:
                lifetime[pid], absorbed[pid] = t, False
                break
            if land >= 0:
                traj[pid, land] = x
                s_idx += 1
            if t >= cfg.t_end:
                lifetime[pid] = math.inf
                break
    return PathEnsemble(store, traj, lifetime, absorbed,
                        spec.params.noise_scale, eps, cfg.seed)


def write_ensemble_csv(ens: PathEnsemble, path: str) -> None:
    """One row per stored snapshot: path id, t, x_1..x_p."""
    p = ens.arity
    header = "path,t," + ",".join(f"x{j + 1}" for j in range(p))
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for pid in range(ens.paths):
            for gi, t in enumerate(ens.grid):
                row = ens.trajectories[pid, gi]
                if np.any(np.isnan(row)):
                    continue
                vals = ",".join(repr(float(v)) for v in row)
                fh.write(f"{pid},{float(t)!r},{vals}\n")


def write_ensemble_binary(ens: PathEnsemble, path: str) -> None:
    """Compact binary layout.

    Header: magic b"MSLE", u32 version, u32 p, u64 paths, u64 grid length;
    then grid, trajectories (path-major), lifetimes, absorbed flags (u8),
    and the f64 triple (diffused_scale, collision_eps, seed), all
    little-endian 64-bit floats unless noted.
    """
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<IIQQ", BINARY_VERSION, ens.arity,
                             ens.paths, ens.grid.size))
        fh.write(ens.grid.astype("<f8").tobytes())
        fh.write(ens.trajectories.astype("<f8").tobytes())
        fh.write(ens.lifetime.astype("<f8").tobytes())
        fh.write(ens.absorbed.astype("u1").tobytes())
        fh.write(struct.pack("<ddq", ens.diffused_scale, ens.collision_eps,
                             ens.seed))


def read_ensemble_binary(path: str) -> PathEnsemble:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BINARY_MAGIC:
            raise InvalidConfigError(f"not an ensemble file: bad magic {magic!r}")
        version, p, paths, glen = struct.unpack("<IIQQ", fh.read(24))
        if version != BINARY_VERSION:
            raise InvalidConfigError(f"unsupported ensemble version {version}")
        grid = np.frombuffer(fh.read(8 * glen), dtype="<f8").copy()
        traj = np.frombuffer(fh.read(8 * paths * glen * p), dtype="<f8").copy()
        traj = traj.reshape(paths, glen, p)
        lifetime = np.frombuffer(fh.read(8 * paths), dtype="<f8").copy()
        absorbed = np.frombuffer(fh.read(paths), dtype="u1").astype(bool)
        scale, eps, seed = struct.unpack("<ddq", fh.read(24))
    return PathEnsemble(grid, traj, lifetime, absorbed, scale, eps, int(seed))
