import math

import numpy as np
import pytest

from multisle.core import derived_parameters
from multisle.errors import InvalidConfigError, InvalidParameterError
from multisle.partition import pure_pair_partition
from multisle.rng import counter_normal, counter_normals
from multisle.sde import (
    SimConfig,
    drift,
    dyson_spec,
    gff_spec,
    pure_spec,
    read_ensemble_binary,
    simulate,
    sle_rho_spec,
    write_ensemble_binary,
    write_ensemble_csv,
)

K4 = derived_parameters(4.0)


def test_counter_rng_scalar_vector_agree():
    # same mixing, same keys; only libm rounding (cos/log) may differ by a ulp
    steps = np.arange(1000, dtype=np.uint64)
    vec = counter_normals(9, 7, 3, steps)
    scal = np.array([counter_normal(9, 7, 3, int(s)) for s in steps])
    assert np.max(np.abs(vec - scal)) <= 4 * np.spacing(1.0)


def test_counter_rng_statistics():
    z = counter_normals(123, np.arange(200_000), 0, 0)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1.0) < 0.01
    assert np.all(np.isfinite(z))


def test_counter_rng_distinct_keys():
    a = counter_normals(1, 0, 0, np.arange(100))
    b = counter_normals(2, 0, 0, np.arange(100))
    assert not np.array_equal(a, b)


def test_drift_examples():
    assert np.allclose(drift(dyson_spec(2, K4), (0.0, 1.0)), [-4.0, 4.0])
    assert np.allclose(drift(gff_spec(1), (0.0, 1.0)), [0.0, 0.0])
    pp = pure_spec(pure_pair_partition(K4), K4)
    assert np.allclose(drift(pp, (0.0, 1.0)), [0.0, 0.0])


def test_drift_gff_vs_pure_pair_kappa4():
    rng = np.random.default_rng(0)
    g = gff_spec(1)
    pp = pure_spec(pure_pair_partition(K4), K4)
    for _ in range(100):
        x = np.sort(rng.uniform(-5, 5, 2))
        if x[1] - x[0] < 0.05:
            continue
        assert np.allclose(drift(g, x), drift(pp, x), atol=1e-12)


def test_drift_rejects_bad_config():
    with pytest.raises(InvalidConfigError):
        drift(dyson_spec(2, K4), (1.0, 0.0))
    with pytest.raises(InvalidConfigError):
        drift(dyson_spec(2, K4), (0.0, 1.0, 2.0))


def test_sle_rho_drift():
    params = derived_parameters(2.0)
    spec = sle_rho_spec(params, [], [2.0, 2.0])
    # state (W, v1, v2) = (0, 1, 2): driving gets rho/(W - v), force 2/(v - W)
    d = drift(spec, (0.0, 1.0, 2.0))
    assert d[0] == pytest.approx(2.0 / (0 - 1) + 2.0 / (0 - 2))
    assert d[1] == pytest.approx(2.0 / (1 - 0))
    assert d[2] == pytest.approx(2.0 / (2 - 0))
    assert spec.noise_scale[0] == math.sqrt(2.0)
    assert spec.noise_scale[1] == 0.0


def test_sim_config_validation():
    with pytest.raises(InvalidParameterError):
        SimConfig(dt=0.0, t_end=1.0)
    with pytest.raises(InvalidParameterError):
        SimConfig(dt=0.1, t_end=1.0, store_times=(2.0,))
    with pytest.raises(InvalidParameterError):
        SimConfig(dt=0.1, t_end=1.0, theta=0.0)


def test_simulate_deterministic_and_permutable():
    pp = pure_spec(pure_pair_partition(K4), K4)
    cfg = SimConfig(dt=0.05, t_end=0.5, seed=4, paths=64, store_times=(0.25, 0.5))
    a = simulate(pp, (0.0, 1.0), cfg)
    b = simulate(pp, (0.0, 1.0), cfg)
    assert np.array_equal(a.lifetime, b.lifetime)
    assert np.array_equal(a.trajectories, b.trajectories, equal_nan=True)
    # path i is a pure function of its index: a shorter run is a prefix
    small = simulate(pp, (0.0, 1.0), SimConfig(dt=0.05, t_end=0.5, seed=4,
                                               paths=16,
                                               store_times=(0.25, 0.5)))
    assert np.array_equal(small.lifetime, a.lifetime[:16])
    assert np.array_equal(small.trajectories, a.trajectories[:16],
                          equal_nan=True)


def test_snapshots_ordered():
    spec = dyson_spec(3, K4)
    cfg = SimConfig(dt=0.05, t_end=1.0, seed=1, paths=200,
                    store_times=(0.5, 1.0))
    ens = simulate(spec, (0.0, 0.5, 1.0), cfg)
    snaps = ens.trajectories[~np.isnan(ens.trajectories[:, :, 0])]
    assert np.all(np.diff(snaps, axis=-1) > 0)


def test_dyson_never_collides():
    cfg = SimConfig(dt=0.05, t_end=1.0, seed=2, paths=20_000)
    ens = simulate(dyson_spec(2, K4), (0.0, 1.0), cfg)
    died = np.mean(np.isfinite(ens.lifetime))
    assert died <= 0.001


def test_survival_matches_reflection_oracle():
    pp = pure_spec(pure_pair_partition(K4), K4)
    cfg = SimConfig(dt=0.05, t_end=1.0, seed=6, paths=50_000)
    ens = simulate(pp, (0.0, 1.0), cfg)
    p_hat = ens.survival_fraction(1.0)
    oracle = math.erf(0.25)
    se = math.sqrt(oracle * (1 - oracle) / cfg.paths)
    assert abs(p_hat - oracle) < 4 * se


def test_dyson_scaling_law():
    # c X_{t/c^2} from x0 equals in law X_t from c x0 (c = 2, first two moments)
    c = 2.0
    x0 = np.array([0.0, 1.0])
    cfg_a = SimConfig(dt=0.01, t_end=0.25, seed=8, paths=10_000,
                      store_times=(0.25,))
    cfg_b = SimConfig(dt=0.04, t_end=1.0, seed=9, paths=10_000,
                      store_times=(1.0,))
    a = simulate(dyson_spec(2, K4), x0, cfg_a).trajectories[:, 0, :] * c
    b = simulate(dyson_spec(2, K4), c * x0, cfg_b).trajectories[:, 0, :]
    for j in range(2):
        for moment in (1, 2):
            ma, mb = a[:, j] ** moment, b[:, j] ** moment
            se = math.hypot(ma.std() / math.sqrt(ma.size),
                            mb.std() / math.sqrt(mb.size))
            assert abs(ma.mean() - mb.mean()) < 3.5 * se


def test_collision_eps_robustness():
    pp = pure_spec(pure_pair_partition(K4), K4)
    base = 1e-6
    outs = []
    for eps in (base, base / 2):
        cfg = SimConfig(dt=0.05, t_end=1.0, seed=10, paths=20_000,
                        collision_eps=eps)
        outs.append(simulate(pp, (0.0, 1.0), cfg).survival_fraction(1.0))
    se = math.sqrt(outs[0] * (1 - outs[0]) / 20_000)
    assert abs(outs[0] - outs[1]) < se


def test_serialization_roundtrip(tmp_path):
    pp = pure_spec(pure_pair_partition(K4), K4)
    cfg = SimConfig(dt=0.05, t_end=0.5, seed=3, paths=32, store_times=(0.5,))
    ens = simulate(pp, (0.0, 1.0), cfg)
    bpath = tmp_path / "ens.bin"
    write_ensemble_binary(ens, str(bpath))
    back = read_ensemble_binary(str(bpath))
    assert np.array_equal(back.lifetime, ens.lifetime)
    assert np.array_equal(back.trajectories, ens.trajectories, equal_nan=True)
    assert np.array_equal(back.absorbed, ens.absorbed)
    assert back.seed == ens.seed and back.collision_eps == ens.collision_eps

    cpath = tmp_path / "ens.csv"
    write_ensemble_csv(ens, str(cpath))
    lines = cpath.read_text().strip().split("\n")
    assert lines[0] == "path,t,x1,x2"
    alive = int(np.sum(~np.isnan(ens.trajectories[:, 0, 0])))
    assert len(lines) == 1 + alive


def test_binary_rejects_garbage(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"NOPElots-of-junk-bytes")
    with pytest.raises(InvalidConfigError):
        read_ensemble_binary(str(p))
