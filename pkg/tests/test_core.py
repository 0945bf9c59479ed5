import math
from fractions import Fraction

import numpy as np
import pytest

from multisle.core import (
    MAX_LINK_PATTERN_N,
    BoundaryConfig,
    LinkPattern,
    derived_parameters,
    enumerate_link_patterns,
    exponents,
)
from multisle.errors import InvalidConfigError, InvalidParameterError

CATALAN = {1: 1, 2: 2, 3: 5, 4: 14, 5: 42, 6: 132, 7: 429, 8: 1430}


def test_derived_parameters_kappa4():
    p = derived_parameters(4.0)
    assert p.beta == 2.0
    assert p.b == 0.25
    assert p.c == 1.0


def test_derived_parameters_kappa6():
    p = derived_parameters(6.0)
    assert p.b == 0.0
    assert p.c == 0.0


def test_derived_parameters_kappa_8_3():
    p = derived_parameters(8.0 / 3.0)
    assert p.c == pytest.approx(0.0, abs=1e-15)
    assert p.b == pytest.approx(5.0 / 8.0, rel=1e-15)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 2.0, 8.0 / 3.0, 3.0, 4.0])
def test_derived_parameters_recompute_consistent(kappa):
    p = derived_parameters(kappa)
    k = p.kappa
    assert p.beta == 8.0 / k
    assert p.b == (6.0 - k) / (2.0 * k)
    assert p.c == (6.0 - k) * (3.0 * k - 8.0) / (2.0 * k)
    assert abs(p.beta * p.kappa - 8.0) <= np.spacing(8.0)


@pytest.mark.parametrize("kappa", [0.0, -1.0, math.nan, math.inf, 8.0, 9.0])
def test_derived_parameters_rejects(kappa):
    with pytest.raises(InvalidParameterError):
        derived_parameters(kappa)


def test_multichordal_guard():
    derived_parameters(4.0).require_multichordal()
    with pytest.raises(InvalidParameterError):
        derived_parameters(6.0).require_multichordal()


def test_exponents_examples():
    assert exponents(1, 4.0).arm == 1.0
    assert exponents(2, 4.0).arm == 4.0
    assert exponents(1, 8.0 / 3.0).arm == pytest.approx(2.0, rel=1e-15)


@pytest.mark.parametrize("n", range(1, 7))
@pytest.mark.parametrize("kappa", [2, 3, 4])
def test_exponent_identity_exact_rational(n, kappa):
    # arm = lambda_{2n} - lambda'_{2n} as exact rationals
    k = Fraction(kappa)
    arm = n * (4 * n + 4 - k) / k
    lam = 2 * n * (8 * n - 4 + k) / k
    lam_p = n * (12 * n - 12 + 3 * k) / k
    assert arm == lam - lam_p
    e = exponents(n, float(kappa))
    assert e.arm == pytest.approx(float(arm), rel=1e-13)
    assert e.arm == pytest.approx(e.lambda_2n - e.lambda_prime_2n, rel=1e-12)


def test_exponents_at_kappa4_is_n_squared():
    for n in range(1, 7):
        assert exponents(n, 4.0).arm == pytest.approx(n * n, rel=1e-14)


def test_boundary_config_ordering():
    cfg = BoundaryConfig((0.0, 1.0, 2.5))
    assert cfg.arity == 3
    assert np.array_equal(cfg.as_array(), [0.0, 1.0, 2.5])
    with pytest.raises(InvalidConfigError):
        BoundaryConfig((1.0, 1.0))
    with pytest.raises(InvalidConfigError):
        BoundaryConfig((2.0, 1.0))


def test_link_pattern_validation():
    LinkPattern(((1, 2), (3, 4)))
    LinkPattern(((1, 4), (2, 3)))
    with pytest.raises(InvalidConfigError):
        LinkPattern(((1, 3), (2, 4)))  # crossing
    with pytest.raises(InvalidConfigError):
        LinkPattern(((1, 2), (2, 3)))  # not a partition


def test_enumerate_n1():
    pats = enumerate_link_patterns(1)
    assert len(pats) == 1
    assert pats[0].pairs == ((1, 2),)


@pytest.mark.parametrize("n", list(CATALAN))
def test_enumerate_counts_and_invariants(n):
    pats = enumerate_link_patterns(n)
    assert len(pats) == CATALAN[n]
    assert len(set(pats)) == len(pats)
    for lp in pats:
        seen = sorted(i for pair in lp.pairs for i in pair)
        assert seen == list(range(1, 2 * n + 1))
    # deterministic lexicographic order
    keys = [lp.pairs for lp in pats]
    assert keys == sorted(keys)


def test_enumerate_rejects_out_of_range():
    with pytest.raises(InvalidParameterError):
        enumerate_link_patterns(0)
    with pytest.raises(InvalidParameterError):
        enumerate_link_patterns(MAX_LINK_PATTERN_N + 1)
