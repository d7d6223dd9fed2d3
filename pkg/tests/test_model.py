import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockpca import model
from blockpca.errors import (
    BadK,
    EmptySubset,
    FullSubset,
    IndexOutOfRange,
    NonPositiveEntry,
    NonSymmetricS,
    RhoNotSimplex,
)
from blockpca.model import make_model, omega, gamma, snr

from conftest import FIG1_T, fig1_model, rand_model, two_by_two_top


def test_validate_homogeneous():
    m = model.validate({"K": 1, "rho": [1], "S": [[2]]})
    assert m.K == 1 and m.S[0, 0] == 2.0


def test_validate_rejects_non_simplex():
    with pytest.raises(RhoNotSimplex):
        model.validate({"K": 2, "rho": [0.6, 0.3], "S": [[1, 1], [1, 1]]})


def test_validate_rejects_zero_entry():
    with pytest.raises(NonPositiveEntry):
        model.validate({"K": 2, "rho": [0.5, 0.5], "S": [[1, 0], [0, 1]]})


def test_validate_rejects_asymmetric():
    with pytest.raises(NonSymmetricS):
        model.validate({"K": 2, "rho": [0.5, 0.5], "S": [[1, 2], [1, 1]]})


@pytest.mark.parametrize("K", [0, -1, 1.5, True, "2"])
def test_validate_bad_k(K):
    with pytest.raises(BadK):
        model.validate({"K": K, "rho": [1], "S": [[1]]})


def test_validate_dimension_mismatch():
    with pytest.raises(BadK):
        model.validate({"K": 2, "rho": [1], "S": [[1]]})


def test_validate_rationals_and_renormalisation():
    m = model.validate({"K": 3, "rho": ["1/3", Fraction(1, 3), 0.3333333333], "S": np.ones((3, 3))})
    assert m.rho.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(RhoNotSimplex):
        model.validate({"K": 2, "rho": [0.5, 0.5 + 1e-8], "S": np.ones((2, 2))})


def test_validate_unknown_prior():
    with pytest.raises(BadK):
        model.validate({"K": 1, "rho": [1], "S": [[1]], "prior": "cauchy"})


def test_params_are_read_only():
    m = make_model([1], [[2]])
    with pytest.raises(ValueError):
        m.S[0, 0] = 3.0


def test_load_model(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"K": 2, "rho": [0.5, 0.5], "S": [[1.857142857, 0.5], [0.5, 0.25]], "prior": "gaussian"}))
    m = model.load_model(p)
    assert m.K == 2 and m.prior == "gaussian"
    assert len(m.digest()) == 64


def test_omega_scalar():
    m = make_model([1], [[3.5]])
    om = omega(m)
    assert om.entries[0, 0] == 3.5 and om.snr == 3.5


@pytest.mark.parametrize("target,t", sorted(FIG1_T.items()))
def test_omega_fig1_snr(target, t):
    m = fig1_model(t)
    assert snr(m) == pytest.approx(target, abs=1e-12)
    assert two_by_two_top(t / 2, 0.25, 0.125) == pytest.approx(target, abs=1e-12)


def test_gamma_product():
    m = make_model([0.5, 0.5], [[1, 0.5], [0.5, 0.25]])
    assert np.allclose(gamma(m).entries, [[0.5, 0.25], [0.25, 0.125]])
    assert gamma(make_model([1], [[2.5]])).entries[0, 0] == 2.5


def test_gamma_similar_to_omega():
    rng = np.random.default_rng(5)
    for _ in range(100):
        m = rand_model(rng)
        a = np.sort(np.linalg.eigvals(gamma(m).entries).real)
        b = np.sort(np.linalg.eigvalsh(omega(m).entries))
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12 * np.abs(b).max())


def test_omega_positive_symmetric_simple():
    rng = np.random.default_rng(6)
    for _ in range(100):
        m = rand_model(rng)
        om = omega(m)
        assert np.all(om.entries > 0) and np.array_equal(om.entries, om.entries.T)
        assert np.all(om.perron_vector > 0)
        if m.K > 1:
            assert om.gap > 1e-12 and om.simple


def test_snr_derivative_scalar():
    assert model.snr_derivative(make_model([1], [[2.0]]), 0, 0) == pytest.approx(1.0)


def test_snr_derivative_finite_difference():
    rng = np.random.default_rng(7)
    m = rand_model(rng, K=3)
    h = 1e-6
    for k in range(3):
        for l in range(k, 3):
            fd = (snr(m.with_entry(k, l, m.S[k, l] + h)) - snr(m.with_entry(k, l, m.S[k, l] - h))) / (2 * h)
            d = model.snr_derivative(m, k, l)
            assert d > 0
            assert d == pytest.approx(fd, rel=1e-6)


def test_snr_derivative_index_check():
    with pytest.raises(IndexOutOfRange):
        model.snr_derivative(make_model([1], [[2.0]]), 0, 1)


def test_reduced_model_worked_example():
    m = make_model([0.5, 0.5], [[2, 1], [1, 2]])
    r = model.reduced_model(m, [0])
    assert r.K == 1 and r.rho[0] == 1.0
    assert omega(r).entries[0, 0] == pytest.approx(1.0)
    assert snr(m) == pytest.approx(1.5)
    assert snr(r) < snr(m)


def test_reduced_model_errors():
    m = make_model([0.5, 0.5], [[2, 1], [1, 2]])
    with pytest.raises(FullSubset):
        model.reduced_model(m, [0, 1])
    with pytest.raises(EmptySubset):
        model.reduced_model(m, [])
    with pytest.raises(IndexOutOfRange):
        model.reduced_model(m, [2])


def test_reduced_model_is_principal_minor():
    rng = np.random.default_rng(8)
    for _ in range(100):
        m = rand_model(rng, K=int(rng.integers(2, 5)))
        keep = sorted(rng.choice(m.K, size=int(rng.integers(1, m.K)), replace=False))
        r = model.reduced_model(m, keep)
        assert np.allclose(omega(r).entries, omega(m).entries[np.ix_(keep, keep)], rtol=1e-12)
        assert snr(r) < snr(m)


def test_t_for_snr_recovers_fig1():
    build = fig1_model
    for target, t in FIG1_T.items():
        assert model.t_for_snr(build, target, 1e-6, 50.0) == pytest.approx(t, rel=1e-11)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.05, 1.0), min_size=1, max_size=4),
    st.integers(0, 2**31),
    st.floats(1e-3, 1.0),
)
def test_snr_monotone_property(weights, seed, eps):
    rng = np.random.default_rng(seed)
    K = len(weights)
    rho = np.array(weights) / sum(weights)
    A = rng.uniform(0.1, 3.0, size=(K, K))
    m = make_model(rho, (A + A.T) / 2)
    k, l = sorted(rng.integers(0, K, size=2))
    assert snr(m.with_entry(k, l, m.S[k, l] + eps)) > snr(m)
