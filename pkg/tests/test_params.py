import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from cunec.errors import ConditioningError, ConfigError, InvalidArgumentError
from cunec.geometry import Role, Terminal, build_grid, classify_link
from cunec.params import (EIG_FLOOR, StreetParams, assign_street_params, conditional_gaussian,
                          moment_matched_latent, nearest_correlation, nearest_spd,
                          sample_street_params, street_stream)
from cunec.pathloss import Condition
from cunec.tables import FREE_PARAMS, default_tables, load_tables

from psd_oracle import nearest_psd_search


# -- nearest_spd -------------------------------------------------------------

def test_nearest_spd_examples():
    assert np.array_equal(nearest_spd(np.eye(3)), np.eye(3))
    A = np.array([[1, 0.5], [0.5, 1]])
    assert np.allclose(nearest_spd(A), A, atol=1e-12)
    # eigenvalues 2.2 (vector [1,1]/sqrt2) and -0.2: keep 2.2 * v v^T
    out = nearest_spd([[1, 1.2], [1.2, 1]])
    assert np.allclose(out, [[1.1, 1.1], [1.1, 1.1]], atol=1e-7)
    assert np.linalg.eigvalsh(out).min() >= EIG_FLOOR * (1 - 1e-6)


def test_nearest_spd_rejects_non_square():
    with pytest.raises(InvalidArgumentError):
        nearest_spd(np.ones((2, 3)))


sym = arrays(np.float64, (4, 4), elements=st.floats(-5, 5))


@given(sym)
def test_nearest_spd_symmetric_floor_and_idempotent(M):
    out = nearest_spd(M)
    assert np.array_equal(out, out.T)
    assert np.linalg.eigvalsh(out).min() >= EIG_FLOOR - 1e-9
    again = nearest_spd(out)
    assert np.abs(again - out).max() <= 1e-10 * max(1.0, np.abs(out).max())


@given(arrays(np.float64, (3, 3), elements=st.floats(-2, 2)))
def test_nearest_spd_idempotent_on_spd_inputs(A):
    S = A @ A.T + 0.1 * np.eye(3)
    assert np.abs(nearest_spd(S) - S).max() <= 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_nearest_spd_frobenius_optimal_2x2_3x3(seed):
    rng = np.random.default_rng(seed)
    n = 2 + seed % 2
    A = rng.uniform(-1, 1, (n, n))
    A = 0.5 * (A + A.T)
    best, _ = nearest_psd_search(A)
    assert np.linalg.norm(nearest_spd(A) - A) <= best + 1e-3


def test_nearest_correlation_keeps_unit_diagonal():
    C = np.array([[1, 0.9, -0.9], [0.9, 1, 0.9], [-0.9, 0.9, 1]])
    R = nearest_correlation(C)
    assert np.allclose(np.diag(R), 1.0)
    assert np.linalg.eigvalsh(R).min() > 0


# -- conditional_gaussian ----------------------------------------------------

def test_conditional_independent():
    mu, cov = conditional_gaussian([1.0, 2.0], [1.0, 3.0], np.eye(2), [0], [5.0])
    assert mu == pytest.approx([2.0]) and cov[0, 0] == pytest.approx(9.0)


def test_conditional_bivariate_textbook():
    mu, cov = conditional_gaussian([0, 0], [1, 1], [[1, 0.8], [0.8, 1]], [0], [1.0])
    assert mu[0] == pytest.approx(0.8) and cov[0, 0] == pytest.approx(0.36)


@given(arrays(np.float64, 3, elements=st.floats(-10, 10)), arrays(np.float64, 3, elements=st.floats(0.1, 5)))
def test_conditional_empty_is_identity(mu, sigma):
    R = np.array([[1, 0.3, 0.1], [0.3, 1, -0.2], [0.1, -0.2, 1]])
    m, c = conditional_gaussian(mu, sigma, R)
    assert np.array_equal(m, mu)
    assert np.allclose(c, sigma[:, None] * R * sigma[None, :])


def test_conditional_singular_fixed_block():
    with pytest.raises(ConditioningError):
        conditional_gaussian([0, 0, 0], [1, 1, 1], np.ones((3, 3)), [0, 1], [1.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        conditional_gaussian([0, 0], [1, 1], np.eye(2), [0, 0], [1.0, 1.0])


def test_law_of_total_expectation():
    rng = np.random.default_rng(11)
    mu, sigma = np.array([1.0, -2.0, 0.5]), np.array([2.0, 1.0, 0.5])
    R = np.array([[1, 0.6, -0.3], [0.6, 1, 0.2], [-0.3, 0.2, 1]])
    x0 = rng.normal(mu[0], sigma[0], 20000)
    conds = np.array([conditional_gaussian(mu, sigma, R, [0], [v])[0] for v in x0])
    se = conds.std(axis=0) / np.sqrt(len(x0))
    assert np.all(np.abs(conds.mean(axis=0) - mu[1:]) <= 3 * se + 1e-12)


# -- moment-matched clamping -------------------------------------------------

@pytest.mark.parametrize("mean,std,lower", [(9.9, 6.7, 0.1), (0.037, 0.02, 1e-3), (1.3, 0.58, 0.05),
                                            (10.4, 10.6, 0.1)])
def test_moment_matched_latent_restores_clamped_moments(mean, std, lower):
    m, s = moment_matched_latent(mean, std, lower)
    x = np.maximum(np.random.default_rng(0).normal(m, s, 400000), lower)
    assert x.mean() == pytest.approx(mean, abs=4 * std / np.sqrt(len(x)))
    assert x.std() == pytest.approx(std, rel=0.01)


def test_moment_matched_latent_identity_far_from_bound():
    assert moment_matched_latent(1.56, 0.05, 0.05) == (1.56, 0.05)
    assert moment_matched_latent(5.0, 0.0, 0.05) == (5.0, 0.0)


# -- tables ------------------------------------------------------------------

def test_default_tables_verbatim():
    t = default_tables()
    assert t.orders[1].mean["delta"] == 29.7 and t.orders[1].std["delta"] == 11
    assert t.orders[1].mean["kappa"] == 0.037 and t.orders[1].std["kappa"] == 0.02
    assert t.orders[2].mean["exponent"] == 1.3 and t.orders[2].std["exponent"] == 0.58
    assert t.orders[0].corr[("street_width", "exponent")] == 0.9
    assert t.d_th_m == 70
    for tab in t.orders.values():
        assert all(v >= 0 for v in tab.std.values())
        assert all(-1 <= v <= 1 for v in tab.corr.values())


def test_table_overrides(tmp_path):
    f = tmp_path / "t.yaml"
    f.write_text("order1.mean.kappa: 0.05\norder0.corr.exponent.street_width: 0.5\n"
                 "alphabeta.nlos.beta: 5.0\nbounds.exponent: 0.1\nd_th: 60\n")
    t = load_tables(f)
    assert t.orders[1].mean["kappa"] == 0.05
    assert t.orders[0].corr[("exponent", "street_width")] == 0.5
    assert ("street_width", "exponent") not in t.orders[0].corr
    assert t.alpha_beta[Condition.NLOS].beta == 5.0
    assert t.lower_bounds["exponent"] == 0.1 and t.d_th_m == 60
    assert default_tables().orders[1].mean["kappa"] == 0.037


@pytest.mark.parametrize("text", ["order1.mean.nope: 1", "order3.mean.kappa: 1", "order0.corr.delta.delta: 0.1",
                                  "order0.corr.delta.exponent: 1.5", "order1.std.kappa: -1",
                                  "order1.mean.kappa: abc", "[1, 2]", "a: [b"])
def test_table_override_errors(tmp_path, text):
    f = tmp_path / "t.yaml"
    f.write_text(text)
    with pytest.raises(ConfigError):
        load_tables(f)


# -- sampling ----------------------------------------------------------------

def draws(order, n, env=None, tables=None, seed=0):
    tables = tables or default_tables()
    names, x, clamped = tables.sampler(order).draw(n, np.random.default_rng(seed), env)
    return dict(zip(names, x.T)), dict(zip(names, clamped.T))


def test_order0_exponent_moments():
    x, _ = draws(0, 100000)
    b0 = x["exponent"]
    assert abs(b0.mean() - 1.56) <= 3 * 0.05 / np.sqrt(b0.size)
    assert b0.std() == pytest.approx(0.05, rel=0.05)


def test_conditioning_on_wide_street_raises_exponent():
    wide, _ = draws(0, 20000, {"street_width": 30.0})
    narrow, _ = draws(0, 20000, {"street_width": 15.0})
    assert wide["exponent"].mean() > narrow["exponent"].mean() + 0.02
    assert "street_width" not in wide


def test_zero_stds_return_means_exactly():
    t = default_tables()
    for k in t.orders[1].std:
        t.orders[1].std[k] = 0.0
    p = sample_street_params(1, {"street_width": 20, "block_length": 100, "building_height": 40}, t,
                             np.random.default_rng(0))
    assert dict(p.values) == t.orders[1].mean
    assert not any(p.clamped_flags.values())


def test_sample_street_params_fields_and_bounds():
    t = default_tables()
    rng = np.random.default_rng(3)
    for order in (0, 1, 2):
        for _ in range(300):
            p = sample_street_params(order, None, t, rng)
            assert set(p.values) == set(FREE_PARAMS[order])
            for name, v in p.values.items():
                lb = t.lower_bound(order, name)
                if lb is not None:
                    assert v >= lb
                    if p.clamped_flags[name]:
                        assert v == lb


def test_unknown_order():
    with pytest.raises(InvalidArgumentError):
        sample_street_params(3, None, default_tables(), np.random.default_rng(0))


def test_far_bounds_never_bind():
    # exponent 1.56 +- 0.05 sits ~30 std above its 0.05 bound
    _, clamped = draws(0, 100000)
    assert clamped["exponent"].mean() < 1e-4
    assert clamped["sigma_ap"].mean() < 1e-4


def test_sampling_is_deterministic_per_stream():
    t = default_tables()
    a = sample_street_params(1, None, t, street_stream(5, "H1", 1))
    b = sample_street_params(1, None, t, street_stream(5, "H1", 1))
    assert a == b


def _ap(x, y):
    return Terminal((x, y, 10), Role.AP)


def _ue(x, y):
    return Terminal((x, y, 1.5), Role.UE)


def test_shared_street_shares_realization():
    g = build_grid(100, 20, 40, 2, 1)
    # AP on H0, UE on H1: two order-2 routes, both start on H0
    lc = classify_link(g, _ap(40, 0), _ue(70, 120))
    assert lc.order == 2
    params = assign_street_params(lc.routes, None, default_tables(), seed=9)
    firsts = [params[(r.street_ids[0], 0)] for r in lc.routes]
    assert all(f is firsts[0] for f in firsts)
    assert firsts[0]["exponent"] == firsts[1]["exponent"]


def test_single_street_scenario_has_one_entry():
    g = build_grid(100, 20, 40, 1, 1)
    lc = classify_link(g, _ap(40, 0), _ue(90, 0))
    assert len(assign_street_params(lc.routes, None, default_tables(), 1)) == 1


def test_adding_streets_keeps_existing_draws():
    g = build_grid(100, 20, 40, 2, 2)
    small = classify_link(g, _ap(40, 0), _ue(90, 0)).routes
    big = small + classify_link(g, _ap(40, 0), _ue(120, 60)).routes
    a = assign_street_params(small, None, default_tables(), 4)
    b = assign_street_params(big, None, default_tables(), 4)
    assert len(b) > len(a)
    assert all(a[k] == b[k] for k in a)
    assert assign_street_params(big, None, default_tables(), 4) == b


def test_street_params_lookup():
    p = StreetParams(0, {"delta": 1.0})
    assert p["delta"] == 1.0
