import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modalbound.bounds import (BoundConstants, LinearClass, MlpClass, ZeroClass, bound_check,
                               estimate_constants, rademacher_linear_exact, rademacher_mc_oracle,
                               theorem1_components, theorem1_rhs, theorem2_components,
                               theorem2_rhs)
from modalbound.composite import ModelSpec
from modalbound.exceptions import BoundConstantsError, InvalidInputError
from modalbound.modal_data import Dataset, ModalitySchema, ModalitySubset

S2 = ModalitySchema((1, 1))


def ds_of(X, y=None):
    X = np.asarray(X, dtype=float)
    return Dataset(ModalitySchema((1,) * X.shape[1]), X, np.zeros(len(X)) if y is None else y)


def test_single_sample_exact():
    est = rademacher_linear_exact(ds_of([[1.0, 0.0]]), ModalitySubset.full(S2), 1.0)
    assert est.mean == 1.0 and est.exact_enumeration and est.standard_error == 0.0


def test_duplicate_pair_enumeration():
    est = rademacher_linear_exact(ds_of([[1.0, 0.0], [1.0, 0.0]]), ModalitySubset.full(S2), 1.0)
    assert sorted(est.per_draw.tolist()) == [0, 0, 1, 1]
    assert est.mean == 0.5


def test_empty_subset_is_zero():
    X = np.random.default_rng(0).standard_normal((30, 2))
    assert rademacher_linear_exact(ds_of(X), ModalitySubset.empty(S2), 2.0).mean == 0.0


def test_linear_exact_rejects_infinite_cb():
    with pytest.raises(InvalidInputError):
        rademacher_linear_exact(ds_of([[1.0, 0.0]]), ModalitySubset.full(S2), math.inf)


def test_sampled_draws_have_se():
    X = np.random.default_rng(0).standard_normal((40, 2))
    est = rademacher_linear_exact(ds_of(X), ModalitySubset.full(S2), 1.0, n_draws=100, seed=1)
    assert not est.exact_enumeration and est.n_draws == 100
    assert est.standard_error == pytest.approx(np.std(est.per_draw, ddof=1) / 10)


def test_zero_class_mc():
    X = np.random.default_rng(0).standard_normal((20, 2))
    assert rademacher_mc_oracle(ds_of(X), ZeroClass(), n_draws=10).mean == 0.0


def test_mc_ascent_close_to_exact():
    X = np.random.default_rng(3).standard_normal((25, 2))
    ds = ds_of(X)
    full = ModalitySubset.full(S2)
    exact = rademacher_linear_exact(ds, full, 1.5, n_draws=40, seed=2, enumerate_signs=False)
    mc = rademacher_mc_oracle(ds, LinearClass(full, 1.5), n_draws=40, seed=2, restarts=32, steps=50)
    assert mc.lower_estimate and not exact.lower_estimate
    assert mc.mean <= exact.mean + 3 * exact.standard_error + 1e-12
    assert mc.mean >= 0.9 * exact.mean


def test_mc_doubling_cb_doubles():
    X = np.random.default_rng(4).standard_normal((15, 2))
    full = ModalitySubset.full(S2)
    a = rademacher_mc_oracle(ds_of(X), LinearClass(full, 1.0), n_draws=10, seed=0, restarts=4, steps=20)
    b = rademacher_mc_oracle(ds_of(X), LinearClass(full, 2.0), n_draws=10, seed=0, restarts=4, steps=20)
    assert b.mean == pytest.approx(2 * a.mean, rel=1e-9)


def test_mc_mlp_class_nonnegative():
    schema = ModalitySchema((2, 2))
    X = np.random.default_rng(0).standard_normal((12, 4))
    ds = Dataset(schema, X, np.zeros(12))
    fclass = MlpClass(ModalitySubset.full(schema), ModelSpec("mlp", 2), bound=0.5)
    est = rademacher_mc_oracle(ds, fclass, n_draws=5, restarts=2, steps=10)
    assert est.mean >= 0 and np.all(est.per_draw >= 0)


def test_mc_oracle_failure_reports_draw():
    def broken(fclass, X, coeffs, rng):
        raise RuntimeError("boom")
    with pytest.raises(Exception) as info:
        rademacher_mc_oracle(ds_of([[1.0, 0.0]]), ZeroClass(), broken, n_draws=3)
    assert info.value.draw == 0


def test_theorem1_examples():
    c = BoundConstants(1.0, 1.0, 0.05)
    assert theorem1_rhs(0.0, 0.1, c, 100) == pytest.approx(1.7433, abs=1e-4)
    assert theorem1_rhs(-0.5, 0.1, c, 100) == pytest.approx(theorem1_rhs(0.0, 0.1, c, 100) - 0.5)


def test_theorem1_zero_constant_limit():
    # C = 0 is not a valid constant, so check the limit through tiny C
    c = BoundConstants(1.0, 1e-300, 0.05)
    assert theorem1_rhs(0.0, 0.0, c, 10) == pytest.approx(0.0, abs=1e-290)


def test_theorem2_examples():
    c = BoundConstants(1.0, 1.0, 0.05)
    assert theorem2_rhs(0.1, 0.12, c, 100, 0.05) == pytest.approx(2.5597, abs=1e-3)
    dev = 6 * math.sqrt(2 * math.log(40) / 100)
    assert theorem2_rhs(0.0, 0.0, c, 100, 0.0) == pytest.approx(dev)
    a = theorem2_components(0.1, 0.12, c, 100, 0.05)
    b = theorem2_components(0.1, 0.12, BoundConstants(2.0, 1.0, 0.05), 100, 0.05)
    assert b["complexity_M"] == 2 * a["complexity_M"] and b["complexity_full"] == 2 * a["complexity_full"]
    assert b["deviation"] == a["deviation"] and b["centered_gap"] == a["centered_gap"]


def test_theorem2_variants():
    c = BoundConstants(1.0, 1.0, 0.05)
    appendix = theorem2_rhs(0.1, 0.12, c, 100, 0.05, "appendix")
    body = theorem2_rhs(0.1, 0.12, c, 100, 0.05, "body")
    assert appendix <= body
    with pytest.raises(InvalidInputError):
        theorem2_rhs(0.1, 0.12, c, 100, 0.05, "other")


def test_smaller_delta_increases_rhs():
    vals = [theorem1_rhs(0.0, 0.1, BoundConstants(1.0, 1.0, d), 100) for d in (0.5, 0.1, 0.01)]
    assert vals == sorted(vals)


def test_constants_examples():
    schema = ModalitySchema((1,))
    ds = Dataset(schema, [[1.0], [-0.5]], [1.0, -0.2])
    c = estimate_constants(ds, LinearClass(ModalitySubset.full(schema), 1.0))
    assert (c.C, c.L) == (4.0, 4.0)
    c0 = estimate_constants(ds, ZeroClass())
    assert (c0.C, c0.L) == (1.0, 2.0)
    scaled = Dataset(schema, [[3.0], [-1.5]], [3.0, -0.6])
    c3 = estimate_constants(scaled, LinearClass(ModalitySubset.full(schema), 1.0))
    assert c3.C == pytest.approx(9 * c.C) and c3.L == pytest.approx(3 * c.L)


def test_constants_need_prediction_bound():
    schema = ModalitySchema((1,))
    ds = Dataset(schema, [[1.0]], [1.0])
    with pytest.raises(BoundConstantsError, match="C_b"):
        estimate_constants(ds, MlpClass(ModalitySubset.full(schema)))


def test_bound_check_boundary_and_flags():
    comps = {"a": 0.25, "b": 0.5}
    rep = bound_check(0.75, comps, "theorem1")
    assert rep.holds and rep.rhs == 0.75
    assert bound_check(0.1, comps, "theorem2", lower_estimates=True).flags == ("rhs possibly understated",)
    with pytest.raises(InvalidInputError):
        bound_check(0.1, comps, "theorem1", "abc", "def")


def test_report_rhs_is_sum_of_components():
    c = BoundConstants(2.3, 1.7, 0.01)
    comps = theorem1_components(-0.3, 0.07, c, 321)
    rep = bound_check(0.0, comps, "theorem1")
    assert abs(rep.rhs - sum(comps.values())) <= 1e-12
    assert rep.to_dict()["components"] == comps


# properties ------------------------------------------------------------------------

@given(st.integers(0, 2**31), st.integers(1, 12))
@settings(max_examples=100, deadline=None)
def test_subset_monotone_per_draw(seed, m):
    rng = np.random.default_rng(seed)
    schema = ModalitySchema((2, 1, 3))
    ds = Dataset(schema, rng.standard_normal((m, 6)), np.zeros(m))
    N = ModalitySubset.of(schema, [int(rng.integers(3))])
    M = ModalitySubset(schema, tuple(a or b for a, b in zip(N.mask, rng.random(3) < 0.5)))
    r_N = rademacher_linear_exact(ds, N, 1.0, 64, seed)
    r_M = rademacher_linear_exact(ds, M, 1.0, 64, seed)
    assert np.all(r_N.per_draw >= 0)
    assert np.all(r_N.per_draw <= r_M.per_draw + 1e-12)


@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.01, 5), st.floats(0.01, 5),
       st.integers(1, 10**6), st.floats(0.001, 0.999), st.floats(-3, 3))
@settings(max_examples=200)
def test_rhs_additive(r1, r2, L, C, m, delta, gap):
    c = BoundConstants(L, C, delta)
    for comps in (theorem1_components(gap, r1, c, m),
                  theorem2_components(r1, r2, c, m, gap, "body"),
                  theorem2_components(r1, r2, c, m, gap, "appendix")):
        assert abs(bound_check(0.0, comps, "t").rhs - sum(comps.values())) <= 1e-12 * max(1, sum(map(abs, comps.values())))
