import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modalbound.composite import LinearComposite
from modalbound.exceptions import InvalidInputError, SingularityError
from modalbound.latent_quality import (CovarianceBlocks, EtaEstimate, covariance_blocks,
                                       eta_closed_form, eta_empirical, gamma, optimal_head,
                                       schur_complement)
from modalbound.modal_data import ModalitySchema, ModalitySubset
from modalbound.synthgen import (LinearGenConfig, OverlapConfig, generate_linear, generate_overlap,
                                 random_orthonormal, random_spd)
from modalbound.training import erm_linear_closed_form


def test_blocks_identity():
    b = covariance_blocks(np.eye(3), np.eye(3), np.eye(3))
    for g in (b.g11, b.g12, b.g21, b.g22):
        assert np.array_equal(g, np.eye(3))


def test_blocks_scalar():
    rho = 0.3
    b = covariance_blocks(1.0, rho, 1.0)
    assert [b.g11.item(), b.g12.item(), b.g21.item(), b.g22.item()] == pytest.approx([1, rho, rho, rho ** 2])


def test_blocks_random_psd():
    A = np.random.default_rng(0).standard_normal((5, 3))
    b = covariance_blocks(A, random_orthonormal(5, 5, 0), random_spd(5, 0))
    assert np.linalg.eigvalsh(b.assembled()).min() > -1e-8
    assert np.allclose(b.g21, b.g12.T, atol=1e-10)


def test_blocks_reject_asymmetric_sigma():
    with pytest.raises(InvalidInputError):
        covariance_blocks(np.eye(2), np.eye(2), np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_schur_scalar():
    rho = 0.6
    b = CovarianceBlocks(np.eye(1), np.array([[rho]]), np.array([[rho]]), np.eye(1))
    assert schur_complement(b).item() == pytest.approx(1 - rho ** 2)


def test_schur_invertible_encoder_vanishes():
    A_star = random_orthonormal(4, 4, 3)
    A = np.random.default_rng(1).standard_normal((4, 4))
    sch = schur_complement(covariance_blocks(A, A_star, random_spd(4, 3)))
    assert np.abs(sch).max() < 1e-8


def test_schur_block_diagonal():
    g22 = np.array([[2.0, 0.5], [0.5, 1.0]])
    b = CovarianceBlocks(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)), g22)
    assert np.allclose(schur_complement(b), g22)


def test_schur_singular_without_fallback():
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    b = covariance_blocks(A, np.eye(2), np.eye(2))
    with pytest.raises(SingularityError) as info:
        schur_complement(b, allow_pinv=False)
    assert info.value.rank == 1


def test_optimal_head_examples():
    A_star = random_orthonormal(3, 3, 2)
    beta = np.array([1.0, -2.0, 0.5])
    assert np.allclose(optimal_head(A_star, A_star, beta, random_spd(3, 2)), beta)
    assert np.allclose(optimal_head(A_star, A_star, np.zeros(3), np.eye(3)), 0)
    mask = np.diag([1.0, 0.0])
    assert np.allclose(optimal_head(mask, np.eye(2), np.ones(2), np.eye(2)), [1, 0])


def test_eta_closed_form_examples():
    A_star = random_orthonormal(3, 3, 5)
    beta = np.array([0.3, 1.0, -1.0])
    assert eta_closed_form(A_star, A_star, beta, random_spd(3, 5)).value == pytest.approx(0, abs=1e-12)
    mask = np.diag([1.0, 0.0])
    assert eta_closed_form(mask, np.eye(2), np.ones(2), np.eye(2)).value == pytest.approx(1.0)
    # Monte-Carlo oracle for the masked case: residual of x1 + x2 given x1
    x = np.random.default_rng(0).standard_normal((10**6, 2))
    assert np.mean(x[:, 1] ** 2) == pytest.approx(1.0, rel=0.01)


def test_eta_scales_quadratically():
    A = np.random.default_rng(2).standard_normal((4, 2))
    A_star, S = random_orthonormal(4, 4, 1), random_spd(4, 1)
    beta = np.array([1.0, 0.5, -0.3, 2.0])
    base = eta_closed_form(A, A_star, beta, S).value
    assert eta_closed_form(A, A_star, 3 * beta, S).value == pytest.approx(9 * base)


def _linear_case(seed, noise=0.0, n=20000):
    d = 4
    A_star = random_orthonormal(d, d, seed)
    beta = np.random.default_rng(seed).standard_normal(d)
    cfg = LinearGenConfig((2, 2), A_star, beta, noise, n, seed, random_spd(d, seed))
    return cfg, generate_linear(cfg)


def test_eta_empirical_true_encoder_noiseless():
    cfg, ds = _linear_case(1)
    train, test = ds.split(0.5)
    enc = LinearComposite(ds.schema, cfg.A_star, np.zeros(4))
    est = eta_empirical(enc, ModalitySubset.full(ds.schema), test, train, 0.0)
    assert abs(est.value) <= 3 * est.standard_error + 1e-12
    assert est.warnings == () and est.centered


def test_eta_empirical_flags_overlap_and_uncentered():
    cfg, ds = _linear_case(2)
    enc = LinearComposite(ds.schema, cfg.A_star, np.zeros(4))
    est = eta_empirical(enc, ModalitySubset.full(ds.schema), ds, ds)
    assert est.warnings and est.label == "uncentered risk"


def test_eta_empirical_overlap_m1():
    ds = generate_overlap(OverlapConfig(w=0.8, n_samples=50000, dim=100, seed=3))
    train, test = ds.split(0.8)
    m1 = ModalitySubset.first(ds.schema, 1)
    enc = erm_linear_closed_form(train, m1, 10).model
    assert eta_empirical(enc, m1, test, train, 0.0).value == pytest.approx(12.0, rel=0.05)


def test_eta_empirical_matches_closed_form():
    cfg, ds = _linear_case(4, noise=0.25, n=10**5)
    fit = generate_linear(LinearGenConfig(cfg.dims, cfg.A_star, cfg.beta_star, 0.25, 10**4, 99, cfg.Sigma))
    N = ModalitySubset.of(ds.schema, [0])
    enc = LinearComposite(ds.schema, np.eye(4)[:, :2], np.zeros(2))
    emp = eta_empirical(enc, N, ds, fit, 0.25)
    exact = eta_closed_form(enc.effective_matrix(N), cfg.A_star, cfg.beta_star, cfg.covariance)
    assert emp.value == pytest.approx(exact.value, rel=0.02, abs=1e-3)


def test_gamma_examples():
    a = EtaEstimate(0.7, "closed_form", oracle_risk=0.0)
    assert gamma(a, a) == 0
    with pytest.raises(InvalidInputError):
        gamma(a, EtaEstimate(0.2, "empirical", centered=False))
    with pytest.raises(InvalidInputError):
        gamma(a, EtaEstimate(0.2, "empirical", oracle_risk=0.5))


def test_gamma_overlap_pair():
    ds = generate_overlap(OverlapConfig(w=0.8, n_samples=50000, dim=100, seed=5))
    train, test = ds.split(0.8)
    etas = []
    for k in (2, 1):
        s = ModalitySubset.first(ds.schema, k)
        etas.append(eta_empirical(erm_linear_closed_form(train, s, 10).model, s, test, train, 0.0))
    assert gamma(*etas) == pytest.approx(-4.0, abs=0.6)


def test_eta_dict_round_trip():
    est = EtaEstimate(1.5, "empirical", 0.1, 0.25, True, 100, ("w",))
    back = EtaEstimate.from_dict(est.to_dict())
    assert back.value == 1.5 and back.warnings == ("w",) and back.n_eval == 100


# properties ------------------------------------------------------------------------

@given(st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 3))
@settings(max_examples=100, deadline=None)
def test_proposition_nonpositive_gamma(seed, d1, d2):
    schema = ModalitySchema((d1, d2, 1))
    d = schema.d
    A_star = random_orthonormal(d, d, seed)
    beta = np.random.default_rng(seed).standard_normal(d)
    cfg = LinearGenConfig(schema.dims, A_star, beta, 0.1, 3 * d + 2, seed, random_spd(d, seed))
    ds = generate_linear(cfg)
    full = ModalitySubset.full(schema)
    fit_M = erm_linear_closed_form(ds, full)
    assert np.allclose(fit_M.model.A.T @ fit_M.model.A, np.eye(d), atol=1e-10)
    eta_M = eta_closed_form(fit_M.model.A, A_star, beta, cfg.covariance)
    assert eta_M.value < 1e-8
    N = ModalitySubset.of(schema, [seed % 3])
    fit_N = erm_linear_closed_form(ds, N)
    eta_N = eta_closed_form(fit_N.model.effective_matrix(N), A_star, beta, cfg.covariance)
    assert eta_N.value >= -1e-10
    assert gamma(eta_M, eta_N) <= 1e-8


@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 4))
@settings(max_examples=100, deadline=None)
def test_schur_complement_psd(seed, n, n2):
    rng = np.random.default_rng(seed)
    d = 5
    A = rng.standard_normal((d, n))
    if seed % 2:
        A[:, 0] = 0.0  # rank-deficient encoders go through the pseudo-inverse
    B = rng.standard_normal((d, n2))
    sch = schur_complement(covariance_blocks(A, B, random_spd(d, seed)))
    assert np.allclose(sch, sch.T)
    scale = max(1.0, np.abs(sch).max())
    assert np.linalg.eigvalsh(sch).min() >= -1e-8 * scale
