import json
import math

import numpy as np
import pytest
from scipy.linalg import eigh, eigh_tridiagonal

from gibbslab.harness import auto_bounds
from gibbslab.isoperimetry import (
    BOUNDARY_RATIO_MAX,
    dirichlet_form,
    divergence,
    gaussian_grid_measure,
    generator_spectral_gap,
    grid_measure,
    grid_measure_from_log_density,
    histogram,
    local_poincare,
    moments,
    payne_weinberger_bound,
    symmetrized_operator,
    variance,
    variance_decay_rate,
)
from gibbslab.potentials import CATALOGUE_NAMES, catalogue
from gibbslab.samplers import GaussianInit, SamplerConfig, Trajectory, run_gld


def ou_grid(beta, n=4096, c=1.0):
    s = 8 / math.sqrt(beta * c)
    return grid_measure(catalogue("quadratic", {"c": c}), beta, [[-s, s]], n)


def dense_generalized_gap(gm):
    """Independent route: raw node weights, geometric-mean face weights, dense K v = lambda M v."""
    x = gm.axes[0]
    h = x[1] - x[0]
    rho = np.exp(gm.log_density - gm.log_density.max())
    c = np.ones(len(x))
    c[[0, -1]] = 0.5
    M = np.diag(c * rho)
    K = np.zeros((len(x), len(x)))
    for i in range(len(x) - 1):
        k = math.sqrt(rho[i] * rho[i + 1]) / h**2
        K[i, i] += k
        K[i + 1, i + 1] += k
        K[i, i + 1] -= k
        K[i + 1, i] -= k
    return eigh(K, M, eigvals_only=True)[1]


# -- grid measures --------------------------------------------------------------------

def test_grid_measure_normalized_and_symmetric(pl_sine):
    gm = grid_measure(pl_sine, 3.0, [[-6, 6]], 1001)
    assert abs(gm.weights.sum() - 1) <= 1e-12
    assert np.all(gm.weights >= 0)
    assert np.allclose(gm.weights, gm.weights[::-1], rtol=1e-12, atol=0)
    assert np.allclose(np.diff(gm.axes[0]), gm.spacing[0])
    assert np.allclose(np.exp(gm.log_weights), gm.weights, rtol=1e-12)


def test_grid_measure_gaussian_moments(quad1):
    gm = grid_measure(quad1, 4.0, [[-4, 4]], 2048)
    x = gm.axes[0]
    mean = np.sum(gm.weights * x)
    assert abs(mean) <= 1e-12
    assert np.sum(gm.weights * (x - mean) ** 2) == pytest.approx(0.25, rel=0.005)


def test_grid_measure_boundary_gate(quad1):
    with pytest.raises(ValueError, match="widen"):
        grid_measure(quad1, 1.0, [[-2, 2]], 101)
    gm = grid_measure(quad1, 1.0, [[-7, 7]], 101)
    assert gm.boundary_ratio <= BOUNDARY_RATIO_MAX
    assert gm.boundary_ratio == pytest.approx(math.exp(-24.5), rel=1e-12)


def test_grid_measure_preconditions(quad1):
    with pytest.raises(ValueError):
        grid_measure(quad1, 1.0, [[1, 9]], 101)
    with pytest.raises(ValueError):
        grid_measure(catalogue("quadratic", {"dim": 2}), 1.0, [[-9, 9]] * 2, 600)
    with pytest.raises(ValueError):
        grid_measure(quad1, 1.0, [[-9, 9], [-9, 9]], 11)
    with pytest.raises(ValueError):
        grid_measure(quad1, 0.0, [[-9, 9]], 11)


def test_grid_measure_csv(quad1, tmp_path):
    gm = grid_measure(quad1, 1.0, [[-8, 8]], 5)
    text = gm.to_csv(tmp_path / "g.csv")
    rows = text.splitlines()
    assert rows[0] == "x0,weight,log_density" and len(rows) == 6
    assert float(rows[3].split(",")[1]) == gm.weights[2]


# -- spectral gap ---------------------------------------------------------------------------

@pytest.mark.parametrize("beta", [1.0, 4.0, 16.0])
def test_ou_spectral_gap(beta):
    r = generator_spectral_gap(ou_grid(beta), tol=1e-10)
    assert r.c_pi == pytest.approx(1 / beta, rel=0.02)
    assert r.c_pi * r.lambda1 == pytest.approx(1.0, rel=1e-15)
    assert r.residual <= 1e-10


@pytest.mark.parametrize("name,beta", [("quadratic", 2.0), ("pl_sine", 1.5), ("double_well", 3.0), ("dissipative_quartic", 4.0)])
def test_gap_matches_dense_generalized_eigensolver(name, beta):
    p = catalogue(name)
    gm = grid_measure(p, beta, auto_bounds(p, beta), 301)
    assert generator_spectral_gap(gm).lambda1 == pytest.approx(dense_generalized_gap(gm), rel=1e-8)


def test_gap_matches_tridiagonal_eigensolver(pl_sine):
    gm = grid_measure(pl_sine, 2.0, auto_bounds(pl_sine, 2.0), 2000)
    A, _ = symmetrized_operator(gm)
    A = A.toarray()
    ev = eigh_tridiagonal(np.diag(A), np.diag(A, 1), eigvals_only=True, select="i", select_range=(0, 1))
    assert abs(ev[0]) <= 1e-8 * ev[1]
    assert generator_spectral_gap(gm).lambda1 == pytest.approx(ev[1], rel=1e-9)


def test_gap_2d_matches_dense_and_ou():
    q = catalogue("quadratic", {"c": 1.0, "dim": 2})
    gm = grid_measure(q, 2.0, [[-6, 6], [-6, 6]], 31)
    A, _ = symmetrized_operator(gm)
    ev = np.linalg.eigvalsh(A.toarray())
    r = generator_spectral_gap(gm)
    assert r.lambda1 == pytest.approx(ev[1], rel=1e-8)
    fine = generator_spectral_gap(grid_measure(q, 2.0, [[-6, 6], [-6, 6]], 200))
    assert fine.c_pi == pytest.approx(0.5, rel=0.02)


def test_constant_mode_in_kernel(pl_sine):
    gm = grid_measure(pl_sine, 2.0, [[-8, 8]], 501)
    assert dirichlet_form(gm, np.ones(gm.shape)) == 0.0
    A, u0 = symmetrized_operator(gm)
    assert np.linalg.norm(A @ u0) <= 1e-10 * np.linalg.norm(A.diagonal())


def test_double_well_metastability(double_well):
    c = [generator_spectral_gap(grid_measure(double_well, b, [[-2.5, 2.5]], 4096)).c_pi for b in (10.0, 30.0)]
    assert c[1] / c[0] >= 10


def test_variational_consistency(rng):
    for name, beta in (("pl_sine", 2.0), ("double_well", 4.0)):
        p = catalogue(name)
        gm = grid_measure(p, beta, auto_bounds(p, beta), 801)
        r = generator_spectral_gap(gm)
        for _ in range(20):
            f = rng.standard_normal(gm.shape)
            f -= np.sum(gm.weights * f)
            assert variance(gm, f) <= r.c_pi * dirichlet_form(gm, f) * (1 + 1e-10)
        assert variance(gm, r.eigenvector) == pytest.approx(r.c_pi * dirichlet_form(gm, r.eigenvector), rel=1e-8)


@pytest.mark.parametrize("name", CATALOGUE_NAMES)
@pytest.mark.parametrize("beta", [1.0, 8.0, 32.0])
def test_grid_refinement_stable(name, beta):
    p = catalogue(name)
    b = auto_bounds(p, beta)
    c1 = generator_spectral_gap(grid_measure(p, beta, b, 1024)).c_pi
    c2 = generator_spectral_gap(grid_measure(p, beta, b, 2048)).c_pi
    assert abs(c2 - c1) <= 0.01 * c2


def test_nonconvergence_raises(pl_sine):
    gm = grid_measure(pl_sine, 2.0, [[-8, 8]], 501)
    with pytest.raises(RuntimeError, match="converge"):
        generator_spectral_gap(gm, tol=1e-30, max_iter=3)


def test_spectral_result_json():
    r = generator_spectral_gap(ou_grid(1.0, 512))
    d = json.loads(r.to_json())
    assert set(d) == {"c_pi", "grid", "iterations", "lambda1", "residual"}
    assert d["lambda1"] == r.lambda1 and d["grid"]["nodes"] == [512]


# -- local Poincare ---------------------------------------------------------------------------

@pytest.mark.parametrize("a", [0.5, 1.0, 3.0])
def test_local_uniform_interval(a):
    x = np.linspace(-2 * a, 2 * a, 4001)
    gm = grid_measure_from_log_density((x,), np.zeros_like(x))
    r = local_poincare(gm, [0.0], a)
    assert r.c_pi == pytest.approx((2 * a / math.pi) ** 2, rel=0.02)


def test_local_log_concave_below_payne_weinberger(quad1, pl_sine):
    for p, beta, radius in ((quad1, 0.5, 2.0), (pl_sine, 1.0, 0.5)):
        gm = grid_measure(p, beta, auto_bounds(p, beta), 4001)
        r = local_poincare(gm, p.minimizer, radius)
        assert r.c_pi <= payne_weinberger_bound(2 * radius)


def test_local_full_radius_matches_global(pl_sine):
    gm = grid_measure(pl_sine, 3.0, [[-6, 6]], 1501)
    g = generator_spectral_gap(gm)
    l = local_poincare(gm, [0.0], 100.0)
    assert abs(l.lambda1 - g.lambda1) <= 1e-10 * g.lambda1
    q = catalogue("quadratic", {"dim": 2})
    gm2 = grid_measure(q, 1.0, [[-7, 7], [-7, 7]], 41)
    assert abs(local_poincare(gm2, [0.0, 0.0], 50.0).lambda1 - generator_spectral_gap(gm2).lambda1) <= 1e-10


def test_local_2d_disc_uniform():
    x = np.linspace(-1.2, 1.2, 241)
    gm = grid_measure_from_log_density((x, x), np.zeros((241, 241)))
    r = local_poincare(gm, [0.0, 0.0], 1.0)
    # first nonzero Neumann eigenvalue of the unit disc is j'_{1,1}^2
    assert r.lambda1 == pytest.approx(1.8411837813406593**2, rel=0.03)


def test_local_too_few_nodes(quad1):
    gm = grid_measure(quad1, 1.0, [[-8, 8]], 101)
    with pytest.raises(ValueError, match="too few"):
        local_poincare(gm, [0.0], 0.2)


# -- moments -------------------------------------------------------------------------------------

@pytest.mark.parametrize("beta", [1.0, 4.0, 40.0])
def test_gaussian_moments(beta):
    M, S, mF = moments(ou_grid(beta))
    assert S == pytest.approx(1 / beta, rel=0.01)
    assert mF == pytest.approx(1 / (2 * beta), rel=0.01)
    assert M == pytest.approx(math.sqrt(2 / (math.pi * beta)), rel=0.01)


def test_mean_f_scaling_d_over_beta():
    for beta in (4.0, 40.0, 400.0):
        assert 0.4 <= moments(ou_grid(beta))[2] * beta <= 0.6


def test_moments_need_potential_values():
    gm = gaussian_grid_measure((np.linspace(-8, 8, 101),), 1.0)
    with pytest.raises(ValueError):
        moments(gm)


# -- divergences ----------------------------------------------------------------------------------

def test_divergence_identities(pl_sine):
    gm = grid_measure(pl_sine, 2.0, [[-8, 8]], 801)
    for kind in ("KL", "TV", "CHI2"):
        assert divergence(gm, gm, kind) <= 1e-12
    x = np.linspace(-1, 1, 11)
    p = grid_measure_from_log_density((x,), np.where(x < 0, 0.0, -np.inf))
    q = grid_measure_from_log_density((x,), np.where(x > 0, 0.0, -np.inf))
    assert divergence(p, q, "TV") == pytest.approx(1.0, abs=1e-15)
    assert divergence(p, q, "KL") == math.inf


def test_gaussian_kl_and_chi2_closed_form():
    x = np.linspace(-12, 12, 6001)
    sigma, mu = 1.3, 0.8
    p = gaussian_grid_measure((x,), sigma**2, mean=mu)
    q = gaussian_grid_measure((x,), sigma**2)
    assert divergence(p, q, "KL") == pytest.approx(mu**2 / (2 * sigma**2), rel=0.01)
    assert divergence(p, q, "CHI2") == pytest.approx(math.expm1(mu**2 / sigma**2), rel=0.01)


def test_divergence_errors(quad1):
    a = grid_measure(quad1, 1.0, [[-8, 8]], 101)
    b = grid_measure(quad1, 1.0, [[-8, 8]], 102)
    with pytest.raises(ValueError):
        divergence(a, b, "TV")
    with pytest.raises(ValueError):
        divergence(a, a, "HELLINGER")


# -- histograms ------------------------------------------------------------------------------------

def fake_traj(states, stride=1):
    states = np.asarray(states, dtype=float)
    return Trajectory(states, None, "fake", stride=stride)


def test_histogram_degenerate_and_normalized(quad1):
    gm = grid_measure(quad1, 4.0, [[-3.5, 3.5]], 57)
    h = histogram(fake_traj(np.full((10, 3, 1), 0.51)), gm)
    assert h.weights.sum() == 1.0
    assert np.count_nonzero(h.weights) == 1
    assert gm.axes[0][np.argmax(h.weights)] == pytest.approx(0.5)


def test_histogram_out_of_range(quad1):
    gm = grid_measure(quad1, 4.0, [[-3.5, 3.5]], 57)
    states = np.zeros((10, 100, 1))
    states[6:, :5] = 9.0
    with pytest.raises(ValueError, match="outside"):
        histogram(fake_traj(states), gm)
    # burn-in drops the first half, ties included
    states = np.zeros((11, 4, 1))
    states[:5] = 9.0
    assert histogram(fake_traj(states), gm).weights.sum() == 1.0


def test_histogram_of_gld_close_to_gibbs(quad1):
    tr = run_gld(quad1, SamplerConfig(beta=4.0, eta=1e-3, steps=100_000, chains=64, seed=0, stride=10))
    gm = grid_measure(quad1, 4.0, [[-3.5, 3.5]], 57)
    h = histogram(tr, gm)
    assert abs(h.weights.sum() - 1) <= 1e-12
    assert divergence(h, gm, "TV") <= 0.05


# -- variance decay ----------------------------------------------------------------------------------

def test_variance_decay_ou(quad1):
    tr = run_gld(quad1, SamplerConfig(beta=4.0, eta=1e-3, steps=3000, chains=4096, seed=1), init=GaussianInit(1, 1.0, seed=5))
    rate = variance_decay_rate(quad1, 4.0, 1e-3, lambda s: s[..., 0], tr)
    assert rate == pytest.approx(8.0, rel=0.15)


def test_variance_decay_constant_observable(quad1):
    tr = run_gld(quad1, SamplerConfig(beta=4.0, eta=1e-3, steps=200, chains=64, seed=1))
    with pytest.raises(ValueError, match="noise floor"):
        variance_decay_rate(quad1, 4.0, 1e-3, lambda s: np.ones(s.shape[:-1]), tr)


def test_variance_decay_window_hits_floor(quad1):
    tr = run_gld(quad1, SamplerConfig(beta=4.0, eta=1e-3, steps=3000, chains=512, seed=2), init=GaussianInit(1, 1.0, seed=5))
    with pytest.raises(ValueError, match="noise floor"):
        variance_decay_rate(quad1, 4.0, 1e-3, lambda s: s[..., 0], tr, window=(0.0, 3.0))
