import json
import math

import numpy as np
import pytest

from gibbslab.lyapunov_certificates import (
    BumpProfile,
    CertificateError,
    CertificateKind,
    LyapunovSpec,
    bump_eval,
    bump_grad,
    c_prime,
    cert_general,
    cert_lsi_general,
    cert_lsi_pl,
    cert_pi_kl,
    cert_pi_pl,
    estimate_ball_sups,
    init_divergence_bound,
    l_tilde,
    p_tilde,
    phi_tilde,
    pl_lyapunov_spec,
    poly_checks,
    poly_h,
    poly_h3,
    profile,
    profile_derivative,
    recompute,
)
from gibbslab.potentials import catalogue, quadratic_growth_constants


def shell_points(bp, n, rng, lo=0.0, hi=1.0):
    u = rng.standard_normal((n, bp.dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return bp.center + (bp.R + rng.uniform(lo, hi, size=(n, 1))) * u


# -- bump construction -----------------------------------------------------------

def test_bump_regions_exact():
    bp = BumpProfile(np.array([0.5, -1.0]), 2.0)
    d = np.array([1.0, 0.0])
    assert bump_eval(bp, bp.center + 1.0 * d) == 0.0
    assert bump_eval(bp, bp.center + 4.0 * d) == 1.0
    assert bump_eval(bp, bp.center + 2.0 * d) == 0.0
    assert bump_eval(bp, bp.center + 3.0 * d) == 1.0
    assert np.array_equal(bump_grad(bp, bp.center + 1.0 * d), np.zeros(2))
    assert np.array_equal(bump_grad(bp, bp.center + 3.5 * d), np.zeros(2))


def test_profile_half_value():
    want = math.exp(-4) / (math.exp(-4) + math.exp(-4 / 3))
    assert profile(0.5) == pytest.approx(want, rel=1e-14)
    assert profile(0.5) == pytest.approx(0.0650, abs=1e-4)


def test_bump_in_unit_interval_and_continuous(rng):
    bp = BumpProfile(np.zeros(2), 1.0)
    w = rng.uniform(-3, 3, size=(5000, 2))
    v = bump_eval(bp, w)
    assert np.all((v >= 0) & (v <= 1))
    for radius in (bp.R, bp.R + 1):
        u = rng.standard_normal((200, 2))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        a = bump_eval(bp, (radius - 5e-7) * u)
        b = bump_eval(bp, (radius + 5e-7) * u)
        assert np.max(np.abs(a - b)) <= 1e-4


def test_p_tilde_limits_and_grid():
    assert p_tilde(1e-3) == 0.0
    assert p_tilde(0.5) > 0
    x = np.linspace(1e-3, 1 - 1e-3, 10_000)
    assert np.min(p_tilde(x)) >= -1e-12


def test_true_profile_derivative_nonnegative_and_matches_quotient_rule():
    x = np.linspace(0.05, 0.95, 1001)
    d = profile_derivative(x)
    assert np.all(d >= 0)
    u, v = np.exp(-1 / x**2), np.exp(-1 / (1 - x**2))
    du, dv = u * 2 / x**3, -v * 2 * x / (1 - x**2) ** 2
    assert np.allclose(d, (du * v - u * dv) / (u + v) ** 2, rtol=1e-12, atol=0)


def test_bump_grad_finite_differences(rng):
    bp = BumpProfile(np.array([0.2, -0.4]), 1.5)
    worst = 0.0
    for w in shell_points(bp, 100, rng, 0.15, 0.9):
        g = bump_grad(bp, w)
        fd = np.empty(2)
        for i in range(2):
            e = np.zeros(2)
            e[i] = 1e-6
            fd[i] = (bump_eval(bp, w + e) - bump_eval(bp, w - e)) / 2e-6
        worst = max(worst, np.linalg.norm(fd - g) / np.linalg.norm(g))
    assert worst <= 1e-6


def test_bump_grad_radially_aligned(rng):
    bp = BumpProfile(np.array([1.0, 1.0]), 1.0)
    w = shell_points(bp, 1000, rng)
    g = bump_grad(bp, w)
    assert np.all(np.sum(g * (w - bp.center), axis=1) >= 0)


def test_bump_profile_requires_R_at_least_one():
    with pytest.raises(ValueError):
        BumpProfile(np.zeros(1), 0.5)


# -- polynomials -------------------------------------------------------------------

def test_polynomial_values():
    assert poly_h(0.5) == 0.09375
    assert poly_h(1.0) == 1.0
    x = np.linspace(0.5, 1.0, 10_000)
    assert np.min(poly_h(x)) >= 0
    rep = poly_checks()
    assert rep.h_half == 0.09375 and rep.h_one == 1.0
    assert abs(rep.h3_argmin - (1 - math.sqrt(7 / 30))) <= 1e-3
    assert rep.h3_min == pytest.approx(float(poly_h3(rep.h3_argmin)))
    assert rep.h3_min > 0
    assert rep.p_tilde_min >= -1e-12


# -- Lyapunov data ---------------------------------------------------------------------

def quadratic_spec(R=1.0, r1=1.0):
    return LyapunovSpec(
        phi=lambda w: np.sum(np.asarray(w) ** 2, axis=-1),
        phi_grad=lambda w: 2 * np.asarray(w),
        g=lambda x: x,
        rho=lambda x: 2.0 + 2.0 * math.sqrt(max(x, 0.0)),
        g_tail=(1.0, 0.5),
        r1=r1,
        r2=1.0,
        R=R,
    )


def test_phi_tilde_regions(rng):
    spec = quadratic_spec(R=1.0, r1=1.0)
    bp = BumpProfile(np.zeros(2), 1.0)
    assert phi_tilde(spec, bp, 3.0, np.zeros(2)) == 0.0
    w = np.array([3.0, 0.0])
    assert phi_tilde(spec, bp, 3.0, w) == 3.0**2 / 2 + 3.0
    inner = np.array([0.6, 0.3])
    assert phi_tilde(spec, bp, 3.0, inner) == float(spec.phi(inner))
    pts = shell_points(bp, 500, rng)
    val = phi_tilde(spec, bp, 4.0, pts)
    phi2 = np.sum(pts**2, axis=1) / 2 + 4.0
    assert np.all(val >= np.minimum(spec.phi(pts), phi2) - 1e-12)


def test_ball_sups():
    spec = quadratic_spec()
    bp = BumpProfile(np.zeros(2), 1.0)
    s = estimate_ball_sups(spec, bp, 4096)
    assert s.Mprime == pytest.approx(4.0, rel=0.01)
    assert math.isfinite(s.B_bump) and s.B_bump > 0
    const = LyapunovSpec(lambda w: np.full(np.shape(w)[:-1], 2.5), lambda w: 0 * w, lambda x: x, lambda x: 1.0, (1, 1), 1, 1, 1)
    assert estimate_ball_sups(const, bp, 2000).Mprime == 2.5
    with pytest.raises(ValueError):
        estimate_ball_sups(spec, bp, 10)


def test_pl_spec_monotone(pl_sine):
    assert pl_lyapunov_spec(pl_sine).check_monotone()


# -- closed-form certificates -------------------------------------------------------------

def test_cert_pi_pl_worked_example():
    c = cert_pi_pl(4, 2, 1, 0.1, 1, 100)
    assert c.bound == 0.23
    assert c.kind is CertificateKind.PI_PL
    assert c.beta_threshold == 2 * (1 + 0.5) * 1.5


def test_cert_pi_pl_gate():
    thr = cert_pi_pl(4, 2, 1, 0.1, 1, 100).beta_threshold
    cert_pi_pl(4, 2, 1, 0.1, 1, thr)
    with pytest.raises(CertificateError, match="requires beta"):
        cert_pi_pl(4, 2, 1, 0.1, 1, thr * (1 - 1e-12))
    with pytest.raises(ValueError):
        cert_pi_pl(0, 2, 1, 0.1, 1, 100)


def test_cert_pi_pl_monotone_in_beta_and_c_local():
    bounds = [cert_pi_pl(4, 2, 1, 0.0, 1, b).bound for b in (10, 100, 1e3, 1e6)]
    assert all(a > b for a, b in zip(bounds, bounds[1:])) and bounds[-1] < 1e-5
    assert cert_pi_pl(4, 2, 1, 0.2, 1, 50).bound > cert_pi_pl(4, 2, 1, 0.1, 1, 50).bound
    assert cert_pi_pl(4, 2, 1, 0.1, 1, 1e12).bound == pytest.approx(0.2, rel=1e-9)


def test_cert_pi_kl_example_and_casework():
    c = cert_pi_kl(9, 1 / 3, 6, 1, 0.05, 1, 200)
    a = 1 + 6 / 9
    assert c.bound == pytest.approx(2 * (a / 200 + 0.05), rel=1e-15)
    assert c.details["c_kl"] == pytest.approx(2 / 3)
    assert c.beta_threshold == pytest.approx(2 * (1 + 2 / 3) * a)
    zero = cert_pi_kl(4, 0.0, 2, 1, 0.1, 1, 100)
    assert zero.details["theta_endpoint"] is True
    assert zero.bound == pytest.approx(2 * ((1 / 100) * (1 + 2 / 4) + 0.1))
    with pytest.raises(ValueError):
        cert_pi_kl(4, 1.5, 2, 1, 0.1, 1, 100)


def test_cert_lsi_pl():
    c = cert_lsi_pl(4, 2, 1, 0.1, 1, 100, 0.25, 0.0)
    det = c.details
    assert det["m"] == 0.5 and det["b"] == 0.0 and det["K"] == 2.0
    assert det["kappa"] == 2.0 and det["gamma_lyap"] == 0.5 * 4 * 99
    assert det["delta"] == 1 / math.sqrt(det["gamma_lyap"])
    assert det["C1"] <= det["C1_bound"]
    assert det["C_PI"] == 0.23
    assert c.bound >= det["C_PI"]
    assert c.bound >= det["composed"] and det["dominates_composition"]
    degenerate = cert_lsi_pl(4, 2, 1, 0.1, 1, 100, 0.0, 0.0)
    assert math.isfinite(degenerate.bound)
    with pytest.raises(CertificateError):
        cert_lsi_pl(4, 2, 1, 0.1, 1, 2.0, 0.25, 0.0)


def test_c_prime_example():
    assert c_prime(1, 1, 1, 1, 1, 1) == 40.0


def test_cert_general_matches_pl_structure(quad2):
    spec = pl_lyapunov_spec(quad2)
    bp = BumpProfile(np.zeros(1), spec.R)
    sups = estimate_ball_sups(spec, bp)
    beta = 1e5
    c = cert_general(spec, quad2, sups, 1.0, 0.01, 1, beta)
    Lt = c.details["L_tilde"]
    assert Lt == l_tilde(sups.Mprime, sups.Lprime, sups.B_bump, spec.r1, spec.R, spec.g_tail[1])[0]
    lam = quad2.pl_lambda
    assert c.bound == pytest.approx(2 * 0.01 + (2 / beta) * (1 + Lt / (lam * 1.0)), rel=1e-15)
    pl_like = cert_pi_pl(lam, Lt, 1.0, 0.01, 1, beta)
    assert c.bound == pytest.approx(pl_like.bound, rel=1e-14)
    assert Lt >= max(sups.Lprime, 1 / spec.r1, 2 * spec.g_tail[1], 1)


def test_cert_general_guards(quad2):
    spec = pl_lyapunov_spec(quad2)
    bp = BumpProfile(np.zeros(1), spec.R)
    sups = estimate_ball_sups(spec, bp)
    zero_g = LyapunovSpec(spec.phi, spec.phi_grad, lambda x: 0.0, spec.rho, spec.g_tail, spec.r1, spec.r2, spec.R)
    with pytest.raises(ValueError, match="g\\(l_b\\)"):
        cert_general(zero_g, quad2, sups, 1.0, 0.01, 1, 1e6)
    with pytest.raises(ValueError):
        cert_general(spec, quad2, None, 1.0, 0.01, 1, 1e6)
    with pytest.raises(CertificateError):
        cert_general(spec, quad2, sups, 1.0, 0.01, 1, 10.0)


def test_cert_lsi_general(quad2):
    spec = pl_lyapunov_spec(quad2)
    sups = estimate_ball_sups(spec, BumpProfile(np.zeros(1), spec.R))
    qg = quadratic_growth_constants(quad2)
    c = cert_general(spec, quad2, sups, 1.0, 0.01, 1, 1e5, S=1e-5, quad_growth=qg)
    lsi = cert_lsi_general(spec, quad2, sups, 1.0, 0.01, 1, 1e5, 1e-5, qg)
    assert lsi.kind is CertificateKind.LSI_GEN
    assert lsi.bound == c.details["lsi_bound"]
    assert lsi.beta_threshold >= max(2.0, 4 / (spec.r1**2 * qg[0]), c.beta_threshold)
    assert c.details["gamma_lyap"] == 1e5 * qg[0] / 2


def test_init_divergence_bound(quad1):
    c = init_divergence_bound(quad1, 1.0, 1.0, 1.0)
    assert c.bound == pytest.approx(1 + 0 + 2 + 0.5 * math.log(4 * 1.5), rel=1e-15)
    vals = [init_divergence_bound(quad1, b, 1.0, 1.0).bound for b in (1, 2, 5, 10, 100)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        init_divergence_bound(quad1.with_constants(holder=None), 1.0, 1.0, 1.0)


# -- determinism and serialization ------------------------------------------------------------

def all_certificates():
    q = catalogue("quadratic", {"c": 2.0})
    spec = pl_lyapunov_spec(q)
    sups = estimate_ball_sups(spec, BumpProfile(np.zeros(1), spec.R))
    qg = quadratic_growth_constants(q)
    return [
        cert_pi_pl(4, 2, 1, 0.1, 1, 100),
        cert_pi_kl(9, 1 / 3, 6, 1, 0.05, 1, 200),
        cert_lsi_pl(4, 2, 1, 0.1, 1, 100, 0.25, 0.0),
        cert_general(spec, q, sups, 1.0, 0.01, 1, 1e5, S=1e-5, quad_growth=qg),
        cert_lsi_general(spec, q, sups, 1.0, 0.01, 1, 1e5, 1e-5, qg),
        init_divergence_bound(catalogue("quadratic"), 10.0, 1.0, 0.25),
    ]


@pytest.mark.parametrize("cert", all_certificates(), ids=lambda c: c.kind.value)
def test_recompute_bit_identical(cert):
    again = recompute(cert)
    assert again.bound == cert.bound and again.beta_threshold == cert.beta_threshold
    assert again.details == cert.details
    assert cert.bound >= 0


@pytest.mark.parametrize("cert", all_certificates(), ids=lambda c: c.kind.value)
def test_certificate_json(cert):
    text = cert.to_json()
    d = json.loads(text)
    assert list(d) == ["beta_threshold", "bound", "details", "inputs", "kind"]
    assert d["kind"] == cert.kind.value
    assert float(d["bound"]) == cert.bound
    for k, v in cert.inputs.items():
        assert d["inputs"][k] == v
