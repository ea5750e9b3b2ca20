"""Property-based checks of the invariants each module promises."""
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from gibbslab.harness import parse_config
from gibbslab.io import fmt_float
from gibbslab.isoperimetry import divergence, grid_measure, grid_measure_from_log_density
from gibbslab.lyapunov_certificates import BumpProfile, bump_eval, cert_pi_pl, p_tilde, recompute
from gibbslab.potentials import catalogue, condition_residual
from gibbslab.samplers import SamplerConfig, gld_step, modified_potential, rgo_sample, run_gld

QUAD = catalogue("quadratic", {"c": 2.0, "dim": 2})
PL_SINE = catalogue("pl_sine")
KL_POWER = catalogue("kl_power")

finite = st.floats(-50, 50, allow_nan=False)
pos = st.floats(1e-3, 1e3)
prop = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@prop
@given(st.lists(finite, min_size=2, max_size=2), st.lists(finite, min_size=2, max_size=2),
       st.lists(finite, min_size=2, max_size=2), st.floats(-3, 3), pos, st.floats(1e-4, 0.1))
def test_gld_step_affine(w, n1, n2, a, beta, eta):
    w, n1, n2 = map(np.array, (w, n1, n2))
    mixed = gld_step(QUAD, beta, eta, w, a * n1 + (1 - a) * n2)
    combo = a * gld_step(QUAD, beta, eta, w, n1) + (1 - a) * gld_step(QUAD, beta, eta, w, n2)
    assert np.allclose(mixed, combo, rtol=1e-9, atol=1e-9 * (1 + np.abs(combo).max()))
    assert np.array_equal(gld_step(QUAD, beta, eta, np.zeros(2), np.zeros(2)), np.zeros(2))


@prop
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_quadratic_pl_identity(w):
    w = np.array(w)
    # |grad F|^2 = 2 (2c) F for F = c|w|^2
    assert abs(condition_residual(QUAD, "PL", w)) <= 1e-9 * (1 + QUAD.value(w))


@prop
@given(st.floats(-10, 10).filter(lambda x: abs(x) > 1e-3))
def test_kl_power_residual_zero(x):
    r = condition_residual(KL_POWER, "KL", np.array([x]))
    assert abs(r) <= 1e-10 * (1 + abs(KL_POWER.gradient(np.array([x]))[0]) ** 2)


@prop
@given(st.floats(0.05, 20), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_rgo_acceptance_never_exceeds_one(beta, wp, seed):
    h = 1.0 / (2.0 * beta * PL_SINE.smoothness_L)
    stats = {}
    x, _ = rgo_sample(PL_SINE, beta, h, np.array([wp]), seed=seed, size=16, stats=stats)
    assert stats["max_log_ratio"] <= 0.0
    assert np.all(np.isfinite(x))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**63 - 1), st.integers(1, 5))
def test_run_gld_reproducible(seed, chains):
    cfg = SamplerConfig(beta=2.0, eta=1e-2, steps=50, chains=chains, seed=seed)
    a, b = run_gld(PL_SINE, cfg), run_gld(PL_SINE, cfg)
    assert a.states.tobytes() == b.states.tobytes()


@prop
@given(st.floats(0.5, 10), st.floats(0.1, 1.0), st.floats(1.0, 5.0), st.floats(0, 0.999))
def test_modified_potential_unchanged_inside_ball(beta, gamma, R, frac):
    q = modified_potential(PL_SINE, beta, gamma, R)
    for s in (-1, 1):
        w = np.array([s * frac * R])
        assert q.value(w) == PL_SINE.value(w)
        assert np.array_equal(q.gradient(w), PL_SINE.gradient(w))


@prop
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.floats(1.0, 4.0))
def test_bump_in_unit_interval(w, R):
    v = bump_eval(BumpProfile(np.zeros(2), R), np.array(w))
    assert 0.0 <= v <= 1.0
    r = math.hypot(*w)
    if r <= R:
        assert v == 0.0
    elif r >= R + 1:
        assert v == 1.0


@prop
@given(st.floats(1e-6, 1 - 1e-6))
def test_printed_profile_derivative_nonnegative(x):
    assert p_tilde(x) >= -1e-12


@prop
@given(st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0.01, 10), st.floats(0, 10), st.integers(1, 20),
       st.floats(1.0, 100.0), st.floats(0.0, 1.0))
def test_cert_pi_pl_invariants(lam, L, l_b, C_local, d, factor, dc):
    thr = 2 * (d + 2 / lam) * (1 + L / (lam * l_b))
    beta = factor * thr * (1 + 1e-12)
    c = cert_pi_pl(lam, L, l_b, C_local, d, beta)
    assert c.bound >= 2 * C_local >= 0
    rec = recompute(c)
    assert rec.bound == c.bound and rec.beta_threshold == c.beta_threshold
    # strict monotonicity, wherever the change exceeds float resolution
    ulp = 4 * math.ulp(c.bound)
    if 2 * dc > ulp:
        assert cert_pi_pl(lam, L, l_b, C_local + dc, d, beta).bound > c.bound
    hotter = cert_pi_pl(lam, L, l_b, C_local, d, 2 * beta)
    assert 2 * C_local <= hotter.bound <= c.bound
    if c.bound - 2 * C_local > 2 * ulp:
        assert hotter.bound < c.bound


@prop
@given(st.lists(st.floats(-30, 0), min_size=4, max_size=40), st.lists(st.floats(-30, 0), min_size=4, max_size=40))
def test_kl_nonnegative_and_zero_iff_equal(a, b):
    n = min(len(a), len(b))
    x = np.linspace(0, 1, n)
    p = grid_measure_from_log_density((x,), np.array(a[:n]))
    q = grid_measure_from_log_density((x,), np.array(b[:n]))
    assert divergence(p, q, "KL") >= 0
    assert divergence(p, p, "KL") <= 1e-12
    assert 0 <= divergence(p, q, "TV") <= 1


@prop
@given(st.floats(0.1, 50), st.integers(3, 3000), st.floats(1.0, 3.0))
def test_grid_weights_normalized(beta, n, widen):
    s = widen * 8 / math.sqrt(beta)
    gm = grid_measure(catalogue("quadratic"), beta, [[-s, s]], n)
    assert abs(gm.weights.sum() - 1) <= 1e-12
    assert np.all(gm.weights >= 0)
    assert np.allclose(np.diff(gm.axes[0]), gm.spacing[0], rtol=1e-9)


@prop
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_format_round_trips(x):
    assert float(fmt_float(x)) == x


@prop
@given(st.lists(st.floats(1e-3, 1e4), min_size=1, max_size=6), st.integers(0, 2**31), st.integers(3, 4096))
def test_config_round_trip(betas, seed, n):
    cfg = parse_config({"kind": "SPECTRAL", "potential": {"name": "pl_sine"}, "betas": betas, "seed": seed,
                        "grid": {"n": n}})
    again = parse_config(cfg.to_json())
    assert again == cfg and again.to_json() == cfg.to_json()
