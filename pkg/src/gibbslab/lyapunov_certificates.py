"""Bump-function splicing of Lyapunov functions and certified functional-inequality constants.

Two halves live here.

*Constructions.* The radial bump chi interpolates from 0 on B(w*, R) to 1
outside B(w*, R + 1) through the profile

    chi~(x) = u / (u + v),   u = exp(-1/x^2),   v = exp(-1/(1 - x^2)),

evaluated as ``expit(log u - log v)`` so it stays exact near both ends.
Its true derivative is ``chi~(1 - chi~) (2/x^3 + 2x/(1-x^2)^2)``; the
two-term closed form :func:`p_tilde` is kept separately because it is the
expression whose nonnegativity reduces to the polynomial ``h``.

*Certificates.* Every ``cert_*`` function packs its arguments into an
``inputs`` map and evaluates a pure formula of that map, so
:func:`recompute` can reproduce any certificate bit for bit.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.special import expit

from .io import dumps_json
from .potentials import Potential

__all__ = [
    "BumpProfile",
    "LyapunovSpec",
    "BallSups",
    "CertificateKind",
    "Certificate",
    "CertificateError",
    "PolyReport",
    "PROFILE_RESOLUTION",
    "profile",
    "profile_derivative",
    "profile_second_derivative",
    "p_tilde",
    "bump_eval",
    "bump_grad",
    "poly_h",
    "poly_h3",
    "poly_checks",
    "pl_lyapunov_spec",
    "phi_tilde",
    "estimate_ball_sups",
    "cert_pi_pl",
    "cert_pi_kl",
    "cert_lsi_pl",
    "cert_general",
    "cert_lsi_general",
    "init_divergence_bound",
    "recompute",
    "l_tilde",
    "c_prime",
]

PROFILE_RESOLUTION = 10_000


class CertificateError(ValueError):
    """A certificate precondition (typically a temperature threshold) failed."""


# ---------------------------------------------------------------------------
# bump profile


@dataclass(frozen=True)
class BumpProfile:
    center: np.ndarray
    R: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        if not self.R >= 1.0:
            raise ValueError(f"inner radius R must be >= 1, got {self.R}")

    @property
    def dim(self) -> int:
        return self.center.shape[0]


def _z(x):
    # log u - log v
    return -1.0 / (x * x) + 1.0 / (1.0 - x * x)


def _dz(x):
    return 2.0 / x**3 + 2.0 * x / (1.0 - x * x) ** 2


def _open(x):
    x = np.asarray(x, dtype=float)
    return x, (x > 0.0) & (x < 1.0)


def profile(x):
    """chi~(x) on the real line: 0 for x <= 0, 1 for x >= 1."""
    x, inside = _open(x)
    out = np.where(x >= 1.0, 1.0, 0.0)
    xi = x[inside]
    out[inside] = expit(_z(xi))
    return out if out.ndim else float(out)


def profile_derivative(x):
    """Exact derivative of :func:`profile`; zero outside (0, 1)."""
    x, inside = _open(x)
    out = np.zeros_like(x)
    xi = x[inside]
    z = _z(xi)
    # chi~(1 - chi~) = exp(-softplus(z) - softplus(-z))
    log_s = -np.logaddexp(0.0, -z) - np.logaddexp(0.0, z)
    out[inside] = np.exp(log_s + np.log(_dz(xi)))
    return out if out.ndim else float(out)


def profile_second_derivative(x):
    x, inside = _open(x)
    out = np.zeros_like(x)
    xi = x[inside]
    z = _z(xi)
    s = expit(z)
    log_s = -np.logaddexp(0.0, -z) - np.logaddexp(0.0, z)
    dz = _dz(xi)
    d2z = -6.0 / xi**4 + 2.0 / (1.0 - xi * xi) ** 2 + 8.0 * xi * xi / (1.0 - xi * xi) ** 3
    w = np.exp(log_s + 2.0 * np.log(dz))
    out[inside] = (1.0 - 2.0 * s) * w + np.exp(log_s) * d2z
    return out if out.ndim else float(out)


def p_tilde(x):
    """The two-term closed form

        u (2/x^3) / (u + v) + u (u (2/x^3) - v 2x/(1-x^2)^2) / (u + v)^2

    computed with the shares u/(u+v), v/(u+v) in log space.
    """
    x, inside = _open(x)
    out = np.zeros_like(x)
    xi = x[inside]
    z = _z(xi)
    log_su = -np.logaddexp(0.0, -z)  # log u/(u+v)
    log_sv = -np.logaddexp(0.0, z)  # log v/(u+v)
    a = 2.0 / xi**3
    b = 2.0 * xi / (1.0 - xi * xi) ** 2
    su = np.exp(log_su)
    out[inside] = su * a + su * su * a - np.exp(log_su + log_sv + np.log(b))
    return out if out.ndim else float(out)


def _radial(bp: BumpProfile, w):
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        w = w.reshape(1)
    if w.shape[-1] != bp.dim:
        raise ValueError(f"expected points of dimension {bp.dim}")
    diff = w - bp.center
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    return w, diff, r


def bump_eval(bp: BumpProfile, w):
    """chi(w) = chi~(|w - w*| - R)."""
    w, _, r = _radial(bp, w)
    out = np.asarray(profile(r - bp.R), dtype=float)
    return float(out) if w.ndim == 1 else out


def bump_grad(bp: BumpProfile, w):
    """Radial gradient chi~'(|w - w*| - R) (w - w*)/|w - w*|; zero off the open shell."""
    w, diff, r = _radial(bp, w)
    mag = np.asarray(profile_derivative(r - bp.R), dtype=float)
    safe = np.where(r > 0, r, 1.0)
    return (mag / safe)[..., None] * diff


# ---------------------------------------------------------------------------
# polynomial certificates for the profile


_H = np.array([-6.0, 36.0, -69.0, 65.0, -33.0, 9.0, -1.0])
_H3 = np.array([-120.0, 360.0, -276.0, 65.0])


def poly_h(x):
    return np.polyval(_H, x)


def poly_h3(x):
    return np.polyval(_H3, x)


@dataclass(frozen=True)
class PolyReport:
    grid_points: int
    h_min: float
    h_argmin: float
    h3_min: float
    h3_argmin: float
    h_half: float
    h_one: float
    p_tilde_min: float
    p_tilde_argmin: float


def poly_checks(n: int = PROFILE_RESOLUTION) -> PolyReport:
    """Minima of h and h3 on a uniform grid of [1/2, 1], and of p~ on (0, 1)."""
    x = np.linspace(0.5, 1.0, n)
    h = poly_h(x)
    h3 = poly_h3(x)
    t = np.linspace(1e-3, 1.0 - 1e-3, n)
    pt = p_tilde(t)
    i, j, k = int(np.argmin(h)), int(np.argmin(h3)), int(np.argmin(pt))
    return PolyReport(
        grid_points=n,
        h_min=float(h[i]),
        h_argmin=float(x[i]),
        h3_min=float(h3[j]),
        h3_argmin=float(x[j]),
        h_half=float(poly_h(0.5)),
        h_one=float(poly_h(1.0)),
        p_tilde_min=float(pt[k]),
        p_tilde_argmin=float(t[k]),
    )


# ---------------------------------------------------------------------------
# Lyapunov data


@dataclass(frozen=True)
class LyapunovSpec:
    """A Lyapunov witness Phi with <grad Phi, grad F> >= g(F).

    ``rho`` bounds both |grad Phi| and the Hessian norm of Phi as a function
    of the value of Phi; ``g_tail = (m', b')`` gives g(x) >= m' x - b'.
    """

    phi: Callable
    phi_grad: Callable
    g: Callable[[float], float]
    rho: Callable[[float], float]
    g_tail: tuple[float, float]
    r1: float
    r2: float
    R: float

    def __post_init__(self):
        if min(self.r1, self.r2, self.R) <= 0:
            raise ValueError("r1, r2 and R must be positive")
        if min(self.g_tail) <= 0:
            raise ValueError("g_tail constants must be positive")

    def check_monotone(self, xs=None) -> bool:
        """g nonnegative and nondecreasing, rho nondecreasing on sample arguments."""
        xs = np.linspace(0.0, 100.0, 2001) if xs is None else np.sort(np.asarray(xs, dtype=float))
        g = np.array([self.g(x) for x in xs])
        rho = np.array([self.rho(x) for x in xs])
        return bool(np.all(g >= 0) and np.all(np.diff(g) >= 0) and np.all(np.diff(rho) >= 0))


def pl_lyapunov_spec(p: Potential, b_prime: float = 0.5) -> LyapunovSpec:
    """Phi = F with rate g(x) = lambda x for a PL potential.

    |grad F|^2 >= lambda F gives <grad Phi, grad F> >= g(F); smoothness gives
    rho(x) = max(L, 2 sqrt(L x)). The tail pair is (lambda, b_prime): any
    positive b' is valid since g(x) >= lambda x.
    """
    if p.pl_lambda is None or p.smoothness_L is None or p.linearizability is None:
        raise ValueError(f"{p.id} needs PL, smoothness and linearizability constants")
    lam, L = float(p.pl_lambda), float(p.smoothness_L)
    r1, r2, R = p.linearizability
    return LyapunovSpec(
        phi=p.value,
        phi_grad=p.gradient,
        g=lambda x: lam * x,
        rho=lambda x: max(L, 2.0 * math.sqrt(L * max(x, 0.0))),
        g_tail=(lam, float(b_prime)),
        r1=r1,
        r2=r2,
        R=max(R, 1.0),
    )


def phi_tilde(spec: LyapunovSpec, bp: BumpProfile, Mprime: float, w):
    """chi Phi_2 + (1 - chi) Phi with Phi_2(w) = |w - w*|^2 / (2 r1) + M'."""
    w, diff, r = _radial(bp, w)
    chi = np.asarray(profile(r - bp.R), dtype=float)
    phi = np.asarray(spec.phi(w), dtype=float)
    phi2 = r * r / (2.0 * spec.r1) + Mprime
    mixed = chi * phi2 + (1.0 - chi) * phi
    out = np.where(r <= bp.R, phi, np.where(r >= bp.R + 1.0, phi2, mixed))
    return float(out) if w.ndim == 1 else out


@dataclass(frozen=True)
class BallSups:
    Mprime: float
    Lprime: float
    B_bump: float
    points: int
    profile_resolution: int


def estimate_ball_sups(spec: LyapunovSpec, bp: BumpProfile, n: int = 4096) -> BallSups:
    """Grid suprema M' = sup Phi and L' = sup rho(Phi) over B(w*, R + 1), and B_bump.

    The ball grid is a product grid with ``ceil(n^(1/d))`` (forced odd, so the
    centre and the axis poles are nodes) points per axis intersected with the
    closed ball. B_bump = max(sup chi~', sup |chi~''| + 2 sup chi~') on a
    :data:`PROFILE_RESOLUTION`-point grid of (0, 1).
    """
    if n < 1000:
        raise ValueError("need at least 1000 grid points")
    d = bp.dim
    k = int(math.ceil(n ** (1.0 / d)))
    k += 1 - k % 2
    rad = bp.R + 1.0
    axes = [np.linspace(c - rad, c + rad, k) for c in bp.center]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=-1)
    keep = np.sum((mesh - bp.center) ** 2, axis=-1) <= rad * rad * (1 + 1e-12)
    pts = mesh[keep]
    phi = np.asarray(spec.phi(pts), dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("Phi is not finite on the ball grid")
    Mp = float(np.max(phi))
    Lp = float(max(spec.rho(float(v)) for v in phi))

    t = np.linspace(0.0, 1.0, PROFILE_RESOLUTION + 2)[1:-1]
    d1 = np.asarray(profile_derivative(t))
    d2 = np.asarray(profile_second_derivative(t))
    sup1 = float(np.max(d1))
    B = max(sup1, float(np.max(np.abs(d2))) + 2.0 * sup1)
    return BallSups(Mp, Lp, B, int(len(pts)), PROFILE_RESOLUTION)


# ---------------------------------------------------------------------------
# certificates


class CertificateKind(str, enum.Enum):
    PI_PL = "PI_PL"
    PI_KL = "PI_KL"
    PI_GEN = "PI_GEN"
    LSI_PL = "LSI_PL"
    LSI_GEN = "LSI_GEN"
    INIT_DIV = "INIT_DIV"


@dataclass(frozen=True)
class Certificate:
    kind: CertificateKind
    bound: float
    beta_threshold: float
    inputs: Mapping[str, float]
    details: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "bound": self.bound,
            "beta_threshold": self.beta_threshold,
            "inputs": dict(self.inputs),
            "details": dict(self.details),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return dumps_json(self.to_dict(), indent)


def _positive(**kw):
    for k, v in kw.items():
        if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
            raise ValueError(f"{k} must be a positive finite number, got {v!r}")


def _nonneg(**kw):
    for k, v in kw.items():
        if not (math.isfinite(v) and v >= 0):
            raise ValueError(f"{k} must be a nonnegative finite number, got {v!r}")


def _gate(beta: float, threshold: float, what: str):
    if beta < threshold:
        raise CertificateError(f"{what} requires beta >= {threshold:.17g}, got beta = {beta:.17g}")


def _pi_pl(i):
    a = 1.0 + i["L"] / (i["lambda"] * i["l_b"])
    thr = 2.0 * (i["d"] + 2.0 / i["lambda"]) * a
    bound = (2.0 / i["beta"]) * a + 2.0 * i["C_local"]
    return bound, thr, {"a": a}


def _pi_kl(i):
    lam, th, L = i["lambda"], i["theta"], i["L"]
    a = 1.0 + L / (lam * i["l_b"] ** (1.0 + th))
    c_kl = max(4.0 / L, 4.0 * L / lam**2)
    thr = 2.0 * (i["d"] + c_kl) * a
    bound = 2.0 * ((1.0 / i["beta"]) * a + i["C_local"])
    return bound, thr, {"a": a, "c_kl": c_kl, "theta_endpoint": th in (0.0, 1.0)}


def _lsi_pl(i):
    lam, L, beta, d, S = i["lambda"], i["L"], i["beta"], i["d"], i["S"]
    pi_bound, pi_thr, _ = _pi_pl(i)
    m = lam / 8.0
    b = (lam / 2.0) * i["sup_min_norm"] ** 2
    kappa = d * L + b * lam * (beta - 1.0)
    gamma = m * lam * (beta - 1.0)
    delta = 1.0 / math.sqrt(gamma)
    K = L
    pre = (2.0 / gamma) * (1.0 / delta + beta * K / 2.0)
    C1 = pre + delta
    C2 = pre * (kappa + gamma * S)
    C1_bound = (4.0 * L + 3.0) / (2.0 * m * lam) + 1.5
    C2_bound = (L + 2.0 * math.sqrt(m * lam)) * ((2.0 * d * L / beta + b * lam) / (m * lam) + S) * beta
    composed = C1 + (C2 + 2.0) * pi_bound
    bound = (2.0 * L + 3.0) / (m * lam) + 2.0 * (L + 2.0 * math.sqrt(m * lam)) * (
        (2.0 * d * L / beta + b * lam) / (m * lam) + S
    ) * ((1.0 + L / (lam * i["l_b"])) + beta * i["C_local"])
    thr = max(2.0, pi_thr)
    details = {
        "m": m,
        "b": b,
        "kappa": kappa,
        "gamma_lyap": gamma,
        "delta": delta,
        "K": K,
        "C1": C1,
        "C2": C2,
        "C1_bound": C1_bound,
        "C2_bound": C2_bound,
        "C_PI": pi_bound,
        "composed": composed,
        "dominates_composition": bool(bound >= composed),
    }
    return bound, thr, details


def l_tilde(Mprime, Lprime, B_bump, r1, R, b_prime) -> tuple[float, float, float]:
    """Smoothness of the spliced Lyapunov function: (L~, shell term, region term)."""
    Mp, Lp, B = Mprime, Lprime, B_bump
    shell = Lp + B * ((R + 1.0) ** 2 / (2.0 * r1) + 2.0 * Mp) + (1.0 / r1 + Lp) + 2.0 * B * (Lp + (R + 1.0) / r1)
    region = max(Lp, 1.0 / r1)
    return max(shell, region, 2.0 * b_prime, 1.0), shell, region


def c_prime(R, Mprime, r1, r2, m_prime, Lt) -> float:
    """C' = max(8(R^2 + 4M' r1)/(r1 L~), 2L~/(r1 r2^2 m'^2), 32M'/L~)."""
    return max(
        8.0 * (R * R + 4.0 * Mprime * r1) / (r1 * Lt),
        2.0 * Lt / (r1 * r2 * r2 * m_prime * m_prime),
        32.0 * Mprime / Lt,
    )


def _general(i):
    Mp, Lp = i["Mprime"], i["Lprime"]
    r1, R = i["r1"], i["R"]
    Lt, shell, region = l_tilde(Mp, Lp, i["B_bump"], r1, R, i["b_prime"])
    Cp = c_prime(R, Mp, r1, i["r2"], i["m_prime"], Lt)
    a = 1.0 + Lt / i["g_lb"]
    thr = 2.0 * a * (i["d"] + Cp)
    bound = 2.0 * i["C_local"] + (2.0 / i["beta"]) * a
    details = {"L_shell": shell, "L_region": region, "L_tilde": Lt, "C_prime": Cp, "a": a}
    if "m" in i:
        L, m, b, S, beta, d = i["L"], i["m"], i["b"], i["S"], i["beta"], i["d"]
        ws2 = i["w_star_norm"] ** 2
        kappa = d * Lt + Lp + (2.0 / r1**2) * ws2 + beta * b + (beta * m / 2.0) * (R + 1.0) ** 2
        gamma = beta * m / 2.0
        delta = 1.0 / math.sqrt(gamma)
        pre = (2.0 / gamma) * (1.0 / delta + beta * L / 2.0)
        C1 = pre + delta
        C2 = pre * (kappa + gamma * S)
        composed = C1 + (C2 + 2.0) * bound
        lsi = (4.0 * L + 3.0) / (2.0 * m) + 1.5 + 2.0 * (
            1.0
            + (L + math.sqrt(m))
            * ((R + 1.0) ** 2 + 2.0 * b / m + 4.0 * ws2 / (beta * m * r1**2) + 2.0 * (d * Lt + Lp) / (beta * m) + S)
        ) * ((1.0 + Lt / i["l_b"]) + beta * i["C_local"])
        details.update(
            {
                "lsi_bound": lsi,
                "lsi_beta_threshold": max(2.0, 4.0 / (r1 * r1 * m), thr),
                "kappa": kappa,
                "gamma_lyap": gamma,
                "delta": delta,
                "K": L,
                "C1": C1,
                "C2": C2,
                "composed": composed,
                "dominates_composition": bool(lsi >= composed),
            }
        )
    return bound, thr, details


def _init_div(i):
    beta, L, gam, M, d = i["beta"], i["L_hold"], i["gamma_init"], i["M"], i["d"]
    raw = beta * L + beta * i["F0"] + 2.0 + (d / 2.0) * math.log(4.0 * M * M * (beta * L + gam / 2.0))
    # both divergences are nonnegative, so clipping keeps the bound valid
    return max(raw, 0.0), 0.0, {"raw": raw, "init_variance": 1.0 / (2.0 * beta * L + gam)}


_FORMULAS = {
    CertificateKind.PI_PL: _pi_pl,
    CertificateKind.PI_KL: _pi_kl,
    CertificateKind.LSI_PL: _lsi_pl,
    CertificateKind.PI_GEN: _general,
    CertificateKind.INIT_DIV: _init_div,
}


def _evaluate(kind: CertificateKind, inputs: Mapping[str, float]):
    if kind is CertificateKind.LSI_GEN:
        _, _, det = _general(inputs)
        return det["lsi_bound"], det["lsi_beta_threshold"], det
    return _FORMULAS[kind](inputs)


def _issue(kind: CertificateKind, inputs: dict, what: str, gate: bool = True) -> Certificate:
    inputs = {k: (float(v) if not isinstance(v, bool) else v) for k, v in inputs.items()}
    bound, thr, details = _evaluate(kind, inputs)
    if gate:
        _gate(inputs["beta"], thr, what)
    if not bound >= 0:
        raise CertificateError(f"{what} produced a negative bound {bound}")
    return Certificate(kind, float(bound), float(thr), inputs, details)


def recompute(cert: Certificate) -> Certificate:
    """Re-evaluate a certificate from its recorded inputs alone."""
    bound, thr, details = _evaluate(cert.kind, cert.inputs)
    return Certificate(cert.kind, float(bound), float(thr), dict(cert.inputs), details)


def cert_pi_pl(lam: float, L: float, l_b: float, C_local: float, d: int, beta: float) -> Certificate:
    """Poincare constant of mu_beta for a PL, L-smooth potential.

    bound = (2/beta)(1 + L/(lambda l_b)) + 2 C_local, valid for
    beta >= 2 (d + 2/lambda)(1 + L/(lambda l_b)).
    """
    _positive(lam=lam, L=L, l_b=l_b, d=d, beta=beta)
    _nonneg(C_local=C_local)
    return _issue(
        CertificateKind.PI_PL,
        {"lambda": lam, "L": L, "l_b": l_b, "C_local": C_local, "d": d, "beta": beta},
        "PL Poincare certificate",
    )


def cert_pi_kl(lam: float, theta: float, L: float, l_b: float, C_local: float, d: int, beta: float) -> Certificate:
    """Poincare constant for a KL potential with exponent theta in [0, 1].

    bound = 2((1/beta)(1 + L/(lambda l_b^(1+theta))) + C_local), valid for
    beta >= 2 (d + max(4/L, 4L/lambda^2))(1 + L/(lambda l_b^(1+theta))).
    The endpoints theta = 0 and theta = 1 are accepted and flagged in the details.
    """
    _positive(lam=lam, L=L, l_b=l_b, d=d, beta=beta)
    _nonneg(C_local=C_local)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return _issue(
        CertificateKind.PI_KL,
        {"lambda": lam, "theta": theta, "L": L, "l_b": l_b, "C_local": C_local, "d": d, "beta": beta},
        "KL Poincare certificate",
    )


def cert_lsi_pl(
    lam: float, L: float, l_b: float, C_local: float, d: int, beta: float, S: float, sup_min_norm: float
) -> Certificate:
    """Log-Sobolev constant for a PL potential.

    Uses quadratic growth with m = lambda/8, b = (lambda/2) sup_min_norm^2,
    drift constants kappa = dL + b lambda (beta - 1), gamma = m lambda (beta - 1),
    delta = 1/sqrt(gamma) and K = L. ``bound`` is the closed-form final
    bound; the exact composition C1 + (C2 + 2) C_PI is kept in
    ``details["composed"]``.
    """
    _positive(lam=lam, L=L, l_b=l_b, d=d, beta=beta)
    _nonneg(C_local=C_local, S=S, sup_min_norm=sup_min_norm)
    return _issue(
        CertificateKind.LSI_PL,
        {
            "lambda": lam,
            "L": L,
            "l_b": l_b,
            "C_local": C_local,
            "d": d,
            "beta": beta,
            "S": S,
            "sup_min_norm": sup_min_norm,
        },
        "PL log-Sobolev certificate",
    )


def _general_inputs(spec, p, sups, l_b, C_local, d, beta, S, quad_growth):
    if sups is None:
        raise ValueError("ball suprema (M', L', B_bump) are required")
    if isinstance(sups, BallSups):
        Mp, Lp, B = sups.Mprime, sups.Lprime, sups.B_bump
    else:
        Mp, Lp, B = sups
    _positive(l_b=l_b, d=d, beta=beta, B_bump=B)
    _nonneg(Mprime=Mp, Lprime=Lp, C_local=C_local)
    g_lb = float(spec.g(l_b))
    if not g_lb > 0:
        raise ValueError(f"g(l_b) must be positive, got {g_lb}")
    inputs = {
        "Mprime": Mp,
        "Lprime": Lp,
        "B_bump": B,
        "r1": spec.r1,
        "r2": spec.r2,
        "R": spec.R,
        "m_prime": spec.g_tail[0],
        "b_prime": spec.g_tail[1],
        "g_lb": g_lb,
        "l_b": l_b,
        "C_local": C_local,
        "d": d,
        "beta": beta,
    }
    if quad_growth is not None:
        if p.smoothness_L is None:
            raise ValueError(f"{p.id} declares no smoothness constant; the LSI branch needs one")
        m, b = quad_growth
        _positive(m=m)
        _nonneg(b=b)
        if S is None:
            raise ValueError("the LSI branch needs the second moment S")
        _nonneg(S=S)
        inputs.update(
            {
                "L": p.smoothness_L,
                "m": m,
                "b": b,
                "S": S,
                "w_star_norm": float(np.linalg.norm(p.minimizer)),
            }
        )
    return inputs


def cert_general(
    spec: LyapunovSpec,
    p: Potential,
    sups,
    l_b: float,
    C_local: float,
    d: int,
    beta: float,
    S: float | None = None,
    quad_growth: tuple[float, float] | None = None,
) -> Certificate:
    """Poincare certificate from a general Lyapunov witness (kind ``PI_GEN``).

    The spliced Lyapunov function is L~-smooth with
    L~ = max(L' + B((R+1)^2/(2 r1) + 2M') + (1/r1 + L') + 2B(L' + (R+1)/r1),
    max(L', 1/r1), 2b', 1). With
    C' = max(8(R^2 + 4M' r1)/(r1 L~), 2L~/(r1 r2^2 m'^2), 32M'/L~) the bound is
    2 C_local + (2/beta)(1 + L~/g(l_b)) for beta >= 2(1 + L~/g(l_b))(d + C').

    With ``quad_growth=(m, b)`` and ``S`` the log-Sobolev branch is
    evaluated too and stored under ``lsi_*`` keys in the details.
    """
    inputs = _general_inputs(spec, p, sups, l_b, C_local, d, beta, S, quad_growth)
    return _issue(CertificateKind.PI_GEN, inputs, "general Poincare certificate")


def cert_lsi_general(spec, p, sups, l_b, C_local, d, beta, S, quad_growth) -> Certificate:
    """The log-Sobolev branch of :func:`cert_general` as its own certificate."""
    inputs = _general_inputs(spec, p, sups, l_b, C_local, d, beta, S, quad_growth)
    return _issue(CertificateKind.LSI_GEN, inputs, "general log-Sobolev certificate")


def init_divergence_bound(
    p: Potential, beta: float, gamma_init: float, M_first_moment: float, d: int | None = None, hatted: bool = False
) -> Certificate:
    """Bound on KL and ln(chi^2 + 1) between N(0, I/(2 beta L + gamma)) and mu_beta.

    beta L + beta F(0) + 2 + (d/2) ln(4 M^2 (beta L + gamma/2)), with L the
    Holder constant of F. Pass the first moment of the tail-regularised
    measure with ``hatted=True`` for the modified-potential variant.
    """
    if p.holder is None:
        raise ValueError(f"{p.id} declares no Holder constants")
    d = p.dim if d is None else d
    _positive(beta=beta, M_first_moment=M_first_moment, d=d)
    if not 0.0 < gamma_init <= 1.0:
        raise ValueError(f"gamma_init must lie in (0, 1], got {gamma_init}")
    L_hold, s = p.holder
    F0 = float(p.value(np.zeros(p.dim)))
    return _issue(
        CertificateKind.INIT_DIV,
        {
            "L_hold": L_hold,
            "s": s,
            "beta": beta,
            "gamma_init": gamma_init,
            "M": M_first_moment,
            "d": d,
            "F0": F0,
            "hatted": bool(hatted),
        },
        "initial divergence bound",
        gate=False,
    )
