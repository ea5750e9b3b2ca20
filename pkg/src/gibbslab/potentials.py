"""Potentials F: R^d -> [0, inf) with declared landscape constants.

Every potential here is vectorised: ``value`` takes an array of shape
``(..., d)`` and returns shape ``(...)``; ``gradient`` returns ``(..., d)``.
All entries are shifted so that ``inf F = 0``.

The catalogue covers the landscapes used throughout the package:

==================== ===================================== ====================
name                 F(w)                                  role
==================== ===================================== ====================
quadratic(c)         c |w|^2 / 2                           PL, OU ground truth
pl_sine              w^2 + 3 sin^2(w)                      nonconvex PL
kl_power(theta)      |w|^p, p = 2 / (1 - theta)            KL with equality
double_well          (w^2 - 1)^2                           metastable control
dissipative_quartic  w^4/4 - w^2/2 + 1/4                   dissipative
==================== ===================================== ====================
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Potential",
    "ConditionKind",
    "ConditionResidualReport",
    "CATALOGUE_NAMES",
    "PL_SINE_LAMBDA",
    "catalogue",
    "finite_sum",
    "condition_residual",
    "quadratic_growth_constants",
    "sweep_check",
    "finite_diff_grad",
    "box_grid",
]

# 0.95 x the minimum of |F'|^2 / F for pl_sine over a 10^6-point grid of
# [-20, 20] (grid minimum 0.35106...), rounded down.
PL_SINE_LAMBDA = 0.3335

CATALOGUE_NAMES = ("quadratic", "pl_sine", "kl_power", "double_well", "dissipative_quartic")


@dataclass(frozen=True)
class Potential:
    """A differentiable energy F together with the constants it is known to satisfy.

    Optional constants are ``None`` when the potential does not satisfy the
    corresponding condition (or it has not been certified).
    ``smooth_window`` is the half-width of the cube on which ``smoothness_L``
    is valid; ``None`` means the bound is global.
    """

    name: str
    dim: int
    value: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    minimizer: np.ndarray
    sublevel_radius: Callable[[float], float]
    minimizer_radius: float = 0.0
    smoothness_L: float | None = None
    smooth_window: float | None = None
    holder: tuple[float, float] | None = None
    pl_lambda: float | None = None
    kl_params: tuple[float, float] | None = None
    dissipativity: tuple[float, float] | None = None
    linearizability: tuple[float, float, float] | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    components: tuple["Potential", ...] | None = None

    @property
    def id(self) -> str:
        if not self.params:
            return self.name
        args = ",".join(f"{k}={self.params[k]:g}" for k in sorted(self.params))
        return f"{self.name}({args})"

    def __call__(self, w) -> np.ndarray:
        return self.value(np.asarray(w, dtype=float))

    def with_constants(self, **kwargs) -> "Potential":
        return replace(self, **kwargs)


class ConditionKind(str, enum.Enum):
    PL = "PL"
    KL = "KL"
    SMOOTH_GRAD_BOUND = "SMOOTH_GRAD_BOUND"
    QUAD_GROWTH = "QUAD_GROWTH"
    DISSIPATIVE = "DISSIPATIVE"
    LINEARIZABLE = "LINEARIZABLE"


@dataclass(frozen=True)
class ConditionResidualReport:
    condition_kind: ConditionKind
    points_checked: int
    min_margin: float
    worst_point: np.ndarray


def _as_points(w, dim: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim == 0:
        w = w.reshape(1)
    if w.shape[-1] != dim:
        raise ValueError(f"expected points with trailing dimension {dim}, got shape {w.shape}")
    return w


# ---------------------------------------------------------------------------
# catalogue


def _quadratic(c: float = 1.0, dim: int = 1) -> Potential:
    c = float(c)
    if c <= 0:
        raise ValueError(f"quadratic requires c > 0, got {c}")
    dim = int(dim)
    if dim < 1:
        raise ValueError("dim must be a positive integer")

    def value(w):
        return 0.5 * c * np.sum(w * w, axis=-1)

    def gradient(w):
        return c * w

    R = 1.0
    return Potential(
        name="quadratic",
        dim=dim,
        value=value,
        gradient=gradient,
        minimizer=np.zeros(dim),
        sublevel_radius=lambda l: math.sqrt(2.0 * max(l, 0.0) / c),
        smoothness_L=c,
        holder=(c, 1.0),
        pl_lambda=2.0 * c,
        # <grad F, w> = 2F everywhere; F >= (cR/2)|w| once |w| >= R
        linearizability=(2.0, 0.5 * c * R, R),
        # <w, grad F> = c|w|^2; any b > 0 is admissible
        dissipativity=(c, 1e-12),
        params={"c": c, "dim": float(dim)} if dim != 1 else {"c": c},
    )


def _pl_sine() -> Potential:
    def value(w):
        x = w[..., 0]
        return x * x + 3.0 * np.sin(x) ** 2

    def gradient(w):
        x = w[..., 0]
        return (2.0 * x + 3.0 * np.sin(2.0 * x))[..., None]

    def sublevel_radius(l):
        # F is increasing in |w| (F' > 0 for w > 0) and F >= w^2
        if l <= 0:
            return 0.0
        return brentq(lambda x: x * x + 3.0 * math.sin(x) ** 2 - l, 0.0, math.sqrt(l), xtol=1e-14)

    return Potential(
        name="pl_sine",
        dim=1,
        value=value,
        gradient=gradient,
        minimizer=np.zeros(1),
        sublevel_radius=sublevel_radius,
        smoothness_L=8.0,  # |2 + 6 cos 2w| <= 8
        holder=(8.0, 1.0),
        pl_lambda=PL_SINE_LAMBDA,
        # outside |w| >= 3: wF' - 0.75F >= 1.25 w^2 - 3|w| - 2.25 >= 0 and F >= w^2 >= 3|w|
        linearizability=(0.75, 3.0, 3.0),
        # wF' = 2w^2 + 3w sin 2w >= w^2 - 9/4
        dissipativity=(1.0, 2.25),
    )


def _kl_power(theta: float = 1.0 / 3.0, window: float = 10.0) -> Potential:
    theta = float(theta)
    if not 0.0 < theta < 1.0:
        raise ValueError(f"kl_power requires theta in (0, 1), got {theta}")
    window = float(window)
    p = 2.0 / (1.0 - theta)

    def value(w):
        return np.abs(w[..., 0]) ** p

    def gradient(w):
        x = w[..., 0]
        return (p * np.sign(x) * np.abs(x) ** (p - 1.0))[..., None]

    return Potential(
        name="kl_power",
        dim=1,
        value=value,
        gradient=gradient,
        minimizer=np.zeros(1),
        sublevel_radius=lambda l: max(l, 0.0) ** (1.0 / p),
        smoothness_L=p * (p - 1.0) * window ** (p - 2.0),
        smooth_window=window,
        kl_params=(p * p, theta),
        params={"theta": theta, "window": window},
    )


def _double_well(window: float = 2.0) -> Potential:
    window = float(window)

    def value(w):
        x = w[..., 0]
        return (x * x - 1.0) ** 2

    def gradient(w):
        x = w[..., 0]
        return (4.0 * x * (x * x - 1.0))[..., None]

    def sublevel_radius(l):
        # distance from {F <= l} to W* = {-1, +1}
        s = math.sqrt(max(l, 0.0))
        outer = math.sqrt(1.0 + s) - 1.0
        inner = 1.0 - math.sqrt(max(1.0 - s, 0.0))
        return max(outer, inner)

    return Potential(
        name="double_well",
        dim=1,
        value=value,
        gradient=gradient,
        minimizer=np.ones(1),
        sublevel_radius=sublevel_radius,
        minimizer_radius=1.0,
        smoothness_L=12.0 * window**2 - 4.0,
        smooth_window=window,
        dissipativity=(1.0, 1.5625),  # 4w^4 - 4w^2 >= w^2 - 25/16
        params={"window": window},
    )


def _dissipative_quartic(window: float = 2.0) -> Potential:
    window = float(window)

    def value(w):
        x = w[..., 0]
        return 0.25 * x**4 - 0.5 * x * x + 0.25

    def gradient(w):
        x = w[..., 0]
        return (x**3 - x)[..., None]

    def sublevel_radius(l):
        s = math.sqrt(max(4.0 * l, 0.0))
        outer = math.sqrt(1.0 + s) - 1.0
        inner = 1.0 - math.sqrt(max(1.0 - s, 0.0))
        return max(outer, inner)

    return Potential(
        name="dissipative_quartic",
        dim=1,
        value=value,
        gradient=gradient,
        minimizer=np.ones(1),
        sublevel_radius=sublevel_radius,
        minimizer_radius=1.0,
        smoothness_L=3.0 * window**2 - 1.0,
        smooth_window=window,
        dissipativity=(1.0, 1.0),  # w^4 - w^2 >= w^2 - 1
        params={"window": window},
    )


_FACTORIES = {
    "quadratic": _quadratic,
    "pl_sine": _pl_sine,
    "kl_power": _kl_power,
    "double_well": _double_well,
    "dissipative_quartic": _dissipative_quartic,
}


def catalogue(name: str, params: Mapping[str, float] | None = None) -> Potential:
    """Build a catalogue potential by name.

    Parameters
    ----------
    name : str
        One of :data:`CATALOGUE_NAMES`.
    params : mapping, optional
        Family parameters, e.g. ``{"c": 2}`` for ``quadratic`` or
        ``{"theta": 1/3}`` for ``kl_power``.
    """
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown potential {name!r}; choose from {', '.join(CATALOGUE_NAMES)}") from None
    params = dict(params or {})
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValueError(f"invalid parameters for {name}: {exc}") from None


def finite_sum(components: Sequence[Potential], name: str = "finite_sum") -> Potential:
    """F = sum_i f_i over components sharing one dimension.

    Constants that add across a sum (smoothness) are summed when every
    component declares them; others are left undeclared.
    """
    components = tuple(components)
    if not components:
        raise ValueError("finite_sum needs at least one component")
    dim = components[0].dim
    if any(c.dim != dim for c in components):
        raise ValueError("all components must share the same dimension")

    def value(w):
        return sum(c.value(w) for c in components)

    def gradient(w):
        return sum(c.gradient(w) for c in components)

    Ls = [c.smoothness_L for c in components]
    L = float(sum(Ls)) if all(x is not None for x in Ls) else None
    first = components[0]
    return Potential(
        name=name,
        dim=dim,
        value=value,
        gradient=gradient,
        minimizer=first.minimizer,
        sublevel_radius=first.sublevel_radius,
        smoothness_L=L,
        components=components,
    )


# ---------------------------------------------------------------------------
# pointwise conditions


def quadratic_growth_constants(p: Potential) -> tuple[float, float]:
    """Constants (m, b) with F(w) >= m|w|^2 - b implied by the PL inequality."""
    if p.pl_lambda is None:
        raise ValueError(f"{p.id} declares no PL constant")
    lam = float(p.pl_lambda)
    if lam <= 0:
        raise ValueError("PL constant must be positive")
    return lam / 8.0, 0.5 * lam * p.minimizer_radius**2


def condition_residual(p: Potential, kind: ConditionKind | str, w) -> np.ndarray | float:
    """Left-minus-right margin of a landscape inequality at ``w``.

    A nonnegative return value means the inequality holds at that point.
    Accepts a single point or a batch of shape ``(..., d)``.
    """
    kind = ConditionKind(kind)
    pts = _as_points(w, p.dim)
    F = p.value(pts)
    G = p.gradient(pts)
    g2 = np.sum(G * G, axis=-1)

    if kind is ConditionKind.PL:
        if p.pl_lambda is None:
            raise ValueError(f"{p.id} declares no PL constant")
        out = g2 - p.pl_lambda * F
    elif kind is ConditionKind.KL:
        if p.kl_params is None:
            raise ValueError(f"{p.id} declares no KL constants")
        lam, theta = p.kl_params
        out = g2 - lam * F ** (1.0 + theta)
    elif kind is ConditionKind.SMOOTH_GRAD_BOUND:
        if p.smoothness_L is None:
            raise ValueError(f"{p.id} declares no smoothness constant")
        out = 4.0 * p.smoothness_L * F - g2
    elif kind is ConditionKind.QUAD_GROWTH:
        m, b = quadratic_growth_constants(p)
        out = F - (m * np.sum(pts * pts, axis=-1) - b)
    elif kind is ConditionKind.DISSIPATIVE:
        if p.dissipativity is None:
            raise ValueError(f"{p.id} declares no dissipativity constants")
        m_dis, b_dis = p.dissipativity
        out = np.sum(pts * G, axis=-1) - m_dis * np.sum(pts * pts, axis=-1) + b_dis
    elif kind is ConditionKind.LINEARIZABLE:
        if p.linearizability is None:
            raise ValueError(f"{p.id} declares no linearizability constants")
        r1, r2, R = p.linearizability
        diff = pts - p.minimizer
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        if np.any(dist <= R):
            raise ValueError(f"LINEARIZABLE is only defined outside the ball of radius {R} about the minimizer")
        out = np.minimum(np.sum(G * diff, axis=-1) - r1 * F, F - r2 * dist)
    else:  # pragma: no cover
        raise ValueError(kind)

    if np.asarray(w).ndim <= 1:
        return float(out)
    return out


def box_grid(domain: Sequence[Sequence[float]], n: int | Sequence[int]) -> np.ndarray:
    """Uniform grid (endpoints included) over a box, flattened to ``(N, d)`` in C order."""
    domain = np.atleast_2d(np.asarray(domain, dtype=float))
    d = domain.shape[0]
    counts = [int(n)] * d if np.ndim(n) == 0 else [int(k) for k in n]
    if len(counts) != d:
        raise ValueError("one count per axis expected")
    if min(counts) < 2:
        raise ValueError("need at least 2 grid points per axis")
    axes = [np.linspace(lo, hi, k) for (lo, hi), k in zip(domain, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def sweep_check(
    p: Potential,
    kind: ConditionKind | str,
    domain: Sequence[Sequence[float]],
    n: int | Sequence[int],
) -> ConditionResidualReport:
    """Evaluate a condition on a uniform grid and report the worst margin.

    For ``LINEARIZABLE`` the grid points inside the closed ball
    ``B(w*, R)`` are skipped; a domain lying entirely inside the ball is
    an error. Ties in the worst point resolve to the lowest grid index.
    """
    kind = ConditionKind(kind)
    pts = box_grid(domain, n)
    if pts.shape[1] != p.dim:
        raise ValueError(f"domain has {pts.shape[1]} axes but {p.id} has dimension {p.dim}")
    if kind is ConditionKind.LINEARIZABLE:
        if p.linearizability is None:
            raise ValueError(f"{p.id} declares no linearizability constants")
        R = p.linearizability[2]
        dist = np.linalg.norm(pts - p.minimizer, axis=-1)
        pts = pts[dist > R]
        if len(pts) == 0:
            raise ValueError(f"domain lies inside B(w*, {R}); LINEARIZABLE is undefined there")
    if kind in (ConditionKind.SMOOTH_GRAD_BOUND,) and p.smooth_window is not None:
        if np.any(np.abs(pts) > p.smooth_window * (1 + 1e-12)):
            raise ValueError(f"domain exceeds the smoothness window [-{p.smooth_window}, {p.smooth_window}]")
    margins = np.atleast_1d(condition_residual(p, kind, pts))
    i = int(np.argmin(margins))
    return ConditionResidualReport(kind, len(pts), float(margins[i]), pts[i].copy())


def finite_diff_grad(p: Potential, w, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``p.value`` at a single point."""
    if step <= 0:
        raise ValueError("step must be positive")
    w = _as_points(w, p.dim).astype(float)
    out = np.empty(p.dim)
    for i in range(p.dim):
        e = np.zeros(p.dim)
        e[i] = step
        out[i] = (float(p.value(w + e)) - float(p.value(w - e))) / (2.0 * step)
    return out
