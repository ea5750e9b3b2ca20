"""Grid ground truth for mu_beta: spectral gaps, moments, divergences, histograms.

Discretisation
--------------
A uniform node grid carries trapezoidal masses ``m_i ~ c_i rho_i`` with
``rho = exp(-beta F)`` and ``c_i`` the product over axes of 1/2 (edge
node) or 1 (interior node). Neighbouring nodes ``i ~ j`` along axis ``a``
interact through the face weight

    k_ij = fc_ij sqrt(rho_i rho_j) / h_a^2,

``fc`` being the geometric mean of the transverse coefficients. The
discrete Dirichlet form ``E(f) = sum k_ij (f_j - f_i)^2`` and the mass
matrix define the generalised eigenproblem ``K v = lambda M v``, whose
smallest nonzero eigenvalue is the discrete spectral gap of
``-(Delta - beta grad F . grad)`` under zero-flux boundary conditions.

Everything is assembled from log-densities, so steep potentials and low
temperatures do not underflow. The symmetrised operator
``A = M^(-1/2) K M^(-1/2)`` has off-diagonals that do not depend on F at
all, and diagonal entries ``sum_j fc_ij exp((ld_j - ld_i)/2) / (h^2 c_i)``.

Solvers
-------
The gap is found by inverse iteration on the complement of the constant
mode. In 1D each solve is exact and O(n): the flux through face i equals
minus the mass-weighted right-hand side accumulated from the nearer end.
In 2D the singular operator is pinned at the heaviest node and factorised
once with a sparse LU.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import logsumexp

from .io import atomic_write, dumps_json, fmt_float
from .potentials import Potential

__all__ = [
    "GridMeasure",
    "SpectralResult",
    "BOUNDARY_RATIO_MAX",
    "MAX_2D_NODES",
    "grid_measure",
    "grid_measure_from_log_density",
    "gaussian_grid_measure",
    "generator_spectral_gap",
    "local_poincare",
    "dirichlet_form",
    "variance",
    "moments",
    "divergence",
    "histogram",
    "variance_decay_rate",
    "payne_weinberger_bound",
    "symmetrized_operator",
]

BOUNDARY_RATIO_MAX = 1e-8
MAX_2D_NODES = 512
# nodes lighter than exp(-LOG_TRIM) x the heaviest are dropped by the eigensolver
LOG_TRIM = 650.0


@dataclass(frozen=True)
class GridMeasure:
    """A probability measure on a uniform 1D or 2D node grid.

    ``log_weights`` are the logs of ``weights`` computed without
    exponentiating, so divergences stay accurate where weights underflow.
    ``log_density`` is the unnormalised log-density (``-beta F`` for a
    Gibbs grid) and ``F`` the potential values, when known.
    """

    axes: tuple[np.ndarray, ...]
    weights: np.ndarray
    log_weights: np.ndarray
    log_density: np.ndarray
    F: np.ndarray | None = None
    beta: float | None = None
    boundary_ratio: float = 0.0
    label: str = ""

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def bounds(self) -> tuple[tuple[float, float], ...]:
        return tuple((float(a[0]), float(a[-1])) for a in self.axes)

    def nodes(self) -> np.ndarray:
        """Node coordinates with shape ``shape + (dim,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(self.dim)] + ["weight", "log_density"])
        pts = self.nodes().reshape(-1, self.dim)
        for x, wt, ld in zip(pts, self.weights.ravel(), self.log_density.ravel()):
            w.writerow([fmt_float(v) for v in x] + [fmt_float(wt), fmt_float(ld)])
        text = buf.getvalue()
        if path is not None:
            atomic_write(path, text)
        return text


@dataclass(frozen=True)
class SpectralResult:
    """Smallest nonzero eigenvalue of the discrete generator and its reciprocal.

    ``residual`` is the scaled eigen-residual
    ``|A x - lambda x| / (|A| |x|)`` of the symmetrised operator, ``|A|``
    being its Gershgorin bound.
    """

    lambda1: float
    c_pi: float
    residual: float
    iterations: int
    grid: dict = field(default_factory=dict)
    eigenvector: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_json(self, indent: int | None = 2) -> str:
        return dumps_json(
            {
                "lambda1": self.lambda1,
                "c_pi": self.c_pi,
                "residual": self.residual,
                "iterations": self.iterations,
                "grid": self.grid,
            },
            indent,
        )


# ---------------------------------------------------------------------------
# construction


def _axes(bounds, n) -> tuple[np.ndarray, ...]:
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    d = bounds.shape[0]
    if d not in (1, 2):
        raise ValueError("only 1D and 2D grids are supported")
    counts = [int(n)] * d if np.ndim(n) == 0 else [int(k) for k in n]
    if len(counts) != d:
        raise ValueError("one node count per axis expected")
    if min(counts) < 3:
        raise ValueError("need at least 3 nodes per axis")
    if d == 2 and max(counts) > MAX_2D_NODES:
        raise ValueError(f"2D grids are capped at {MAX_2D_NODES} nodes per axis")
    for lo, hi in bounds:
        if not hi > lo:
            raise ValueError("each axis needs lower < upper bound")
    return tuple(np.linspace(lo, hi, k) for (lo, hi), k in zip(bounds, counts))


def _trap_coeffs(shape) -> np.ndarray:
    c = np.ones(shape)
    for ax, k in enumerate(shape):
        idx = [slice(None)] * len(shape)
        for end in (0, k - 1):
            idx[ax] = end
            c[tuple(idx)] *= 0.5
    return c


def _boundary_mask(shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    for ax, k in enumerate(shape):
        idx = [slice(None)] * len(shape)
        for end in (0, k - 1):
            idx[ax] = end
            mask[tuple(idx)] = True
    return mask


def grid_measure_from_log_density(
    axes: Sequence[np.ndarray], log_density: np.ndarray, F=None, beta=None, label: str = "", check_boundary: bool = False
) -> GridMeasure:
    """Normalise ``exp(log_density)`` with trapezoidal weights on the given axes."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    ld = np.asarray(log_density, dtype=float).reshape(tuple(len(a) for a in axes))
    if np.any(np.isnan(ld)):
        raise ValueError("log-density contains NaN")
    lc = np.log(_trap_coeffs(ld.shape))
    lw = ld + lc
    lw = lw - logsumexp(lw)
    top = np.max(ld)
    ratio = float(np.exp(np.max(ld[_boundary_mask(ld.shape)]) - top))
    if check_boundary and ratio > BOUNDARY_RATIO_MAX:
        raise ValueError(
            f"boundary-to-peak weight ratio {ratio:.3e} exceeds {BOUNDARY_RATIO_MAX:g}; widen the grid bounds"
        )
    return GridMeasure(axes, np.exp(lw), lw, ld, None if F is None else np.asarray(F, dtype=float), beta, ratio, label)


def grid_measure(p: Potential, beta: float, bounds, n) -> GridMeasure:
    """mu_beta ~ exp(-beta F) on a uniform grid (endpoints included).

    Raises if the heaviest boundary node carries more than
    :data:`BOUNDARY_RATIO_MAX` times the peak density, i.e. if truncating
    the domain would visibly cut off mass.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    axes = _axes(bounds, n)
    if len(axes) != p.dim:
        raise ValueError(f"grid has {len(axes)} axes but {p.id} has dimension {p.dim}")
    mn = np.asarray(p.minimizer, dtype=float)
    for a, x in zip(axes, mn):
        if not a[0] <= x <= a[-1]:
            raise ValueError("grid bounds must contain the minimizer")
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    F = np.asarray(p.value(pts), dtype=float)
    return grid_measure_from_log_density(axes, -beta * F, F=F, beta=beta, label=p.id, check_boundary=True)


def gaussian_grid_measure(axes: Sequence[np.ndarray], variance: float, mean=0.0) -> GridMeasure:
    """N(mean, variance I) discretised on the given axes."""
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    r2 = np.sum((pts - mean) ** 2, axis=-1)
    return grid_measure_from_log_density(axes, -0.5 * r2 / variance, label=f"gaussian({variance:g})")


# ---------------------------------------------------------------------------
# operator assembly


@dataclass
class _Operator:
    """Generalised eigenproblem data on an active node subset (flattened)."""

    idx: np.ndarray  # flat indices of active nodes
    lm: np.ndarray  # log masses (normalised over active nodes)
    diag: np.ndarray  # diagonal of A
    faces: list  # (i, j, log_k, offdiag_A) per axis, local indices
    shape: tuple
    spacing: tuple


def _assemble(gm: GridMeasure, active: np.ndarray) -> _Operator:
    shape = gm.shape
    ld = gm.log_density
    active = active & (ld > np.max(ld[active]) - LOG_TRIM)
    flat = np.flatnonzero(active.ravel())
    local = -np.ones(active.size, dtype=np.int64)
    local[flat] = np.arange(len(flat))
    local = local.reshape(shape)
    h = gm.spacing

    # per-axis coefficient: 1/2 where a neighbour along that axis is missing
    coef_axes = []
    for ax in range(gm.dim):
        has_lo = np.zeros(shape, dtype=bool)
        has_hi = np.zeros(shape, dtype=bool)
        sl_a = [slice(None)] * gm.dim
        sl_b = [slice(None)] * gm.dim
        sl_a[ax] = slice(1, None)
        sl_b[ax] = slice(None, -1)
        both = active[tuple(sl_a)] & active[tuple(sl_b)]
        has_lo[tuple(sl_a)] = both
        has_hi[tuple(sl_b)] = both
        coef_axes.append(np.where(has_lo & has_hi, 1.0, 0.5))
    c = np.prod(coef_axes, axis=0)

    lc = np.log(c)
    lm_full = ld + lc
    lm_act = lm_full.ravel()[flat]
    lm_act = lm_act - logsumexp(lm_act)

    diag = np.zeros(len(flat))
    faces = []
    for ax in range(gm.dim):
        sl_a = [slice(None)] * gm.dim
        sl_b = [slice(None)] * gm.dim
        sl_a[ax] = slice(None, -1)
        sl_b[ax] = slice(1, None)
        ok = active[tuple(sl_a)] & active[tuple(sl_b)]
        trans = np.ones(shape)
        for other in range(gm.dim):
            if other != ax:
                trans = trans * coef_axes[other]
        fc = np.sqrt(trans[tuple(sl_a)] * trans[tuple(sl_b)])[ok]
        i = local[tuple(sl_a)][ok]
        j = local[tuple(sl_b)][ok]
        ldi = ld[tuple(sl_a)][ok]
        ldj = ld[tuple(sl_b)][ok]
        ci = c[tuple(sl_a)][ok]
        cj = c[tuple(sl_b)][ok]
        h2 = h[ax] ** 2
        np.add.at(diag, i, fc * np.exp(0.5 * (ldj - ldi)) / (h2 * ci))
        np.add.at(diag, j, fc * np.exp(0.5 * (ldi - ldj)) / (h2 * cj))
        off = -fc / (h2 * np.sqrt(ci * cj))
        # log face weight relative to the normalised masses
        log_k = np.log(fc / h2) + 0.5 * (ldi + ldj) - (lm_full.ravel()[flat] - lm_act)[i]
        faces.append((i, j, log_k, off))
    return _Operator(flat, lm_act, diag, faces, shape, h)


def symmetrized_operator(gm: GridMeasure, active: np.ndarray | None = None):
    """Sparse symmetrised operator A and the square-root masses of its kernel vector."""
    active = np.ones(gm.shape, dtype=bool) if active is None else active
    op = _assemble(gm, active)
    return _sparse(op), np.exp(0.5 * op.lm)


def _sparse(op: _Operator) -> sp.csr_matrix:
    n = len(op.idx)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [op.diag]
    for i, j, _, off in op.faces:
        rows += [i, j]
        cols += [j, i]
        vals += [off, off]
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))


def _apply(op: _Operator, x: np.ndarray) -> np.ndarray:
    y = op.diag * x
    for i, j, _, off in op.faces:
        np.add.at(y, i, off * x[j])
        np.add.at(y, j, off * x[i])
    return y


def _gershgorin(op: _Operator) -> float:
    s = op.diag.copy()
    for i, j, _, off in op.faces:
        np.add.at(s, i, np.abs(off))
        np.add.at(s, j, np.abs(off))
    return float(np.max(s))


def _rayleigh(op: _Operator, x: np.ndarray) -> float:
    """x^T A x as a sum of squared differences (no cancellation)."""
    # sqrt(k / m_i) x_i = sqrt(k) v_i with v = x / sqrt(m)
    num = 0.0
    for i, j, log_k, _ in op.faces:
        a = x[i] * np.exp(0.5 * (log_k - op.lm[i]))
        b = x[j] * np.exp(0.5 * (log_k - op.lm[j]))
        num += float(np.sum((b - a) ** 2))
    return num / float(x @ x)


# ---------------------------------------------------------------------------
# inverse iteration


class _Solver1D:
    """Exact pseudo-inverse solves for a path-graph operator."""

    def __init__(self, op: _Operator):
        (i, j, log_k, _), = op.faces
        order = np.argsort(i)
        if not np.array_equal(i[order], np.arange(len(op.idx) - 1)):
            raise ValueError("1D active set must be a contiguous interval")
        self.log_k = log_k[order]
        self.lm = op.lm
        cm = np.cumsum(np.exp(op.lm))
        self.left = cm[:-1] <= 0.5  # faces integrated from the left
        # v is anchored at the median node; integrating from a light edge
        # would build an enormous offset that swamps the bulk values
        self.anchor = int(np.count_nonzero(self.left))

    def solve(self, x: np.ndarray) -> np.ndarray:
        # A y = x with y, x orthogonal to sqrt(m): work with v = y/sqrt(m), b = sqrt(m) x
        sm = np.exp(0.5 * self.lm)
        b = sm * x
        fwd = np.cumsum(b)[:-1]
        bwd = -np.cumsum(b[::-1])[::-1][1:]
        B = np.where(self.left, fwd, bwd)
        # flux through face i: k_i (v_{i+1} - v_i) = -B_i
        dv = -B * np.exp(-self.log_k)
        a = self.anchor
        v = np.zeros(len(b))
        v[a + 1 :] = np.cumsum(dv[a:])
        v[:a] = -np.cumsum(dv[:a][::-1])[::-1]
        m = np.exp(self.lm)
        v -= np.sum(m * v)
        return sm * v


class _SolverSparse:
    """Pinned sparse LU for the pseudo-inverse on the complement of sqrt(m)."""

    def __init__(self, op: _Operator):
        A = _sparse(op).tocsc()
        self.u0 = np.exp(0.5 * op.lm)
        self.pin = int(np.argmax(self.u0))
        keep = np.ones(A.shape[0], dtype=bool)
        keep[self.pin] = False
        self.keep = keep
        self.lu = splu(A[keep][:, keep].tocsc())

    def solve(self, x: np.ndarray) -> np.ndarray:
        u0 = self.u0
        b = x - (u0 @ x) * u0
        y = np.zeros_like(x)
        y[self.keep] = self.lu.solve(b[self.keep])
        return y - (u0 @ y) * u0


def _inverse_iteration(op: _Operator, tol: float, max_iter: int, seed: int = 0, block: int = 4):
    """Block inverse iteration with Rayleigh-Ritz on the complement of sqrt(m).

    A block is needed because symmetric multi-well measures have nearly
    degenerate low eigenvalues (tunnelling splitting), which stalls a
    single vector.
    """
    n = len(op.idx)
    if n < 3:
        raise ValueError("too few active nodes for a spectral estimate")
    solver = _Solver1D(op) if len(op.shape) == 1 else _SolverSparse(op)
    u0 = np.exp(0.5 * op.lm)
    scale = _gershgorin(op)
    k = min(block, n - 1)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, k))
    X -= np.outer(u0, u0 @ X)
    X, _ = np.linalg.qr(X)
    lam = np.inf
    res = np.inf
    for it in range(1, max_iter + 1):
        Y = np.column_stack([solver.solve(X[:, c]) for c in range(k)])
        Y -= np.outer(u0, u0 @ Y)
        if not np.all(np.isfinite(Y)):
            raise RuntimeError("inverse iteration broke down")
        X, _ = np.linalg.qr(Y)
        AX = np.column_stack([_apply(op, X[:, c]) for c in range(k)])
        H = X.T @ AX
        theta, W = np.linalg.eigh(0.5 * (H + H.T))
        X = X @ W
        x = X[:, 0] / np.linalg.norm(X[:, 0])
        lam_new = _rayleigh(op, x)
        res = float(np.linalg.norm(_apply(op, x) - lam_new * x) / scale)
        done = res <= tol and abs(lam_new - lam) <= tol * lam_new
        lam = lam_new
        if done:
            return lam, x, res, it
    raise RuntimeError(f"inverse iteration did not converge in {max_iter} iterations (residual {res:.3e})")


def _result(op: _Operator, gm: GridMeasure, lam, x, res, it, extra=None) -> SpectralResult:
    grid = {
        "dim": gm.dim,
        "nodes": list(gm.shape),
        "bounds": [list(b) for b in gm.bounds],
        "active_nodes": int(len(op.idx)),
        "beta": gm.beta,
    }
    if extra:
        grid.update(extra)
    full = np.zeros(int(np.prod(gm.shape)))
    full[op.idx] = x * np.exp(-0.5 * op.lm)  # eigenfunction v = x / sqrt(m)
    return SpectralResult(float(lam), float(1.0 / lam), float(res), it, grid, full.reshape(gm.shape))


def generator_spectral_gap(gm: GridMeasure, tol: float = 1e-10, max_iter: int = 500) -> SpectralResult:
    """Discrete spectral gap of the Langevin generator on the whole grid (zero-flux boundary)."""
    op = _assemble(gm, np.ones(gm.shape, dtype=bool))
    lam, x, res, it = _inverse_iteration(op, tol, max_iter)
    return _result(op, gm, lam, x, res, it, {"tol": tol})


def local_poincare(gm: GridMeasure, center, radius: float, tol: float = 1e-10, max_iter: int = 500) -> SpectralResult:
    """Spectral gap of mu restricted to the closed ball B(center, radius).

    Nodes outside the ball are removed; masses and face weights of the
    remaining nodes are rebuilt with the same half-cell rule used at the
    grid edges, so a ball covering the whole grid reproduces
    :func:`generator_spectral_gap` exactly.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.shape[0] != gm.dim:
        raise ValueError("center dimension does not match the grid")
    pts = gm.nodes()
    inside = np.sum((pts - center) ** 2, axis=-1) <= radius * radius * (1 + 1e-12)
    counts = [int(np.max(np.sum(inside, axis=ax))) for ax in range(gm.dim)]
    if min(counts) < 8:
        raise ValueError(f"ball contains too few nodes per axis ({min(counts)} < 8)")
    if gm.dim == 1:
        # keep the contiguous run containing the node nearest the centre
        k = int(np.argmin(np.abs(gm.axes[0] - center[0])))
        lo, hi = k, k
        while lo > 0 and inside[lo - 1]:
            lo -= 1
        while hi < len(inside) - 1 and inside[hi + 1]:
            hi += 1
        inside = np.zeros_like(inside)
        inside[lo : hi + 1] = True
    op = _assemble(gm, inside)
    lam, x, res, it = _inverse_iteration(op, tol, max_iter)
    return _result(op, gm, lam, x, res, it, {"tol": tol, "center": center.tolist(), "radius": float(radius)})


def dirichlet_form(gm: GridMeasure, f: np.ndarray, active: np.ndarray | None = None) -> float:
    """E(f) = sum over faces of k_ij (f_j - f_i)^2 with masses normalised on ``active``."""
    active = np.ones(gm.shape, dtype=bool) if active is None else active
    op = _assemble(gm, active)
    v = np.asarray(f, dtype=float).reshape(-1)[op.idx]
    return float(sum(np.sum(np.exp(lk) * (v[j] - v[i]) ** 2) for i, j, lk, _ in op.faces))


def variance(gm: GridMeasure, f: np.ndarray, active: np.ndarray | None = None) -> float:
    active = np.ones(gm.shape, dtype=bool) if active is None else active
    op = _assemble(gm, active)
    v = np.asarray(f, dtype=float).reshape(-1)[op.idx]
    m = np.exp(op.lm)
    mean = np.sum(m * v)
    return float(np.sum(m * (v - mean) ** 2))


def payne_weinberger_bound(diameter: float) -> float:
    """diam^2 / pi^2, the Poincare constant bound for log-concave measures on convex sets."""
    return diameter**2 / math.pi**2


# ---------------------------------------------------------------------------
# moments and divergences


def moments(gm: GridMeasure) -> tuple[float, float, float]:
    """(E|w|, E|w|^2, E F) under the grid measure."""
    if gm.F is None:
        raise ValueError("grid measure carries no potential values")
    pts = gm.nodes()
    r2 = np.sum(pts * pts, axis=-1)
    w = gm.weights
    return float(np.sum(w * np.sqrt(r2))), float(np.sum(w * r2)), float(np.sum(w * gm.F))


def _same_grid(p: GridMeasure, q: GridMeasure):
    if p.shape != q.shape or any(not np.array_equal(a, b) for a, b in zip(p.axes, q.axes)):
        raise ValueError("divergence needs identical grids")


def divergence(gm_p: GridMeasure, gm_q: GridMeasure, kind: str = "KL") -> float:
    """KL(p||q), TV(p, q) or chi^2(p||q) between two measures on the same grid."""
    _same_grid(gm_p, gm_q)
    kind = kind.upper()
    lp, lq = gm_p.log_weights, gm_q.log_weights
    if kind == "TV":
        return float(0.5 * np.sum(np.abs(gm_p.weights - gm_q.weights)))
    pos = gm_p.weights > 0
    if np.any(pos & np.isneginf(lq)):
        return math.inf
    if kind == "KL":
        return float(max(np.sum(gm_p.weights[pos] * (lp[pos] - lq[pos])), 0.0))
    if kind in ("CHI2", "CHI^2"):
        return float(max(np.sum(np.exp(2.0 * lp[pos] - lq[pos])) - 1.0, 0.0))
    raise ValueError(f"unknown divergence {kind!r}; use KL, TV or CHI2")


def histogram(traj, gm_template: GridMeasure, burn_in: float = 0.5, max_outside: float = 1e-3) -> GridMeasure:
    """Empirical law of the post-burn-in states of every chain, binned to the template's nodes.

    Each node owns the cell of points nearer to it than to any other node
    (half cells at the edges). States recorded at steps >= burn_in x last
    step are pooled over all chains.
    """
    if not 0.0 <= burn_in < 1.0:
        raise ValueError("burn_in must lie in [0, 1)")
    states = np.asarray(traj.states, dtype=float)
    if states.shape[-1] != gm_template.dim:
        raise ValueError("trajectory dimension does not match the template grid")
    steps = np.arange(states.shape[0]) * getattr(traj, "stride", 1)
    keep = steps >= burn_in * steps[-1]
    pts = states[keep].reshape(-1, gm_template.dim)
    idx = []
    inside = np.ones(len(pts), dtype=bool)
    for ax, a in enumerate(gm_template.axes):
        h = a[1] - a[0]
        k = np.rint((pts[:, ax] - a[0]) / h).astype(np.int64)
        inside &= (k >= 0) & (k < len(a))
        idx.append(k)
    outside = 1.0 - inside.mean() if len(pts) else 1.0
    if outside > max_outside:
        raise ValueError(f"{outside:.3e} of the samples fall outside the grid (limit {max_outside:g})")
    flat = np.ravel_multi_index(tuple(k[inside] for k in idx), gm_template.shape)
    counts = np.bincount(flat, minlength=int(np.prod(gm_template.shape))).reshape(gm_template.shape)
    total = counts.sum()
    w = counts / total
    with np.errstate(divide="ignore"):
        lw = np.log(counts) - math.log(total)
    return GridMeasure(
        gm_template.axes, w, lw, lw.copy(), None, gm_template.beta, 0.0, f"histogram({getattr(traj, 'potential_id', '')})"
    )


def variance_decay_rate(
    p: Potential,
    beta: float,
    eta: float,
    observable: Callable,
    ensemble,
    window: tuple[float, float] | None = None,
    stationary_variance: float | None = None,
    floor_sigmas: float = 5.0,
) -> float:
    """Exponential rate at which the cross-chain variance of an observable relaxes.

    The statistic is ``D(t) = |Var_chains f(w_t) - Var_inf|``, which for a
    reversible diffusion decays like ``exp(-2 t / C_PI)`` along the slowest
    excited mode. ``Var_inf`` defaults to the variance pooled over the last
    quarter of the run. A least-squares line is fitted to ``log D`` over
    ``window`` (in time units); without a window the fit runs from the
    first record until ``D`` first drops below ``floor_sigmas`` times its
    Monte Carlo standard error. Returns the rate (minus the slope).
    """
    states = np.asarray(ensemble.states, dtype=float)
    stride = getattr(ensemble, "stride", 1)
    t = np.arange(states.shape[0]) * stride * eta
    f = np.asarray(observable(states), dtype=float)
    if f.shape != states.shape[:2]:
        raise ValueError("observable must map (..., dim) states to scalars")
    n_chains = f.shape[1]
    if n_chains < 2:
        raise ValueError("need at least two chains")
    var_t = np.var(f, axis=1, ddof=1)
    if stationary_variance is None:
        tail = f[int(0.75 * len(f)) :]
        stationary_variance = float(np.var(tail))
    noise = max(stationary_variance, 1e-300) * math.sqrt(2.0 / (n_chains - 1))
    if stationary_variance <= 1e-14 * (1.0 + float(np.max(np.abs(f)))) ** 2 and np.max(var_t) <= 1e-14:
        raise ValueError("observable variance is at the noise floor from the start")
    D = np.abs(var_t - stationary_variance)
    floor = floor_sigmas * noise
    if window is None:
        below = np.flatnonzero(D < floor)
        end = int(below[0]) if len(below) else len(D)
        sel = np.arange(0, end)
    else:
        sel = np.flatnonzero((t >= window[0]) & (t <= window[1]))
        if np.any(D[sel] < floor):
            first = float(t[sel][np.argmax(D[sel] < floor)])
            raise ValueError(f"variance statistic hits the noise floor at t = {first:g}, inside the window")
    if len(sel) < 3:
        raise ValueError("variance statistic is below the noise floor before the fit window ends")
    slope = np.polyfit(t[sel], np.log(D[sel]), 1)[0]
    return float(-slope)
