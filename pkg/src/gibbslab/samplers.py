"""Gradient Langevin Dynamics and the Proximal Sampler for mu_beta ~ exp(-beta F).

GLD iterates

    w_{t+1} = w_t - eta * beta * grad F(w_t) + sqrt(2 eta) * xi_t

which discretises dW = -beta grad F dt + sqrt(2) dB, whose stationary law is
mu_beta.

The Proximal Sampler alternates a forward Gaussian step w' ~ N(w, h I) with
an exact draw from the restricted Gaussian oracle (RGO)

    pi(w | w') ~ exp(-beta F(w) - |w - w'|^2 / (2h)),

realised here by rejection sampling against the strong-convexity minorant of
g(w) = beta F(w) + |w - w'|^2 / (2h), which is valid whenever h <= 1/(2 beta L).

Random streams
--------------
Every chain owns an independent PCG64 stream derived from
``SeedSequence(seed, spawn_key=(chain, purpose))``. A chain's output therefore
depends only on (seed, chain index) and not on how many chains run beside it.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .io import atomic_write
from .potentials import Potential

__all__ = [
    "ExactOracle",
    "StochasticOracle",
    "SamplerConfig",
    "ProximalConfig",
    "Trajectory",
    "GaussianInit",
    "ChainDivergedError",
    "ProximalOracleError",
    "RejectionLimitError",
    "chain_rng",
    "init_gaussian",
    "gld_step",
    "run_gld",
    "stochastic_grad_oracle",
    "modified_potential",
    "default_h",
    "proximal_oracle",
    "rgo_sample",
    "run_proximal",
]

log = logging.getLogger(__name__)

# stream purposes mixed into the spawn key
_INIT, _NOISE, _ORACLE, _PROX = 0, 1, 2, 3


class ChainDivergedError(RuntimeError):
    def __init__(self, step: int, chain: int):
        super().__init__(f"non-finite state at step {step} (chain {chain})")
        self.step = step
        self.chain = chain


class ProximalOracleError(RuntimeError):
    def __init__(self, grad_norm: float, iterations: int):
        super().__init__(f"proximal oracle stopped after {iterations} iterations with |grad g| = {grad_norm:.3e}")
        self.grad_norm = grad_norm
        self.iterations = iterations


class RejectionLimitError(RuntimeError):
    def __init__(self, acceptance_rate: float, rejections: int):
        super().__init__(
            f"rejection limit exceeded after {rejections} rejections "
            f"(empirical acceptance rate {acceptance_rate:.3g})"
        )
        self.acceptance_rate = acceptance_rate
        self.rejections = rejections


def chain_rng(seed: int, chain: int, purpose: int = _NOISE) -> np.random.Generator:
    """Independent generator for one (chain, purpose) pair."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(chain), int(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExactOracle:
    kind: str = "EXACT"


@dataclass(frozen=True)
class StochasticOracle:
    """Minibatch gradients over a finite-sum potential.

    ``components`` is the minibatch size; ``sigma`` adds independent
    N(0, sigma^2 I) noise on top of the minibatch estimate.
    """

    sigma: float = 0.0
    components: int = 1
    kind: str = "STOCHASTIC"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.components < 1:
            raise ValueError("minibatch size must be at least 1")


@dataclass(frozen=True)
class SamplerConfig:
    beta: float
    eta: float
    steps: int
    chains: int = 1
    gamma_init: float = 1.0
    seed: int = 0
    oracle: ExactOracle | StochasticOracle = field(default_factory=ExactOracle)
    stride: int = 1

    def __post_init__(self):
        if self.beta <= 0 or self.eta <= 0:
            raise ValueError("beta and eta must be positive")
        if self.steps < 0 or self.chains < 1 or self.stride < 1:
            raise ValueError("steps >= 0, chains >= 1 and stride >= 1 required")
        if not 0.0 < self.gamma_init <= 1.0:
            raise ValueError(f"gamma_init must lie in (0, 1], got {self.gamma_init}")


@dataclass(frozen=True)
class ProximalConfig:
    h: float
    outer_steps: int
    chains: int = 1
    prox_tol: float = 1e-10
    max_rejections: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.h <= 0 or self.prox_tol <= 0:
            raise ValueError("h and prox_tol must be positive")
        if self.outer_steps < 0 or self.chains < 1 or self.max_rejections < 0:
            raise ValueError("invalid proximal configuration")


def default_h(beta: float, L: float) -> float:
    """Half of the largest step for which the RGO target stays log-concave."""
    return 1.0 / (4.0 * beta * L)


@dataclass
class Trajectory:
    """Recorded sampler states.

    ``states`` has shape ``(records, chains, dim)`` where record ``k`` holds
    step ``k * stride``; record 0 is the initialization.
    """

    states: np.ndarray
    config: SamplerConfig | ProximalConfig
    potential_id: str
    stride: int = 1
    step_size: float = 1.0
    info: dict = field(default_factory=dict)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.states.shape[0]) * self.stride

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.step_size

    @property
    def chains(self) -> int:
        return self.states.shape[1]

    @property
    def dim(self) -> int:
        return self.states.shape[2]

    def to_csv(self, path=None) -> str:
        """Columnar CSV ``chain,step,coord,value`` with 17 significant digits."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["chain", "step", "coord", "value"])
        steps = self.steps
        for c in range(self.chains):
            for k, s in enumerate(steps):
                for j in range(self.dim):
                    writer.writerow([c, int(s), j, f"{self.states[k, c, j]:.17g}"])
        text = buf.getvalue()
        if path is not None:
            atomic_write(path, text)
        return text


# ---------------------------------------------------------------------------
# initialization


@dataclass(frozen=True)
class GaussianInit:
    """Isotropic Gaussian initial law N(mean, variance I)."""

    dim: int
    variance: float
    seed: int = 0
    mean: float | np.ndarray = 0.0

    def sample(self, n: int) -> np.ndarray:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        return self.mean + math.sqrt(self.variance) * rng.standard_normal((n, self.dim))

    def sample_chains(self, chains: int) -> np.ndarray:
        out = np.empty((chains, self.dim))
        for c in range(chains):
            out[c] = chain_rng(self.seed, c, _INIT).standard_normal(self.dim)
        return self.mean + math.sqrt(self.variance) * out


def init_gaussian(dim: int, beta: float, L: float, gamma_init: float = 1.0, seed: int = 0) -> GaussianInit:
    """Initial law N(0, I / (2 beta L + gamma_init))."""
    if beta <= 0 or L <= 0:
        raise ValueError("beta and L must be positive")
    if not 0.0 < gamma_init <= 1.0:
        raise ValueError(f"gamma_init must lie in (0, 1], got {gamma_init}")
    return GaussianInit(int(dim), 1.0 / (2.0 * beta * L + gamma_init), int(seed))


def _initial_states(init, chains: int, dim: int) -> np.ndarray:
    if hasattr(init, "sample_chains"):
        w0 = np.asarray(init.sample_chains(chains), dtype=float)
    else:
        w0 = np.array(init, dtype=float)
        w0 = np.broadcast_to(w0.reshape(-1, dim) if w0.ndim else w0, (chains, dim)).copy()
    if w0.shape != (chains, dim):
        raise ValueError(f"initial states must have shape {(chains, dim)}, got {w0.shape}")
    return w0


def _init_constant(p: Potential) -> float:
    if p.holder is not None:
        return p.holder[0]
    if p.smoothness_L is not None:
        return p.smoothness_L
    raise ValueError(f"{p.id} declares neither a Holder nor a smoothness constant; pass init explicitly")


# ---------------------------------------------------------------------------
# GLD


def gld_step(p: Potential, beta: float, eta: float, w, noise) -> np.ndarray:
    """One GLD update w - eta beta grad F(w) + sqrt(2 eta) noise."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    w = np.asarray(w, dtype=float)
    return w - eta * beta * p.gradient(w) + math.sqrt(2.0 * eta) * np.asarray(noise, dtype=float)


def stochastic_grad_oracle(components: Sequence[Potential], batch: int, seed: int = 0, sigma: float = 0.0):
    """Unbiased minibatch gradient of F = sum_i f_i.

    Each call draws ``batch`` distinct component indices uniformly (without
    replacement) and returns ``(n / batch) * sum_{j in batch} grad f_j(w)``,
    plus optional N(0, sigma^2 I) noise.
    """
    components = tuple(components)
    if not components:
        raise ValueError("component list is empty")
    dim = components[0].dim
    if any(c.dim != dim for c in components):
        raise ValueError("all components must share the same dimension")
    batch = int(batch)
    if not 1 <= batch <= len(components):
        raise ValueError(f"batch must lie in [1, {len(components)}]")
    n = len(components)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    scale = n / batch

    def oracle(w):
        w = np.asarray(w, dtype=float)
        if batch == n:
            idx = range(n)
        else:
            idx = rng.choice(n, size=batch, replace=False)
        g = scale * sum(components[j].gradient(w) for j in idx)
        if sigma > 0:
            g = g + sigma * rng.standard_normal(np.shape(g))
        return g

    return oracle


def run_gld(p: Potential, cfg: SamplerConfig, init=None, block: int = 4096) -> Trajectory:
    """Run ``cfg.chains`` independent GLD chains.

    Parameters
    ----------
    init : optional
        Anything with ``sample_chains(n)`` (e.g. :class:`GaussianInit`) or an
        array broadcastable to ``(chains, dim)``. Defaults to
        :func:`init_gaussian` with the potential's Holder/smoothness constant.
    """
    if cfg.stride > max(cfg.steps, 1) and cfg.steps > 0:
        raise ValueError("stride exceeds the number of steps")
    L = p.smoothness_L
    if L is not None and cfg.eta * cfg.beta * L >= 1.0:
        warnings.warn(
            f"eta*beta*L = {cfg.eta * cfg.beta * L:.3g} >= 1; GLD may be unstable",
            RuntimeWarning,
            stacklevel=2,
        )
    if init is None:
        init = init_gaussian(p.dim, cfg.beta, _init_constant(p), cfg.gamma_init, cfg.seed)

    if isinstance(cfg.oracle, StochasticOracle):
        if p.components is None:
            raise ValueError("a stochastic oracle needs a finite-sum potential")
        oracles = [
            stochastic_grad_oracle(p.components, cfg.oracle.components, _stream_seed(cfg.seed, c), cfg.oracle.sigma)
            for c in range(cfg.chains)
        ]

        def grad(w):
            return np.stack([o(w[c]) for c, o in enumerate(oracles)])
    else:
        grad = p.gradient

    d = p.dim
    w = _initial_states(init, cfg.chains, d)
    records = cfg.steps // cfg.stride + 1
    states = np.empty((records, cfg.chains, d))
    states[0] = w
    if not np.all(np.isfinite(w)):
        raise ChainDivergedError(0, int(np.argwhere(~np.isfinite(w))[0, 0]))

    gens = [chain_rng(cfg.seed, c, _NOISE) for c in range(cfg.chains)]
    drift = cfg.eta * cfg.beta
    diff = math.sqrt(2.0 * cfg.eta)
    t = 0
    while t < cfg.steps:
        nb = min(block, cfg.steps - t)
        noise = np.stack([g.standard_normal((nb, d)) for g in gens], axis=1)
        noise *= diff
        for k in range(nb):
            w = w - drift * grad(w) + noise[k]
            t += 1
            if t % cfg.stride == 0:
                if not np.all(np.isfinite(w)):
                    raise ChainDivergedError(t, int(np.argwhere(~np.isfinite(w))[0, 0]))
                states[t // cfg.stride] = w
        if not np.all(np.isfinite(w)):
            raise ChainDivergedError(t, int(np.argwhere(~np.isfinite(w))[0, 0]))

    return Trajectory(states, cfg, p.id, stride=cfg.stride, step_size=cfg.eta)


def _stream_seed(seed: int, chain: int) -> int:
    return int(chain_rng(seed, chain, _ORACLE).integers(0, 2**63))


# ---------------------------------------------------------------------------
# tail-regularised potential


def modified_potential(p: Potential, beta: float, gamma_init: float, R: float) -> Potential:
    """F_hat(w) = F(w) + (gamma / (2 beta)) max{0, |w| - R}^2.

    The penalty is C^1 with a (gamma/beta)-Lipschitz gradient, so a declared
    smoothness constant grows by gamma/beta. Dissipativity and the Holder
    constant of F are carried over unchanged.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    k = gamma_init / beta

    def excess(w):
        r = np.sqrt(np.sum(w * w, axis=-1))
        return r, np.maximum(r - R, 0.0)

    def value(w):
        _, e = excess(w)
        return p.value(w) + 0.5 * k * e * e

    def gradient(w):
        r, e = excess(w)
        scale = np.where(e > 0, k * e / np.where(r > 0, r, 1.0), 0.0)
        return p.gradient(w) + scale[..., None] * w

    return replace(
        p,
        name=f"{p.name}_hat",
        value=value,
        gradient=gradient,
        smoothness_L=None if p.smoothness_L is None else p.smoothness_L + k,
        pl_lambda=None,
        kl_params=None,
        linearizability=None,
        params={**p.params, "R": float(R), "gamma": float(gamma_init), "beta": float(beta)},
    )


# ---------------------------------------------------------------------------
# proximal sampler


def _check_h(p: Potential, beta: float, h: float) -> float:
    if p.smoothness_L is None:
        raise ValueError(f"{p.id} declares no smoothness constant; the RGO needs one")
    L = p.smoothness_L
    if h > 1.0 / (2.0 * beta * L) * (1 + 1e-12):
        raise ValueError(f"h = {h} exceeds 1/(2 beta L) = {1.0 / (2.0 * beta * L)}")
    return L


def proximal_oracle(p: Potential, beta: float, h: float, w_prime, tol: float = 1e-10, max_iter: int = 100_000):
    """Minimiser of g(w) = beta F(w) + |w - w'|^2 / (2h) by gradient descent.

    ``w_prime`` may be a single point or a batch ``(n, d)``; every row is
    iterated until ``|grad g| <= tol``.
    """
    L = _check_h(p, beta, h)
    wp = np.asarray(w_prime, dtype=float)
    single = wp.ndim <= 1
    wp = np.atleast_2d(wp.reshape(-1, p.dim) if single else wp)
    step = 1.0 / (beta * L + 1.0 / h)
    w = wp.copy()
    active = np.ones(len(w), dtype=bool)
    gnorm = np.full(len(w), np.inf)
    for it in range(max_iter + 1):
        wa = w[active]
        g = beta * p.gradient(wa) + (wa - wp[active]) / h
        gn = np.sqrt(np.sum(g * g, axis=-1))
        gnorm[active] = gn
        done = gn <= tol
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
        if it == max_iter:
            raise ProximalOracleError(float(gnorm.max()), it)
        w[idx[~done]] = wa[~done] - step * g[~done]
    return w[0] if single else w


def _g(p, beta, h, w, wp):
    diff = w - wp
    return beta * p.value(w) + np.sum(diff * diff, axis=-1) / (2.0 * h)


def _grad_g(p, beta, h, w, wp):
    return beta * p.gradient(w) + (w - wp) / h


def _rgo_envelope(p, beta, h, wp, tol):
    L = _check_h(p, beta, h)
    m_g = 1.0 / h - beta * L
    x_star = proximal_oracle(p, beta, h, wp, tol)
    gx = _g(p, beta, h, x_star, wp)
    dg = _grad_g(p, beta, h, x_star, wp)
    # proposal N(x* - grad g(x*)/m_g, I/m_g) has density exp(-q) with q <= g
    centre = x_star - dg / m_g
    return m_g, x_star, gx, dg, centre


def _log_accept(p, beta, h, y, wp, m_g, x_star, gx, dg):
    diff = y - x_star
    q = gx + np.sum(dg * diff, axis=-1) + 0.5 * m_g * np.sum(diff * diff, axis=-1)
    return q - _g(p, beta, h, y, wp)


def rgo_sample(
    p: Potential,
    beta: float,
    h: float,
    w_prime,
    seed: int | np.random.Generator = 0,
    size: int | None = None,
    tol: float = 1e-10,
    max_rejections: int = 10_000,
    stats: dict | None = None,
):
    """Exact draw(s) from pi(w | w') ~ exp(-beta F(w) - |w - w'|^2 / (2h)).

    Returns ``(point, rejections)``; with ``size`` the first element has
    shape ``(size, d)`` and ``rejections`` is the total over all draws.
    The acceptance ratio exp(q(y) - g(y)) is asserted to be <= 1 on every
    proposal; ``stats`` (if given) receives the largest log-ratio seen and
    the proposal count.
    """
    wp = np.asarray(w_prime, dtype=float).reshape(p.dim)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    m_g, x_star, gx, dg, centre = _rgo_envelope(p, beta, h, wp, tol)
    sd = 1.0 / math.sqrt(m_g)
    n = 1 if size is None else int(size)
    out = np.empty((n, p.dim))
    filled = 0
    proposals = 0
    max_log = -np.inf
    budget = max_rejections if size is None else max_rejections * n
    while filled < n:
        k = max(n - filled, 1)
        if size is not None:
            k = int(k * 1.6) + 8
        y = centre + sd * rng.standard_normal((k, p.dim))
        u = rng.random(k)
        la = _log_accept(p, beta, h, y, wp, m_g, x_star, gx, dg)
        _assert_ratio(la, gx)
        max_log = max(max_log, float(la.max()))
        acc = np.flatnonzero(np.log(u) < la)
        if size is None:
            # consume proposals one at a time so the stream matches a scalar loop
            first = acc[0] if len(acc) else k
            proposals += min(first + 1, k)
            if len(acc):
                out[0] = y[first]
                filled = 1
        else:
            take = acc[: n - filled]
            used = (take[-1] + 1) if len(take) == n - filled else k
            proposals += int(used)
            out[filled : filled + len(take)] = y[take]
            filled += len(take)
        rejections = proposals - filled
        if rejections > budget:
            raise RejectionLimitError(filled / max(proposals, 1), rejections)
    if stats is not None:
        stats["max_log_ratio"] = max_log
        stats["proposals"] = proposals
    return (out[0] if size is None else out), proposals - n


def _assert_ratio(log_ratio, scale):
    slack = 1e-9 * (1.0 + np.abs(scale))
    if np.any(log_ratio > slack):
        raise AssertionError(f"acceptance ratio exceeds 1 (log ratio {float(np.max(log_ratio)):.3e})")


def run_proximal(p: Potential, cfg: ProximalConfig, beta: float, init=None) -> Trajectory:
    """Alternate w'_k ~ N(w_k, h I) and w_{k+1} ~ RGO(w'_k) for every chain."""
    _check_h(p, beta, cfg.h)
    if init is None:
        init = init_gaussian(p.dim, beta, _init_constant(p), 1.0, cfg.seed)
    d = p.dim
    w = _initial_states(init, cfg.chains, d)
    states = np.empty((cfg.outer_steps + 1, cfg.chains, d))
    states[0] = w
    gens = [chain_rng(cfg.seed, c, _PROX) for c in range(cfg.chains)]
    sqrt_h = math.sqrt(cfg.h)
    total_rejections = 0
    max_log = -np.inf
    for k in range(cfg.outer_steps):
        wp = w + sqrt_h * np.stack([g.standard_normal(d) for g in gens])
        m_g, x_star, gx, dg, centre = _rgo_envelope(p, beta, cfg.h, wp, cfg.prox_tol)
        sd = 1.0 / math.sqrt(m_g)
        new = np.empty_like(w)
        for c, g in enumerate(gens):
            rejections = 0
            while True:
                y = centre[c] + sd * g.standard_normal(d)
                u = g.random()
                la = float(_log_accept(p, beta, cfg.h, y[None], wp[c][None], m_g, x_star[c][None], gx[c], dg[c][None])[0])
                _assert_ratio(la, gx[c])
                max_log = max(max_log, la)
                if math.log(u) < la if u > 0 else True:
                    break
                rejections += 1
                if rejections > cfg.max_rejections:
                    raise RejectionLimitError(1.0 / (rejections + 1), rejections)
            new[c] = y
            total_rejections += rejections
        w = new
        states[k + 1] = w
    info = {"rejections": total_rejections, "max_log_ratio": max_log}
    return Trajectory(states, cfg, p.id, stride=1, step_size=cfg.h, info=info)
