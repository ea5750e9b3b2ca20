"""Named, reproducible experiments over the catalogue.

A config is a JSON object such as::

    {"kind": "SPECTRAL",
     "potential": {"name": "quadratic", "params": {"c": 1}},
     "betas": [1, 4, 16],
     "grid": {"n": 4096}}

:func:`parse_config` validates every field (unknown keys are errors that
name their path) and fills defaults; :func:`run_experiment` evaluates the
experiment and writes ``metrics.csv``, ``report.json`` and, for kinds with
a natural curve, ``plot.svg`` into the output directory. Outputs depend
only on the config, so rerunning gives byte-identical files.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
import platform
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import scipy

from . import isoperimetry as iso
from . import lyapunov_certificates as lc
from . import samplers as smp
from .io import atomic_write, dumps_json, fmt_float
from .potentials import CATALOGUE_NAMES, ConditionKind, Potential, catalogue, quadratic_growth_constants, sweep_check

__all__ = [
    "ExperimentKind",
    "ConfigError",
    "ExperimentError",
    "ExperimentConfig",
    "MetricRow",
    "ExperimentResult",
    "CSV_COLUMNS",
    "parse_config",
    "run_experiment",
    "emit_report",
    "auto_bounds",
    "axis_range",
    "render_svg",
]

__version__ = "0.1.0"

CSV_COLUMNS = ("experiment_id", "kind", "beta", "parameter", "metric", "value", "provenance")


class ExperimentKind(str, enum.Enum):
    SAMPLE_GLD = "SAMPLE_GLD"
    SAMPLE_PROX = "SAMPLE_PROX"
    SPECTRAL = "SPECTRAL"
    LOCAL_PI = "LOCAL_PI"
    CERTIFY = "CERTIFY"
    VERIFY_LYAPUNOV = "VERIFY_LYAPUNOV"
    BETA_SCALING = "BETA_SCALING"
    INIT_DIVERGENCE = "INIT_DIVERGENCE"


class ConfigError(ValueError):
    """Schema violation; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ExperimentError(RuntimeError):
    """A module error raised while running an experiment, with its context attached."""


# ---------------------------------------------------------------------------
# schema

_SAMPLER_DEFAULTS = {
    "eta": 1e-3,
    "steps": 10_000,
    "chains": 16,
    "stride": 1,
    "burn_in": 0.5,
    "gamma_init": 1.0,
    "h": None,
    "outer_steps": 200,
    "max_rejections": 10_000,
    "save_trajectory": False,
}
_GRID_DEFAULTS = {"n": 2048, "bounds": None, "tol": 1e-10}
_CERT_DEFAULTS = {
    "kind": "PI_PL",
    "l_b": 1.0,
    "C_local": None,
    "beta_factor": None,
    "b_prime": 0.5,
    "ball_n": 4096,
}
_LOCAL_DEFAULTS = {"center": None, "radius": None, "l_b": 1.0}
_TOP_KEYS = {"kind", "id", "potential", "betas", "seed", "out", "sampler", "grid", "certificate", "local", "plot"}
_CERT_KINDS = ("PI_PL", "PI_KL", "PI_GEN", "LSI_PL", "LSI_GEN")
_NEEDS_BETA = {
    ExperimentKind.SAMPLE_GLD,
    ExperimentKind.SAMPLE_PROX,
    ExperimentKind.SPECTRAL,
    ExperimentKind.LOCAL_PI,
    ExperimentKind.BETA_SCALING,
    ExperimentKind.INIT_DIVERGENCE,
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: ExperimentKind
    id: str
    potential: dict
    betas: tuple[float, ...]
    seed: int
    out: str
    sampler: dict
    grid: dict
    certificate: dict
    local: dict
    plot: bool

    @property
    def runs(self) -> int:
        return max(len(self.betas), 1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "id": self.id,
            "potential": self.potential,
            "betas": list(self.betas),
            "seed": self.seed,
            "out": self.out,
            "sampler": self.sampler,
            "grid": self.grid,
            "certificate": self.certificate,
            "local": self.local,
            "plot": self.plot,
        }

    def to_json(self) -> str:
        return dumps_json(self.to_dict())

    def build_potential(self) -> Potential:
        return catalogue(self.potential["name"], self.potential["params"])


def _number(path, v, *, positive=False, nonneg=False, integer=False, allow_none=False, lo=None, hi=None):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {json.dumps(v)}")
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if integer:
        if float(v) != int(v):
            raise ConfigError(path, f"expected an integer, got {v}")
        v = int(v)
    else:
        v = float(v)
    if positive and not v > 0:
        raise ConfigError(path, f"must be positive, got {v}")
    if nonneg and v < 0:
        raise ConfigError(path, f"must be nonnegative, got {v}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {v}")
    return v


def _section(path: str, raw, defaults: Mapping) -> dict:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    for k in raw:
        if k not in defaults:
            raise ConfigError(f"{path}.{k}", f"unknown key {k!r}")
    out = dict(defaults)
    out.update(raw)
    return out


def _bounds(path, v):
    if v is None:
        return None
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a list of [lower, upper] pairs")
    out = []
    for i, pair in enumerate(v):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{path}[{i}]", "expected [lower, upper]")
        lo = _number(f"{path}[{i}][0]", pair[0])
        hi = _number(f"{path}[{i}][1]", pair[1])
        if not hi > lo:
            raise ConfigError(f"{path}[{i}]", "upper bound must exceed lower bound")
        out.append([lo, hi])
    return out


def _validate(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("$", "config must be a JSON object")
    for k in d:
        if k not in _TOP_KEYS:
            raise ConfigError(f"$.{k}", f"unknown key {k!r}")
    if "kind" not in d:
        raise ConfigError("$.kind", "missing required key")
    try:
        kind = ExperimentKind(d["kind"])
    except (ValueError, TypeError):
        raise ConfigError("$.kind", f"unknown experiment kind {d['kind']!r}") from None

    pot = d.get("potential")
    if not isinstance(pot, dict):
        raise ConfigError("$.potential", "expected an object with 'name' and optional 'params'")
    for k in pot:
        if k not in ("name", "params"):
            raise ConfigError(f"$.potential.{k}", f"unknown key {k!r}")
    name = pot.get("name")
    if name not in CATALOGUE_NAMES:
        raise ConfigError("$.potential.name", f"unknown potential {name!r}; choose from {', '.join(CATALOGUE_NAMES)}")
    params = pot.get("params", {}) or {}
    if not isinstance(params, dict):
        raise ConfigError("$.potential.params", "expected an object")
    params = {k: _number(f"$.potential.params.{k}", v) for k, v in sorted(params.items())}
    try:
        p = catalogue(name, params)
    except ValueError as exc:
        raise ConfigError("$.potential.params", str(exc)) from None

    betas = d.get("betas", [])
    if not isinstance(betas, list):
        raise ConfigError("$.betas", "expected a list of positive numbers")
    betas = tuple(_number(f"$.betas[{i}]", b, positive=True) for i, b in enumerate(betas))

    seed = _number("$.seed", d.get("seed", 0), integer=True, nonneg=True)
    out = d.get("out", "out")
    if not isinstance(out, str) or not out:
        raise ConfigError("$.out", "expected a nonempty path string")
    exp_id = d.get("id", f"{kind.value.lower()}-{p.id}")
    if not isinstance(exp_id, str) or not exp_id:
        raise ConfigError("$.id", "expected a nonempty string")
    plot = d.get("plot", True)
    if not isinstance(plot, bool):
        raise ConfigError("$.plot", "expected true or false")

    s = _section("$.sampler", d.get("sampler"), _SAMPLER_DEFAULTS)
    s["eta"] = _number("$.sampler.eta", s["eta"], positive=True)
    s["steps"] = _number("$.sampler.steps", s["steps"], integer=True, positive=True)
    s["chains"] = _number("$.sampler.chains", s["chains"], integer=True, positive=True)
    s["stride"] = _number("$.sampler.stride", s["stride"], integer=True, positive=True)
    s["burn_in"] = _number("$.sampler.burn_in", s["burn_in"], lo=0.0, hi=0.99)
    s["gamma_init"] = _number("$.sampler.gamma_init", s["gamma_init"], positive=True, hi=1.0)
    s["h"] = _number("$.sampler.h", s["h"], positive=True, allow_none=True)
    s["outer_steps"] = _number("$.sampler.outer_steps", s["outer_steps"], integer=True, positive=True)
    s["max_rejections"] = _number("$.sampler.max_rejections", s["max_rejections"], integer=True, nonneg=True)
    if not isinstance(s["save_trajectory"], bool):
        raise ConfigError("$.sampler.save_trajectory", "expected true or false")

    g = _section("$.grid", d.get("grid"), _GRID_DEFAULTS)
    g["n"] = _number("$.grid.n", g["n"], integer=True, lo=3)
    g["tol"] = _number("$.grid.tol", g["tol"], positive=True)
    g["bounds"] = _bounds("$.grid.bounds", g["bounds"])
    if g["bounds"] is not None and len(g["bounds"]) != p.dim:
        raise ConfigError("$.grid.bounds", f"expected {p.dim} axis pair(s) for {p.id}")
    if p.dim == 2 and g["n"] > iso.MAX_2D_NODES:
        raise ConfigError("$.grid.n", f"2D grids are capped at {iso.MAX_2D_NODES} nodes per axis")
    if p.dim > 2 and kind is not ExperimentKind.VERIFY_LYAPUNOV and kind is not ExperimentKind.SAMPLE_GLD:
        raise ConfigError("$.potential.params", "grid experiments support dimension 1 or 2 only")

    c = _section("$.certificate", d.get("certificate"), _CERT_DEFAULTS)
    if c["kind"] not in _CERT_KINDS:
        raise ConfigError("$.certificate.kind", f"expected one of {', '.join(_CERT_KINDS)}")
    c["l_b"] = _number("$.certificate.l_b", c["l_b"], positive=True)
    c["C_local"] = _number("$.certificate.C_local", c["C_local"], nonneg=True, allow_none=True)
    c["beta_factor"] = _number("$.certificate.beta_factor", c["beta_factor"], positive=True, allow_none=True)
    c["b_prime"] = _number("$.certificate.b_prime", c["b_prime"], positive=True)
    c["ball_n"] = _number("$.certificate.ball_n", c["ball_n"], integer=True, lo=16)

    loc = _section("$.local", d.get("local"), _LOCAL_DEFAULTS)
    if loc["center"] is not None:
        if not isinstance(loc["center"], list) or len(loc["center"]) != p.dim:
            raise ConfigError("$.local.center", f"expected a list of {p.dim} numbers")
        loc["center"] = [_number(f"$.local.center[{i}]", v) for i, v in enumerate(loc["center"])]
    loc["radius"] = _number("$.local.radius", loc["radius"], positive=True, allow_none=True)
    loc["l_b"] = _number("$.local.l_b", loc["l_b"], positive=True)

    if kind in _NEEDS_BETA and not betas:
        raise ConfigError("$.betas", f"{kind.value} needs at least one beta")
    if kind is ExperimentKind.CERTIFY and not betas and c["beta_factor"] is None:
        raise ConfigError("$.betas", "CERTIFY needs betas or certificate.beta_factor")
    if kind is ExperimentKind.BETA_SCALING and len(betas) < 2:
        raise ConfigError("$.betas", "BETA_SCALING needs at least two betas")

    return ExperimentConfig(
        kind, exp_id, {"name": name, "params": params}, betas, seed, out, s, g, c, loc, plot
    )


def parse_config(text: str | Mapping) -> ExperimentConfig:
    """Validate a JSON config (text or already-decoded object) and fill defaults."""
    if isinstance(text, (str, bytes)):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"malformed JSON: {exc}") from None
    else:
        d = json.loads(json.dumps(text))
    return _validate(d)


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class MetricRow:
    experiment_id: str
    kind: str
    beta: float | None
    parameter: str
    metric: str
    value: Any
    provenance: str

    def cells(self) -> list[str]:
        v = self.value
        if isinstance(v, (bool, np.bool_)):
            val = "true" if v else "false"
        elif isinstance(v, (int, np.integer)):
            val = str(int(v))
        elif isinstance(v, (float, np.floating)):
            val = fmt_float(v)
        else:
            val = str(v)
        beta = "" if self.beta is None else fmt_float(self.beta)
        return [self.experiment_id, self.kind, beta, self.parameter, self.metric, val, self.provenance]


@dataclass
class ExperimentResult:
    config: ExperimentConfig | None
    rows: list[MetricRow] = field(default_factory=list)
    certificates: list[dict] = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)  # name -> (x, y)
    plot_log: bool = False
    plot_labels: tuple[str, str] = ("beta", "value")
    files: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict)  # beta -> Trajectory, when requested

    def add(self, beta, metric, value, provenance, parameter=""):
        cfg = self.config
        self.rows.append(
            MetricRow(cfg.id if cfg else "", cfg.kind.value if cfg else "", beta, parameter, metric, value, provenance)
        )

    def metric(self, name: str, beta: float | None = None):
        for r in self.rows:
            if r.metric == name and (beta is None or r.beta == beta):
                return r.value
        raise KeyError(name)

    def echo(self) -> dict:
        return {
            "config": self.config.to_dict() if self.config else None,
            "versions": {
                "gibbslab": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "certificates": self.certificates,
            "tolerances": self.tolerances,
            "metrics": [dict(zip(CSV_COLUMNS, r.cells())) for r in self.rows],
        }


# ---------------------------------------------------------------------------
# report writers


def _csv_text(rows: Sequence[MetricRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def axis_range(values, log: bool = False, margin: float = 0.05) -> tuple[float, float]:
    """Plot range covering ``values`` with ``margin`` of the span on each side.

    With ``log`` the margin is taken in log10 space and the range returned
    in data units. A zero span is widened to a unit (or one decade) interval.
    """
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if log:
        v = v[v > 0]
    if len(v) == 0:
        return (0.0, 1.0) if not log else (1.0, 10.0)
    t = np.log10(v) if log else v
    lo, hi = float(t.min()), float(t.max())
    span = hi - lo
    if span == 0:
        lo, hi, span = lo - 0.5, hi + 0.5, 1.0
    lo, hi = lo - margin * span, hi + margin * span
    return (10.0**lo, 10.0**hi) if log else (lo, hi)


def render_svg(series: Mapping[str, tuple], log: bool = False, labels=("x", "y"), width=640, height=420) -> str:
    """Static SVG line plot; no scripting, no external resources."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    xs = np.concatenate([np.asarray(s[0], float) for s in series.values()]) if series else np.array([])
    ys = np.concatenate([np.asarray(s[1], float) for s in series.values()]) if series else np.array([])
    xr, yr = axis_range(xs, log), axis_range(ys, log)
    left, right, top, bottom = 70, 20, 20, 50
    pw, ph = width - left - right, height - top - bottom
    tf = (lambda a: np.log10(a)) if log else (lambda a: a)
    x0, x1 = tf(np.array(xr))
    y0, y1 = tf(np.array(yr))

    def px(x):
        return left + (tf(x) - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (tf(y) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="13">{labels[0]}'
        + (" (log)" if log else "") + "</text>",
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">{labels[1]}' + (" (log)" if log else "") + "</text>",
    ]
    for val, anchor in ((xr[0], "start"), (xr[1], "end")):
        out.append(f'<text x="{px(val):.1f}" y="{top + ph + 16}" text-anchor="{anchor}" font-size="11">{val:.4g}</text>')
    for val in yr:
        out.append(f'<text x="{left - 4}" y="{py(val) + 4:.1f}" text-anchor="end" font-size="11">{val:.4g}</text>')
    for k, (name, (x, y)) in enumerate(series.items()):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y) & ((x > 0) & (y > 0) if log else True)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
        col = colors[k % len(colors)]
        out.append(f'<polyline fill="none" stroke="{col}" stroke-width="1.5" points="{pts}"/>')
        for a, b in zip(x[ok], y[ok]):
            out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{col}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 16 + 15 * k}" font-size="12" fill="{col}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(results: ExperimentResult, format: str, path) -> Path:
    """Write one report file (``CSV``, ``JSON`` or ``SVG``) atomically."""
    fmt = format.upper()
    if fmt == "CSV":
        text = _csv_text(results.rows)
    elif fmt == "JSON":
        text = dumps_json(results.echo())
    elif fmt == "SVG":
        text = render_svg(results.series, results.plot_log, results.plot_labels)
    else:
        raise ValueError(f"unknown report format {format!r}; use CSV, JSON or SVG")
    return atomic_write(path, text)


# ---------------------------------------------------------------------------
# experiment bodies


def auto_bounds(p: Potential, beta: float, depth: float = 40.0) -> list[list[float]]:
    """Origin-centred box [-s, s]^d containing the minimizer, with beta F >= depth where each axis leaves it.

    ``depth = 40`` puts the boundary weight near exp(-40), far below the grid gate.
    """
    mn = np.asarray(p.minimizer, dtype=float)
    s = float(np.max(np.abs(mn))) + 0.25
    for _ in range(400):
        edge = []
        for ax in range(p.dim):
            for sign in (-1.0, 1.0):
                x = mn.copy()
                x[ax] = sign * s
                edge.append(float(p.value(x)))
        if beta * min(edge) >= depth:
            break
        s *= 1.1
    else:
        raise ValueError(f"could not find grid bounds for {p.id} at beta = {beta}")
    return [[-s, s] for _ in range(p.dim)]


def _grid(cfg: ExperimentConfig, p: Potential, beta: float) -> iso.GridMeasure:
    bounds = cfg.grid["bounds"] or auto_bounds(p, beta)
    return iso.grid_measure(p, beta, bounds, cfg.grid["n"])


def _tolerances(cfg: ExperimentConfig) -> dict:
    return {
        "eigen_tol": cfg.grid["tol"],
        "boundary_ratio_max": iso.BOUNDARY_RATIO_MAX,
        "histogram_outside_max": 1e-3,
    }


def _run_sample(cfg, p, res, proximal: bool):
    s = cfg.sampler
    for beta in cfg.betas:
        gm = _grid(cfg, p, beta)
        res.add(beta, "boundary_ratio", gm.boundary_ratio, "isoperimetry.grid_measure")
        if proximal:
            L = p.smoothness_L
            if L is None:
                raise ValueError(f"{p.id} declares no smoothness constant; the proximal sampler needs one")
            h = s["h"] if s["h"] is not None else smp.default_h(beta, L)
            pc = smp.ProximalConfig(h=h, outer_steps=s["outer_steps"], chains=s["chains"], seed=cfg.seed,
                                    max_rejections=s["max_rejections"])
            tr = smp.run_proximal(p, pc, beta)
            res.add(beta, "h", h, "config" if s["h"] is not None else "samplers.default_h")
            res.add(beta, "rejections", tr.info["rejections"], "samplers.run_proximal")
            res.add(beta, "max_log_accept_ratio", tr.info["max_log_ratio"], "samplers.run_proximal")
            prov = "samplers.run_proximal"
        else:
            sc = smp.SamplerConfig(beta=beta, eta=s["eta"], steps=s["steps"], chains=s["chains"],
                                   gamma_init=s["gamma_init"], seed=cfg.seed, stride=s["stride"])
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                tr = smp.run_gld(p, sc)
            res.add(beta, "step_size_warning", bool(caught), "samplers.run_gld")
            prov = "samplers.run_gld"
        if s["save_trajectory"]:
            res.trajectories[beta] = tr
        hist = iso.histogram(tr, gm, burn_in=s["burn_in"])
        tv = iso.divergence(hist, gm, "TV")
        res.add(beta, "tv_to_grid", tv, f"isoperimetry.divergence({prov})", f"burn_in={fmt_float(s['burn_in'])}")
        steps = tr.steps
        keep = steps >= s["burn_in"] * steps[-1]
        x = tr.states[keep].reshape(-1, p.dim)
        res.add(beta, "sample_second_moment", float(np.mean(np.sum(x * x, axis=-1))), prov)
        M, S, mF = iso.moments(gm)
        res.add(beta, "grid_second_moment", S, "isoperimetry.moments")
        res.series.setdefault("tv_to_grid", ([], []))
        res.series["tv_to_grid"][0].append(beta)
        res.series["tv_to_grid"][1].append(tv)
    res.plot_labels = ("beta", "TV(histogram, grid)")


def _spectral_rows(res, beta, gm, tol, prefix=""):
    r = iso.generator_spectral_gap(gm, tol=tol)
    res.add(beta, prefix + "lambda1", r.lambda1, "isoperimetry.generator_spectral_gap", f"n={gm.shape[0]}")
    res.add(beta, prefix + "c_pi", r.c_pi, "isoperimetry.generator_spectral_gap", f"n={gm.shape[0]}")
    res.add(beta, prefix + "residual", r.residual, "isoperimetry.generator_spectral_gap")
    return r


def _run_spectral(cfg, p, res):
    for beta in cfg.betas:
        gm = _grid(cfg, p, beta)
        r = _spectral_rows(res, beta, gm, cfg.grid["tol"])
        M, S, mF = iso.moments(gm)
        res.add(beta, "M", M, "isoperimetry.moments")
        res.add(beta, "S", S, "isoperimetry.moments")
        res.add(beta, "mean_F", mF, "isoperimetry.moments")
        res.series.setdefault("c_pi", ([], []))
        res.series["c_pi"][0].append(beta)
        res.series["c_pi"][1].append(r.c_pi)
    res.plot_labels = ("beta", "C_PI")


def _run_beta_scaling(cfg, p, res):
    _run_spectral(cfg, p, res)
    b = np.array(cfg.betas)
    c = np.array(res.series["c_pi"][1])
    slope, icpt = np.polyfit(np.log(b), np.log(c), 1)
    res.add(None, "loglog_slope", float(slope), "least_squares(log c_pi ~ log beta)", f"runs={len(b)}")
    res.add(None, "loglog_intercept", float(icpt), "least_squares(log c_pi ~ log beta)", f"runs={len(b)}")
    res.plot_log = True


def _local_ball(cfg, p, l_b, radius=None, center=None):
    c = np.asarray(center if center is not None else p.minimizer, dtype=float)
    if radius is None:
        if p.sublevel_radius is None:
            raise ValueError(f"{p.id} declares no sublevel radius; give local.radius")
        radius = float(p.sublevel_radius(l_b))
    return c, float(radius)


def _local_grid(cfg, p, beta, center, radius):
    bounds = cfg.grid["bounds"]
    if bounds is None:
        auto = auto_bounds(p, beta)
        bounds = [[min(lo, x - 1.2 * radius), max(hi, x + 1.2 * radius)] for (lo, hi), x in zip(auto, center)]
    return iso.grid_measure(p, beta, bounds, cfg.grid["n"])


def _run_local(cfg, p, res):
    loc = cfg.local
    center, radius = _local_ball(cfg, p, loc["l_b"], loc["radius"], loc["center"])
    for beta in cfg.betas:
        gm = _local_grid(cfg, p, beta, center, radius)
        r = iso.local_poincare(gm, center, radius, tol=cfg.grid["tol"])
        par = f"radius={fmt_float(radius)}"
        res.add(beta, "c_pi_local", r.c_pi, "isoperimetry.local_poincare(neumann ball restriction)", par)
        res.add(beta, "residual", r.residual, "isoperimetry.local_poincare", par)
        res.add(beta, "payne_weinberger_bound", iso.payne_weinberger_bound(2 * radius), "diam^2/pi^2", par)
        res.series.setdefault("c_pi_local", ([], []))
        res.series["c_pi_local"][0].append(beta)
        res.series["c_pi_local"][1].append(r.c_pi)
    res.plot_labels = ("beta", "C_PI,local")


def _threshold(cfg, p, kind, l_b) -> float:
    """Inverse-temperature threshold of a certificate; C_local does not enter it."""
    d = p.dim
    if kind in ("PI_PL", "LSI_PL"):
        a = 1.0 + p.smoothness_L / (p.pl_lambda * l_b)
        thr = 2.0 * (d + 2.0 / p.pl_lambda) * a
        return max(2.0, thr) if kind == "LSI_PL" else thr
    if kind == "PI_KL":
        lam, th = p.kl_params
        L = p.smoothness_L
        a = 1.0 + L / (lam * l_b ** (1.0 + th))
        return 2.0 * (d + max(4.0 / L, 4.0 * L / lam**2)) * a
    raise ValueError(f"beta_factor is not supported for {kind}; give explicit betas")


def _certificate(cfg, p, kind, beta, l_b, C_local, gm):
    d = p.dim
    if kind == "PI_PL":
        return lc.cert_pi_pl(p.pl_lambda, p.smoothness_L, l_b, C_local, d, beta)
    if kind == "PI_KL":
        if p.kl_params is None:
            raise ValueError(f"{p.id} declares no KL constants")
        lam, th = p.kl_params
        return lc.cert_pi_kl(lam, th, p.smoothness_L, l_b, C_local, d, beta)
    M, S, _ = iso.moments(gm)
    if kind == "LSI_PL":
        return lc.cert_lsi_pl(p.pl_lambda, p.smoothness_L, l_b, C_local, d, beta, S, float(np.linalg.norm(p.minimizer)))
    spec = lc.pl_lyapunov_spec(p, cfg.certificate["b_prime"])
    bp = lc.BumpProfile(np.asarray(p.minimizer, dtype=float), spec.R)
    sups = lc.estimate_ball_sups(spec, bp, cfg.certificate["ball_n"])
    qg = quadratic_growth_constants(p) if kind == "LSI_GEN" else None
    if kind == "PI_GEN":
        return lc.cert_general(spec, p, sups, l_b, C_local, d, beta)
    return lc.cert_lsi_general(spec, p, sups, l_b, C_local, d, beta, S, qg)


def _run_certify(cfg, p, res):
    c = cfg.certificate
    kind, l_b = c["kind"], c["l_b"]
    if kind in ("PI_PL", "LSI_PL", "PI_GEN", "LSI_GEN") and p.pl_lambda is None:
        raise ValueError(f"{kind} needs a PL constant; {p.id} declares none")
    if p.smoothness_L is None:
        raise ValueError(f"{p.id} declares no smoothness constant")
    betas = list(cfg.betas)
    if c["beta_factor"] is not None:
        betas = betas or [c["beta_factor"] * _threshold(cfg, p, kind, l_b)]
    center, radius = _local_ball(cfg, p, l_b)
    for beta in betas:
        gm = _local_grid(cfg, p, beta, center, radius)
        if c["C_local"] is None:
            loc = iso.local_poincare(gm, center, radius, tol=cfg.grid["tol"])
            C_local, prov = loc.c_pi, "isoperimetry.local_poincare(neumann ball restriction)"
        else:
            C_local, prov = c["C_local"], "config"
        res.add(beta, "C_local", C_local, prov, f"radius={fmt_float(radius)}")
        cert = _certificate(cfg, p, kind, beta, l_b, C_local, gm)
        res.certificates.append(cert.to_dict())
        res.add(beta, "certified_bound", cert.bound, f"certificate:{kind}", f"l_b={fmt_float(l_b)}")
        res.add(beta, "beta_threshold", cert.beta_threshold, f"certificate:{kind}", f"l_b={fmt_float(l_b)}")
        rec = lc.recompute(cert)
        res.add(beta, "recompute_identical", rec.bound == cert.bound and rec.beta_threshold == cert.beta_threshold,
                "lyapunov_certificates.recompute")
        r = _spectral_rows(res, beta, gm, cfg.grid["tol"], prefix="measured_")
        res.add(beta, "certificate_sound", bool(cert.bound >= r.c_pi), "certified_bound >= measured_c_pi")
        res.series.setdefault("certified", ([], []))
        res.series.setdefault("measured", ([], []))
        res.series["certified"][0].append(beta)
        res.series["certified"][1].append(cert.bound)
        res.series["measured"][0].append(beta)
        res.series["measured"][1].append(r.c_pi)
    res.plot_log = True
    res.plot_labels = ("beta", "C_PI")


def _run_verify_lyapunov(cfg, p, res):
    rep = lc.poly_checks()
    prov = "lyapunov_certificates.poly_checks"
    res.add(None, "h_min_on_half_one", rep.h_min, prov)
    res.add(None, "h_at_half", rep.h_half, prov)
    res.add(None, "h_at_one", rep.h_one, prov)
    res.add(None, "h3_argmin", rep.h3_argmin, prov)
    res.add(None, "h3_argmin_error", abs(rep.h3_argmin - (1.0 - math.sqrt(7.0 / 30.0))), prov)
    res.add(None, "p_tilde_min", rep.p_tilde_min, prov)

    # bump gradient against central differences on the shell
    bp = lc.BumpProfile(np.asarray(p.minimizer, dtype=float), 1.0)
    rng = np.random.default_rng(cfg.seed)
    errs = []
    for _ in range(100):
        u = rng.standard_normal(p.dim)
        u /= np.linalg.norm(u)
        w = bp.center + (bp.R + rng.uniform(0.15, 0.9)) * u
        g = lc.bump_grad(bp, w)
        fd = np.empty(p.dim)
        for i in range(p.dim):
            e = np.zeros(p.dim)
            e[i] = 1e-6
            fd[i] = (lc.bump_eval(bp, w + e) - lc.bump_eval(bp, w - e)) / 2e-6
        errs.append(float(np.linalg.norm(fd - g) / np.linalg.norm(g)))
    res.add(None, "bump_grad_fd_max_rel_error", max(errs), "central differences at 100 shell points")

    # landscape margins on a dense grid
    window = p.smooth_window if p.smooth_window is not None else 10.0
    dom = [[float(m) - window, float(m) + window] if p.smooth_window is None else [-window, window] for m in p.minimizer]
    n = 100_000 if p.dim == 1 else 317
    checks = [ConditionKind.SMOOTH_GRAD_BOUND]
    if p.pl_lambda is not None:
        checks += [ConditionKind.PL, ConditionKind.QUAD_GROWTH]
    if p.kl_params is not None:
        checks.append(ConditionKind.KL)
    if p.dissipativity is not None:
        checks.append(ConditionKind.DISSIPATIVE)
    for k in checks:
        if k is ConditionKind.SMOOTH_GRAD_BOUND and p.smoothness_L is None:
            continue
        r = sweep_check(p, k, dom, n)
        res.add(None, f"margin_{k.value}", r.min_margin, "potentials.sweep_check", f"points={r.points_checked}")
    if p.pl_lambda is not None:
        spec = lc.pl_lyapunov_spec(p, cfg.certificate["b_prime"])
        res.add(None, "lyapunov_g_monotone", spec.check_monotone(), "LyapunovSpec.check_monotone")
    res.plot_labels = ("x", "value")


def _run_init_divergence(cfg, p, res):
    s = cfg.sampler
    if p.holder is None:
        raise ValueError(f"{p.id} declares no Holder constants")
    for beta in cfg.betas:
        gm = _grid(cfg, p, beta)
        var0 = 1.0 / (2.0 * beta * p.holder[0] + s["gamma_init"])
        g0 = iso.gaussian_grid_measure(gm.axes, var0)
        M, S, _ = iso.moments(gm)
        cert = lc.init_divergence_bound(p, beta, s["gamma_init"], M)
        res.certificates.append(cert.to_dict())
        kl = iso.divergence(g0, gm, "KL")
        chi2 = iso.divergence(g0, gm, "CHI2")
        res.add(beta, "kl_init", kl, "isoperimetry.divergence(grid)")
        res.add(beta, "log1p_chi2_init", math.log1p(chi2), "isoperimetry.divergence(grid)")
        res.add(beta, "bound", cert.bound, "certificate:INIT_DIV")
        res.add(beta, "bound_holds", bool(kl <= cert.bound and math.log1p(chi2) <= cert.bound),
                "kl_init <= bound and log1p_chi2_init <= bound")
        for name, val in (("kl_init", kl), ("bound", cert.bound)):
            res.series.setdefault(name, ([], []))
            res.series[name][0].append(beta)
            res.series[name][1].append(val)
    res.plot_log = True
    res.plot_labels = ("beta", "divergence")


_RUNNERS = {
    ExperimentKind.SAMPLE_GLD: lambda c, p, r: _run_sample(c, p, r, False),
    ExperimentKind.SAMPLE_PROX: lambda c, p, r: _run_sample(c, p, r, True),
    ExperimentKind.SPECTRAL: _run_spectral,
    ExperimentKind.LOCAL_PI: _run_local,
    ExperimentKind.CERTIFY: _run_certify,
    ExperimentKind.VERIFY_LYAPUNOV: _run_verify_lyapunov,
    ExperimentKind.BETA_SCALING: _run_beta_scaling,
    ExperimentKind.INIT_DIVERGENCE: _run_init_divergence,
}


def evaluate(cfg: ExperimentConfig) -> ExperimentResult:
    """Run an experiment in memory without writing files."""
    p = cfg.build_potential()
    res = ExperimentResult(cfg, tolerances=_tolerances(cfg))
    try:
        _RUNNERS[cfg.kind](cfg, p, res)
    except (ConfigError, ExperimentError):
        raise
    except lc.CertificateError as exc:
        raise ExperimentError(f"experiment {cfg.id!r} ({cfg.kind.value}, {p.id}): {exc}") from exc
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        raise ExperimentError(f"experiment {cfg.id!r} ({cfg.kind.value}, {p.id}): {exc}") from exc
    return res


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None) -> ExperimentResult:
    """Evaluate ``cfg`` and write metrics.csv, report.json and (optionally) plot.svg."""
    res = evaluate(cfg)
    outdir = Path(out if out is not None else cfg.out)
    res.files["csv"] = emit_report(res, "CSV", outdir / "metrics.csv")
    res.files["json"] = emit_report(res, "JSON", outdir / "report.json")
    if cfg.plot and res.series:
        res.files["svg"] = emit_report(res, "SVG", outdir / "plot.svg")
    for k, (beta, tr) in enumerate(sorted(res.trajectories.items())):
        res.files[f"trajectory_{k}"] = outdir / f"trajectory_beta{fmt_float(beta)}.csv"
        tr.to_csv(res.files[f"trajectory_{k}"])
    return res
