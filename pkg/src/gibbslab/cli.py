"""Command line front end.

Every subcommand builds an experiment config and hands it to the harness,
so ``gibbslab spectral ...`` and ``gibbslab experiment cfg.json`` with the
equivalent config write the same files.

Exit status: 0 on success, 2 for invalid input, 1 when a computation fails.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import sys
from pathlib import Path

from . import harness
from .io import dumps_json, fmt_float
from .potentials import CATALOGUE_NAMES, catalogue

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INVALID)


def _params(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise harness.ConfigError("--param", f"expected key=value, got {item!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise harness.ConfigError(f"--param {key}", f"not a number: {val!r}") from None
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    p.add_argument("--out", default=None, help="output directory (default ./out)")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP threads; results do not depend on it")


def _potential_args(p: argparse.ArgumentParser):
    p.add_argument("potential", choices=CATALOGUE_NAMES)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="potential parameter, repeatable")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="gibbslab", description="Gibbs-measure sampling, spectral gaps and certified Poincare constants.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    cat = sub.add_parser("catalogue", help="inspect the potential catalogue")
    cat.add_argument("action", choices=["list"])
    cat.add_argument("--json", action="store_true", help="print declared constants as JSON")

    s = sub.add_parser("sample", help="run GLD or the proximal sampler and compare with the grid Gibbs measure")
    _potential_args(s)
    s.add_argument("--beta", type=float, nargs="+", required=True)
    s.add_argument("--method", choices=["gld", "proximal"], default="gld")
    s.add_argument("--eta", type=float)
    s.add_argument("--steps", type=int)
    s.add_argument("--chains", type=int)
    s.add_argument("--stride", type=int)
    s.add_argument("--h", type=float, help="proximal step (default 1/(4 beta L))")
    s.add_argument("--outer-steps", type=int)
    s.add_argument("--burn-in", type=float)
    s.add_argument("--grid-n", type=int)
    s.add_argument("--save-trajectory", action="store_true")
    _common(s)

    sp = sub.add_parser("spectral", help="grid spectral gap C_PI of mu_beta")
    _potential_args(sp)
    sp.add_argument("--beta", type=float, nargs="+", required=True)
    sp.add_argument("--grid-n", type=int)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--scaling", action="store_true", help="also fit the log-log slope of C_PI against beta")
    _common(sp)

    c = sub.add_parser("certify", help="issue a certificate and compare it with the measured constant")
    _potential_args(c)
    c.add_argument("--kind", choices=["PI_PL", "PI_KL", "PI_GEN", "LSI_PL", "LSI_GEN"], default="PI_PL")
    c.add_argument("--beta", type=float, nargs="+")
    c.add_argument("--beta-factor", type=float, help="use beta = factor x the certificate threshold")
    c.add_argument("--l-b", type=float, default=1.0)
    c.add_argument("--c-local", type=float, help="skip the local eigen-solve and use this value")
    c.add_argument("--grid-n", type=int)
    _common(c)

    v = sub.add_parser("verify-lyapunov", help="bump-profile, polynomial and landscape-condition checks")
    _potential_args(v)
    _common(v)

    e = sub.add_parser("experiment", help="run one config or a JSON array of configs")
    e.add_argument("config", type=Path)
    _common(e)
    return ap


def _drop_none(d: dict) -> dict:
    return {k: v for k, v in d.items() if v is not None}


def _config_from_args(a) -> dict:
    pot = {"name": a.potential, "params": _params(a.param)}
    cfg: dict = {"potential": pot}
    if a.command == "sample":
        cfg["kind"] = "SAMPLE_PROX" if a.method == "proximal" else "SAMPLE_GLD"
        cfg["betas"] = a.beta
        cfg["sampler"] = _drop_none(
            {
                "eta": a.eta,
                "steps": a.steps,
                "chains": a.chains,
                "stride": a.stride,
                "h": a.h,
                "outer_steps": a.outer_steps,
                "burn_in": a.burn_in,
                "save_trajectory": a.save_trajectory or None,
            }
        )
        cfg["grid"] = _drop_none({"n": a.grid_n})
    elif a.command == "spectral":
        cfg["kind"] = "BETA_SCALING" if a.scaling else "SPECTRAL"
        cfg["betas"] = a.beta
        cfg["grid"] = _drop_none({"n": a.grid_n, "tol": a.tol})
    elif a.command == "certify":
        cfg["kind"] = "CERTIFY"
        if a.beta:
            cfg["betas"] = a.beta
        cfg["certificate"] = _drop_none(
            {"kind": a.kind, "l_b": a.l_b, "C_local": a.c_local, "beta_factor": a.beta_factor}
        )
        cfg["grid"] = _drop_none({"n": a.grid_n})
    elif a.command == "verify-lyapunov":
        cfg["kind"] = "VERIFY_LYAPUNOV"
    return cfg


def _apply_overrides(cfg: dict, a) -> dict:
    if a.seed is not None:
        cfg["seed"] = a.seed
    if a.out is not None:
        cfg["out"] = a.out
    return cfg


def _thread_limit(n):
    if n is None:
        return contextlib.nullcontext()
    if n < 1:
        raise harness.ConfigError("--threads", "must be at least 1")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # the computation is single-threaded apart from BLAS
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def _summary(res: harness.ExperimentResult) -> str:
    lines = []
    for r in res.rows:
        beta = "" if r.beta is None else f"beta={fmt_float(r.beta)} "
        val = r.cells()[5]
        lines.append(f"  {beta}{r.metric} = {val}")
    files = ", ".join(str(p) for p in res.files.values())
    return f"{res.config.id} ({res.config.kind.value})\n" + "\n".join(lines) + (f"\n  wrote {files}" if files else "")


def _run_configs(configs: list[dict], a, batch: bool) -> list[harness.ExperimentResult]:
    parsed = []
    for i, d in enumerate(configs):
        if not isinstance(d, dict):
            raise harness.ConfigError(f"$[{i}]", "expected an object")
        parsed.append(harness.parse_config(_apply_overrides(dict(d), a)))
    results = []
    for cfg in parsed:
        out = Path(cfg.out) / cfg.id if batch else None
        results.append(harness.run_experiment(cfg, out))
    return results


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if a.command == "catalogue":
            rows = []
            for name in CATALOGUE_NAMES:
                p = catalogue(name)
                rows.append(
                    {
                        "name": name,
                        "dim": p.dim,
                        "params": p.params,
                        "smoothness_L": p.smoothness_L,
                        "pl_lambda": p.pl_lambda,
                        "kl_params": p.kl_params,
                        "dissipativity": p.dissipativity,
                        "linearizability": p.linearizability,
                    }
                )
            if a.json:
                sys.stdout.write(dumps_json(rows))
            else:
                for r in rows:
                    consts = ", ".join(
                        f"{k}={v}" for k, v in r.items() if k not in ("name", "dim", "params") and v is not None
                    )
                    print(f"{r['name']:<20} d={r['dim']}  {consts}")
            return EXIT_OK
        with _thread_limit(a.threads):
            if a.command == "experiment":
                try:
                    doc = json.loads(a.config.read_text(encoding="utf-8"))
                except json.JSONDecodeError as exc:
                    raise harness.ConfigError("$", f"malformed JSON: {exc}") from None
                batch = isinstance(doc, list)
                results = _run_configs(doc if batch else [doc], a, batch)
            else:
                results = _run_configs([_config_from_args(a)], a, False)
        for res in results:
            print(_summary(res))
        return EXIT_OK
    except harness.ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (harness.ExperimentError, OSError, RuntimeError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
