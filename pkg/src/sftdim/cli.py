"""Command line entry point: ``sftdim check | solve | fluct | diagnose | recode``.

Every command takes a config file path or a preset name. With ``--json`` it
prints one object ``{command, config_digest, params, results}``.

Exit codes: 0 success, 2 validation or usage error, 3 infeasible model,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .ballmass import export_series, series_csv, singularity_series
from .config import ModelConfig, build_config, load_config, preset_names, recoded_document
from .errors import DegenerateLevelSet, Infeasible, NumericalFailure, SftDimError, ValidationError
from .fluctuation import (
    asip_harness,
    coboundary_test,
    green_kubo_covariance,
    nonsingularity_check,
    select_nondegenerate,
)
from .markov import integrate, lift_measure, potential_G, shift_entropy
from .sft import LocallyConstantFn, mixing_index
from .solver import SolveOptions, bowen_root, level_set_sample, solve_dimension_two
from .suspension import check_dim_two, flow_stats

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
log = logging.getLogger("sftdim")


class CommandFailed(Exception):
    def __init__(self, code: int, errors: list[dict], extra: dict | None = None):
        self.code = code
        self.errors = errors
        self.extra = extra or {}


def _plain(x):
    """JSON-friendly copy of numpy values and containers."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def _labels(sft, cycle) -> list[str]:
    return [sft.labels[s] for s in cycle.symbols]


def _grid(text: str) -> list[int]:
    """``a:b:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (int(p) for p in text.split(":"))
            if step <= 0 or a < 1 or b < a:
                raise ValueError
            grid = list(range(a, b + 1, step))
        else:
            grid = [int(p) for p in text.split(",")]
    except ValueError:
        raise CommandFailed(EXIT_USAGE, [{"type": "UsageError", "message": f"invalid n-grid {text!r}; use a:b:step"}])
    if not grid or grid[0] < 1 or any(x >= y for x, y in zip(grid, grid[1:])):
        raise CommandFailed(EXIT_USAGE, [{"type": "UsageError", "message": f"n-grid {text!r} must be increasing and positive"}])
    return grid


def _need_seed(args):
    if args.seed is None:
        raise CommandFailed(EXIT_USAGE, [{"type": "UsageError", "message": "this run is randomized; pass --seed"}])


def _need_measure(cfg: ModelConfig):
    if cfg.measure is None:
        raise CommandFailed(
            EXIT_USAGE,
            [{"type": "MissingMarkov", "message": "config has no 'markov' block; run 'solve --out' first"}],
        )
    return cfg.measure


def _stats_dict(measure, roof, fu, fs=None) -> dict:
    st = flow_stats(measure, roof, fu, fs)
    rep = check_dim_two(st)
    return {**st.to_dict(), "residual_ratio": rep.residual_ratio, "residual_b2a": rep.residual_b2a, "is_dim_two": rep.is_dim_two}


def cmd_check(cfg: ModelConfig, args) -> dict:
    p = mixing_index(cfg.sft)
    s_star = bowen_root(cfg.sft, cfg.fu)
    tol = SolveOptions().tol
    out = {
        "valid": True,
        "symbols": cfg.sft.n,
        "mixing_index": p,
        "s_star": s_star,
        "feasible_dim_two": s_star >= 0.5 - tol,
        "has_markov": cfg.measure is not None,
    }
    if cfg.measure is not None:
        out["markov_renormalized"] = cfg.measure.renormalized
        out["stats"] = _stats_dict(cfg.measure, cfg.roof, cfg.fu, cfg.fs)
    return out


def cmd_solve(cfg: ModelConfig, args) -> dict:
    opts = SolveOptions(tol=args.tol, ell_max=args.ell_max, seed=args.seed or 0)
    if args.count > 1:
        _need_seed(args)
    res = solve_dimension_two(cfg.sft, cfg.fu, opts, cfg.roof)
    out = {
        "s_star": res.s_star,
        "a_ell": res.a_ell,
        "ell_used": res.ell_used,
        "alphabet": list(res.measure.sft.labels),
        "P": res.measure.P,
        "stats": _stats_dict(res.measure, res.roof, res.fu),
        "start_cycle": _labels(res.measure.sft, res.start_cycle) if res.start_cycle else None,
    }
    chosen = res
    try:
        nd, rep = select_nondegenerate(cfg.sft, cfg.fu, opts, cfg.roof)
        chosen = nd
        out["nondegenerate"] = {
            "P": nd.measure.P,
            "start_cycle": _labels(nd.measure.sft, nd.start_cycle) if nd.start_cycle else None,
            "stats": _stats_dict(nd.measure, nd.roof, nd.fu),
            "det_q": rep.det_q,
            "rank_cycles": rep.rank_cycles,
        }
    except NumericalFailure as exc:
        out["nondegenerate"] = None
        warnings.warn(f"keeping the default solution: {exc}", stacklevel=1)
    if args.count > 1:
        pts = level_set_sample(cfg.sft, cfg.fu, args.count, opts, cfg.roof)
        out["level_set"] = [
            {"P": m.P, "residual_ratio": check_dim_two(flow_stats(m, res.roof, res.fu)).residual_ratio} for m in pts
        ]
    if chosen.ell_used == 1:
        doc = cfg.with_markov(chosen.measure.P)
    else:
        doc = recoded_document(cfg, chosen.ell_used, chosen.measure.P)
    out["config"] = doc
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        out["written"] = str(args.out)
    return out


def _explain(verdict, what: str) -> str:
    if verdict.is_degenerate:
        return f"{what} sums to zero on all {verdict.cycles_checked} cycles checked; it looks like a coboundary"
    return f"{what} has nonzero sum {verdict.witness_sum:.6g} on the witness cycle"


def cmd_fluct(cfg: ModelConfig, args) -> dict:
    m = _need_measure(cfg)
    fs = cfg.fs_or_fu
    a = shift_entropy(m)
    b = integrate(m, cfg.fu)
    cov = green_kubo_covariance(m, cfg.fu)
    out = {
        "a": a,
        "b": b,
        "Q": cov.q,
        "det_q": cov.det,
        "lag_used": cov.lag_used,
        "truncation_residual": cov.truncation_residual,
    }
    if args.stable_side:
        qs = green_kubo_covariance(m, cfg.fu, side="s", fs=fs)
        out["Q_s"] = qs.q
    verdicts = {}
    for key, fn, mean, what in (
        ("minus_G_minus_a", LocallyConstantFn(2, -potential_G(m).values), a, "-G - a"),
        ("fu_minus_b", cfg.fu, b, "Fu - b"),
    ):
        v = coboundary_test(m.sft, fn, mean, args.lmax)
        verdicts[key] = {
            "is_degenerate": v.is_degenerate,
            "witness": _labels(m.sft, v.witness) if v.witness else None,
            "witness_sum": v.witness_sum,
            "cycles_checked": v.cycles_checked,
            "explanation": _explain(v, what),
        }
    out["coboundary"] = verdicts
    rep = nonsingularity_check(m, cfg.fu, args.lmax)
    out["nonsingularity"] = {"det_q": rep.det_q, "rank_cycles": rep.rank_cycles, "nonsingular": rep.nonsingular}
    if args.samples > 0:
        _need_seed(args)
        grid = _grid(args.n_grid)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            st = asip_harness(m, cfg.fu, fs, grid, args.samples, args.big_d, args.c_tilde, args.seed, args.workers)
        out["tail_events"] = {
            "n": st.n_grid,
            "freq_u": st.freq_u,
            "freq_s": st.freq_s,
            "freq_joint": st.freq_joint,
            "rho_pred": st.rho_pred,
            "stderr": st.stderr(),
            "samples": st.samples,
        }
    return out


def cmd_diagnose(cfg: ModelConfig, args) -> dict:
    m = _need_measure(cfg)
    _need_seed(args)
    grid = _grid(args.n_grid)
    series = singularity_series(m, cfg.fu, cfg.fs_or_fu, args.big_d, args.offset_c, grid, args.samples, args.seed, args.workers)
    text = series_csv(series)
    if args.out:
        export_series(series, args.out)
    trend = series.trend()
    return {
        "rows": [
            {
                "n": r.n,
                "epsilon": str(r.epsilon),
                "log_epsilon": r.log_epsilon,
                "max_log_ratio": r.max_log_ratio,
                "q90_log_ratio": r.q90_log_ratio,
                "frac_exceed": r.frac_exceed,
                "half_D_sqrt_n": 0.5 * args.big_d * math.sqrt(r.n),
            }
            for r in series.rows
        ],
        "trend": trend,
        "verdict": {
            "increasing": "max_log_ratio grows with n (blow-up of the ball-mass ratio)",
            "decreasing": "max_log_ratio decays with n (no blow-up)",
            "mixed": "max_log_ratio is not monotone on this grid",
        }[trend],
        "note": series.note,
        "csv": None if args.out else text,
        "written": str(args.out) if args.out else None,
    }


def cmd_recode(cfg: ModelConfig, args) -> dict:
    if args.ell < 1:
        raise CommandFailed(EXIT_USAGE, [{"type": "UsageError", "message": "--ell must be >= 1"}])
    doc = recoded_document(cfg, args.ell)
    out = {"ell": args.ell, "symbols": len(doc["alphabet"]), "config": doc}
    if cfg.measure is not None:
        lifted = lift_measure(cfg.measure, args.ell)
        cfg2 = build_config(doc)
        before = flow_stats(cfg.measure, cfg.roof, cfg.fu)
        after = flow_stats(lifted, cfg2.roof, cfg2.fu)
        out["invariants"] = {
            "entropy": [before.a, after.a],
            "int_fu": [before.b, after.b],
            "dim": [before.dim, after.dim],
        }
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        out["written"] = str(args.out)
    return out


COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "fluct": cmd_fluct,
    "diagnose": cmd_diagnose,
    "recode": cmd_recode,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sftdim", description="Dimension-2 Markov measures on symbolic suspension flows.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help=f"config file or preset ({', '.join(preset_names())})")
        sp.add_argument("--json", action="store_true", help="print one JSON object")
        sp.add_argument("-v", "--verbose", action="store_true")

    def mc(sp, samples, grid):
        sp.add_argument("--seed", type=int, help="required for randomized runs")
        sp.add_argument("--samples", type=int, default=samples)
        sp.add_argument("--n-grid", default=grid, help="a:b:step (inclusive) or a comma list")
        sp.add_argument("--big-d", type=float, default=1.5)
        sp.add_argument("--workers", type=int, default=1)

    common(sub.add_parser("check", help="validate a model and decide dimension-2 feasibility"))

    sp = sub.add_parser("solve", help="find a Markov measure of dimension 2")
    common(sp)
    sp.add_argument("--count", type=int, default=1, help="number of level-set points")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--ell-max", type=int, default=4)
    sp.add_argument("--out", help="write the config with the solved Markov block here")

    sp = sub.add_parser("fluct", help="exact covariance, degeneracy tests and tail events")
    common(sp)
    mc(sp, 100_000, "1000,2000")
    sp.add_argument("--c-tilde", type=float, default=5.0)
    sp.add_argument("--lmax", type=int, default=8, help="longest cycle in the degeneracy tests")
    sp.add_argument("--stable-side", action="store_true", help="also report the covariance on the stable side")

    sp = sub.add_parser("diagnose", help="ball-mass ratio series along eps(n) = exp(-n b)")
    common(sp)
    mc(sp, 100_000, "250:2000:250")
    sp.add_argument("--offset-c", type=float, default=0.0)
    sp.add_argument("--out", help="CSV destination")

    sp = sub.add_parser("recode", help="rewrite the model on the ell-block alphabet")
    common(sp)
    sp.add_argument("--ell", type=int, required=True)
    sp.add_argument("--out")
    return p


def _error_entry(exc: Exception) -> list[dict]:
    errs = getattr(exc, "errors", None)
    if errs and all(isinstance(e, str) for e in errs):
        return [{"type": type(exc).__name__, "message": e} for e in errs]
    return [{"type": type(exc).__name__, "message": str(exc)}]


def _params(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "config", "json", "verbose")}


def _print_human(command: str, results: dict, stream) -> None:
    if command == "diagnose" and results.get("csv"):
        stream.write(results["csv"])
        results = {k: v for k, v in results.items() if k not in ("csv", "rows")}
    for key, value in results.items():
        if key == "config":
            continue
        stream.write(f"{key}: {json.dumps(_plain(value))}\n")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.captureWarnings(True)
    digest = None
    code = EXIT_OK
    try:
        cfg = load_config(args.config)
        digest = cfg.digest()
        log.info("%s: %s (%s)", args.command, cfg.source or args.config, digest)
        results = COMMANDS[args.command](cfg, args)
    except CommandFailed as exc:
        code, results = exc.code, {"errors": exc.errors, **exc.extra}
    except Infeasible as exc:
        code, results = EXIT_INFEASIBLE, {"errors": _error_entry(exc), "s_star": exc.s_star}
    except DegenerateLevelSet as exc:
        code, results = EXIT_USAGE, {"errors": _error_entry(exc)}
    except (ValidationError, OSError) as exc:
        code, results = EXIT_USAGE, {"errors": _error_entry(exc)}
    except (NumericalFailure, ArithmeticError, np.linalg.LinAlgError) as exc:
        code, results = EXIT_NUMERIC, {"errors": _error_entry(exc)}
    except SftDimError as exc:
        code, results = EXIT_NUMERIC, {"errors": _error_entry(exc)}
    results = {"ok": code == EXIT_OK, "exit_code": code, **results}
    if args.json:
        payload = {"command": args.command, "config_digest": digest, "params": _params(args), "results": _plain(results)}
        sys.stdout.write(json.dumps(payload, indent=2, allow_nan=False) + "\n")
    elif code == EXIT_OK:
        _print_human(args.command, results, sys.stdout)
    else:
        for e in results["errors"]:
            sys.stderr.write(f"error: {e['type']}: {e['message']}\n")
        if "s_star" in results:
            sys.stderr.write(f"s_star: {results['s_star']!r}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
