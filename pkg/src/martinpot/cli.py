"""Batch command-line front door.

Subcommands: oracle (closed forms), simulate (Monte-Carlo estimators),
access, thorn, martin, schedule, thinness.  Results go to CSV or JSON with
a fixed row schema; exit codes separate usage errors (1), inconclusive
scientific verdicts (2) and runtime failures (3) from success (0).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .accessibility import (
    finite_point_test,
    infinity_test,
    locate_thorn_flip,
    thorn_finite_test,
    thorn_infinity_test,
)
from .closed_forms import (
    BallSpec,
    ball_expected_exit,
    ball_green,
    ball_martin_kernel,
    ball_poisson_kernel,
    poisson_normalization,
)
from .geometry import LogPowerProfile, PowerProfile, domain_from_dict
from .martin import contraction_schedule, estimate_martin_kernel
from .process import make_stable, spec_from_json
from .simulation import (
    estimate_exit_time,
    estimate_green,
    estimate_harmonic_measure,
    estimate_poisson_kernel,
)
from .thinness import locality_experiment, reduction_identity_check, thinness_test

CSV_COLUMNS = ["op", "params_json", "value", "stderr", "n", "seed", "flags", "wall_ms"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCONCLUSIVE = 2
EXIT_RUNTIME = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; remap to 1."""

    def error(self, message):
        raise _UsageError(message)


def _fmt(x) -> str:
    """Floats with 17 significant digits; everything else as str."""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _canon_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _row(op, params, value, stderr, n, seed, flags=(), wall_ms=0.0):
    tokens = [f"ver={__version__}", *flags]
    return {
        "op": op,
        "params_json": _canon_json(params),
        "value": _fmt(float(value)),
        "stderr": _fmt(float(stderr)),
        "n": int(n),
        "seed": int(seed),
        "flags": ";".join(tokens),
        "wall_ms": _fmt(float(wall_ms)),
    }


def _emit(rows, fmt: str, out_path: str | None, summary=None):
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
        text = buf.getvalue()
    else:
        payload = {"rows": rows}
        if summary is not None:
            payload["summary"] = summary
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_point(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise _UsageError(f"bad point {text!r}: {exc}") from exc


def _parse_points(text: str) -> np.ndarray:
    return np.array([_parse_point(p) for p in text.split(";")])


def _parse_json_arg(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise _UsageError(
            f"malformed JSON for {what} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def _parse_profile(text: str):
    parts = text.split(":")
    try:
        if parts[0] == "log_power" and len(parts) == 2:
            return LogPowerProfile(float(parts[1]))
        if parts[0] == "power" and len(parts) in (2, 3):
            coeff = float(parts[2]) if len(parts) == 3 else 1.0
            return PowerProfile(float(parts[1]), coeff)
    except ValueError as exc:
        raise _UsageError(f"bad profile {text!r}: {exc}") from exc
    raise _UsageError(f"bad profile {text!r} (use log_power:<beta> or power:<beta>[:coeff])")


def _resolve_spec(args):
    if getattr(args, "process", None):
        return spec_from_json(_parse_json_arg(args.process, "--process"))
    if getattr(args, "alpha", None) is None or getattr(args, "d", None) is None:
        raise _UsageError("provide --process JSON or both --alpha and --d")
    return make_stable(args.alpha, args.d)


def _resolve_domain(args, attr="domain"):
    text = getattr(args, attr, None)
    if text is None:
        raise _UsageError(f"--{attr.replace('_', '-')} is required")
    return domain_from_dict(_parse_json_arg(text, f"--{attr}"))


def _resolve_workers(args) -> int:
    env = os.environ.get("MARTINPOT_WORKERS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise _UsageError(f"bad MARTINPOT_WORKERS={env!r}") from exc
    return max(1, getattr(args, "workers", 1) or 1)


def _add_common(p, seed_required=False, with_workers=True):
    p.add_argument("--config", help="JSON file of defaults for this subcommand")
    p.add_argument("--seed", type=int, required=seed_required,
                   help="RNG seed (mandatory for stochastic commands)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    if with_workers:
        p.add_argument("--workers", type=int, default=1)


# ---------------------------------------------------------------- oracle ---


def _cmd_oracle(args):
    ball = BallSpec(tuple(_parse_point(args.center)), args.radius, args.alpha, args.d)
    x = _parse_point(args.x) if args.x else np.zeros(args.d)
    params = {
        "alpha": args.alpha, "d": args.d, "center": list(ball.center),
        "radius": args.radius, "x": x.tolist(),
    }
    if args.op == "exit":
        value = ball_expected_exit(ball, x)
    elif args.op == "green":
        if not args.y:
            raise _UsageError("oracle green requires --y")
        y = _parse_point(args.y)
        params["y"] = y.tolist()
        value = ball_green(ball, x, y)
    elif args.op == "poisson":
        if not args.z:
            raise _UsageError("oracle poisson requires --z")
        z = _parse_point(args.z)
        params["z"] = z.tolist()
        value = ball_poisson_kernel(ball, x, z)
    elif args.op == "martin":
        if not (args.z and args.x0):
            raise _UsageError("oracle martin requires --z and --x0")
        z, x0 = _parse_point(args.z), _parse_point(args.x0)
        params["z"], params["x0"] = z.tolist(), x0.tolist()
        value = ball_martin_kernel(ball, x, z, x0)
    elif args.op == "normalization":
        value = poisson_normalization(ball, x)
    else:  # pragma: no cover - argparse restricts choices
        raise _UsageError(f"unknown oracle op {args.op!r}")
    row = _row(f"oracle_{args.op}", params, value, 0.0, 0, args.seed or 0)
    _emit([row], args.format or "csv", args.out)
    return EXIT_OK


# -------------------------------------------------------------- simulate ---


def _cmd_simulate(args):
    spec = _resolve_spec(args)
    domain = _resolve_domain(args)
    workers = _resolve_workers(args)
    x = _parse_point(args.x)
    params = {
        "op": args.op, "process": json.loads(spec.to_json()),
        "domain": domain.to_dict(), "x": x.tolist(), "n": args.n,
    }
    t0 = time.perf_counter()
    if args.op == "exit_time":
        est = estimate_exit_time(spec, domain, x, args.n, seed=args.seed, workers=workers)
    elif args.op == "harmonic":
        target = _resolve_domain(args, "target")
        params["target"] = target.to_dict()
        est = estimate_harmonic_measure(
            spec, domain, x, target, args.n, seed=args.seed, workers=workers
        )
    elif args.op == "green":
        if not args.y:
            raise _UsageError("simulate green requires --y")
        y = _parse_point(args.y)
        params["y"] = y.tolist()
        est = estimate_green(spec, domain, x, y, args.n, seed=args.seed, workers=workers)
    elif args.op == "poisson":
        if not args.z:
            raise _UsageError("simulate poisson requires --z")
        z = _parse_point(args.z)
        params["z"] = z.tolist()
        est = estimate_poisson_kernel(
            spec, domain, x, z, args.n, seed=args.seed, workers=workers
        )
    else:  # pragma: no cover
        raise _UsageError(f"unknown simulate op {args.op!r}")
    wall_ms = 1e3 * (time.perf_counter() - t0)
    flags = ["diverged"] if est.diverged else []
    row = _row(f"simulate_{args.op}", params, est.value, est.stderr,
               est.n, args.seed, flags, wall_ms)
    _emit([row], args.format or "csv", args.out)
    return EXIT_OK


# ---------------------------------------------------------------- access ---


def _cmd_access(args):
    spec = _resolve_spec(args)
    domain = _resolve_domain(args)
    t0 = time.perf_counter()
    if args.target == "finite":
        if not args.z0:
            raise _UsageError("access finite requires --z0")
        verdict = finite_point_test(
            spec, domain, _parse_point(args.z0), mc_n=args.n, seed=args.seed
        )
    else:
        verdict = infinity_test(spec, domain, mc_n=args.n, seed=args.seed)
    wall_ms = 1e3 * (time.perf_counter() - t0)
    params = {
        "target": args.target, "process": json.loads(spec.to_json()),
        "domain": domain.to_dict(),
    }
    if args.z0:
        params["z0"] = _parse_point(args.z0).tolist()
    row = _row("access", params, math.nan, math.nan, args.n, args.seed,
               [f"verdict={verdict.verdict}", f"method={verdict.method}"], wall_ms)
    summary = {
        "verdict": verdict.verdict,
        "target": verdict.target,
        "evidence": verdict.evidence,
        "method": verdict.method,
    }
    _emit([row], args.format or "json", args.out, summary=summary)
    return EXIT_INCONCLUSIVE if verdict.verdict == "inconclusive" else EXIT_OK


# ----------------------------------------------------------------- thorn ---


def _cmd_thorn(args):
    spec = make_stable(args.alpha, args.d)
    profile = _parse_profile(args.profile)
    t0 = time.perf_counter()
    test = thorn_finite_test if args.side == "finite" else thorn_infinity_test
    report = test(spec, profile)
    summary = {
        "verdict": report.verdict,
        "side": args.side,
        "integrand": report.integrand_tag,
        "partials": report.partials,
        "truncations": report.truncations,
        "growth_exponent": report.growth_exponent,
    }
    if args.locate_flip:
        lo, hi = (float(v) for v in args.locate_flip.split(","))
        def fam(beta):
            if isinstance(profile, LogPowerProfile):
                return LogPowerProfile(beta)
            return PowerProfile(beta, profile.coeff)
        blo, bhi = locate_thorn_flip(spec, fam, lo, hi, finite=args.side == "finite")
        summary["flip_bracket"] = [blo, bhi]
    wall_ms = 1e3 * (time.perf_counter() - t0)
    params = {"alpha": args.alpha, "d": args.d,
              "profile": profile.to_dict(), "side": args.side}
    row = _row("thorn", params, report.partials[-1], 0.0, len(report.partials),
               args.seed or 0, [f"verdict={report.verdict}"], wall_ms)
    _emit([row], args.format or "json", args.out, summary=summary)
    return EXIT_INCONCLUSIVE if report.verdict == "inconclusive" else EXIT_OK


# ---------------------------------------------------------------- martin ---


def _tangent_basis(u: np.ndarray) -> np.ndarray:
    """Orthonormal complement of the unit vector u."""
    d = len(u)
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(d)[:, : d - 1]]))
    return q[:, 1:].T


def _approach_levels(domain, target, x0, hs, spread=0.3, per_level=3):
    """Approach points marching from the target toward x0, with small
    tangential offsets so the per-level oscillation range is measurable."""
    target = np.asarray(target, dtype=float)
    ray = np.asarray(x0, dtype=float) - target
    ray = ray / np.linalg.norm(ray)
    tangents = _tangent_basis(ray)
    levels = []
    for h in hs:
        pts = [target + h * ray]
        for k in range((per_level - 1) // 2 + 1):
            if len(pts) >= per_level or k >= len(tangents):
                break
            for sgn in (1.0, -1.0):
                pts.append(target + h * ray + sgn * spread * h * tangents[k])
        pts = np.array(pts[:per_level])
        keep = domain.contains(pts)
        if not np.any(keep):
            raise _UsageError(f"no approach point at level h={h} lies in the domain")
        levels.append(pts[keep])
    return levels


def _cmd_martin(args):
    spec = _resolve_spec(args)
    domain = _resolve_domain(args)
    workers = _resolve_workers(args)
    x0 = _parse_point(args.x0)
    target = _parse_point(args.target)
    probes = _parse_points(args.probes)
    hs = [float(v) for v in args.levels.split(",")]
    t0 = time.perf_counter()
    levels = _approach_levels(domain, target, x0, hs)
    estimates = estimate_martin_kernel(
        spec, domain, probes, x0, target, levels, args.n,
        seed=args.seed, workers=workers,
    )
    wall_ms = 1e3 * (time.perf_counter() - t0)
    base_params = {
        "process": json.loads(spec.to_json()), "domain": domain.to_dict(),
        "x0": x0.tolist(), "target": target.tolist(), "n": args.n,
    }
    rows = []
    for est in estimates:
        pp = dict(base_params, probe=list(est.probe))
        for li, lv in enumerate(est.levels):
            rows.append(_row(
                "martin_level", dict(pp, level=li, h=hs[li]),
                lv["ratio"], lv["stderr"], args.n, args.seed,
                [f"ro={_fmt(lv['ro'])}"],
            ))
        rows.append(_row(
            "martin", pp, est.value, est.stderr, args.n, args.seed,
            ["converged" if est.converged else "unconverged"], wall_ms,
        ))
    summary = {
        "estimates": [
            {"probe": list(e.probe), "value": e.value, "stderr": e.stderr,
             "converged": e.converged,
             "ro_by_level": [lv["ro"] for lv in e.levels]}
            for e in estimates
        ]
    }
    _emit(rows, args.format or "csv", args.out, summary=summary)
    if not all(e.converged for e in estimates):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# -------------------------------------------------------------- schedule ---


def _cmd_schedule(args):
    sched = contraction_schedule(args.eta, args.C)
    summary = {
        "eta": sched.eta, "C": sched.C, "l": sched.l,
        "epsilon": sched.epsilon, "k": sched.k, "n": sched.n,
        "fixed_point": sched.fixed_point,
        "radius_multipliers": sched.radius_multipliers,
    }
    params = {"eta": args.eta, "C": args.C}
    row = _row("schedule", params, sched.fixed_point, 0.0, sched.n, args.seed or 0,
               [f"l={sched.l}", f"k={sched.k}"])
    _emit([row], args.format or "json", args.out, summary=summary)
    return EXIT_OK


# -------------------------------------------------------------- thinness ---


def _cmd_thinness(args):
    spec = _resolve_spec(args)
    D = _resolve_domain(args)
    F = _resolve_domain(args, "set")
    target = _parse_point(args.target)
    probes = _parse_points(args.probes)
    x0 = _parse_point(args.x0)
    v_star = _parse_point(args.v_star)
    cfg = dict(n=args.n, kernel_n=args.kernel_n, dt=args.dt, seed=args.seed,
               workers=_resolve_workers(args))
    t0 = time.perf_counter()
    if args.subdomain:
        E = _resolve_domain(args, "subdomain")
        result = locality_experiment(
            spec, D, E, F, target, probes, x0, v_star,
            match_radius=args.match_radius, seed=args.seed,
            **{k: v for k, v in cfg.items() if k != "seed"},
        )
        reports = {"in_full": result["in_full"], "in_sub": result["in_sub"]}
        agree = result["agree"]
        verdicts = [reports["in_full"].verdict, reports["in_sub"].verdict]
    else:
        rep = thinness_test(spec, D, F, target, probes, x0, v_star, **cfg)
        reports = {"in_full": rep}
        agree = True
        verdicts = [rep.verdict]
    wall_ms = 1e3 * (time.perf_counter() - t0)
    params = {
        "process": json.loads(spec.to_json()), "domain": D.to_dict(),
        "set": F.to_dict(), "target": target.tolist(), "n": args.n,
    }
    rows, summary = [], {"agree": agree, "reports": {}}
    for tag, rep in reports.items():
        rows.append(_row(
            f"thinness_{tag}", params, math.nan, math.nan, args.n, args.seed,
            [f"verdict={rep.verdict}"], wall_ms,
        ))
        summary["reports"][tag] = {
            "verdict": rep.verdict,
            "probes": [list(p) for p in rep.probes],
            "reduced": [
                {"value": e.value, "stderr": e.stderr,
                 "majorant_ok": e.info.get("majorant_ok")}
                for e in rep.reduced
            ],
            "kernel": [{"value": v, "stderr": e} for v, e in rep.kernel],
        }
    _emit(rows, args.format or "json", args.out, summary=summary)
    if "inconclusive" in verdicts or not agree:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


# ------------------------------------------------------------ dispatcher ---


def build_parser() -> _Parser:
    parser = _Parser(prog="martinpot", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("oracle", help="tabulate closed-form ball kernels")
    p.add_argument("--op", required=True,
                   choices=("exit", "green", "poisson", "martin", "normalization"))
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--center", default="0,0")
    p.add_argument("--radius", type=float, default=1.0)
    p.add_argument("--x")
    p.add_argument("--y")
    p.add_argument("--z")
    p.add_argument("--x0")
    _add_common(p, with_workers=False)
    p.set_defaults(func=_cmd_oracle)

    p = sub.add_parser("simulate", help="Monte-Carlo estimators")
    p.add_argument("--op", required=True,
                   choices=("exit_time", "harmonic", "green", "poisson"))
    p.add_argument("--process", help="process descriptor JSON")
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--domain", help="domain AST JSON")
    p.add_argument("--x", required=True)
    p.add_argument("--y")
    p.add_argument("--z")
    p.add_argument("--target", help="target domain AST JSON (harmonic)")
    p.add_argument("--n", type=int, default=100_000)
    _add_common(p, seed_required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("access", help="accessibility of a boundary point or infinity")
    p.add_argument("--target", required=True, choices=("finite", "infinity"))
    p.add_argument("--process")
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--domain")
    p.add_argument("--z0")
    p.add_argument("--n", type=int, default=200)
    _add_common(p, seed_required=True, with_workers=False)
    p.set_defaults(func=_cmd_access)

    p = sub.add_parser("thorn", help="thorn-domain integral accessibility tests")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--profile", required=True,
                   help="log_power:<beta> or power:<beta>[:coeff]")
    p.add_argument("--side", choices=("infinity", "finite"), default="infinity")
    p.add_argument("--locate-flip", dest="locate_flip",
                   help="lo,hi bracket to bisect for the verdict flip")
    _add_common(p, with_workers=False)
    p.set_defaults(func=_cmd_thorn)

    p = sub.add_parser("martin", help="Martin kernel by Green-ratio extrapolation")
    p.add_argument("--process")
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--domain")
    p.add_argument("--x0", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--probes", required=True, help="semicolon-separated points")
    p.add_argument("--levels", default="0.3,0.15,0.075,0.04",
                   help="comma-separated approach distances")
    p.add_argument("--n", type=int, default=200_000)
    _add_common(p, seed_required=True)
    p.set_defaults(func=_cmd_martin)

    p = sub.add_parser("schedule", help="oscillation-contraction schedule constants")
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--C", type=float, required=True)
    _add_common(p, with_workers=False)
    p.set_defaults(func=_cmd_schedule)

    p = sub.add_parser("thinness", help="minimal-thinness verdicts")
    p.add_argument("--process")
    p.add_argument("--alpha", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--domain", help="ambient domain D")
    p.add_argument("--subdomain", help="optional E for the locality experiment")
    p.add_argument("--set", help="test set F")
    p.add_argument("--target", required=True)
    p.add_argument("--probes", required=True)
    p.add_argument("--x0", required=True)
    p.add_argument("--v-star", dest="v_star", required=True,
                   help="Martin approach point near the target")
    p.add_argument("--match-radius", dest="match_radius", type=float, default=1.0)
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--kernel-n", dest="kernel_n", type=int, default=100_000)
    p.add_argument("--dt", type=float, default=1e-3)
    _add_common(p, seed_required=True)
    p.set_defaults(func=_cmd_thinness)

    return parser


def _apply_config(argv):
    """Load --config JSON (if present) and prepend its entries as flags so
    explicit flags win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise _UsageError("--config requires a path")
    path = argv[i + 1]
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise _UsageError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise _UsageError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(cfg, dict):
        raise _UsageError("config must be a JSON object")
    injected = []
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            raise _UsageError(f"boolean config entries unsupported: {key}")
        injected.extend([flag, val if isinstance(val, str) else _canon_json(val)
                         if isinstance(val, (dict, list)) else str(val)])
    head, tail = argv[:1], argv[1:]
    return head + injected + tail


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, NotImplementedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
