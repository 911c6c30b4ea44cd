"""Command-line driver: ``rigidlim <command> CONFIG [options]``.

Every command writes a JSON report (stdout, or ``--out``) with the
sections command, config, parameters, results and provenance. Only the
provenance section carries wall-clock data.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import bundled_path, load_config
from .errors import (
    CapacityError,
    ConfigError,
    ConstructionRejectedError,
    ResolutionError,
    RigidLimError,
)
from .grassmann import Subspace
from .ifs import (
    check_ball_inclusions,
    distortion_constants,
    validate_boundary_density,
    validate_f1,
    validate_f3,
    validate_osc,
)
from .ifs.system import compose_batch, representatives
from .measure import (
    ahlfors_lower_check,
    conformal_weights,
    cylinder_mass,
    estimate_dimension,
    export_weights_csv,
    verify_conformal_identity,
)
from .symbolic import word_index, words_array
from .tangency import ClassifierConfig, _local_plane, radius_grid, rigidity_classify, weak_tangent_ratios

EXIT_OK, EXIT_USAGE, EXIT_FAILED, EXIT_INCONCLUSIVE = 0, 1, 2, 3
#: weight tables used for sampling stay below this many cylinders
TABLE_LIMIT = 2**14


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# -- helpers --------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def atomic_write(path, data: bytes):
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    parent = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _threads(args):
    if getattr(args, "threads", None):
        return max(1, int(args.threads))
    env = os.environ.get("RIGIDLIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"RIGIDLIM_THREADS must be an integer, got {env!r}") from exc
    return 1


def _resolve(path):
    p = Path(path)
    if p.exists() or os.sep in str(path):
        return p
    return bundled_path(str(path))


def _dimension_t(system, depth):
    """Exponent for weights: the Moran root, or the bracket midpoint."""
    bracket = estimate_dimension(system, depth)
    t = bracket.moran_root if bracket.moran_root is not None else bracket.midpoint
    return t, bracket


def default_depth(system, limit=TABLE_LIMIT, cap=10):
    n = 1
    while n < cap and system.size ** (n + 1) <= limit:
        n += 1
    return n


def _parse_vector(text, d, what):
    try:
        v = [float(s) for s in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from exc
    if len(v) != d:
        raise UsageError(f"{what}: expected {d} numbers, got {len(v)}")
    return np.array(v)


# -- commands ------------------------------------------------------------------


def cmd_validate(cfg, args):
    params = {"seed": args.seed, "count": args.count, "depth": args.depth, "tol": args.tol}
    results = {}
    try:
        system = cfg.build()
    except ConstructionRejectedError as exc:
        results["h_oletus"] = {"ok": False, "message": str(exc), **exc.norms}
        return params, results, EXIT_FAILED
    if "conjugation" in system.meta:
        results["h_oletus"] = {"ok": True, **system.meta["conjugation"]}
    results["f1"] = validate_f1(system, args.count, args.seed)
    results["f3"] = validate_f3(system, args.depth, args.tol)
    results["osc"] = validate_osc(system, 5)
    results["boundary_density"] = validate_boundary_density(system, 4, 16, args.seed)
    ok = all(section["ok"] for section in results.values())
    results["all_ok"] = ok
    return params, results, EXIT_OK if ok else EXIT_FAILED


def cmd_dimension(cfg, args):
    system = cfg.build()
    bracket = estimate_dimension(system, args.depth, args.tol)
    results = bracket.as_dict()
    if args.figure:
        from . import plotting

        rows = [estimate_dimension(system, n, args.tol) for n in range(1, args.depth + 1)]
        plotting.dimension_brackets(
            [b.depth for b in rows], [b.t_minus for b in rows], [b.t_plus for b in rows],
            args.figure, reference=bracket.moran_root, title=cfg.name,
        )
    return {"depth": args.depth, "tol": args.tol}, results, EXIT_OK


def _sample_table(system, depth, t):
    """Weight table at depth min(depth, table limit) for cylinder masses."""
    n = min(depth, default_depth(system, cap=depth))
    return conformal_weights(system, t, n)


def cmd_sample(cfg, args):
    system = cfg.build()
    if args.out is None:
        raise UsageError("sample needs --out FILE (.csv, or .ply for d = 3)")
    t, bracket = _dimension_t(system, min(args.depth, 4))
    table = _sample_table(system, args.depth, t)
    if args.count is None:
        words = words_array(system.size, args.depth)
        pts = representatives(system, args.depth)
    else:
        rng = np.random.default_rng(args.seed)
        words = rng.integers(0, system.size, size=(args.count, args.depth))
        pts, _ = compose_batch(system, words, np.broadcast_to(system.anchor, (len(words), system.d)))
    if args.depth == table.depth:
        weights = table.weights[np.asarray([word_index(w, system.size) for w in words.tolist()])]
    else:
        weights = np.array([cylinder_mass(table, tuple(w)) for w in words.tolist()])
    out = Path(args.out)
    if out.suffix.lower() == ".ply":
        if system.d != 3:
            raise UsageError("PLY output needs d = 3")
        data = _ply_bytes(pts, weights)
    else:
        lines = [",".join([f"x{k + 1}" for k in range(system.d)] + ["weight"])]
        for p, w in zip(pts, weights):
            lines.append(",".join([repr(float(v)) for v in p] + [repr(float(w))]))
        data = ("\n".join(lines) + "\n").encode()
    try:
        atomic_write(out, data)
    except OSError as exc:
        raise UsageError(f"cannot write {out}: {exc.strerror}") from exc
    if args.figure:
        from . import plotting

        plotting.point_cloud(pts, weights, args.figure, title=cfg.name)
    params = {"depth": args.depth, "count": args.count, "seed": args.seed, "t": t,
              "weight_table_depth": table.depth}
    results = {"file": str(out), "rows": int(len(pts)), "weight_sum": float(weights.sum()),
               "bracket": bracket.as_dict()}
    return params, results, EXIT_OK


def _ply_bytes(pts, weights):
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {len(pts)}\n"
        "property double x\nproperty double y\nproperty double z\nproperty double weight\n"
        "end_header\n"
    ).encode("ascii")
    body = np.column_stack([pts, weights]).astype("<f8").tobytes()
    return header + body


def cmd_measure(cfg, args):
    system = cfg.build()
    # the identity residual is governed by t, so t comes from the same depth
    t, bracket = _dimension_t(system, args.depth)
    weights = conformal_weights(system, t, args.depth)
    constants = system.constants()
    residuals = {}
    for length in (1, 2):
        if system.size ** (length + args.depth) > 10**7 or system.size**length > 4096:
            break
        words = words_array(system.size, length).tolist()
        residuals[str(length)] = max(verify_conformal_identity(system, weights, w) for w in words)
    results = {
        "t": t,
        "bracket": bracket.as_dict(),
        "weights": {
            "count": len(weights),
            "sum": float(weights.weights.sum()),
            "min": float(weights.weights.min()),
            "max": float(weights.weights.max()),
            "resolution": weights.resolution,
        },
        "identity_residuals": residuals,
    }
    try:
        rep = ahlfors_lower_check(system, weights, constants, args.count or 64, 4, args.seed)
        results["ahlfors"] = rep.as_dict()
    except ResolutionError as exc:
        results["ahlfors"] = {"skipped": str(exc)}
    if args.weights_csv:
        export_weights_csv(weights, args.weights_csv)
        results["weights_csv"] = str(args.weights_csv)
    if args.figure:
        from . import plotting

        plotting.point_cloud(weights.anchor_points, weights.weights, args.figure, title=cfg.name)
    params = {"depth": args.depth, "seed": args.seed, "ahlfors_samples": args.count or 64,
              "radii_per_sample": 4, "constants": constants.as_dict()}
    return params, results, EXIT_OK


def cmd_distortion(cfg, args):
    system = cfg.build()
    count = args.count or 200
    constants = distortion_constants(system, args.depth, count, args.seed)
    inc = check_ball_inclusions(system, constants.inflated(1.05), count, args.seed)
    results = {
        "constants": constants.as_dict(),
        "ball_inclusions": {"trials": inc["trials"], "violations": len(inc["violations"]),
                            "examples": inc["violations"][:5], "k0_inflation": 1.05},
    }
    return {"depth": args.depth, "count": count, "seed": args.seed}, results, EXIT_OK


def cmd_tangent(cfg, args):
    system = cfg.build()
    if args.point is None:
        raise UsageError("tangent needs --point x1,...,xd")
    a = _parse_vector(args.point, system.d, "--point")
    if args.l is None and args.plane:
        args.l = len(args.plane.split(";"))
    l = _check_l(args.l, system.d)
    depth = args.depth or default_depth(system)
    t, bracket = _dimension_t(system, min(depth, 4))
    weights = conformal_weights(system, t, depth)
    radii = radius_grid(weights, system.rho_zero)
    if args.plane:
        vecs = [_parse_vector(v, system.d, "--plane") for v in args.plane.split(";")]
        plane = Subspace.span(np.column_stack(vecs))
        source = "given"
    else:
        plane = _local_plane(weights, a, radii[0], l, None)
        source = "fitted"
        if plane is None:
            raise UsageError("no cylinders near the point to fit a plane; pass --plane")
    deltas = _deltas(args.delta)
    rows = [weak_tangent_ratios(weights, a, plane, d, t, radii).as_dict() for d in deltas]
    if args.figure:
        from . import plotting

        plotting.weak_tangent(rows, args.figure, title=cfg.name)
    params = {"point": a.tolist(), "l": l, "deltas": deltas, "depth": depth, "t": t,
              "plane_source": source, "radii": radii.tolist()}
    results = {"plane": plane.as_list(), "per_delta": rows,
               "min_ratio": min(r["min_ratio"] for r in rows), "bracket": bracket.as_dict()}
    return params, results, EXIT_OK


def _deltas(text):
    if text is None:
        return [0.04, 0.1, 0.25, 0.5]
    try:
        vals = [float(s) for s in str(text).split(",")]
    except ValueError as exc:
        raise UsageError(f"--delta: expected numbers, got {text!r}") from exc
    if not all(0 < v < 1 for v in vals):
        raise UsageError("--delta values must lie in (0, 1)")
    return vals


def _check_l(l, d):
    if l is None or not 0 < l < d:
        raise UsageError(f"--l must satisfy 0 < l < d = {d}")
    return l


def cmd_rigidity(cfg, args):
    system = cfg.build()
    l = _check_l(args.l, system.d)
    depth = args.depth or default_depth(system)
    t, bracket = _dimension_t(system, min(depth, 4))
    weights = conformal_weights(system, t, depth)
    config = ClassifierConfig(
        deltas=tuple(_deltas(args.delta)),
        seed=args.seed,
        threads=_threads(args),
        witness_rho=args.rho if args.rho is not None else 0.9,
    )
    verdict = rigidity_classify(system, weights, l, config)
    report = verdict.as_dict()
    if args.figure:
        from . import plotting

        plotting.verdict(weights.anchor_points, _clean(report), args.figure, title=cfg.name)
    params = report.pop("parameters")
    params["bracket"] = bracket.as_dict()
    code = EXIT_INCONCLUSIVE if verdict.kind == "INCONCLUSIVE" else EXIT_OK
    return params, report, code


COMMANDS = {
    "validate": cmd_validate,
    "dimension": cmd_dimension,
    "sample": cmd_sample,
    "measure": cmd_measure,
    "distortion": cmd_distortion,
    "tangent": cmd_tangent,
    "rigidity": cmd_rigidity,
}


def build_parser():
    parser = _Parser(prog="rigidlim", description="Analyse limit sets of conformal-on-E function systems.")
    parser.add_argument("--version", action="version", version=f"rigidlim {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    defaults = {
        "validate": {"depth": 4},
        "dimension": {"depth": 6},
        "sample": {"depth": 6},
        "measure": {"depth": 6},
        "distortion": {"depth": 3},
        "tangent": {"depth": None},
        "rigidity": {"depth": None},
    }
    for name, dflt in defaults.items():
        p = sub.add_parser(name)
        p.add_argument("config", help="config path or bundled fixture name (e.g. cantor)")
        p.add_argument("--depth", type=int, default=dflt["depth"])
        p.add_argument("--tol", type=float, default=1e-10 if name != "validate" else 1e-6)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--count", type=int, default=200 if name == "validate" else None)
        p.add_argument("--l", type=int)
        p.add_argument("--delta")
        p.add_argument("--rho", type=float)
        p.add_argument("--point")
        p.add_argument("--plane", help="basis vectors 'v1;v2', each comma-separated")
        p.add_argument("--out", help="report path (sample: point-cloud path)")
        p.add_argument("--report", help="sample only: report path")
        p.add_argument("--weights-csv", help="measure only: export the weight table")
        p.add_argument("--threads", type=int)
        p.add_argument("--figure", "--plot", dest="figure", help="also render a PNG figure here")
    return parser


def run(argv=None, stdout=None):
    """Parse, dispatch and emit; returns the exit code."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        if args.depth is not None and args.depth < 1:
            raise UsageError("--depth must be >= 1")
        if args.count is not None and args.count < 1:
            raise UsageError("--count must be >= 1")
        start = time.perf_counter()
        cfg = load_config(_resolve(args.config))
        params, results, code = COMMANDS[args.command](cfg, args)
        report = {
            "command": args.command,
            "config": {"name": cfg.name, "digest": cfg.digest},
            "parameters": params,
            "results": results,
            "provenance": {"version": __version__, "wall_time_s": time.perf_counter() - start},
        }
        text = json.dumps(_clean(report), indent=2) + "\n"
        target = args.report if args.command == "sample" else args.out
        if target:
            atomic_write(target, text.encode())
        else:
            stdout.write(text)
        return code
    except UsageError as exc:
        print(f"rigidlim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, CapacityError) as exc:
        print(f"rigidlim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConstructionRejectedError as exc:
        print(f"rigidlim: construction rejected: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except RigidLimError as exc:
        print(f"rigidlim: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(f"rigidlim: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
