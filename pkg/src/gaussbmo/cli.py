"""Command-line front end: measures, operator evaluation, norms, atoms, coverings and theorem checks.

Exit codes: 0 on success or a passing check, 1 on a failing check, 2 on any
configuration error (bad flags, schema violations, invalid parameters).
"""

import argparse
import json
import sys
from dataclasses import asdict, replace

import jsonschema
import numpy as np

from . import __version__
from .bmo import BallSample, blo_norm, bmo_norm, bmo_star_norm
from .commutators import CommutatorKind, evaluate_commutator
from .covering import build_covering, overlap_count
from .functions import AtomSpec, from_dict, lp_norm, make_atom, validate_atom, weak_lp_quasinorm
from .geometry import Ball, GaussContext, gauss_ball, v_kernel, v_kernel_partial
from .harness import THEOREM_IDS, TheoremCheckConfig, run_check
from .operators import (
    BallSearchGrid,
    OperatorParams,
    frac_integral,
    frac_integral_dual,
    frac_integral_tilde,
    frac_integral_tilde_dual,
    frac_maximal,
    local_maximal,
    sharp_maximal,
)
from .quadrature import QuadratureConfig
from .report import dumps, report_csv, report_json

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT1 = {"type": "integer", "minimum": 1}
_SPEC = {"type": "object", "required": ["kind"]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "theorem_id": {"enum": list(THEOREM_IDS)},
        "n": _INT1,
        "a": _POS,
        "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "p": {"type": "number", "minimum": 1},
        "q": {"type": ["number", "null"]},
        "family": {"type": ["array", "null"], "items": _SPEC, "minItems": 1},
        "b_family": {"type": ["array", "null"], "items": _SPEC, "minItems": 1},
        "quad": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "radial_nodes": {"type": "integer", "minimum": 8},
                "angular_nodes": {"type": "integer", "minimum": 8},
                "mc_samples": {"type": "integer", "minimum": 1000},
                "seed": {"type": "integer", "minimum": 0},
                "rel_tol": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.1},
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "directions": _INT1,
                "radii": _INT1,
                "offsets": _INT1,
                "min_fraction": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "explicit_candidates": {
                    "type": "array",
                    "items": {"type": "object", "required": ["center", "radius"]},
                },
            },
        },
        "sample_spacing": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "chain_spacing": _POS,
        "chain_extent": _POS,
        "lambda_count": {"type": "integer", "minimum": 2},
        "drift_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "identity_tol": _POS,
        "slack": {"type": "number", "minimum": 0},
        "geom_samples": _INT1,
        "doubling_samples": _INT1,
        "atom_count": _INT1,
        "identity_samples": _INT1,
        "covering_spacing": _POS,
        "region_half": _POS,
        "tau": {"type": "number", "minimum": 0},
        "threads": _INT1,
        "output": {"type": "string"},
        "format": {"enum": ["json", "csv"]},
    },
}


class ConfigError(Exception):
    pass


# line-anchored config diagnostics -----------------------------------------------

def _skip_ws(text, i):
    while i < len(text) and text[i] in " \t\r\n":
        i += 1
    return i


def _positions(text):
    """Map each JSON path (tuple of keys/indices) to the character offset of its value."""
    dec = json.JSONDecoder()
    out = {}

    def walk(i, path):
        i = _skip_ws(text, i)
        out[path] = i
        ch = text[i]
        if ch == "{":
            i = _skip_ws(text, i + 1)
            if text[i] == "}":
                return i + 1
            while True:
                key, i = json.decoder.scanstring(text, _skip_ws(text, i) + 1)
                i = _skip_ws(text, i) + 1  # colon
                i = walk(i, path + (key,))
                i = _skip_ws(text, i)
                if text[i] == "}":
                    return i + 1
                i += 1
        if ch == "[":
            i = _skip_ws(text, i + 1)
            if text[i] == "]":
                return i + 1
            k = 0
            while True:
                i = walk(i, path + (k,))
                i = _skip_ws(text, i)
                k += 1
                if text[i] == "]":
                    return i + 1
                i += 1
        _, end = dec.raw_decode(text, i)
        return end

    walk(0, ())
    return out


def _line_col(text, offset):
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def load_config_file(path):
    """Parse and schema-validate a config file; errors carry path:line:col anchors."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: error: cannot read config: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: error: invalid JSON: {exc.msg}") from None
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        pos = _positions(text)
        lines = []
        for err in errors:
            where = tuple(err.absolute_path)
            line, col = _line_col(text, pos.get(where, 0))
            loc = "/".join(map(str, where)) or "<root>"
            lines.append(f"{path}:{line}:{col}: error: {loc}: {err.message}")
        raise ConfigError("\n".join(lines))
    return data


# argument helpers ---------------------------------------------------------------

def _vector(text, dim):
    try:
        v = [float(t) for t in text.split(",")]
    except ValueError:
        raise ConfigError(f"error: cannot parse vector {text!r}") from None
    if len(v) == 1 and dim > 1:
        v = v * dim
    if len(v) != dim:
        raise ConfigError(f"error: vector {text!r} has {len(v)} components, expected {dim}")
    return v


def _points(text, dim):
    return np.array([_vector(t, dim) for t in text.split(";") if t.strip()])


def _spec(text):
    if text is None:
        return None
    if text.startswith("@"):
        with open(text[1:], encoding="utf-8") as fh:
            text = fh.read()
    try:
        return from_dict(json.loads(text))
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"error: invalid function spec: {exc}") from None


def _quad(args, base=None):
    q = base or QuadratureConfig()
    upd = {}
    for flag, name in (("radial_nodes", "radial_nodes"), ("angular_nodes", "angular_nodes"),
                       ("mc_samples", "mc_samples"), ("seed", "seed")):
        v = getattr(args, flag, None)
        if v is not None:
            upd[name] = v
    return replace(q, **upd)


def _ctx(args):
    return GaussContext(args.dim or 1, _quad(args))


def _params(args):
    return OperatorParams(args.a if args.a is not None else 1.0, args.beta if args.beta is not None else 0.5,
                          BallSearchGrid(args.directions, args.radii, args.offsets))


def _common(args):
    return {
        "dim": args.dim or 1,
        "a": args.a if args.a is not None else 1.0,
        "beta": args.beta if args.beta is not None else 0.5,
        "p": args.p,
        "grid": {"directions": args.directions, "radii": args.radii, "offsets": args.offsets},
        "quad": asdict(_quad(args)),
        "threads": args.threads,
    }


def _emit(args, text):
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_result(args, command, result):
    doc = {"command": command, "config": _common(args), "result": result, "version": __version__}
    if args.format == "csv":
        rows = result if isinstance(result, list) else [result]
        keys = sorted({k for r in rows for k in r})
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([dumps(r[k]) if k in r else "" for k in keys])
        _emit(args, buf.getvalue())
    else:
        _emit(args, dumps(doc, indent=2) + "\n")


# subcommands ------------------------------------------------------------------

def cmd_measure(args):
    ctx = _ctx(args)
    n = ctx.dim
    if args.what == "ball":
        if args.center is None or args.radius is None:
            raise ConfigError("error: measure ball requires --center and --radius")
        B = Ball(tuple(_vector(args.center, n)), args.radius)
        res = {"ball": B.to_dict(), "gamma": gauss_ball(ctx, B)}
    else:
        if args.x is None or args.y is None:
            raise ConfigError(f"error: measure {args.what} requires --x and --y")
        x, y = np.array(_vector(args.x, n)), np.array(_vector(args.y, n))
        if args.what == "v":
            res = {"x": x, "y": y, "V": v_kernel(ctx, x, y)}
        else:
            res = {"x": x, "y": y, "index": args.index, "dV": v_kernel_partial(ctx, x, y, args.index)}
    _emit_result(args, "measure", res)
    return EXIT_PASS


_OPERATORS = {
    "I": frac_integral,
    "I_tilde": frac_integral_tilde,
    "I_dual": frac_integral_dual,
    "I_tilde_dual": frac_integral_tilde_dual,
    "M": frac_maximal,
    "M_local": local_maximal,
}


def cmd_apply(args):
    ctx, params = _ctx(args), _params(args)
    f = _spec(args.f)
    pts = _points(args.points, ctx.dim)
    if args.operator in _OPERATORS:
        vals = _OPERATORS[args.operator](ctx, params, f, pts)
    elif args.operator == "sharp":
        vals = sharp_maximal(ctx, f, pts, params.ball_grid)
    else:
        b = _spec(args.b)
        if b is None:
            raise ConfigError(f"error: operator {args.operator} requires --b")
        vals = evaluate_commutator(args.operator, ctx, params, b, f, pts)
    rows = [{"x": list(map(float, x)), "value": float(v)} for x, v in zip(pts, np.atleast_1d(vals))]
    _emit_result(args, "apply", rows)
    return EXIT_PASS


def cmd_norm(args):
    ctx = _ctx(args)
    f = _spec(args.f)
    p = args.p if args.p is not None else 1.0
    if args.kind == "lp":
        res = {"lp": lp_norm(ctx, f, p), "p": p}
    elif args.kind == "weak":
        res = {"weak": weak_lp_quasinorm(ctx, f, p), "p": p}
    else:
        a = args.a if args.a is not None else 1.0
        sample = BallSample(ctx.dim, 1.0 if args.kind == "bmo" else a, args.spacing)
        if args.kind == "bmo":
            est = bmo_norm(ctx, f, sample)
            res = {"bmo": est.value, "star": bmo_star_norm(ctx, f, sample).value, "ball": est.ball.to_dict()}
        else:
            est = blo_norm(ctx, f, sample)
            res = {"blo": est.value, "l1": est.l1, "bracket": est.bracket, "ball": est.ball.to_dict()}
    _emit_result(args, "norm", res)
    return EXIT_PASS


def cmd_atom(args):
    ctx = _ctx(args)
    if args.constant_one:
        spec = AtomSpec(is_constant_one=True, r=args.r)
    else:
        if args.center is None or args.radius is None:
            raise ConfigError("error: atom requires --center and --radius (or --constant-one)")
        ball = Ball(tuple(_vector(args.center, ctx.dim)), args.radius)
        spec = AtomSpec(ball=ball, r=args.r, profile=_spec(args.profile))
    if args.action == "make":
        atom = make_atom(ctx, spec)
        _emit_result(args, "atom", {"atom": atom.to_dict()})
        return EXIT_PASS
    f = _spec(args.f)
    chk = validate_atom(ctx, f, spec)
    _emit_result(args, "atom", {"valid": chk.ok, "reasons": list(chk.reasons)})
    return EXIT_PASS if chk.ok else EXIT_FAIL


def cmd_covering(args):
    ctx = _ctx(args)
    n = ctx.dim
    region = ([-args.half] * n, [args.half] * n)
    fam = build_covering(ctx, region, args.spacing)
    res = dict(fam.stats)
    res["overlap"] = overlap_count(fam, args.tau)
    res["tau"] = args.tau
    ok = res["disjoint"] and res["uncovered_test_points"] == 0
    _emit_result(args, "covering", res)
    return EXIT_PASS if ok else EXIT_FAIL


def build_check_config(args, theorem_id, overrides=None):
    data = load_config_file(args.config) if args.config else {}
    data.pop("output", None)
    data.pop("format", None)
    data["theorem_id"] = theorem_id
    flag_map = {"dim": "n", "a": "a", "beta": "beta", "p": "p", "threads": "threads"}
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            data[key] = v
    quad = dict(data.get("quad", {}))
    for flag in ("radial_nodes", "angular_nodes", "mc_samples", "seed"):
        v = getattr(args, flag, None)
        if v is not None:
            quad[flag] = v
    if quad:
        data["quad"] = quad
    data.update(overrides or {})
    try:
        return TheoremCheckConfig.from_dict(data)
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"error: invalid check configuration: {exc}") from None


def _config_output(args):
    if args.config and (args.output is None or args.format is None):
        data = load_config_file(args.config)
        args.output = args.output or data.get("output")
        args.format = args.format or data.get("format")
    args.format = args.format or "json"


def cmd_verify(args):
    _config_output(args)
    cfg = build_check_config(args, args.theorem_id)
    rep = run_check(cfg)
    _emit(args, report_csv(rep) if args.format == "csv" else report_json(rep))
    return EXIT_PASS if rep.passed else EXIT_FAIL


def _sweep_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_sweep(args):
    _config_output(args)
    values = [_sweep_value(v) for v in args.values.split(",")]
    reports = []
    for v in values:
        cfg = build_check_config(args, args.theorem_id, {args.param: v})
        reports.append(run_check(cfg))
    if args.format == "csv":
        lines = ["theorem_id,param,value,max_ratio,coarse,fine,delta,pass"]
        for v, rep in zip(values, reports):
            r = rep.refinement
            lines.append(",".join([rep.theorem_id, args.param, dumps(v), dumps(rep.max_ratio), dumps(r["coarse"]),
                                   dumps(r["fine"]), dumps(r["delta"]), "true" if rep.passed else "false"]))
        _emit(args, "\n".join(lines) + "\n")
    else:
        doc = {"sweep": {"param": args.param, "values": values}, "reports": [r.to_dict() for r in reports],
               "version": __version__}
        _emit(args, dumps(doc, indent=2) + "\n")
    return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL


# parser ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: error: {message}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("common options")
    g.add_argument("--dim", type=int, help="dimension n")
    g.add_argument("--a", type=float, help="admissibility parameter a > 0")
    g.add_argument("--beta", type=float, help="fractional order in (0, 1)")
    g.add_argument("--p", type=float, help="Lebesgue exponent")
    g.add_argument("--seed", type=int)
    g.add_argument("--radial-nodes", dest="radial_nodes", type=int)
    g.add_argument("--angular-nodes", dest="angular_nodes", type=int)
    g.add_argument("--mc-samples", dest="mc_samples", type=int)
    g.add_argument("--threads", type=int)
    g.add_argument("--config", help="JSON configuration file")
    g.add_argument("--output", help="write the report here instead of stdout")
    g.add_argument("--format", choices=["json", "csv"])
    g.add_argument("--directions", type=int, default=8, help="candidate directions for maximal operators")
    g.add_argument("--radii", type=int, default=12, help="candidate radii for maximal operators")
    g.add_argument("--offsets", type=int, default=4, help="candidate center offsets for maximal operators")

    parser = _Parser(prog="gaussbmo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("measure", parents=[common], help="gamma(B), V(x, y) or dV/dx_i")
    m.add_argument("what", choices=["ball", "v", "derivative"])
    m.add_argument("--center")
    m.add_argument("--radius", type=float)
    m.add_argument("--x")
    m.add_argument("--y")
    m.add_argument("--index", type=int, default=0)
    m.set_defaults(func=cmd_measure)

    ap = sub.add_parser("apply", parents=[common], help="evaluate an operator at points")
    ap.add_argument("operator", choices=list(_OPERATORS) + ["sharp"] + [k.value for k in CommutatorKind])
    ap.add_argument("--f", required=True, help="function spec as JSON text or @file")
    ap.add_argument("--b", help="symbol b for commutators (JSON or @file)")
    ap.add_argument("--points", required=True, help="points 'x1,x2;y1,y2;...'")
    ap.set_defaults(func=cmd_apply)

    nm = sub.add_parser("norm", parents=[common], help="L^p, weak L^p, BMO or BLO norm")
    nm.add_argument("kind", choices=["lp", "weak", "bmo", "blo"])
    nm.add_argument("--f", required=True)
    nm.add_argument("--spacing", type=float, help="ball-sample lattice spacing")
    nm.set_defaults(func=cmd_norm)

    at = sub.add_parser("atom", parents=[common], help="make or validate a (1, r) atom")
    at.add_argument("action", choices=["make", "validate"])
    at.add_argument("--center")
    at.add_argument("--radius", type=float)
    at.add_argument("--r", type=float, default=2.0)
    at.add_argument("--profile", help="profile spec for make")
    at.add_argument("--f", help="candidate atom spec for validate")
    at.add_argument("--constant-one", dest="constant_one", action="store_true")
    at.set_defaults(func=cmd_atom)

    cv = sub.add_parser("covering", parents=[common], help="build the admissible covering of a cube")
    cv.add_argument("--half", type=float, default=5.0)
    cv.add_argument("--spacing", type=float, default=0.5)
    cv.add_argument("--tau", type=float, default=4.0)
    cv.set_defaults(func=cmd_covering)

    vf = sub.add_parser("verify", parents=[common], help="run one theorem check")
    vf.add_argument("theorem_id", choices=THEOREM_IDS)
    vf.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", parents=[common], help="run one check over a parameter grid")
    sw.add_argument("theorem_id", choices=THEOREM_IDS)
    sw.add_argument("--param", required=True, help="config key to vary, e.g. beta")
    sw.add_argument("--values", required=True, help="comma separated values")
    sw.set_defaults(func=cmd_sweep)
    return parser


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command not in ("verify", "sweep"):
            args.format = args.format or "json"
        return args.func(args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
