"""Command-line entry point.

Structured results go to standard output as JSON (sorted keys, fixed
float formatting); a one-line human summary goes to standard error. Exit
status: 0 success, 1 check failure or promise violation, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import QoptLabError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def dumps(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False)


def _read_json(path):
    p = Path(path)
    if not p.exists():
        from .fixtures import corpus_root

        alt = corpus_root() / p.name
        if alt.exists():
            p = alt
        else:
            raise UsageError(f"no such file: {path}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _machine_doc(doc):
    return doc["machine"] if "machine" in doc and "states" not in doc else doc


def _load_problem(path):
    from .qopt import problem_from_dict

    return problem_from_dict(_read_json(path))


def _parse_index(text):
    if text is None:
        return None
    vals = json.loads(text)
    return np.array([complex(v["re"], v.get("im", 0.0)) if isinstance(v, dict) else complex(v) for v in vals])


# ------------------------------------------------------------ commands


def cmd_check(args):
    from .machine import machine_from_dict
    from .wellformedness import check_global_unitarity, check_local

    m = machine_from_dict(_machine_doc(_read_json(args.machine)))
    reports = check_local(m)
    out = {r.condition: r.to_dict(limit=args.limit) for r in reports}
    passed = all(r.passed for r in reports)
    if args.global_check:
        oracle = frozenset(_read_json(args.oracle)["members"]) if args.oracle else None
        g = check_global_unitarity(m, windows=args.windows, oracle=oracle)
        out[g.condition] = g.to_dict(limit=args.limit)
        passed = passed and g.passed
    out["passed"] = passed
    return out, passed, f"well-formed: {passed}"


def cmd_run(args):
    from .evolution import run
    from .machine import encode_input, machine_from_dict
    from .qopt import window_for

    m = machine_from_dict(_machine_doc(_read_json(args.machine)))
    index = _parse_index(args.index)
    p = 0 if index is None else int(round(np.log2(len(index))))
    oracle = frozenset(_read_json(args.oracle)["members"]) if args.oracle else None
    w = args.window or window_for(m, args.input, p, args.steps)
    vec = encode_input(m, args.input, index, windows=w)
    res = run(m, vec, args.steps, oracle, strict_halting=not args.allow_split)
    out = res.to_dict(top=args.top)
    out["window"] = w
    return out, True, f"accept probability {res.accept_probability:.12g}, halted {res.halted}"


def cmd_qopt(args):
    from .decide import char_poly_max_root
    from .qopt import extract_opt_matrix, power_problem, sampling_lower_bound, square_problem

    prob = _load_problem(args.problem)
    if args.square:
        prob = square_problem(prob)
    if args.power:
        prob = power_problem(prob, args.power)
    om = extract_opt_matrix(prob, args.input)
    samp = sampling_lower_bound(prob, args.input, count=args.samples, seed=args.seed)
    out = {
        "lambdaMax": om.max_eigenvalue,
        "eigenvector": om.to_dict()["eigenvector"],
        "matrix": om.to_dict()["entries"],
        "residuals": {"certificate": om.residual, "checks": om.checks},
        "samplingLowerBound": samp.sample_max,
        "refinedLowerBound": samp.refined,
        "indexSize": prob.index_size,
    }
    if prob.dimension() <= 64:
        out["charPolyRoot"] = char_poly_max_root(om.entries)
    passed = all(c["passed"] for c in om.checks.values())
    return out, passed, f"lambdaMax {om.max_eigenvalue:.12g}"


def _source(path):
    from .constructions import QubitSource

    return QubitSource.from_dict(_read_json(path))


def cmd_construct(args):
    from . import constructions as c
    from .qopt import power_problem, square_problem

    if args.op == "source":
        src = _source(args.problem)
        amps = src.generate(args.x[0] if args.x else "")
        return {"amplitudes": amps, "weights": np.abs(amps) ** 2}, True, "source generated"
    base = _load_problem(args.problem)
    xs = args.x or [""]
    if args.op == "tensor":
        sizes = [int(s) for s in args.factors.split(",")] if args.factors else None
        res = [c.tensor_index_value(base, x, sizes, samples=args.samples, seed=args.seed).to_dict() | {"x": x} for x in xs]
        ok = all(r["value"] >= r["samplingMax"] - 1e-4 and r["value"] <= r["lambdaMax"] + 1e-9 for r in res)
        return {"results": res}, ok, "tensor index values"
    if args.op == "sandwich":
        res = [c.averaging_sandwich(base, args.exponent or 1, x, strict=False) | {"x": x} for x in xs]
        ok = all(r["passed"] for r in res)
        return {"results": res}, ok, f"averaging bound {'holds' if ok else 'violated'}"
    if args.op == "swap":
        res = [c.max_sup_swap(base, x, args.q or 1) | {"x": x} for x in xs]
        ok = all(r["difference"] <= 1e-7 for r in res)
        return {"results": res}, ok, "max/sup exchange"
    builders = {
        "square": lambda: square_problem(base),
        "power": lambda: power_problem(base, args.exponent or 2),
        "maxOverClassical": lambda: c.max_over_classical(base, args.q or 1),
        "convexCombine": lambda: c.convex_combine(base, _source(args.source)),
        "productOverAll": lambda: c.product_over_all(base, args.length or 1),
        "composeWithFP": lambda: c.compose_with_fp(base, args.map or "identity"),
    }
    if args.op not in builders:
        raise UsageError(f"unknown construction {args.op!r}")
    if args.op == "convexCombine" and not args.source:
        raise UsageError("convexCombine needs --source")
    derived = builders[args.op]()
    records = [c.verify_construction(derived, x) for x in xs]
    ok = all(r["difference"] <= 1e-6 for r in records)
    return {"problem": derived.to_dict(), "verification": records}, ok, f"{args.op}: max difference {max(r['difference'] for r in records):.3g}"


def _steps(args, code):
    if args.t is not None:
        return args.t
    if "steps" not in code:
        raise UsageError("-t is required when the document has no step count")
    return int(code["steps"])


def cmd_qap(args):
    from .approx import eval_qap

    code = _read_json(args.code)
    out = eval_qap(_machine_doc(code), args.x, _steps(args, code), args.m)
    return out, True, f"QAP value {out['value']:.12g} (within {out['bound']:.3g})"


def cmd_maxqtm(args):
    from .approx import eval_maxqtm

    code = _read_json(args.code)
    size = args.index_size if args.index_size is not None else code.get("indexSize")
    out = eval_maxqtm(_machine_doc(code), args.x, _steps(args, code), args.m, size)
    return out, True, f"MAXQTM value {out['value']:.12g} (within {out['bound']:.3g})"


def cmd_decide(args):
    from . import decide as d
    from .qopt import problem_from_dict, solve_opt

    if args.mode == "qop":
        if not args.spec:
            raise UsageError("decide qop needs a spec file")
        spec = _read_json(args.spec)

        def prob(ref):
            return problem_from_dict(_read_json(ref) if isinstance(ref, str) else ref)

        f, g = prob(spec["f"]), prob(spec["g"])
        fv, gv = solve_opt(f, args.x), solve_opt(g, args.x)
        verdict = d.qop_predicate(fv, gv, int(spec["bits"]))
        out = verdict.to_dict() | {"f": fv, "g": gv}
        return out, not verdict.flagged, f"predicate {verdict.result}{' (boundary flagged)' if verdict.flagged else ''}"
    if args.mode == "search":
        if args.problem:
            value = solve_opt(_load_problem(args.problem), args.x)
        elif args.value is not None:
            value = args.value
        else:
            raise UsageError("decide search needs --value or --problem")
        res = d.binary_search_value(d.threshold_oracle(value), args.bits, args.x)
        return res.to_dict() | {"f": value}, True, f"floor value {res.value.numerator}/2^{args.bits}"
    if args.mode == "classify":
        values = [float(v) for v in args.values.split(",")]
        rows = [{"value": v, **d.definability_verdicts(v)} for v in values]
        ok = all(d.VIOLATED not in (r["boundedError"], r["exact"]) for r in rows)
        return {"rows": rows}, ok, "classified"
    raise UsageError(f"unknown decide mode {args.mode!r}")


def cmd_fixtures(args):
    from .fixtures import corpus

    root = Path(args.root) if args.root else None
    if args.write:
        corpus.write_corpus(root)
        if args.calibration:
            corpus.write_calibration(root)
    report = corpus.regenerate(root, jobs=args.jobs)
    bad = [r for r in report["rows"] if r["status"] != "ok"]
    return report, report["passed"], f"{len(report['rows'])} references, {len(bad)} differ"


# ------------------------------------------------------------- parser


def build_parser():
    def common(default):
        # separate instances: subcommand flags must not clobber earlier ones
        opts = argparse.ArgumentParser(add_help=False)
        opts.add_argument("--seed", type=int, default=default(DEFAULT_SEED), help="seed for randomized procedures")
        opts.add_argument("--jobs", type=int, default=default(1), help="worker processes (default 1)")
        opts.add_argument("--manifest", default=default(None), help="also write the run manifest, with wall time, to this file")
        return opts

    parser = argparse.ArgumentParser(
        prog="qoptlab", description=__doc__.splitlines()[0], parents=[common(lambda v: v)]
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common(lambda v: argparse.SUPPRESS)], **kw)

    sub.add_parser = add_parser

    p = sub.add_parser("check", help="local well-formedness (and optionally global unitarity)")
    p.add_argument("machine")
    p.add_argument("--global", dest="global_check", action="store_true", help="also assemble U and test unitarity")
    p.add_argument("--windows", type=int, default=5, help="ring length for the global check")
    p.add_argument("--oracle", help="oracle set file for the global check")
    p.add_argument("--limit", type=int, default=20, help="violations listed per condition")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="simulate a machine")
    p.add_argument("machine")
    p.add_argument("--input", default="")
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--index", help="quantum index as a JSON list of amplitudes")
    p.add_argument("--oracle", help="JSON file {\"members\": [...]}")
    p.add_argument("--window", type=int, help="ring length (default: sized from the travel budget)")
    p.add_argument("--top", type=int, default=16, help="configurations listed in the output")
    p.add_argument("--allow-split", action="store_true", help="do not fail on partially halted states")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("qopt", help="optimization problems")
    p.add_argument("action", choices=["solve"])
    p.add_argument("problem")
    p.add_argument("--input", default="")
    p.add_argument("--square", action="store_true", help="solve the squared problem")
    p.add_argument("--power", type=int, help="solve the m-th power problem")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_qopt)

    p = sub.add_parser("construct", help="closure constructions with verification")
    p.add_argument(
        "op",
        choices=[
            "square",
            "power",
            "maxOverClassical",
            "convexCombine",
            "productOverAll",
            "composeWithFP",
            "tensor",
            "sandwich",
            "swap",
            "source",
        ],
    )
    p.add_argument("problem")
    p.add_argument("--x", action="append", help="input(s) to verify on")
    p.add_argument("--q", type=int, help="classical index length")
    p.add_argument("--length", type=int, help="product index length")
    p.add_argument("--exponent", type=int, help="power / averaging exponent")
    p.add_argument("--source", help="qubit source document")
    p.add_argument("--map", help="identity, bitflip, reverse or constant:<c>")
    p.add_argument("--factors", help="comma-separated factor sizes for tensor")
    p.add_argument("--samples", type=int, default=10_000)
    p.set_defaults(func=cmd_construct)

    for name, func, help_ in (("qap", cmd_qap, "quantized acceptance"), ("maxqtm", cmd_maxqtm, "quantized maximum acceptance")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("code")
        p.add_argument("--x", default="")
        p.add_argument("-t", type=int, help="steps (default: the document's step count)")
        p.add_argument("-m", type=int, required=True, help="accuracy parameter (error at most 1/m)")
        if name == "maxqtm":
            p.add_argument("--index-size", type=int, help="index qubits (default |x|)")
        p.set_defaults(func=func)

    p = sub.add_parser("decide", help="value extraction and predicates")
    p.add_argument("mode", choices=["qop", "search", "classify"])
    p.add_argument("spec", nargs="?")
    p.add_argument("--x", default="")
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--value", type=float)
    p.add_argument("--problem")
    p.add_argument("--values", default="1.0,0.5,0.0")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("fixtures", help="corpus maintenance")
    p.add_argument("action", choices=["regen"])
    p.add_argument("--root", help="corpus directory (default $QOPTLAB_CORPUS or the bundled corpus)")
    p.add_argument("--write", action="store_true", help="rewrite documents and references first")
    p.add_argument("--calibration", action="store_true", help="with --write, rebuild the calibration table")
    p.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        outputs, passed, summary = args.func(args)
        status = EXIT_OK if passed else EXIT_FAIL
    except UsageError as exc:
        outputs, status, summary = {"error": str(exc)}, EXIT_USAGE, f"usage error: {exc}"
    except QoptLabError as exc:
        outputs, status, summary = {"error": str(exc), "type": type(exc).__name__}, EXIT_USAGE, f"error: {exc}"
    manifest = {
        "command": args.command,
        "arguments": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "manifest")},
        "seed": args.seed,
        "toolVersion": __version__,
        "exitStatus": status,
        "outputs": outputs,
    }
    text = dumps(manifest)
    sys.stdout.write(text + "\n")
    wall = time.perf_counter() - start
    if args.manifest:
        Path(args.manifest).write_text(dumps(manifest | {"wallTime": wall}) + "\n")
    print(f"{summary} [{wall:.2f}s]", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
