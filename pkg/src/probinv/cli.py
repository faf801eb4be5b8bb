"""Command-line interface.

Exit codes (stable):

=====  =====================================================
0      success (invariant found, candidate admissible, ...)
2      usage error
3      input error: unreadable file, parse or type error
4      the solver answered unknown, failed, or a budget/timeout ran out
5      the chosen refinement strategy or synthesizer does not apply
6      no invariant: every round failed or no instance exists
7      verify: the candidate is not admissible
8      one-shot refused: the guard region exceeds the cap
=====  =====================================================
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from .smt.session import SmtError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_INCONCLUSIVE = 4
EXIT_INAPPLICABLE = 5
EXIT_NO_INVARIANT = 6
EXIT_NOT_ADMISSIBLE = 7
EXIT_REFUSED = 8


class InputError(Exception):
    pass


# -- loading -----------------------------------------------------------------------

def load_inputs(program_arg: str, property_arg: str):
    """Program and property from files, or from the bundled corpus (``brp`` and ``1``)."""
    from . import corpus
    from .pgcl import PgclError, parse_program, parse_property

    p = Path(program_arg)
    try:
        if p.is_file():
            text = p.read_text()
        elif program_arg in corpus.names():
            text = corpus.program_text(program_arg)
        else:
            raise InputError(f"no such program file or bundled benchmark: {program_arg}")
        loop = parse_program(text)
        q = Path(property_arg)
        if q.is_file():
            ptext = q.read_text()
        elif property_arg.isdigit() and program_arg in corpus.names():
            ptext = corpus.property_text(program_arg, int(property_arg))
        else:
            raise InputError(f"no such property file: {property_arg}")
        f, g = parse_property(ptext, loop)
    except PgclError as exc:
        raise InputError(str(exc)) from exc
    except OSError as exc:
        raise InputError(str(exc)) from exc
    return loop, f, g


def parse_state(text: str, variables) -> dict:
    state = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep or not value.strip().isdigit():
            raise InputError(f"bad state item {item!r}; expected name=natural")
        state[name.strip()] = int(value)
    missing = set(variables) - set(state)
    extra = set(state) - set(variables)
    if missing or extra:
        raise InputError(f"state must assign exactly {', '.join(variables)}")
    return state


def load_invariant(path: str, loop):
    from .pgcl import PgclError, parse_expectation

    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    if path.endswith(".json"):
        try:
            text = json.loads(text)["invariant"]
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{path}: no 'invariant' field") from exc
        if text is None:
            raise InputError(f"{path}: the run did not produce an invariant")
    try:
        I = parse_expectation(text, loop)
    except PgclError as exc:
        raise InputError(str(exc)) from exc
    return I


def q(x) -> str:
    """Exact ``p/q`` (or ``INF``) rendering for JSON."""
    return str(x)


def emit(obj: dict, path: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        Path(path).write_text(text + "\n")
    else:
        print(text)


def _options(args):
    from .smt.session import SolverOptions, set_default_options

    opts = SolverOptions(
        command=args.solver,
        timeout_ms=args.solver_timeout,
        dump_dir=args.dump_smt,
        seed=args.seed,
    )
    if args.dump_smt:
        Path(args.dump_smt).mkdir(parents=True, exist_ok=True)
    set_default_options(opts)
    return opts


def _coop(text: str):
    if text == "off":
        return None
    try:
        d = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a rational > 1 or 'off', got {text!r}")
    if d <= 1:
        raise argparse.ArgumentTypeError("the distance factor must exceed 1")
    return d


# -- commands ----------------------------------------------------------------------

def cmd_synthesize(args) -> int:
    from .cegis import CegisConfig, TraceWriter
    from .oracle import OracleTooLarge, build_chain, pointwise_check
    from .pgcl.analysis import is_finite_state
    from .refinement import OuterConfig, StrategyInapplicable, outer_loop

    loop, f, g = load_inputs(args.program, args.property)
    opts = _options(args)
    trace = TraceWriter(args.trace) if args.trace else None
    cfg = CegisConfig(
        mode=args.synth,
        cooperative=args.coop_d is not None,
        d=args.coop_d or Fraction(2),
        budget=args.budget,
        options=opts,
        trace=trace,
        oracle_cap=args.oracle_cap,
    )
    dumps = []

    def on_template(rnd, T):
        dumps.append({"round": rnd, "template": str(T)})
        if trace:
            trace({"event": "template", "round": rnd, "template": str(T)})

    try:
        res = outer_loop(loop, f, g, OuterConfig(args.strategy, args.rounds, args.timeout, cfg, on_template))
    except StrategyInapplicable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INAPPLICABLE
    finally:
        if trace:
            trace.close()
    oracle = None
    if res.status == "invariant" and is_finite_state(loop):
        try:
            chain = build_chain(loop, f, cap=args.oracle_cap)
            verdict = pointwise_check(res.invariant, chain, g)
            oracle = {"checked": True, "states": len(chain), "admissible": verdict is True}
        except OracleTooLarge as exc:
            oracle = {"checked": False, "reason": str(exc)}
    summary = {
        "command": "synthesize",
        "program": args.program,
        "property": args.property,
        "status": res.status,
        "strategy": args.strategy,
        "synth": args.synth,
        "coop_d": None if args.coop_d is None else str(args.coop_d),
        "counterexamples": res.counterexamples,
        "pieces": len(res.invariant) if res.invariant is not None else None,
        "invariant": str(res.invariant) if res.invariant is not None else None,
        "invariant_pieces": res.invariant.to_json() if res.invariant is not None else None,
        "rounds": [r.to_json() for r in res.rounds],
        "templates": dumps if args.dump_templates else None,
        "oracle": oracle,
        "message": res.message,
        "wall_time": round(res.seconds, 6),
    }
    emit(summary, args.json)
    if args.out and res.invariant is not None:
        Path(args.out).write_text(str(res.invariant) + "\n")
    if res.status == "invariant":
        return EXIT_OK
    return EXIT_INCONCLUSIVE if res.status == "inconclusive" else EXIT_NO_INVARIANT


def cmd_verify(args) -> int:
    from .cegis import Inconclusive, Verifier
    from .oracle import OracleTooLarge, build_chain, pointwise_check
    from .pgcl.analysis import is_finite_state

    loop, f, g = load_inputs(args.program, args.property)
    opts = _options(args)
    I = load_invariant(args.invariant, loop)
    v = Verifier(loop, f, g, options=opts)
    try:
        verdict = v.verify(I)
    except Inconclusive as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    finally:
        v.close()
    report = {
        "command": "verify",
        "program": args.program,
        "property": args.property,
        "admissible": verdict is True,
        "counterexample": None if verdict is True else verdict.to_json(),
        "oracle": None,
    }
    if is_finite_state(loop):
        try:
            chain = build_chain(loop, f, cap=args.oracle_cap)
            ov = pointwise_check(I, chain, g)
            report["oracle"] = {
                "checked": True,
                "admissible": ov is True,
                "counterexample": None if ov is True else ov.to_json(),
            }
        except OracleTooLarge as exc:
            report["oracle"] = {"checked": False, "reason": str(exc)}
    emit(report, args.json)
    return EXIT_OK if verdict is True else EXIT_NOT_ADMISSIBLE


def cmd_one_shot(args) -> int:
    from .refinement import initial_template
    from .smt.queries import one_shot
    from .wp import char_fun

    loop, f, g = load_inputs(args.program, args.property)
    opts = _options(args)
    T = initial_template(loop, f)
    start = time.monotonic()
    r = one_shot(T, char_fun(loop, f, T), g, loop, f, cap=args.cap, options=opts)
    I = T.instantiate(r.valuation) if r.status == "sat" else None
    emit({
        "command": "one-shot",
        "program": args.program,
        "property": args.property,
        "status": r.status,
        "template": str(T),
        "valuation": None if r.valuation is None else {k: q(v) for k, v in sorted(r.valuation.items())},
        "invariant": None if I is None else str(I),
        "conjuncts": r.conjuncts,
        "message": r.message,
        "wall_time": round(time.monotonic() - start, 6),
    }, args.json)
    return {"sat": EXIT_OK, "unsat": EXIT_NO_INVARIANT, "refused": EXIT_REFUSED}.get(r.status, EXIT_INCONCLUSIVE)


def cmd_oracle(args) -> int:
    from .expectations.piecewise import value_le
    from .oracle import OracleTooLarge, build_chain, dump_chain, exact_lfp

    loop, f, g = load_inputs(args.program, args.property)
    try:
        chain = build_chain(loop, f, cap=args.oracle_cap)
    except OracleTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    if args.dump:
        with open(args.dump, "w") as fh:
            dump_chain(chain, fh)
    out = {"command": "oracle", "program": args.program, "states": len(chain), "frontier": len(chain.terminal)}
    if args.state:
        state = parse_state(args.state, loop.variables)
        if not loop.phi.evaluate(state):
            value = f.evaluate(state)
        else:
            value = exact_lfp(chain)[chain.key(state)]
        out["state"] = state
        out["lfp"] = q(value)
        gv = g.evaluate(state)
        out["g"] = q(gv)
        out["g_dominates"] = value_le(value, gv)
    emit(out, args.json)
    return EXIT_OK


def cmd_dump_charfun(args) -> int:
    from .refinement import initial_template
    from .wp import char_fun

    loop, f, g = load_inputs(args.program, args.property)
    _options(args)
    T = load_invariant(args.template, loop) if args.template else initial_template(loop, f)
    psi = char_fun(loop, f, T)
    if args.json:
        emit({"template": str(T), "template_pieces": T.to_json(), "charfun": str(psi), "charfun_pieces": psi.to_json()},
             args.json)
    else:
        print(f"T       = {T}")
        print(f"Phi_f(T) = {psi}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import run_bench

    rows = run_bench(
        args.corpus,
        strategies=args.strategies,
        modes=args.modes,
        timeout=args.timeout,
        jobs=args.jobs,
        extra=_passthrough(args),
    )
    from .bench import write_csv

    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    if args.json:
        Path(args.json).write_text(json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def _passthrough(args) -> list[str]:
    out = ["--budget", str(args.budget), "--rounds", str(args.rounds), "--seed", str(args.seed)]
    out += ["--coop-d", "off" if args.coop_d is None else str(args.coop_d)]
    if args.solver:
        out += ["--solver", args.solver]
    return out


# -- parser ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    from .refinement import STRATEGIES

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--solver", help="SMT solver executable or command line (default: $PROBINV_SOLVER, then z3 on PATH)")
    common.add_argument("--solver-timeout", type=int, default=None, metavar="MS", help="per check-sat timeout")
    common.add_argument("--dump-smt", metavar="DIR", help="write every SMT-LIB script sent to the solver into DIR")
    common.add_argument("--seed", type=int, default=0, help="solver random seed")
    common.add_argument("--oracle-cap", type=int, default=10**4, help="largest guard region the explicit oracle builds")
    common.add_argument("--json", metavar="FILE", help="write the JSON report to FILE instead of stdout")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--strategy", choices=STRATEGIES, default="inductivity")
    search.add_argument("--synth", choices=("plain", "safe"), default="plain")
    search.add_argument("--coop-d", type=_coop, default=Fraction(2), metavar="D|off",
                        help="cooperative verifier distance factor (default 2), or 'off'")
    search.add_argument("--budget", type=int, default=5000, help="counterexamples per CEGIS run")
    search.add_argument("--rounds", type=int, default=8, help="refinement round cap")
    search.add_argument("--timeout", type=float, default=None, help="wall-clock limit in seconds")

    io = argparse.ArgumentParser(add_help=False)
    io.add_argument("program", help="program file, or the name of a bundled benchmark")
    io.add_argument("property", help="property file, or a property number of a bundled benchmark")

    p = argparse.ArgumentParser(prog="probinv", description="Inductive invariants for probabilistic loops.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synthesize", parents=[io, common, search], help="synthesize an inductive invariant")
    s.add_argument("--out", metavar="FILE", help="write the invariant in text form")
    s.add_argument("--trace", metavar="FILE", help="append a JSON-lines trace")
    s.add_argument("--dump-templates", action="store_true", help="include each round's template in the report")
    s.set_defaults(fn=cmd_synthesize)

    s = sub.add_parser("verify", parents=[io, common], help="check a candidate invariant")
    s.add_argument("invariant", help="invariant file (text expectation, or a synthesize JSON report)")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("one-shot", parents=[io, common], help="solve the initial template with a single query")
    s.add_argument("--cap", type=int, default=10**6, help="largest guard region expanded state by state")
    s.set_defaults(fn=cmd_one_shot)

    s = sub.add_parser("oracle", parents=[io, common], help="exact least fixed point on the explicit chain")
    s.add_argument("--state", help="state as name=value,...")
    s.add_argument("--dump", metavar="FILE", help="write the chain as 'src dst p/q' lines")
    s.set_defaults(fn=cmd_oracle)

    s = sub.add_parser("dump-charfun", parents=[io, common], help="print a template and its characteristic functional")
    s.add_argument("--template", metavar="FILE", help="expectation to transform (default: the initial template)")
    s.set_defaults(fn=cmd_dump_charfun)

    s = sub.add_parser("bench", parents=[common, search], help="run a corpus directory, one process per cell")
    s.add_argument("corpus", help="directory with NAME.pgcl and NAME.K.prop files")
    s.add_argument("--strategies", nargs="+", choices=STRATEGIES, default=list(STRATEGIES))
    s.add_argument("--modes", nargs="+", choices=("plain", "safe"), default=["plain"])
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--csv", metavar="FILE")
    s.set_defaults(fn=cmd_bench, timeout=120.0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.fn(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SmtError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
