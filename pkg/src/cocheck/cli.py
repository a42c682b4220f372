"""``cocheck`` command line: compile contracts and check relations between contracts and implementations."""

import argparse
import json
import os
import sys

from .analysis import (
    ContractInconsistent, NetworkImpl, NotConformant, TraceSet, Verdict, check_conformance,
    check_consistency, compare_permissions, parse_traces,
)
from .compiler import CompileError, compile_contract, default_horizon, norm_index_from_network
from .diagram import DiagramError, load_diagram, validate_diagram
from .guards import GuardSyntaxError
from .nta import FormatError, load_network, write_network
from .traces import (
    HorizonTooSmall, TimedTrace, TraceSyntaxError, UnknownAction, engine_for,
)


class UsageError(Exception):
    pass


# -- loading -----------------------------------------------------------------

def _env_value(text):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        return text


def parse_env(pairs):
    env = {}
    for p in pairs or ():
        if "=" not in p:
            raise UsageError("--env expects name=value, got %r" % p)
        k, v = p.split("=", 1)
        env[k.strip()] = _env_value(v.strip())
    return env


def load_contract(path, env):
    """Network for a ``.cod`` diagram (compiled with ``env``) or a ``.nta`` file."""
    if path.endswith(".nta"):
        if env:
            raise UsageError("--env only applies to .cod contracts")
        return load_network(path)
    try:
        d = load_diagram(path)
    except DiagramError as e:
        raise UsageError("%s:%s" % (path, e)) from None
    report = validate_diagram(d)
    if not report.ok:
        raise UsageError("%s: %s" % (path, "; ".join(f.message for f in report.findings)))
    domains = d.variable_domains()
    for k, v in env.items():
        if k not in domains:
            raise UsageError("%s: --env binds unknown variable %r" % (path, k))
        if v not in domains[k]:
            raise UsageError("%s: value %r is outside the domain of %r" % (path, v, k))
    return compile_contract(d, env).network


def load_impl(path):
    if path.endswith(".nta"):
        return NetworkImpl(load_network(path), name=os.path.basename(path))
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".trace"):
        traces = [TimedTrace.parse(text)]
    else:
        traces = parse_traces(text)
    if not traces:
        raise UsageError("%s: no traces" % path)
    return TraceSet(tuple(traces), name=os.path.basename(path))


def load_trace(path):
    with open(path, encoding="utf-8") as fh:
        return TimedTrace.parse(fh.read())


def _horizon(args, net):
    if args.horizon is not None:
        return args.horizon
    env = os.environ.get("COCHECK_HORIZON")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError("COCHECK_HORIZON must be an integer, got %r" % env) from None
    return default_horizon(net)


# -- rendering ---------------------------------------------------------------

def _label(name, aliases):
    a = aliases.get(name)
    return "%s (%s)" % (a, name) if a and a != name else name


def _trace_lines(t, indent="    "):
    if not t.events:
        return [indent + "(empty trace)"]
    return [indent + "%s %d" % e for e in t.events]


def render_report(v, mode="human", timing=False):
    if mode == "json":
        return json.dumps(v.to_dict(timing), sort_keys=True, indent=2) + "\n"
    al = v.aliases
    by_alias = lambda n: (al.get(n, n), n)
    out = ["%s: %s (horizon %s)" % (v.relation, "holds" if v.holds else "fails", v.horizon)]
    for k, ok in sorted(v.conditions.items()):
        out.append("  %s: %s" % (k, "yes" if ok else "no"))
    if v.witnesses:
        out.append("witnesses:")
        for cn in sorted(v.witnesses, key=by_alias):
            out.append("  %s:" % _label(cn, al))
            out.extend(_trace_lines(v.witnesses[cn]))
    if v.relation != "preorder":
        out.append("missing: %s" % (", ".join(_label(m, al) for m in sorted(v.missing, key=by_alias)) or "none"))
        if v.counterexamples:
            out.append("violations:")
            for t, cn in v.counterexamples:
                out.append("  %s never repaired after:" % _label(cn, al))
                out.extend(_trace_lines(t))
        else:
            out.append("violations: none")
    for n in v.notes:
        out.append("note: %s" % n)
    if timing and v.elapsed_ms is not None:
        out.append("elapsed: %.1f ms" % v.elapsed_ms)
    return "\n".join(out) + "\n"


def _fam(family, index):
    def one(s):
        return "{%s}" % ", ".join(sorted(index.display(n) for n in s))
    return " | ".join(sorted(one(s) for s in family)) or "-"


# -- commands ----------------------------------------------------------------

def cmd_compile(args, out):
    net = load_contract(args.contract, parse_env(args.env))
    text = write_network(net)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        out.write(text)
    return 0


def _emit_verdict(v, args, out):
    out.write(render_report(v, "json" if args.json else "human", args.timing))
    return 0 if v.holds else 1


def cmd_check(args, out):
    net = load_contract(args.contract, parse_env(args.env))
    return _emit_verdict(check_consistency(net, _horizon(args, net)), args, out)


def cmd_conf(args, out):
    net = load_contract(args.contract, parse_env(args.env))
    impl = load_impl(args.impl)
    try:
        v = check_conformance(net, impl, _horizon(args, net))
    except ContractInconsistent as e:
        out.write(render_report(e.verdict, "json" if args.json else "human", args.timing))
        return 1
    return _emit_verdict(v, args, out)


def cmd_compare(args, out):
    net = load_contract(args.contract, parse_env(args.env))
    i1, i2 = load_impl(args.impl1), load_impl(args.impl2)
    try:
        r = compare_permissions(net, i1, i2, _horizon(args, net))
    except (ContractInconsistent, NotConformant) as e:
        v = e.verdict
        v.notes.append(str(e))
        out.write(render_report(v, "json" if args.json else "human", args.timing))
        return 1
    v = r.verdict
    if args.json:
        d = v.to_dict(args.timing)
        d["order"] = r.order
        out.write(json.dumps(d, sort_keys=True, indent=2) + "\n")
    else:
        out.write(render_report(v, "human", args.timing))
        out.write("order: I1 %s I2\n" % r.order)
    return 0 if v.holds else 1


def cmd_trace(args, out):
    net = load_contract(args.contract, parse_env(args.env))
    t = load_trace(args.trace)
    eng = engine_for(net)
    ev = eng.evaluate(t)
    index = norm_index_from_network(net)
    cls = eng.classify(t) if ev.member else None
    if args.json:
        fam = lambda f: sorted(sorted(index.display(n) for n in s) for s in f)
        d = {"trace": str(t), "member": ev.member, "V": fam(ev.V), "S": fam(ev.S), "P": fam(ev.P),
             "maximal": cls.maximal if cls else False, "good": cls.good if cls else False,
             "clean": cls.clean if cls else False}
        out.write(json.dumps(d, sort_keys=True, indent=2) + "\n")
    else:
        out.write("trace: %s\n" % t)
        if not ev.member:
            out.write("not a trace of the contract\n")
        else:
            out.write("V = %s\nS = %s\nP = %s\n" % (_fam(ev.V, index), _fam(ev.S, index), _fam(ev.P, index)))
            out.write("maximal: %s, good: %s, clean: %s\n" % (
                "yes" if cls.maximal else "no", "yes" if cls.good else "no", "yes" if cls.clean else "no"))
    return 0 if ev.member else 1


def cmd_enumerate(args, out):
    net = load_contract(args.contract, parse_env(args.env))
    h = _horizon(args, net)
    traces = engine_for(net).enumerate_maximal(h, strict=not args.lenient, limit=args.limit)
    if args.json:
        out.write(json.dumps({"horizon": h, "traces": [str(t) for t in traces]}, sort_keys=True, indent=2) + "\n")
    else:
        for t in traces:
            out.write(str(t) + "\n")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="cocheck", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, horizon=True):
        sp.add_argument("--env", action="append", default=[], metavar="NAME=VALUE",
                        help="bind a guard variable (repeatable)")
        if horizon:
            sp.add_argument("--horizon", type=int, help="time horizon for bounded exploration")
            sp.add_argument("--json", action="store_true", help="machine-readable output")
            sp.add_argument("--timing", action="store_true", help="report elapsed time")

    sp = sub.add_parser("compile", help="compile a .cod diagram to a .nta network")
    sp.add_argument("contract")
    sp.add_argument("-o", "--output")
    common(sp, horizon=False)
    sp.set_defaults(func=cmd_compile)

    sp = sub.add_parser("check", help="check that a contract is consistent")
    sp.add_argument("contract")
    common(sp)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("conf", help="check that an implementation conforms to a contract")
    sp.add_argument("contract")
    sp.add_argument("impl", help=".nta network, .traces list or single .trace")
    common(sp)
    sp.set_defaults(func=cmd_conf)

    sp = sub.add_parser("compare", help="compare two conforming implementations on permissions")
    sp.add_argument("contract")
    sp.add_argument("impl1")
    sp.add_argument("impl2")
    common(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("trace", help="evaluate one trace against a contract")
    sp.add_argument("contract")
    sp.add_argument("trace")
    common(sp)
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("enumerate", help="list maximal traces within the horizon")
    sp.add_argument("contract")
    sp.add_argument("--limit", type=int)
    sp.add_argument("--lenient", action="store_true",
                    help="skip runs that cannot finish within the horizon instead of failing")
    common(sp)
    sp.set_defaults(func=cmd_enumerate)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0
    try:
        return args.func(args, out)
    except (UsageError, FormatError, DiagramError, GuardSyntaxError, TraceSyntaxError,
            UnknownAction, CompileError, OSError) as e:
        print("cocheck: error: %s" % e, file=sys.stderr)
        return 2
    except HorizonTooSmall as e:
        print("cocheck: error: %s (raise --horizon)" % e, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
