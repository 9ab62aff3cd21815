"""Command-line driver: ingest, lower, rewrite, synthesize, and report.

Subcommands: compile | verify | cost | bench | rewrite | error-sweep.
Reports are JSON with sorted keys and no timestamps, so identical
inputs and flags produce byte-identical output.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import gen_decay, gen_hypercube_like, gen_random_pauli, gen_tfim
from .circuits import (
    circuit_from_json,
    circuit_to_json,
    cost_report,
    run_channel,
)
from .ir import (
    ChannelExpr,
    PauliUnitary,
    TypecheckError,
    apply_channel,
    channel_from_json,
    channel_to_json,
    lindblad_from_json,
    lindblad_to_json,
    probe_states,
    trace_distance,
    typecheck,
)
from .lindblad import (
    QuadratureSpec,
    exact_propagator,
    first_order,
    higher_order,
    lindblad_opnorm,
    propagate,
)
from .rewrite import (
    RewriteError,
    apply_rule,
    minimize_kraus_rank,
    simplify,
    trace_to_json,
)
from .select_opt import g_table_json, mode_table_json, optimize_pauli_select
from .synth import channel_alphas, channel_lcu

# the evaluation grid: (flatten, order) per named setting
SETTINGS = (
    ("basic+basic", False, False),
    ("flat+basic", True, False),
    ("basic+order", False, True),
    ("flat+order", True, True),
)

VERIFY_SEED = 7


class CliError(Exception):
    """Input or pipeline failure that maps to a nonzero exit code."""


def _fail(msg: str) -> "CliError":
    return CliError(msg)


def load_input(path: str):
    """Read a LindbladSpec or ChannelExpr JSON file, sniffing the kind."""
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise _fail(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise _fail(f"{path} is not valid JSON: {exc}") from exc
    try:
        if "kraus" in data:
            return channel_from_json(data)
        if "H" in data:
            return lindblad_from_json(data)
    except (TypecheckError, ValueError, KeyError) as exc:
        raise _fail(f"{path} failed to parse: {exc}") from exc
    raise _fail(f"{path}: expected a 'kraus' or 'H' key")


def _parse_frontend(text: str):
    """first | order:K,K',q | channel."""
    if text == "first":
        return ("first", None)
    if text == "channel":
        return ("channel", None)
    if text.startswith("order"):
        params = (1, 1, 1)
        if ":" in text:
            try:
                parts = [int(p) for p in text.split(":", 1)[1].split(",")]
            except ValueError as exc:
                raise _fail(f"bad frontend parameters in {text!r}") from exc
            if len(parts) > 3:
                raise _fail(f"frontend {text!r} takes at most K,K',q")
            params = tuple(parts) + params[len(parts):]
        try:
            return ("order", QuadratureSpec(*params))
        except ValueError as exc:
            raise _fail(f"bad quadrature orders: {exc}") from exc
    raise _fail(f"unknown frontend {text!r}")


def lower_input(obj, frontend: str, delta: float, cap=None) -> ChannelExpr:
    kind, quad = _parse_frontend(frontend)
    if isinstance(obj, ChannelExpr):
        if kind != "channel":
            raise _fail("input is already a channel; use --frontend channel")
        return obj
    if kind == "channel":
        raise _fail("--frontend channel needs a channel input, got a spec")
    if delta is None:
        raise _fail("lowering a Lindblad spec requires --delta")
    try:
        if kind == "first":
            return first_order(obj, delta)
        return higher_order(obj, delta, quad, cap)
    except (ValueError, TypecheckError) as exc:
        raise _fail(f"lowering failed: {exc}") from exc


def _select_audits(chan: ChannelExpr) -> list:
    """ModeTable/GTable JSON per Pauli-sum Kraus operator."""
    audits = []
    for idx, k in enumerate(chan.kraus):
        if not all(isinstance(p, PauliUnitary) for _, p in k.terms):
            audits.append({"kraus": idx, "opaque": True})
            continue
        terms = [(c, p.string) for c, p in k.terms]
        if len(terms) < 2:
            audits.append({"kraus": idx, "trivial": True})
            continue
        modes, gates, s, _ = optimize_pauli_select(terms)
        audits.append({
            "kraus": idx,
            "select_bits": s,
            "mode_table": mode_table_json(modes),
            "g_table": g_table_json(gates),
        })
    return audits


def compile_pipeline(obj, frontend: str, delta, flatten: bool, order: bool,
                     minimize_rank: bool, cap=None):
    """Shared by cmd_compile and the tests; returns (circuit, report dict)."""
    chan = lower_input(obj, frontend, delta, cap)
    try:
        typecheck(chan)
        chan = simplify(chan)
        trace = []
        if minimize_rank:
            chan, trace = minimize_kraus_rank(chan, cap)
        mode = "optimized" if order else "naive"
        circ = channel_lcu(chan, select_mode=mode, flatten=flatten)
        alphas = channel_alphas(chan, mode)
    except (RewriteError, TypecheckError, ValueError) as exc:
        raise _fail(f"compilation failed: {exc}") from exc
    alpha_sq = float(np.sum(np.square(alphas)))
    grid = {}
    for name, fl, om in SETTINGS:
        c = channel_lcu(chan, select_mode="optimized" if om else "naive",
                        flatten=fl)
        grid[name] = cost_report(c).to_json()
    report = {
        "n": chan.n,
        "frontend": frontend,
        "delta": delta,
        "options": {"flatten": flatten, "order": order,
                    "minimize_rank": minimize_rank},
        "setting": next(nm for nm, fl, om in SETTINGS
                        if (fl, om) == (flatten, order)),
        "kraus_count": len(chan.kraus),
        "alphas": [float(a) for a in alphas],
        "alpha_sq_sum": alpha_sq,
        "success_prob_tp": 1.0 / alpha_sq,
        "registers": {name: size for name, size in circ.registers},
        "rewrite_trace": trace_to_json(trace),
        "select_audits": _select_audits(chan) if order else [],
        "cost": cost_report(circ).to_json(),
        "cost_grid": grid,
    }
    return circ, report


def _dump(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def cmd_compile(args) -> int:
    obj = load_input(args.input)
    circ, report = compile_pipeline(
        obj, args.frontend, args.delta, args.flatten, args.order,
        args.minimize_rank, args.cap)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    circuit_doc = circuit_to_json(circ)
    circuit_doc["alpha_sq_sum"] = report["alpha_sq_sum"]
    (out / "circuit.json").write_text(_dump(circuit_doc))
    (out / "report.json").write_text(_dump(report))
    print(str(out / "report.json"))
    return 0


def _load_circuit(path: str):
    try:
        data = json.loads(Path(path).read_text())
        return circuit_from_json(data), data.get("alpha_sq_sum", 1.0)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise _fail(f"cannot load circuit {path}: {exc}") from exc


def verify_stats(circ, scale, reference, delta, samples, cap=None) -> dict:
    """Max trace distance of the rescaled circuit channel vs the reference."""
    if isinstance(reference, ChannelExpr):
        n = reference.n
        direct = lambda rho: apply_channel(reference, rho, cap)
        bound = None
    else:
        n = reference.n
        if delta is None:
            raise _fail("verifying against a spec requires --delta")
        sup = exact_propagator(reference, delta, cap)
        direct = lambda rho: propagate(sup, rho)
        bound = 5.0 * (delta * lindblad_opnorm(reference, cap)) ** 2
    if circ.reg_size("system") != n:
        raise _fail(f"circuit system has {circ.reg_size('system')} qubits, "
                    f"reference has {n}")
    worst = 0.0
    probs = []
    for rho in probe_states(n, samples, seed=VERIFY_SEED):
        out, prob = run_channel(circ, rho, cap=cap)
        worst = max(worst, trace_distance(scale * out, direct(rho)))
        probs.append(prob)
    stats = {
        "max_trace_distance": worst,
        "samples": len(probs),
        "success_prob": {"min": min(probs), "max": max(probs),
                         "mean": float(np.mean(probs))},
    }
    if bound is not None:
        stats["bound"] = bound
    return stats


def cmd_verify(args) -> int:
    circ, scale = _load_circuit(args.circuit)
    reference = load_input(args.reference)
    stats = verify_stats(circ, scale, reference, args.delta, args.samples,
                         args.cap)
    sys.stdout.write(_dump(stats))
    return 0


def cmd_cost(args) -> int:
    circ, _ = _load_circuit(args.circuit)
    sys.stdout.write(_dump(cost_report(circ).to_json()))
    return 0


def cmd_bench(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fam = args.family
    if fam == "decay":
        doc = lindblad_to_json(gen_decay(args.gamma, args.nbar))
        name = f"decay-gamma{args.gamma:g}-nbar{args.nbar:g}.json"
    elif fam == "tfim":
        doc = lindblad_to_json(gen_tfim(args.sites, args.gamma))
        name = f"tfim{args.sites}-gamma{args.gamma:g}.json"
    elif fam == "rndpauli":
        k = gen_random_pauli(args.sites, args.terms, args.seed)
        doc = channel_to_json(ChannelExpr(k.n, [k]))
        name = f"rndpauli-n{args.sites}-m{args.terms}-seed{args.seed}.json"
    elif fam == "hypercube":
        doc = channel_to_json(gen_hypercube_like(args.vertices, args.seed))
        name = f"hypcube{args.vertices}-seed{args.seed}.json"
    else:
        raise _fail(f"unknown family {fam!r}")
    path = out / name
    path.write_text(_dump(doc))
    print(str(path))
    return 0


def cmd_rewrite(args) -> int:
    obj = load_input(args.input)
    if not isinstance(obj, ChannelExpr):
        raise _fail("rewrite operates on channel JSON")
    try:
        if args.minimize_rank:
            chan, trace = minimize_kraus_rank(obj, args.cap)
        elif args.rule:
            rule_args = json.loads(args.rule_args) if args.rule_args else {}
            chan = apply_rule(obj, args.rule, rule_args, args.cap)
            trace = [{"rule": args.rule, "args": rule_args,
                      "kraus_count_after": len(chan.kraus)}]
        else:
            raise _fail("rewrite needs --rule or --minimize-rank")
    except RewriteError as exc:
        raise _fail(f"rewrite failed: {exc}") from exc
    doc = {"channel": channel_to_json(chan), "trace": trace_to_json(trace)}
    text = _dump(doc)
    if args.out:
        Path(args.out).write_text(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def sweep_rows(spec, deltas, orders, delta, cap=None, samples=8):
    """(parameter, error, bound) rows for the requested sweep."""
    lops = lindblad_opnorm(spec, cap)
    rows = []

    def worst(chan, d):
        sup = exact_propagator(spec, d, cap)
        e = 0.0
        for rho in probe_states(spec.n, samples, seed=VERIFY_SEED):
            e = max(e, trace_distance(apply_channel(chan, rho, cap),
                                      propagate(sup, rho)))
        return e

    if deltas is not None:
        for d in deltas:
            if d == 0:
                rows.append(("delta", 0.0, 0.0, 0.0))
                continue
            err = worst(first_order(spec, d), d)
            rows.append(("delta", d, err, 5.0 * (d * lops) ** 2))
    else:
        for k in orders:
            quad = QuadratureSpec(k, max(k, 2), 2)
            err = worst(higher_order(spec, delta, quad, cap), delta)
            rows.append(("order", k, err, 5.0 * (delta * lops) ** (k + 1)))
    return rows


def _parse_list(text, conv):
    try:
        return [conv(p) for p in text.split(",") if p != ""]
    except ValueError as exc:
        raise _fail(f"bad list {text!r}: {exc}") from exc


def cmd_error_sweep(args) -> int:
    spec = load_input(args.input)
    if isinstance(spec, ChannelExpr):
        raise _fail("error-sweep needs a Lindblad spec input")
    if (args.deltas is None) == (args.orders is None):
        raise _fail("give exactly one of --deltas or --orders")
    deltas = _parse_list(args.deltas, float) if args.deltas else None
    orders = _parse_list(args.orders, int) if args.orders else None
    if orders and args.delta is None:
        raise _fail("an order sweep requires --delta")
    rows = sweep_rows(spec, deltas, orders, args.delta, args.cap,
                      args.samples)
    lines = [f"{rows[0][0]},error,bound"]
    for _, p, err, bound in rows:
        lines.append(f"{p:.12g},{err:.12e},{bound:.12e}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qchanc",
        description="Channel-level quantum compiler pipeline.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--cap", type=int, default=None,
                       help="dense-matrix qubit cap (env QCHANC_CAP)")

    p = sub.add_parser("compile", help="lower, synthesize, and report")
    p.add_argument("input")
    p.add_argument("--frontend", default="first",
                   help="first | order[:K,K',q] | channel")
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--flatten", action="store_true")
    p.add_argument("--order", action="store_true",
                   help="use the optimized SELECT decomposition")
    p.add_argument("--minimize-rank", action="store_true")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("verify", help="circuit vs reference trace distance")
    p.add_argument("circuit")
    p.add_argument("--reference", required=True)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--samples", type=int, default=8)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("cost", help="cost report for a circuit")
    p.add_argument("circuit")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("bench", help="write a benchmark instance")
    p.add_argument("family", choices=["decay", "tfim", "rndpauli", "hypercube"])
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--nbar", type=float, default=1.0)
    p.add_argument("--sites", type=int, default=3)
    p.add_argument("--terms", type=int, default=8)
    p.add_argument("--vertices", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("rewrite", help="apply a rewrite rule or minimize rank")
    p.add_argument("input")
    p.add_argument("--rule", default=None)
    p.add_argument("--rule-args", default=None, help="JSON argument object")
    p.add_argument("--minimize-rank", action="store_true")
    p.add_argument("--out", default=None)
    common(p)
    p.set_defaults(func=cmd_rewrite)

    p = sub.add_parser("error-sweep", help="CSV of error vs delta or order")
    p.add_argument("input")
    p.add_argument("--frontend", default="first")
    p.add_argument("--deltas", default=None, help="comma-separated deltas")
    p.add_argument("--orders", default=None, help="comma-separated K values")
    p.add_argument("--delta", type=float, default=None,
                   help="fixed delta for an order sweep")
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--out", default=None)
    common(p)
    p.set_defaults(func=cmd_error_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
