"""Command-line interface.

Exit status: 0 success, 1 model or input error, 2 resource cap or suspected
divergence, 3 numerical non-convergence.
"""
import argparse
import sys

from .analysis import export, sample_states, simulate, stationary, transient
from .ctmc import build_ctmc, explore
from .errors import (
    DivergenceSuspected, ModelError, NotConverged, StateLimitExceeded, StochPiError,
)
from .measures import IMMEDIATE, INPUT, MARKOV, channel_measure
from .parser import load, parse_term
from .semantics import PASSIVE_MSG, transition_bundle
from .syntax import fmt_q

EXIT_OK, EXIT_MODEL, EXIT_RESOURCE, EXIT_NUMERIC = 0, 1, 2, 3


class Emitter:
    """Writes ``key=value`` records (kv) or ``key: value`` lines (text)."""

    def __init__(self, fmt, stream):
        self.fmt = fmt
        self.stream = stream

    def __call__(self, key, value):
        sep = "=" if self.fmt == "kv" else ": "
        print(f"{key}{sep}{value}", file=self.stream)


def _load_model(path, need_system=True):
    env, init = load(path)
    if need_system and init is None:
        raise ModelError("model has no system term")
    return env, init


def _pad_lines(emit, prefix, entry):
    rate, pad = entry
    emit(f"{prefix}.rate", fmt_q(rate))
    for k, ((label, proc), q) in enumerate(pad.sorted_items()):
        emit(f"{prefix}.{k}", f"{fmt_q(q)} {label} -> {proc}")


def cmd_check(args, emit):
    env, init = _load_model(args.file, need_system=False)
    emit("status", "ok")
    emit("definitions", len(env))
    emit("system", "yes" if init is not None else "no")
    return EXIT_OK


def cmd_inspect(args, emit):
    env, init = _load_model(args.file)
    for kind, name in ((INPUT, "gamma"), (MARKOV, "mu"), (IMMEDIATE, "mu_inf")):
        m = channel_measure(init, kind, env)
        for chan, value in m.items():
            emit(f"{name}.{chan}", fmt_q(value))
        emit(f"{name}.total", fmt_q(m.total))
        if m.hidden:
            emit(f"{name}.restricted", fmt_q(m.hidden))
    return EXIT_OK


def cmd_step(args, emit):
    env, init = _load_model(args.file, need_system=args.state is None)
    proc = parse_term(args.state, env) if args.state is not None else init
    b = transition_bundle(proc, env)
    emit("state", b.process)
    if b.markov is not None:
        _pad_lines(emit, "markov", b.markov)
    else:
        emit("markov", "none")
    if b.immediate is not None:
        _pad_lines(emit, "immediate", b.immediate)
    else:
        emit("immediate", "none")
    for chan in sorted(b.passive, key=str):
        for k, (proc, q) in enumerate(b.passive[chan].sorted_items()):
            emit(f"passive.{chan}.{k}", f"{fmt_q(q)} -> {proc}")
    emit("passive.message", PASSIVE_MSG)
    return EXIT_OK


def _extract(args):
    env, init = _load_model(args.file)
    space = explore(init, env, state_cap=args.state_cap,
                    follow_preempted=not args.skip_preempted)
    return env, init, space, build_ctmc(space)


def cmd_ctmc(args, emit):
    _, _, space, c = _extract(args)
    summary = emit
    if args.out is not None:
        fmt = args.export_format or ("dot" if args.out.endswith(".dot") else "tra")
        text = export(c, fmt)
        if args.out == "-":
            sys.stdout.write(text)
            summary = Emitter(emit.fmt, sys.stderr)
        else:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
    summary("states", c.n)
    summary("transitions", c.num_transitions)
    summary("explored", len(space))
    summary("immediate_states", len(space.ip))
    summary("stuck", "yes" if c.has_stuck else "no")
    return EXIT_OK


def cmd_steady(args, emit):
    _, _, _, c = _extract(args)
    res = stationary(c, exact_limit=args.exact_limit)
    emit("method", res.method)
    emit("residual", f"{res.residual:.3e}")
    for i, (s, p) in enumerate(zip(c.states, res.distribution)):
        value = fmt_q(p) if res.method == "exact" else repr(float(p))
        emit(f"pi.{i}", f"{value} {s}")
    return EXIT_OK


def cmd_transient(args, emit):
    _, _, _, c = _extract(args)
    dist = transient(c, args.t)
    emit("t", args.t)
    for i, (s, p) in enumerate(zip(c.states, dist)):
        emit(f"p.{i}", f"{p:.12g} {s}")
    return EXIT_OK


def cmd_simulate(args, emit):
    env, init = _load_model(args.file)
    if args.runs == 1:
        traj = simulate((env, init), args.horizon, args.seed)
        emit("seed", args.seed)
        for k, (s, t, label) in enumerate(traj):
            emit(f"visit.{k}", f"{t:.12g} {label if label is not None else '-'} {s}")
        return EXIT_OK
    counts = sample_states((env, init), args.horizon, args.seed, args.runs)
    emit("seed", args.seed)
    emit("runs", args.runs)
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0].key))
    for k, (s, n) in enumerate(ordered):
        emit(f"final.{k}", f"{n} {n / args.runs:.6f} {s}")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check, "inspect": cmd_inspect, "step": cmd_step, "ctmc": cmd_ctmc,
    "steady": cmd_steady, "transient": cmd_transient, "simulate": cmd_simulate,
}


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _nonneg_float(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be nonnegative")
    return value


def build_parser():
    p = argparse.ArgumentParser(prog="stochpi", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="model file (.spi)")
    common.add_argument("--format", choices=("text", "kv"), default="text",
                        help="output style (default: text)")
    explore_opts = argparse.ArgumentParser(add_help=False)
    explore_opts.add_argument("--state-cap", type=_positive_int, default=None,
                              help="maximum number of explored states "
                                   "(default: $STOCHPI_STATE_CAP or 1000000)")
    explore_opts.add_argument("--skip-preempted", action="store_true",
                              help="do not explore Markovian moves of immediate states")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="parse and validate a model")
    sub.add_parser("inspect", parents=[common], help="per-channel weights and rates")
    s = sub.add_parser("step", parents=[common], help="one-step transitions")
    s.add_argument("--state", help="term to step instead of the system term")
    s = sub.add_parser("ctmc", parents=[common, explore_opts], help="extract and export the CTMC")
    s.add_argument("--out", help="output file (.tra or .dot) or - for stdout")
    s.add_argument("--export-format", choices=("tra", "dot"))
    s = sub.add_parser("steady", parents=[common, explore_opts], help="stationary distribution")
    s.add_argument("--exact-limit", type=int, default=2000,
                   help="largest chain solved in exact arithmetic")
    s = sub.add_parser("transient", parents=[common, explore_opts],
                       help="distribution at time t")
    s.add_argument("--t", type=_nonneg_float, required=True)
    s = sub.add_parser("simulate", parents=[common], help="simulate the model")
    s.add_argument("--horizon", type=_nonneg_float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--runs", type=_positive_int, default=1)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    emit = Emitter(args.format, sys.stdout)
    where = f"stochpi {args.command}: {args.file}"
    try:
        return COMMANDS[args.command](args, emit)
    except (ModelError, OSError) as exc:
        detail = exc.strerror if isinstance(exc, OSError) and exc.strerror else exc
        print(f"{where}: {detail}", file=sys.stderr)
        return EXIT_MODEL
    except (StateLimitExceeded, DivergenceSuspected) as exc:
        print(f"{where}: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except NotConverged as exc:
        print(f"{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except StochPiError as exc:
        print(f"{where}: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
