"""Command-line front end.

Subcommands: ``simulate``, ``bound``, ``curve``, ``verify`` and ``mc-code``.
Every command writes CSV (stdout unless ``--output`` is given). ``--config``
loads a flat JSON object whose keys are the long flag names without dashes
(``"eps-sec": 0.02``); flags on the command line win.

Exit status: 0 on success, 2 on invalid input, 3 when a verification fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Iterable, Sequence

import numpy as np

from .coding import CSV_HEADER as MC_HEADER
from .coding import LinearCode, mc_decoding_failure_rate, mc_low_weight_coset_word, verify_decoder_equivalence
from .gf2_linalg import BitString
from .protocol_engine import SUMMARY_HEADER, ChannelModel, Mode, keyrate_experiment
from .quantum_oracle import REPORT_HEADER, composable_campaign, info_disturbance_campaign
from .sampling_bounds import ProtocolParams, Variant, h2, info_z_curve, security_bound

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_VERIFY_FAILED = 3

BOUND_HEADER = (
    "variant", "N", "n", "r", "m", "n_z", "n_x", "t_z", "t_x", "p", "p_a", "p_az", "p_ax",
    "eps_sec", "eps_rel", "reliability", "secrecy", "total", "key_rate", "reliability_terms", "secrecy_terms",
)
CURVE_HEADER = ("p_az", "p_ax", "h2_sum")
CODING_HEADER = ("case_id", "n", "k", "holds")
STOCHASTIC = {"simulate", "verify", "mc-code"}


class ValidationError(ValueError):
    pass


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def write_csv(header: Sequence[str], rows: Iterable[Sequence], out) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


# -- parser -------------------------------------------------------------------------------


def _add_protocol_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("protocol parameters")
    g.add_argument("--variant", type=Variant.parse, default=Variant.BB84,
                   help="bb84, bb84-info-z, efficient or modified-efficient")
    g.add_argument("--n", type=int, help="number of INFO bits")
    g.add_argument("--r", type=int, help="syndrome length")
    g.add_argument("--m", type=int, help="final key length")
    g.add_argument("--r-frac", type=float, help="r/n, used when --r is absent")
    g.add_argument("--m-frac", type=float, help="m/n, used when --m is absent")
    g.add_argument("--n-z", type=int, help="z-basis TEST bits")
    g.add_argument("--n-x", type=int, help="x-basis TEST bits")
    g.add_argument("--t-z", type=int, help="z-basis INFO bits (modified-efficient)")
    g.add_argument("--t-x", type=int, help="x-basis INFO bits (modified-efficient)")
    g.add_argument("--p", type=float, default=0.5, help="z-basis probability (efficient)")
    g.add_argument("--pa", type=float, help="allowed TEST error rate")
    g.add_argument("--paz", type=float, help="allowed z error rate (bb84-info-z)")
    g.add_argument("--pax", type=float, help="allowed x error rate (bb84-info-z)")
    g.add_argument("--eps-sec", type=float, default=0.0)
    g.add_argument("--eps-rel", type=float, default=0.0)
    g.add_argument("--nudge-eps", action="store_true",
                   help="raise eps-sec and eps-rel until n(threshold + eps) is an integer")
    g.add_argument("--fractional", action="store_true",
                   help="accept a non-integral n(threshold + eps)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbb84", description="Finite-key BB84 variants: bounds, simulation, verification.")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of flag values")
        p.add_argument("--output", help="CSV destination (default stdout)")
        return p

    p = command("simulate", "run the protocol end to end over a classical flip channel")
    _add_protocol_flags(p)
    p.add_argument("--flip", type=float, default=0.0, help="flip probability in both bases")
    p.add_argument("--flip-z", type=float)
    p.add_argument("--flip-x", type=float)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--mode", type=Mode.parse, default=Mode.REAL, help="real or inverted-info-basis")
    p.add_argument("--seed", type=int)

    p = command("bound", "evaluate the variant's security bound")
    _add_protocol_flags(p)

    p = command("curve", "trace the asymptotic secure-rate boundary of bb84-info-z")
    p.add_argument("--variant", type=Variant.parse, default=Variant.BB84_INFO_Z)
    p.add_argument("--steps", type=int, default=101)

    p = command("verify", "randomized verification campaigns")
    p.add_argument("--suite", choices=("quantum", "composable", "coding"), default="quantum")
    p.add_argument("--cases", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--qubits", type=int, help="N for the quantum suites")
    p.add_argument("--info-bits", type=int, help="n for the quantum suites")
    p.add_argument("--probe-dim", type=int, help="probe dimension (default 2^N)")
    p.add_argument("--max-n", type=int, default=10, help="largest code length for the coding suite")
    p.add_argument("--max-k", type=int, default=5, help="largest code dimension for the coding suite")

    p = command("mc-code", "Monte Carlo estimates over random linear codes")
    p.add_argument("--estimator", choices=("failure", "coset"), default="failure")
    p.add_argument("--n", type=int, required=False)
    p.add_argument("--k", type=int)
    p.add_argument("--t", type=int)
    p.add_argument("--ell", help="coset representative for --estimator coset (default 0...0)")
    p.add_argument("--weight-mode", choices=("exact", "ball"), default="exact")
    p.add_argument("--trials", type=int, default=100000)
    p.add_argument("--seed", type=int)
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv: Sequence[str] | None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    first = parser.parse_args(argv)
    if first.config:
        sub = _subparser(parser, first.command)
        try:
            with open(first.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read config {first.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ValidationError("config must be a JSON object")
        actions = {a.option_strings[0][2:]: a for a in sub._actions if a.option_strings and a.option_strings[0].startswith("--")}
        defaults = {}
        for key, value in cfg.items():
            if key not in actions or key in ("config", "help"):
                raise ValidationError(f"unknown config key {key!r} for {first.command}")
            action = actions[key]
            if action.type is not None and value is not None:
                try:
                    value = action.type(value if not isinstance(value, bool) else str(value))
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"bad value for {key}: {value!r}") from exc
            if action.choices is not None and value not in action.choices:
                raise ValidationError(f"{key} must be one of {sorted(action.choices)}")
            defaults[action.dest] = value
        sub.set_defaults(**defaults)
        first = parser.parse_args(argv)
    if first.command in STOCHASTIC and first.seed is None:
        raise ValidationError(f"--seed is required for {first.command}")
    return first


# -- commands ------------------------------------------------------------------------------


def _need(args, *names: str) -> None:
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise ValidationError("missing " + ", ".join("--" + n.replace("_", "-") for n in missing))


def params_from_args(args) -> ProtocolParams:
    _need(args, "n")
    v = args.variant
    n = args.n
    r = args.r if args.r is not None else (None if args.r_frac is None else int(round(args.r_frac * n)))
    m = args.m if args.m is not None else (None if args.m_frac is None else int(round(args.m_frac * n)))
    if r is None or m is None:
        raise ValidationError("give --r or --r-frac, and --m or --m-frac")
    kw = dict(check_integrality=not (args.fractional or args.nudge_eps))
    common = dict(r=r, m=m, eps_sec=args.eps_sec, eps_rel=args.eps_rel, **kw)
    if v is Variant.BB84:
        _need(args, "pa")
        params = ProtocolParams.bb84(n, p_a=args.pa, **common)
    elif v is Variant.BB84_INFO_Z:
        _need(args, "n_z", "n_x", "paz", "pax")
        params = ProtocolParams.bb84_info_z(n, args.n_z, args.n_x, p_az=args.paz, p_ax=args.pax, **common)
    elif v is Variant.EFFICIENT:
        _need(args, "n_z", "n_x", "pa")
        params = ProtocolParams.efficient(n, args.n_z, args.n_x, args.p, p_a=args.pa, **common)
    else:
        _need(args, "t_z", "t_x", "n_z", "n_x", "pa")
        if args.t_z + args.t_x != n:
            raise ValidationError("--t-z + --t-x must equal --n")
        params = ProtocolParams.modified_efficient(args.t_z, args.t_x, args.n_z, args.n_x, p_a=args.pa, **common)
    if args.nudge_eps:
        params = params.nudged().with_(check_integrality=not args.fractional)
    return params


def bound_row(params: ProtocolParams) -> list:
    b = security_bound(params)
    terms = lambda items: ";".join(f"{lbl}={format_value(val)}" for lbl, val in items)
    P = params
    return [P.variant.value, P.N, P.n, P.r, P.m, P.n_z, P.n_x, P.t_z, P.t_x, P.p, P.p_a, P.p_az, P.p_ax,
            P.eps_sec, P.eps_rel, b.reliability, b.secrecy, b.total, b.key_rate,
            terms(b.reliability_terms), terms(b.secrecy_terms_under_radical)]


def cmd_bound(args, out) -> int:
    write_csv(BOUND_HEADER, [bound_row(params_from_args(args))], out)
    return EXIT_OK


def cmd_curve(args, out) -> int:
    if args.variant is not Variant.BB84_INFO_Z:
        raise ValidationError("curve is defined for bb84-info-z only")
    if args.steps < 2:
        raise ValidationError("--steps must be at least 2")
    rows = [(a, x, h2(a) + h2(x)) for a, x in info_z_curve(args.steps)]
    write_csv(CURVE_HEADER, rows, out)
    return EXIT_OK


def cmd_simulate(args, out) -> int:
    params = params_from_args(args)
    if args.runs < 1:
        raise ValidationError("--runs must be positive")
    fz = args.flip if args.flip_z is None else args.flip_z
    fx = args.flip if args.flip_x is None else args.flip_x
    channel = ChannelModel.noiseless() if fz == fx == 0 else ChannelModel.independent_flip(fz, fx)
    rng = np.random.default_rng(args.seed)
    summary = keyrate_experiment(params, channel, args.runs, rng, args.mode)
    write_csv(SUMMARY_HEADER, [summary.csv_row()], out)
    return EXIT_OK


def cmd_verify(args, out) -> int:
    if args.cases < 1:
        raise ValidationError("--cases must be positive")
    rng = np.random.default_rng(args.seed)
    rows = []
    if args.suite == "quantum":
        N = 3 if args.qubits is None else args.qubits
        n = 2 if args.info_bits is None else args.info_bits
        if not 1 <= n <= min(N, 3):
            raise ValidationError("need 1 <= info-bits <= min(qubits, 3)")
        rows = [rep.csv_row() for rep in info_disturbance_campaign(args.cases, rng, N, n, args.probe_dim)]
        header = REPORT_HEADER
    elif args.suite == "composable":
        N = 2 if args.qubits is None else args.qubits
        n = 1 if args.info_bits is None else args.info_bits
        if N != 2 * n:
            raise ValidationError("the composable suite runs bb84, so qubits must equal 2 * info-bits")
        params = ProtocolParams.bb84(n, 0, 1, 0.25, 0.25, 0.25, check_integrality=False)
        rows = [rep.csv_row() for rep, _ in composable_campaign(args.cases, rng, params, args.probe_dim)]
        header = REPORT_HEADER
    else:
        header = CODING_HEADER
        case_id = 0
        while case_id < args.cases:
            n = int(rng.integers(1, args.max_n + 1))
            k = int(rng.integers(0, min(n, args.max_k) + 1))
            ok = verify_decoder_equivalence(LinearCode.random(n, k, rng), rng=rng)
            rows.append([case_id, n, k, ok])
            case_id += 1
    write_csv(header, rows, out)
    return EXIT_OK if all(row[-1] in (True, "true") for row in rows) else EXIT_VERIFY_FAILED


def cmd_mc_code(args, out) -> int:
    _need(args, "n", "k", "t")
    rng = np.random.default_rng(args.seed)
    if args.estimator == "failure":
        est = mc_decoding_failure_rate(args.n, args.k, args.t, args.trials, rng, weight_mode=args.weight_mode)
    else:
        ell = BitString.zeros(args.n) if args.ell is None else BitString(args.ell)
        if len(ell) != args.n:
            raise ValidationError("--ell must have length n")
        est = mc_low_weight_coset_word(ell, args.n, args.k, args.t, args.trials, rng)
    write_csv(MC_HEADER, [est.csv_row()], out)
    return EXIT_OK if est.ci_low <= est.bound else EXIT_VERIFY_FAILED


COMMANDS = {
    "simulate": cmd_simulate,
    "bound": cmd_bound,
    "curve": cmd_curve,
    "verify": cmd_verify,
    "mc-code": cmd_mc_code,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    buf = io.StringIO()
    start = time.perf_counter()
    try:
        status = COMMANDS[args.command](args, buf)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    text = buf.getvalue()
    if args.output:
        try:
            with open(args.output, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write {args.output}: {exc}", file=sys.stderr)
            return EXIT_INVALID
    else:
        sys.stdout.write(text)
    print(f"{args.command}: {time.perf_counter() - start:.2f}s", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
