"""Command-line entry point: ``ahom <command> [options]``.

Commands ``hier``, ``classical``, ``parabolic`` and ``mc`` run one method at
one level (or over ``--n-range A:B``); ``sweep --method M`` does the same
with the method as a flag; ``chain-verify`` checks the resolvent-chain
identities on random finite chains.

Options may also come from ``--config FILE`` holding ``key = value`` lines
named like the long flags; command-line flags win.  Exit status is 0 on
success, 2 on a configuration error and 3 when a linear solve fails to
converge.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .cg import ConvergenceError
from .chain import (Schedule, discrete_sigma2, pgk_decomposition, random_nonreversible_spec,
                    random_reversible_spec, resolvent_identity_residual)
from .sweep import METHODS, SweepConfig, run_sweep, summarize, summary_path, write_rows, \
    write_summary

EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3


class ConfigError(ValueError):
    pass


def _int_range(text):
    a, sep, b = str(text).partition(":")
    try:
        lo, hi = int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A:B with integers, got {text!r}") from None
    if not sep or hi < lo:
        raise argparse.ArgumentTypeError(f"expected A:B with A <= B, got {text!r}")
    return list(range(lo, hi + 1))


def _floats(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") \
            from None


def _on_off(text):
    t = str(text).lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _common(p):
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--law", default="bernoulli:1,9")
    p.add_argument("--xi", type=_floats, default=None, help="unit vector, e.g. 0.6,0.8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--truth", type=float, default=None)
    p.add_argument("--rel-tol", type=float, default=1e-10)


def _method_flags(p, method):
    if method in ("hier", "classical", "sweep"):
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--n-range", type=_int_range, default=None)
    if method in ("hier", "sweep"):
        p.add_argument("--eps", type=float, default=0.0)
        p.add_argument("--nesting", choices=("layer", "nested"), default="layer")
    if method in ("classical", "sweep"):
        p.add_argument("--samples", type=int, default=None)
    if method in ("parabolic", "sweep"):
        p.add_argument("--L", type=int, default=None)
        p.add_argument("--L-range", type=_int_range, default=None)
        p.add_argument("--half-factor", type=_on_off, default=True)
    if method in ("mc", "sweep"):
        p.add_argument("--N", type=int, default=10000)
        p.add_argument("--t", type=_floats, default=None, help="horizon(s), comma-separated")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ahom", description="Estimate homogenized coefficients of random conductance models.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in METHODS + ("sweep",):
        p = sub.add_parser(name, help=f"run the {name} estimator" if name != "sweep"
                           else "sweep any method over a range of levels")
        if name == "sweep":
            p.add_argument("--method", choices=METHODS, required=False, default=None)
        _common(p)
        _method_flags(p, name)
    p = sub.add_parser("chain-verify", help="check resolvent-chain identities on random chains")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--states", type=int, default=20)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--schedule", choices=("constant", "geometric", "both"), default="both")
    p.add_argument("--out", default=None)
    return parser


def _read_config(path):
    out = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for no, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{no}: expected key = value")
        out[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return out


def parse_args(argv):
    """Parse ``argv`` with config-file defaults; raises ConfigError on bad input."""
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        values = _read_config(known.config)
        command = next((a for a in argv if not a.startswith("-")), None)
        sub = parser._subparsers._group_actions[0].choices.get(command)
        if sub is None:
            raise ConfigError("a command must precede --config")
        actions = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, raw in values.items():
            if key not in actions or key in ("config", "help"):
                raise ConfigError(f"unknown config key {key!r}")
            act = actions[key]
            try:
                defaults[key] = act.type(raw) if act.type else raw
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise ConfigError(f"config key {key!r}: {exc}") from None
            if act.choices is not None and defaults[key] not in act.choices:
                raise ConfigError(f"config key {key!r}: {raw!r} not in {list(act.choices)}")
        sub.set_defaults(**defaults)
    try:
        return parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            raise ConfigError("invalid command line") from None
        raise


def make_config(args):
    """Turn parsed arguments into a validated :class:`SweepConfig`."""
    method = args.method if args.command == "sweep" else args.command
    if method is None:
        raise ConfigError("sweep needs --method")
    if method in ("hier", "classical"):
        levels = args.n_range or ([args.n] if args.n is not None else None)
        if levels is None:
            raise ConfigError(f"{method} needs --n or --n-range")
    elif method == "parabolic":
        levels = getattr(args, "L_range", None) or ([args.L] if args.L is not None else None)
        if levels is None and getattr(args, "n_range", None):
            levels = args.n_range
        if levels is None:
            raise ConfigError("parabolic needs --L or --L-range")
    else:
        levels = args.t or ([args.n] if getattr(args, "n", None) else None)
        if levels is None:
            raise ConfigError("mc needs --t")
    xi = None if args.xi is None else tuple(args.xi)
    try:
        if xi is not None:
            from ._validation import check_unit_vector
            check_unit_vector(xi, args.d)
        return SweepConfig(
            method=method, levels=list(levels), d=args.d, law=args.law, xi=xi,
            seed=args.seed, reps=args.reps, truth=args.truth,
            eps=getattr(args, "eps", 0.0), nesting=getattr(args, "nesting", "layer"),
            half_factor=getattr(args, "half_factor", True), N=getattr(args, "N", 10000),
            rel_tol=args.rel_tol, samples=getattr(args, "samples", None),
            workers=max(1, args.workers))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def _chain_verify(args, out):
    rng = np.random.default_rng(args.seed)
    kinds = ("constant", "geometric") if args.schedule == "both" else (args.schedule,)
    worst_pgk = worst_res = worst_disc = 0.0
    count = 0
    out.write("trial,reversible,mode,schedule,n,identity_residual\n")
    for trial in range(args.trials):
        reversible = trial % 2 == 0
        mode = "continuous" if (trial // 2) % 2 == 0 else "discrete"
        make = random_reversible_spec if reversible else random_nonreversible_spec
        spec = make(args.states, rng, mode=mode)
        for kind in kinds:
            for n in (0, 3, 10):
                dec = pgk_decomposition(spec, Schedule(kind, n))
                err = abs(dec.partial_sum + dec.remainder - dec.exact) / (1 + abs(dec.exact))
                worst_pgk = max(worst_pgk, err)
                count += 1
                out.write(f"{trial},{int(reversible)},{mode},{kind},{n},{err!r}\n")
        lam, mu = rng.uniform(0.05, 1.0, size=2)
        worst_res = max(worst_res, resolvent_identity_residual(spec, lam, mu))
        if mode == "discrete":
            a, b, _ = discrete_sigma2(spec, 4000)
            worst_disc = max(worst_disc, abs(a - b))
    ok = worst_pgk <= 1e-10 and worst_res <= 1e-12 and worst_disc <= 1e-10
    sys.stderr.write(
        f"{count} decompositions: max relative identity residual {worst_pgk:.2e}; "
        f"resolvent formula {worst_res:.2e}; discrete formulas {worst_disc:.2e}: "
        f"{'ok' if ok else 'FAILED'}\n")
    return 0 if ok else 1


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
        if args.command == "chain-verify":
            if args.out:
                with open(args.out, "w", encoding="utf-8") as fh:
                    return _chain_verify(args, fh)
            return _chain_verify(args, sys.stdout)
        cfg = make_config(args)
    except ConfigError as exc:
        sys.stderr.write(f"ahom: configuration error: {exc}\n")
        return EXIT_CONFIG
    try:
        results = run_sweep(cfg)
    except ConvergenceError as exc:
        sys.stderr.write(f"ahom: solver did not converge: {exc}\n")
        return EXIT_NONCONVERGENCE
    summary = summarize(cfg, results)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_rows(cfg, results, fh)
        with open(summary_path(args.out), "w", encoding="utf-8", newline="") as fh:
            write_summary(cfg, summary, fh)
    else:
        write_rows(cfg, results, sys.stdout)
    for kind, fit in (("error", summary.error_fit), ("work", summary.work_fit)):
        if fit is not None:
            sys.stderr.write(f"{kind} slope {fit[0]:.3f} +/- {fit[2]:.3f}, "
                             f"intercept {fit[1]:.3f}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
