"""Command line entry point: ``simulate``, ``sweep`` and ``selftest``.

Exit codes: 0 success, 1 configuration error, 2 a simulation contract was
violated (or a self-test failed).
"""

from __future__ import annotations

import argparse
import json
import sys

from .sim import (
    ConfigInvalid,
    ContractViolation,
    IoFailure,
    SimConfig,
    emit_csv,
    run_experiment,
    run_trial,
    sweep_configs,
)

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bridgedist", description="Bridge distribution simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one configuration")
    sim.add_argument("--mode", default="basic", choices=["basic", "leader", "decentralized"])
    sim.add_argument("--n", type=int, required=True)
    sim.add_argument("--t", type=int, default=0)
    sim.add_argument("--m", type=int, default=None, help="distributors (default 1 basic, 4 otherwise)")
    sim.add_argument("--strategy", default="prudent", help="prudent | aggressive | stochastic[:q]")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--trials", type=int, default=1)
    sim.add_argument("--max-rounds", type=int, default=None)
    sim.add_argument("--out", default=None, help="CSV path (default: stdout)")

    sw = sub.add_parser("sweep", help="run a JSON sweep config")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", default=None)

    sub.add_parser("selftest", help="run quick invariant checks")
    return ap


def _simulate(args) -> int:
    m = args.m if args.m is not None else (1 if args.mode == "basic" else 4)
    cfg = SimConfig(n=args.n, t=args.t, m=m, mode=args.mode, strategy=args.strategy,
                    seed=args.seed, trials=args.trials, max_rounds=args.max_rounds)
    if cfg.trials == 1:
        series = run_trial(cfg)
        _emit(series, args.out)
        print(f"latency={series.latency_rounds} used={series.bridges_used} "
              f"thirsty={series.thirsty_final} success={series.success}", file=sys.stderr)
    else:
        table = run_experiment([cfg])
        _emit(table, args.out)
        row = table[0]
        print(f"successes={row['successes']}/{row['trials']} latency_max={row['round_max']} "
              f"used_max={row['used_max']}", file=sys.stderr)
    return EXIT_OK


def _emit(data, out):
    if out is None:
        emit_csv(data, sys.stdout)
    else:
        emit_csv(data, out)


def _sweep(args) -> int:
    try:
        with open(args.config) as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigInvalid(f"cannot read sweep config: {exc}") from None
    table = run_experiment(sweep_configs(spec))
    _emit(table, args.out)
    return EXIT_OK


def selftest() -> list[tuple[str, bool]]:
    """Small, fast versions of the invariant suites."""
    import random

    from .distributors import byzantine_agree, drg_run, make_distributors
    from .field import berlekamp_welch_decode, poly_eval
    from .sharing import SharingPolicy, reconstruct, share

    results = []
    r0 = run_trial(SimConfig(n=128, t=0))
    results.append(("t=0 finishes in one round", r0.latency_rounds == 1 and r0.success))
    again = run_trial(SimConfig(n=128, t=0))
    results.append(("runs are deterministic", again.records == r0.records))

    rng = random.Random(1)
    pol = SharingPolicy(10)
    shares = share(123456789, pol, rng)
    bad = [s if s.index > 3 else type(s)(s.index, s.value + 1, s.secret_id) for s in shares]
    results.append(("reconstruct with 3 bad shares", reconstruct(bad, pol) == 123456789))

    pts = [(x, poly_eval([3, 1, 4], x, 31)) for x in range(1, 8)]
    pts[0] = (1, (pts[0][1] + 5) % 31)
    results.append(("Berlekamp-Welch corrects an error",
                    berlekamp_welch_decode(pts, 2, 2, 31).coeffs == (3, 1, 4)))

    out = byzantine_agree({1: 7, 2: 7, 3: 7}, 1, {4: "conflicting"}, rng)
    results.append(("agreement keeps a unanimous value", set(out.values()) == {7}))

    nodes = make_distributors(4, {4: "biased"}, seed=2)
    results.append(("DRG completes with a biased node", 0 <= drg_run(nodes, 17) < 17))

    for mode in ("leader", "decentralized"):
        r = run_trial(SimConfig(n=64, t=8, m=4, mode=mode, corrupt_distributors=1))
        ok = all(x.msgs_user == x.msgs_user_min == 4 for x in r.records) and r.success
        results.append((f"{mode}: users get m messages and connect", ok))
    return results


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args)
        if args.command == "sweep":
            return _sweep(args)
        results = selftest()
        for name, ok in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        return EXIT_OK if all(ok for _, ok in results) else EXIT_CONTRACT
    except (ConfigInvalid, IoFailure) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractViolation as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT


if __name__ == "__main__":
    sys.exit(main())
