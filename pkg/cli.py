import argparse
import json
import logging
import sys
from dataclasses import replace

from lib.adversary import AttackKind, BasisPolicy
from lib.config import ProtocolConfig, load_config, with_overrides
from lib.errors import AcceptanceError, ConfigError, QSSError, exit_code_for
from lib.experiment import ExperimentRunner, attack_sweep, trace_round, write_round_csv
from lib.selftest import run_selftest

logger = logging.getLogger("qss")


class CommandLineParser(argparse.ArgumentParser):
    """Usage errors raise ConfigError instead of exiting."""

    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def build_parser():
    common = CommandLineParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; flags override its values")
    common.add_argument("--d", type=int, help="qudit dimension")
    common.add_argument("--players", type=int, help="number of players N+1")
    common.add_argument("--rounds", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--attack", choices=[k.value for k in AttackKind])
    common.add_argument("--links", type=int, nargs="+", help="attacked links (intercept_resend)")
    common.add_argument("--coalition", type=int, nargs="+", help="coalition players (cnot_ancilla)")
    common.add_argument("--basis-policy", choices=[p.value for p in BasisPolicy])
    common.add_argument("--check-fraction", type=float)
    common.add_argument("--workers", type=int)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = CommandLineParser(
        description="Sequential single-qudit quantum secret sharing: simulator and experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="full Monte Carlo experiment")
    run.add_argument("--per-round-csv", help="also write one CSV row per round")

    rnd = sub.add_parser("round", parents=[common], help="trace one round on the lattice of states")
    rnd.add_argument("--round-id", type=int, default=0)

    atk = sub.add_parser("attack", parents=[common], help="preset attack sweep over d")
    atk.add_argument("--dims", type=int, nargs="+", default=[2, 4, 8])

    st = sub.add_parser("selftest", parents=[common], help="operator algebra and engine-equivalence suites")
    st.add_argument("--cases", type=int, default=10_000, help="randomized engine-equivalence cases")
    return parser


def resolve_config(args) -> ProtocolConfig:
    config = load_config(args.config) if args.config else ProtocolConfig()
    attack = config.attack
    attack_changes = {}
    if args.attack is not None:
        attack_changes['kind'] = args.attack
    if args.links is not None:
        attack_changes['links'] = frozenset(args.links)
    if args.coalition is not None:
        attack_changes['coalition'] = frozenset(args.coalition)
    if args.basis_policy is not None:
        attack_changes['basis_policy'] = args.basis_policy
    if attack_changes:
        attack = replace(attack, **attack_changes).with_default_targets()
    config = with_overrides(
        config,
        d=args.d,
        n_players=args.players,
        rounds=args.rounds,
        seed=args.seed,
        check_fraction=args.check_fraction,
        workers=args.workers,
        attack=attack,
    )
    return config.validate()


def emit(text, path):
    if path:
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text + "\n")
        logger.info("wrote %s", path)
    else:
        print(text)


def cmd_run(args):
    runner = ExperimentRunner(resolve_config(args))
    report = runner.run()
    emit(report.to_json(), args.out)
    if args.per_round_csv:
        write_round_csv(runner.records, args.per_round_csv)


def cmd_round(args):
    config = resolve_config(args)
    record, path, ledger = trace_round(config, args.round_id)

    print(f"--- Round {record.round_id} (d={config.d}, players={config.n_players}) ---")
    print(f"{'Player':<8} | {'a':>3} {'b':>3} {'c':>2} | {'Row':>3} {'Pos':>4} | {'Ledger'}")
    print("-" * 48)
    for i, (move, point) in enumerate(zip(record.moves, path)):
        entry = ""
        if ledger is not None:
            e = ledger.entries[i]
            entry = f"{'+' if e.sign > 0 else '-'}{e.source.value}_{i}"
        print(f"R_{i:<6} | {move.a:>3} {move.b:>3} {move.c:>2} | {point.row:>3} {point.pos:>4} | {entry}")
    print("-" * 48)
    print(f"Announced c (in order): {record.public_view()['announcements']}")
    print(f"Valid: {record.valid}   Measured m: {record.outcome}   Predicted: {record.predicted}")
    if record.attack is not None:
        print(f"Attack: {record.attack.kind.value} {record.attack.flags()}")


def cmd_attack(args):
    config = resolve_config(args)
    kind = args.attack or (config.attack.kind.value if config.attack.active else AttackKind.INTERCEPT_RESEND.value)
    reports = attack_sweep(config, kind, dims=args.dims, policy=args.basis_policy)
    emit(json.dumps([r.to_dict() for r in reports], indent=2), args.out)


def cmd_selftest(args):
    seed = args.seed if args.seed is not None else 0
    results = run_selftest(seed=seed, engine_cases=args.cases)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<28} {r.detail}")
    if args.out:
        emit(json.dumps([r.to_dict() for r in results], indent=2), args.out)
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise AcceptanceError(f"{len(failed)} selftest checks failed: {', '.join(failed)}")


COMMANDS = {
    'run': cmd_run,
    'round': cmd_round,
    'attack': cmd_attack,
    'selftest': cmd_selftest,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except ConfigError as exc:
        logger.error("%s", exc)
        return exit_code_for(exc)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except QSSError as exc:
        logger.error("%s", exc)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
