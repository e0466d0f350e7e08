import numpy as np

from lib.config import ProtocolConfig
from lib.lattice import LatticeWalker, PlayerMove
from lib.protocol import apply_move, assemble_keys, run_round
from lib.qudit import Basis, QuditOps


def verify():
    d = 7
    rng = np.random.default_rng(5)

    # six players, two valid rounds: F at players 2 and 5, then at 1 and 4
    rounds = [
        ("Round 1: F at (2, 5)", (0, 0, 1, 0, 0, 1)),
        ("Round 2: F at (1, 4)", (0, 1, 0, 0, 1, 0)),
    ]

    records = []
    for round_id, (title, c_list) in enumerate(rounds):
        moves = tuple(PlayerMove(int(rng.integers(0, d)), int(rng.integers(0, d)), c) for c in c_list)
        ledger = LatticeWalker.build_ledger(c_list, d)
        predicted = LatticeWalker.predict_outcome(moves, d)

        state = QuditOps.basis_state(d, 0)
        for move in moves:
            state = apply_move(state, move)
        measured = QuditOps.measure_subsystem(state, 0, Basis.COMPUTATIONAL, rng).value

        print(f"--- {title} (d={d}) ---")
        print(f"{'Player':<8} | {'a':>2} {'b':>2} {'c':>2} | {'Row':>3} | {'Term':<6} | {'Value'}")
        print("-" * 48)
        for i, (move, point, entry) in enumerate(zip(moves, LatticeWalker.path(moves, d), ledger.entries)):
            term = f"{'+' if entry.sign > 0 else '-'}{entry.source.value}_{i}"
            print(f"R_{i:<6} | {move.a:>2} {move.b:>2} {move.c:>2} | {point.row:>3} | {term:<6} | {entry.value(move, d)}")
        print("-" * 48)
        print(f"Ledger sum: {ledger.signed_sum(moves, d)}   Predicted: {predicted}   Measured by R_5: {measured}")
        print(f"Sources: {''.join(e.source.value.upper() for e in ledger.entries)}   Global sign: {ledger.global_sign:+d}")
        print()

        config = ProtocolConfig(d=d, n_players=6, rounds=1, forced_moves=moves)
        records.append(run_round(config, round_id))

    keys = assemble_keys(records, d)
    print(f"{'Key':<6} | {'Round 1':>7} | {'Round 2':>7}")
    print("-" * 28)
    for key in keys:
        print(f"K_{key.owner:<4} | {key.symbols[0]:>7} | {key.symbols[1]:>7}")
    print("-" * 28)
    sums = [sum(col) % d for col in zip(*(k.symbols for k in keys))]
    print(f"Column sums mod {d}: {sums}")


if __name__ == "__main__":
    verify()
