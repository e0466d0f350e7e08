import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from lib.config import ProtocolConfig
from lib.experiment import run_experiment
from lib.lattice import LatticeWalker, PlayerMove
from lib.protocol import apply_move
from lib.qudit import QuditOps

logger = logging.getLogger(__name__)

ALGEBRA_DIMS = (2, 3, 4, 5, 6, 8, 12, 16, 64)
ALGEBRA_TOL = 1e-12
ENGINE_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self):
        return {'name': self.name, 'passed': self.passed, 'detail': self.detail}


def _close(u, v, tol=ALGEBRA_TOL):
    return bool(np.allclose(u.amplitudes, v.amplitudes, atol=tol, rtol=0))


def check_operator_algebra(d, rng) -> List[CheckResult]:
    """F^4 = I, F^2 = index negation, ZX = w XZ, F X F^-1 = Z, MUB overlaps."""
    results = []
    psi = QuditOps.random_state(d, rng)

    f4 = psi
    for _ in range(4):
        f4 = QuditOps.apply_f(f4)
    results.append(CheckResult(f"F^4=I d={d}", _close(f4, psi)))

    negation = all(
        _close(QuditOps.apply_f(QuditOps.apply_f(QuditOps.basis_state(d, k))),
               QuditOps.basis_state(d, (-k) % d))
        for k in range(d))
    results.append(CheckResult(f"F^2=negation d={d}", negation))

    zx = QuditOps.apply_z_pow(QuditOps.apply_x_pow(psi, 1), 1)
    xz = QuditOps.apply_x_pow(QuditOps.apply_z_pow(psi, 1), 1)
    omega = QuditOps.omega_power(d, 1)
    results.append(CheckResult(
        f"ZX=wXZ d={d}", bool(np.allclose(zx.amplitudes, omega * xz.amplitudes, atol=ALGEBRA_TOL, rtol=0))))

    conjugation = True
    for k in range(d):
        ket = QuditOps.basis_state(d, k)
        lhs = QuditOps.apply_f(QuditOps.apply_x_pow(QuditOps.apply_f_inverse(ket), 1))
        conjugation &= _close(lhs, QuditOps.apply_z_pow(ket, 1))
    results.append(CheckResult(f"FXF^-1=Z d={d}", bool(conjugation)))

    overlaps = np.abs(QuditOps.fourier_matrix(d)) ** 2
    results.append(CheckResult(f"MUB d={d}", bool(np.allclose(overlaps, 1.0 / d, atol=ALGEBRA_TOL, rtol=0))))
    return results


def vector_final_state(moves, d):
    state = QuditOps.basis_state(d, 0)
    for move in moves:
        state = apply_move(state, move)
    return state


def check_engine_equivalence(cases, rng, max_d=12, max_n=9) -> CheckResult:
    """realize(walk(moves)) agrees with the state-vector engine up to a global phase."""
    failures = 0
    for _ in range(cases):
        d = int(rng.integers(2, max_d + 1))
        n_players = int(rng.integers(2, max_n + 2))
        moves = [PlayerMove.random(d, rng) for _ in range(n_players)]
        symbolic = LatticeWalker.realize(LatticeWalker.walk(moves, d), d)
        if not QuditOps.equal_up_to_phase(vector_final_state(moves, d), symbolic, atol=ENGINE_TOL):
            failures += 1
            logger.debug("engine mismatch d=%d moves=%s", d, moves)
    return CheckResult("engine equivalence", failures == 0, f"{failures} mismatches in {cases} cases")


def check_honest_run(rounds, seed) -> List[CheckResult]:
    """Honest run: efficiency near 1/2, perfect correlation, zero-sum keys."""
    report = run_experiment(ProtocolConfig(d=3, n_players=6, rounds=rounds, seed=seed))
    totals = report.totals
    match = report.correlation['match_rate']
    return [
        CheckResult("efficiency 1/2", totals['efficiency_consistent'],
                    f"{totals['efficiency']['value']:.4f} over {totals['rounds']} rounds"),
        CheckResult("perfect correlation", match['count'] == match['samples'],
                    f"{match['count']}/{match['samples']}"),
        CheckResult("key zero-sum", report.keys['zero_sum_all_positions']),
    ]


def run_selftest(seed=0, engine_cases=10_000, honest_rounds=4000) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for d in ALGEBRA_DIMS:
        results.extend(check_operator_algebra(d, rng))
    results.append(check_engine_equivalence(engine_cases, rng))
    results.extend(check_honest_run(honest_rounds, seed))
    failed = [r.name for r in results if not r.passed]
    if failed:
        logger.warning("selftest failures: %s", ", ".join(failed))
    return results
