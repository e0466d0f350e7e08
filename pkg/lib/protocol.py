import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from lib.adversary import Adversary, AttackAnnotation
from lib.errors import InvalidRoundError
from lib.lattice import LatticeWalker, PlayerMove
from lib.qudit import Basis, JointState, Operator, QuditOps, QuditState

logger = logging.getLogger(__name__)

# spawn_key prefixes keep round substreams apart from the verification streams
ROUND_STREAM = 0
VERIFY_STREAM = 1
DETECTION_STREAM = 2


def round_rng(seed, round_id) -> np.random.Generator:
    """Counter-based substream for one round; independent of execution order."""
    seq = np.random.SeedSequence(int(seed), spawn_key=(ROUND_STREAM, int(round_id)))
    return np.random.Generator(np.random.Philox(seq))


def verify_rng(seed) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed), spawn_key=(VERIFY_STREAM,))
    return np.random.Generator(np.random.Philox(seq))


def detection_rng(seed) -> np.random.Generator:
    seq = np.random.SeedSequence(int(seed), spawn_key=(DETECTION_STREAM,))
    return np.random.Generator(np.random.Philox(seq))


@dataclass(frozen=True)
class RoundRecord:
    """
    Audit of one round. `moves` holds every player's secret (a, b, c);
    only the c's (in announcement order) are public, see public_view().
    """
    round_id: int
    moves: Tuple[PlayerMove, ...]
    announced_c: Tuple[int, ...]
    announcement_order: Tuple[int, ...]
    controller: int
    valid: bool
    outcome: int
    predicted: Optional[int]
    attack: Optional[AttackAnnotation] = None

    @property
    def match(self) -> bool:
        return self.valid and self.outcome == self.predicted

    @property
    def c_parity(self) -> int:
        return sum(self.announced_c) % 2

    def public_view(self):
        return {
            'round_id': self.round_id,
            'controller': self.controller,
            'announcements': [(p, self.announced_c[p]) for p in self.announcement_order],
            'valid': self.valid,
        }


@dataclass(frozen=True)
class KeyString:
    owner: int
    d: int
    symbols: Tuple[int, ...]

    def __len__(self):
        return len(self.symbols)


@dataclass(frozen=True)
class VerificationResult:
    error_rate: float
    errors: int
    checked: int
    detected: bool
    remaining_keys: Tuple[KeyString, ...]
    opened_round_ids: Tuple[int, ...]


@dataclass(frozen=True)
class SharingResult:
    ciphertext: Tuple[int, ...]
    recovered: Tuple[int, ...]

    def succeeded(self, message) -> bool:
        return tuple(message) == self.recovered


def _carried_index(state):
    return state.n_subsystems - 1 if isinstance(state, JointState) else 0


def apply_move(state, move: PlayerMove):
    """X^a Z^b F^c on the carried qudit: F first, then Z, then X."""
    ops = []
    if move.c:
        ops.append(Operator.f())
    ops.append(Operator.z(move.b))
    ops.append(Operator.x(move.a))
    for op in ops:
        if isinstance(state, QuditState):
            state = QuditOps.apply_operator(state, op)
        else:
            state = QuditOps.apply_on_subsystem(state, _carried_index(state), op)
    return state


def run_round(config, round_id, interceptors=None, rng=None) -> RoundRecord:
    """
    One pass of the qudit along R_0 ... R_N. interceptors[i] (or None) acts
    on link i, between player i and player i+1.
    """
    d, n = config.d, config.n_players
    if rng is None:
        rng = round_rng(config.seed, round_id)
    if interceptors is None:
        interceptors = Adversary.build_interceptors(config.attack, n)
    if len(interceptors) != n - 1:
        raise ValueError(f"need {n - 1} link interceptors, got {len(interceptors)}")

    # moves first, so honest and attacked runs with one seed share them
    if config.forced_moves is not None:
        moves = tuple(config.forced_moves)
    else:
        moves = tuple(PlayerMove.random(d, rng) for _ in range(n))

    state = QuditOps.basis_state(d, 0)
    for i, move in enumerate(moves):
        state = apply_move(state, move)
        if i < n - 1 and interceptors[i] is not None:
            state = interceptors[i].intercept(state, rng)

    outcome = QuditOps.measure_subsystem(state, _carried_index(state), Basis.COMPUTATIONAL, rng)

    # public phase: c's are announced only after R_N has measured
    announced_c = tuple(m.c for m in moves)
    order = tuple(int(p) for p in rng.permutation(n))
    valid = LatticeWalker.parity(announced_c) == 0
    annotation = Adversary.conclude(interceptors, outcome.post_state, announced_c, moves, d, rng)

    record = RoundRecord(
        round_id=int(round_id),
        moves=moves,
        announced_c=announced_c,
        announcement_order=order,
        controller=config.controller,
        valid=valid,
        outcome=outcome.value,
        predicted=LatticeWalker.predict_outcome(moves, d),
        attack=annotation,
    )
    logger.debug("round %d: c=%s valid=%s m=%d predicted=%s",
                 round_id, announced_c, valid, outcome.value, record.predicted)
    return record


def sift(records: Sequence[RoundRecord]):
    """Keep rounds with even sum of c's. Efficiency is None for no input."""
    valid = [r for r in records if r.valid]
    efficiency = len(valid) / len(records) if records else None
    return valid, efficiency


def assemble_keys(valid_records: Sequence[RoundRecord], d) -> List[KeyString]:
    """
    Player i's symbol per round is sign_i * (a_i or b_i) from the ledger; the
    last player's string also absorbs -m. Symbols sum to 0 mod d position-wise.
    """
    if not valid_records:
        return []
    n = len(valid_records[0].moves)
    columns = [[] for _ in range(n)]
    for record in valid_records:
        if not record.valid:
            raise InvalidRoundError(f"round {record.round_id} failed sifting")
        ledger = LatticeWalker.build_ledger(record.announced_c, d)
        symbols = ledger.symbols(record.moves, d)
        symbols[-1] = (symbols[-1] - record.outcome) % d
        for owner, symbol in enumerate(symbols):
            columns[owner].append(symbol)
    return [KeyString(owner, d, tuple(col)) for owner, col in enumerate(columns)]


def verify_subsequence(keys: Sequence[KeyString], records: Sequence[RoundRecord], check_fraction, rng,
                       check_count=None, error_threshold=0.0) -> VerificationResult:
    """
    Open a uniformly chosen subset of key positions in public. A position errs
    when its symbols do not sum to 0 mod d. Opened positions are dropped.
    `records` are the valid rounds the key positions came from.
    """
    if not 0.0 <= check_fraction < 1.0:
        raise ValueError(f"check_fraction must be in [0, 1), got {check_fraction}")
    if not keys:
        return VerificationResult(0.0, 0, 0, False, tuple(), tuple())

    d = keys[0].d
    length = len(keys[0])
    if check_count is None:
        check_count = int(round(check_fraction * length))
    check_count = min(int(check_count), length)

    opened = np.sort(rng.choice(length, size=check_count, replace=False)) if check_count else np.array([], int)
    matrix = np.array([k.symbols for k in keys], dtype=np.int64)
    errors = int(np.count_nonzero(matrix[:, opened].sum(axis=0) % d)) if check_count else 0
    error_rate = errors / check_count if check_count else 0.0
    detected = errors > 0 and error_rate > error_threshold

    keep = np.ones(length, dtype=bool)
    keep[opened] = False
    remaining = tuple(KeyString(k.owner, d, tuple(int(s) for s in matrix[i, keep]))
                      for i, k in enumerate(keys))
    opened_ids = tuple(records[i].round_id for i in opened) if len(records) == length else tuple()
    if detected:
        logger.warning("verification found %d errors in %d opened positions", errors, check_count)
    return VerificationResult(error_rate, errors, check_count, detected, remaining, opened_ids)


def share_secret(message, keys: Sequence[KeyString], sender, receiver, withheld=()) -> SharingResult:
    """
    The sender publishes message + K_sender; the receiver adds every other
    player's string. With all strings present the zero-sum identity leaves
    exactly the message.
    """
    n = len(keys)
    if not (0 <= sender < n and 0 <= receiver < n):
        raise ValueError(f"sender/receiver must be player indices below {n}")
    if sender == receiver:
        raise ValueError("sender and receiver must differ")
    if sender in withheld:
        raise ValueError("the sender's string is already inside the ciphertext")
    d = keys[0].d
    message = np.asarray(message, dtype=np.int64)
    if message.size > len(keys[0]):
        raise ValueError(f"message of {message.size} dits exceeds key length {len(keys[0])}")
    if message.size and (message.min() < 0 or message.max() >= d):
        raise ValueError(f"message dits must lie in Z_{d}")

    length = message.size
    ciphertext = (message + np.asarray(keys[sender].symbols[:length], dtype=np.int64)) % d
    recovered = ciphertext.copy()
    for key in keys:
        if key.owner == sender or key.owner in withheld:
            continue
        recovered = (recovered + np.asarray(key.symbols[:length], dtype=np.int64)) % d
    return SharingResult(tuple(int(x) for x in ciphertext), tuple(int(x) for x in recovered))
