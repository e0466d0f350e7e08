from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

from lib.errors import InvalidRoundError
from lib.qudit import QuditOps, QuditState


@dataclass(frozen=True)
class PlayerMove:
    """One player's secret X^a Z^b F^c."""
    a: int
    b: int
    c: int

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError(f"a and b must be non-negative, got ({self.a}, {self.b})")
        if self.c not in (0, 1):
            raise ValueError(f"c must be 0 or 1, got {self.c}")

    @classmethod
    def random(cls, d, rng):
        a, b = rng.integers(0, d, size=2)
        c = rng.integers(0, 2)
        return cls(int(a), int(b), int(c))

    def check_range(self, d):
        if self.a >= d or self.b >= d:
            raise ValueError(f"move {self} outside Z_{d}")


@dataclass(frozen=True)
class LatticePoint:
    """
    Point on the 4 x d torus of basis states.
    row 0: |pos>, row 1: |xi_pos>, row 2: |-pos>, row 3: |xi_-pos>
    """
    row: int
    pos: int

    @property
    def is_computational(self):
        return self.row % 2 == 0


ORIGIN = LatticePoint(0, 0)


class Source(str, Enum):
    A = "a"
    B = "b"


@dataclass(frozen=True)
class LedgerEntry:
    sign: int
    source: Source

    def value(self, move: PlayerMove, d):
        v = move.a if self.source is Source.A else move.b
        return (self.sign * v) % d


@dataclass(frozen=True)
class ContributionLedger:
    """
    Signed role of each player's secret in the correlation identity:
    sum_i sign_i * v_i == m (mod d) for the value m measured by the last player.
    """
    entries: Tuple[LedgerEntry, ...]
    # -1 when the walk ends on row 2; already folded into every entry's sign
    global_sign: int = 1

    def __len__(self):
        return len(self.entries)

    def symbols(self, moves: Sequence[PlayerMove], d) -> List[int]:
        if len(moves) != len(self.entries):
            raise ValueError(f"{len(moves)} moves for a ledger of {len(self.entries)} players")
        return [entry.value(move, d) for entry, move in zip(self.entries, moves)]

    def signed_sum(self, moves, d) -> int:
        return sum(self.symbols(moves, d)) % d

    def partial_sum(self, moves, d, start, stop, source: Source) -> int:
        """Signed sum over players start..stop-1 whose entry uses `source`."""
        total = 0
        for i in range(start, stop):
            entry = self.entries[i]
            if entry.source is Source(source):
                total += entry.value(moves[i], d)
        return total % d


class LatticeWalker:
    """
    Symbolic engine: each move hops the state across the lattice of
    basis states. Global phases are dropped.
    """

    @staticmethod
    def step(point: LatticePoint, move: PlayerMove, d) -> LatticePoint:
        # rightmost-first: F, then Z, then X
        row, pos = point.row, point.pos
        if move.c:
            row = (row + 1) % 4
        if row == 1:
            pos += move.b
        elif row == 3:
            pos -= move.b
        if row == 0:
            pos += move.a
        elif row == 2:
            pos -= move.a
        return LatticePoint(row, pos % d)

    @staticmethod
    def realize(point: LatticePoint, d) -> QuditState:
        label = point.pos if point.row in (0, 1) else (-point.pos) % d
        if point.is_computational:
            return QuditOps.basis_state(d, label)
        return QuditOps.fourier_basis_state(d, label)

    @classmethod
    def path(cls, moves: Sequence[PlayerMove], d) -> List[LatticePoint]:
        """Points occupied after each player's move, starting from |0>."""
        points = []
        point = ORIGIN
        for move in moves:
            point = cls.step(point, move, d)
            points.append(point)
        return points

    @classmethod
    def walk(cls, moves: Sequence[PlayerMove], d) -> LatticePoint:
        if not moves:
            raise ValueError("walk needs at least one move")
        return cls.path(moves, d)[-1]

    @staticmethod
    def parity(c_list) -> int:
        return sum(int(c) for c in c_list) % 2

    @classmethod
    def is_valid(cls, moves) -> bool:
        return cls.parity(m.c for m in moves) == 0

    @classmethod
    def predict_outcome(cls, moves, d) -> Optional[int]:
        if not cls.is_valid(moves):
            return None
        final = cls.walk(moves, d)
        return final.pos if final.row == 0 else (-final.pos) % d

    @classmethod
    def build_ledger(cls, c_list, d) -> ContributionLedger:
        c_list = [int(c) for c in c_list]
        if not c_list:
            raise ValueError("ledger needs at least one player")
        if cls.parity(c_list) != 0:
            raise InvalidRoundError(f"announced c's {c_list} have odd parity")

        rows = []
        row = 0
        for c in c_list:
            row = (row + c) % 4
            rows.append(row)

        # final row 2 means the measured label is -pos
        global_sign = 1 if rows[-1] == 0 else -1
        entries = []
        for row in rows:
            source = Source.A if row in (0, 2) else Source.B
            sign = 1 if row in (0, 1) else -1
            entries.append(LedgerEntry(global_sign * sign, source))
        return ContributionLedger(tuple(entries), global_sign)
