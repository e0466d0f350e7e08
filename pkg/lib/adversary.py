import logging
from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from enum import Enum
from numbers import Integral
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

from lib.errors import AttackError, ConfigError
from lib.lattice import LatticeWalker, PlayerMove
from lib.qudit import Basis, JointState, QuditOps, QuditState

logger = logging.getLogger(__name__)


class AttackKind(str, Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"
    CNOT_ANCILLA = "cnot_ancilla"


class BasisPolicy(str, Enum):
    ALWAYS_COMPUTATIONAL = "always_computational"
    ALWAYS_FOURIER = "always_fourier"
    UNIFORM_RANDOM = "uniform_random"


def _index_set(name, values) -> FrozenSet[int]:
    if isinstance(values, (str, bytes)) or not isinstance(values, Iterable):
        raise ConfigError(f"{name} must be a list of integers, got {values!r}")
    bad = [x for x in values if isinstance(x, bool) or not isinstance(x, Integral)]
    if bad:
        raise ConfigError(f"{name} must be a list of integers, got {list(values)!r}")
    return frozenset(int(x) for x in values)


@dataclass(frozen=True)
class AttackDescriptor:
    """
    Which links are attacked and how. Link i runs from player i to player i+1.
    For cnot_ancilla each coalition member p entangles the qudit it receives,
    i.e. it attacks link p-1.
    """
    kind: AttackKind = AttackKind.NONE
    links: FrozenSet[int] = frozenset()
    basis_policy: BasisPolicy = BasisPolicy.UNIFORM_RANDOM
    coalition: FrozenSet[int] = frozenset()

    def __post_init__(self):
        try:
            object.__setattr__(self, 'kind', AttackKind(self.kind))
            object.__setattr__(self, 'basis_policy', BasisPolicy(self.basis_policy))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        object.__setattr__(self, 'links', _index_set('links', self.links))
        object.__setattr__(self, 'coalition', _index_set('coalition', self.coalition))

    @property
    def active(self):
        return self.kind is not AttackKind.NONE

    def attacked_links(self) -> List[int]:
        if self.kind is AttackKind.CNOT_ANCILLA:
            return sorted(p - 1 for p in self.coalition)
        if self.kind is AttackKind.INTERCEPT_RESEND:
            return sorted(self.links)
        return []

    def validate(self, n_players):
        n_links = n_players - 1
        if self.kind is AttackKind.INTERCEPT_RESEND:
            if not self.links:
                raise ConfigError("intercept_resend needs at least one link")
            bad = [x for x in self.links if not 0 <= x < n_links]
            if bad:
                raise ConfigError(f"links {sorted(bad)} outside 0..{n_links - 1}")
        elif self.kind is AttackKind.CNOT_ANCILLA:
            if not self.coalition:
                raise ConfigError("cnot_ancilla needs a nonempty coalition")
            bad = [p for p in self.coalition if not 1 <= p < n_players]
            if bad:
                raise ConfigError(f"coalition members {sorted(bad)} outside 1..{n_players - 1}")
            if self.links and sorted(self.links) != self.attacked_links():
                raise ConfigError(
                    f"links {sorted(self.links)} disagree with coalition incoming links {self.attacked_links()}")

    def with_default_targets(self):
        """
        Fill an empty target set: link 0 for intercept_resend, player 1 for
        cnot_ancilla. Kind none drops any targets left over.
        """
        if self.kind is AttackKind.NONE:
            return AttackDescriptor(basis_policy=self.basis_policy)
        if self.kind is AttackKind.INTERCEPT_RESEND and not self.links:
            return replace(self, links=frozenset({0}))
        if self.kind is AttackKind.CNOT_ANCILLA and not self.coalition:
            return replace(self, coalition=frozenset({1}))
        return self

    def joint_subsystems(self) -> int:
        """Largest number of subsystems a round's state can reach."""
        if self.kind is AttackKind.CNOT_ANCILLA:
            return len(self.coalition) + 1
        return 1

    @classmethod
    def from_dict(cls, data):
        if data is None:
            return cls()
        if isinstance(data, str):
            return cls(kind=data)
        if not isinstance(data, dict):
            raise ConfigError(f"attack must be a name or an object, got {data!r}")
        unknown = set(data) - {'kind', 'links', 'basis_policy', 'coalition'}
        if unknown:
            raise ConfigError(f"unknown attack keys: {sorted(unknown)}")
        return cls(
            kind=data.get('kind', AttackKind.NONE),
            links=data.get('links', ()),
            basis_policy=data.get('basis_policy', BasisPolicy.UNIFORM_RANDOM),
            coalition=data.get('coalition', ()),
        )

    def to_dict(self):
        return {
            'kind': self.kind.value,
            'links': sorted(self.links) if self.kind is not AttackKind.CNOT_ANCILLA else self.attacked_links(),
            'basis_policy': self.basis_policy.value,
            'coalition': sorted(self.coalition),
        }


@dataclass(frozen=True)
class AncillaRegister:
    owner: int
    link: int
    subsystem: int
    measured_value: Optional[int] = None


class Interception(NamedTuple):
    resent: QuditState
    guess: int
    basis: Basis


def intercept_resend(state, basis_policy, rng) -> Interception:
    """Measure the carried qudit in the policy's basis and forward the collapsed state."""
    if not isinstance(state, QuditState):
        raise AttackError("intercept_resend acts on a single carried qudit")
    policy = BasisPolicy(basis_policy)
    if policy is BasisPolicy.ALWAYS_COMPUTATIONAL:
        basis = Basis.COMPUTATIONAL
    elif policy is BasisPolicy.ALWAYS_FOURIER:
        basis = Basis.FOURIER
    else:
        basis = Basis.COMPUTATIONAL if rng.integers(0, 2) == 0 else Basis.FOURIER
    outcome = QuditOps.measure_subsystem(state, 0, basis, rng)
    return Interception(outcome.post_state, outcome.value, basis)


def attach_cnot_ancilla(carried, owner=-1, link=-1) -> Tuple[JointState, AncillaRegister]:
    """
    Prepare an ancilla in |+>, insert it just before the carried qudit and
    apply the generalized CNOT with the ancilla as control.
    """
    position = carried.n_subsystems - 1 if isinstance(carried, JointState) else 0
    d = carried.d if isinstance(carried, JointState) else carried.dim
    joint = QuditOps.insert_ancilla(carried, QuditOps.plus_state(d), position)
    joint = QuditOps.apply_controlled_shift(joint, position, joint.n_subsystems - 1)
    return joint, AncillaRegister(owner=owner, link=link, subsystem=position)


def _row_after(c_list, player):
    return sum(int(c) for c in c_list[:player + 1]) % 4


def _signed_contribution(move: PlayerMove, row, d):
    return {0: move.a, 1: move.b, 2: -move.a, 3: -move.b}[row] % d


@dataclass(frozen=True)
class LinkGuess:
    link: int
    owner: int
    ancilla_value: int
    row: int
    # Fourier-basis link: the ancilla holds the link's lattice position
    usable: bool
    recovered_pos: Optional[int] = None
    # link position minus contributions of coalition members upstream of the link
    honest_partial: Optional[int] = None


@dataclass(frozen=True)
class CoalitionGuess:
    guesses: Tuple[LinkGuess, ...]
    registers: Tuple[AncillaRegister, ...]


def coalition_guess(registers: Sequence[AncillaRegister], state, announced_c,
                    own_moves: Dict[int, PlayerMove], d, rng) -> CoalitionGuess:
    """
    Post-announcement phase of the ancilla attack. Every ancilla is measured
    in the Fourier basis; announced c's tell which links carried a Fourier
    basis state, and only those guesses are usable.
    """
    guesses = []
    measured = []
    for reg in sorted(registers, key=lambda r: r.link):
        outcome = QuditOps.measure_subsystem(state, reg.subsystem, Basis.FOURIER, rng)
        state = outcome.post_state
        value = outcome.value
        measured.append(replace(reg, measured_value=value))

        row = _row_after(announced_c, reg.link)
        if row % 2 == 0:
            guesses.append(LinkGuess(reg.link, reg.owner, value, row, usable=False))
            continue

        # ancilla collapsed to |xi_{-q}> for link state |xi_q>
        q = (-value) % d
        pos = q if row == 1 else (-q) % d
        upstream = sum(
            _signed_contribution(move, _row_after(announced_c, member), d)
            for member, move in own_moves.items() if member <= reg.link
        )
        guesses.append(LinkGuess(reg.link, reg.owner, value, row, usable=True,
                                 recovered_pos=pos, honest_partial=(pos - upstream) % d))
    return CoalitionGuess(tuple(guesses), tuple(measured))


@dataclass(frozen=True)
class LinkAnnotation:
    link: int
    link_basis: Basis
    attack_basis: Optional[Basis] = None
    guess: Optional[int] = None
    ancilla_value: Optional[int] = None
    usable: bool = False
    # audit only: the attack disturbed the honest link state
    disturbing: bool = False
    exact_recovery: Optional[bool] = None
    honest_partial: Optional[int] = None

    def flag(self):
        tag = 'disturbed' if self.disturbing else 'clean'
        if self.usable:
            tag += '+usable'
        return f"L{self.link}:{tag}"


@dataclass(frozen=True)
class AttackAnnotation:
    kind: AttackKind
    links: Tuple[LinkAnnotation, ...] = field(default_factory=tuple)

    @property
    def disturbing(self):
        return any(x.disturbing for x in self.links)

    def link_ids(self):
        return ';'.join(str(x.link) for x in self.links)

    def flags(self):
        return ';'.join(x.flag() for x in self.links)


class InterceptResendAttack:
    kind = AttackKind.INTERCEPT_RESEND

    def __init__(self, link, policy):
        self.link = link
        self.policy = BasisPolicy(policy)
        self.interception = None

    def intercept(self, state, rng):
        self.interception = intercept_resend(state, self.policy, rng)
        return self.interception.resent


class CnotAncillaAttack:
    kind = AttackKind.CNOT_ANCILLA

    def __init__(self, link, owner):
        self.link = link
        self.owner = owner
        self.register = None

    def intercept(self, state, rng):
        joint, self.register = attach_cnot_ancilla(state, owner=self.owner, link=self.link)
        return joint


class Adversary:
    """Builds per-round interceptors and runs the post-announcement phase."""

    @staticmethod
    def build_interceptors(descriptor: AttackDescriptor, n_players) -> list:
        interceptors = [None] * (n_players - 1)
        if descriptor.kind is AttackKind.INTERCEPT_RESEND:
            for link in descriptor.attacked_links():
                interceptors[link] = InterceptResendAttack(link, descriptor.basis_policy)
        elif descriptor.kind is AttackKind.CNOT_ANCILLA:
            for member in sorted(descriptor.coalition):
                interceptors[member - 1] = CnotAncillaAttack(member - 1, member)
        return interceptors

    @staticmethod
    def conclude(interceptors, final_state, announced_c, moves, d, rng) -> Optional[AttackAnnotation]:
        """
        Runs strictly after the last player's measurement and the public
        announcement of the c's. Returns None for honest rounds.
        """
        active = [x for x in interceptors if x is not None]
        if not active:
            return None

        logger.debug("concluding %s on links %s after announcement %s",
                     active[0].kind.value, [x.link for x in active], list(announced_c))
        path = LatticeWalker.path(moves, d)
        annotations = []
        if active[0].kind is AttackKind.INTERCEPT_RESEND:
            for attack in active:
                point = path[attack.link]
                link_basis = Basis.COMPUTATIONAL if point.is_computational else Basis.FOURIER
                seen = attack.interception
                label = point.pos if point.row in (0, 1) else (-point.pos) % d
                annotations.append(LinkAnnotation(
                    link=attack.link,
                    link_basis=link_basis,
                    attack_basis=seen.basis,
                    guess=seen.guess,
                    usable=seen.basis is link_basis,
                    disturbing=seen.basis is not link_basis,
                    exact_recovery=seen.guess == label,
                ))
            return AttackAnnotation(AttackKind.INTERCEPT_RESEND, tuple(annotations))

        registers = [attack.register for attack in active]
        own_moves = {attack.owner: moves[attack.owner] for attack in active}
        result = coalition_guess(registers, final_state, announced_c, own_moves, d, rng)
        for guess in result.guesses:
            point = path[guess.link]
            annotations.append(LinkAnnotation(
                link=guess.link,
                link_basis=Basis.FOURIER if guess.usable else Basis.COMPUTATIONAL,
                ancilla_value=guess.ancilla_value,
                guess=guess.recovered_pos,
                usable=guess.usable,
                disturbing=not guess.usable,
                exact_recovery=(guess.recovered_pos == point.pos) if guess.usable else None,
                honest_partial=guess.honest_partial,
            ))
        return AttackAnnotation(AttackKind.CNOT_ANCILLA, tuple(annotations))


def detection_miss_probability(error_rate, checks):
    """Chance that `checks` independent opened positions all look clean."""
    return (1.0 - error_rate) ** checks
