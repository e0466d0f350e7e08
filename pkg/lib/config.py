import json
import logging
from dataclasses import dataclass, field, fields, replace
from numbers import Integral, Real
from typing import Optional, Tuple

from lib.adversary import AttackDescriptor
from lib.errors import ConfigError, DimensionCapError
from lib.lattice import PlayerMove
from lib.qudit import QuditOps

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProtocolConfig:
    """
    One experiment: N+1 = n_players players share a d-level qudit for
    `rounds` rounds, every round seeded from (seed, round_id).
    """
    d: int = 3
    n_players: int = 3
    rounds: int = 1000
    seed: int = 0
    check_fraction: float = 0.2
    attack: AttackDescriptor = field(default_factory=AttackDescriptor)
    controller: int = 0
    # detection fires when the check error rate exceeds this; 0.0 = any mismatch
    error_threshold: float = 0.0
    check_count: Optional[int] = None
    significance: float = 0.001
    # repeated t-position openings used to estimate the detection rate
    detection_checks: int = 50
    detection_repetitions: int = 1000
    workers: int = 1
    forced_moves: Optional[Tuple[PlayerMove, ...]] = None

    def _check_types(self):
        for name in ('d', 'n_players', 'rounds', 'seed', 'controller', 'workers',
                     'detection_checks', 'detection_repetitions'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, Integral):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.check_count is not None and (isinstance(self.check_count, bool)
                                             or not isinstance(self.check_count, Integral)):
            raise ConfigError(f"check_count must be an integer or null, got {self.check_count!r}")
        for name in ('check_fraction', 'error_threshold', 'significance'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, Real):
                raise ConfigError(f"{name} must be a number, got {value!r}")
        if not isinstance(self.attack, AttackDescriptor):
            raise ConfigError(f"attack must be an attack descriptor, got {self.attack!r}")

    def validate(self):
        self._check_types()
        if self.d < 2:
            raise ConfigError(f"d must be >= 2, got {self.d}")
        if self.n_players < 2:
            raise ConfigError(f"n_players must be >= 2, got {self.n_players}")
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if not 0.0 <= self.check_fraction < 1.0:
            raise ConfigError(f"check_fraction must be in [0, 1), got {self.check_fraction}")
        if not 0 <= self.controller < self.n_players:
            raise ConfigError(f"controller {self.controller} is not a player index")
        if not 0.0 <= self.error_threshold < 1.0:
            raise ConfigError(f"error_threshold must be in [0, 1), got {self.error_threshold}")
        if self.check_count is not None and self.check_count < 0:
            raise ConfigError(f"check_count must be >= 0, got {self.check_count}")
        if not 0.0 < self.significance < 1.0:
            raise ConfigError(f"significance must be in (0, 1), got {self.significance}")
        if self.detection_checks < 1 or self.detection_repetitions < 0:
            raise ConfigError("detection_checks must be >= 1 and detection_repetitions >= 0")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.forced_moves is not None:
            if len(self.forced_moves) != self.n_players:
                raise ConfigError(f"forced_moves needs {self.n_players} moves, got {len(self.forced_moves)}")
            for move in self.forced_moves:
                try:
                    move.check_range(self.d)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
        self.attack.validate(self.n_players)

        amplitudes = self.d ** self.attack.joint_subsystems()
        if amplitudes > QuditOps.JOINT_AMPLITUDE_CAP:
            raise DimensionCapError(
                f"attack needs {amplitudes} joint amplitudes, cap is {QuditOps.JOINT_AMPLITUDE_CAP}")
        return self

    def to_dict(self):
        return {
            'd': self.d,
            'n_players': self.n_players,
            'rounds': self.rounds,
            'seed': self.seed,
            'check_fraction': self.check_fraction,
            'attack': self.attack.to_dict(),
            'controller': self.controller,
            'error_threshold': self.error_threshold,
            'check_count': self.check_count,
            'significance': self.significance,
            'detection_checks': self.detection_checks,
            'detection_repetitions': self.detection_repetitions,
            'forced_moves': None if self.forced_moves is None
            else [[m.a, m.b, m.c] for m in self.forced_moves],
        }

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values = dict(data)
        if 'attack' in values:
            values['attack'] = AttackDescriptor.from_dict(values['attack'])
        if values.get('forced_moves') is not None:
            try:
                values['forced_moves'] = tuple(PlayerMove(*m) for m in values['forced_moves'])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad forced_moves: {exc}") from exc
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def load_config(path) -> ProtocolConfig:
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a JSON object")
    logger.info("loaded config from %s", path)
    return ProtocolConfig.from_dict(data)


def with_overrides(config: ProtocolConfig, **overrides) -> ProtocolConfig:
    """Values of None mean "flag not given" and keep the file value."""
    given = {k: v for k, v in overrides.items() if v is not None}
    if 'attack' in given and not isinstance(given['attack'], AttackDescriptor):
        given['attack'] = AttackDescriptor.from_dict(given['attack'])
    try:
        return replace(config, **given)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
