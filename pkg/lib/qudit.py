import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from lib.errors import DimensionCapError, NormCorruptionError

logger = logging.getLogger(__name__)


class Basis(str, Enum):
    COMPUTATIONAL = "computational"
    FOURIER = "fourier"


@dataclass(frozen=True, eq=False)
class QuditState:
    """
    Pure state of one d-level system.
    amplitudes[k] is the coefficient of the computational basis state |k>.
    """
    dim: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if int(self.dim) < 2:
            raise ValueError(f"dimension must be >= 2, got {self.dim}")
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, 'dim', int(self.dim))
        object.__setattr__(self, 'amplitudes', amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class JointState:
    """
    Pure state of several d-level systems, row-major: the first listed
    subsystem is the slowest-varying index. Attack code keeps the carried
    qudit as the last subsystem and ancillas in front of it.
    """
    dims: Tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(x) for x in self.dims)
        if not dims:
            raise ValueError("joint state needs at least one subsystem")
        if any(x != dims[0] for x in dims) or dims[0] < 2:
            raise ValueError(f"all subsystems must share one dimension >= 2, got {dims}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != int(np.prod(dims)):
            raise ValueError(f"expected {int(np.prod(dims))} amplitudes for dims {dims}, got {amps.size}")
        amps.setflags(write=False)
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'amplitudes', amps)

    @property
    def d(self) -> int:
        return self.dims[0]

    @property
    def n_subsystems(self) -> int:
        return len(self.dims)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)


AnyState = Union[QuditState, JointState]


@dataclass(frozen=True)
class MeasurementOutcome:
    value: int
    post_state: AnyState


@dataclass(frozen=True)
class Operator:
    """Single-qudit operator X^power, Z^power, F or F^-1."""
    kind: str
    power: int = 1

    @classmethod
    def x(cls, a):
        return cls('X', int(a))

    @classmethod
    def z(cls, b):
        return cls('Z', int(b))

    @classmethod
    def f(cls):
        return cls('F')

    @classmethod
    def f_inverse(cls):
        return cls('F_INV')


@lru_cache(maxsize=64)
def _fourier_matrix(d):
    k = np.arange(d)
    # exponent reduced mod d before exp() keeps the phases exact for large jk
    exponents = np.outer(k, k) % d
    matrix = np.exp(2j * np.pi * exponents / d) / np.sqrt(d)
    matrix.setflags(write=False)
    return matrix


class QuditOps:
    """
    Exact state-vector engine for the generalized Pauli operators X, Z,
    the Fourier operator F, the generalized CNOT and Born-rule measurement.
    All methods are pure: inputs are never modified.
    """

    NORM_TOLERANCE = 1e-9
    CORRUPTION_TOLERANCE = 1e-6
    JOINT_AMPLITUDE_CAP = 10 ** 6

    # --- constants and states ---

    @staticmethod
    def omega_power(d, n):
        """omega^n with omega = exp(2 pi i / d). Works elementwise on arrays."""
        n = np.mod(n, d)
        return np.exp(2j * np.pi * n / d)

    @staticmethod
    def fourier_matrix(d) -> np.ndarray:
        return _fourier_matrix(int(d))

    @staticmethod
    def _check_index(d, k):
        if d < 2:
            raise ValueError(f"dimension must be >= 2, got {d}")
        if not 0 <= k < d:
            raise ValueError(f"basis index {k} outside Z_{d}")

    @classmethod
    def basis_state(cls, d, k) -> QuditState:
        cls._check_index(d, k)
        amps = np.zeros(d, dtype=complex)
        amps[k] = 1.0
        return QuditState(d, amps)

    @classmethod
    def fourier_basis_state(cls, d, k) -> QuditState:
        """|xi_k> = (1/sqrt d) sum_j omega^{jk} |j>"""
        cls._check_index(d, k)
        j = np.arange(d)
        return QuditState(d, cls.omega_power(d, j * k) / np.sqrt(d))

    @classmethod
    def plus_state(cls, d) -> QuditState:
        return cls.fourier_basis_state(d, 0)

    @staticmethod
    def random_state(d, rng) -> QuditState:
        amps = rng.normal(size=d) + 1j * rng.normal(size=d)
        return QuditState(d, amps / np.linalg.norm(amps))

    # --- operators on an arbitrary axis of an amplitude tensor ---

    @classmethod
    def _apply_along(cls, tensor, axis, op: Operator, d):
        if op.kind == 'X':
            # out[k] = in[k - a]
            return np.roll(tensor, op.power % d, axis=axis)
        if op.kind == 'Z':
            shape = [1] * tensor.ndim
            shape[axis] = d
            phases = cls.omega_power(d, np.arange(d) * op.power).reshape(shape)
            return tensor * phases
        if op.kind in ('F', 'F_INV'):
            matrix = cls.fourier_matrix(d)
            if op.kind == 'F_INV':
                # F is symmetric, so F^-1 = F^dagger = conj(F)
                matrix = matrix.conj()
            out = np.tensordot(matrix, tensor, axes=([1], [axis]))
            return np.moveaxis(out, 0, axis)
        raise ValueError(f"unknown operator kind {op.kind!r}")

    @classmethod
    def apply_operator(cls, state: QuditState, op: Operator) -> QuditState:
        return QuditState(state.dim, cls._apply_along(state.amplitudes, 0, op, state.dim))

    @classmethod
    def apply_x_pow(cls, state: QuditState, a) -> QuditState:
        return cls.apply_operator(state, Operator.x(a))

    @classmethod
    def apply_z_pow(cls, state: QuditState, b) -> QuditState:
        return cls.apply_operator(state, Operator.z(b))

    @classmethod
    def apply_f(cls, state: QuditState) -> QuditState:
        return cls.apply_operator(state, Operator.f())

    @classmethod
    def apply_f_inverse(cls, state: QuditState) -> QuditState:
        return cls.apply_operator(state, Operator.f_inverse())

    @classmethod
    def apply_on_subsystem(cls, state: JointState, which, op: Operator) -> JointState:
        """Apply a single-qudit operator to one subsystem, identity elsewhere."""
        if not 0 <= which < state.n_subsystems:
            raise ValueError(f"subsystem {which} out of range for {state.n_subsystems} subsystems")
        out = cls._apply_along(state.tensor(), which, op, state.d)
        return JointState(state.dims, out)

    # --- composite systems ---

    @staticmethod
    def embed_with_ancilla(ancilla: QuditState, carried: QuditState) -> JointState:
        """|ancilla> (x) |carried>, ancilla as the first subsystem."""
        if ancilla.dim != carried.dim:
            raise ValueError(f"dimension mismatch: ancilla {ancilla.dim}, carried {carried.dim}")
        return JointState((ancilla.dim, carried.dim), np.kron(ancilla.amplitudes, carried.amplitudes))

    @classmethod
    def insert_ancilla(cls, state: AnyState, ancilla: QuditState, position) -> JointState:
        """Tensor a fresh ancilla into `state` so that it becomes subsystem `position`."""
        if isinstance(state, QuditState):
            state = JointState((state.dim,), state.amplitudes)
        if ancilla.dim != state.d:
            raise ValueError(f"dimension mismatch: ancilla {ancilla.dim}, joint {state.d}")
        if not 0 <= position <= state.n_subsystems:
            raise ValueError(f"insert position {position} out of range")
        dims = state.dims[:position] + (ancilla.dim,) + state.dims[position:]
        size = int(np.prod(dims, dtype=np.int64))
        if size > cls.JOINT_AMPLITUDE_CAP:
            raise DimensionCapError(
                f"joint state with dims {dims} needs {size} amplitudes (cap {cls.JOINT_AMPLITUDE_CAP})")
        tensor = np.multiply.outer(ancilla.amplitudes, state.tensor())
        return JointState(dims, np.moveaxis(tensor, 0, position))

    @staticmethod
    def apply_controlled_shift(state: JointState, control, target) -> JointState:
        """Generalized CNOT between two subsystems: |i, j> -> |i, i + j>."""
        n = state.n_subsystems
        if not (0 <= control < n and 0 <= target < n) or control == target:
            raise ValueError(f"invalid control/target pair ({control}, {target}) for {n} subsystems")
        t = np.moveaxis(state.tensor(), (control, target), (0, 1))
        out = np.empty_like(t)
        for i in range(state.d):
            out[i] = np.roll(t[i], i, axis=0)
        return JointState(state.dims, np.moveaxis(out, (0, 1), (control, target)))

    @classmethod
    def apply_cnot(cls, state: JointState) -> JointState:
        if state.n_subsystems != 2:
            raise ValueError(f"CNOT needs exactly 2 subsystems, got {state.n_subsystems}")
        return cls.apply_controlled_shift(state, 0, 1)

    # --- measurement ---

    @classmethod
    def _checked_total(cls, probabilities):
        total = float(np.sum(probabilities))
        if abs(total - 1.0) > cls.CORRUPTION_TOLERANCE:
            raise NormCorruptionError(f"state norm^2 is {total:.12f}, expected 1")
        return total

    @classmethod
    def measure_computational(cls, state: QuditState, rng) -> MeasurementOutcome:
        probs = state.probabilities()
        total = cls._checked_total(probs)
        value = int(rng.choice(state.dim, p=probs / total))
        return MeasurementOutcome(value, cls.basis_state(state.dim, value))

    @classmethod
    def measure_fourier(cls, state: QuditState, rng) -> MeasurementOutcome:
        """Outcome v means projection onto |xi_v>."""
        rotated = cls.apply_f_inverse(state)
        outcome = cls.measure_computational(rotated, rng)
        return MeasurementOutcome(outcome.value, cls.fourier_basis_state(state.dim, outcome.value))

    @classmethod
    def measure_subsystem(cls, state: AnyState, which, basis, rng) -> MeasurementOutcome:
        basis = Basis(basis)
        if isinstance(state, QuditState):
            if which != 0:
                raise ValueError(f"single qudit has no subsystem {which}")
            if basis is Basis.FOURIER:
                return cls.measure_fourier(state, rng)
            return cls.measure_computational(state, rng)

        if not 0 <= which < state.n_subsystems:
            raise ValueError(f"subsystem {which} out of range for {state.n_subsystems} subsystems")
        d = state.d
        t = state.tensor()
        if basis is Basis.FOURIER:
            t = cls._apply_along(t, which, Operator.f_inverse(), d)

        others = tuple(ax for ax in range(t.ndim) if ax != which)
        probs = np.sum(np.abs(t) ** 2, axis=others)
        total = cls._checked_total(probs)
        value = int(rng.choice(d, p=probs / total))

        index = [slice(None)] * t.ndim
        index[which] = value
        collapsed = np.zeros_like(t)
        collapsed[tuple(index)] = t[tuple(index)] / np.sqrt(probs[value])
        if basis is Basis.FOURIER:
            collapsed = cls._apply_along(collapsed, which, Operator.f(), d)
        return MeasurementOutcome(value, JointState(state.dims, collapsed))

    # --- comparisons ---

    @staticmethod
    def equal_up_to_phase(u, v, atol=1e-9) -> bool:
        """True when u = e^{i phi} v amplitudewise within atol."""
        u = np.asarray(getattr(u, 'amplitudes', u), dtype=complex)
        v = np.asarray(getattr(v, 'amplitudes', v), dtype=complex)
        if u.shape != v.shape:
            return False
        idx = int(np.argmax(np.abs(v)))
        if abs(v[idx]) < atol:
            return bool(np.allclose(u, v, atol=atol, rtol=0))
        phase = u[idx] / v[idx]
        if abs(abs(phase) - 1.0) > atol:
            return False
        return bool(np.allclose(u, phase * v, atol=atol, rtol=0))
