import pytest
import numpy as np

from lib.errors import DimensionCapError, NormCorruptionError
from lib.qudit import Basis, JointState, Operator, QuditOps, QuditState

DIMS = [2, 3, 4, 5, 6, 8, 12, 16, 64]


class TestStates:

    def test_basis_state_vectors(self):
        """|k> has a single 1 at slot k"""
        assert np.allclose(QuditOps.basis_state(3, 0).amplitudes, [1, 0, 0])
        assert np.allclose(QuditOps.basis_state(2, 1).amplitudes, [0, 1])
        assert np.argmax(np.abs(QuditOps.basis_state(5, 4).amplitudes)) == 4

    def test_basis_state_rejects_bad_index(self):
        """k outside Z_d and d < 2 are rejected"""
        with pytest.raises(ValueError):
            QuditOps.basis_state(3, 3)
        with pytest.raises(ValueError):
            QuditOps.basis_state(3, -1)
        with pytest.raises(ValueError):
            QuditOps.basis_state(1, 0)

    def test_fourier_basis_state_values(self):
        """|xi_k> amplitudes for small d"""
        s = 1 / np.sqrt(2)
        assert np.allclose(QuditOps.fourier_basis_state(2, 0).amplitudes, [s, s])
        assert np.allclose(QuditOps.fourier_basis_state(2, 1).amplitudes, [s, -s])
        assert np.allclose(QuditOps.fourier_basis_state(4, 2).amplitudes, [0.5, -0.5, 0.5, -0.5])

    def test_state_shape_is_checked(self):
        """dim must equal the number of amplitudes"""
        with pytest.raises(ValueError):
            QuditState(3, [1, 0])

    def test_joint_state_size_is_checked(self):
        """amplitude count must equal the product of dims"""
        with pytest.raises(ValueError):
            JointState((2, 2), [1, 0, 0])
        with pytest.raises(ValueError):
            JointState((2, 3), np.zeros(6))

    def test_amplitudes_are_read_only(self):
        """states are immutable values"""
        state = QuditOps.basis_state(3, 1)
        with pytest.raises(ValueError):
            state.amplitudes[0] = 1.0

    def test_omega_power_reduces_exponent(self):
        """omega^d = 1 and huge exponents stay exact"""
        assert np.isclose(QuditOps.omega_power(7, 7), 1.0, atol=1e-15)
        assert np.isclose(QuditOps.omega_power(64, 64 * 10 ** 9 + 1), QuditOps.omega_power(64, 1), atol=1e-15)


class TestPauliOperators:

    def test_x_shifts_computational_labels(self):
        """X^a |k> = |k + a>"""
        assert np.allclose(QuditOps.apply_x_pow(QuditOps.basis_state(3, 0), 1).amplitudes,
                           QuditOps.basis_state(3, 1).amplitudes)
        assert np.allclose(QuditOps.apply_x_pow(QuditOps.basis_state(5, 2), 4).amplitudes,
                           QuditOps.basis_state(5, 1).amplitudes)

    def test_x_is_a_phase_on_fourier_states(self):
        """X^a |xi_k> = w^(-ka) |xi_k>"""
        d, k, a = 6, 2, 5
        xi = QuditOps.fourier_basis_state(d, k)
        out = QuditOps.apply_x_pow(xi, a)
        assert np.allclose(out.amplitudes, QuditOps.omega_power(d, -k * a) * xi.amplitudes, atol=1e-12)

    def test_z_is_a_phase_on_computational_states(self):
        """Z^b |k> = w^(kb) |k>"""
        d, k, b = 5, 3, 2
        out = QuditOps.apply_z_pow(QuditOps.basis_state(d, k), b)
        assert np.isclose(out.amplitudes[k], QuditOps.omega_power(d, k * b))
        assert QuditOps.equal_up_to_phase(out, QuditOps.basis_state(d, k))

    def test_z_shifts_fourier_labels(self):
        """Z^b |xi_k> = |xi_(k+b)>"""
        assert np.allclose(QuditOps.apply_z_pow(QuditOps.fourier_basis_state(3, 0), 1).amplitudes,
                           QuditOps.fourier_basis_state(3, 1).amplitudes, atol=1e-12)
        assert np.allclose(QuditOps.apply_z_pow(QuditOps.fourier_basis_state(4, 2), 3).amplitudes,
                           QuditOps.fourier_basis_state(4, 1).amplitudes, atol=1e-12)

    @pytest.mark.parametrize("d", DIMS)
    def test_commutation_zx(self, d):
        """ZX = w XZ"""
        psi = QuditOps.random_state(d, np.random.default_rng(d))
        zx = QuditOps.apply_z_pow(QuditOps.apply_x_pow(psi, 1), 1)
        xz = QuditOps.apply_x_pow(QuditOps.apply_z_pow(psi, 1), 1)
        assert np.allclose(zx.amplitudes, QuditOps.omega_power(d, 1) * xz.amplitudes, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("d", DIMS)
    def test_unitarity(self, d):
        """every operator keeps the norm"""
        rng = np.random.default_rng(100 + d)
        psi = QuditOps.random_state(d, rng)
        for op in (Operator.x(3), Operator.z(7), Operator.f(), Operator.f_inverse()):
            assert abs(QuditOps.apply_operator(psi, op).norm - 1.0) < 1e-12


class TestFourierOperator:

    @pytest.mark.parametrize("d", DIMS)
    def test_f_maps_bases(self, d):
        """F|k> = |xi_k> and F|xi_k> = |-k>"""
        for k in range(min(d, 8)):
            assert np.allclose(QuditOps.apply_f(QuditOps.basis_state(d, k)).amplitudes,
                               QuditOps.fourier_basis_state(d, k).amplitudes, atol=1e-12)
            assert np.allclose(QuditOps.apply_f(QuditOps.fourier_basis_state(d, k)).amplitudes,
                               QuditOps.basis_state(d, (-k) % d).amplitudes, atol=1e-12)

    @pytest.mark.parametrize("d", DIMS)
    def test_f_fourth_power_is_identity(self, d):
        """F^4 = I on random states"""
        psi = QuditOps.random_state(d, np.random.default_rng(d))
        out = psi
        for _ in range(4):
            out = QuditOps.apply_f(out)
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("d", DIMS)
    def test_f_inverse_undoes_f(self, d):
        """F^-1 F = I"""
        psi = QuditOps.random_state(d, np.random.default_rng(7 * d))
        out = QuditOps.apply_f_inverse(QuditOps.apply_f(psi))
        assert np.allclose(out.amplitudes, psi.amplitudes, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("d", DIMS)
    def test_conjugation_gives_z(self, d):
        """F X F^-1 = Z on every basis state"""
        for k in range(d):
            ket = QuditOps.basis_state(d, k)
            lhs = QuditOps.apply_f(QuditOps.apply_x_pow(QuditOps.apply_f_inverse(ket), 1))
            assert np.allclose(lhs.amplitudes, QuditOps.apply_z_pow(ket, 1).amplitudes, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("d", DIMS)
    def test_mutually_unbiased(self, d):
        """|<k|xi_j>|^2 = 1/d"""
        overlaps = np.abs(QuditOps.fourier_matrix(d)) ** 2
        assert np.allclose(overlaps, 1.0 / d, atol=1e-12, rtol=0)

    def test_hadamard_case(self):
        """d=2: F|0> = (|0> + |1>)/sqrt 2"""
        assert np.allclose(QuditOps.apply_f(QuditOps.basis_state(2, 0)).amplitudes, [2 ** -0.5, 2 ** -0.5])


class TestMeasurement:

    def test_basis_state_is_deterministic(self):
        """|3> always measures 3"""
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert QuditOps.measure_computational(QuditOps.basis_state(5, 3), rng).value == 3

    def test_born_rule_frequency(self):
        """(sqrt .25, sqrt .75) gives 1 with frequency 0.75 +- 3 sigma"""
        rng = np.random.default_rng(42)
        state = QuditState(2, [np.sqrt(0.25), np.sqrt(0.75)])
        n = 10_000
        ones = sum(QuditOps.measure_computational(state, rng).value for _ in range(n))
        assert abs(ones / n - 0.75) <= 3 * np.sqrt(0.75 * 0.25 / n)

    def test_fourier_state_gives_uniform_computational_outcomes(self):
        """measuring |xi_q> in the computational basis covers all of Z_d"""
        rng = np.random.default_rng(3)
        d = 4
        counts = np.bincount([QuditOps.measure_computational(QuditOps.fourier_basis_state(d, 1), rng).value
                              for _ in range(4000)], minlength=d)
        assert np.all(np.abs(counts / 4000 - 0.25) <= 4 * np.sqrt(0.25 * 0.75 / 4000))

    def test_fourier_measurement_reads_label(self):
        """|xi_v> measured in the Fourier basis gives v and leaves |xi_v>"""
        rng = np.random.default_rng(1)
        outcome = QuditOps.measure_fourier(QuditOps.fourier_basis_state(7, 5), rng)
        assert outcome.value == 5
        assert np.allclose(outcome.post_state.amplitudes, QuditOps.fourier_basis_state(7, 5).amplitudes)

    def test_corrupted_norm_raises(self):
        """norm off by more than 1e-6 signals corruption"""
        state = QuditState(3, [1.0, 0.1, 0.0])
        with pytest.raises(NormCorruptionError):
            QuditOps.measure_computational(state, np.random.default_rng(0))

    def test_same_seed_same_outcomes(self):
        """identical seeds give identical outcome sequences"""
        psi = QuditOps.random_state(6, np.random.default_rng(9))
        runs = []
        for _ in range(2):
            rng = np.random.default_rng(123)
            runs.append([QuditOps.measure_computational(psi, rng).value for _ in range(50)])
        assert runs[0] == runs[1]


class TestJointStates:

    def test_embed_is_tensor_product(self):
        """|0>|0> is index 0; |+>|q> is spread over the ancilla"""
        d = 3
        joint = QuditOps.embed_with_ancilla(QuditOps.basis_state(d, 0), QuditOps.basis_state(d, 0))
        assert joint.dims == (3, 3)
        assert np.isclose(joint.amplitudes[0], 1.0)
        plus_q = QuditOps.embed_with_ancilla(QuditOps.plus_state(d), QuditOps.basis_state(d, 2))
        expected = np.zeros((d, d))
        expected[:, 2] = 1 / np.sqrt(d)
        assert np.allclose(plus_q.tensor(), expected)

    def test_embed_rejects_mismatch(self):
        """ancilla and carried must share d"""
        with pytest.raises(ValueError):
            QuditOps.embed_with_ancilla(QuditOps.basis_state(2, 0), QuditOps.basis_state(3, 0))

    def test_cnot_entangles_computational_input(self):
        """CNOT |+>|q> = (1/sqrt d) sum_i |i>|i+q>"""
        d, q = 5, 2
        joint = QuditOps.apply_cnot(QuditOps.embed_with_ancilla(QuditOps.plus_state(d), QuditOps.basis_state(d, q)))
        expected = np.zeros((d, d))
        for i in range(d):
            expected[i, (i + q) % d] = 1 / np.sqrt(d)
        assert np.allclose(joint.tensor(), expected, atol=1e-12)

    def test_cnot_leaves_fourier_input_in_product_state(self):
        """CNOT |+>|xi_q> = |xi_-q>|xi_q>"""
        d, q = 6, 4
        joint = QuditOps.apply_cnot(
            QuditOps.embed_with_ancilla(QuditOps.plus_state(d), QuditOps.fourier_basis_state(d, q)))
        expected = QuditOps.embed_with_ancilla(QuditOps.fourier_basis_state(d, (-q) % d),
                                               QuditOps.fourier_basis_state(d, q))
        assert np.allclose(joint.amplitudes, expected.amplitudes, atol=1e-12)

    def test_cnot_with_zero_control_is_identity(self):
        """|0>|j> unchanged"""
        joint = QuditOps.embed_with_ancilla(QuditOps.basis_state(4, 0), QuditOps.basis_state(4, 3))
        assert np.allclose(QuditOps.apply_cnot(joint).amplitudes, joint.amplitudes)

    def test_cnot_needs_two_subsystems(self):
        """three subsystems is an error for apply_cnot"""
        joint = QuditOps.insert_ancilla(
            QuditOps.embed_with_ancilla(QuditOps.basis_state(2, 0), QuditOps.basis_state(2, 0)),
            QuditOps.basis_state(2, 0), 0)
        with pytest.raises(ValueError):
            QuditOps.apply_cnot(joint)

    def test_operator_on_subsystem(self):
        """X on the carried qudit; F on the carried qudit"""
        joint = QuditOps.embed_with_ancilla(QuditOps.basis_state(2, 0), QuditOps.basis_state(2, 0))
        out = QuditOps.apply_on_subsystem(joint, 1, Operator.x(1))
        assert np.allclose(out.amplitudes, [0, 1, 0, 0])

        d, k = 5, 3
        joint = QuditOps.embed_with_ancilla(QuditOps.basis_state(d, 0), QuditOps.basis_state(d, k))
        out = QuditOps.apply_on_subsystem(joint, 1, Operator.f())
        expected = QuditOps.embed_with_ancilla(QuditOps.basis_state(d, 0), QuditOps.fourier_basis_state(d, k))
        assert np.allclose(out.amplitudes, expected.amplitudes, atol=1e-12)

    def test_operator_on_entangled_state_keeps_norm(self):
        """Z^b on the carried half of an entangled pair"""
        d = 7
        joint = QuditOps.apply_cnot(QuditOps.embed_with_ancilla(QuditOps.plus_state(d), QuditOps.basis_state(d, 2)))
        out = QuditOps.apply_on_subsystem(joint, 1, Operator.z(3))
        assert abs(out.norm - 1.0) < 1e-12

    def test_subsystem_index_checked(self):
        """out of range subsystem index"""
        joint = QuditOps.embed_with_ancilla(QuditOps.basis_state(2, 0), QuditOps.basis_state(2, 0))
        with pytest.raises(ValueError):
            QuditOps.apply_on_subsystem(joint, 2, Operator.x(1))

    def test_insert_ancilla_layout(self):
        """inserting before the carried qudit keeps it last"""
        d = 3
        first = QuditOps.insert_ancilla(QuditOps.basis_state(d, 2), QuditOps.basis_state(d, 1), 0)
        second = QuditOps.insert_ancilla(first, QuditOps.basis_state(d, 0), 1)
        assert second.dims == (3, 3, 3)
        assert np.isclose(second.tensor()[1, 0, 2], 1.0)

    def test_dimension_cap(self):
        """joint states over 10^6 amplitudes are refused"""
        d = 101
        pair = QuditOps.embed_with_ancilla(QuditOps.plus_state(d), QuditOps.basis_state(d, 0))
        with pytest.raises(DimensionCapError):
            QuditOps.insert_ancilla(pair, QuditOps.plus_state(d), 1)


class TestSubsystemMeasurement:

    def test_fourier_ancilla_returns_minus_q(self):
        """ancilla of |xi_-q>|xi_q> reads -q with certainty"""
        d, q = 5, 2
        joint = QuditOps.apply_cnot(
            QuditOps.embed_with_ancilla(QuditOps.plus_state(d), QuditOps.fourier_basis_state(d, q)))
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert QuditOps.measure_subsystem(joint, 0, Basis.FOURIER, rng).value == (-q) % d

    def test_entangled_ancilla_is_uniform_and_collapses_partner(self):
        """computational ancilla of sum |i>|i+q> is uniform; the partner follows"""
        d, q = 4, 1
        joint = QuditOps.apply_cnot(QuditOps.embed_with_ancilla(QuditOps.plus_state(d), QuditOps.basis_state(d, q)))
        rng = np.random.default_rng(11)
        n = 4000
        counts = np.zeros(d)
        for _ in range(n):
            outcome = QuditOps.measure_subsystem(joint, 0, Basis.COMPUTATIONAL, rng)
            counts[outcome.value] += 1
            partner = QuditOps.measure_subsystem(outcome.post_state, 1, Basis.COMPUTATIONAL, rng)
            assert partner.value == (outcome.value + q) % d
        assert np.all(np.abs(counts / n - 1 / d) <= 4 * np.sqrt((1 / d) * (1 - 1 / d) / n))

    def test_second_subsystem_of_product(self):
        """|0>|3> measured on subsystem 1 gives 3"""
        joint = QuditOps.embed_with_ancilla(QuditOps.basis_state(5, 0), QuditOps.basis_state(5, 3))
        outcome = QuditOps.measure_subsystem(joint, 1, "computational", np.random.default_rng(0))
        assert outcome.value == 3
        assert abs(outcome.post_state.norm - 1.0) < 1e-9

    def test_single_qudit_dispatch(self):
        """a single qudit is subsystem 0"""
        rng = np.random.default_rng(0)
        assert QuditOps.measure_subsystem(QuditOps.basis_state(3, 2), 0, Basis.COMPUTATIONAL, rng).value == 2
        with pytest.raises(ValueError):
            QuditOps.measure_subsystem(QuditOps.basis_state(3, 2), 1, Basis.COMPUTATIONAL, rng)


class TestPhaseComparison:

    def test_global_phase_ignored(self):
        """e^(i phi) |psi> equals |psi> up to phase"""
        psi = QuditOps.random_state(5, np.random.default_rng(2))
        assert QuditOps.equal_up_to_phase(np.exp(0.7j) * psi.amplitudes, psi)

    def test_different_states_differ(self):
        """|0> and |1> are not equal up to phase"""
        assert not QuditOps.equal_up_to_phase(QuditOps.basis_state(3, 0), QuditOps.basis_state(3, 1))
