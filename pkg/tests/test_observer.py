"""
Testes para projeto de ganho, estimadores e simulação acoplada.
"""

import math
import pytest
import sys
import os

import numpy as np
from scipy import linalg

# Adicionar src ao path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from analysis.observer import (
    ExplicitGain,
    InputSchedule,
    RiccatiGain,
    ShiftGain,
    build_general_estimator,
    build_identity_estimator,
    build_modal_system,
    check_estimator_stability,
    design_gain,
    designed_slow_rate,
    simulate,
    solve_differential_riccati,
    verify_estimator_conditions
)
from analysis.sensing import InteriorPoint, build_output_matrix
from analysis.spectral import Rectangle, build_mode_set
from utils.errors import (
    ConfigurationError,
    DimensionMismatch,
    GainDesignError,
    ReconstructionRankDeficient,
    StepTooCoarse,
    SylvesterResonance,
    UndetectableSlowMode
)


UNIT = Rectangle(0.0, 1.0, 0.0, 1.0)


@pytest.fixture
def scalar_system():
    """Um único modo de taxa nula observado com C = 1."""
    return build_modal_system(build_mode_set(UNIT, 0, 0), np.array([[1.0]]))


@pytest.fixture
def square_system():
    """Quadrado unitário (1,1) deslocado por π²: taxas π², 0, 0, −π²."""
    mode_set = build_mode_set(UNIT, 1, 1, shift=math.pi ** 2)
    sensors = [InteriorPoint(0.2, 0.3), InteriorPoint(0.7, 0.6), InteriorPoint(0.4, 0.9)]
    return build_modal_system(mode_set, build_output_matrix(sensors, mode_set).matrix)


class TestModalSystem:
    """Testes para a montagem do sistema modal."""

    def test_shapes(self, square_system):
        """Testa A diagonal com as taxas e dimensões."""
        assert square_system.n == 4 and square_system.q == 3 and square_system.p == 0
        assert np.allclose(square_system.rates, [math.pi ** 2, 0.0, 0.0, -math.pi ** 2])

    def test_dimension_mismatch(self):
        """Testa C e B com formas erradas."""
        mode_set = build_mode_set(UNIT, 1, 1)
        with pytest.raises(DimensionMismatch):
            build_modal_system(mode_set, np.ones((1, 3)))
        with pytest.raises(DimensionMismatch):
            build_modal_system(mode_set, np.ones((1, 4)), np.ones((3, 1)))


class TestGainDesign:
    """Testes para o projeto de ganho no bloco lento."""

    def test_riccati_matches_algebraic_solution(self):
        """Testa o regime estacionário contra solve_continuous_are."""
        A_s = np.diag([0.5, -1.0])
        C_s = np.array([[1.0, 0.4], [0.3, -0.8]])
        P = solve_differential_riccati(A_s, C_s, 2.0)
        expected = linalg.solve_continuous_are(A_s.T, C_s.T, 2.0 * np.eye(2), np.eye(2))
        assert np.allclose(P, expected, atol=1e-7)

    def test_scalar_riccati_oracle(self, scalar_system):
        """Testa λ = 0, C = 1, ρ = 1: P = 1 e H = 1."""
        H = design_gain(scalar_system, [0], RiccatiGain(1.0))
        assert H[0, 0] == pytest.approx(1.0, abs=1e-8)

    def test_fast_rows_are_zero(self, square_system):
        """Testa que o ganho só atua nas coordenadas lentas."""
        H = design_gain(square_system, [0, 1, 2], RiccatiGain(1.0))
        assert H.shape == (4, 3)
        assert np.all(H[3] == 0.0)
        assert np.any(H[0] != 0.0)

    def test_shift_gain_places_rates(self, square_system):
        """Testa que o bloco lento de L = A − HC tem autovalores −σ★."""
        slow = [0, 1, 2]
        spec = ShiftGain(1.0)
        H = design_gain(square_system, slow, spec)
        ops = build_identity_estimator(square_system, H)
        block = ops.L[np.ix_(slow, slow)]
        assert np.allclose(np.sort(np.linalg.eigvals(block).real), [-1.0, -1.0, -1.0], atol=1e-8)
        assert designed_slow_rate(ops, square_system, slow, spec) == 1.0

    def test_shift_gain_needs_enough_sensors(self):
        """Testa ganho de deslocamento com menos sensores que modos lentos."""
        mode_set = build_mode_set(UNIT, 1, 1, shift=math.pi ** 2)
        system = build_modal_system(mode_set, build_output_matrix([InteriorPoint(0.2, 0.3)], mode_set).matrix)
        with pytest.raises(GainDesignError):
            design_gain(system, [0, 1], ShiftGain(1.0))

    def test_undetectable_slow_mode(self):
        """Testa sensor sobre a linha nodal do modo (1,0)."""
        mode_set = build_mode_set(UNIT, 1, 1, shift=math.pi ** 2)
        sensors = [InteriorPoint(0.5, 0.3), InteriorPoint(0.5, 0.8)]
        system = build_modal_system(mode_set, build_output_matrix(sensors, mode_set).matrix)

        with pytest.raises(UndetectableSlowMode) as exc_info:
            design_gain(system, [0, 1, 2], RiccatiGain(1.0))
        assert "1_0" in exc_info.value.modes

        H = design_gain(system, [0, 1, 2], RiccatiGain(1.0), allow_undetectable=True)
        assert np.all(H[2] == 0.0)
        assert np.any(H[1] != 0.0)

    def test_reference_rate_skips_dropped_modes(self):
        """Testa que o modo lento descartado (taxa nula) não zera a taxa de referência."""
        mode_set = build_mode_set(UNIT, 1, 1, shift=math.pi ** 2)
        sensors = [InteriorPoint(0.5, 0.3), InteriorPoint(0.5, 0.8)]
        system = build_modal_system(mode_set, build_output_matrix(sensors, mode_set).matrix)
        H = design_gain(system, [0, 1, 2], RiccatiGain(1.0), allow_undetectable=True)
        ops = build_identity_estimator(system, H)

        block = ops.L[np.ix_([0, 1], [0, 1])]
        expected = float(np.min(-np.linalg.eigvals(block).real))
        assert expected > 0.0
        assert designed_slow_rate(ops, system, [0, 1, 2]) == pytest.approx(expected)

    def test_explicit_gain_shape(self, square_system):
        """Testa ganho explícito com forma errada."""
        with pytest.raises(DimensionMismatch):
            design_gain(square_system, [0], ExplicitGain(((1.0,),)))
        H = design_gain(square_system, [0], ExplicitGain(tuple((0.1, 0.2, 0.3) for _ in range(4))))
        assert H.shape == (4, 3)

    def test_invalid_specs(self):
        """Testa ρ e σ★ não positivos."""
        with pytest.raises(ConfigurationError):
            RiccatiGain(0.0)
        with pytest.raises(ConfigurationError):
            ShiftGain(-1.0)


class TestEstimators:
    """Testes para estimadores identidade e geral."""

    def test_identity_residuals(self, square_system):
        """Testa que o estimador identidade satisfaz as condições exatamente."""
        H = design_gain(square_system, [0, 1, 2], RiccatiGain(1.0))
        ops = build_identity_estimator(square_system, H)
        residuals = verify_estimator_conditions(ops, square_system)
        assert residuals.passed(1e-10)

    @pytest.mark.parametrize("seed", range(100))
    def test_general_estimator_random(self, seed):
        """Testa resíduos ≤ 1e-9 e T contra solve_sylvester em casos aleatórios."""
        rng = np.random.default_rng(seed)
        mode_set = build_mode_set(UNIT, 1, 1, shift=1.0)
        system = build_modal_system(mode_set, rng.normal(size=(2, 4)), rng.normal(size=(4, 1)))
        rates = rng.uniform(-40.0, -25.0, size=4)
        H = rng.normal(size=(4, 2))

        ops = build_general_estimator(system, rates, H)
        residuals = verify_estimator_conditions(ops, system)
        assert residuals.passed(1e-9)

        expected_T = linalg.solve_sylvester(-np.diag(rates), system.A, H @ system.C)
        assert np.allclose(ops.T, expected_T, rtol=1e-8, atol=1e-12)

    def test_resonance(self, square_system):
        """Testa taxa do estimador igual a um autovalor do sistema."""
        with pytest.raises(SylvesterResonance) as exc_info:
            build_general_estimator(square_system, [-5.0, 0.0, -7.0, -9.0], np.ones((4, 3)))
        assert exc_info.value.system_rate == 0.0
        assert exc_info.value.mode == "0_1"

    def test_rank_deficient(self):
        """Testa (C; T) sem posto completo."""
        mode_set = build_mode_set(UNIT, 1, 1)
        system = build_modal_system(mode_set, np.ones((1, 4)))
        with pytest.raises(ReconstructionRankDeficient) as exc_info:
            build_general_estimator(system, [-50.0], np.ones((1, 1)))
        assert exc_info.value.required == 4

    def test_general_gain_shape(self, square_system):
        """Testa H do estimador geral com forma errada."""
        with pytest.raises(DimensionMismatch):
            build_general_estimator(square_system, [-5.0, -6.0], np.ones((3, 3)))

    def test_general_reference_rate(self, square_system):
        """Testa a taxa de referência do estimador geral: menor −Re(autovalor de L)."""
        ops = build_general_estimator(square_system, [-30.0, -31.0, -32.0, -33.0], np.eye(4, 3) + 0.5)
        assert designed_slow_rate(ops, square_system, [0]) == pytest.approx(30.0)


class TestStability:
    """Testes para a checagem de estabilidade de L."""

    def test_stable(self):
        """Testa L = diag(−1, −2)."""
        check = check_estimator_stability(np.diag([-1.0, -2.0]), 5.0)
        assert check.stable
        assert check.final == pytest.approx(math.exp(-5.0), rel=1e-6)

    def test_unstable(self):
        """Testa L com autovalor positivo e L nula."""
        assert not check_estimator_stability(np.diag([0.5]), 5.0).stable
        assert not check_estimator_stability(np.zeros((2, 2)), 5.0).stable


class TestSimulation:
    """Testes para a simulação planta/observador."""

    def test_scalar_error_decay(self, scalar_system):
        """Testa e(t) = e^{−t} para o oráculo escalar."""
        H = design_gain(scalar_system, [0], RiccatiGain(1.0))
        ops = build_identity_estimator(scalar_system, H)
        record = simulate(scalar_system, ops, np.array([1.0]), t_final=5.0, dt=0.01)
        error = record.estimation_error()[:, 0]
        assert np.max(np.abs(error - np.exp(-record.times))) <= 1e-8
        assert record.times[-1] == pytest.approx(5.0)

    def test_observer_error_identity(self, scalar_system):
        """Testa Tz − w = z − ẑ para o estimador identidade."""
        ops = build_identity_estimator(scalar_system, np.array([[2.0]]))
        record = simulate(scalar_system, ops, np.array([1.0]), np.array([0.5]), t_final=1.0, dt=0.01)
        assert np.allclose(record.observer_error(ops.T), record.estimation_error())

    def test_observer_error_follows_l(self):
        """Testa Tz − w = e^{Lt}(Tz₀ − w₀) com entrada, e z − ẑ = N(Tz − w)."""
        rng = np.random.default_rng(3)
        mode_set = build_mode_set(Rectangle(0.0, 4.0, 0.0, 4.0), 1, 1, shift=1.0)
        system = build_modal_system(mode_set, rng.normal(size=(2, 4)), rng.normal(size=(4, 1)))
        ops = build_general_estimator(system, [-2.0, -3.0, -4.0, -5.0], rng.normal(size=(4, 2)))
        z0, w0 = rng.normal(size=4), rng.normal(size=4)
        inputs = InputSchedule((0.0,), ((1.0,),))

        record = simulate(system, ops, z0, w0, inputs=inputs, t_final=2.0, dt=0.01)
        observer_error = record.observer_error(ops.T)
        e0 = ops.T @ z0 - w0
        expected = np.array([linalg.expm(ops.L * t) @ e0 for t in record.times])
        assert np.max(np.abs(observer_error - expected)) <= 1e-6

        scale = max(1.0, float(np.max(np.abs(record.state_coeffs))))
        reconstructed = observer_error @ ops.N.T
        assert np.max(np.abs(record.estimation_error() - reconstructed)) <= 1e-7 * scale

    def test_superposition(self, square_system):
        """Testa linearidade em (z₀, w₀) sem entrada."""
        H = design_gain(square_system, [0, 1, 2], RiccatiGain(1.0))
        ops = build_identity_estimator(square_system, H)
        rng = np.random.default_rng(5)
        z1, z2, w1, w2 = (rng.normal(size=4) for _ in range(4))
        a, b = 0.7, -1.3

        first = simulate(square_system, ops, z1, w1, t_final=0.5, dt=0.01)
        second = simulate(square_system, ops, z2, w2, t_final=0.5, dt=0.01)
        combined = simulate(square_system, ops, a * z1 + b * z2, a * w1 + b * w2, t_final=0.5, dt=0.01)

        for name in ("state_coeffs", "observer_coeffs", "estimate_coeffs", "outputs"):
            expected = a * getattr(first, name) + b * getattr(second, name)
            scale = max(1.0, float(np.max(np.abs(expected))))
            assert np.max(np.abs(getattr(combined, name) - expected)) <= 1e-10 * scale

    def test_forced_plant_is_exact(self):
        """Testa entrada constante: z(t) = 1 − e^{−t} para taxa −1."""
        mode_set = build_mode_set(UNIT, 0, 0, shift=-1.0)
        system = build_modal_system(mode_set, np.array([[1.0]]), np.array([[1.0]]))
        ops = build_identity_estimator(system, np.array([[1.0]]))
        inputs = InputSchedule((0.0,), ((1.0,),))
        record = simulate(system, ops, np.array([0.0]), np.array([0.0]), inputs=inputs, t_final=2.0, dt=0.01)
        assert record.state_coeffs[-1, 0] == pytest.approx(1.0 - math.exp(-2.0), abs=1e-12)
        assert np.max(np.abs(record.estimation_error())) <= 1e-8

    def test_piecewise_input_switch(self):
        """Testa troca da entrada no meio de um passo."""
        mode_set = build_mode_set(UNIT, 0, 0)
        system = build_modal_system(mode_set, np.array([[1.0]]), np.array([[1.0]]))
        ops = build_identity_estimator(system, np.array([[1.0]]))
        inputs = InputSchedule((0.0, 0.505), ((1.0,), (0.0,)))
        record = simulate(system, ops, np.array([0.0]), inputs=inputs, t_final=1.0, dt=0.01, check_step=False)
        assert record.state_coeffs[-1, 0] == pytest.approx(0.505, abs=1e-12)

    def test_step_too_coarse(self, scalar_system):
        """Testa ganho rígido com passo grande demais."""
        ops = build_identity_estimator(scalar_system, np.array([[1000.0]]))
        with pytest.raises(StepTooCoarse):
            simulate(scalar_system, ops, np.array([1.0]), t_final=0.05, dt=0.01)

    def test_invalid_arguments(self, scalar_system):
        """Testa t_final, dt e dimensões inválidos."""
        ops = build_identity_estimator(scalar_system, np.array([[1.0]]))
        with pytest.raises(ConfigurationError):
            simulate(scalar_system, ops, np.array([1.0]), t_final=0.0, dt=0.01)
        with pytest.raises(ConfigurationError):
            simulate(scalar_system, ops, np.array([1.0]), t_final=1.0, dt=-0.1)
        with pytest.raises(DimensionMismatch):
            simulate(scalar_system, ops, np.array([1.0, 2.0]), t_final=1.0, dt=0.1)

    def test_input_schedule_validation(self):
        """Testa tabelas de entrada inconsistentes."""
        with pytest.raises(ConfigurationError):
            InputSchedule((0.0, 1.0), ((1.0,),))
        with pytest.raises(ConfigurationError):
            InputSchedule((1.0, 0.5), ((1.0,), (2.0,)))
        schedule = InputSchedule((0.5,), ((3.0,),))
        assert schedule.value_at(0.1)[0] == 0.0
        assert schedule.value_at(0.7)[0] == 3.0


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
