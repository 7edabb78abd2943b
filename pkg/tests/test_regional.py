"""
Testes para normas regionais, ajuste de decaimento e veredito.
"""

import math
import pytest
import sys
import os

import numpy as np

# Adicionar src ao path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from analysis.observer import TrajectoryRecord
from analysis.regional import (
    DecayFit,
    NormKind,
    error_floor,
    error_norm_series,
    field_norm,
    fit_decay,
    regional_gram,
    regional_verdict
)
from analysis.spectral import Mode, Rectangle, build_mode_set
from utils.errors import DimensionMismatch, InsufficientSamples, NonPositiveSamples


UNIT = Rectangle(0.0, 1.0, 0.0, 1.0)
LEFT_HALF = Rectangle(0.0, 0.5, 0.0, 1.0)


def _record(errors: np.ndarray, times: np.ndarray) -> TrajectoryRecord:
    """Trajetória sintética com estimativa nula (o erro é o próprio estado)."""
    zeros = np.zeros_like(errors)
    return TrajectoryRecord(
        times=times,
        state_coeffs=errors,
        observer_coeffs=zeros,
        estimate_coeffs=zeros,
        outputs=np.zeros((len(times), 1))
    )


class TestRegionalGram:
    """Testes para as matrizes de Gram L² e H¹."""

    def test_full_domain_l2_is_identity(self):
        """Testa ortonormalidade quando ω = Ω."""
        mode_set = build_mode_set(UNIT, 3, 3)
        gram = regional_gram(mode_set, UNIT, NormKind.L2)
        assert np.max(np.abs(gram - np.eye(mode_set.n_modes))) <= 1e-9

    def test_full_domain_h1_is_diagonal(self):
        """Testa H¹ em Ω: diag(1 − λ_m)."""
        mode_set = build_mode_set(UNIT, 2, 2)
        gram = regional_gram(mode_set, UNIT, NormKind.H1)
        expected = np.diag(1.0 - np.asarray(mode_set.eigenvalues))
        assert np.max(np.abs(gram - expected)) <= 1e-8

    def test_read_only_and_cached(self):
        """Testa que a matriz é compartilhada e somente-leitura."""
        mode_set = build_mode_set(UNIT, 1, 1)
        gram = regional_gram(mode_set, LEFT_HALF, NormKind.L2)
        assert regional_gram(mode_set, LEFT_HALF, NormKind.L2) is gram
        with pytest.raises(ValueError):
            gram[0, 0] = 2.0


class TestFieldNorm:
    """Testes para ‖Σ c_m φ_m‖ sobre uma sub-região."""

    def test_constant_mode(self):
        """Testa φ₀₀ = 1: norma √|ω| em L² e H¹."""
        mode_set = build_mode_set(UNIT, 1, 1)
        coefficients = np.zeros(mode_set.n_modes)
        coefficients[mode_set.index(Mode(0, 0))] = 1.0
        region = Rectangle(0.2, 0.6, 0.1, 0.6)
        assert field_norm(coefficients, mode_set, region, NormKind.L2) == pytest.approx(math.sqrt(0.2))
        assert field_norm(coefficients, mode_set, region, NormKind.H1) == pytest.approx(math.sqrt(0.2))

    def test_cosine_on_half(self):
        """Testa o modo (1,0) na metade esquerda: 1/2 em L² e 1/2 + π²/2 em H¹."""
        mode_set = build_mode_set(UNIT, 1, 1)
        coefficients = np.zeros(mode_set.n_modes)
        coefficients[mode_set.index(Mode(1, 0))] = 1.0
        assert field_norm(coefficients, mode_set, LEFT_HALF, "L2") ** 2 == pytest.approx(0.5)
        assert field_norm(coefficients, mode_set, LEFT_HALF, "H1") ** 2 == pytest.approx(0.5 + math.pi ** 2 / 2)

    def test_dimension_mismatch(self):
        """Testa coeficientes com tamanho errado."""
        mode_set = build_mode_set(UNIT, 1, 1)
        with pytest.raises(DimensionMismatch):
            field_norm(np.ones(3), mode_set, UNIT)


class TestErrorSeries:
    """Testes para as séries temporais de erro."""

    def test_estimate_series(self):
        """Testa ‖z − ẑ‖ em L² com Gram identidade."""
        mode_set = build_mode_set(UNIT, 1, 1)
        errors = np.array([[3.0, 0.0, 4.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
        series = error_norm_series(_record(errors, np.array([0.0, 1.0])), mode_set, UNIT, NormKind.L2)
        assert list(series) == pytest.approx([5.0, 0.0], abs=1e-8)

    def test_observer_series_needs_t(self):
        """Testa o erro do observador sem T."""
        mode_set = build_mode_set(UNIT, 1, 1)
        record = _record(np.ones((2, 4)), np.array([0.0, 1.0]))
        with pytest.raises(DimensionMismatch):
            error_norm_series(record, mode_set, UNIT, target="observer")
        series = error_norm_series(record, mode_set, UNIT, NormKind.L2, target="observer", T=np.eye(4))
        assert list(series) == pytest.approx([2.0, 2.0], abs=1e-8)

    def test_state_series(self):
        """Testa a norma do próprio estado, usada como escala do piso numérico."""
        mode_set = build_mode_set(UNIT, 1, 1)
        times = np.array([0.0, 1.0])
        state = np.array([[0.0, 6.0, 8.0, 0.0], [1.0, 0.0, 0.0, 0.0]])
        record = TrajectoryRecord(
            times=times,
            state_coeffs=state,
            observer_coeffs=state,
            estimate_coeffs=state,
            outputs=np.zeros((2, 1))
        )
        assert list(error_norm_series(record, mode_set, UNIT, NormKind.L2)) == pytest.approx([0.0, 0.0])
        assert list(error_norm_series(record, mode_set, UNIT, NormKind.L2, target="state")) == pytest.approx(
            [10.0, 1.0], abs=1e-8
        )

    def test_nested_regions(self):
        """Testa ω′ ⊆ ω ⇒ ‖e‖_ω′ ≤ ‖e‖_ω em L² e H¹."""
        mode_set = build_mode_set(UNIT, 3, 3)
        rng = np.random.default_rng(7)
        errors = rng.normal(size=(5, mode_set.n_modes))
        record = _record(errors, np.arange(5.0))
        inner = Rectangle(0.2, 0.5, 0.3, 0.6)
        middle = Rectangle(0.1, 0.7, 0.2, 0.9)
        for kind in (NormKind.L2, NormKind.H1):
            small = error_norm_series(record, mode_set, inner, kind)
            medium = error_norm_series(record, mode_set, middle, kind)
            full = error_norm_series(record, mode_set, UNIT, kind)
            assert np.all(small <= medium * (1 + 1e-12))
            assert np.all(medium <= full * (1 + 1e-12))

    def test_wrong_basis(self):
        """Testa série com base de tamanho diferente."""
        record = _record(np.ones((2, 4)), np.array([0.0, 1.0]))
        with pytest.raises(DimensionMismatch):
            error_norm_series(record, build_mode_set(UNIT, 2, 2), UNIT)


class TestDecayFit:
    """Testes para o ajuste log-linear e o patamar."""

    def test_exact_exponential(self):
        """Testa 3·e^{−2t}: σ = 2, F = 3, janela das últimas 21 amostras."""
        times = np.linspace(0.0, 10.0, 101)
        fit = fit_decay(times, 3.0 * np.exp(-2.0 * times))
        assert fit.sigma == pytest.approx(2.0, rel=1e-9)
        assert fit.F == pytest.approx(3.0, rel=1e-7)
        assert fit.rms_residual <= 1e-9
        assert fit.window == (pytest.approx(8.0), pytest.approx(10.0), 21)

    def test_insufficient_samples(self):
        """Testa janela com menos de 3 amostras."""
        with pytest.raises(InsufficientSamples):
            fit_decay(np.arange(5.0), np.ones(5))

    def test_non_positive_samples(self):
        """Testa janela sem amostras positivas."""
        times = np.linspace(0.0, 1.0, 50)
        with pytest.raises(NonPositiveSamples):
            fit_decay(times, np.zeros(50))

    def test_noise_plateau_excluded(self):
        """Testa que amostras no nível de arredondamento do estado não entram no ajuste."""
        times = np.linspace(0.0, 10.0, 101)
        values = np.where(times <= 9.0 + 1e-9, 3.0 * np.exp(-2.0 * times), 5e-10)
        scale = np.ones_like(times)

        fit = fit_decay(times, values, scale=scale)
        assert fit.sigma == pytest.approx(2.0, rel=1e-9)
        assert fit.window == (pytest.approx(8.0), pytest.approx(10.0), 21)

        unscaled = fit_decay(times, values)
        assert abs(unscaled.sigma - 2.0) > 0.2

    def test_only_noise_in_window(self):
        """Testa janela inteira abaixo do piso numérico."""
        times = np.linspace(0.0, 20.0, 201)
        values = np.where(times < 10.0, 12.0 * np.exp(-times), 1e-6)
        scale = np.full_like(times, 5e4)
        with pytest.raises(NonPositiveSamples):
            fit_decay(times, values, scale=scale)
        assert fit_decay(times, values).sigma == pytest.approx(0.0, abs=1e-9)

    def test_stable_under_small_perturbation(self):
        """Testa que uma perturbação multiplicativa de 1% muda σ em menos de 5%."""
        times = np.linspace(0.0, 10.0, 101)
        clean = 3.0 * np.exp(-2.0 * times)
        rng = np.random.default_rng(11)
        noisy = clean * (1.0 + 0.01 * rng.uniform(-1.0, 1.0, size=times.size))
        assert fit_decay(times, noisy).sigma == pytest.approx(fit_decay(times, clean).sigma, rel=0.05)

    def test_floor(self):
        """Testa o máximo da fração final."""
        values = np.array([5.0, 4.0, 3.0, 2.0, 1.0, 0.5, 0.25, 0.2, 0.1, 0.3])
        assert error_floor(values) == 0.3
        assert error_floor(values, tail=0.5) == 0.5
        with pytest.raises(InsufficientSamples):
            error_floor(np.array([]))


class TestVerdict:
    """Testes para a regra do veredito regional."""

    @staticmethod
    def _fit(sigma: float) -> DecayFit:
        return DecayFit(sigma=sigma, F=1.0, rms_residual=0.0, window=(8.0, 10.0, 21))

    def test_positive(self):
        """Testa decaimento rápido e patamar baixo."""
        assert regional_verdict(self._fit(0.95), 1e-5, 1.0, 1.0)

    def test_slow_decay(self):
        """Testa σ abaixo de 0.9·σ_ref."""
        assert not regional_verdict(self._fit(0.5), 1e-5, 1.0, 1.0)

    def test_high_floor(self):
        """Testa patamar acima de 10⁻³·‖e(0)‖."""
        assert not regional_verdict(self._fit(2.0), 0.1, 1.0, 1.0)

    def test_without_fit(self):
        """Testa que sem ajuste vale só o patamar."""
        assert regional_verdict(None, 1e-12, 1.0, 1.0)
        assert not regional_verdict(None, 0.5, 1.0, 1.0)

    def test_zero_initial_error(self):
        """Testa erro inicial nulo."""
        assert not regional_verdict(self._fit(2.0), 0.0, 0.0, 1.0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
