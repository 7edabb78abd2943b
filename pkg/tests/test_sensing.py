"""
Testes para os modelos de sensores e o operador de saída.
"""

import math
import pytest
import sys
import os

import numpy as np

# Adicionar src ao path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from analysis.sensing import (
    BoundaryPoint,
    BoundaryZone,
    Filament,
    InteriorPoint,
    InteriorZone,
    SymmetricTriangle,
    Tabulated,
    Uniform,
    actuator_matrix,
    build_output_matrix,
    evaluate_output,
    sensor_coefficient,
    sensor_coefficients
)
from analysis.spectral import Mode, Rectangle, build_mode_set, eigenfunction_value
from utils.errors import DimensionMismatch, EmptySensorSet, GeometryError


UNIT = Rectangle(0.0, 1.0, 0.0, 1.0)


class TestProfiles:
    """Testes para perfis de ponderação."""

    def test_uniform(self):
        """Testa o perfil constante."""
        values = Uniform().evaluate(((0.0, 1.0),), (np.array([0.2, 0.9]),))
        assert list(values) == [1.0, 1.0]
        assert Uniform().breakpoints(((0.0, 1.0), (0.0, 2.0))) == ((), ())

    def test_triangle_peak_and_edges(self):
        """Testa a tenda: 1 no centro, 0 nas bordas do suporte."""
        profile = SymmetricTriangle((0.5,))
        values = profile.evaluate(((0.0, 1.0),), (np.array([0.0, 0.25, 0.5, 1.0]),))
        assert list(values) == pytest.approx([0.0, 0.5, 1.0, 0.0])
        assert profile.breakpoints(((0.0, 1.0),)) == ((0.5,),)

    def test_off_center_triangle(self):
        """Testa tenda fora do meio do suporte: meia-largura até a borda mais próxima."""
        profile = SymmetricTriangle((0.25,))
        values = profile.evaluate(((0.0, 1.0),), (np.array([0.0, 0.125, 0.25, 0.5, 0.75]),))
        assert list(values) == pytest.approx([0.0, 0.5, 1.0, 0.0, 0.0])
        assert profile.breakpoints(((0.0, 1.0),)) == ((0.25, 0.5),)

    def test_triangle_center_on_edge(self):
        """Testa centro na borda do suporte (meia-largura nula)."""
        with pytest.raises(GeometryError):
            SymmetricTriangle((0.0,)).evaluate(((0.0, 1.0),), (np.zeros(1),))

    def test_triangle_dimension_mismatch(self):
        """Testa centro com dimensão errada."""
        with pytest.raises(GeometryError):
            SymmetricTriangle((0.5,)).evaluate(((0.0, 1.0), (0.0, 1.0)), (np.zeros(1), np.zeros(1)))

    def test_tabulated_interpolation(self):
        """Testa interpolação linear de um perfil 1D."""
        profile = Tabulated((0.0, 1.0, 0.0))
        values = profile.evaluate(((0.0, 2.0),), (np.array([0.5, 1.0, 1.5]),))
        assert list(values) == pytest.approx([0.5, 1.0, 0.5])
        assert profile.breakpoints(((0.0, 2.0),)) == ((1.0,),)

    def test_tabulated_2d(self):
        """Testa interpolação bilinear de um perfil 2D."""
        profile = Tabulated(((0.0, 0.0), (1.0, 1.0)))
        values = profile.evaluate(((0.0, 1.0), (0.0, 1.0)), (np.array([0.5]), np.array([0.3])))
        assert values[0] == pytest.approx(0.5)

    def test_tabulated_invalid(self):
        """Testa tabelas inválidas."""
        with pytest.raises(GeometryError):
            Tabulated((1.0,))
        with pytest.raises(GeometryError):
            Tabulated((1.0, -1.0))


class TestSensorCoefficients:
    """Testes para ⟨sensor, φ_m⟩."""

    def test_point_equals_eigenfunction(self):
        """Testa que o sensor pontual lê o valor da autofunção."""
        modes = [Mode(0, 0), Mode(1, 2), Mode(3, 1)]
        coefficients = sensor_coefficients(InteriorPoint(0.3, 0.8), modes, UNIT)
        expected = [eigenfunction_value(UNIT, m, (0.3, 0.8)) for m in modes]
        assert list(coefficients) == pytest.approx(expected, abs=1e-15)

    def test_boundary_point(self):
        """Testa o sensor pontual na fronteira."""
        assert sensor_coefficient(BoundaryPoint(0.0, 0.5), Mode(1, 0), UNIT) == pytest.approx(math.sqrt(2.0))

    def test_uniform_zone_closed_form(self):
        """Testa zona uniforme contra a integral fechada de cos(πx)."""
        zone = InteriorZone(Rectangle(0.1, 0.4, 0.2, 0.6))
        value = sensor_coefficient(zone, Mode(1, 0), UNIT)
        expected = math.sqrt(2.0) * (math.sin(0.4 * math.pi) - math.sin(0.1 * math.pi)) / math.pi * 0.4
        assert value == pytest.approx(expected, abs=1e-12)

    def test_zone_constant_mode(self):
        """Testa que o modo constante dá a área ponderada."""
        zone = InteriorZone(Rectangle(0.2, 0.6, 0.1, 0.6), SymmetricTriangle((0.4, 0.35)))
        value = sensor_coefficient(zone, Mode(0, 0), UNIT)
        assert value == pytest.approx(0.25 * zone.support.area, abs=1e-12)

    def test_symmetric_zone_vanishes_on_nodal_line(self):
        """Testa zona simétrica centrada numa linha nodal."""
        zone = InteriorZone(Rectangle(0.4, 0.6, 0.1, 0.3))
        assert abs(sensor_coefficient(zone, Mode(1, 0), UNIT)) <= 1e-12
        zone = InteriorZone(Rectangle(0.4, 0.6, 0.1, 0.3), SymmetricTriangle((0.5, 0.2)))
        assert abs(sensor_coefficient(zone, Mode(1, 1), UNIT)) <= 1e-12

    def test_off_center_triangle_zone_vanishes(self):
        """Testa zona com tenda descentrada sobre a linha nodal de cos(πx)."""
        zone = InteriorZone(Rectangle(0.3, 0.9, 0.2, 0.4), SymmetricTriangle((0.5, 0.3)))
        assert abs(sensor_coefficient(zone, Mode(1, 0), UNIT)) <= 1e-10
        assert abs(sensor_coefficient(zone, Mode(0, 1), UNIT)) > 1e-3

    def test_off_center_triangle_boundary_zone(self):
        """Testa zona de fronteira com tenda descentrada em x = 0.5."""
        zone = BoundaryZone("bottom", 0.0, 0.2, 0.9, SymmetricTriangle((0.5,)))
        assert abs(sensor_coefficient(zone, Mode(1, 0), UNIT)) <= 1e-10

    def test_boundary_zone_closed_form(self):
        """Testa zona na aresta inferior: integral de cos ao longo da aresta."""
        zone = BoundaryZone("bottom", 0.0, 0.0, 0.5)
        value = sensor_coefficient(zone, Mode(1, 3), UNIT)
        expected = 2.0 * math.sin(0.5 * math.pi) / math.pi
        assert value == pytest.approx(expected, abs=1e-12)

    def test_boundary_zone_vertical(self):
        """Testa zona na aresta direita."""
        zone = BoundaryZone("right", 1.0, 0.25, 0.75)
        assert abs(sensor_coefficient(zone, Mode(0, 1), UNIT)) <= 1e-12
        assert sensor_coefficient(zone, Mode(0, 0), UNIT) == pytest.approx(0.5)

    def test_boundary_zone_shrinks_to_point(self):
        """Testa que a média sobre [s − ε, s + ε] tende à leitura pontual na aresta."""
        mode = Mode(2, 1)
        point_value = sensor_coefficient(BoundaryPoint(0.3, 0.0), mode, UNIT)
        errors = []
        for eps in (1e-1, 1e-2, 1e-3):
            zone = BoundaryZone("bottom", 0.0, 0.3 - eps, 0.3 + eps)
            errors.append(abs(sensor_coefficient(zone, mode, UNIT) / (2.0 * eps) - point_value))
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] <= 1e-4

    def test_filament_matches_segment(self):
        """Testa que um filamento horizontal se comporta como uma zona de fronteira deslocada."""
        filament = Filament(((0.0, 0.3), (0.5, 0.3)))
        value = sensor_coefficient(filament, Mode(1, 1), UNIT)
        expected = math.sqrt(2.0) * math.sin(0.5 * math.pi) / math.pi * math.sqrt(2.0) * math.cos(0.3 * math.pi)
        assert value == pytest.approx(expected, abs=1e-12)

    def test_filament_polyline_length(self):
        """Testa o comprimento de uma poligonal e o modo constante."""
        filament = Filament(((0.1, 0.1), (0.4, 0.5), (0.4, 0.9)))
        assert filament.length == pytest.approx(0.9)
        assert sensor_coefficient(filament, Mode(0, 0), UNIT) == pytest.approx(0.9)

    def test_invalid_filament(self):
        """Testa filamento com um único ponto."""
        with pytest.raises(GeometryError):
            Filament(((0.1, 0.1),))

    def test_invalid_boundary_zone(self):
        """Testa aresta desconhecida e intervalo degenerado."""
        with pytest.raises(GeometryError):
            BoundaryZone("middle", 0.0, 0.1, 0.2)
        with pytest.raises(GeometryError):
            BoundaryZone("top", 1.0, 0.4, 0.4)


class TestOutputOperator:
    """Testes para o operador de saída C."""

    def test_shape_and_rows(self):
        """Testa C (q × N) com uma linha por sensor."""
        mode_set = build_mode_set(UNIT, 2, 2)
        sensors = [InteriorPoint(0.2, 0.3), InteriorZone(Rectangle(0.5, 0.7, 0.5, 0.9))]
        operator = build_output_matrix(sensors, mode_set)
        assert operator.matrix.shape == (2, 9)
        assert operator.q == 2 and operator.n_modes == 9
        assert list(operator.matrix[0]) == pytest.approx(list(mode_set.values([0.2], [0.3])[0]))

    def test_empty_sensor_set(self):
        """Testa que a lista vazia é rejeitada."""
        with pytest.raises(EmptySensorSet):
            build_output_matrix([], build_mode_set(UNIT, 1, 1))

    def test_evaluate_output(self):
        """Testa y = C·a e a checagem de dimensão."""
        mode_set = build_mode_set(UNIT, 1, 1)
        operator = build_output_matrix([InteriorPoint(0.0, 0.0)], mode_set)
        a = np.array([1.0, 0.0, 0.0, 0.5])
        assert evaluate_output(operator, a)[0] == pytest.approx(1.0 + 0.5 * 2.0)
        with pytest.raises(DimensionMismatch):
            evaluate_output(operator, np.ones(3))

    def test_actuator_matrix(self):
        """Testa B (N × p) como transposta do operador de sensores."""
        mode_set = build_mode_set(UNIT, 1, 1)
        actuators = [InteriorPoint(0.25, 0.5), InteriorPoint(0.75, 0.5)]
        B = actuator_matrix(actuators, mode_set)
        C = build_output_matrix(actuators, mode_set).matrix
        assert B.shape == (4, 2)
        assert np.array_equal(B, C.T)
        assert actuator_matrix([], mode_set).shape == (4, 0)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
