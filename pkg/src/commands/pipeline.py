"""
Etapas compartilhadas pelos comandos.
Monta base modal, operador de saída, sistema, estimador e séries de erro a partir de um cenário.
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from analysis.observer import (
    EstimatorOperators,
    ExplicitGain,
    ModalSystem,
    TrajectoryRecord,
    build_general_estimator,
    build_identity_estimator,
    build_modal_system,
    check_estimator_stability,
    design_gain,
    designed_slow_rate,
    simulate
)
from analysis.regional import (
    DecayFit,
    NormKind,
    error_floor,
    error_norm_series,
    fit_decay,
    regional_verdict
)
from analysis.sensing import OutputOperator, SensorSpec, actuator_matrix, build_output_matrix
from analysis.spectral import EigenspaceGroup, ModeSet, Rectangle, group_by_eigenvalue
from analysis.strategic import (
    AnalysisBasis,
    StrategicReport,
    check_strategic,
    select_slow_groups,
    slow_indices
)
from utils.errors import DimensionMismatch, InsufficientSamples, NonPositiveSamples
from utils.scenario import Scenario, initial_coefficients, initial_observer, sensor_to_flat

logger = structlog.get_logger()

RESIDUAL_TOL = 1e-9
STABILITY_HORIZON_FACTOR = 50.0


@dataclass(frozen=True, eq=False)
class ScenarioModel:
    """Sistema modal de um cenário numa base (global ou regional)."""

    basis: AnalysisBasis
    mode_set: ModeSet
    groups: Tuple[EigenspaceGroup, ...]
    slow_groups: Tuple[EigenspaceGroup, ...]
    slow: Tuple[int, ...]
    output: OutputOperator
    system: ModalSystem


def global_basis(scenario: Scenario) -> AnalysisBasis:
    return AnalysisBasis.global_basis(scenario.domain)


def regional_basis(scenario: Scenario) -> AnalysisBasis:
    return AnalysisBasis.regional_basis(scenario.domain, scenario.region)


def build_model(
    scenario: Scenario,
    basis: AnalysisBasis,
    sensors: Optional[Sequence[SensorSpec]] = None
) -> ScenarioModel:
    """
    Constrói base, grupos lentos, operador de saída e sistema modal.

    Args:
        scenario: O cenário
        basis: Base da análise
        sensors: Sensores (padrão: os do cenário)

    Returns:
        ScenarioModel
    """
    mode_set = basis.mode_set(scenario.truncation, scenario.shift)
    groups = group_by_eigenvalue(mode_set, scenario.group_tol)
    slow_groups = select_slow_groups(
        groups, scenario.shift, count=scenario.slow_groups, sigma_min=scenario.sigma_min
    )
    output = build_output_matrix(scenario.sensors if sensors is None else sensors, mode_set)
    system = build_modal_system(mode_set, output.matrix, actuator_matrix(scenario.actuators, mode_set))

    logger.info(
        "Base modal construída",
        basis=basis.kind.value,
        modes=mode_set.n_modes,
        slow_groups=len(slow_groups),
        sensors=output.q
    )
    return ScenarioModel(
        basis=basis,
        mode_set=mode_set,
        groups=tuple(groups),
        slow_groups=tuple(slow_groups),
        slow=slow_indices(slow_groups),
        output=output,
        system=system
    )


def strategic_report(scenario: Scenario, model: ScenarioModel) -> StrategicReport:
    return check_strategic(
        model.output.sensors,
        model.mode_set,
        model.basis,
        groups=scenario.slow_groups,
        sigma_min=scenario.sigma_min,
        rank_tol=scenario.rank_tol,
        group_tol=scenario.group_tol
    )


def build_estimator(
    scenario: Scenario,
    model: ScenarioModel,
    *,
    allow_undetectable: Optional[bool] = None
) -> EstimatorOperators:
    """
    Monta o estimador pedido pelo cenário.

    O estimador identidade projeta H no bloco lento; o estimador geral usa
    L = diag(estimator.rates) e o ganho explícito (k × q) ou, sem ele, H = 1.
    """
    system = model.system
    allow = scenario.allow_undetectable if allow_undetectable is None else allow_undetectable

    if scenario.estimator.kind == "identity":
        H = design_gain(
            system,
            model.slow,
            scenario.gain,
            horizon=scenario.horizon,
            rank_tol=scenario.rank_tol,
            allow_undetectable=allow
        )
        return build_identity_estimator(system, H)

    rates = scenario.estimator.rates
    if isinstance(scenario.gain, ExplicitGain):
        H = scenario.gain.array
        if H.shape != (len(rates), system.q):
            raise DimensionMismatch(
                f"Ganho do estimador geral tem forma {H.shape}, esperado {(len(rates), system.q)}"
            )
    else:
        H = np.ones((len(rates), system.q))
    return build_general_estimator(system, rates, H, rank_tol=scenario.rank_tol)


def reference_rate(scenario: Scenario, model: ScenarioModel, ops: EstimatorOperators) -> float:
    return designed_slow_rate(ops, model.system, model.slow, scenario.gain, rank_tol=scenario.rank_tol)


def stability_report(scenario: Scenario, ops: EstimatorOperators, rate: float) -> Dict[str, Any]:
    """Certificado de estabilidade de L em 50/σ_ref (σ_min como piso)."""
    floor = max(rate, scenario.sigma_min, 1e-2)
    return check_estimator_stability(ops.L, STABILITY_HORIZON_FACTOR / floor).to_dict()


def run_simulation(scenario: Scenario, model: ScenarioModel, ops: EstimatorOperators) -> TrajectoryRecord:
    """Simula planta e observador com a condição inicial do cenário."""
    z0 = initial_coefficients(scenario.initial, model.mode_set, scenario.seed)
    w0 = initial_observer(scenario.initial, ops.k)
    record = simulate(
        model.system,
        ops,
        z0,
        w0,
        inputs=scenario.inputs,
        t_final=scenario.t_final,
        dt=scenario.dt
    )
    logger.info("Simulação concluída", samples=len(record.times), dt=scenario.dt)
    return record


def norm_series(
    record: TrajectoryRecord,
    mode_set: ModeSet,
    regions: Dict[str, Rectangle]
) -> Dict[str, np.ndarray]:
    """Séries `err_<norma>_<região>` para cada região nomeada, em L² e H¹."""
    series = {}
    for name, rect in regions.items():
        for kind in (NormKind.L2, NormKind.H1):
            series[f"err_{kind.value}_{name}"] = error_norm_series(record, mode_set, rect, kind)
    return series


def state_norm_series(
    record: TrajectoryRecord,
    mode_set: ModeSet,
    regions: Dict[str, Rectangle]
) -> Dict[str, np.ndarray]:
    """Norma do estado z com as mesmas chaves de `norm_series` (escala do piso numérico do ajuste)."""
    series = {}
    for name, rect in regions.items():
        for kind in (NormKind.L2, NormKind.H1):
            series[f"err_{kind.value}_{name}"] = error_norm_series(record, mode_set, rect, kind, target="state")
    return series


@dataclass(frozen=True)
class SeriesSummary:
    initial: float
    floor: float
    fit: Optional[DecayFit]
    note: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "initial": self.initial,
            "floor": self.floor,
            "fit": self.fit.to_dict() if self.fit else None,
            "note": self.note,
        }


def summarize(times: np.ndarray, values: np.ndarray, scale: Optional[np.ndarray] = None) -> SeriesSummary:
    """Norma inicial, patamar e ajuste de decaimento de uma série de erro."""
    initial = float(values[0])
    floor = error_floor(values)
    if initial == 0.0:
        return SeriesSummary(initial, floor, None, "erro inicial nulo")
    try:
        return SeriesSummary(initial, floor, fit_decay(times, values, scale=scale))
    except (InsufficientSamples, NonPositiveSamples) as e:
        return SeriesSummary(initial, floor, None, str(e))


def verdict_for(summary: SeriesSummary, rate: float) -> Optional[bool]:
    """Veredito regional (None quando o erro inicial é nulo)."""
    if summary.initial == 0.0:
        return None
    return regional_verdict(summary.fit, summary.floor, summary.initial, rate)


def verdict_label(verdict: Optional[bool], region_label: str) -> str:
    if verdict is None:
        return "undetermined"
    return f"{region_label}-observable" if verdict else "not observable"


def summaries_section(
    times: np.ndarray,
    series: Dict[str, np.ndarray],
    scales: Optional[Dict[str, np.ndarray]] = None
) -> Dict[str, SeriesSummary]:
    scales = scales or {}
    return {name: summarize(times, values, scales.get(name)) for name, values in series.items()}


def decay_sections(summaries: Dict[str, SeriesSummary]) -> Tuple[Dict, Dict, Dict]:
    """Separa fits, patamares e normas iniciais em seções do relatório."""
    decay = {name: (s.fit.to_dict() if s.fit else None) for name, s in summaries.items()}
    floors = {name: s.floor for name, s in summaries.items()}
    initial = {name: s.initial for name, s in summaries.items()}
    return decay, floors, initial


def sensors_section(sensors: Sequence[SensorSpec]) -> List[Dict[str, Any]]:
    return [sensor_to_flat(s) for s in sensors]
