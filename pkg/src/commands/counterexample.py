"""
Comando `counterexample`.
Exibe um sensor que não é estratégico para Ω mas é estratégico para ω, e
compara o erro do observador projetado em cada base.
"""

import math
from typing import Any, Dict, Iterator, Optional, Sequence

import structlog

from analysis.sensing import InteriorPoint, SensorSpec
from analysis.spectral import Point
from utils.errors import ScenarioInfeasible
from utils.scenario import Scenario, parse_scenario
from .base import CommandGroup, Sections, command
from .pipeline import (
    ScenarioModel,
    build_estimator,
    build_model,
    global_basis,
    norm_series,
    reference_rate,
    regional_basis,
    run_simulation,
    sensors_section,
    state_norm_series,
    strategic_report,
    summaries_section,
    verdict_for,
    verdict_label
)

logger = structlog.get_logger()

GOLDEN_FRACTION = 0.618

# Ω = ]0,4[×]0,1[, ω = ]0,2[×]0,1[ e c = π²/16: o modo (1,0) de Ω fica congelado
# e se anula em x = 2, onde o primeiro modo de ω não se anula.
BUILTIN_SCENARIO = {
    "domain.x_min": 0.0,
    "domain.x_max": 4.0,
    "domain.y_min": 0.0,
    "domain.y_max": 1.0,
    "region.x_min": 0.0,
    "region.x_max": 2.0,
    "region.y_min": 0.0,
    "region.y_max": 1.0,
    "system.shift": math.pi ** 2 / 16,
    "truncation.n1": 4,
    "truncation.n2": 1,
    "slow.sigma_min": 2.5,
    "gain.kind": "riccati",
    "gain.rho": 1.0,
    "gain.allow_undetectable": True,
    "time.t_final": 20.0,
    "time.dt": 0.01,
}


def builtin_scenario(defaults: Optional[Dict[str, Any]] = None) -> Scenario:
    """Cenário embutido do contraexemplo (sem sensores: a posição é escolhida automaticamente)."""
    return parse_scenario(BUILTIN_SCENARIO, defaults=defaults)


def candidate_points(model: ScenarioModel) -> Iterator[Point]:
    """
    Pontos sobre as linhas nodais dos modos lentos de Ω, na ordem dos modos.

    Para o modo (i, j) as linhas verticais ficam em x_min + (k + ½)·L₁/i e são
    percorridas à altura áurea; as horizontais, de forma análoga.
    """
    domain = model.mode_set.domain
    golden_x = domain.x_min + GOLDEN_FRACTION * domain.width
    golden_y = domain.y_min + GOLDEN_FRACTION * domain.height
    for index in model.slow:
        mode = model.mode_set.modes[index]
        for k in range(mode.i):
            yield (domain.x_min + (k + 0.5) * domain.width / mode.i, golden_y)
        for k in range(mode.j):
            yield (golden_x, domain.y_min + (k + 0.5) * domain.height / mode.j)


def verdict_pair(scenario: Scenario, sensors: Sequence[SensorSpec]) -> Dict[str, Any]:
    """Relatórios estratégicos global e regional para um conjunto de sensores."""
    reports = {}
    for name, basis in (("global", global_basis(scenario)), ("regional", regional_basis(scenario))):
        model = build_model(scenario, basis, sensors)
        reports[name] = strategic_report(scenario, model)
    return reports


def find_contrast_sensor(scenario: Scenario) -> SensorSpec:
    """
    Primeiro ponto sobre uma linha nodal lenta de Ω que é estratégico só para ω.

    Raises:
        ScenarioInfeasible: Se nenhum candidato exibir o contraste
    """
    layout = build_model(scenario, global_basis(scenario), [InteriorPoint(*scenario.domain.center)])
    for point in candidate_points(layout):
        if not scenario.domain.contains(point):
            continue
        sensor = InteriorPoint(*point)
        reports = verdict_pair(scenario, [sensor])
        if not reports["global"].verdict and reports["regional"].verdict:
            logger.info("Sensor de contraste encontrado", x=point[0], y=point[1])
            return sensor

    raise ScenarioInfeasible(
        "Nenhuma posição sobre as linhas nodais lentas de Ω é estratégica para ω",
        field="region.x_min"
    )


def _run(scenario: Scenario, model: ScenarioModel, regions) -> Dict[str, Any]:
    ops = build_estimator(scenario, model, allow_undetectable=True)
    rate = reference_rate(scenario, model, ops)
    record = run_simulation(scenario, model, ops)
    series = norm_series(record, model.mode_set, regions)
    summaries = summaries_section(record.times, series, state_norm_series(record, model.mode_set, regions))

    verdicts = {}
    for name, label in (("omega", "ω"), ("Omega", "Ω")):
        key = f"err_H1_{name}"
        if key in summaries:
            verdicts[name] = verdict_label(verdict_for(summaries[key], rate), label)

    return {
        "basis": model.basis.kind.value,
        "reference_rate": rate,
        "series": {name: s.to_dict() for name, s in summaries.items()},
        "verdicts": verdicts,
    }


class CounterexampleCommands(CommandGroup):
    """Contraste entre sensores estratégicos para Ω e para ω."""

    @command("counterexample")
    async def counterexample(self, scenario: Scenario) -> Sections:
        """
        Usa os sensores do cenário ou, sem eles, escolhe um ponto de contraste.

        O par de vereditos (global, regional) vai para o relatório; o contraste é
        exibido quando o par é (falso, verdadeiro).
        """
        if scenario.sensors:
            sensors = list(scenario.sensors)
            placement = "explicit"
        else:
            sensors = [find_contrast_sensor(scenario)]
            placement = "auto"

        reports = verdict_pair(scenario, sensors)
        pair = {name: report.verdict for name, report in reports.items()}
        await logger.ainfo("Par de vereditos", placement=placement, **pair)

        global_model = build_model(scenario, global_basis(scenario), sensors)
        regional_model = build_model(scenario, regional_basis(scenario), sensors)
        runs = {
            "global": _run(scenario, global_model, {"omega": scenario.region, "Omega": scenario.domain}),
            "regional": _run(scenario, regional_model, {"omega": scenario.region}),
        }

        return {
            "status": "ok",
            "placement": placement,
            "sensors": sensors_section(sensors),
            "strategic": {name: report.to_dict() for name, report in reports.items()},
            "verdict_pair": pair,
            "contrast": (not pair["global"]) and pair["regional"],
            "runs": runs,
        }


async def setup(app):
    """Registra o grupo e o cenário embutido no toolkit."""
    await app.add_group(CounterexampleCommands(app))
    app.add_builtin_scenario("counterexample", builtin_scenario)
