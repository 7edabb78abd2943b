"""
Comandos de simulação.
`simulate` integra planta e observador e mede o decaimento do erro em ω e em Ω;
`verify` confere as condições algébricas do estimador sem simular.
"""

from typing import Any, Dict

import structlog

from analysis.observer import EstimatorOperators, verify_estimator_conditions
from utils.errors import UndetectableSlowMode, describe_error
from utils.reports import write_norm_csv, write_trajectory_csv
from utils.scenario import Scenario
from .base import CommandGroup, Sections, command
from .pipeline import (
    RESIDUAL_TOL,
    ScenarioModel,
    build_estimator,
    build_model,
    decay_sections,
    global_basis,
    norm_series,
    reference_rate,
    run_simulation,
    sensors_section,
    stability_report,
    state_norm_series,
    strategic_report,
    summaries_section,
    verdict_for,
    verdict_label
)

logger = structlog.get_logger()


def estimator_section(scenario: Scenario, model: ScenarioModel, ops: EstimatorOperators, rate: float) -> Dict[str, Any]:
    residuals = verify_estimator_conditions(ops, model.system)
    return {
        "kind": ops.kind,
        "gain": scenario.gain.kind,
        "k": ops.k,
        "reference_rate": rate,
        "residuals": residuals.to_dict(),
        "tolerance": RESIDUAL_TOL,
        "passed": residuals.passed(RESIDUAL_TOL),
        "stability": stability_report(scenario, ops, rate),
    }


class SimulationCommands(CommandGroup):
    """Simulação do observador e verificação do estimador."""

    @command("simulate")
    async def simulate(self, scenario: Scenario) -> Sections:
        """
        Simula o observador na base global e avalia o erro sobre ω e Ω.

        Modos lentos não detectáveis (sem allow_undetectable) não são falha do
        comando: o relatório traz o diagnóstico com status `undetectable`.
        """
        model = build_model(scenario, global_basis(scenario))
        strategic = {"global": strategic_report(scenario, model).to_dict()}

        try:
            ops = build_estimator(scenario, model)
        except UndetectableSlowMode as e:
            await logger.awarning("Modos lentos não detectáveis", modes=list(e.modes), margin=e.margin)
            return {
                "status": "undetectable",
                "sensors": sensors_section(scenario.sensors),
                "strategic": strategic,
                "errors": [describe_error(e)],
            }

        rate = reference_rate(scenario, model, ops)
        record = run_simulation(scenario, model, ops)
        regions = {"omega": scenario.region, "Omega": scenario.domain}
        series = norm_series(record, model.mode_set, regions)

        out = self.output_dir(scenario)
        files = [
            write_trajectory_csv(out / "trajectory.csv", record).name,
            write_norm_csv(out / "norms.csv", record.times, series).name,
        ]

        summaries = summaries_section(record.times, series, state_norm_series(record, model.mode_set, regions))
        decay, floors, initial = decay_sections(summaries)
        omega = verdict_for(summaries["err_H1_omega"], rate)
        whole = verdict_for(summaries["err_H1_Omega"], rate)

        await logger.ainfo("Veredito regional", omega=omega, Omega=whole, reference_rate=rate)
        return {
            "status": "ok",
            "sensors": sensors_section(scenario.sensors),
            "strategic": strategic,
            "estimator": estimator_section(scenario, model, ops, rate),
            "initial_error": initial,
            "decay": decay,
            "floors": floors,
            "notes": {name: s.note for name, s in summaries.items() if s.note},
            "verdicts": {
                "omega": verdict_label(omega, "ω"),
                "Omega": verdict_label(whole, "Ω"),
            },
            "files": files,
        }

    @command("verify")
    async def verify(self, scenario: Scenario) -> Sections:
        """Monta o estimador e confere MC + NT = I, TA − LT = HC e G = TB."""
        model = build_model(scenario, global_basis(scenario))
        ops = build_estimator(scenario, model)
        rate = reference_rate(scenario, model, ops)
        section = estimator_section(scenario, model, ops, rate)

        await logger.ainfo("Estimador verificado", kind=ops.kind, passed=section["passed"])
        return {"status": "ok", "estimator": section}


async def setup(app):
    """Registra o grupo no toolkit."""
    await app.add_group(SimulationCommands(app))
