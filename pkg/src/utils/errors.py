"""
Sistema centralizado de tratamento de erros.
Define a hierarquia de exceções do toolkit e traduz falhas em mensagens e códigos de saída.
"""

import traceback
from typing import Any, Dict, Optional, Sequence, Tuple
import structlog

logger = structlog.get_logger()

# Códigos de saída do CLI: o veredito vive no relatório, nunca no código de saída
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ToolkitError(Exception):
    """Exceção base do toolkit."""
    pass


class ConfigurationError(ToolkitError):
    """Erro de configuração do cenário."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.field = field
        self.line = line

    def __str__(self) -> str:
        location = []
        if self.field:
            location.append(f"campo '{self.field}'")
        if self.line:
            location.append(f"linha {self.line}")
        if location:
            return f"{self.message} ({', '.join(location)})"
        return self.message


class GeometryError(ConfigurationError):
    """Geometria inválida (retângulo, região, sensor fora do domínio)."""
    pass


class EmptySensorSet(ConfigurationError):
    """Nenhum sensor foi declarado."""

    def __init__(self, message: str = "O conjunto de sensores está vazio", **kwargs):
        super().__init__(message, **kwargs)


class NonPositiveHorizon(ConfigurationError):
    """Horizonte de observação não positivo."""
    pass


class ScenarioInfeasible(ConfigurationError):
    """A geometria fornecida não consegue exibir o contraste global/regional."""
    pass


class NumericalError(ToolkitError):
    """Falha numérica durante uma análise ou simulação."""
    pass


class DimensionMismatch(NumericalError):
    """Dimensões incompatíveis entre matrizes ou vetores."""
    pass


class QuadratureNonConvergence(NumericalError):
    """Refinamentos sucessivos de quadratura não convergiram."""

    def __init__(self, message: str, panels: int = 0, discrepancy: float = float("nan"),
                 sensor_index: Optional[int] = None):
        super().__init__(message)
        self.message = message
        self.panels = panels
        self.discrepancy = discrepancy
        self.sensor_index = sensor_index

    def __str__(self) -> str:
        if self.sensor_index is not None:
            return f"{self.message} (sensor {self.sensor_index})"
        return self.message


class UndetectableSlowMode(NumericalError):
    """Um modo lento não é visto pelos sensores (sensores não estratégicos)."""

    def __init__(self, message: str, modes: Sequence[str] = (), margin: float = 0.0):
        super().__init__(message)
        self.modes = tuple(modes)
        self.margin = margin


class RiccatiNonConvergence(NumericalError):
    """A integração da equação de Riccati não atingiu o regime estacionário."""
    pass


class GainDesignError(NumericalError):
    """O ganho pedido não pode ser construído para o bloco lento."""
    pass


class SylvesterResonance(NumericalError):
    """Uma taxa do estimador coincide com um autovalor do sistema."""

    def __init__(self, message: str, estimator_rate: float, system_rate: float, mode: str = ""):
        super().__init__(message)
        self.estimator_rate = estimator_rate
        self.system_rate = system_rate
        self.mode = mode


class ReconstructionRankDeficient(NumericalError):
    """MC + NT = I não tem solução: a pilha (C; T) perdeu posto."""

    def __init__(self, message: str, rank: int, required: int):
        super().__init__(message)
        self.rank = rank
        self.required = required


class StepTooCoarse(NumericalError):
    """O passo de tempo falhou o teste de divisão ao meio."""

    def __init__(self, message: str, dt: float, discrepancy: float):
        super().__init__(message)
        self.dt = dt
        self.discrepancy = discrepancy


class InsufficientSamples(NumericalError):
    """Amostras insuficientes na janela de ajuste."""
    pass


class NonPositiveSamples(NumericalError):
    """A janela de ajuste não tem amostras estritamente positivas suficientes."""
    pass


def exit_code_for(error: BaseException) -> int:
    """Retorna o código de saída associado a uma exceção."""
    if isinstance(error, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_UNEXPECTED


def describe_error(error: BaseException) -> Dict[str, Any]:
    """
    Converte uma exceção em um dicionário estável para o relatório.

    Args:
        error: A exceção capturada

    Returns:
        Dicionário com tipo, mensagem e atributos relevantes
    """
    details: Dict[str, Any] = {
        "type": type(error).__name__,
        "message": str(error),
    }

    if isinstance(error, ConfigurationError):
        details["field"] = error.field
        details["line"] = error.line
    elif isinstance(error, SylvesterResonance):
        details["estimator_rate"] = error.estimator_rate
        details["system_rate"] = error.system_rate
        details["mode"] = error.mode
    elif isinstance(error, UndetectableSlowMode):
        details["modes"] = list(error.modes)
    elif isinstance(error, ReconstructionRankDeficient):
        details["rank"] = error.rank
        details["required"] = error.required
    elif isinstance(error, StepTooCoarse):
        details["dt"] = error.dt
        details["discrepancy"] = error.discrepancy
    elif isinstance(error, QuadratureNonConvergence):
        details["sensor_index"] = error.sensor_index
        details["panels"] = error.panels

    return details


async def handle_command_error(command: str, error: Exception) -> Tuple[int, str]:
    """
    Manipula erros de comandos de forma centralizada.

    Args:
        command: Nome do comando que falhou
        error: O erro que ocorreu

    Returns:
        Tupla (código de saída, mensagem para o usuário)
    """
    code = exit_code_for(error)

    await logger.aerror(
        "Erro no comando",
        command=command,
        error=str(error),
        error_type=type(error).__name__,
        exit_code=code
    )

    if isinstance(error, ConfigurationError):
        user_message = f"Erro de configuração: {error}"

    elif isinstance(error, SylvesterResonance):
        user_message = (
            f"Ressonância de Sylvester: a taxa do estimador {error.estimator_rate!r} "
            f"coincide com o autovalor {error.system_rate!r} do modo {error.mode}"
        )

    elif isinstance(error, ReconstructionRankDeficient):
        user_message = (
            f"Reconstrução impossível: posto de (C; T) = {error.rank}, necessário {error.required}"
        )

    elif isinstance(error, NumericalError):
        user_message = f"Falha numérica: {error}"

    else:
        # Erro inesperado - registrar o traceback para diagnóstico
        user_message = "Ocorreu um erro inesperado. Consulte os logs."
        error_details = ''.join(traceback.format_exception(type(error), error, error.__traceback__))

        # Truncar traceback se for muito longo
        if len(error_details) > 2000:
            error_details = error_details[-2000:]

        await logger.aerror("Traceback do erro inesperado", command=command, traceback=error_details)

    return code, user_message
