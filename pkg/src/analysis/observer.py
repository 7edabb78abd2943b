"""
Observadores de Luenberger sobre o sistema modal truncado.
Projeto de ganho no bloco lento, estimador identidade e estimador geral via Sylvester,
verificação das condições de reconstrução e simulação acoplada planta/observador.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union
import math

import numpy as np
from scipy import linalg
import structlog

from analysis.spectral import ModeSet
from analysis.strategic import DEFAULT_RANK_TOL, observability_gramian
from utils.errors import (
    ConfigurationError,
    DimensionMismatch,
    GainDesignError,
    NonPositiveHorizon,
    ReconstructionRankDeficient,
    RiccatiNonConvergence,
    StepTooCoarse,
    SylvesterResonance,
    UndetectableSlowMode
)

logger = structlog.get_logger()

RESONANCE_TOL = 1e-9
RICCATI_TOL = 1e-10
RICCATI_MAX_STEPS = 10 ** 6
STEP_HALVING_TOL = 1e-6
STABILITY_SAMPLES = 200


# ==================== SISTEMA MODAL ====================

@dataclass(frozen=True, eq=False)
class ModalSystem:
    """ȧ = A·a + B·u,  y = C·a, com A = diag(λ_m + c)."""

    A: np.ndarray
    B_in: np.ndarray
    C: np.ndarray
    mode_set: ModeSet

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def q(self) -> int:
        return self.C.shape[0]

    @property
    def p(self) -> int:
        return self.B_in.shape[1]

    @property
    def rates(self) -> np.ndarray:
        return np.diag(self.A).copy()


def build_modal_system(mode_set: ModeSet, C: np.ndarray, B_in: Optional[np.ndarray] = None) -> ModalSystem:
    """
    Monta o sistema modal a partir da base e das matrizes de saída e entrada.

    Raises:
        DimensionMismatch: Se C ou B não casarem com o número de modos
    """
    n = mode_set.n_modes
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[1] != n:
        raise DimensionMismatch(f"C tem {C.shape[1]} colunas, a base tem {n} modos")

    B_in = np.zeros((n, 0)) if B_in is None or np.size(B_in) == 0 else np.asarray(B_in, dtype=float)
    if B_in.ndim == 1:
        B_in = B_in[:, None]
    if B_in.shape[0] != n:
        raise DimensionMismatch(f"B tem {B_in.shape[0]} linhas, a base tem {n} modos")

    return ModalSystem(A=np.diag(mode_set.rates), B_in=B_in, C=C, mode_set=mode_set)


# ==================== GANHOS ====================

@dataclass(frozen=True)
class RiccatiGain:
    """Ganho de estado estacionário de Riccati no bloco lento (Q = ρI)."""

    rho: float = 1.0
    kind = "riccati"

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ConfigurationError(f"ρ deve ser positivo: {self.rho}", field="gain.rho")


@dataclass(frozen=True)
class ShiftGain:
    """Ganho que põe cada taxa lenta em −σ★."""

    sigma_target: float
    kind = "shift"

    def __post_init__(self):
        if not self.sigma_target > 0.0:
            raise ConfigurationError(f"σ★ deve ser positivo: {self.sigma_target}", field="gain.sigma_target")


@dataclass(frozen=True)
class ExplicitGain:
    """Matriz de ganho fornecida pelo usuário (N × q)."""

    matrix: Tuple[Tuple[float, ...], ...]
    kind = "explicit"

    def __post_init__(self):
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in self.matrix))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)


GainSpec = Union[RiccatiGain, ShiftGain, ExplicitGain]


def _riccati_rhs(P: np.ndarray, A_s: np.ndarray, CtC: np.ndarray, Q: np.ndarray) -> np.ndarray:
    return A_s @ P + P @ A_s.T - P @ CtC @ P + Q


def solve_differential_riccati(
    A_s: np.ndarray,
    C_s: np.ndarray,
    rho: float,
    *,
    tol: float = RICCATI_TOL,
    max_steps: int = RICCATI_MAX_STEPS
) -> np.ndarray:
    """
    Integra Ṗ = AP + PAᵀ − PCᵀCP + ρI a partir de P = I até o regime estacionário.

    Usa RK4 com passo adaptado à escala de A e de CᵀC·P.

    Raises:
        RiccatiNonConvergence: Se ‖Ṗ‖ não cair abaixo da tolerância
    """
    n = A_s.shape[0]
    Q = rho * np.eye(n)
    CtC = C_s.T @ C_s
    a_scale = float(np.max(np.abs(A_s), initial=0.0))
    c_scale = float(np.linalg.norm(CtC, 2)) if CtC.size else 0.0

    P = np.eye(n)
    for step in range(max_steps):
        k1 = _riccati_rhs(P, A_s, CtC, Q)
        size = float(np.linalg.norm(P))
        if np.linalg.norm(k1) <= tol * max(1.0, size):
            logger.debug("Riccati convergiu", steps=step, norm_p=size)
            return P

        if not math.isfinite(size):
            break

        dt = 0.5 / (2.0 * (a_scale + c_scale * size) + 1.0)
        k2 = _riccati_rhs(P + 0.5 * dt * k1, A_s, CtC, Q)
        k3 = _riccati_rhs(P + 0.5 * dt * k2, A_s, CtC, Q)
        k4 = _riccati_rhs(P + dt * k3, A_s, CtC, Q)
        P = P + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        P = 0.5 * (P + P.T)

    raise RiccatiNonConvergence(f"Riccati não atingiu o regime estacionário em {max_steps} passos")


def _undetectable(system: ModalSystem, slow: Sequence[int], horizon: float) -> Tuple[str, ...]:
    W = observability_gramian(system.C, system.rates, slow, horizon)
    _, vectors = linalg.eigh(W)
    weakest = np.abs(vectors[:, 0])
    labels = system.mode_set.labels
    return tuple(labels[slow[k]] for k in np.flatnonzero(weakest > 0.1))


def detectable_slow(
    system: ModalSystem,
    slow: Sequence[int],
    *,
    rank_tol: float = DEFAULT_RANK_TOL
) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
    """Separa os modos lentos em (vistos, invisíveis) pela coluna de C."""
    seen, unseen = [], []
    for index in slow:
        column = system.C[:, index]
        (seen if np.max(np.abs(column), initial=0.0) > rank_tol else unseen).append(index)
    return tuple(seen), tuple(unseen)


def design_gain(
    system: ModalSystem,
    slow: Sequence[int],
    spec: GainSpec,
    *,
    horizon: float = 1.0,
    rank_tol: float = DEFAULT_RANK_TOL,
    allow_undetectable: bool = False
) -> np.ndarray:
    """
    Projeta a matriz de ganho H (N × q) atuando só nas coordenadas lentas.

    Args:
        system: Sistema modal
        slow: Índices dos modos lentos
        spec: Especificação do ganho
        horizon: Horizonte do Gramiano usado no teste de detectabilidade
        rank_tol: Limiar de detectabilidade
        allow_undetectable: Descarta modos lentos com coluna de C nula em vez de falhar

    Returns:
        H com linhas rápidas nulas

    Raises:
        UndetectableSlowMode: Se o bloco lento não for observável
        GainDesignError: Se o ganho de deslocamento não puder ser construído
        RiccatiNonConvergence: Se a Riccati não convergir
    """
    n, q = system.n, system.q

    if isinstance(spec, ExplicitGain):
        H = spec.array
        if H.shape != (n, q):
            raise DimensionMismatch(f"Ganho explícito tem forma {H.shape}, esperado {(n, q)}")
        return H

    slow = list(slow)
    if allow_undetectable:
        seen, unseen = detectable_slow(system, slow, rank_tol=rank_tol)
        if unseen:
            labels = [system.mode_set.labels[k] for k in unseen]
            logger.warning("Modos lentos invisíveis descartados do projeto de ganho", modes=labels)
        slow = list(seen)

    H = np.zeros((n, q))
    if not slow:
        return H

    spectrum = linalg.eigvalsh(observability_gramian(system.C, system.rates, slow, horizon))
    margin = max(0.0, float(spectrum[0]))
    if margin <= rank_tol * max(1.0, float(spectrum[-1])):
        modes = _undetectable(system, slow, horizon)
        raise UndetectableSlowMode(
            f"Modos lentos não detectáveis pelos sensores: {', '.join(modes)}",
            modes=modes,
            margin=margin
        )

    A_s = system.A[np.ix_(slow, slow)]
    C_s = system.C[:, slow]

    if isinstance(spec, RiccatiGain):
        P = solve_differential_riccati(A_s, C_s, spec.rho)
        H[slow, :] = P @ C_s.T

    elif isinstance(spec, ShiftGain):
        spectrum = linalg.svdvals(C_s)
        if spectrum.size < len(slow) or spectrum[-1] <= rank_tol * max(spectrum[0], 1.0):
            raise GainDesignError(
                "O ganho de deslocamento exige C_s com posto coluna completo "
                f"({len(slow)} modos lentos, {q} sensores)"
            )
        shift = np.diag(system.rates[slow] + spec.sigma_target)
        H[slow, :] = shift @ np.linalg.pinv(C_s)

    else:
        raise ConfigurationError(f"Tipo de ganho desconhecido: {type(spec).__name__}", field="gain.kind")

    logger.debug("Ganho projetado", kind=spec.kind, slow_modes=len(slow), norm=float(np.linalg.norm(H)))
    return H


# ==================== ESTIMADORES ====================

@dataclass(frozen=True, eq=False)
class EstimatorOperators:
    """ẇ = L·w + H·y + G·u,  ẑ = M·y + N·w."""

    L: np.ndarray
    H: np.ndarray
    G: np.ndarray
    M: np.ndarray
    N: np.ndarray
    T: np.ndarray
    kind: str = "general"

    @property
    def k(self) -> int:
        return self.L.shape[0]


def build_identity_estimator(system: ModalSystem, H: np.ndarray) -> EstimatorOperators:
    """
    Estimador identidade: T = I, L = A − H·C, G = B, M = 0, N = I.

    Raises:
        DimensionMismatch: Se H não for N × q
    """
    H = np.asarray(H, dtype=float)
    if H.shape != (system.n, system.q):
        raise DimensionMismatch(f"Ganho tem forma {H.shape}, esperado {(system.n, system.q)}")

    n = system.n
    return EstimatorOperators(
        L=system.A - H @ system.C,
        H=H,
        G=system.B_in.copy(),
        M=np.zeros((n, system.q)),
        N=np.eye(n),
        T=np.eye(n),
        kind="identity"
    )


def solve_reconstruction(C: np.ndarray, T: np.ndarray, *, rank_tol: float = DEFAULT_RANK_TOL) -> Tuple[np.ndarray, np.ndarray]:
    """
    Resolve [M N]·(C; T) = I por mínimos quadrados.

    Raises:
        ReconstructionRankDeficient: Se a pilha (C; T) tiver posto < N
    """
    stacked = np.vstack([C, T])
    n = stacked.shape[1]
    spectrum = linalg.svdvals(stacked)
    rank = int(np.sum(spectrum > rank_tol * spectrum[0])) if spectrum.size and spectrum[0] > 0.0 else 0
    if rank < n:
        raise ReconstructionRankDeficient(
            f"A pilha (C; T) tem posto {rank}, necessário {n}",
            rank=rank,
            required=n
        )

    solution, *_ = linalg.lstsq(stacked.T, np.eye(n))
    MN = solution.T
    q = C.shape[0]
    return MN[:, :q], MN[:, q:]


def build_general_estimator(
    system: ModalSystem,
    rates: Sequence[float],
    H: np.ndarray,
    *,
    rank_tol: float = DEFAULT_RANK_TOL
) -> EstimatorOperators:
    """
    Estimador geral com L = diag(rates) escolhido pelo usuário.

    T resolve TA − LT = HC (elemento a elemento, A e L diagonais); M e N vêm de
    [M N]·(C; T) = I; G = T·B.

    Raises:
        SylvesterResonance: Se alguma taxa coincidir com um autovalor do sistema
        ReconstructionRankDeficient: Se (C; T) não tiver posto N
    """
    rates = np.asarray(rates, dtype=float).ravel()
    H = np.atleast_2d(np.asarray(H, dtype=float))
    k = rates.size
    if H.shape != (k, system.q):
        raise DimensionMismatch(f"Ganho do estimador tem forma {H.shape}, esperado {(k, system.q)}")

    a = system.rates
    gap = a[None, :] - rates[:, None]
    hits = np.argwhere(np.abs(gap) <= RESONANCE_TOL)
    if hits.size:
        row, column = hits[0]
        mode = system.mode_set.labels[column]
        raise SylvesterResonance(
            f"Taxa do estimador {rates[row]!r} coincide com o autovalor {a[column]!r} do modo {mode}",
            estimator_rate=float(rates[row]),
            system_rate=float(a[column]),
            mode=mode
        )

    T = (H @ system.C) / gap
    M, N = solve_reconstruction(system.C, T, rank_tol=rank_tol)

    logger.debug("Estimador geral montado", k=k, n=system.n)
    return EstimatorOperators(L=np.diag(rates), H=H, G=T @ system.B_in, M=M, N=N, T=T, kind="general")


@dataclass(frozen=True)
class EstimatorResiduals:
    reconstruction: float
    intertwining: float
    input: float

    def passed(self, tol: float) -> bool:
        return max(self.reconstruction, self.intertwining, self.input) <= tol

    def to_dict(self):
        return {"reconstruction": self.reconstruction, "intertwining": self.intertwining, "input": self.input}


def verify_estimator_conditions(ops: EstimatorOperators, system: ModalSystem) -> EstimatorResiduals:
    """
    Resíduos em norma de Frobenius de MC + NT − I, TA − LT − HC e G − TB.

    Raises:
        DimensionMismatch: Se as formas dos operadores forem incompatíveis
    """
    n, q, p, k = system.n, system.q, system.p, ops.k
    expected = {
        "T": (ops.T, (k, n)),
        "L": (ops.L, (k, k)),
        "H": (ops.H, (k, q)),
        "G": (ops.G, (k, p)),
        "M": (ops.M, (n, q)),
        "N": (ops.N, (n, k)),
    }
    for name, (matrix, shape) in expected.items():
        if matrix.shape != shape:
            raise DimensionMismatch(f"{name} tem forma {matrix.shape}, esperado {shape}")

    return EstimatorResiduals(
        reconstruction=float(np.linalg.norm(ops.M @ system.C + ops.N @ ops.T - np.eye(n))),
        intertwining=float(np.linalg.norm(ops.T @ system.A - ops.L @ ops.T - ops.H @ system.C)),
        input=float(np.linalg.norm(ops.G - ops.T @ system.B_in))
    )


@dataclass(frozen=True)
class StabilityCheck:
    stable: bool
    peak: float
    final: float

    def to_dict(self):
        return {"stable": self.stable, "peak": self.peak, "final": self.final}


def check_estimator_stability(L: np.ndarray, horizon: float, samples: int = STABILITY_SAMPLES) -> StabilityCheck:
    """
    Propaga ‖e^{Lt}‖ em [0, horizonte]: estável se a segunda metade é monótona
    e o valor final cai abaixo de metade do pico.
    """
    if not horizon > 0.0:
        raise NonPositiveHorizon(f"Horizonte deve ser positivo: {horizon}")

    L = np.asarray(L, dtype=float)
    step = linalg.expm(L * (horizon / samples))
    Phi = np.eye(L.shape[0])
    norms = [1.0]
    for _ in range(samples):
        Phi = step @ Phi
        norms.append(float(np.linalg.norm(Phi, 2)))

    tail = norms[len(norms) // 2:]
    monotone = all(b <= a * (1.0 + 1e-9) for a, b in zip(tail, tail[1:]))
    peak = max(norms)
    return StabilityCheck(stable=monotone and norms[-1] <= 0.5 * peak, peak=peak, final=norms[-1])


def designed_slow_rate(
    ops: EstimatorOperators,
    system: ModalSystem,
    slow: Sequence[int],
    spec: Optional[GainSpec] = None,
    *,
    rank_tol: float = DEFAULT_RANK_TOL
) -> float:
    """
    Taxa de decaimento de referência do erro no bloco lento.

    Modos lentos com coluna de C nula ficam de fora: o ganho não age sobre eles.
    """
    if any(not 0 <= k < system.n for k in slow):
        raise DimensionMismatch(f"Índices lentos fora de [0, {system.n})")
    if isinstance(spec, ShiftGain):
        return spec.sigma_target
    if ops.kind == "general":
        return float(np.min(-np.real(np.linalg.eigvals(ops.L))))
    slow, _ = detectable_slow(system, slow, rank_tol=rank_tol)
    slow = list(slow)
    if not slow:
        return float(np.min(-np.real(np.linalg.eigvals(ops.L))))
    block = ops.L[np.ix_(slow, slow)]
    return float(np.min(-np.real(np.linalg.eigvals(block))))


# ==================== SIMULAÇÃO ====================

@dataclass(frozen=True)
class InputSchedule:
    """Entrada constante por partes: u(t) = values[k] para times[k] ≤ t < times[k+1]."""

    times: Tuple[float, ...]
    values: Tuple[Tuple[float, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(tuple(float(v) for v in row) for row in self.values))
        if len(self.times) != len(self.values):
            raise ConfigurationError("input.times e input.values devem ter o mesmo tamanho", field="input.values")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ConfigurationError("input.times deve ser estritamente crescente", field="input.times")
        if len({len(row) for row in self.values}) > 1:
            raise ConfigurationError("Todas as linhas de input.values devem ter o mesmo tamanho", field="input.values")

    @property
    def p(self) -> int:
        return len(self.values[0]) if self.values else 0

    def value_at(self, t: float) -> np.ndarray:
        index = int(np.searchsorted(self.times, t, side="right")) - 1
        if index < 0:
            return np.zeros(self.p)
        return np.asarray(self.values[index], dtype=float)


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    state_coeffs: np.ndarray
    observer_coeffs: np.ndarray
    estimate_coeffs: np.ndarray
    outputs: np.ndarray
    mode_labels: Tuple[str, ...] = field(default_factory=tuple)

    def estimation_error(self) -> np.ndarray:
        """z − ẑ em cada instante (amostras × N)."""
        return self.state_coeffs - self.estimate_coeffs

    def observer_error(self, T: np.ndarray) -> np.ndarray:
        """Tz − w em cada instante (amostras × k)."""
        return self.state_coeffs @ np.asarray(T).T - self.observer_coeffs


def _phi1(rates: np.ndarray, tau: float) -> np.ndarray:
    small = np.abs(rates * tau) < 1e-12
    safe = np.where(small, 1.0, rates)
    return np.where(small, tau, np.expm1(rates * tau) / safe)


def _propagate_forced(x, rates, B_in, inputs: Optional[InputSchedule], t0, h):
    """Avança a parte forçada exatamente em [t0, t0 + h], quebrando nas trocas da entrada."""
    if inputs is None or B_in.shape[1] == 0:
        return x
    edges = [t0] + [b for b in inputs.times if t0 < b < t0 + h] + [t0 + h]
    for a, b in zip(edges[:-1], edges[1:]):
        tau = b - a
        x = np.exp(rates * tau) * x + _phi1(rates, tau) * (B_in @ inputs.value_at(a))
    return x


def _input_at(inputs: Optional[InputSchedule], p: int, t: float) -> np.ndarray:
    if inputs is None or p == 0:
        return np.zeros(p)
    return inputs.value_at(t)


def _integrate(
    system: ModalSystem,
    ops: EstimatorOperators,
    z0: np.ndarray,
    w0: np.ndarray,
    inputs: Optional[InputSchedule],
    steps: int,
    dt: float
) -> TrajectoryRecord:
    rates = system.rates
    times = np.arange(steps + 1) * dt

    forced = np.zeros((steps + 1, system.n))
    half_forced = np.zeros((steps, system.n))
    for k in range(steps):
        half_forced[k] = _propagate_forced(forced[k], rates, system.B_in, inputs, times[k], 0.5 * dt)
        forced[k + 1] = _propagate_forced(forced[k], rates, system.B_in, inputs, times[k], dt)

    states = np.exp(np.outer(times, rates)) * z0 + forced
    half_states = np.exp(np.outer(times[:-1] + 0.5 * dt, rates)) * z0 + half_forced
    outputs = states @ system.C.T
    half_outputs = half_states @ system.C.T

    p = system.p
    w = np.array(w0, dtype=float)
    observer = np.zeros((steps + 1, ops.k))
    observer[0] = w

    def rhs(state, y, u):
        return ops.L @ state + ops.H @ y + ops.G @ u

    for k in range(steps):
        t = times[k]
        u0 = _input_at(inputs, p, t)
        u_half = _input_at(inputs, p, t + 0.5 * dt)
        u1 = _input_at(inputs, p, times[k + 1])
        k1 = rhs(w, outputs[k], u0)
        k2 = rhs(w + 0.5 * dt * k1, half_outputs[k], u_half)
        k3 = rhs(w + 0.5 * dt * k2, half_outputs[k], u_half)
        k4 = rhs(w + dt * k3, outputs[k + 1], u1)
        w = w + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        observer[k + 1] = w

    estimates = outputs @ ops.M.T + observer @ ops.N.T
    return TrajectoryRecord(
        times=times,
        state_coeffs=states,
        observer_coeffs=observer,
        estimate_coeffs=estimates,
        outputs=outputs,
        mode_labels=tuple(system.mode_set.labels)
    )


def simulate(
    system: ModalSystem,
    ops: EstimatorOperators,
    z0: np.ndarray,
    w0: Optional[np.ndarray] = None,
    *,
    inputs: Optional[InputSchedule] = None,
    t_final: float,
    dt: float,
    check_step: bool = True
) -> TrajectoryRecord:
    """
    Simula planta e observador em [0, t_final] com amostras em t_k = k·dt.

    A planta é integrada exatamente (A diagonal, entrada constante por partes);
    o observador usa RK4 com a saída exata nos estágios. O passo é validado
    repetindo a simulação com dt/2.

    Raises:
        ConfigurationError: Para t_final ou dt não positivos
        DimensionMismatch: Para condições iniciais de tamanho errado
        StepTooCoarse: Se o teste de divisão do passo falhar
    """
    if not t_final > 0.0:
        raise ConfigurationError(f"t_final deve ser positivo: {t_final}", field="time.t_final")
    if not dt > 0.0:
        raise ConfigurationError(f"dt deve ser positivo: {dt}", field="time.dt")

    z0 = np.asarray(z0, dtype=float).ravel()
    if z0.size != system.n:
        raise DimensionMismatch(f"Estado inicial com {z0.size} entradas, esperado {system.n}")
    w0 = np.zeros(ops.k) if w0 is None else np.asarray(w0, dtype=float).ravel()
    if w0.size != ops.k:
        raise DimensionMismatch(f"Estado inicial do observador com {w0.size} entradas, esperado {ops.k}")
    if inputs is not None and system.p and inputs.p != system.p:
        raise DimensionMismatch(f"Entrada com {inputs.p} canais, o sistema tem {system.p} atuadores")

    steps = max(1, int(round(t_final / dt)))
    record = _integrate(system, ops, z0, w0, inputs, steps, dt)

    if check_step:
        fine = _integrate(system, ops, z0, w0, inputs, 2 * steps, 0.5 * dt)
        scale = float(np.max(np.linalg.norm(fine.observer_coeffs, axis=1), initial=0.0))
        difference = float(np.linalg.norm(record.observer_coeffs[-1] - fine.observer_coeffs[-1]))
        discrepancy = difference / scale if scale > 0.0 else difference
        if discrepancy > STEP_HALVING_TOL:
            raise StepTooCoarse(
                f"Passo dt={dt} grosso demais: discrepância relativa {discrepancy:.3e} com dt/2",
                dt=dt,
                discrepancy=discrepancy
            )

    logger.debug("Simulação concluída", steps=steps, dt=dt, modes=system.n, observer=ops.k)
    return record
