"""
The entanglement filter: a lossy Hong-Ou-Mandel interferometer with
coincidence post-selection.

Two independent models are provided:
- the phenomenological Bell-basis weighting (eq2_filter / eq2_output)
- first-principles propagation of two photons through BS1, an attenuator,
  optional waveplates and BS2 (effective_kraus / fock_channel_output)
compare_models tabulates where they disagree.
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Iterable, Optional, Tuple
import numpy as np
import pandas as pd

from .fock import (
    PATH_MODES, TwoPhotonFockState, apply_mode_transform, attenuate_path, attenuation_matrix,
    birefringent_bs, waveplate_matrix,
)
from .metrics import concurrence
from .source import SourceConfig, spdc_input_state
from .states import (
    DensityLike, DensityMatrix, PolarizationKet, as_matrix, bell_state, STRUCTURAL_TOL,
)
from .utils import task_rng

logger = logging.getLogger(__name__)

ANNIHILATION_TRACE = 1e-15
DEGENERATE_TRACE = 1e-9

MEASURED_THETA1_DEG = 7.2
MEASURED_THETA2_DEG = -18.6

WAVEPLATE_LOCATIONS = ('output', 'internal')

COMPARE_COLUMNS = [
    'gamma', 'eps', 'beta', 'C_eq2', 'C_fock', 'abs_diff', 'p_success_eq2', 'p_success_fock'
]


class FilterAnnihilationError(RuntimeError):
    """Raised when post-selection leaves (numerically) nothing of the input."""


def _finite(name: str, value: float) -> float:
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    return value


@dataclass(frozen=True)
class ChannelConfig:
    """
    Configuration of the filter interferometer.

    Attributes:
        gamma: Attenuation exponent; amplitude transmission t = e^{-gamma}
        bs1_thetas: (theta1, theta2) V-phases of the first splitter, radians
        bs2_thetas: (theta1, theta2) V-phases of the second splitter, radians
        arm_waveplate_phase_c: V phase in path 1 (the lossy arm), radians
        arm_waveplate_phase_d: V phase in path 2, radians
        visibility: Two-photon interference visibility in [0, 1]
        arm_waveplate_location: 'output' (after BS2) or 'internal' (between
                                BS1 and BS2)
    """
    gamma: float = 0.0
    bs1_thetas: Tuple[float, float] = (0.0, 0.0)
    bs2_thetas: Tuple[float, float] = (0.0, 0.0)
    arm_waveplate_phase_c: float = 0.0
    arm_waveplate_phase_d: float = 0.0
    visibility: float = 1.0
    arm_waveplate_location: str = 'output'

    def __post_init__(self):
        """Validate ranges."""
        gamma = _finite('gamma', self.gamma)
        if gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {gamma}")
        object.__setattr__(self, 'gamma', gamma)

        for name in ('bs1_thetas', 'bs2_thetas'):
            pair = tuple(_finite(name, x) for x in getattr(self, name))
            if len(pair) != 2:
                raise ValueError(f"{name} needs two phases, got {len(pair)}")
            object.__setattr__(self, name, pair)

        for name in ('arm_waveplate_phase_c', 'arm_waveplate_phase_d'):
            object.__setattr__(self, name, _finite(name, getattr(self, name)))

        v = _finite('visibility', self.visibility)
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"visibility must be in [0, 1], got {v}")
        object.__setattr__(self, 'visibility', v)

        if self.arm_waveplate_location not in WAVEPLATE_LOCATIONS:
            raise ValueError(
                f"arm_waveplate_location must be one of {WAVEPLATE_LOCATIONS}, "
                f"got {self.arm_waveplate_location!r}"
            )

    @property
    def t(self) -> float:
        """Amplitude transmission of the attenuator."""
        return float(np.exp(-self.gamma))

    @property
    def eps(self) -> float:
        """Loss rate 1 - e^{-gamma}."""
        return float(-np.expm1(-self.gamma))

    @property
    def beta(self) -> float:
        return beta_from_gamma(self.gamma)

    @classmethod
    def from_eps(cls, eps: float, **kwargs) -> 'ChannelConfig':
        """Channel at a given loss rate."""
        return cls(gamma=gamma_from_eps(eps), **kwargs)

    @classmethod
    def measured_splitter(cls, gamma: float = 0.0, **kwargs) -> 'ChannelConfig':
        """Channel with the characterized birefringence on BS2 only."""
        thetas = (np.deg2rad(MEASURED_THETA1_DEG), np.deg2rad(MEASURED_THETA2_DEG))
        return cls(gamma=gamma, bs2_thetas=thetas, **kwargs)

    def with_gamma(self, gamma: float) -> 'ChannelConfig':
        return replace(self, gamma=gamma)

    def to_dict(self) -> Dict[str, float]:
        """JSON-ready representation with angles in degrees."""
        return {
            'gamma': self.gamma,
            'eps': self.eps,
            'bs1_theta1_deg': float(np.rad2deg(self.bs1_thetas[0])),
            'bs1_theta2_deg': float(np.rad2deg(self.bs1_thetas[1])),
            'bs2_theta1_deg': float(np.rad2deg(self.bs2_thetas[0])),
            'bs2_theta2_deg': float(np.rad2deg(self.bs2_thetas[1])),
            'arm_phase_c_deg': float(np.rad2deg(self.arm_waveplate_phase_c)),
            'arm_phase_d_deg': float(np.rad2deg(self.arm_waveplate_phase_d)),
            'visibility': self.visibility,
            'arm_waveplate_location': self.arm_waveplate_location,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, float]) -> 'ChannelConfig':
        """
        Build from to_dict() keys.

        Either gamma or eps may be given; when both are present they must
        satisfy eps = 1 - exp(-gamma) within 1e-9.
        """
        if 'gamma' in payload:
            gamma = float(payload['gamma'])
            if 'eps' in payload:
                expected = float(-np.expm1(-gamma))
                if abs(float(payload['eps']) - expected) > STRUCTURAL_TOL:
                    raise ValueError(
                        f"eps {payload['eps']} inconsistent with gamma {gamma} "
                        f"(expected {expected:.12g})"
                    )
        elif 'eps' in payload:
            gamma = gamma_from_eps(float(payload['eps']))
        else:
            gamma = 0.0

        def rad(key: str) -> float:
            return float(np.deg2rad(payload.get(key, 0.0)))

        return cls(
            gamma=gamma,
            bs1_thetas=(rad('bs1_theta1_deg'), rad('bs1_theta2_deg')),
            bs2_thetas=(rad('bs2_theta1_deg'), rad('bs2_theta2_deg')),
            arm_waveplate_phase_c=rad('arm_phase_c_deg'),
            arm_waveplate_phase_d=rad('arm_phase_d_deg'),
            visibility=float(payload.get('visibility', 1.0)),
            arm_waveplate_location=payload.get('arm_waveplate_location', 'output'),
        )


@dataclass(frozen=True)
class EffectiveKraus:
    """
    Post-selected no-loss Kraus operator.

    K maps the input polarization ket (photon A in path 1, photon B in
    path 2) to the unnormalized coincidence ket (photon in output path 1,
    photon in output path 2).
    """
    K: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.K, dtype=complex)
        if k.shape != (4, 4):
            raise ValueError(f"Kraus operator must be 4x4, got {k.shape}")
        s_max = float(np.linalg.norm(k, 2))
        if s_max > 1.0 + STRUCTURAL_TOL:
            raise ValueError(f"Kraus operator is not a contraction (norm {s_max:.12g})")
        object.__setattr__(self, 'K', k)

    def apply(self, rho: DensityLike) -> np.ndarray:
        """Unnormalized K rho K^+."""
        return self.K @ as_matrix(rho) @ self.K.conj().T

    def bell_spectrum(self) -> Dict[str, complex]:
        """Diagonal elements <b|K|b> in the Bell basis."""
        out = {}
        for kind in ('PhiPlus', 'PhiMinus', 'PsiPlus', 'PsiMinus'):
            b = bell_state(kind).amps
            out[kind] = complex(np.vdot(b, self.K @ b))
        return out


@dataclass(frozen=True)
class ChannelOutput:
    """
    Normalized post-selected state and the probability of a coincidence.

    Attributes:
        rho_out: Normalized output state
        success_probability: Trace of the unnormalized post-selected state
        degenerate: True when that trace fell below 1e-9
    """
    rho_out: DensityMatrix
    success_probability: float
    degenerate: bool = False

    def __post_init__(self):
        if not -STRUCTURAL_TOL <= self.success_probability <= 1.0 + STRUCTURAL_TOL:
            raise ValueError(f"success_probability out of range: {self.success_probability}")
        object.__setattr__(
            self, 'success_probability', float(np.clip(self.success_probability, 0.0, 1.0))
        )


def beta_from_gamma(gamma: float) -> float:
    """Decay ratio 2/(e^{-gamma} + e^{gamma}) = sech(gamma)."""
    if gamma < 0:
        raise ValueError(f"gamma must be non-negative, got {gamma}")
    if gamma > 700:
        return 0.0
    return float(1.0 / np.cosh(gamma))


def gamma_from_beta(beta: float) -> float:
    """Inverse of beta_from_gamma; infinite at beta = 0."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    if beta == 0.0:
        return float('inf')
    return float(np.arccosh(1.0 / beta))


def gamma_from_eps(eps: float) -> float:
    """gamma = -ln(1 - eps)."""
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"Loss rate must be in [0, 1), got {eps}")
    return float(-np.log1p(-eps))


def analytic_concurrence_vs_loss(epsilon: float) -> float:
    """
    Dashed-curve law C = (eps/(2 - eps))^2 = tanh^2(gamma/2).

    Raises:
        ValueError: for eps outside [0, 1)
    """
    if not 0.0 <= epsilon < 1.0:
        raise ValueError(f"Loss rate must be in [0, 1), got {epsilon}")
    return float((epsilon / (2.0 - epsilon)) ** 2)


def _bell_weighting(beta: float) -> np.ndarray:
    psi_minus = bell_state('PsiMinus').amps
    return np.eye(4, dtype=complex) + (np.sqrt(beta) - 1.0) * np.outer(psi_minus, psi_minus.conj())


def eq2_filter(rho_in: DensityLike, beta: float) -> ChannelOutput:
    """
    Phenomenological filter: weight Psi- amplitudes by sqrt(beta).

    The unnormalized output is W rho W with W = 1 + (sqrt(beta) - 1)|Psi-><Psi-|,
    which puts beta on the Psi- population and sqrt(beta) on its coherences.
    The success probability is Tr(W rho W) times the Psi+ reference
    attenuation ((1 + t^2)/2)^2 at the gamma that produces beta.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    w = _bell_weighting(beta)
    sigma = w @ as_matrix(rho_in) @ w
    gamma = gamma_from_beta(beta)
    t = 0.0 if np.isinf(gamma) else float(np.exp(-gamma))
    reference = ((1.0 + t * t) / 2.0) ** 2
    return _normalize(sigma, scale=reference)


def eq2_output(c0: complex, c1: complex, beta: float, overlap: complex = 0.0) -> ChannelOutput:
    """
    Eq. 1 source state pushed through the phenomenological filter.

    For o = 0 the unnormalized output is
    (|Psi+><Psi+| + beta |Psi-><Psi-|)/2
    + (|c0|^2 - |c1|^2) sqrt(beta)/2 (|Psi+><Psi-| + |Psi-><Psi+|).
    """
    source = SourceConfig(c0=c0, c1=c1, overlap=overlap)
    return eq2_filter(spdc_input_state(source), beta)


def _normalize(sigma: np.ndarray, scale: float = 1.0) -> ChannelOutput:
    sigma = 0.5 * (sigma + sigma.conj().T)
    trace = float(np.trace(sigma).real)
    if trace < ANNIHILATION_TRACE:
        raise FilterAnnihilationError(
            f"Filter annihilates input: post-selected trace {trace:.3g}"
        )
    degenerate = trace < DEGENERATE_TRACE
    if degenerate:
        logger.warning("Near-degenerate post-selection, trace %.3g", trace)
    return ChannelOutput(
        rho_out=DensityMatrix(sigma / trace),
        success_probability=trace * scale,
        degenerate=degenerate,
    )


def total_mode_matrix(cfg: ChannelConfig) -> np.ndarray:
    """
    Single-photon mode matrix of the whole interferometer.

    BS1 -> attenuator on path 1 -> (internal waveplates) -> BS2 ->
    (output waveplates).
    """
    plates = waveplate_matrix(cfg.arm_waveplate_phase_c, cfg.arm_waveplate_phase_d)
    internal = plates if cfg.arm_waveplate_location == 'internal' else np.eye(4)
    output = plates if cfg.arm_waveplate_location == 'output' else np.eye(4)
    return (
        output
        @ birefringent_bs(*cfg.bs2_thetas)
        @ internal
        @ attenuation_matrix(1, cfg.t)
        @ birefringent_bs(*cfg.bs1_thetas)
    )


def effective_kraus(cfg: ChannelConfig) -> EffectiveKraus:
    """
    Coincidence Kraus operator from two-photon Fock propagation.

    Each polarization basis input is propagated through the interferometer
    and projected onto one photon per output path; the projected amplitudes
    form the columns of K.
    """
    plates = waveplate_matrix(cfg.arm_waveplate_phase_c, cfg.arm_waveplate_phase_d)
    bs1 = birefringent_bs(*cfg.bs1_thetas)
    bs2 = birefringent_bs(*cfg.bs2_thetas)

    K = np.zeros((4, 4), dtype=complex)
    for col in range(4):
        amps = np.zeros(4, dtype=complex)
        amps[col] = 1.0
        state = TwoPhotonFockState.from_polarization(PolarizationKet(amps))
        state = apply_mode_transform(state, bs1)
        state = attenuate_path(state, 1, cfg.t)
        if cfg.arm_waveplate_location == 'internal':
            state = apply_mode_transform(state, plates)
        state = apply_mode_transform(state, bs2)
        if cfg.arm_waveplate_location == 'output':
            state = apply_mode_transform(state, plates)
        K[:, col] = state.coincidence_amplitudes()
    return EffectiveKraus(K)


def routing_kraus(cfg: ChannelConfig) -> Tuple[np.ndarray, np.ndarray]:
    """
    Routing amplitudes of independently propagated photons.

    K_AB: photon A exits path 1 and photon B exits path 2.
    K_BA: photon B exits path 1 and photon A exits path 2.
    Their coherent sum is the indistinguishable-photon Kraus operator.
    """
    M = total_mode_matrix(cfg)
    k_ab = np.zeros((4, 4), dtype=complex)
    k_ba = np.zeros((4, 4), dtype=complex)
    for s1 in range(2):
        for s2 in range(2):
            row = 2 * s1 + s2
            for p in range(2):
                for q in range(2):
                    col = 2 * p + q
                    k_ab[row, col] = M[s1, p] * M[2 + s2, 2 + q]
                    k_ba[row, col] = M[s1, 2 + q] * M[2 + s2, p]
    return k_ab, k_ba


def fock_channel_output(rho_in: DensityLike, cfg: ChannelConfig) -> ChannelOutput:
    """
    First-principles filter output.

    sigma = K rho K^+; with visibility v < 1 the distinguishable-photon part
    K_AB rho K_AB^+ + K_BA rho K_BA^+ is mixed in with weight 1 - v.

    Raises:
        FilterAnnihilationError: if Tr(sigma) < 1e-15
    """
    rho = as_matrix(rho_in)
    sigma = effective_kraus(cfg).apply(rho)
    if cfg.visibility < 1.0:
        k_ab, k_ba = routing_kraus(cfg)
        sigma_dist = k_ab @ rho @ k_ab.conj().T + k_ba @ rho @ k_ba.conj().T
        sigma = cfg.visibility * sigma + (1.0 - cfg.visibility) * sigma_dist
    return _normalize(sigma)


def compare_models(
    c0: complex,
    c1: complex,
    o: complex,
    gamma_grid: Iterable[float],
    channel: Optional[ChannelConfig] = None
) -> pd.DataFrame:
    """
    Tabulate the phenomenological and first-principles filters side by side.

    Both models act on the same source state. The first-principles model
    uses `channel` (ideal splitters by default) with gamma replaced per row.

    Returns:
        DataFrame with COMPARE_COLUMNS, one row per gamma
    """
    grid = [float(g) for g in gamma_grid]
    if not grid:
        raise ValueError("gamma_grid must not be empty")
    base = channel if channel is not None else ChannelConfig()
    rho_in = spdc_input_state(SourceConfig(c0=c0, c1=c1, overlap=o))

    rows = []
    for gamma in grid:
        beta = beta_from_gamma(gamma)
        eq2 = eq2_filter(rho_in, beta)
        fock = fock_channel_output(rho_in, base.with_gamma(gamma))
        c_eq2 = concurrence(eq2.rho_out)
        c_fock = concurrence(fock.rho_out)
        rows.append({
            'gamma': gamma,
            'eps': float(-np.expm1(-gamma)),
            'beta': beta,
            'C_eq2': c_eq2,
            'C_fock': c_fock,
            'abs_diff': abs(c_eq2 - c_fock),
            'p_success_eq2': eq2.success_probability,
            'p_success_fock': fock.success_probability,
        })
    return pd.DataFrame(rows, columns=COMPARE_COLUMNS)


@dataclass(frozen=True)
class SplitterCharacterization:
    """
    Port phases of a birefringent splitter recovered by polarimetry.

    Attributes:
        theta1: Phase of V relative to H on output port 1, radians in (-pi, pi]
        theta2: Same for output port 2
        stokes: (S_DA, S_RL) per port, keyed 1 and 2
        counts: Photons per analyzer setting, None for exact probabilities
    """
    theta1: float
    theta2: float
    stokes: Dict[int, Tuple[float, float]]
    counts: Optional[int] = None

    @property
    def thetas_deg(self) -> Tuple[float, float]:
        return float(np.rad2deg(self.theta1)), float(np.rad2deg(self.theta2))


def _port_analyzer_probabilities(M: np.ndarray, port: int) -> Tuple[float, float]:
    """P(D) and P(R) on one output port for a D-polarized photon entering port 1."""
    photon = np.zeros(4, dtype=complex)
    photon[list(PATH_MODES[1])] = 1.0 / np.sqrt(2.0)
    h, v = (M @ photon)[list(PATH_MODES[port])]
    norm = abs(h) ** 2 + abs(v) ** 2
    p_d = abs(h + v) ** 2 / (2.0 * norm)
    p_r = abs(h - 1j * v) ** 2 / (2.0 * norm)
    return float(p_d), float(p_r)


def characterize_splitter(
    theta1: float,
    theta2: float,
    counts: Optional[int] = None,
    seed: int = 0
) -> SplitterCharacterization:
    """
    Measure the port phases of a splitter with diagonally polarized light.

    A (|H> + |V>)/sqrt2 photon enters port 1; each output port carries
    (|H> + e^{i theta_k}|V>)/sqrt2, whose D/A and R/L analyzer statistics
    give S_DA = cos theta_k and S_RL = sin theta_k. With `counts`, each
    analyzer records binomial counts drawn from stream (seed, port).

    Args:
        theta1: True phase on output port 1 in radians
        theta2: True phase on output port 2 in radians
        counts: Photons per analyzer setting; None uses exact probabilities
        seed: Master seed for the sampled mode

    Returns:
        SplitterCharacterization with the recovered phases
    """
    if counts is not None and counts < 1:
        raise ValueError(f"counts must be positive, got {counts}")
    M = birefringent_bs(theta1, theta2)
    phases, stokes = {}, {}
    for port in (1, 2):
        p_d, p_r = _port_analyzer_probabilities(M, port)
        if counts is not None:
            rng = task_rng(seed, port)
            p_d = rng.binomial(counts, p_d) / counts
            p_r = rng.binomial(counts, p_r) / counts
        s_da, s_rl = 2.0 * p_d - 1.0, 2.0 * p_r - 1.0
        stokes[port] = (float(s_da), float(s_rl))
        phases[port] = float(np.arctan2(s_rl, s_da))
    return SplitterCharacterization(
        theta1=phases[1], theta2=phases[2], stokes=stokes, counts=counts
    )
