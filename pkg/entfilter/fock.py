"""
Two-photon states over four optical modes and their linear-optical evolution.

Modes are numbered 0: path1 H, 1: path1 V, 2: path2 H, 3: path2 V. A state is
stored as its 10 amplitudes over the symmetric basis |i,j> (i <= j), where
|i,j> = a_i^+ a_j^+ |vac> / sqrt(1 + delta_ij).
"""

from dataclasses import dataclass
from typing import List, Tuple
import numpy as np

from .states import PolarizationKet, STRUCTURAL_TOL, _frozen

N_MODES = 4
FOCK_BASIS: Tuple[Tuple[int, int], ...] = tuple(
    (i, j) for i in range(N_MODES) for j in range(i, N_MODES)
)
PATH_MODES = {1: (0, 1), 2: (2, 3)}

# Coincidence components and the polarization label they map to:
# (photon in path 1, photon in path 2).
COINCIDENCE_PAIRS: Tuple[Tuple[int, int], ...] = ((0, 2), (0, 3), (1, 2), (1, 3))


def _index(i: int, j: int) -> int:
    if i > j:
        i, j = j, i
    return FOCK_BASIS.index((i, j))


@dataclass(frozen=True)
class TwoPhotonFockState:
    """
    Two photons distributed over four modes.

    Attributes:
        coeffs: 10 complex amplitudes in FOCK_BASIS order. Squared norm may
                drop below one after lossy steps.
    """
    coeffs: np.ndarray

    def __post_init__(self):
        """Validate shape and norm bound."""
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        if c.shape != (len(FOCK_BASIS),):
            raise ValueError(f"Fock state needs {len(FOCK_BASIS)} amplitudes, got {c.shape}")
        norm_sq = float(np.vdot(c, c).real)
        if norm_sq > 1.0 + STRUCTURAL_TOL:
            raise ValueError(f"Fock state norm exceeds one: {norm_sq:.12g}")
        object.__setattr__(self, 'coeffs', _frozen(c))

    @classmethod
    def from_symmetric(cls, c_matrix: np.ndarray) -> 'TwoPhotonFockState':
        """
        Build from the symmetric matrix C of sum_ij C_ij a_i^+ a_j^+ |vac>.
        """
        coeffs = np.zeros(len(FOCK_BASIS), dtype=complex)
        for k, (i, j) in enumerate(FOCK_BASIS):
            coeffs[k] = np.sqrt(2.0) * c_matrix[i, i] if i == j else 2.0 * c_matrix[i, j]
        return cls(coeffs)

    def to_symmetric(self) -> np.ndarray:
        """Symmetric creation-operator matrix C."""
        c = np.zeros((N_MODES, N_MODES), dtype=complex)
        for k, (i, j) in enumerate(FOCK_BASIS):
            if i == j:
                c[i, i] = self.coeffs[k] / np.sqrt(2.0)
            else:
                c[i, j] = c[j, i] = self.coeffs[k] / 2.0
        return c

    @classmethod
    def from_polarization(cls, ket: PolarizationKet) -> 'TwoPhotonFockState':
        """
        Place photon A in path 1 and photon B in path 2 with the given
        polarization amplitudes.
        """
        coeffs = np.zeros(len(FOCK_BASIS), dtype=complex)
        for amp, (i, j) in zip(ket.amps, COINCIDENCE_PAIRS):
            coeffs[_index(i, j)] = amp
        return cls(coeffs)

    def amplitude(self, i: int, j: int) -> complex:
        """Amplitude on the basis ket |i,j>."""
        return complex(self.coeffs[_index(i, j)])

    def norm_sq(self) -> float:
        return float(np.vdot(self.coeffs, self.coeffs).real)

    def coincidence_amplitudes(self) -> np.ndarray:
        """Projection onto one photon per path, as (HH, HV, VH, VV) amplitudes."""
        return np.array([self.amplitude(i, j) for i, j in COINCIDENCE_PAIRS])

    def occupied(self, tol: float = 1e-12) -> List[Tuple[int, int]]:
        """Basis kets carrying amplitude above tol."""
        return [b for b, c in zip(FOCK_BASIS, self.coeffs) if abs(c) > tol]


def apply_mode_transform(state: TwoPhotonFockState, M: np.ndarray) -> TwoPhotonFockState:
    """
    Substitute a_i^+ -> sum_j M_ji a_j^+.

    With the symmetric matrix C of the state this is C' = M C M^T.
    Norm is preserved when M is unitary.
    """
    M = np.asarray(M, dtype=complex)
    if M.shape != (N_MODES, N_MODES):
        raise ValueError(f"Mode matrix must be {N_MODES}x{N_MODES}, got {M.shape}")
    c = state.to_symmetric()
    return TwoPhotonFockState.from_symmetric(M @ c @ M.T)


def attenuation_matrix(path: int, t: float) -> np.ndarray:
    """Diagonal mode matrix scaling both polarizations of one path by t."""
    if path not in PATH_MODES:
        raise ValueError(f"Path must be 1 or 2, got {path}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"Transmission must be in [0, 1], got {t}")
    d = np.ones(N_MODES, dtype=complex)
    d[list(PATH_MODES[path])] = t
    return np.diag(d)


def attenuate_path(state: TwoPhotonFockState, path: int, t: float) -> TwoPhotonFockState:
    """
    No-loss conditional evolution of an attenuator in one path.

    Each amplitude picks up t per photon in that path.
    """
    return apply_mode_transform(state, attenuation_matrix(path, t))


def waveplate_matrix(phase_path1: float, phase_path2: float) -> np.ndarray:
    """Phase on V relative to H in each path."""
    return np.diag([1.0, np.exp(1j * phase_path1), 1.0, np.exp(1j * phase_path2)])


def birefringent_bs(theta1: float, theta2: float) -> np.ndarray:
    """
    Balanced beam splitter with polarization-dependent output phases.

    h1 -> (h1 + h2)/sqrt2, h2 -> (h1 - h2)/sqrt2; V modes follow the same
    pattern with e^{i theta1} on output port 1 and e^{i theta2} on port 2.
    Columns are input modes, rows output modes.
    """
    s = 1.0 / np.sqrt(2.0)
    e1, e2 = np.exp(1j * theta1), np.exp(1j * theta2)
    M = np.zeros((N_MODES, N_MODES), dtype=complex)
    # H: modes 0 and 2
    M[0, 0], M[2, 0] = s, s
    M[0, 2], M[2, 2] = s, -s
    # V: modes 1 and 3
    M[1, 1], M[3, 1] = s * e1, s * e2
    M[1, 3], M[3, 3] = s * e1, -s * e2
    return M
