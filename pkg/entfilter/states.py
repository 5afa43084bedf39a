"""
Two-qubit polarization states: kets, density matrices, Bell states and small
Hermitian eigendecompositions.

Basis order is fixed as (HH, HV, VH, VV) everywhere in the package.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Union
import numpy as np

BASIS_LABELS = ('HH', 'HV', 'VH', 'VV')
HH, HV, VH, VV = range(4)

STRUCTURAL_TOL = 1e-9
ALGEBRAIC_TOL = 1e-12
HERMITIAN_REJECT_TOL = 1e-6

BELL_KINDS = ('PsiPlus', 'PsiMinus', 'PhiPlus', 'PhiMinus')


def _frozen(array: np.ndarray) -> np.ndarray:
    """Return a read-only complex copy of an array."""
    out = np.array(array, dtype=complex, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class PolarizationKet:
    """
    Pure two-photon polarization state.

    Attributes:
        amps: 4 complex amplitudes ordered (HH, HV, VH, VV)
        normalized: False marks post-selected intermediates whose norm may
                    fall below one
    """
    amps: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        """Validate shape and norm."""
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.shape != (4,):
            raise ValueError(f"Ket needs 4 amplitudes, got shape {amps.shape}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("Ket amplitudes must be finite")

        norm_sq = float(np.vdot(amps, amps).real)
        if self.normalized and abs(norm_sq - 1.0) > STRUCTURAL_TOL:
            raise ValueError(f"Normalized ket has squared norm {norm_sq:.12g}")
        if not self.normalized and norm_sq > 1.0 + STRUCTURAL_TOL:
            raise ValueError(f"Unnormalized ket exceeds unit norm: {norm_sq:.12g}")

        object.__setattr__(self, 'amps', _frozen(amps))

    def norm(self) -> float:
        """Euclidean norm of the amplitude vector."""
        return float(np.linalg.norm(self.amps))


@dataclass(frozen=True)
class DensityMatrix:
    """
    4x4 two-qubit density matrix in the (HH, HV, VH, VV) basis.

    Construction only checks shape and finiteness; physical validity is
    reported by validate_density().
    """
    matrix: np.ndarray

    def __post_init__(self):
        """Validate shape."""
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError(f"Density matrix must be 4x4, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("Density matrix entries must be finite")
        object.__setattr__(self, 'matrix', _frozen(m))

    @property
    def trace(self) -> float:
        """Real part of the trace."""
        return float(np.trace(self.matrix).real)

    def element(self, row: str, col: str) -> complex:
        """Matrix element by basis label, e.g. element('HV', 'VH')."""
        return complex(self.matrix[BASIS_LABELS.index(row), BASIS_LABELS.index(col)])

    def to_json(self) -> Dict[str, List[List[float]]]:
        """Serialize as {"re": [[...]], "im": [[...]]}, row-major."""
        return {
            're': [[float(x) for x in row] for row in self.matrix.real],
            'im': [[float(x) for x in row] for row in self.matrix.imag],
        }

    @classmethod
    def from_json(cls, payload: Dict[str, List[List[float]]]) -> 'DensityMatrix':
        """Inverse of to_json()."""
        try:
            re = np.asarray(payload['re'], dtype=float)
            im = np.asarray(payload['im'], dtype=float)
        except KeyError as exc:
            raise ValueError(f"Density matrix JSON missing key {exc}") from exc
        return cls(re + 1j * im)


DensityLike = Union[DensityMatrix, np.ndarray]


def as_matrix(rho: DensityLike) -> np.ndarray:
    """Return the raw 4x4 complex array of a density matrix or array."""
    if isinstance(rho, DensityMatrix):
        return rho.matrix
    m = np.asarray(rho, dtype=complex)
    if m.shape != (4, 4):
        raise ValueError(f"Expected a 4x4 matrix, got {m.shape}")
    return m


def _as_amps(k: Union[PolarizationKet, np.ndarray]) -> np.ndarray:
    if isinstance(k, PolarizationKet):
        return k.amps
    return np.asarray(k, dtype=complex).reshape(4)


def bell_state(kind: str) -> PolarizationKet:
    """
    Named Bell state.

    Args:
        kind: 'PsiPlus', 'PsiMinus', 'PhiPlus' or 'PhiMinus'

    Returns:
        Unit-norm PolarizationKet
    """
    s = 1.0 / np.sqrt(2.0)
    table = {
        'PsiPlus': (0.0, s, s, 0.0),
        'PsiMinus': (0.0, s, -s, 0.0),
        'PhiPlus': (s, 0.0, 0.0, s),
        'PhiMinus': (s, 0.0, 0.0, -s),
    }
    if kind not in table:
        raise ValueError(f"Unknown Bell state: {kind}")
    return PolarizationKet(np.array(table[kind], dtype=complex))


def psi_theta(theta: float) -> PolarizationKet:
    """(|HV> + e^{i theta}|VH>)/sqrt(2)."""
    s = 1.0 / np.sqrt(2.0)
    return PolarizationKet(np.array([0.0, s, s * np.exp(1j * theta), 0.0], dtype=complex))


def product_ket(label: str) -> PolarizationKet:
    """Computational basis ket by label ('HH', 'HV', 'VH' or 'VV')."""
    if label not in BASIS_LABELS:
        raise ValueError(f"Unknown basis label: {label}")
    amps = np.zeros(4, dtype=complex)
    amps[BASIS_LABELS.index(label)] = 1.0
    return PolarizationKet(amps)


def ket_to_density(k: PolarizationKet) -> DensityMatrix:
    """Rank-one projector |k><k| of a normalized ket."""
    if not k.normalized:
        raise ValueError("ket_to_density requires a normalized ket")
    return DensityMatrix(np.outer(k.amps, k.amps.conj()))


def fidelity_to_ket(rho: DensityLike, k: Union[PolarizationKet, np.ndarray]) -> float:
    """Overlap <k|rho|k>."""
    amps = _as_amps(k)
    value = np.vdot(amps, as_matrix(rho) @ amps)
    return float(value.real)


def state_fidelity(rho: DensityLike, sigma: DensityLike) -> float:
    """
    Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Square roots are taken through eigh with negative rounding clipped,
    so rank-deficient inputs are handled.
    """
    a = as_matrix(rho)
    b = as_matrix(sigma)
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    sqrt_a = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    inner = sqrt_a @ b @ sqrt_a
    mu = np.linalg.eigvalsh(0.5 * (inner + inner.conj().T))
    return float(np.sum(np.sqrt(np.clip(mu, 0.0, None))) ** 2)


@dataclass(frozen=True)
class HermitianEig:
    """
    Eigendecomposition of a 4x4 Hermitian matrix.

    Attributes:
        eigenvalues: 4 reals, descending
        eigenvectors: 4x4 array whose columns are the orthonormal eigenvectors
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        """V diag(lambda) V^dagger."""
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T

    def ket(self, index: int) -> PolarizationKet:
        """Eigenvector as a ket."""
        return PolarizationKet(self.eigenvectors[:, index])


def hermiticity_defect(m: np.ndarray) -> float:
    """Largest entry of |M - M^dagger|."""
    return float(np.max(np.abs(m - m.conj().T)))


def hermitian_eig(rho: DensityLike) -> HermitianEig:
    """
    Eigendecomposition with eigenvalues sorted descending.

    Raises:
        ValueError: if the input deviates from Hermitian by more than 1e-6
    """
    m = as_matrix(rho)
    defect = hermiticity_defect(m)
    if defect > HERMITIAN_REJECT_TOL:
        raise ValueError(f"Matrix is not Hermitian (defect {defect:.3g})")

    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    order = np.argsort(w)[::-1]
    eigenvalues = np.array(w[order], dtype=float)
    eigenvalues.flags.writeable = False
    return HermitianEig(eigenvalues=eigenvalues, eigenvectors=_frozen(v[:, order]))


@dataclass(frozen=True)
class DensityReport:
    """
    Physical-validity diagnostics for a candidate density matrix.

    Attributes:
        hermiticity_defect: max |rho - rho^dagger| entry
        trace_defect: |Tr(rho) - 1|
        min_eigenvalue: smallest eigenvalue of the Hermitian part
        hermitian_ok, trace_ok, positive_ok: per-invariant verdicts
    """
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    hermitian_ok: bool
    trace_ok: bool
    positive_ok: bool

    @property
    def passed(self) -> bool:
        return self.hermitian_ok and self.trace_ok and self.positive_ok

    def failures(self) -> List[str]:
        """Human readable list of violated invariants."""
        out = []
        if not self.hermitian_ok:
            out.append(f"hermiticity defect {self.hermiticity_defect:.3g}")
        if not self.trace_ok:
            out.append(f"trace defect {self.trace_defect:.3g}")
        if not self.positive_ok:
            out.append(f"negative eigenvalue {self.min_eigenvalue:.3g}")
        return out


def validate_density(rho: DensityLike, tol: float = STRUCTURAL_TOL) -> DensityReport:
    """Check Hermiticity, unit trace and positivity of a 4x4 matrix."""
    m = as_matrix(rho)
    h_defect = hermiticity_defect(m)
    t_defect = abs(float(np.trace(m).real) - 1.0) + abs(float(np.trace(m).imag))
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))))
    return DensityReport(
        hermiticity_defect=h_defect,
        trace_defect=t_defect,
        min_eigenvalue=min_eig,
        hermitian_ok=h_defect <= tol,
        trace_ok=t_defect <= tol,
        positive_ok=min_eig >= -tol,
    )


def random_ket(rng: np.random.Generator) -> PolarizationKet:
    """Haar-random pure state."""
    z = rng.normal(size=4) + 1j * rng.normal(size=4)
    return PolarizationKet(z / np.linalg.norm(z))


def random_density_matrix(
    rng: np.random.Generator,
    rank: Optional[int] = None
) -> DensityMatrix:
    """
    Random mixed state from the Ginibre ensemble.

    Args:
        rng: Seeded generator
        rank: Rank of the state (default 4, full rank)
    """
    rank = 4 if rank is None else rank
    if not 1 <= rank <= 4:
        raise ValueError(f"Rank must be in 1..4: {rank}")
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)
