"""
Entanglement metrics: concurrence, entanglement fidelity, survivor phase,
purity and the F_e > 1/2 witness.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Union
import numpy as np
from scipy import optimize
from scipy.linalg import expm
from scipy.stats import unitary_group

from .states import (
    DensityLike, PolarizationKet, as_matrix, bell_state, psi_theta, fidelity_to_ket,
    HV, VH, STRUCTURAL_TOL,
)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SPIN_FLIP = np.kron(SIGMA_Y, SIGMA_Y)

EIGEN_FLOOR = 1e-14
THETA_UNDEFINED_TOL = 1e-12


def _magic_basis() -> np.ndarray:
    cols = [
        bell_state('PhiPlus').amps,
        1j * bell_state('PhiMinus').amps,
        1j * bell_state('PsiPlus').amps,
        bell_state('PsiMinus').amps,
    ]
    return np.column_stack(cols)


MAGIC_BASIS = _magic_basis()


def _in_range(name: str, value: float, lo: float, hi: float) -> float:
    """Clip rounding excursions; reject anything further out."""
    if value < lo - STRUCTURAL_TOL or value > hi + STRUCTURAL_TOL:
        raise ValueError(f"{name} = {value:.12g} outside [{lo}, {hi}]")
    return float(min(max(value, lo), hi))


def spin_flip(rho: DensityLike) -> np.ndarray:
    """(sigma_y x sigma_y) conj(rho) (sigma_y x sigma_y)."""
    m = as_matrix(rho)
    return SPIN_FLIP @ m.conj() @ SPIN_FLIP


def concurrence_lambdas(rho: DensityLike) -> np.ndarray:
    """
    Descending square roots of the eigenvalues of rho * spin_flip(rho).

    Computed as the singular values of tau = A^T (sy x sy) A with
    rho = A A^+, eigenvalues of rho below 1e-14 set to zero.
    """
    m = as_matrix(rho)
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    w = np.where(w > EIGEN_FLOOR, w, 0.0)
    a = v * np.sqrt(w)
    tau = a.T @ SPIN_FLIP @ a
    return np.linalg.svd(tau, compute_uv=False)


def concurrence(rho: DensityLike) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4)."""
    lam = concurrence_lambdas(rho)
    value = max(0.0, float(lam[0] - lam[1] - lam[2] - lam[3]))
    return _in_range('concurrence', value, 0.0, 1.0)


def concurrence_pure_oracle(k: PolarizationKet) -> float:
    """Pure-state concurrence |<k| sy x sy |k*>|."""
    if abs(k.norm() - 1.0) > STRUCTURAL_TOL:
        raise ValueError("Pure-state concurrence needs a unit-norm ket")
    return float(abs(k.amps @ SPIN_FLIP @ k.amps))


def entanglement_fidelity(rho: DensityLike) -> float:
    """
    Fully entangled fraction max_Phi <Phi|rho|Phi>.

    Maximally entangled states are the real unit vectors in the magic basis,
    so the maximum is the top eigenvalue of Re(Q^+ rho Q).
    """
    m = as_matrix(rho)
    in_magic = MAGIC_BASIS.conj().T @ m @ MAGIC_BASIS
    real_part = in_magic.real
    real_part = 0.5 * (real_part + real_part.T)
    value = float(np.linalg.eigvalsh(real_part)[-1])
    return _in_range('entanglement_fidelity', value, 0.0, 1.0)


def _local_maximally_entangled(u: np.ndarray) -> np.ndarray:
    return np.kron(u, np.eye(2)) @ bell_state('PhiPlus').amps


def fef_brute_oracle(
    rho: DensityLike,
    samples: int = 2000,
    seed: Union[int, np.random.Generator] = 0,
    refine: int = 3
) -> float:
    """
    Fully entangled fraction by search over (U x 1)|Phi+>.

    Samples Haar-random U, then refines the best `refine` candidates with
    Nelder-Mead over U exp(i a.sigma).
    """
    if samples < 1000:
        raise ValueError(f"Oracle needs at least 1000 samples, got {samples}")
    m = as_matrix(rho)
    rng = np.random.default_rng(seed)

    def overlap(u: np.ndarray) -> float:
        phi = _local_maximally_entangled(u)
        return float(np.vdot(phi, m @ phi).real)

    unitaries = unitary_group.rvs(2, size=samples, random_state=rng)
    values = np.array([overlap(u) for u in unitaries])
    best = float(values.max())

    for idx in np.argsort(values)[::-1][:refine]:
        u0 = unitaries[idx]

        def objective(a: np.ndarray) -> float:
            gen = a[0] * SIGMA_X + a[1] * SIGMA_Y + a[2] * SIGMA_Z
            return -overlap(u0 @ expm(1j * gen))

        res = optimize.minimize(
            objective, np.zeros(3), method='Nelder-Mead',
            options={'xatol': 1e-10, 'fatol': 1e-14, 'maxiter': 4000}
        )
        best = max(best, -float(res.fun))

    return best


@dataclass(frozen=True)
class ThetaFit:
    """
    Best Psi_theta approximation of a state.

    Attributes:
        theta: Maximizing phase in (-pi, pi]; 0 when undefined
        overlap: <Psi_theta|rho|Psi_theta> at that phase
        defined: False when the HV/VH coherence vanishes
    """
    theta: float
    overlap: float
    defined: bool = True

    @property
    def theta_over_pi(self) -> float:
        return self.theta / np.pi


def fit_theta(rho: DensityLike) -> ThetaFit:
    """
    Closed-form survivor phase theta* = -arg <HV|rho|VH>.

    The overlap there is (rho_HV,HV + rho_VH,VH)/2 + |rho_HV,VH|.
    """
    m = as_matrix(rho)
    coherence = m[HV, VH]
    populations = 0.5 * float((m[HV, HV] + m[VH, VH]).real)
    if abs(coherence) < THETA_UNDEFINED_TOL:
        return ThetaFit(theta=0.0, overlap=_in_range('overlap', populations, 0.0, 1.0),
                        defined=False)

    theta = -float(np.angle(coherence))
    if theta <= -np.pi:
        theta += 2.0 * np.pi
    overlap = populations + float(abs(coherence))
    return ThetaFit(theta=theta, overlap=_in_range('overlap', overlap, 0.0, 1.0))


def theta_grid_scan(rho: DensityLike, points: int = 10_000) -> ThetaFit:
    """Brute-force maximization of the Psi_theta overlap on a uniform grid."""
    thetas = np.linspace(-np.pi, np.pi, points, endpoint=False)
    overlaps = np.array([fidelity_to_ket(rho, psi_theta(t)) for t in thetas])
    i = int(np.argmax(overlaps))
    return ThetaFit(theta=float(thetas[i]), overlap=float(overlaps[i]))


def purity(rho: DensityLike) -> float:
    """Tr(rho^2)."""
    m = as_matrix(rho)
    value = float(np.trace(m @ m).real)
    return _in_range('purity', value, 0.25, 1.0)


@dataclass(frozen=True)
class MetricReport:
    """
    All entanglement metrics of one state.

    witness_entangled is strictly entanglement_fidelity > 1/2.
    """
    concurrence: float
    entanglement_fidelity: float
    theta_fit: float
    purity: float
    witness_entangled: bool
    theta_defined: bool = True

    def to_dict(self) -> Dict[str, Union[float, bool]]:
        """JSON-ready representation."""
        return {
            'concurrence': self.concurrence,
            'entanglement_fidelity': self.entanglement_fidelity,
            'theta_fit_rad': self.theta_fit,
            'theta_fit_over_pi': self.theta_fit / np.pi,
            'purity': self.purity,
            'witness_entangled': self.witness_entangled,
        }

    def print_summary(self, title: Optional[str] = None):
        """Print metrics in a readable format."""
        print("=" * 50)
        print(title or "ENTANGLEMENT METRICS")
        print("=" * 50)
        print(f"Concurrence:            {self.concurrence:>10.4f}")
        print(f"Entanglement fidelity:  {self.entanglement_fidelity:>10.4f}")
        theta = f"{self.theta_fit / np.pi:>10.4f} pi" if self.theta_defined else "   undefined"
        print(f"Survivor phase:         {theta}")
        print(f"Purity:                 {self.purity:>10.4f}")
        print(f"Witness (F_e > 1/2):    {'entangled' if self.witness_entangled else 'no':>10}")
        print("=" * 50)


def full_report(rho: DensityLike) -> MetricReport:
    """Aggregate every metric of rho."""
    f = entanglement_fidelity(rho)
    fit = fit_theta(rho)
    return MetricReport(
        concurrence=concurrence(rho),
        entanglement_fidelity=f,
        theta_fit=fit.theta,
        purity=purity(rho),
        witness_entangled=f > 0.5,
        theta_defined=fit.defined,
    )
