"""
Two-qubit state tomography.

Simulates the 16 product-projector measurements with Poisson counting
statistics and reconstructs the state by linear inversion and by maximum
likelihood, with Poisson-bootstrap error bars.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union
import numpy as np
from scipy import optimize

from .states import DensityLike, DensityMatrix, as_matrix, STRUCTURAL_TOL
from .utils import parallel_map, task_rng

logger = logging.getLogger(__name__)

N_SETTINGS = 16

_S = 1.0 / np.sqrt(2.0)
ANALYZERS: Dict[str, np.ndarray] = {
    'H': np.array([1.0, 0.0], dtype=complex),
    'V': np.array([0.0, 1.0], dtype=complex),
    'D': np.array([_S, _S], dtype=complex),
    'R': np.array([_S, 1j * _S], dtype=complex),
}
ANALYZER_ORDER = ('H', 'V', 'D', 'R')


@dataclass(frozen=True)
class TomographyConfig:
    """
    Reconstruction settings.

    Attributes:
        max_iterations: Iteration cap of each optimizer run
        restarts: Seeded random restarts around the linear estimate
        rel_tol: Relative NLL improvement below which a confirmation sweep
                 counts as converged
        bootstrap_resamples: Default number of Poisson resamples
        bootstrap_restarts: Restarts used inside each bootstrap resample
        eigen_floor: Eigenvalue floor when making the linear estimate PSD
        restart_scale: Size of restart perturbations relative to |T|
    """
    max_iterations: int = 20000
    restarts: int = 3
    rel_tol: float = 1e-10
    bootstrap_resamples: int = 200
    bootstrap_restarts: int = 0
    eigen_floor: float = 1e-8
    restart_scale: float = 0.1

    def __post_init__(self):
        """Validate settings."""
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be positive, got {self.max_iterations}")
        if self.restarts < 0 or self.bootstrap_restarts < 0:
            raise ValueError("restart counts must be non-negative")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.bootstrap_resamples < 2:
            raise ValueError(
                f"bootstrap_resamples must be at least 2, got {self.bootstrap_resamples}"
            )
        if not 0 < self.eigen_floor < 0.25:
            raise ValueError(f"eigen_floor must be in (0, 0.25), got {self.eigen_floor}")

    def to_dict(self) -> Dict[str, float]:
        return {
            'max_iterations': self.max_iterations,
            'restarts': self.restarts,
            'rel_tol': self.rel_tol,
            'bootstrap_resamples': self.bootstrap_resamples,
            'bootstrap_restarts': self.bootstrap_restarts,
            'eigen_floor': self.eigen_floor,
            'restart_scale': self.restart_scale,
        }


@dataclass(frozen=True)
class MeasurementSetting:
    """
    Product projector |a><a| x |b><b|.

    Attributes:
        analyzer_a: Single-qubit ket analyzing photon A
        analyzer_b: Single-qubit ket analyzing photon B
        label: Short name, e.g. 'DR'
    """
    analyzer_a: np.ndarray
    analyzer_b: np.ndarray
    label: str

    def __post_init__(self):
        for name in ('analyzer_a', 'analyzer_b'):
            ket = np.asarray(getattr(self, name), dtype=complex).reshape(-1)
            if ket.shape != (2,):
                raise ValueError(f"{name} must have 2 amplitudes, got {ket.shape}")
            if abs(np.linalg.norm(ket) - 1.0) > STRUCTURAL_TOL:
                raise ValueError(f"{name} must be unit norm")
            ket = ket.copy()
            ket.flags.writeable = False
            object.__setattr__(self, name, ket)

    @property
    def ket(self) -> np.ndarray:
        """Two-photon analyzer ket a x b."""
        return np.kron(self.analyzer_a, self.analyzer_b)

    @property
    def projector(self) -> np.ndarray:
        k = self.ket
        return np.outer(k, k.conj())


def setting_from_label(label: str) -> MeasurementSetting:
    """Setting from a two-letter label over {H, V, D, R}."""
    if len(label) != 2 or any(c not in ANALYZERS for c in label):
        raise ValueError(f"Unknown measurement label: {label!r}")
    return MeasurementSetting(ANALYZERS[label[0]], ANALYZERS[label[1]], label)


def canonical_settings() -> List[MeasurementSetting]:
    """{H, V, D, R} x {H, V, D, R}, photon A's analyzer varying slowest."""
    return [setting_from_label(a + b) for a in ANALYZER_ORDER for b in ANALYZER_ORDER]


def projector_matrix(settings: Sequence[MeasurementSetting]) -> np.ndarray:
    """Rows are the vectorized projectors."""
    return np.array([s.projector.reshape(-1) for s in settings])


def _ket_matrix(settings: Sequence[MeasurementSetting]) -> np.ndarray:
    return np.array([s.ket for s in settings])


def born_probabilities(
    rho: DensityLike,
    settings: Optional[Sequence[MeasurementSetting]] = None
) -> np.ndarray:
    """p_i = <a_i b_i|rho|a_i b_i>, clipped to [0, 1] within 1e-9."""
    settings = canonical_settings() if settings is None else settings
    kets = _ket_matrix(settings)
    p = np.einsum('ij,jk,ik->i', kets.conj(), as_matrix(rho), kets).real
    if np.any(p < -STRUCTURAL_TOL) or np.any(p > 1.0 + STRUCTURAL_TOL):
        raise ValueError(f"Born probabilities out of range: min {p.min():.3g}, max {p.max():.3g}")
    return np.clip(p, 0.0, 1.0)


@dataclass(frozen=True)
class TomographyDataset:
    """
    Coincidence counts of one tomography run.

    Attributes:
        settings: 16 measurement settings
        counts: 16 non-negative counts (integers from simulate_counts,
                expected values from exact_counts)
        nominal_pairs_per_setting: Known flux N per setting
        seed: Seed the counts were drawn with, None for expected values
    """
    settings: Tuple[MeasurementSetting, ...]
    counts: np.ndarray
    nominal_pairs_per_setting: int
    seed: Optional[int] = None

    def __post_init__(self):
        """Validate sizes and signs."""
        settings = tuple(self.settings)
        counts = np.asarray(self.counts, dtype=float).reshape(-1)
        if len(settings) != N_SETTINGS or counts.shape != (N_SETTINGS,):
            raise ValueError(
                f"Dataset needs {N_SETTINGS} settings and counts, "
                f"got {len(settings)} and {counts.shape[0]}"
            )
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise ValueError("Counts must be finite and non-negative")
        if self.nominal_pairs_per_setting < 1:
            raise ValueError(
                f"nominal_pairs_per_setting must be positive, got {self.nominal_pairs_per_setting}"
            )
        counts.flags.writeable = False
        object.__setattr__(self, 'settings', settings)
        object.__setattr__(self, 'counts', counts)

    @property
    def N(self) -> int:
        return self.nominal_pairs_per_setting

    @property
    def labels(self) -> List[str]:
        return [s.label for s in self.settings]

    @property
    def total_counts(self) -> float:
        return float(self.counts.sum())

    def with_counts(self, counts: np.ndarray, N: Optional[int] = None,
                    seed: Optional[int] = None) -> 'TomographyDataset':
        """Same settings, new counts."""
        return TomographyDataset(self.settings, counts, N or self.N, seed)

    def to_json(self) -> Dict[str, object]:
        """{"settings": [...], "counts": [...], "N": int, "seed": int}."""
        integral = np.all(self.counts == np.round(self.counts))
        counts = [int(c) for c in self.counts] if integral else [float(c) for c in self.counts]
        return {'settings': self.labels, 'counts': counts, 'N': self.N, 'seed': self.seed}

    @classmethod
    def from_json(cls, payload: Mapping[str, object]) -> 'TomographyDataset':
        try:
            settings = [setting_from_label(label) for label in payload['settings']]
            return cls(settings, np.asarray(payload['counts'], dtype=float),
                       int(payload['N']), payload.get('seed'))
        except KeyError as exc:
            raise ValueError(f"Dataset JSON missing key {exc}") from exc


def simulate_counts(
    rho: DensityLike,
    N: int,
    seed: int,
    settings: Optional[Sequence[MeasurementSetting]] = None
) -> TomographyDataset:
    """
    Poisson counts with means N p_i from a generator seeded with `seed`.
    """
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    settings = canonical_settings() if settings is None else list(settings)
    p = born_probabilities(rho, settings)
    rng = np.random.default_rng(seed)
    counts = rng.poisson(N * p)
    return TomographyDataset(settings, counts, N, seed)


def exact_counts(
    rho: DensityLike,
    N: int,
    settings: Optional[Sequence[MeasurementSetting]] = None
) -> TomographyDataset:
    """Noise-free dataset whose counts are the expected values N p_i."""
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    settings = canonical_settings() if settings is None else list(settings)
    return TomographyDataset(settings, N * born_probabilities(rho, settings), N, None)


# Orthonormal Hermitian operator basis sigma_a x sigma_b / 2; index 0 is 1/2.
_PAULIS = (
    np.eye(2, dtype=complex),
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)
OPERATOR_BASIS = np.array([np.kron(a, b) / 2.0 for a in _PAULIS for b in _PAULIS])


@dataclass(frozen=True)
class LinearEstimate:
    """Linear-inversion estimate; matrix is Hermitian with unit trace, maybe not PSD."""
    matrix: np.ndarray
    residual: float


def linear_reconstruct(ds: TomographyDataset) -> LinearEstimate:
    """
    Least-squares solution of Tr(rho Pi_i) = counts_i / N over Hermitian
    unit-trace rho.

    Raises:
        ValueError: for all-zero counts or a singular measurement set
    """
    if ds.total_counts <= 0:
        raise ValueError("Degenerate dataset: all counts are zero")
    kets = _ket_matrix(ds.settings)
    # A_ik = Tr(Pi_i B_k), real because both are Hermitian.
    A = np.einsum('ij,kjl,il->ik', kets.conj(), OPERATOR_BASIS, kets).real
    if np.linalg.matrix_rank(A) < N_SETTINGS:
        raise ValueError("Measurement settings are not informationally complete")

    f = ds.counts / ds.N
    r0 = 0.5  # Tr(rho) = 1 fixes the identity component
    r_rest, *_ = np.linalg.lstsq(A[:, 1:], f - A[:, 0] * r0, rcond=None)
    r = np.concatenate([[r0], r_rest])
    matrix = np.einsum('k,kij->ij', r, OPERATOR_BASIS)
    matrix = 0.5 * (matrix + matrix.conj().T)
    residual = float(np.linalg.norm(A @ r - f))
    return LinearEstimate(matrix=matrix, residual=residual)


def clip_to_physical(matrix: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Nearest-spectrum PSD unit-trace matrix: eigenvalues clipped at `floor`."""
    m = 0.5 * (matrix + matrix.conj().T)
    w, v = np.linalg.eigh(m)
    w = np.clip(w, floor, None)
    if w.sum() <= 0:
        w = np.full(4, 0.25)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real


_TRIL = np.tril_indices(4, -1)


def t_from_params(t_params: np.ndarray) -> np.ndarray:
    """Lower-triangular T: 4 real diagonal entries, then (re, im) of the 6 below."""
    T = np.zeros((4, 4), dtype=complex)
    T[np.diag_indices(4)] = t_params[:4]
    T[_TRIL] = t_params[4:10] + 1j * t_params[10:16]
    return T


def params_from_t(T: np.ndarray) -> np.ndarray:
    below = T[_TRIL]
    return np.concatenate([np.diag(T).real, below.real, below.imag])


def rho_from_params(t_params: np.ndarray) -> np.ndarray:
    """rho = T^+ T / Tr(T^+ T)."""
    T = t_from_params(t_params)
    X = T.conj().T @ T
    return X / np.trace(X).real


def params_from_rho(rho: np.ndarray) -> np.ndarray:
    """
    Parameters with T^+ T = rho.

    Cholesky of the index-reversed matrix gives rho = T^+ T with T lower
    triangular. rho must be positive definite.
    """
    P = np.eye(4)[::-1]
    L = np.linalg.cholesky(P @ rho @ P)
    T = P @ L.conj().T @ P
    return params_from_t(T)


class PoissonLikelihood:
    """
    Poisson likelihood of a dataset as a function of T parameters.

    The objective handed to the optimizer is the deviance divided by N, which
    differs from the NLL by a constant and a positive factor.
    """

    def __init__(self, ds: TomographyDataset):
        self.ds = ds
        self.kets = _ket_matrix(ds.settings)
        self.counts = ds.counts
        self.N = float(ds.N)
        self.positive = self.counts > 0
        n = self.counts[self.positive]
        self._saturated = float(np.sum(n - n * np.log(n)))

    def probabilities(self, rho: np.ndarray) -> np.ndarray:
        p = np.einsum('ij,jk,ik->i', self.kets.conj(), rho, self.kets).real
        return np.clip(p, 1e-300, None)

    def nll(self, rho: np.ndarray) -> float:
        """sum_i N p_i - n_i ln(N p_i); zero counts contribute N p_i only."""
        mu = self.N * self.probabilities(rho)
        return float(np.sum(mu) - np.sum(self.counts[self.positive] * np.log(mu[self.positive])))

    def deviance(self, rho: np.ndarray) -> float:
        return self.nll(rho) - self._saturated

    def objective(self, t_params: np.ndarray) -> Tuple[float, np.ndarray]:
        """Scaled deviance and its gradient in the T parameters."""
        T = t_from_params(t_params)
        X = T.conj().T @ T
        s = float(np.trace(X).real)
        rho = X / s
        p = self.probabilities(rho)

        mu = self.N * p
        value = np.sum(mu) - self._saturated
        value -= np.sum(self.counts[self.positive] * np.log(mu[self.positive]))

        # dD/dp_i, then G = sum g_i Pi_i and the trace-normalization correction
        g = self.N - self.counts / p
        G = (self.kets.T * g) @ self.kets.conj()
        G_norm = (G - np.trace(G @ rho).real * np.eye(4)) / s
        Zt = (G_norm @ T.conj().T).T

        grad_t = 2.0 * Zt
        grad = np.concatenate([
            np.diag(grad_t).real,
            grad_t[_TRIL].real,
            -grad_t[_TRIL].imag,
        ])
        return float(value) / self.N, grad / self.N


@dataclass(frozen=True)
class ReconstructionResult:
    """
    Maximum-likelihood estimate and optimizer diagnostics.

    Attributes:
        rho_hat: PSD unit-trace estimate
        nll: Negative log-likelihood at the optimum
        iterations: Optimizer iterations over all runs
        converged: Confirmation sweep improved NLL by at most rel_tol
        t_params: 16 parameters of the triangular factor
    """
    rho_hat: DensityMatrix
    nll: float
    iterations: int
    converged: bool
    t_params: np.ndarray = field(repr=False)

    def __post_init__(self):
        if not np.isfinite(self.nll):
            raise ValueError("NLL must be finite")

    def to_json(self) -> Dict[str, object]:
        return {
            'rho_hat': self.rho_hat.to_json(),
            'nll': self.nll,
            'iterations': self.iterations,
            'converged': self.converged,
        }


def _minimize(likelihood: PoissonLikelihood, x0: np.ndarray,
              config: TomographyConfig) -> optimize.OptimizeResult:
    return optimize.minimize(
        likelihood.objective, x0, jac=True, method='L-BFGS-B',
        options={
            'maxiter': config.max_iterations,
            'maxfun': 2 * config.max_iterations,
            'ftol': 1e-15,
            'gtol': 1e-12,
        }
    )


def mle_reconstruct(
    ds: TomographyDataset,
    config: Optional[TomographyConfig] = None,
    restarts: Optional[int] = None
) -> ReconstructionResult:
    """
    Maximum-likelihood density matrix.

    Starts from the eigen-clipped linear estimate, adds seeded random
    restarts, keeps the best, then runs one confirmation sweep from it.
    The estimate is never worse than the start.

    Raises:
        ValueError: when every count is zero
    """
    config = config or TomographyConfig()
    n_restarts = config.restarts if restarts is None else restarts
    likelihood = PoissonLikelihood(ds)

    start_rho = clip_to_physical(linear_reconstruct(ds).matrix, config.eigen_floor)
    x_start = params_from_rho(start_rho)
    f_start, _ = likelihood.objective(x_start)

    best_x, best_f = x_start, f_start
    iterations = 0

    starts = [x_start]
    rng = task_rng(ds.seed if ds.seed is not None else 0, 0)
    scale = config.restart_scale * float(np.linalg.norm(x_start))
    for _ in range(n_restarts):
        starts.append(x_start + scale * rng.standard_normal(x_start.shape))

    for x0 in starts:
        res = _minimize(likelihood, x0, config)
        iterations += int(res.nit)
        if np.isfinite(res.fun) and res.fun < best_f:
            best_x, best_f = np.asarray(res.x), float(res.fun)

    confirm = _minimize(likelihood, best_x, config)
    iterations += int(confirm.nit)
    improvement = best_f - float(confirm.fun) if np.isfinite(confirm.fun) else 0.0
    if improvement > 0:
        best_x, best_f = np.asarray(confirm.x), float(confirm.fun)

    rho_hat = rho_from_params(best_x)
    nll = likelihood.nll(rho_hat)
    converged = improvement * likelihood.N <= config.rel_tol * max(1.0, abs(nll))
    if not converged:
        logger.warning(
            "MLE not converged: confirmation sweep improved NLL by %.3g", improvement * ds.N
        )

    return ReconstructionResult(
        rho_hat=DensityMatrix(0.5 * (rho_hat + rho_hat.conj().T)),
        nll=nll,
        iterations=iterations,
        converged=bool(converged),
        t_params=best_x,
    )


@dataclass(frozen=True)
class BootstrapEstimate:
    """Sample mean and standard deviation of a metric over Poisson resamples."""
    mean: float
    std: float
    resamples: int
    skipped: int = 0

    def to_dict(self) -> Dict[str, float]:
        return {'mean': self.mean, 'std': self.std,
                'resamples': self.resamples, 'skipped': self.skipped}


MAX_SKIP_FRACTION = 0.10


def bootstrap_metrics(
    ds: TomographyDataset,
    metrics: Mapping[str, Callable[[DensityMatrix], float]],
    resamples: Optional[int] = None,
    seed: int = 0,
    config: Optional[TomographyConfig] = None,
    threads: int = 1
) -> Dict[str, BootstrapEstimate]:
    """
    Poisson bootstrap of several metrics on one set of resamples.

    Resample i draws counts_i' ~ Poisson(counts_i) from the stream
    (seed, i), so results do not depend on `threads`.

    Raises:
        ValueError: for fewer than 2 resamples
        RuntimeError: if more than 10% of resamples fail to reconstruct
    """
    config = config or TomographyConfig()
    resamples = config.bootstrap_resamples if resamples is None else resamples
    if resamples < 2:
        raise ValueError(f"Bootstrap needs at least 2 resamples, got {resamples}")

    def one(index: int) -> Optional[Dict[str, float]]:
        rng = task_rng(seed, index)
        counts = rng.poisson(ds.counts)
        sample = ds.with_counts(counts, seed=None)
        try:
            result = mle_reconstruct(sample, config, restarts=config.bootstrap_restarts)
            values = {name: float(fn(result.rho_hat)) for name, fn in metrics.items()}
        except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            logger.warning("Bootstrap resample %d skipped: %s", index, exc)
            return None
        if not all(np.isfinite(v) for v in values.values()):
            return None
        return values

    outcomes = parallel_map(one, range(resamples), threads)
    kept = [o for o in outcomes if o is not None]
    skipped = resamples - len(kept)
    if skipped > MAX_SKIP_FRACTION * resamples or len(kept) < 2:
        raise RuntimeError(f"Bootstrap failed: {skipped} of {resamples} resamples skipped")
    if skipped:
        logger.warning("Bootstrap skipped %d of %d resamples", skipped, resamples)

    out = {}
    for name in metrics:
        values = np.array([o[name] for o in kept])
        out[name] = BootstrapEstimate(
            mean=float(values.mean()),
            std=float(values.std(ddof=1)),
            resamples=resamples,
            skipped=skipped,
        )
    return out


def bootstrap_metric(
    ds: TomographyDataset,
    metric: Callable[[DensityMatrix], float],
    resamples: Optional[int] = None,
    seed: int = 0,
    config: Optional[TomographyConfig] = None,
    threads: int = 1
) -> BootstrapEstimate:
    """Single-metric form of bootstrap_metrics."""
    return bootstrap_metrics(ds, {'metric': metric}, resamples, seed, config, threads)['metric']
