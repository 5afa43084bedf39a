"""
End-to-end pipelines: input and output characterization, the loss sweep
and the four robustness configurations.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence
import numpy as np
import pandas as pd

from .channel import (
    ChannelConfig, ChannelOutput, FilterAnnihilationError, analytic_concurrence_vs_loss,
    fock_channel_output, gamma_from_eps,
)
from .metrics import MetricReport, concurrence, entanglement_fidelity, full_report
from .source import SourceConfig, input_concurrence, spdc_input_state
from .states import DensityMatrix
from .tomography import (
    ReconstructionResult, TomographyConfig, bootstrap_metrics, mle_reconstruct, simulate_counts,
)
from .utils import parallel_map, task_seed

logger = logging.getLogger(__name__)

CASE_IDS = ('I', 'II', 'III', 'IV')
STAGES = ('input', 'output')

DEFAULT_EPS = 0.9
DEFAULT_COUNTS = 4000
DEFAULT_SWEEP_BOOTSTRAP = 100

SWEEP_COLUMNS = [
    'eps', 'gamma', 'C_analytic', 'C_fock_exact', 'C_fock_tomo_input', 'C_tomo', 'C_tomo_std',
    'p_success',
]

BOOTSTRAPPED_METRICS = {
    'concurrence': concurrence,
    'entanglement_fidelity': entanglement_fidelity,
}


@dataclass(frozen=True)
class CaseConfig:
    """
    One robustness configuration.

    Attributes:
        case_id: 'I', 'II', 'III' or 'IV'
        source: Photon-pair source
        channel: Filter interferometer
        counts_per_setting: Flux N of the simulated tomography
        seed: Master seed of the case
        tomography: Reconstruction settings
    """
    case_id: str
    source: SourceConfig
    channel: ChannelConfig
    counts_per_setting: int = DEFAULT_COUNTS
    seed: int = 0
    tomography: TomographyConfig = field(default_factory=TomographyConfig)

    def __post_init__(self):
        if self.case_id not in CASE_IDS:
            raise ValueError(f"Unknown case: {self.case_id!r} (expected one of {CASE_IDS})")
        if self.counts_per_setting < 1:
            raise ValueError(f"counts_per_setting must be positive, got {self.counts_per_setting}")
        if self.seed < 0:
            raise ValueError(f"seed must be non-negative, got {self.seed}")

    def to_dict(self) -> Dict[str, object]:
        return {
            'case_id': self.case_id,
            'source': self.source.to_dict(),
            'channel': self.channel.to_dict(),
            'counts_per_setting': self.counts_per_setting,
            'seed': self.seed,
            'tomography': self.tomography.to_dict(),
        }


def default_case(
    case_id: str,
    eps: float = DEFAULT_EPS,
    counts: int = DEFAULT_COUNTS,
    seed: int = 0,
    source: Optional[SourceConfig] = None,
    channel: Optional[ChannelConfig] = None,
    tomography: Optional[TomographyConfig] = None
) -> CaseConfig:
    """
    Standard configuration of a robustness case.

    I:   balanced pump, calibrated overlap, channel at loss rate eps
    II:  horizontal pump, so the input is |HV>
    III: case I with a quarter-wave phase in arm c
    IV:  case I with one compensator crystal removed

    `source` and `channel` replace the case I baselines before the case
    modification is applied.
    """
    if case_id not in CASE_IDS:
        raise ValueError(f"Unknown case: {case_id!r} (expected one of {CASE_IDS})")
    base_source = source or SourceConfig.calibrated()
    base_channel = channel.with_gamma(gamma_from_eps(eps)) if channel else ChannelConfig.from_eps(eps)

    if case_id == 'II':
        base_source = SourceConfig.from_pump_angle(
            0.0,
            overlap=base_source.overlap,
            quartz_units=base_source.quartz_units,
            delay_per_quartz=base_source.delay_per_quartz,
        )
    elif case_id == 'III':
        base_channel = replace(base_channel, arm_waveplate_phase_c=np.pi / 2)
    elif case_id == 'IV':
        base_source = base_source.with_quartz_units(base_source.quartz_units - 1)

    return CaseConfig(
        case_id=case_id,
        source=base_source,
        channel=base_channel,
        counts_per_setting=counts,
        seed=seed,
        tomography=tomography or TomographyConfig(),
    )


@dataclass(frozen=True)
class CaseReport:
    """
    Exact and tomographic metrics of one case.

    Tomographic values are the MLE point estimates; *_mean and *_std come
    from the Poisson bootstrap.
    """
    case_id: str
    entanglement_fidelity_mean: float
    entanglement_fidelity_std: float
    concurrence_mean: float
    concurrence_std: float
    theta_fit: float
    success_probability: float
    input_concurrence: float
    concurrence_exact: float
    entanglement_fidelity_exact: float
    theta_fit_exact: float
    concurrence_tomo: float
    entanglement_fidelity_tomo: float
    witness_entangled: bool
    bootstrap_skipped: int = 0
    mle_converged: bool = True

    def __post_init__(self):
        for name in ('entanglement_fidelity_mean', 'concurrence_mean'):
            value = getattr(self, name)
            if not -1e-9 <= value <= 1.0 + 1e-9:
                raise ValueError(f"{name} out of [0, 1]: {value}")
        for name in ('entanglement_fidelity_std', 'concurrence_std'):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> Dict[str, object]:
        return {
            'case_id': self.case_id,
            'entanglement_fidelity_mean': self.entanglement_fidelity_mean,
            'entanglement_fidelity_std': self.entanglement_fidelity_std,
            'concurrence_mean': self.concurrence_mean,
            'concurrence_std': self.concurrence_std,
            'theta_fit_rad': self.theta_fit,
            'theta_fit_over_pi': self.theta_fit / np.pi,
            'success_probability': self.success_probability,
            'input_concurrence': self.input_concurrence,
            'concurrence_exact': self.concurrence_exact,
            'entanglement_fidelity_exact': self.entanglement_fidelity_exact,
            'theta_fit_exact_rad': self.theta_fit_exact,
            'concurrence_tomo': self.concurrence_tomo,
            'entanglement_fidelity_tomo': self.entanglement_fidelity_tomo,
            'witness_entangled': self.witness_entangled,
            'bootstrap_skipped': self.bootstrap_skipped,
            'mle_converged': self.mle_converged,
        }


def _channel_output(rho_in: DensityMatrix, cfg: CaseConfig) -> ChannelOutput:
    try:
        return fock_channel_output(rho_in, cfg.channel)
    except FilterAnnihilationError as exc:
        raise FilterAnnihilationError(
            f"Case {cfg.case_id} at gamma={cfg.channel.gamma:.6g}: {exc}"
        ) from exc


def run_case(
    cfg: CaseConfig,
    bootstrap: Optional[int] = None,
    threads: int = 1
) -> CaseReport:
    """
    Source -> filter -> simulated tomography -> MLE -> metrics.

    Counts are drawn with seed (cfg.seed, 0) and bootstrap resamples with
    (cfg.seed, 1).
    """
    rho_in = spdc_input_state(cfg.source)
    out = _channel_output(rho_in, cfg)
    exact = full_report(out.rho_out)

    ds = simulate_counts(out.rho_out, cfg.counts_per_setting, task_seed(cfg.seed, 0))
    result = mle_reconstruct(ds, cfg.tomography)
    tomo = full_report(result.rho_hat)
    boot = bootstrap_metrics(
        ds, BOOTSTRAPPED_METRICS, bootstrap, task_seed(cfg.seed, 1), cfg.tomography, threads
    )

    logger.info(
        "Case %s: C_exact=%.4f C_tomo=%.4f +/- %.4f F_e=%.4f",
        cfg.case_id, exact.concurrence, tomo.concurrence,
        boot['concurrence'].std, tomo.entanglement_fidelity
    )
    return CaseReport(
        case_id=cfg.case_id,
        entanglement_fidelity_mean=boot['entanglement_fidelity'].mean,
        entanglement_fidelity_std=boot['entanglement_fidelity'].std,
        concurrence_mean=boot['concurrence'].mean,
        concurrence_std=boot['concurrence'].std,
        theta_fit=tomo.theta_fit,
        success_probability=out.success_probability,
        input_concurrence=input_concurrence(cfg.source),
        concurrence_exact=exact.concurrence,
        entanglement_fidelity_exact=exact.entanglement_fidelity,
        theta_fit_exact=exact.theta_fit,
        concurrence_tomo=tomo.concurrence,
        entanglement_fidelity_tomo=tomo.entanglement_fidelity,
        witness_entangled=tomo.witness_entangled,
        bootstrap_skipped=boot['concurrence'].skipped,
        mle_converged=result.converged,
    )


def run_table1(
    eps: float = DEFAULT_EPS,
    counts: int = DEFAULT_COUNTS,
    seed: int = 0,
    cases: Sequence[str] = CASE_IDS,
    bootstrap: Optional[int] = None,
    threads: int = 1,
    source: Optional[SourceConfig] = None,
    channel: Optional[ChannelConfig] = None,
    tomography: Optional[TomographyConfig] = None
) -> List[CaseReport]:
    """Run the selected cases; case k uses seed (seed, index of k in CASE_IDS)."""
    reports = []
    for case_id in cases:
        cfg = default_case(
            case_id, eps=eps, counts=counts, seed=task_seed(seed, CASE_IDS.index(case_id)),
            source=source, channel=channel, tomography=tomography,
        )
        reports.append(run_case(cfg, bootstrap=bootstrap, threads=threads))
    return reports


def cases_table(reports: Iterable[CaseReport]) -> pd.DataFrame:
    """Robustness table, one row per case."""
    rows = [{
        'case': r.case_id,
        'F_e': r.entanglement_fidelity_tomo,
        'F_e_mean': r.entanglement_fidelity_mean,
        'F_e_std': r.entanglement_fidelity_std,
        'C': r.concurrence_tomo,
        'C_mean': r.concurrence_mean,
        'C_std': r.concurrence_std,
        'C_exact': r.concurrence_exact,
        'F_e_exact': r.entanglement_fidelity_exact,
        'C_in': r.input_concurrence,
        'p_success': r.success_probability,
        'witness_entangled': r.witness_entangled,
    } for r in reports]
    return pd.DataFrame(rows)


@dataclass(frozen=True)
class SweepRow:
    """One point of the concurrence-versus-loss curve."""
    eps: float
    gamma: float
    C_analytic: float
    C_fock_exact: float
    C_fock_tomo_input: float
    C_tomo: float
    C_tomo_std: float
    p_success: float

    def __post_init__(self):
        if not 0.0 <= self.eps < 1.0:
            raise ValueError(f"eps must be in [0, 1), got {self.eps}")


def sweep_loss(
    eps_grid: Iterable[float],
    base: CaseConfig,
    bootstrap: int = DEFAULT_SWEEP_BOOTSTRAP,
    threads: int = 1,
    tomographic: bool = True,
    input_from_tomography: bool = False
) -> List[SweepRow]:
    """
    Concurrence of the filter output across loss rates.

    Each row carries the analytic law, the exact first-principles value for
    the configured (non-ideal) source, and, when `tomographic`, the MLE
    estimate from simulated counts with its bootstrap std. Point k uses
    seeds derived from (base.seed, k), so rows do not depend on `threads`.

    With `input_from_tomography` the input state is also reconstructed once
    (the same fit as `characterize('input', base)`) and propagated through
    the channel at every loss rate; its concurrence fills C_fock_tomo_input,
    which is NaN otherwise.
    """
    grid = [float(e) for e in eps_grid]
    for e in grid:
        if not 0.0 <= e < 1.0:
            raise ValueError(f"Loss rate must be in [0, 1), got {e}")
    rho_in = spdc_input_state(base.source)
    rho_tomo_in = None
    if input_from_tomography:
        rho_tomo_in = characterize('input', base).reconstruction.rho_hat

    def point(index: int) -> SweepRow:
        eps = grid[index]
        gamma = gamma_from_eps(eps)
        cfg = replace(base, channel=base.channel.with_gamma(gamma))
        out = _channel_output(rho_in, cfg)
        c_exact = concurrence(out.rho_out)

        c_tomo_input = float('nan')
        if rho_tomo_in is not None:
            c_tomo_input = concurrence(_channel_output(rho_tomo_in, cfg).rho_out)

        c_tomo, c_std = float('nan'), float('nan')
        if tomographic:
            point_seed = task_seed(base.seed, index)
            ds = simulate_counts(out.rho_out, base.counts_per_setting, task_seed(point_seed, 0))
            c_tomo = concurrence(mle_reconstruct(ds, base.tomography).rho_hat)
            boot = bootstrap_metrics(
                ds, {'concurrence': concurrence}, bootstrap,
                task_seed(point_seed, 1), base.tomography
            )
            c_std = boot['concurrence'].std

        logger.info("Sweep eps=%.4f: C_exact=%.4f C_tomo=%.4f", eps, c_exact, c_tomo)
        return SweepRow(
            eps=eps,
            gamma=gamma,
            C_analytic=analytic_concurrence_vs_loss(eps),
            C_fock_exact=c_exact,
            C_fock_tomo_input=c_tomo_input,
            C_tomo=c_tomo,
            C_tomo_std=c_std,
            p_success=out.success_probability,
        )

    return parallel_map(point, range(len(grid)), threads)


def sweep_table(rows: Iterable[SweepRow]) -> pd.DataFrame:
    """Sweep rows as a DataFrame with SWEEP_COLUMNS."""
    return pd.DataFrame([{c: getattr(r, c) for c in SWEEP_COLUMNS} for r in rows],
                        columns=SWEEP_COLUMNS)


@dataclass(frozen=True)
class Characterization:
    """
    Exact and reconstructed state of one stage of the experiment.

    Attributes:
        stage: 'input' or 'output'
        exact: State produced by the model
        reconstruction: MLE fit to simulated counts of `exact`
        exact_metrics: Metrics of the exact state
        tomo_metrics: Metrics of the reconstruction
        success_probability: Coincidence probability (1 for the input)
    """
    stage: str
    exact: DensityMatrix
    reconstruction: ReconstructionResult
    exact_metrics: MetricReport
    tomo_metrics: MetricReport
    success_probability: float = 1.0

    def density_json(self) -> Dict[str, object]:
        return {
            'stage': self.stage,
            'exact': self.exact.to_json(),
            'reconstructed': self.reconstruction.rho_hat.to_json(),
            'nll': self.reconstruction.nll,
            'iterations': self.reconstruction.iterations,
            'converged': self.reconstruction.converged,
        }

    def metrics_json(self) -> Dict[str, object]:
        return {
            'stage': self.stage,
            'exact': self.exact_metrics.to_dict(),
            'tomographic': self.tomo_metrics.to_dict(),
            'success_probability': self.success_probability,
        }


def characterize(stage: str, cfg: CaseConfig) -> Characterization:
    """
    Density matrix of the filter input or output, exact and reconstructed.

    Counts are drawn with seed (cfg.seed, 0).
    """
    if stage not in STAGES:
        raise ValueError(f"Unknown stage: {stage!r} (expected one of {STAGES})")
    rho = spdc_input_state(cfg.source)
    p_success = 1.0
    if stage == 'output':
        out = _channel_output(rho, cfg)
        rho, p_success = out.rho_out, out.success_probability

    ds = simulate_counts(rho, cfg.counts_per_setting, task_seed(cfg.seed, 0))
    result = mle_reconstruct(ds, cfg.tomography)
    return Characterization(
        stage=stage,
        exact=rho,
        reconstruction=result,
        exact_metrics=full_report(rho),
        tomo_metrics=full_report(result.rho_hat),
        success_probability=p_success,
    )
