"""
Entanglement Filter Laboratory
Simulation of an environmental-selection entanglement filter: photon-pair
source, lossy Hong-Ou-Mandel channel with post-selection, state tomography
and entanglement metrics.
"""

__version__ = "1.0.0"

from .states import (
    PolarizationKet, DensityMatrix, HermitianEig, DensityReport,
    bell_state, psi_theta, product_ket, ket_to_density, fidelity_to_ket, state_fidelity,
    hermitian_eig, validate_density, random_ket, random_density_matrix
)
from .source import (
    SourceConfig, pump_hwp, overlap_from_quartz, spdc_input_state, input_concurrence,
    calibrate_overlap
)
from .fock import TwoPhotonFockState, apply_mode_transform, attenuate_path, birefringent_bs
from .channel import (
    ChannelConfig, EffectiveKraus, ChannelOutput, FilterAnnihilationError,
    beta_from_gamma, analytic_concurrence_vs_loss, eq2_filter, eq2_output,
    effective_kraus, fock_channel_output, compare_models, SplitterCharacterization,
    characterize_splitter
)
from .metrics import (
    MetricReport, ThetaFit, spin_flip, concurrence, concurrence_pure_oracle,
    entanglement_fidelity, fef_brute_oracle, fit_theta, purity, full_report
)
from .tomography import (
    MeasurementSetting, TomographyDataset, TomographyConfig, ReconstructionResult,
    BootstrapEstimate, canonical_settings, born_probabilities, simulate_counts, exact_counts,
    linear_reconstruct, mle_reconstruct, bootstrap_metric, bootstrap_metrics
)
from .scenarios import (
    CaseConfig, CaseReport, SweepRow, Characterization,
    default_case, run_case, run_table1, sweep_loss, characterize, cases_table
)
from .config import ConfigError, RunConfig, load_config

__all__ = [
    'PolarizationKet',
    'DensityMatrix',
    'HermitianEig',
    'DensityReport',
    'bell_state',
    'psi_theta',
    'product_ket',
    'ket_to_density',
    'fidelity_to_ket',
    'state_fidelity',
    'hermitian_eig',
    'validate_density',
    'random_ket',
    'random_density_matrix',
    'SourceConfig',
    'pump_hwp',
    'overlap_from_quartz',
    'spdc_input_state',
    'input_concurrence',
    'calibrate_overlap',
    'TwoPhotonFockState',
    'apply_mode_transform',
    'attenuate_path',
    'birefringent_bs',
    'ChannelConfig',
    'EffectiveKraus',
    'ChannelOutput',
    'FilterAnnihilationError',
    'beta_from_gamma',
    'analytic_concurrence_vs_loss',
    'eq2_filter',
    'eq2_output',
    'effective_kraus',
    'fock_channel_output',
    'compare_models',
    'SplitterCharacterization',
    'characterize_splitter',
    'MetricReport',
    'ThetaFit',
    'spin_flip',
    'concurrence',
    'concurrence_pure_oracle',
    'entanglement_fidelity',
    'fef_brute_oracle',
    'fit_theta',
    'purity',
    'full_report',
    'MeasurementSetting',
    'TomographyDataset',
    'TomographyConfig',
    'ReconstructionResult',
    'BootstrapEstimate',
    'canonical_settings',
    'born_probabilities',
    'simulate_counts',
    'exact_counts',
    'linear_reconstruct',
    'mle_reconstruct',
    'bootstrap_metric',
    'bootstrap_metrics',
    'CaseConfig',
    'CaseReport',
    'SweepRow',
    'Characterization',
    'default_case',
    'run_case',
    'run_table1',
    'sweep_loss',
    'characterize',
    'cases_table',
    'ConfigError',
    'RunConfig',
    'load_config',
]
