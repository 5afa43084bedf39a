"""
Unit tests for the end-to-end pipelines.
"""

import pytest
import numpy as np

from entfilter.channel import ChannelConfig, fock_channel_output, MEASURED_THETA1_DEG, MEASURED_THETA2_DEG
from entfilter.metrics import concurrence
from entfilter.scenarios import (
    CASE_IDS, SWEEP_COLUMNS, CaseConfig, default_case, run_case, run_table1, cases_table,
    sweep_loss, sweep_table, characterize,
)
from entfilter.source import SourceConfig, spdc_input_state, input_concurrence, overlap_from_quartz
from entfilter.states import HV, validate_density


def exact_output_concurrence(cfg: CaseConfig) -> float:
    """Concurrence of the noise-free filter output of a case."""
    out = fock_channel_output(spdc_input_state(cfg.source), cfg.channel)
    return concurrence(out.rho_out)


@pytest.fixture
def cases():
    return {case_id: default_case(case_id) for case_id in CASE_IDS}


class TestDefaultCases:
    """Tests for the four robustness configurations."""

    def test_case_one_baseline(self, cases):
        """Test that case I has C_in = 0.040 and eps = 0.9."""
        cfg = cases['I']
        assert abs(input_concurrence(cfg.source) - 0.040) < 1e-9
        assert abs(cfg.channel.eps - 0.9) < 1e-12

    def test_case_two_horizontal_pump(self, cases):
        """Test that case II produces |HV><HV|."""
        rho = spdc_input_state(cases['II'].source).matrix
        assert abs(rho[HV, HV] - 1.0) < 1e-15
        assert abs(np.trace(rho) - 1.0) < 1e-15

    def test_case_three_adds_waveplate(self, cases):
        """Test that case III differs from case I only by a quarter-wave plate."""
        assert cases['III'].source == cases['I'].source
        assert abs(cases['III'].channel.arm_waveplate_phase_c - np.pi / 2) < 1e-15
        assert cases['III'].channel.gamma == cases['I'].channel.gamma

    def test_case_four_removes_a_crystal(self, cases):
        """Test that case IV removes one crystal and triples the input concurrence."""
        assert cases['IV'].source.quartz_units == cases['I'].source.quartz_units - 1
        assert input_concurrence(cases['IV'].source) > 3 * input_concurrence(cases['I'].source)

    def test_case_four_steps_along_quartz_model(self):
        """Test that case IV from a configured crystal stack removes exactly one crystal."""
        source = SourceConfig(quartz_units=3)
        base = default_case('I', source=source)
        fewer = default_case('IV', source=source)
        d = source.delay_per_quartz
        assert abs(base.source.overlap - overlap_from_quartz(3, d)) < 1e-15
        assert abs(fewer.source.overlap - overlap_from_quartz(2, d)) < 1e-12

    def test_unknown_case(self):
        """Test that an unknown case label is rejected."""
        with pytest.raises(ValueError):
            default_case('V')

    def test_exact_robustness(self, cases):
        """Test that pairwise exact concurrences agree within 0.02 at eps = 0.9."""
        values = {k: exact_output_concurrence(cfg) for k, cfg in cases.items()}
        for a in CASE_IDS:
            for b in CASE_IDS:
                assert abs(values[a] - values[b]) <= 0.02, f"{a}={values[a]:.4f}, {b}={values[b]:.4f}"
        assert abs(values['I'] - values['III']) < 1e-9

    def test_reference_values(self, cases):
        """Test that cases I, II and IV reach their reference output concurrences."""
        assert abs(exact_output_concurrence(cases['I']) - 0.93014) < 1e-4
        assert abs(exact_output_concurrence(cases['II']) - 0.92455) < 1e-4
        assert abs(exact_output_concurrence(cases['IV']) - 0.94110) < 1e-4

    def test_case_config_validation(self):
        """Test that zero counts and a negative seed are rejected."""
        with pytest.raises(ValueError):
            CaseConfig('I', SourceConfig(), ChannelConfig(), counts_per_setting=0)
        with pytest.raises(ValueError):
            CaseConfig('I', SourceConfig(), ChannelConfig(), seed=-1)


class TestRunCase:
    """Tests for the tomographic case pipeline."""

    def test_report_fields(self, cases):
        """Test that a case report has bounded metrics and error bars."""
        report = run_case(cases['I'], bootstrap=20)
        assert report.case_id == 'I'
        assert 0.0 <= report.concurrence_tomo <= 1.0
        assert report.concurrence_std > 0.0
        assert report.entanglement_fidelity_std > 0.0
        assert report.witness_entangled
        assert abs(report.concurrence_tomo - report.concurrence_exact) < 0.05
        assert 0.0 < report.success_probability < 1.0

    def test_exact_and_tomographic_agree_across_seeds(self):
        """Test that at least 95% of seeded runs put the MLE within 3 bootstrap std of the exact value."""
        runs = 30
        c_hits, f_hits = 0, 0
        for seed in range(runs):
            report = run_case(default_case('II', seed=seed), bootstrap=30)
            assert report.mle_converged, f"seed={seed}"
            c_gap = abs(report.concurrence_tomo - report.concurrence_exact)
            f_gap = abs(report.entanglement_fidelity_tomo - report.entanglement_fidelity_exact)
            c_hits += c_gap <= 3 * report.concurrence_std
            f_hits += f_gap <= 3 * report.entanglement_fidelity_std
        assert c_hits >= 0.95 * runs, f"C within 3 std in {c_hits}/{runs} runs"
        assert f_hits >= 0.95 * runs, f"F_e within 3 std in {f_hits}/{runs} runs"

    def test_deterministic(self, cases):
        """Test that a case run is reproducible."""
        a = run_case(cases['II'], bootstrap=5)
        b = run_case(cases['II'], bootstrap=5)
        assert a == b

    def test_table(self):
        """Test that the case table keeps the order and columns."""
        reports = run_table1(cases=('I', 'III'), bootstrap=5, counts=1000)
        df = cases_table(reports)
        assert list(df['case']) == ['I', 'III']
        assert {'F_e', 'F_e_std', 'C', 'C_std', 'C_exact', 'witness_entangled'} <= set(df.columns)
        assert reports[0].to_dict()['case_id'] == 'I'

    def test_case_seeds_are_independent(self):
        """Test that a case gives the same report whether run alone or with others."""
        alone = run_table1(cases=('III',), bootstrap=5, counts=1000)[0]
        together = run_table1(cases=('I', 'III'), bootstrap=5, counts=1000)[1]
        assert alone == together


class TestSweep:
    """Tests for the loss sweep."""

    def test_exact_sweep(self, cases):
        """Test that the exact sweep is monotone and leaves the tomographic columns empty."""
        grid = [0.0, 2.0 / 3.0, 0.9, 0.97]
        rows = sweep_loss(grid, cases['I'], tomographic=False)
        df = sweep_table(rows)
        assert list(df.columns) == SWEEP_COLUMNS
        assert abs(df['C_fock_exact'].iloc[0] - 0.04) < 1e-9
        assert abs(df['C_analytic'].iloc[1] - 0.25) < 1e-12
        assert df['C_fock_exact'].iloc[-1] >= 0.95
        assert np.all(np.diff(df['C_fock_exact']) > 0)
        assert np.all(np.diff(df['p_success']) <= 0)
        assert df['C_tomo'].isna().all()

    def test_analytic_curve_increasing(self, cases):
        """Test that the analytic curve increases across the grid."""
        grid = np.linspace(0, 0.95, 12)
        df = sweep_table(sweep_loss(grid, cases['I'], tomographic=False))
        assert np.all(np.diff(df['C_analytic']) > 0)

    def test_tomographic_sweep_thread_independent(self, cases):
        """Test that the sweep does not depend on the thread count."""
        base = default_case('I', counts=1000, seed=5)
        a = sweep_table(sweep_loss([0.5, 0.9], base, bootstrap=5, threads=1))
        b = sweep_table(sweep_loss([0.5, 0.9], base, bootstrap=5, threads=2))
        assert a.equals(b)
        assert (a['C_tomo_std'] > 0).all()

    def test_reconstructed_input_tracks_exact_curve(self):
        """Test that propagating the reconstructed input stays within the bootstrap error."""
        base = default_case('I', counts=4000, seed=3)
        df = sweep_table(sweep_loss([0.5, 0.9, 0.97], base, bootstrap=30,
                                    input_from_tomography=True))
        for _, row in df.iterrows():
            gap = abs(row['C_fock_tomo_input'] - row['C_fock_exact'])
            assert gap <= 3 * row['C_tomo_std'], (
                f"eps={row['eps']}: from input {row['C_fock_tomo_input']:.4f}, "
                f"exact {row['C_fock_exact']:.4f}, std {row['C_tomo_std']:.4f}"
            )

    def test_reconstructed_input_matches_characterization(self, cases):
        """Test that the zero-loss point equals the concurrence of the input fit."""
        df = sweep_table(sweep_loss([0.0], cases['I'], tomographic=False,
                                    input_from_tomography=True))
        fit = characterize('input', cases['I']).reconstruction.rho_hat
        assert abs(df['C_fock_tomo_input'].iloc[0] - concurrence(fit)) < 1e-9

    def test_reconstructed_input_column_empty_by_default(self, cases):
        """Test that the reconstructed-input column is NaN unless requested."""
        df = sweep_table(sweep_loss([0.5], cases['I'], tomographic=False))
        assert df['C_fock_tomo_input'].isna().all()

    def test_rejects_bad_grid(self, cases):
        """Test that eps = 1 in the grid is rejected."""
        with pytest.raises(ValueError):
            sweep_loss([0.5, 1.0], cases['I'], tomographic=False)


class TestCharacterize:
    """Tests for input and output characterization."""

    def test_input_stage(self, cases):
        """Test that the input stage reconstructs the source state."""
        result = characterize('input', cases['I'])
        assert abs(result.exact.element('HV', 'HV') - 0.5) < 1e-12
        assert abs(result.tomo_metrics.concurrence - 0.04) < 0.05
        assert validate_density(result.reconstruction.rho_hat).passed
        assert result.success_probability == 1.0

    def test_output_stage_survivor_phase(self):
        """Test that the output stage recovers the survivor phase."""
        cfg = default_case('I', channel=ChannelConfig.measured_splitter())
        result = characterize('output', cfg)
        expected = (MEASURED_THETA1_DEG - MEASURED_THETA2_DEG) / 180.0
        assert abs(result.exact_metrics.theta_fit / np.pi - expected) < 1e-9
        assert abs(result.tomo_metrics.theta_fit / np.pi - expected) < 0.01
        assert abs(expected - 0.143) < 1e-3
        assert result.success_probability < 1.0

    def test_ideal_splitter_has_no_phase(self, cases):
        """Test that an ideal splitter leaves no survivor phase."""
        result = characterize('output', cases['I'])
        assert abs(result.exact_metrics.theta_fit) < 1e-9

    def test_json_payloads(self, cases):
        """Test that the density and metrics payloads have the documented keys."""
        result = characterize('input', cases['I'])
        assert set(result.density_json()) == {
            'stage', 'exact', 'reconstructed', 'nll', 'iterations', 'converged'
        }
        assert result.metrics_json()['stage'] == 'input'

    def test_unknown_stage(self, cases):
        """Test that an unknown stage is rejected."""
        with pytest.raises(ValueError):
            characterize('middle', cases['I'])


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
