"""
Unit tests for the entanglement filter channel.
"""

import pytest
import numpy as np

from entfilter.channel import (
    ChannelConfig, EffectiveKraus, FilterAnnihilationError, COMPARE_COLUMNS,
    MEASURED_THETA1_DEG, MEASURED_THETA2_DEG, analytic_concurrence_vs_loss, beta_from_gamma,
    compare_models, effective_kraus, eq2_filter, eq2_output, fock_channel_output,
    gamma_from_beta, gamma_from_eps, routing_kraus, characterize_splitter,
)
from entfilter.metrics import concurrence, entanglement_fidelity
from entfilter.source import SourceConfig, spdc_input_state
from entfilter.states import (
    bell_state, fidelity_to_ket, ket_to_density, product_ket, psi_theta, random_density_matrix,
    validate_density,
)

S = 1.0 / np.sqrt(2.0)


@pytest.fixture
def balanced_input():
    """diag(0, 1/2, 1/2, 0): balanced pump, no shape overlap."""
    return spdc_input_state(SourceConfig(overlap=0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


class TestLossLaws:
    """Tests for the gamma / beta / eps conversions and the analytic law."""

    def test_beta_examples(self):
        """Test that beta is 1 without loss, 0.6 at gamma = ln 3 and vanishes at large gamma."""
        assert beta_from_gamma(0.0) == 1.0
        assert abs(beta_from_gamma(np.log(3.0)) - 0.6) < 1e-12
        assert beta_from_gamma(50.0) < 1e-10

    def test_beta_decreasing(self):
        """Test that beta decreases strictly with gamma."""
        values = [beta_from_gamma(g) for g in np.linspace(0, 10, 101)]
        assert np.all(np.diff(values) < 0)

    def test_beta_rejects_negative_gamma(self):
        """Test that a negative gamma is rejected."""
        with pytest.raises(ValueError):
            beta_from_gamma(-0.1)

    def test_gamma_beta_inverse(self):
        """Test that gamma_from_beta inverts beta_from_gamma."""
        for gamma in (0.1, 1.0, 3.0):
            assert abs(gamma_from_beta(beta_from_gamma(gamma)) - gamma) < 1e-9
        assert np.isinf(gamma_from_beta(0.0))

    def test_gamma_from_eps(self):
        """Test that gamma = -ln(1 - eps) and eps = 1 is rejected."""
        assert gamma_from_eps(0.0) == 0.0
        assert abs(gamma_from_eps(2.0 / 3.0) - np.log(3.0)) < 1e-12
        with pytest.raises(ValueError):
            gamma_from_eps(1.0)

    def test_analytic_law_examples(self):
        """Test that the analytic law gives 0, 0.25 and nearly 1 at the reference loss rates."""
        assert analytic_concurrence_vs_loss(0.0) == 0.0
        assert abs(analytic_concurrence_vs_loss(2.0 / 3.0) - 0.25) < 1e-12
        assert analytic_concurrence_vs_loss(0.999999) > 0.99999

    def test_analytic_law_is_tanh_squared(self):
        """Test that the analytic law equals tanh^2(gamma/2) across the loss range."""
        for eps in np.linspace(0, 0.99, 25):
            gamma = gamma_from_eps(eps)
            assert abs(analytic_concurrence_vs_loss(eps) - np.tanh(gamma / 2) ** 2) < 1e-12

    def test_analytic_law_rejects_full_loss(self):
        """Test that loss rates outside [0, 1) are rejected."""
        with pytest.raises(ValueError):
            analytic_concurrence_vs_loss(1.0)
        with pytest.raises(ValueError):
            analytic_concurrence_vs_loss(-0.1)


class TestChannelConfig:
    """Tests for ChannelConfig validation and serialization."""

    def test_defaults(self):
        """Test that the default channel is lossless."""
        cfg = ChannelConfig()
        assert cfg.t == 1.0
        assert cfg.eps == 0.0
        assert cfg.beta == 1.0

    def test_from_eps(self):
        """Test that from_eps sets the transmission to 1 - eps."""
        cfg = ChannelConfig.from_eps(0.9)
        assert abs(cfg.eps - 0.9) < 1e-12
        assert abs(cfg.t - 0.1) < 1e-12

    def test_invalid_values(self):
        """Test that negative gamma, bad visibility, unknown waveplate location and NaN are rejected."""
        with pytest.raises(ValueError):
            ChannelConfig(gamma=-1.0)
        with pytest.raises(ValueError):
            ChannelConfig(visibility=1.2)
        with pytest.raises(ValueError):
            ChannelConfig(arm_waveplate_location='before')
        with pytest.raises(ValueError):
            ChannelConfig(gamma=float('nan'))

    def test_dict_round_trip(self):
        """Test that to_dict and from_dict preserve the measured splitter phases."""
        cfg = ChannelConfig.measured_splitter(gamma=1.5, visibility=0.9)
        payload = cfg.to_dict()
        assert abs(payload['bs2_theta1_deg'] - MEASURED_THETA1_DEG) < 1e-12
        assert abs(payload['bs2_theta2_deg'] - MEASURED_THETA2_DEG) < 1e-12
        rebuilt = ChannelConfig.from_dict(payload)
        assert abs(rebuilt.gamma - cfg.gamma) < 1e-15
        np.testing.assert_allclose(rebuilt.bs2_thetas, cfg.bs2_thetas, atol=1e-15)
        assert rebuilt.visibility == 0.9

    def test_inconsistent_eps_and_gamma(self):
        """Test that disagreeing eps and gamma are rejected."""
        with pytest.raises(ValueError):
            ChannelConfig.from_dict({'gamma': 1.0, 'eps': 0.5})

    def test_eps_only(self):
        """Test that eps alone sets gamma."""
        assert abs(ChannelConfig.from_dict({'eps': 0.5}).gamma - np.log(2.0)) < 1e-12


class TestPhenomenologicalFilter:
    """Tests for the Bell-basis weighting model."""

    def test_no_loss_is_identity(self, balanced_input):
        """Test that beta = 1 returns the input with success probability one."""
        out = eq2_output(S, S, 1.0)
        np.testing.assert_allclose(out.rho_out.matrix, balanced_input.matrix, atol=1e-15)
        assert abs(out.success_probability - 1.0) < 1e-12

    def test_full_filtering_gives_psi_plus(self):
        """Test that beta = 0 leaves Psi+ with success probability 1/8."""
        out = eq2_output(S, S, 0.0)
        assert abs(fidelity_to_ket(out.rho_out, bell_state('PsiPlus')) - 1.0) < 1e-12
        assert abs(out.success_probability - 0.125) < 1e-12

    def test_beta_point_six(self):
        """Test that beta = 0.6 gives concurrence 0.25."""
        out = eq2_output(S, S, 0.6)
        assert abs(concurrence(out.rho_out) - 0.25) < 1e-12

    def test_rejects_bad_beta(self):
        """Test that beta outside [0, 1] is rejected."""
        with pytest.raises(ValueError):
            eq2_output(S, S, 1.5)
        with pytest.raises(ValueError):
            eq2_output(S, S, -0.1)

    def test_unbalanced_pump_valid(self):
        """Test that an unbalanced pump with partial overlap gives valid states."""
        for beta in (0.0, 0.3, 0.7, 1.0):
            out = eq2_output(0.8, 0.6, beta, overlap=0.4)
            report = validate_density(out.rho_out)
            assert report.passed, f"beta={beta}: {report.failures()}"

    def test_psi_minus_annihilated(self):
        """Test that full filtering of Psi- raises FilterAnnihilationError."""
        with pytest.raises(FilterAnnihilationError):
            eq2_filter(ket_to_density(bell_state('PsiMinus')), 0.0)

    def test_concurrence_matches_analytic_law(self, balanced_input):
        """Test that the weighting filter on the balanced input follows the analytic law."""
        for eps in (0.1, 0.5, 0.9):
            out = eq2_filter(balanced_input, beta_from_gamma(gamma_from_eps(eps)))
            assert abs(concurrence(out.rho_out) - analytic_concurrence_vs_loss(eps)) < 1e-9


class TestEffectiveKraus:
    """Tests for the first-principles coincidence operator."""

    def test_no_loss_identity(self):
        """Test that the lossless coincidence operator is the identity."""
        np.testing.assert_allclose(effective_kraus(ChannelConfig()).K, np.eye(4), atol=1e-12)

    def test_psi_eigenvectors(self):
        """Test that Psi+ scales by (1 + t^2)/2 and Psi- by t."""
        cfg = ChannelConfig(gamma=0.7)
        t = cfg.t
        K = effective_kraus(cfg).K
        plus = bell_state('PsiPlus').amps
        minus = bell_state('PsiMinus').amps
        np.testing.assert_allclose(K @ plus, (1 + t * t) / 2 * plus, atol=1e-12)
        np.testing.assert_allclose(K @ minus, t * minus, atol=1e-12)

    def test_psi_minus_to_psi_plus_ratio_is_beta(self):
        """Test that the Psi-/Psi+ amplitude ratio equals beta."""
        for gamma in (0.2, 1.0, 3.0):
            spectrum = effective_kraus(ChannelConfig(gamma=gamma)).bell_spectrum()
            ratio = abs(spectrum['PsiMinus']) / abs(spectrum['PsiPlus'])
            assert abs(ratio - beta_from_gamma(gamma)) < 1e-12

    def test_symmetric_subspace_uniform(self):
        """Test that Phi+, Phi- and Psi+ share one eigenvalue."""
        spectrum = effective_kraus(ChannelConfig(gamma=1.3)).bell_spectrum()
        assert abs(spectrum['PhiPlus'] - spectrum['PsiPlus']) < 1e-12
        assert abs(spectrum['PhiMinus'] - spectrum['PsiPlus']) < 1e-12

    def test_contraction(self, rng):
        """Test that random configurations never give an operator norm above one."""
        for _ in range(20):
            cfg = ChannelConfig(
                gamma=rng.uniform(0, 5),
                bs1_thetas=tuple(rng.uniform(-np.pi, np.pi, 2)),
                bs2_thetas=tuple(rng.uniform(-np.pi, np.pi, 2)),
                arm_waveplate_phase_c=rng.uniform(-np.pi, np.pi),
                arm_waveplate_location='internal',
            )
            assert np.linalg.norm(effective_kraus(cfg).K, 2) <= 1.0 + 1e-9

    def test_rejects_expanding_operator(self):
        """Test that an operator with norm above one is rejected."""
        with pytest.raises(ValueError):
            EffectiveKraus(2.0 * np.eye(4))

    def test_routing_sum_is_coherent_operator(self, rng):
        """Test that the two routing operators sum to the coherent operator."""
        for location in ('output', 'internal'):
            cfg = ChannelConfig(
                gamma=0.8,
                bs1_thetas=(0.3, -0.2),
                bs2_thetas=(0.1, 0.4),
                arm_waveplate_phase_c=0.5,
                arm_waveplate_phase_d=-0.3,
                arm_waveplate_location=location,
            )
            k_ab, k_ba = routing_kraus(cfg)
            np.testing.assert_allclose(k_ab + k_ba, effective_kraus(cfg).K, atol=1e-12)


class TestFockChannel:
    """Tests for fock_channel_output."""

    def test_no_loss_identity(self, rng):
        """Test that the lossless channel returns random inputs unchanged."""
        rho = random_density_matrix(rng)
        out = fock_channel_output(rho, ChannelConfig())
        np.testing.assert_allclose(out.rho_out.matrix, rho.matrix, atol=1e-12)
        assert abs(out.success_probability - 1.0) < 1e-12

    def test_strong_loss_balanced_input(self, balanced_input):
        """Test that strong loss turns the balanced input into Psi+."""
        out = fock_channel_output(balanced_input, ChannelConfig(gamma=-np.log(1e-6)))
        assert concurrence(out.rho_out) > 1.0 - 1e-9
        assert fidelity_to_ket(out.rho_out, bell_state('PsiPlus')) > 1.0 - 1e-9

    def test_strong_loss_product_input(self):
        """Test that |HV> is converted to a maximally entangled state."""
        out = fock_channel_output(ket_to_density(product_ket('HV')), ChannelConfig(gamma=-np.log(1e-6)))
        assert concurrence(out.rho_out) > 1.0 - 1e-9

    def test_psi_plus_success_probability(self):
        """Test that Psi+ survives with probability ((1 + t^2)/2)^2."""
        cfg = ChannelConfig(gamma=1.0)
        out = fock_channel_output(ket_to_density(bell_state('PsiPlus')), cfg)
        assert abs(out.success_probability - ((1 + cfg.t ** 2) / 2) ** 2) < 1e-12

    def test_psi_minus_annihilated(self):
        """Test that Psi- under extreme loss raises FilterAnnihilationError."""
        with pytest.raises(FilterAnnihilationError):
            fock_channel_output(ket_to_density(bell_state('PsiMinus')), ChannelConfig(gamma=800.0))

    def test_near_degenerate_flagged(self):
        """Test that a tiny but nonzero success probability is flagged degenerate."""
        out = fock_channel_output(
            ket_to_density(bell_state('PsiMinus')), ChannelConfig(gamma=-np.log(1e-5))
        )
        assert out.degenerate
        assert abs(fidelity_to_ket(out.rho_out, bell_state('PsiMinus')) - 1.0) < 1e-9

    def test_outputs_are_valid_states(self, rng):
        """Test that random inputs give valid outputs and success probabilities in [0, 1]."""
        for _ in range(30):
            rho = random_density_matrix(rng)
            out = fock_channel_output(rho, ChannelConfig(gamma=rng.uniform(0, 6)))
            report = validate_density(out.rho_out)
            assert report.passed, f"Failures: {report.failures()}"
            assert 0.0 <= out.success_probability <= 1.0

    def test_linearity_before_normalization(self, rng):
        """Test that the unnormalized output is linear in the input."""
        cfg = ChannelConfig(gamma=1.1)
        rho1 = random_density_matrix(rng)
        rho2 = random_density_matrix(rng)
        alpha = 0.3
        mixed = alpha * rho1.matrix + (1 - alpha) * rho2.matrix
        out1 = fock_channel_output(rho1, cfg)
        out2 = fock_channel_output(rho2, cfg)
        out = fock_channel_output(mixed, cfg)
        sigma = out.rho_out.matrix * out.success_probability
        expected = (alpha * out1.rho_out.matrix * out1.success_probability
                    + (1 - alpha) * out2.rho_out.matrix * out2.success_probability)
        np.testing.assert_allclose(sigma, expected, atol=1e-12)

    def test_success_probability_non_increasing(self, rng):
        """Test that success probability never grows with gamma."""
        for _ in range(10):
            rho = random_density_matrix(rng)
            probs = [fock_channel_output(rho, ChannelConfig(gamma=g)).success_probability
                     for g in np.linspace(0, 6, 25)]
            assert np.all(np.diff(probs) <= 1e-12)

    def test_measured_splitter_survivor(self, balanced_input):
        """Test that the surviving state under strong loss is Psi_theta."""
        cfg = ChannelConfig.measured_splitter(gamma=-np.log(1e-6))
        out = fock_channel_output(balanced_input, cfg)
        theta = np.deg2rad(MEASURED_THETA1_DEG - MEASURED_THETA2_DEG)
        assert fidelity_to_ket(out.rho_out, psi_theta(theta)) > 1.0 - 1e-6
        assert abs(entanglement_fidelity(out.rho_out) - 1.0) < 1e-6

    def test_ideal_splitter_matches_sech_squared_law(self, balanced_input):
        """Test that the ideal splitter gives C = (1 - beta^2)/(1 + beta^2)."""
        for gamma in (0.5, 1.0, 2.0):
            beta = beta_from_gamma(gamma)
            out = fock_channel_output(balanced_input, ChannelConfig(gamma=gamma))
            expected = (1 - beta ** 2) / (1 + beta ** 2)
            assert abs(concurrence(out.rho_out) - expected) < 1e-9


class TestWaveplatesAndVisibility:
    """Tests for arm waveplates and partial distinguishability."""

    def test_output_waveplate_leaves_concurrence(self, balanced_input):
        """Test that an output waveplate leaves the concurrence unchanged."""
        base = ChannelConfig(gamma=1.0)
        plated = ChannelConfig(gamma=1.0, arm_waveplate_phase_c=np.pi / 2)
        c_base = concurrence(fock_channel_output(balanced_input, base).rho_out)
        c_plated = concurrence(fock_channel_output(balanced_input, plated).rho_out)
        assert abs(c_base - c_plated) < 1e-9

    def test_internal_waveplate_changes_concurrence(self, balanced_input):
        """Test that an internal waveplate changes the concurrence."""
        base = ChannelConfig(gamma=1.0)
        internal = ChannelConfig(
            gamma=1.0, arm_waveplate_phase_c=np.pi / 2, arm_waveplate_location='internal'
        )
        c_base = concurrence(fock_channel_output(balanced_input, base).rho_out)
        c_internal = concurrence(fock_channel_output(balanced_input, internal).rho_out)
        assert abs(c_base - c_internal) > 0.05, f"{c_base:.4f} vs {c_internal:.4f}"

    def test_full_visibility_is_default(self, balanced_input):
        """Test that visibility 1 matches the default channel exactly."""
        a = fock_channel_output(balanced_input, ChannelConfig(gamma=1.0))
        b = fock_channel_output(balanced_input, ChannelConfig(gamma=1.0, visibility=1.0))
        np.testing.assert_array_equal(a.rho_out.matrix, b.rho_out.matrix)

    def test_distinguishable_photons_are_not_filtered(self, balanced_input):
        """Test that visibility 0 leaves the output unentangled."""
        out = fock_channel_output(balanced_input, ChannelConfig(gamma=1.0, visibility=0.0))
        assert concurrence(out.rho_out) < 1e-9

    def test_concurrence_grows_with_visibility(self, balanced_input):
        """Test that concurrence increases with visibility."""
        values = [
            concurrence(fock_channel_output(balanced_input, ChannelConfig(gamma=1.0, visibility=v)).rho_out)
            for v in (0.0, 0.5, 1.0)
        ]
        assert values[0] < values[1] < values[2]


class TestCompareModels:
    """Tests for the model comparison table."""

    def test_columns_and_rows(self):
        """Test that the comparison table has the documented columns and one row per gamma."""
        df = compare_models(S, S, 0.0, [0.0, 1.0, 2.0])
        assert list(df.columns) == COMPARE_COLUMNS
        assert len(df) == 3

    def test_agree_without_loss(self):
        """Test that both models agree at gamma = 0."""
        df = compare_models(S, S, 0.2, [0.0])
        row = df.iloc[0]
        assert row['abs_diff'] < 1e-9
        assert abs(row['C_eq2'] - 0.04) < 1e-9

    def test_disagree_at_moderate_loss(self):
        """Test that at gamma = 1 the Fock model exceeds the weighting model."""
        df = compare_models(S, S, 0.0, [1.0])
        row = df.iloc[0]
        beta = 1.0 / np.cosh(1.0)
        assert abs(row['C_eq2'] - np.tanh(0.5) ** 2) < 1e-9
        assert abs(row['C_fock'] - (1 - beta ** 2) / (1 + beta ** 2)) < 1e-9
        assert row['C_fock'] > row['C_eq2']

    def test_fock_success_probability_for_balanced_input(self):
        """Test that the incoherent balanced input survives with p = ((1 + t^2)^2/4 + t^2)/2."""
        df = compare_models(S, S, 0.0, [0.5, 1.5])
        t = np.exp(-df['gamma'].to_numpy())
        expected = ((1 + t ** 2) ** 2 / 4 + t ** 2) / 2
        np.testing.assert_allclose(df['p_success_fock'], expected, atol=1e-12)
        assert np.all(df['p_success_eq2'] <= 1.0)

    def test_empty_grid(self):
        """Test that an empty gamma grid is rejected."""
        with pytest.raises(ValueError):
            compare_models(S, S, 0.0, [])


class TestSplitterCharacterization:
    """Tests for recovering splitter port phases by polarimetry."""

    @staticmethod
    def wrapped(a, b):
        return abs(np.angle(np.exp(1j * (a - b))))

    def test_exact_recovers_measured_phases(self):
        """Test that exact probabilities return the measured splitter phases."""
        theta1, theta2 = ChannelConfig.measured_splitter().bs2_thetas
        result = characterize_splitter(theta1, theta2)
        assert abs(result.thetas_deg[0] - MEASURED_THETA1_DEG) < 1e-9
        assert abs(result.thetas_deg[1] - MEASURED_THETA2_DEG) < 1e-9
        assert result.counts is None

    def test_stokes_on_unit_circle(self):
        """Test that exact Stokes pairs are (cos theta, sin theta)."""
        result = characterize_splitter(0.4, -2.0)
        np.testing.assert_allclose(result.stokes[1], [np.cos(0.4), np.sin(0.4)], atol=1e-12)
        np.testing.assert_allclose(result.stokes[2], [np.cos(-2.0), np.sin(-2.0)], atol=1e-12)

    def test_random_phases(self, rng):
        """Test that arbitrary port phases are recovered modulo 2 pi."""
        for _ in range(20):
            theta1, theta2 = rng.uniform(-2 * np.pi, 2 * np.pi, size=2)
            result = characterize_splitter(theta1, theta2)
            assert self.wrapped(result.theta1, theta1) < 1e-9
            assert self.wrapped(result.theta2, theta2) < 1e-9

    def test_sampled_counts(self):
        """Test that 100000 photons per setting pin the phases within one degree."""
        theta1, theta2 = np.deg2rad(MEASURED_THETA1_DEG), np.deg2rad(MEASURED_THETA2_DEG)
        result = characterize_splitter(theta1, theta2, counts=100_000, seed=5)
        assert self.wrapped(result.theta1, theta1) < np.deg2rad(1.0)
        assert self.wrapped(result.theta2, theta2) < np.deg2rad(1.0)
        again = characterize_splitter(theta1, theta2, counts=100_000, seed=5)
        assert again == result

    def test_survivor_phase_from_characterized_splitter(self):
        """Test that the recovered phases predict the survivor phase difference."""
        result = characterize_splitter(*ChannelConfig.measured_splitter().bs2_thetas)
        diff_over_pi = (result.theta1 - result.theta2) / np.pi
        assert abs(diff_over_pi - 0.143) < 1e-3

    def test_invalid_counts(self):
        """Test that zero counts per setting is rejected."""
        with pytest.raises(ValueError):
            characterize_splitter(0.0, 0.0, counts=0)


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
