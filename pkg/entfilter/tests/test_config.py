"""
Unit tests for run configuration files.
"""

import json
import pytest
import numpy as np

from entfilter.config import ConfigError, RunConfig, load_config, parse_config
from entfilter.source import input_concurrence, overlap_from_quartz


@pytest.fixture
def write_config(tmp_path):
    """Write a config payload to a file and return its path."""
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding='utf-8')
        return path
    return _write


class TestParseConfig:
    """Tests for schema validation and section handling."""

    def test_defaults(self):
        """Test that no payload gives the default run configuration."""
        cfg = parse_config(None)
        assert cfg == RunConfig()
        assert cfg.seed == 0
        assert abs(cfg.channel.eps - 0.9) < 1e-12
        assert abs(input_concurrence(cfg.source) - 0.04) < 1e-9
        assert cfg.counts_per_setting == 4000

    def test_full_payload(self):
        """Test that every section of a payload is applied."""
        cfg = parse_config({
            'seed': 7,
            'source': {'pump_angle_deg': 0.0},
            'channel': {'eps': 0.5, 'bs2_theta1_deg': 7.2, 'visibility': 0.95},
            'tomography': {'counts_per_setting': 500, 'restarts': 1},
        })
        assert cfg.seed == 7
        assert abs(cfg.source.c0 - 1.0) < 1e-15
        assert abs(cfg.channel.eps - 0.5) < 1e-12
        assert abs(cfg.channel.bs2_thetas[0] - np.deg2rad(7.2)) < 1e-15
        assert cfg.channel.visibility == 0.95
        assert cfg.counts_per_setting == 500
        assert cfg.tomography.restarts == 1

    def test_input_concurrence_calibration(self):
        """Test that input_concurrence calibrates the overlap."""
        cfg = parse_config({'source': {'input_concurrence': 0.1}})
        assert abs(input_concurrence(cfg.source) - 0.1) < 1e-9

    def test_quartz_units_set_overlap(self):
        """Test that a crystal count without an overlap takes the quartz-model overlap."""
        cfg = parse_config({'source': {'quartz_units': 3}})
        expected = overlap_from_quartz(3, cfg.source.delay_per_quartz)
        assert abs(cfg.source.overlap - expected) < 1e-15
        assert abs(abs(expected) - 0.560) < 1e-3

        cfg = parse_config({'source': {'delay_per_quartz': 0.1}})
        assert abs(cfg.source.overlap - overlap_from_quartz(5, 0.1)) < 1e-15

    def test_explicit_overlap_wins_over_quartz_model(self):
        """Test that explicit overlap keys are kept when the crystal count is set."""
        cfg = parse_config({'source': {'quartz_units': 3, 'overlap_re': 0.3}})
        assert abs(cfg.source.overlap - 0.3) < 1e-15

    def test_channel_section_keeps_default_loss(self):
        """Test that a channel section without loss keeps the default eps."""
        cfg = parse_config({'channel': {'visibility': 0.8}})
        assert abs(cfg.channel.eps - 0.9) < 1e-12

    def test_unknown_key(self):
        """Test that an unknown key is reported by name."""
        with pytest.raises(ConfigError, match='loss'):
            parse_config({'channel': {'loss': 0.5}})

    def test_out_of_range(self):
        """Test that out-of-range values raise ConfigError."""
        with pytest.raises(ConfigError):
            parse_config({'channel': {'eps': 1.0}})
        with pytest.raises(ConfigError):
            parse_config({'seed': -1})

    def test_semantic_error(self):
        """Test that an unnormalized pump and inconsistent loss raise ConfigError."""
        with pytest.raises(ConfigError):
            parse_config({'source': {'c0_re': 1.0, 'c1_re': 1.0}})
        with pytest.raises(ConfigError):
            parse_config({'channel': {'gamma': 1.0, 'eps': 0.2}})

    def test_top_level_must_be_mapping(self):
        """Test that a non-mapping payload raises ConfigError."""
        with pytest.raises(ConfigError):
            parse_config([1, 2, 3])

    def test_to_dict(self):
        """Test that to_dict has one entry per section."""
        payload = RunConfig().to_dict()
        assert set(payload) == {'seed', 'source', 'channel', 'tomography'}
        assert payload['tomography']['counts_per_setting'] == 4000


class TestLoadConfig:
    """Tests for reading config files."""

    def test_none_gives_defaults(self):
        """Test that no path gives the defaults."""
        assert load_config(None) == RunConfig()

    def test_missing_file(self, tmp_path):
        """Test that a missing file raises ConfigError naming it."""
        missing = tmp_path / 'nope.yaml'
        with pytest.raises(ConfigError, match='nope.yaml'):
            load_config(missing)

    def test_json(self, write_config):
        """Test that a JSON file is read."""
        path = write_config('run.json', json.dumps({'seed': 3, 'tomography': {'rel_tol': 1e-10}}))
        cfg = load_config(path)
        assert cfg.seed == 3
        assert cfg.tomography.rel_tol == 1e-10

    def test_yaml(self, write_config):
        """Test that a YAML file is read."""
        path = write_config('run.yaml', "seed: 11\nchannel:\n  eps: 0.75\n")
        cfg = load_config(path)
        assert cfg.seed == 11
        assert abs(cfg.channel.eps - 0.75) < 1e-12

    def test_unparsable(self, write_config):
        """Test that a malformed file raises ConfigError naming it."""
        path = write_config('broken.json', '{"seed": ')
        with pytest.raises(ConfigError, match='broken.json'):
            load_config(path)


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
