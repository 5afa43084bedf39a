"""
Run configuration files.

Files are JSON or YAML with optional sections `source`, `channel`,
`tomography` and a top-level `seed`. Precedence: built-in defaults <
config file < command-line flags.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union
import numpy as np
import yaml
import jsonschema

from .channel import ChannelConfig
from .scenarios import DEFAULT_COUNTS, DEFAULT_EPS
from .source import SourceConfig, calibrate_overlap, pump_hwp
from .tomography import TomographyConfig


class ConfigError(ValueError):
    """Invalid configuration or command-line usage."""


_NUMBER = {'type': 'number'}
_INT = {'type': 'integer'}

CONFIG_SCHEMA: Dict[str, Any] = {
    'type': 'object',
    'additionalProperties': False,
    'properties': {
        'seed': {'type': 'integer', 'minimum': 0, 'maximum': 2 ** 64 - 1},
        'source': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'c0_re': _NUMBER, 'c0_im': _NUMBER,
                'c1_re': _NUMBER, 'c1_im': _NUMBER,
                'overlap_re': _NUMBER, 'overlap_im': _NUMBER,
                'quartz_units': _INT,
                'delay_per_quartz': {'type': 'number', 'minimum': 0},
                'pump_angle_deg': _NUMBER,
                'input_concurrence': {'type': 'number', 'minimum': 0, 'maximum': 1},
            },
        },
        'channel': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'gamma': {'type': 'number', 'minimum': 0},
                'eps': {'type': 'number', 'minimum': 0, 'exclusiveMaximum': 1},
                'bs1_theta1_deg': _NUMBER, 'bs1_theta2_deg': _NUMBER,
                'bs2_theta1_deg': _NUMBER, 'bs2_theta2_deg': _NUMBER,
                'arm_phase_c_deg': _NUMBER, 'arm_phase_d_deg': _NUMBER,
                'visibility': {'type': 'number', 'minimum': 0, 'maximum': 1},
                'arm_waveplate_location': {'enum': ['output', 'internal']},
            },
        },
        'tomography': {
            'type': 'object',
            'additionalProperties': False,
            'properties': {
                'counts_per_setting': {'type': 'integer', 'minimum': 1},
                'max_iterations': {'type': 'integer', 'minimum': 1},
                'restarts': {'type': 'integer', 'minimum': 0},
                'rel_tol': {'type': 'number', 'exclusiveMinimum': 0},
                'bootstrap_resamples': {'type': 'integer', 'minimum': 2},
                'bootstrap_restarts': {'type': 'integer', 'minimum': 0},
                'eigen_floor': {'type': 'number', 'exclusiveMinimum': 0},
                'restart_scale': {'type': 'number', 'minimum': 0},
            },
        },
    },
}


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command needs besides its own flags.

    Attributes:
        seed: Master seed
        source: Photon-pair source
        channel: Filter interferometer (its gamma is the operating point)
        tomography: Reconstruction settings
        counts_per_setting: Tomography flux N
    """
    seed: int = 0
    source: SourceConfig = field(default_factory=SourceConfig.calibrated)
    channel: ChannelConfig = field(default_factory=lambda: ChannelConfig.from_eps(DEFAULT_EPS))
    tomography: TomographyConfig = field(default_factory=TomographyConfig)
    counts_per_setting: int = DEFAULT_COUNTS

    def to_dict(self) -> Dict[str, Any]:
        tomography = dict(self.tomography.to_dict(), counts_per_setting=self.counts_per_setting)
        return {
            'seed': self.seed,
            'source': self.source.to_dict(),
            'channel': self.channel.to_dict(),
            'tomography': tomography,
        }


def _source_from_section(section: Dict[str, Any]) -> SourceConfig:
    base = SourceConfig.calibrated().to_dict()
    section = dict(section)
    explicit_overlap = {'overlap_re', 'overlap_im'} & set(section)
    if {'quartz_units', 'delay_per_quartz'} & set(section) and not explicit_overlap:
        # overlap follows the quartz model for the given stack
        base.pop('overlap_re')
        base.pop('overlap_im')
    input_c = section.pop('input_concurrence', None)
    angle = section.pop('pump_angle_deg', None)
    if angle is not None:
        c0, c1 = pump_hwp(np.deg2rad(angle))
        base.update(c0_re=c0.real, c0_im=c0.imag, c1_re=c1.real, c1_im=c1.imag)
    base.update(section)
    source = SourceConfig.from_dict(base)
    if input_c is not None:
        source = replace(source, overlap=calibrate_overlap(input_c, source.c0, source.c1))
    return source


def parse_config(payload: Optional[Dict[str, Any]], origin: str = '<config>') -> RunConfig:
    """
    Validate a parsed config mapping and build the RunConfig.

    Raises:
        ConfigError: on schema or semantic violations
    """
    payload = payload or {}
    if not isinstance(payload, dict):
        raise ConfigError(f"{origin}: top level must be a mapping")
    try:
        jsonschema.validate(payload, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = '/'.join(str(p) for p in exc.absolute_path) or '<root>'
        raise ConfigError(f"{origin}: {where}: {exc.message}") from exc

    try:
        cfg = RunConfig()
        if 'seed' in payload:
            cfg = replace(cfg, seed=payload['seed'])
        if 'source' in payload:
            cfg = replace(cfg, source=_source_from_section(payload['source']))
        if 'channel' in payload:
            channel = dict(payload['channel'])
            if 'gamma' not in channel and 'eps' not in channel:
                channel['gamma'] = cfg.channel.gamma
            cfg = replace(cfg, channel=ChannelConfig.from_dict(channel))
        if 'tomography' in payload:
            section = dict(payload['tomography'])
            counts = section.pop('counts_per_setting', cfg.counts_per_setting)
            cfg = replace(cfg, tomography=TomographyConfig(**section), counts_per_setting=counts)
    except ValueError as exc:
        raise ConfigError(f"{origin}: {exc}") from exc
    return cfg


def load_config(path: Union[str, Path, None]) -> RunConfig:
    """
    Read a JSON or YAML config file; None gives the defaults.

    Raises:
        ConfigError: if the file is missing, unparsable or invalid
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    text = path.read_text(encoding='utf-8')
    try:
        # YAML 1.1 reads exponents without a dot (1e-10) as strings
        payload = json.loads(text) if path.suffix.lower() == '.json' else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"Cannot parse config file {path}: {exc}") from exc
    return parse_config(payload, origin=str(path))
