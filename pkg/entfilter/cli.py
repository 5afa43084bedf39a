"""
Command-line front end.

    python -m entfilter fig4 --eps-min 0 --eps-max 0.95 --steps 20 --out results
    python -m entfilter table1 --case II
    python -m entfilter tomo --stage output --bs2-theta1-deg 7.2 --bs2-theta2-deg -18.6
    python -m entfilter compare --gamma-max 8
    python -m entfilter validate --config run.json

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
import numpy as np
from pythonjsonlogger.json import JsonFormatter

from . import __version__
from .channel import ChannelConfig, compare_models
from .config import ConfigError, RunConfig, load_config
from .scenarios import (
    CASE_IDS, STAGES, DEFAULT_SWEEP_BOOTSTRAP, cases_table, characterize, default_case,
    run_table1, sweep_loss, sweep_table,
)
from .utils import atomic_write, frame_to_csv, resolve_threads, to_json_text

logger = logging.getLogger('entfilter.cli')

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class RunManifest:
    """
    Provenance recorded in every output file.

    The timestamp appears only in <command>_meta.json so payload files are
    byte-identical across reruns.
    """
    command: str
    config_path: str
    master_seed: int
    output_dir: str
    tool_version: str
    parameters: str = ''
    timestamp: str = ''

    def payload_fields(self) -> Dict[str, Any]:
        """Manifest without the timestamp."""
        fields = asdict(self)
        fields.pop('timestamp')
        return fields


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on usage errors."""

    def error(self, message: str):
        raise ConfigError(f"{self.prog}: {message}")


def _add_global_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--config', default=None, help='JSON or YAML run configuration')
    parser.add_argument('--seed', type=int, default=None, help='Master seed (unsigned 64-bit)')
    parser.add_argument('--out', default='results', help='Output directory')
    parser.add_argument('--threads', type=int, default=1, help='Worker threads (0 = one per CPU)')
    parser.add_argument('--log-level', default='WARNING',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])


def _add_channel_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group('channel')
    for name in ('bs1-theta1-deg', 'bs1-theta2-deg', 'bs2-theta1-deg', 'bs2-theta2-deg',
                 'arm-phase-c-deg', 'arm-phase-d-deg'):
        group.add_argument(f'--{name}', type=float, default=None)
    group.add_argument('--visibility', type=float, default=None)
    group.add_argument('--waveplate-location', choices=['output', 'internal'], default=None)


def _add_tomography_flags(parser: argparse.ArgumentParser, bootstrap_default: Optional[int]):
    parser.add_argument('--counts', type=int, default=None, help='Pairs per setting N')
    parser.add_argument('--bootstrap', type=int, default=bootstrap_default,
                        help='Bootstrap resamples')


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with the five subcommands."""
    parser = _Parser(prog='entfilter', description='Entanglement filter laboratory')
    parser.add_argument('--version', action='version', version=f'entfilter {__version__}')
    sub = parser.add_subparsers(dest='command', parser_class=_Parser)
    sub.required = True

    fig4 = sub.add_parser('fig4', help='Concurrence versus loss rate')
    _add_global_flags(fig4)
    _add_channel_flags(fig4)
    _add_tomography_flags(fig4, DEFAULT_SWEEP_BOOTSTRAP)
    fig4.add_argument('--eps-min', type=float, default=0.0)
    fig4.add_argument('--eps-max', type=float, default=0.95)
    fig4.add_argument('--steps', type=int, default=20)
    fig4.add_argument('--eps-grid', default=None,
                      help='Comma separated loss rates, replaces min/max/steps')
    fig4.add_argument('--exact-only', action='store_true', help='Skip simulated tomography')
    fig4.add_argument('--tomographic-input', action='store_true',
                      help='Also propagate the tomographically reconstructed input state')

    table1 = sub.add_parser('table1', help='Robustness cases I-IV')
    _add_global_flags(table1)
    _add_channel_flags(table1)
    _add_tomography_flags(table1, None)
    table1.add_argument('--eps', type=float, default=None, help='Operating loss rate')
    table1.add_argument('--case', choices=CASE_IDS, action='append', default=None)

    tomo = sub.add_parser('tomo', help='Input or output state characterization')
    _add_global_flags(tomo)
    _add_channel_flags(tomo)
    _add_tomography_flags(tomo, None)
    tomo.add_argument('--stage', choices=STAGES, default='output')
    tomo.add_argument('--eps', type=float, default=None, help='Operating loss rate')

    compare = sub.add_parser('compare', help='Phenomenological versus Fock model')
    _add_global_flags(compare)
    _add_channel_flags(compare)
    compare.add_argument('--gamma-max', type=float, default=8.0)
    compare.add_argument('--gamma-steps', type=int, default=33)

    validate = sub.add_parser('validate', help='Check a configuration file')
    _add_global_flags(validate)

    return parser


def configure_logging(level: str):
    """Structured JSON logs on stderr for the package logger tree."""
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter('%(asctime)s %(levelname)s %(name)s %(message)s'))
    root = logging.getLogger('entfilter')
    root.handlers = [handler]
    root.setLevel(level)
    root.propagate = False


_CHANNEL_FLAG_KEYS = {
    'bs1_theta1_deg': 'bs1_theta1_deg',
    'bs1_theta2_deg': 'bs1_theta2_deg',
    'bs2_theta1_deg': 'bs2_theta1_deg',
    'bs2_theta2_deg': 'bs2_theta2_deg',
    'arm_phase_c_deg': 'arm_phase_c_deg',
    'arm_phase_d_deg': 'arm_phase_d_deg',
    'visibility': 'visibility',
    'waveplate_location': 'arm_waveplate_location',
}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """
    Defaults < config file < flags.

    Raises:
        ConfigError: for invalid files or flag values
    """
    cfg = load_config(args.config)
    try:
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ValueError(f"seed must be an unsigned 64-bit integer, got {args.seed}")
            cfg = replace(cfg, seed=args.seed)

        channel = cfg.channel.to_dict()
        changed = False
        for flag, key in _CHANNEL_FLAG_KEYS.items():
            value = getattr(args, flag, None)
            if value is not None:
                channel[key] = value
                changed = True
        eps = getattr(args, 'eps', None)
        if eps is not None:
            channel.pop('gamma')
            channel['eps'] = eps
            changed = True
        if changed:
            cfg = replace(cfg, channel=ChannelConfig.from_dict(channel))

        counts = getattr(args, 'counts', None)
        if counts is not None:
            if counts < 1:
                raise ValueError(f"--counts must be positive, got {counts}")
            cfg = replace(cfg, counts_per_setting=counts)
        bootstrap = getattr(args, 'bootstrap', None)
        if bootstrap is not None and bootstrap < 2:
            raise ValueError(f"--bootstrap must be at least 2, got {bootstrap}")
        resolve_threads(args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _manifest(args: argparse.Namespace, cfg: RunConfig, parameters: Dict[str, Any]) -> RunManifest:
    return RunManifest(
        command=args.command,
        config_path=str(args.config or ''),
        master_seed=cfg.seed,
        output_dir=str(args.out),
        tool_version=__version__,
        parameters=json.dumps(parameters, sort_keys=True),
        timestamp=datetime.now(timezone.utc).isoformat(timespec='seconds'),
    )


def _write_meta(out_dir: Path, manifest: RunManifest, cfg: RunConfig) -> Path:
    meta = dict(asdict(manifest), config=cfg.to_dict())
    return atomic_write(out_dir / f'{manifest.command}_meta.json', to_json_text(meta))


def _eps_grid(args: argparse.Namespace) -> List[float]:
    if args.eps_grid:
        try:
            grid = [float(x) for x in args.eps_grid.split(',') if x.strip()]
        except ValueError as exc:
            raise ConfigError(f"--eps-grid: {exc}") from exc
    else:
        if args.steps < 1:
            raise ConfigError(f"--steps must be positive, got {args.steps}")
        grid = [float(x) for x in np.linspace(args.eps_min, args.eps_max, args.steps)]
    if not grid or any(not 0.0 <= e < 1.0 for e in grid):
        raise ConfigError(f"Loss rates must lie in [0, 1): {grid}")
    return grid


def cmd_fig4(args: argparse.Namespace, cfg: RunConfig) -> List[Path]:
    """Loss sweep -> fig4.csv + fig4_meta.json."""
    grid = _eps_grid(args)
    base = default_case('I', counts=cfg.counts_per_setting, seed=cfg.seed, source=cfg.source,
                        channel=cfg.channel, tomography=cfg.tomography)
    parameters = {'eps_grid': grid, 'counts': cfg.counts_per_setting,
                  'bootstrap': args.bootstrap, 'exact_only': args.exact_only,
                  'tomographic_input': args.tomographic_input,
                  'channel': cfg.channel.to_dict(), 'source': cfg.source.to_dict()}
    manifest = _manifest(args, cfg, parameters)

    rows = sweep_loss(grid, base, bootstrap=args.bootstrap, threads=args.threads,
                      tomographic=not args.exact_only,
                      input_from_tomography=args.tomographic_input)
    df = sweep_table(rows)

    out_dir = Path(args.out)
    written = [atomic_write(out_dir / 'fig4.csv', frame_to_csv(df, manifest.payload_fields()))]
    written.append(_write_meta(out_dir, manifest, cfg))

    print(f"Loss sweep: {len(df)} points, eps {grid[0]:.3f} .. {grid[-1]:.3f}")
    print(df.to_string(index=False, float_format=lambda x: f"{x:.4f}"))
    return written


def cmd_table1(args: argparse.Namespace, cfg: RunConfig) -> List[Path]:
    """Cases I-IV -> table1.json + table1.csv + table1_meta.json."""
    cases = tuple(args.case) if args.case else CASE_IDS
    cases = tuple(c for c in CASE_IDS if c in cases)
    parameters = {'cases': list(cases), 'eps': cfg.channel.eps,
                  'counts': cfg.counts_per_setting, 'bootstrap': args.bootstrap,
                  'channel': cfg.channel.to_dict(), 'source': cfg.source.to_dict()}
    manifest = _manifest(args, cfg, parameters)

    reports = run_table1(
        eps=cfg.channel.eps, counts=cfg.counts_per_setting, seed=cfg.seed, cases=cases,
        bootstrap=args.bootstrap, threads=args.threads, source=cfg.source,
        channel=cfg.channel, tomography=cfg.tomography,
    )
    df = cases_table(reports)

    out_dir = Path(args.out)
    payload = {'manifest': manifest.payload_fields(), 'cases': [r.to_dict() for r in reports]}
    written = [
        atomic_write(out_dir / 'table1.json', to_json_text(payload)),
        atomic_write(out_dir / 'table1.csv', frame_to_csv(df, manifest.payload_fields())),
        _write_meta(out_dir, manifest, cfg),
    ]

    print(f"Robustness cases at eps = {cfg.channel.eps:.3f}")
    print(df[['case', 'F_e', 'F_e_std', 'C', 'C_std', 'C_exact', 'witness_entangled']]
          .to_string(index=False, float_format=lambda x: f"{x:.4f}"))
    return written


def cmd_tomo(args: argparse.Namespace, cfg: RunConfig) -> List[Path]:
    """Characterize one stage -> density and metric JSON files."""
    case = default_case('I', eps=cfg.channel.eps, counts=cfg.counts_per_setting, seed=cfg.seed,
                        source=cfg.source, channel=cfg.channel, tomography=cfg.tomography)
    parameters = {'stage': args.stage, 'counts': cfg.counts_per_setting,
                  'channel': cfg.channel.to_dict(), 'source': cfg.source.to_dict()}
    manifest = _manifest(args, cfg, parameters)

    result = characterize(args.stage, case)

    out_dir = Path(args.out)
    stem = f'tomo_{args.stage}'
    density = dict(result.density_json(), manifest=manifest.payload_fields())
    metrics = dict(result.metrics_json(), manifest=manifest.payload_fields())
    written = [
        atomic_write(out_dir / f'{stem}_density.json', to_json_text(density)),
        atomic_write(out_dir / f'{stem}_metrics.json', to_json_text(metrics)),
        _write_meta(out_dir, manifest, cfg),
    ]

    result.exact_metrics.print_summary(f"{args.stage.upper()} STATE (exact)")
    result.tomo_metrics.print_summary(f"{args.stage.upper()} STATE (reconstructed)")
    return written


def cmd_compare(args: argparse.Namespace, cfg: RunConfig) -> List[Path]:
    """Model comparison over a gamma grid -> compare.csv + compare_meta.json."""
    if args.gamma_steps < 1 or args.gamma_max < 0:
        raise ConfigError("--gamma-steps must be positive and --gamma-max non-negative")
    grid = [float(g) for g in np.linspace(0.0, args.gamma_max, args.gamma_steps)]
    parameters = {'gamma_grid': grid, 'channel': cfg.channel.to_dict(),
                  'source': cfg.source.to_dict()}
    manifest = _manifest(args, cfg, parameters)

    src = cfg.source
    df = compare_models(src.c0, src.c1, src.overlap, grid, channel=cfg.channel)

    out_dir = Path(args.out)
    written = [
        atomic_write(out_dir / 'compare.csv', frame_to_csv(df, manifest.payload_fields())),
        _write_meta(out_dir, manifest, cfg),
    ]
    print(f"Model comparison: {len(df)} gamma points, max |C_eq2 - C_fock| = "
          f"{df['abs_diff'].max():.4f}")
    return written


def cmd_validate(args: argparse.Namespace, cfg: RunConfig) -> List[Path]:
    """Print the resolved configuration; writes nothing."""
    print(to_json_text(cfg.to_dict()), end='')
    return []


COMMANDS = {
    'fig4': cmd_fig4,
    'table1': cmd_table1,
    'tomo': cmd_tomo,
    'compare': cmd_compare,
    'validate': cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)

    configure_logging(args.log_level)
    try:
        cfg = resolve_config(args)
        written = COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        logger.error("Configuration error: %s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        logger.exception("Run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    for path in written:
        logger.info("Wrote %s", path)
    return EXIT_OK
