"""
SPDC photon-pair source with pump polarization control and pulse-shape
overlap decoherence.
"""

from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple
import numpy as np

from .states import DensityMatrix, HV, VH

# Quartz count of the reference configuration and the mismatch per crystal
# that puts |o|^2 = 0.04 at that count: exp(-2 (n d)^2) = 0.04.
DEFAULT_QUARTZ_UNITS = 5
CALIBRATED_INPUT_CONCURRENCE = 0.040
DEFAULT_DELAY_PER_QUARTZ = float(
    np.sqrt(-np.log(CALIBRATED_INPUT_CONCURRENCE) / 2.0) / DEFAULT_QUARTZ_UNITS
)


def pump_hwp(angle: float) -> Tuple[complex, complex]:
    """
    Pump amplitudes set by the half wave plate before the crystal.

    Args:
        angle: HWP fast-axis angle in radians

    Returns:
        (c0, c1) = (cos 2 angle, sin 2 angle)
    """
    return complex(np.cos(2.0 * angle)), complex(np.sin(2.0 * angle))


def overlap_from_quartz(quartz_units: int, delay_per_quartz: float) -> complex:
    """
    Pulse-shape overlap <f_H|f_V> for a stack of compensator crystals.

    Gaussian model o = exp(-(n d)^2); real and in (0, 1].
    """
    if delay_per_quartz < 0:
        raise ValueError(f"delay_per_quartz must be non-negative: {delay_per_quartz}")
    x = quartz_units * delay_per_quartz
    return complex(np.exp(-x * x))


@dataclass(frozen=True)
class SourceConfig:
    """
    Configuration of the photon-pair source.

    Attributes:
        c0: Amplitude of the H pump component
        c1: Amplitude of the V pump component
        overlap: Complex shape overlap o, |o| <= 1; None derives it from the
            quartz model
        quartz_units: Signed count of compensator crystals
        delay_per_quartz: Shape mismatch contributed by one crystal
    """
    c0: complex = 1.0 / np.sqrt(2.0)
    c1: complex = 1.0 / np.sqrt(2.0)
    overlap: Optional[complex] = None
    quartz_units: int = DEFAULT_QUARTZ_UNITS
    delay_per_quartz: float = DEFAULT_DELAY_PER_QUARTZ

    def __post_init__(self):
        """Validate pump normalization and overlap magnitude."""
        object.__setattr__(self, 'c0', complex(self.c0))
        object.__setattr__(self, 'c1', complex(self.c1))
        if int(self.quartz_units) != self.quartz_units:
            raise ValueError(f"quartz_units must be an integer: {self.quartz_units}")
        object.__setattr__(self, 'quartz_units', int(self.quartz_units))
        if self.delay_per_quartz < 0:
            raise ValueError(f"delay_per_quartz must be non-negative: {self.delay_per_quartz}")
        if self.overlap is None:
            object.__setattr__(
                self, 'overlap', overlap_from_quartz(self.quartz_units, self.delay_per_quartz)
            )
        object.__setattr__(self, 'overlap', complex(self.overlap))

        weight = abs(self.c0) ** 2 + abs(self.c1) ** 2
        if abs(weight - 1.0) > 1e-9:
            raise ValueError(f"|c0|^2 + |c1|^2 must be 1, got {weight:.12g}")
        if abs(self.overlap) > 1.0 + 1e-12:
            raise ValueError(f"|overlap| must not exceed 1, got {abs(self.overlap):.12g}")

    @classmethod
    def calibrated(
        cls,
        input_concurrence: float = CALIBRATED_INPUT_CONCURRENCE
    ) -> 'SourceConfig':
        """Balanced pump with the overlap tuned to a target input concurrence."""
        c0, c1 = pump_hwp(np.pi / 8)
        o = calibrate_overlap(input_concurrence, c0, c1)
        return cls(c0=c0, c1=c1, overlap=o)

    @classmethod
    def from_pump_angle(
        cls,
        angle: float,
        overlap: Optional[complex] = None,
        **kwargs
    ) -> 'SourceConfig':
        """Source whose pump amplitudes come from a HWP angle in radians."""
        c0, c1 = pump_hwp(angle)
        return cls(c0=c0, c1=c1, overlap=overlap, **kwargs)

    def with_quartz_units(self, quartz_units: int) -> 'SourceConfig':
        """
        Change the crystal count by moving along the quartz model.

        The overlap is scaled by o(new) / o(current), so a source sitting on
        the model curve lands on the model value and a calibrated source
        keeps its offset from it. arg(o) is kept; |o| is capped at 1.
        """
        current = abs(overlap_from_quartz(self.quartz_units, self.delay_per_quartz))
        target = abs(overlap_from_quartz(quartz_units, self.delay_per_quartz))
        if current == 0.0:
            magnitude = target
            phase = 1.0
        else:
            magnitude = min(abs(self.overlap) * target / current, 1.0)
            phase = np.exp(1j * np.angle(self.overlap)) if self.overlap != 0 else 1.0
        return replace(self, quartz_units=quartz_units, overlap=magnitude * phase)

    def to_dict(self) -> Dict[str, float]:
        """JSON-ready representation."""
        return {
            'c0_re': self.c0.real,
            'c0_im': self.c0.imag,
            'c1_re': self.c1.real,
            'c1_im': self.c1.imag,
            'overlap_re': self.overlap.real,
            'overlap_im': self.overlap.imag,
            'quartz_units': self.quartz_units,
            'delay_per_quartz': self.delay_per_quartz,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, float]) -> 'SourceConfig':
        """
        Build from to_dict() keys; missing keys take the defaults.

        Without overlap keys the overlap follows the quartz model.
        """
        base = cls()
        overlap = None
        if 'overlap_re' in payload or 'overlap_im' in payload:
            overlap = complex(payload.get('overlap_re', 0.0), payload.get('overlap_im', 0.0))
        return cls(
            c0=complex(payload.get('c0_re', base.c0.real), payload.get('c0_im', base.c0.imag)),
            c1=complex(payload.get('c1_re', base.c1.real), payload.get('c1_im', base.c1.imag)),
            overlap=overlap,
            quartz_units=payload.get('quartz_units', base.quartz_units),
            delay_per_quartz=payload.get('delay_per_quartz', base.delay_per_quartz),
        )


def spdc_input_state(cfg: SourceConfig) -> DensityMatrix:
    """
    Input state to the filter.

    The pair c0|HH>|f_H f_H> + c1|VV>|f_V f_V>, traced over pulse shapes,
    keeps the coherence c0 conj(c1) o^2; a HWP on one photon then maps
    HH -> HV and VV -> VH.
    """
    rho = np.zeros((4, 4), dtype=complex)
    rho[HV, HV] = abs(cfg.c0) ** 2
    rho[VH, VH] = abs(cfg.c1) ** 2
    coherence = cfg.c0 * np.conj(cfg.c1) * cfg.overlap ** 2
    rho[HV, VH] = coherence
    rho[VH, HV] = np.conj(coherence)
    return DensityMatrix(rho)


def input_concurrence(cfg: SourceConfig) -> float:
    """Closed form C_in = 2 |c0| |c1| |o|^2."""
    return 2.0 * abs(cfg.c0) * abs(cfg.c1) * abs(cfg.overlap) ** 2


def calibrate_overlap(measured_input_concurrence: float, c0: complex, c1: complex) -> float:
    """
    Overlap magnitude reproducing a measured input concurrence.

    Inverts C_in = 2 |c0| |c1| o^2.

    Raises:
        ValueError: if the target is negative or exceeds 2 |c0 c1|
    """
    c_max = 2.0 * abs(c0) * abs(c1)
    target = float(measured_input_concurrence)
    if target < 0:
        raise ValueError(f"Concurrence must be non-negative: {target}")
    if target > c_max + 1e-12:
        raise ValueError(
            f"Infeasible input concurrence {target:.6g}: pump allows at most {c_max:.6g}"
        )
    if target == 0.0:
        return 0.0
    return float(np.sqrt(min(target / c_max, 1.0)))
