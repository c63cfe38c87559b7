"""Spectral multiplexing and feed-forward mode mapping.

Several combs, offset in frequency, store one pulse each; all recalled fields
are frequency-shifted (serrodyne) so the selected channel lands on a fixed
Lorentzian filter cavity.  Channels are separated in time so the detected
trace reveals which channel leaked through the cavity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .comb import CombSpec, build_profile, transfer_function, OpticalDepthProfile
from .memory import DecoherenceModel, NO_DECOHERENCE
from .signals import ComplexEnvelope, Spectrum, TimeGrid, gaussian_pulse, to_spectrum, to_time

__all__ = [
    "ChannelPlan",
    "FilterCavity",
    "FeedforwardResult",
    "serrodyne",
    "cavity_filter",
    "simulate_feedforward_run",
    "crosstalk_matrix",
    "multimode_capacity",
    "MULTIPLEX_GRID",
]

# resolves 100 kHz teeth (df = 3.8 kHz) and holds eleven 20 us time slots
MULTIPLEX_GRID = TimeGrid(2**18, 1e-9)


@dataclass(frozen=True)
class ChannelPlan:
    """Evenly spaced spectral channels, one comb per channel."""

    n_channels: int
    spacing: float
    channel_bandwidth: float
    base_comb: CombSpec

    def __post_init__(self):
        if self.n_channels < 1:
            raise ValueError("need at least one channel")
        if self.n_channels > 1 and not (self.spacing > self.channel_bandwidth):
            raise ValueError(
                f"spacing {self.spacing} Hz must exceed the channel bandwidth "
                f"{self.channel_bandwidth} Hz"
            )

    @property
    def total_span(self) -> float:
        return (self.n_channels - 1) * self.spacing + self.channel_bandwidth

    def channel_detunings(self) -> np.ndarray:
        """Channel centres, symmetric around zero detuning."""
        idx = np.arange(self.n_channels)
        return (idx - (self.n_channels - 1) / 2.0) * self.spacing

    def channel_comb(self, index: int) -> CombSpec:
        det = float(self.channel_detunings()[index])
        return replace(
            self.base_comb,
            center_detuning=det,
            bandwidth=self.channel_bandwidth,
        )


@dataclass(frozen=True)
class FilterCavity:
    """Single Lorentzian resonance; ``fwhm`` is the power-transmission width."""

    fwhm: float
    resonance_detuning: float = 0.0
    peak_transmission: float = 1.0

    def __post_init__(self):
        if not (self.fwhm > 0):
            raise ValueError(f"fwhm must be positive, got {self.fwhm}")
        if not (0 < self.peak_transmission <= 1):
            raise ValueError(
                f"peak_transmission must be in (0, 1], got {self.peak_transmission}"
            )

    def amplitude_response(self, freqs: np.ndarray) -> np.ndarray:
        delta = np.asarray(freqs, dtype=float) - self.resonance_detuning
        return np.sqrt(self.peak_transmission) / (1.0 - 2j * delta / self.fwhm)

    def power_response(self, freqs: np.ndarray) -> np.ndarray:
        delta = np.asarray(freqs, dtype=float) - self.resonance_detuning
        return self.peak_transmission / (1.0 + (2.0 * delta / self.fwhm) ** 2)


def serrodyne(env: ComplexEnvelope, shift: float) -> ComplexEnvelope:
    """Frequency-translate by multiplying with a linear phase ramp."""
    if abs(shift) >= env.grid.nyquist:
        raise ValueError(
            f"shift {shift} Hz is at or beyond the grid Nyquist "
            f"{env.grid.nyquist} Hz"
        )
    t = env.grid.times()
    samples = env.samples * np.exp(2j * np.pi * shift * t)
    return env.with_samples(samples, carrier_detuning=env.carrier_detuning + shift)


def cavity_filter(env: ComplexEnvelope, cav: FilterCavity) -> ComplexEnvelope:
    spec = to_spectrum(env)
    bins = spec.bins * cav.amplitude_response(spec.frequencies())
    return to_time(Spectrum(spec.df, bins), env.grid, env.carrier_detuning)


@dataclass(frozen=True)
class FeedforwardResult:
    times: np.ndarray
    intensity: np.ndarray
    crosstalk_row: np.ndarray
    slot_energies_in: np.ndarray
    slot_energies_out: np.ndarray
    selected: int


def _composite_profile(plan: ChannelPlan, df: float, n_bins: int) -> OpticalDepthProfile:
    depths = np.zeros(n_bins)
    for i in range(plan.n_channels):
        depths = depths + build_profile(plan.channel_comb(i), df, n_bins).depths
    return OpticalDepthProfile(df=df, depths=depths)


def simulate_feedforward_run(
    plan: ChannelPlan,
    selected: int,
    dec: DecoherenceModel = NO_DECOHERENCE,
    cav: FilterCavity = FilterCavity(fwhm=7.5e6),
    temporal_offsets: Sequence[float] = (),
    grid: TimeGrid = MULTIPLEX_GRID,
    pulse_fwhm: float = 1e-6,
    phase_mode: str = "minimal_phase",
) -> FeedforwardResult:
    """Store one pulse per channel, recall, shift the selected channel onto
    the cavity resonance and detect.

    ``crosstalk_row[j]`` is the fraction of channel j's post-memory power that
    survives the cavity after the feed-forward shift for channel ``selected``
    (the diagonal approaches the cavity peak transmission, neighbours the
    Lorentzian leak).
    """
    offsets = np.asarray(temporal_offsets, dtype=float)
    if offsets.shape != (plan.n_channels,):
        raise ValueError(
            f"need one temporal offset per channel "
            f"({plan.n_channels}), got {offsets.shape}"
        )
    if not (0 <= selected < plan.n_channels):
        raise ValueError(f"selected channel {selected} out of range")
    tau = plan.base_comb.storage_time
    if plan.n_channels > 1:
        gaps = np.diff(np.sort(offsets))
        min_gap = 4 * pulse_fwhm + tau
        if np.any(gaps <= min_gap):
            raise ValueError(
                f"temporal offsets overlap: need gaps > {min_gap} s "
                f"(pulse duration + storage time), smallest is {gaps.min()} s"
            )

    t_start = max(4 * pulse_fwhm, 4e-6)
    dets = plan.channel_detunings()
    t = grid.times()
    samples = np.zeros(grid.n_samples, dtype=np.complex128)
    for i in range(plan.n_channels):
        pulse = gaussian_pulse(grid, t_start + offsets[i], pulse_fwhm, detuning=dets[i])
        samples += pulse.samples
    field = ComplexEnvelope(grid, samples)
    per_channel_energy = gaussian_pulse(grid, t_start + offsets[0], pulse_fwhm).energy

    profile = _composite_profile(plan, grid.df, grid.n_samples)
    tf = transfer_function(profile, phase_mode)
    spec_in = to_spectrum(field)
    stored = to_time(Spectrum(spec_in.df, spec_in.bins * tf.t), grid)

    # decohere the echo of every channel (same storage time each)
    out = np.array(stored.samples)
    tm = dec.combined_tm
    window = min(2 * pulse_fwhm, 0.45 * tau)
    if math.isfinite(tm):
        for i in range(plan.n_channels):
            te = t_start + offsets[i] + tau
            sel = (t >= te - window) & (t <= te + window)
            out[sel] *= math.exp(-tau / (2.0 * tm))
    stored = stored.with_samples(out)

    slot_margin = 2 * pulse_fwhm
    slots = [
        (t >= t_start + offsets[i] - slot_margin)
        & (t <= t_start + offsets[i] + tau + slot_margin)
        for i in range(plan.n_channels)
    ]
    intensity_before = np.abs(stored.samples) ** 2
    energies_in = np.array(
        [float(intensity_before[s].sum() * grid.dt) for s in slots]
    )

    shifted = serrodyne(stored, -float(dets[selected]))
    detected = cavity_filter(shifted, cav)
    intensity = np.abs(detected.samples) ** 2
    energies_out = np.array([float(intensity[s].sum() * grid.dt) for s in slots])

    with np.errstate(divide="ignore", invalid="ignore"):
        row = np.where(energies_in > 0, energies_out / energies_in, 0.0)
    return FeedforwardResult(
        times=t,
        intensity=intensity,
        crosstalk_row=row,
        slot_energies_in=energies_in,
        slot_energies_out=energies_out,
        selected=selected,
    )


def crosstalk_matrix(
    plan: ChannelPlan,
    dec: DecoherenceModel = NO_DECOHERENCE,
    cav: FilterCavity = FilterCavity(fwhm=7.5e6),
    temporal_offsets: Sequence[float] = (),
    **kwargs,
) -> np.ndarray:
    """Full matrix: one feed-forward run per selected channel."""
    rows = []
    for sel in range(plan.n_channels):
        rows.append(
            simulate_feedforward_run(
                plan, sel, dec, cav, temporal_offsets, **kwargs
            ).crosstalk_row
        )
    return np.vstack(rows)


def multimode_capacity(
    optical_storage_time: float,
    mode_duration: float,
    n_channels: int,
) -> int:
    """Temporal slots per storage window times spectral channels."""
    if optical_storage_time <= 0 or mode_duration <= 0 or n_channels <= 0:
        raise ValueError("all arguments must be positive")
    return int(math.floor(optical_storage_time / mode_duration + 1e-9)) * n_channels
