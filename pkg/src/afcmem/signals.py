"""Uniform time/frequency grids and complex optical pulse envelopes.

Conventions used throughout the package:

- the optical carrier is factored out; all frequencies are detunings from a
  common simulation reference, positive detuning = higher optical frequency;
- time samples live on ``t_k = k * dt``;
- spectra are stored with the DC bin at the centre index (``fftshift`` order),
  ``bins = fftshift(fft(samples)) * dt`` so that spectral energy
  ``sum |bins|^2 * df`` equals time-domain energy ``sum |samples|^2 * dt``;
- a delay ``tau`` corresponds to the spectral factor ``exp(-i 2 pi f tau)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TimeGrid",
    "ComplexEnvelope",
    "Spectrum",
    "gaussian_pulse",
    "square_pulse",
    "to_spectrum",
    "to_time",
    "envelope_to_csv",
    "envelope_from_csv",
    "spectrum_to_csv",
    "envelope_to_binary",
    "envelope_from_binary",
]

_BINARY_MAGIC = b"AFCENV1\x00"


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid: ``n_samples`` points spaced ``dt`` seconds."""

    n_samples: int
    dt: float

    def __post_init__(self):
        if self.n_samples <= 0 or (self.n_samples & (self.n_samples - 1)) != 0:
            raise ValueError(
                f"n_samples must be a positive power of two, got {self.n_samples}"
            )
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def span(self) -> float:
        """Total covered time, seconds."""
        return self.n_samples * self.dt

    @property
    def df(self) -> float:
        """Frequency resolution of the matching spectrum, Hz."""
        return 1.0 / self.span

    @property
    def nyquist(self) -> float:
        return 0.5 / self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt

    def frequencies(self) -> np.ndarray:
        """Centred frequency axis (DC at index ``n_samples // 2``)."""
        return np.fft.fftshift(np.fft.fftfreq(self.n_samples, self.dt))


@dataclass(frozen=True)
class ComplexEnvelope:
    """Sampled complex field amplitude on a :class:`TimeGrid`.

    ``carrier_detuning`` records the nominal offset of this pulse's carrier
    from the simulation reference; the corresponding phase ramp is already
    contained in ``samples``.
    """

    grid: TimeGrid
    samples: np.ndarray
    carrier_detuning: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.shape != (self.grid.n_samples,):
            raise ValueError(
                f"samples length {samples.shape} does not match grid "
                f"({self.grid.n_samples},)"
            )
        if not np.all(np.isfinite(samples.view(np.float64))):
            raise ValueError("samples must be finite")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def with_samples(self, samples: np.ndarray, carrier_detuning=None) -> "ComplexEnvelope":
        return ComplexEnvelope(
            self.grid,
            samples,
            self.carrier_detuning if carrier_detuning is None else carrier_detuning,
        )


@dataclass(frozen=True)
class Spectrum:
    """Complex spectral amplitude on a centred frequency axis."""

    df: float
    bins: np.ndarray

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.complex128)
        if bins.ndim != 1:
            raise ValueError("bins must be one-dimensional")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)
        if not (self.df > 0):
            raise ValueError(f"df must be positive, got {self.df}")

    @property
    def n_bins(self) -> int:
        return self.bins.shape[0]

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.bins) ** 2) * self.df)

    def frequencies(self) -> np.ndarray:
        n = self.n_bins
        return (np.arange(n) - n // 2) * self.df


def gaussian_pulse(
    grid: TimeGrid,
    center: float,
    fwhm: float,
    detuning: float = 0.0,
    amplitude: float = 1.0,
) -> ComplexEnvelope:
    """Gaussian pulse whose *intensity* profile has the given FWHM.

    The pulse must sit well inside the grid: ``center`` and
    ``center +/- 3 fwhm`` have to lie within the span.
    """
    if not (fwhm > 0):
        raise ValueError(f"fwhm must be positive, got {fwhm}")
    if center - 3 * fwhm < 0 or center + 3 * fwhm > grid.span:
        raise ValueError(
            f"pulse at {center} s with fwhm {fwhm} s does not fit inside the "
            f"grid span of {grid.span} s (need center +/- 3 fwhm inside)"
        )
    t = grid.times()
    envelope = amplitude * np.exp(-2.0 * np.log(2.0) * ((t - center) / fwhm) ** 2)
    samples = envelope * np.exp(2j * np.pi * detuning * t)
    return ComplexEnvelope(grid, samples, carrier_detuning=detuning)


def square_pulse(
    grid: TimeGrid,
    center: float,
    duration: float,
    detuning: float = 0.0,
    amplitude: float = 1.0,
) -> ComplexEnvelope:
    """Flat-top pulse of the given duration (for shape-sensitivity studies)."""
    if not (duration > 0):
        raise ValueError(f"duration must be positive, got {duration}")
    if center - duration / 2 < 0 or center + duration / 2 > grid.span:
        raise ValueError(
            f"pulse at {center} s with duration {duration} s does not fit "
            f"inside the grid span of {grid.span} s"
        )
    t = grid.times()
    envelope = np.where(np.abs(t - center) <= duration / 2, amplitude, 0.0)
    samples = envelope * np.exp(2j * np.pi * detuning * t)
    return ComplexEnvelope(grid, samples, carrier_detuning=detuning)


def to_spectrum(env: ComplexEnvelope) -> Spectrum:
    bins = np.fft.fftshift(np.fft.fft(env.samples)) * env.grid.dt
    return Spectrum(df=env.grid.df, bins=bins)


def to_time(spec: Spectrum, grid: TimeGrid, carrier_detuning: float = 0.0) -> ComplexEnvelope:
    if spec.n_bins != grid.n_samples:
        raise ValueError(
            f"spectrum has {spec.n_bins} bins but grid has {grid.n_samples} samples"
        )
    if abs(spec.df - grid.df) > 1e-9 * grid.df:
        raise ValueError(
            f"spectrum df {spec.df} Hz does not match grid df {grid.df} Hz"
        )
    samples = np.fft.ifft(np.fft.ifftshift(spec.bins)) / grid.dt
    return ComplexEnvelope(grid, samples, carrier_detuning=carrier_detuning)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def envelope_to_csv(env: ComplexEnvelope, path) -> None:
    """Write (time_s, re, im) rows with a header line."""
    t = env.grid.times()
    with open(path, "w", newline="") as fh:
        fh.write("time_s,re,im\r\n")
        for ti, s in zip(t, env.samples):
            fh.write(f"{float(ti)!r},{float(s.real)!r},{float(s.imag)!r}\r\n")


def envelope_from_csv(path, carrier_detuning: float = 0.0) -> ComplexEnvelope:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    t = data[:, 0]
    n = len(t)
    if n < 2:
        raise ValueError(f"{path}: need at least two rows")
    dt = float(t[1] - t[0])
    grid = TimeGrid(n, dt)
    return ComplexEnvelope(grid, data[:, 1] + 1j * data[:, 2], carrier_detuning)


def spectrum_to_csv(spec: Spectrum, path) -> None:
    """Write (freq_Hz, re, im) rows with a header line."""
    f = spec.frequencies()
    with open(path, "w", newline="") as fh:
        fh.write("freq_Hz,re,im\r\n")
        for fi, b in zip(f, spec.bins):
            fh.write(f"{float(fi)!r},{float(b.real)!r},{float(b.imag)!r}\r\n")


def envelope_to_binary(env: ComplexEnvelope, path) -> None:
    """Little-endian dump: magic, n (<u8), dt (<f8), carrier (<f8), then
    interleaved re/im <f8 pairs."""
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        fh.write(struct.pack("<Qdd", env.grid.n_samples, env.grid.dt, env.carrier_detuning))
        inter = np.empty(2 * env.grid.n_samples, dtype="<f8")
        inter[0::2] = env.samples.real
        inter[1::2] = env.samples.imag
        fh.write(inter.tobytes())


def envelope_from_binary(path) -> ComplexEnvelope:
    with open(path, "rb") as fh:
        magic = fh.read(len(_BINARY_MAGIC))
        if magic != _BINARY_MAGIC:
            raise ValueError(f"{path}: not an envelope dump (bad magic)")
        n, dt, carrier = struct.unpack("<Qdd", fh.read(24))
        inter = np.frombuffer(fh.read(16 * n), dtype="<f8")
    samples = inter[0::2] + 1j * inter[1::2]
    return ComplexEnvelope(TimeGrid(int(n), dt), samples, carrier)
