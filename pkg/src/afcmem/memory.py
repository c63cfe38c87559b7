"""End-to-end storage simulation, decoherence and decay fitting.

The decay convention: memory efficiency falls as
``eta(tau) = eta0 * exp(-tau / T_m)`` with ``1/T_m = 4/T2 + 1/tm_extra``.
``tm_extra`` is a phenomenological knob for the decoherence the coherence-time
measurements do not see; with ``tm_extra = inf`` the decay is purely
coherence-limited at ``T2/4``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .comb import (
    CombSpec,
    analytic_efficiency,
    build_profile,
    dephasing_factor,
    transfer_function,
)
from .signals import ComplexEnvelope, Spectrum, TimeGrid, gaussian_pulse, to_spectrum, to_time

__all__ = [
    "DecoherenceModel",
    "StorageResult",
    "DecayFit",
    "CavityProjection",
    "store_and_recall",
    "efficiency_sweep",
    "fit_exponential_decay",
    "two_pulse_echo_intensity",
    "fit_two_pulse_echo",
    "cavity_enhanced_projection",
    "t2_from_field",
    "NO_DECOHERENCE",
    "F4_CAVITY_SPEC",
    "F4_CAVITY_DECOHERENCE",
    "SWEEP_GRID",
]

# default grid for storage-time sweeps: resolves 5 kHz teeth and holds a
# 100 us echo with ample margin
SWEEP_GRID = TimeGrid(2**20, 10e-9)


@dataclass(frozen=True)
class DecoherenceModel:
    """Optical coherence time ``t2`` plus an extra phenomenological decay.

    ``t1`` is bookkeeping only (radiative lifetime); infinities disable the
    corresponding channel.
    """

    t2: float = math.inf
    tm_extra: float = math.inf
    t1: float = 1.3e-3

    def __post_init__(self):
        if self.t2 <= 0 or self.tm_extra <= 0 or self.t1 <= 0:
            raise ValueError("all times must be positive")
        if math.isfinite(self.t2) and math.isfinite(self.t1) and self.t2 > 2 * self.t1:
            raise ValueError(
                f"t2={self.t2} exceeds the physical bound 2*t1={2 * self.t1}"
            )

    @property
    def combined_tm(self) -> float:
        """Efficiency 1/e time: ``1/T_m = 4/t2 + 1/tm_extra``."""
        rate = 0.0
        if math.isfinite(self.t2):
            rate += 4.0 / self.t2
        if math.isfinite(self.tm_extra):
            rate += 1.0 / self.tm_extra
        return math.inf if rate == 0.0 else 1.0 / rate

    def efficiency_factor(self, tau: float) -> float:
        tm = self.combined_tm
        return 1.0 if math.isinf(tm) else math.exp(-tau / tm)


NO_DECOHERENCE = DecoherenceModel(t2=math.inf, tm_extra=math.inf, t1=math.inf)


@dataclass(frozen=True)
class StorageResult:
    output: ComplexEnvelope
    transmitted_energy: float
    echo_energy: float
    echo_time: float
    efficiency: float
    higher_order_energies: tuple = ()


@dataclass(frozen=True)
class DecayFit:
    eta0: float
    tau_1e: float
    eta0_std: float
    tau_std: float
    residual_rms: float


def _intensity_centroid_and_fwhm(env: ComplexEnvelope):
    intensity = np.abs(env.samples) ** 2
    peak = intensity.max()
    if peak <= 0:
        raise ValueError("input envelope carries no energy")
    # normalise so the measured window is invariant under amplitude scaling
    intensity = intensity / peak
    total = intensity.sum()
    t = env.grid.times()
    centroid = float((t * intensity).sum() / total)
    half = intensity.max() / 2.0
    above = np.nonzero(intensity >= half)[0]
    fwhm = float((above[-1] - above[0] + 1) * env.grid.dt)
    return centroid, fwhm


def store_and_recall(
    input_env: ComplexEnvelope,
    spec: CombSpec,
    dec: DecoherenceModel = NO_DECOHERENCE,
    phase_mode: str = "minimal_phase",
) -> StorageResult:
    """Absorb, dephase, rephase and re-emit a pulse through the comb.

    The output contains the directly transmitted pulse plus echoes at
    ``n / delta`` behind it; the first echo defines the efficiency, higher
    orders are tallied separately.  The default causal (``minimal_phase``)
    absorber response carries the physical echo amplitude; ``flat`` mode is
    provided for dispersion-sensitivity studies and understates the echo.
    """
    grid = input_env.grid
    tau = spec.storage_time
    if grid.span <= 2 * tau:
        raise ValueError(
            f"grid span {grid.span} s must exceed twice the storage time {tau} s"
        )
    spectrum = to_spectrum(input_env)
    freqs = spectrum.frequencies()
    power = np.abs(spectrum.bins) ** 2
    in_band = (
        (freqs >= spec.center_detuning - spec.bandwidth / 2)
        & (freqs < spec.center_detuning + spec.bandwidth / 2)
    )
    frac = power[in_band].sum() / power.sum()
    if frac < 0.95:
        raise ValueError(
            f"only {frac:.1%} of the pulse energy lies within the comb "
            f"bandwidth; need at least 95%"
        )

    t0, fwhm = _intensity_centroid_and_fwhm(input_env)
    if t0 + tau + 2 * fwhm > grid.span:
        raise ValueError(
            f"echo at {t0 + tau} s (+ window) falls beyond the grid span "
            f"{grid.span} s"
        )

    profile = build_profile(spec, spectrum.df, grid.n_samples)
    tf = transfer_function(profile, phase_mode)
    out_bins = spectrum.bins * tf.t
    output = to_time(Spectrum(spectrum.df, out_bins), grid, input_env.carrier_detuning)

    t = grid.times()
    # half-sample guard keeps window edges off the sample points, so bin
    # membership cannot flip under ulp-level shifts of the measured centroid
    window = min(2 * fwhm, 0.45 * tau) + 0.5 * grid.dt
    samples = np.array(output.samples)

    # decohere each echo order by its total dwell time n*tau
    tm = dec.combined_tm
    order = 1
    echo_windows = []
    while t0 + order * tau + window <= grid.span:
        sel = (t >= t0 + order * tau - window) & (t <= t0 + order * tau + window)
        if math.isfinite(tm):
            samples[sel] *= math.exp(-order * tau / (2.0 * tm))
        echo_windows.append(sel)
        order += 1
        if order > 8:
            break
    output = output.with_samples(samples)

    intensity = np.abs(samples) ** 2
    dt = grid.dt
    transmitted_sel = (t >= t0 - window) & (t <= t0 + window)
    transmitted_energy = float(intensity[transmitted_sel].sum() * dt)

    if not echo_windows:
        raise ValueError("no echo window fits inside the grid")
    first = echo_windows[0]
    echo_energy = float(intensity[first].sum() * dt)
    if echo_energy > 0:
        echo_time = float((t[first] * intensity[first]).sum() / intensity[first].sum())
    else:
        echo_time = t0 + tau
    higher = tuple(
        float(intensity[sel].sum() * dt) for sel in echo_windows[1:]
    )
    energy_in = input_env.energy
    return StorageResult(
        output=output,
        transmitted_energy=transmitted_energy,
        echo_energy=echo_energy,
        echo_time=echo_time,
        efficiency=echo_energy / energy_in,
        higher_order_energies=higher,
    )


def efficiency_sweep(
    taus: Sequence[float],
    comb_template: CombSpec,
    dec: DecoherenceModel = NO_DECOHERENCE,
    grid: TimeGrid = SWEEP_GRID,
    pulse_fwhm: float = 2e-6,
    pulse_center: float | None = None,
    phase_mode: str = "minimal_phase",
) -> list[tuple[float, float]]:
    """One storage run per requested time; ``delta`` is set to ``1/tau``."""
    if pulse_center is None:
        pulse_center = max(4 * pulse_fwhm, 20e-6)
    points = []
    for tau in taus:
        spec = replace(comb_template, delta=1.0 / tau)
        pulse = gaussian_pulse(
            grid, pulse_center, pulse_fwhm, detuning=spec.center_detuning
        )
        result = store_and_recall(pulse, spec, dec, phase_mode)
        points.append((float(tau), result.efficiency))
    return points


def fit_exponential_decay(points: Sequence[tuple[float, float]]) -> DecayFit:
    """Least-squares fit of ``eta = eta0 * exp(-tau/tau_1e)`` in log space."""
    if len(points) < 3:
        raise ValueError(f"need at least 3 points, got {len(points)}")
    tau = np.array([p[0] for p in points], dtype=float)
    eta = np.array([p[1] for p in points], dtype=float)
    if np.any(eta <= 0):
        raise ValueError("all efficiencies must be positive for a log-space fit")
    y = np.log(eta)
    design = np.column_stack([tau, np.ones_like(tau)])
    coef, residuals, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = coef
    if slope >= 0:
        raise ValueError("points do not decay; cannot fit a positive 1/e time")
    fitted = design @ coef
    rss = float(np.sum((y - fitted) ** 2))
    dof = max(len(tau) - 2, 1)
    sigma2 = rss / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    tau_1e = -1.0 / slope
    eta0 = float(np.exp(intercept))
    return DecayFit(
        eta0=eta0,
        tau_1e=float(tau_1e),
        eta0_std=float(eta0 * np.sqrt(cov[1, 1])),
        tau_std=float(np.sqrt(cov[0, 0]) / slope**2),
        residual_rms=float(np.sqrt(rss / len(tau))),
    )


def two_pulse_echo_intensity(t12: float, t2: float, stretch: float = 1.0) -> float:
    """Relative two-pulse echo intensity ``exp(-(4 t12 / t2)^x)``, x = 1 by
    default (plain exponential)."""
    if t12 < 0:
        raise ValueError(f"pulse separation must be non-negative, got {t12}")
    return float(np.exp(-((4.0 * t12 / t2) ** stretch)))


def fit_two_pulse_echo(
    t12: Sequence[float],
    intensity: Sequence[float],
    fit_stretch: bool = False,
):
    """Recover T2 (and optionally the stretch exponent) from echo decays.

    Returns ``(t2, t2_std)`` or ``(t2, t2_std, stretch, stretch_std)``.
    """
    t12 = np.asarray(t12, dtype=float)
    inten = np.asarray(intensity, dtype=float)
    if np.any(inten <= 0):
        raise ValueError("intensities must be positive")
    if not fit_stretch:
        fit = fit_exponential_decay(list(zip(t12, inten)))
        return fit.tau_1e * 4.0, fit.tau_std * 4.0

    def model(x, amp, t2, stretch):
        return np.log(amp) - (4.0 * x / t2) ** stretch

    p0 = (inten[0], 4.0 * t12[-1], 1.0)
    bounds = ([1e-12, 1e-9, 0.2], [np.inf, np.inf, 5.0])
    popt, pcov = curve_fit(
        model, t12, np.log(inten), p0=p0, bounds=bounds, maxfev=10000
    )
    return (
        float(popt[1]),
        float(np.sqrt(pcov[1, 1])),
        float(popt[2]),
        float(np.sqrt(pcov[2, 2])),
    )


@dataclass(frozen=True)
class CavityProjection:
    cavity_efficiency: float
    single_pass_efficiency: float


def cavity_enhanced_projection(
    spec: CombSpec,
    dec: DecoherenceModel,
    tau: float,
) -> CavityProjection:
    """Efficiency of the comb inside an impedance-matched cavity.

    At exact matching the intracavity field is fully absorbed at the comb
    teeth, so the small single-pass depth drops out; what remains is the
    background loss (enhanced by the finesse-fold round trips), the tooth
    dephasing penalty, and decoherence:
    ``eta = exp(-2 d0 F) * eta_deph(shape, F) * exp(-tau / T_m)``.
    The uncalibrated single-pass value is reported alongside.
    """
    if not (spec.d0 < spec.d_peak):
        raise ValueError("cavity projection requires d0 < d_peak")
    decay = dec.efficiency_factor(tau)
    cavity = (
        math.exp(-2.0 * spec.d0 * spec.finesse)
        * dephasing_factor(spec.tooth_shape, spec.finesse)
        * decay
    )
    single = analytic_efficiency(spec) * decay
    return CavityProjection(cavity_efficiency=cavity, single_pass_efficiency=single)


# calibration reproducing the projected 15% at 30 us with an F=4 comb:
# d0 solves exp(-8 d0) * exp(-7/16) * exp(-30us/275us) = 0.15
F4_CAVITY_SPEC = CombSpec(
    delta=1.0 / 30e-6,
    finesse=4.0,
    d_peak=1.0,
    d0=0.168816,
    bandwidth=1e6,
    tooth_shape="gaussian",
)
F4_CAVITY_DECOHERENCE = DecoherenceModel(t2=1.1e-3, tm_extra=math.inf)


def t2_from_field(field_gauss):
    """Interpolate the coherence time vs magnetic field fixture (seconds)."""
    from .fixtures import load_t2_vs_field

    b, t2 = load_t2_vs_field()
    return np.interp(field_gauss, b, t2)
