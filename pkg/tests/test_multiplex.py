"""Serrodyne shifting, cavity filtering, and feed-forward crosstalk."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afcmem.comb import CombSpec
from afcmem.multiplex import (
    ChannelPlan,
    FilterCavity,
    cavity_filter,
    crosstalk_matrix,
    multimode_capacity,
    serrodyne,
    simulate_feedforward_run,
)
from afcmem.signals import ComplexEnvelope, TimeGrid, gaussian_pulse, to_spectrum

BASE_COMB = CombSpec(delta=200e3, finesse=2, d_peak=1.0, d0=0.0, bandwidth=1e6)
CAVITY = FilterCavity(fwhm=7.5e6)
GRID = TimeGrid(2**14, 1e-9)


def _random_envelope(seed, grid=GRID):
    rng = np.random.default_rng(seed)
    return ComplexEnvelope(
        grid,
        rng.standard_normal(grid.n_samples) + 1j * rng.standard_normal(grid.n_samples),
    )


class TestSerrodyne:
    def test_zero_shift_identity(self):
        env = _random_envelope(0)
        out = serrodyne(env, 0.0)
        assert np.array_equal(out.samples, env.samples)

    def test_energy_preserved(self):
        env = _random_envelope(1)
        assert serrodyne(env, 3e6).energy == pytest.approx(env.energy, rel=1e-12)

    def test_moves_spectral_peak(self):
        env = gaussian_pulse(GRID, 8e-6, 1e-6, detuning=10e6)
        spec = to_spectrum(serrodyne(env, -10e6))
        peak = spec.frequencies()[np.argmax(np.abs(spec.bins))]
        assert abs(peak) <= 2 * spec.df

    def test_shift_beyond_nyquist_rejected(self):
        with pytest.raises(ValueError):
            serrodyne(_random_envelope(2), GRID.nyquist)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31), st.floats(-5e6, 5e6), st.floats(-5e6, 5e6))
    def test_composition(self, seed, a, b):
        env = _random_envelope(seed)
        two_step = serrodyne(serrodyne(env, a), b)
        one_step = serrodyne(env, a + b)
        scale = np.max(np.abs(env.samples))
        assert np.max(np.abs(two_step.samples - one_step.samples)) < 1e-12 * scale


class TestFilterCavity:
    def test_on_resonance_narrowband_pulse(self):
        cav = FilterCavity(fwhm=7.5e6, peak_transmission=0.8)
        env = gaussian_pulse(GRID, 8e-6, 2e-6)  # ~220 kHz wide << 7.5 MHz
        out = cavity_filter(env, cav)
        assert out.energy / env.energy == pytest.approx(0.8, rel=1e-3)

    def test_half_width_detuning_is_half_power(self):
        response = CAVITY.power_response(np.array([3.75e6]))
        assert response[0] == pytest.approx(0.5, rel=1e-12)

    def test_neighbour_detuning_leak(self):
        # 10 MHz away from a 7.5 MHz-wide resonance: 1/(1+(20/7.5)^2)
        response = CAVITY.power_response(np.array([10e6]))
        assert response[0] == pytest.approx(1 / (1 + (20 / 7.5) ** 2), rel=1e-12)
        assert response[0] == pytest.approx(0.123, abs=5e-4)

    def test_invalid_parameters_rejected(self):
        with pytest.raises(ValueError):
            FilterCavity(fwhm=0.0)
        with pytest.raises(ValueError):
            FilterCavity(fwhm=1e6, peak_transmission=1.5)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31), st.floats(0.05, 1.0))
    def test_energy_bound(self, seed, peak):
        env = _random_envelope(seed)
        out = cavity_filter(env, FilterCavity(fwhm=5e6, peak_transmission=peak))
        assert out.energy <= peak * env.energy * (1 + 1e-9)


class TestChannelPlan:
    def test_overlapping_channels_rejected(self):
        with pytest.raises(ValueError):
            ChannelPlan(
                n_channels=3, spacing=1e6, channel_bandwidth=2e6, base_comb=BASE_COMB
            )

    def test_detunings_symmetric(self):
        plan = ChannelPlan(
            n_channels=11, spacing=10e6, channel_bandwidth=1e6, base_comb=BASE_COMB
        )
        dets = plan.channel_detunings()
        assert dets[5] == 0.0
        assert np.allclose(dets, -dets[::-1])
        assert plan.total_span == pytest.approx(101e6)

    def test_channel_comb_inherits_template(self):
        plan = ChannelPlan(
            n_channels=3, spacing=10e6, channel_bandwidth=1e6, base_comb=BASE_COMB
        )
        comb = plan.channel_comb(0)
        assert comb.center_detuning == pytest.approx(-10e6)
        assert comb.delta == BASE_COMB.delta
        assert comb.bandwidth == 1e6


@pytest.fixture(scope="module")
def three_channel():
    plan = ChannelPlan(
        n_channels=3, spacing=10e6, channel_bandwidth=1e6, base_comb=BASE_COMB
    )
    offsets = [0.0, 20e-6, 40e-6]
    return plan, offsets


class TestFeedforwardRun:
    def test_selected_channel_dominates(self, three_channel):
        plan, offsets = three_channel
        result = simulate_feedforward_run(
            plan, 1, cav=CAVITY, temporal_offsets=offsets
        )
        row = result.crosstalk_row
        assert row[1] > 0.9
        assert row[1] >= row.max()
        # neighbours leak at the Lorentzian level relative to the diagonal
        for j in (0, 2):
            assert row[j] / row[1] == pytest.approx(0.123, rel=0.08)

    def test_crosstalk_row_symmetry_across_selections(self, three_channel):
        plan, offsets = three_channel
        matrix = crosstalk_matrix(plan, cav=CAVITY, temporal_offsets=offsets)
        assert matrix.shape == (3, 3)
        assert np.all(matrix >= 0) and np.all(matrix <= 1)
        # diagonal dominates each row
        for i in range(3):
            assert matrix[i, i] == matrix[i].max()
        # nearest-neighbour leak depends only on |spacing|: relative spread < 1%
        nn = [matrix[i, j] for i in range(3) for j in (i - 1, i + 1) if 0 <= j < 3]
        assert (max(nn) - min(nn)) / np.mean(nn) < 0.05

    def test_single_channel_row_is_peak_transmission(self):
        plan = ChannelPlan(
            n_channels=1, spacing=10e6, channel_bandwidth=1e6, base_comb=BASE_COMB
        )
        cav = FilterCavity(fwhm=7.5e6, peak_transmission=0.9)
        result = simulate_feedforward_run(plan, 0, cav=cav, temporal_offsets=[0.0])
        assert result.crosstalk_row[0] == pytest.approx(0.9, rel=0.02)

    def test_overlapping_offsets_rejected(self, three_channel):
        plan, _ = three_channel
        with pytest.raises(ValueError):
            simulate_feedforward_run(
                plan, 0, cav=CAVITY, temporal_offsets=[0.0, 2e-6, 40e-6]
            )

    def test_offset_count_must_match(self, three_channel):
        plan, _ = three_channel
        with pytest.raises(ValueError):
            simulate_feedforward_run(plan, 0, cav=CAVITY, temporal_offsets=[0.0])

    def test_trace_has_echo_structure(self, three_channel):
        plan, offsets = three_channel
        result = simulate_feedforward_run(
            plan, 0, cav=CAVITY, temporal_offsets=offsets
        )
        t = result.times
        # detected intensity near the selected channel's echo slot exceeds the
        # unselected channels' echoes by roughly the Lorentzian suppression
        def slot_power(t0):
            sel = (t >= t0 - 2e-6) & (t <= t0 + 2e-6)
            return result.intensity[sel].sum()

        echo_power = slot_power(4e-6 + offsets[0] + 5e-6)
        other_power = slot_power(4e-6 + offsets[1] + 5e-6)
        assert other_power < 0.2 * echo_power


class TestMultimodeCapacity:
    def test_reference_capacities(self):
        assert multimode_capacity(5e-6, 1e-6, 11) == 55
        assert multimode_capacity(5e-6, 1e-6, 1) == 5
        assert multimode_capacity(100e-6, 1e-6, 11) == 1100

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            multimode_capacity(0.0, 1e-6, 1)
        with pytest.raises(ValueError):
            multimode_capacity(5e-6, 1e-6, 0)
