"""Bundled measurement-analog fixtures (see README.md in this directory)."""

from __future__ import annotations

from importlib import resources

import numpy as np

__all__ = [
    "load_efficiency_vs_storage",
    "load_two_pulse_echo_decay",
    "load_t2_vs_field",
    "fixture_path",
]


def _load_csv(name: str) -> np.ndarray:
    ref = resources.files(__package__).joinpath(name)
    with ref.open("rb") as fh:
        return np.loadtxt(fh, delimiter=",", skiprows=1)


def fixture_path(name: str):
    return resources.files(__package__).joinpath(name)


def load_efficiency_vs_storage():
    """(tau_s, efficiency) arrays of the storage-decay fixture."""
    data = _load_csv("fig_efficiency_vs_storage.csv")
    return data[:, 0], data[:, 1]


def load_two_pulse_echo_decay():
    """(t12_s, intensity) arrays of the two-pulse-echo decay fixture."""
    data = _load_csv("fig_two_pulse_echo_decay.csv")
    return data[:, 0], data[:, 1]


def load_t2_vs_field():
    """(field_gauss, t2_s) arrays for interpolation."""
    data = _load_csv("fig_t2_vs_field.csv")
    return data[:, 0], data[:, 1]
