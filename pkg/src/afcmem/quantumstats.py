"""Photon-pair coincidence Monte Carlo and cross-correlation estimation.

Pair number per detection window is thermal (single-mode SPDC statistics);
detectors see Bernoulli-thinned pairs plus independent dark counts.  The
cross-correlation ``g2 = coincidences * windows / (singles_h * singles_s)``
stays above the classical bound of 2 under pure loss, which is the whole
point: a loss-only memory preserves non-classical correlations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "PairSourceModel",
    "CoincidenceCounts",
    "G2Estimate",
    "simulate_counts",
    "g2_from_counts",
    "classicality_check",
    "expected_g2",
    "solve_mean_pairs_for_g2",
    "solve_signal_dark_for_g2",
    "no_memory_reference_model",
    "memory_reference_model",
    "CLASSICAL_BOUND",
    "MEMORY_LOSS",
]

CLASSICAL_BOUND = 2.0
# configured heralded-photon storage loss of the broadband memory
MEMORY_LOSS = 0.0035

_BATCH = 1_000_000


@dataclass(frozen=True)
class PairSourceModel:
    """Thermal pair source with lossy detection arms."""

    mean_pairs_per_window: float
    herald_efficiency: float = 1.0
    signal_efficiency: float = 1.0
    dark_prob_herald: float = 0.0
    dark_prob_signal: float = 0.0

    def __post_init__(self):
        if not (self.mean_pairs_per_window > 0):
            raise ValueError("mean_pairs_per_window must be positive")
        if not (0 < self.herald_efficiency <= 1):
            raise ValueError("herald_efficiency must be in (0, 1]")
        if not (0 < self.signal_efficiency <= 1):
            raise ValueError("signal_efficiency must be in (0, 1]")
        for p in (self.dark_prob_herald, self.dark_prob_signal):
            if not (0 <= p <= 1):
                raise ValueError("dark probabilities must be in [0, 1]")


@dataclass(frozen=True)
class CoincidenceCounts:
    n_windows: int
    singles_herald: int
    singles_signal: int
    coincidences: int

    def __post_init__(self):
        if not (
            0
            <= self.coincidences
            <= min(self.singles_herald, self.singles_signal)
            <= self.n_windows
        ):
            raise ValueError("inconsistent tallies")


@dataclass(frozen=True)
class G2Estimate:
    g2: float
    std_error: float


def simulate_counts(
    model: PairSourceModel,
    n_windows: int,
    seed: int = 0,
) -> CoincidenceCounts:
    """Monte Carlo tally over detection windows; deterministic per seed."""
    if n_windows < 10_000:
        raise ValueError(f"need at least 10^4 windows, got {n_windows}")
    rng = np.random.default_rng(seed)
    mu = model.mean_pairs_per_window
    p_geom = 1.0 / (1.0 + mu)
    sh = ss = cc = 0
    remaining = n_windows
    while remaining > 0:
        m = min(_BATCH, remaining)
        remaining -= m
        # thermal (Bose) pair number: geometric on {0, 1, ...}
        n = rng.geometric(p_geom, m) - 1
        ph = 1.0 - (1.0 - model.herald_efficiency) ** n
        ps = 1.0 - (1.0 - model.signal_efficiency) ** n
        herald = (rng.random(m) < ph) | (rng.random(m) < model.dark_prob_herald)
        signal = (rng.random(m) < ps) | (rng.random(m) < model.dark_prob_signal)
        sh += int(herald.sum())
        ss += int(signal.sum())
        cc += int((herald & signal).sum())
    return CoincidenceCounts(
        n_windows=n_windows,
        singles_herald=sh,
        singles_signal=ss,
        coincidences=cc,
    )


def g2_from_counts(c: CoincidenceCounts) -> G2Estimate:
    """Normalised cross-correlation with binomial error propagation."""
    if c.singles_herald == 0 or c.singles_signal == 0:
        raise ValueError("cannot normalise g2 with zero singles")
    if c.coincidences == 0:
        return G2Estimate(g2=0.0, std_error=0.0)
    n = c.n_windows
    g2 = c.coincidences * n / (c.singles_herald * c.singles_signal)
    rel_var = (
        (1 - c.coincidences / n) / c.coincidences
        + (1 - c.singles_herald / n) / c.singles_herald
        + (1 - c.singles_signal / n) / c.singles_signal
    )
    return G2Estimate(g2=float(g2), std_error=float(g2 * math.sqrt(rel_var)))


def classicality_check(g2: float) -> bool:
    """True iff the correlation strictly exceeds the classical bound of 2."""
    if g2 < 0:
        raise ValueError(f"g2 must be non-negative, got {g2}")
    return g2 > CLASSICAL_BOUND


def expected_g2(model: PairSourceModel) -> float:
    """Expected value of the estimator from the thermal generating function.

    For a thermal distribution ``E[x^n] = 1 / (1 + mu (1 - x))``, so the
    no-click probabilities (including darks) are closed-form.
    """
    mu = model.mean_pairs_per_window
    eh, es = model.herald_efficiency, model.signal_efficiency
    no_h = (1 - model.dark_prob_herald) / (1 + mu * eh)
    no_s = (1 - model.dark_prob_signal) / (1 + mu * es)
    no_both = (
        (1 - model.dark_prob_herald)
        * (1 - model.dark_prob_signal)
        / (1 + mu * (eh + es - eh * es))
    )
    p_h = 1 - no_h
    p_s = 1 - no_s
    p_cc = 1 - no_h - no_s + no_both
    return p_cc / (p_h * p_s)


def solve_mean_pairs_for_g2(
    target_g2: float,
    herald_efficiency: float = 1.0,
    signal_efficiency: float = 1.0,
    dark_prob_herald: float = 0.0,
    dark_prob_signal: float = 0.0,
) -> PairSourceModel:
    """Find the pair rate that makes the expected g2 hit ``target_g2``."""
    if target_g2 <= 1:
        raise ValueError("target g2 must exceed 1 for a thermal pair source")

    def f(mu):
        return (
            expected_g2(
                PairSourceModel(
                    mu,
                    herald_efficiency,
                    signal_efficiency,
                    dark_prob_herald,
                    dark_prob_signal,
                )
            )
            - target_g2
        )

    mu = brentq(f, 1e-8, 10.0)
    return PairSourceModel(
        float(mu),
        herald_efficiency,
        signal_efficiency,
        dark_prob_herald,
        dark_prob_signal,
    )


def solve_signal_dark_for_g2(model: PairSourceModel, target_g2: float) -> PairSourceModel:
    """Find the signal-arm background that degrades ``model`` to ``target_g2``."""
    if expected_g2(model) <= target_g2:
        raise ValueError("model is already at or below the target g2")

    def f(dark):
        return expected_g2(replace(model, dark_prob_signal=dark)) - target_g2

    dark = brentq(f, 0.0, 0.5)
    return replace(model, dark_prob_signal=float(dark))


def no_memory_reference_model() -> PairSourceModel:
    """Source calibrated so the expected bare (no-memory) g2 is 18."""
    return solve_mean_pairs_for_g2(
        18.0,
        herald_efficiency=0.5,
        signal_efficiency=0.1,
        dark_prob_herald=1e-6,
        dark_prob_signal=1e-6,
    )


def memory_reference_model(memory_loss: float = MEMORY_LOSS) -> PairSourceModel:
    """No-memory source with the storage loss applied and background added so
    the expected g2 lands at 4.58 (still well above the classical bound)."""
    base = no_memory_reference_model()
    lossy = replace(
        base, signal_efficiency=base.signal_efficiency * memory_loss
    )
    return solve_signal_dark_for_g2(lossy, 4.58)
