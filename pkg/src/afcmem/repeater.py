"""Spin-wave control-pulse scheduling and a single-link entanglement-rate model.

A control pulse applied to the ensemble toggles the coherence domain of
*every* train currently held in the memory.  A train pushed back to the
optical domain by a pulse that was serving a newer train is corrupted: it will
re-emit at a time dictated by that pulse, not by feed-forward information.
Keeping qubits in optical coherence for as long as possible avoids the
problem, which is what the rate model quantifies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "QubitTrain",
    "ControlPulse",
    "RepeaterConfig",
    "ScheduleEvent",
    "Conflict",
    "ScheduleResult",
    "RateEstimate",
    "simulate_spinwave_schedule",
    "max_conflict_free_block",
    "entanglement_rate",
]


@dataclass(frozen=True)
class QubitTrain:
    """A train of temporal modes absorbed as one block."""

    id: str
    arrival_time: float
    n_modes: int = 1
    mode_duration: float = 1e-6

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")


@dataclass(frozen=True)
class ControlPulse:
    """Instantaneous, perfect transfer pulse.

    ``direction`` records the operator's intent (``down``: optical to spin,
    ``up``: spin to optical); physically the pulse toggles every stored train,
    which is exactly the conflict the simulator detects.
    """

    time: float
    direction: str = "down"

    def __post_init__(self):
        if self.direction not in ("down", "up"):
            raise ValueError(f"direction must be 'down' or 'up', got {self.direction!r}")


@dataclass(frozen=True)
class RepeaterConfig:
    optical_storage_time: float
    mode_duration: float
    n_spectral_channels: int = 1
    per_mode_success_probability: float = 1.0
    attempt_cycle: float = 1e-3
    protocol: str = "two_level_afc"
    dead_time_fraction: float = 0.0

    def __post_init__(self):
        if not (0 < self.per_mode_success_probability <= 1):
            raise ValueError("per_mode_success_probability must be in (0, 1]")
        if self.optical_storage_time <= 0 or self.mode_duration <= 0:
            raise ValueError("times must be positive")
        if self.attempt_cycle <= 0:
            raise ValueError("attempt_cycle must be positive")
        if self.n_spectral_channels < 1:
            raise ValueError("need at least one spectral channel")
        if self.protocol not in ("two_level_afc", "spin_wave"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if not (0 <= self.dead_time_fraction < 1):
            raise ValueError("dead_time_fraction must be in [0, 1)")


@dataclass(frozen=True)
class ScheduleEvent:
    time: float
    kind: str
    train_id: str | None = None
    detail: str = ""


@dataclass(frozen=True)
class Conflict:
    train_id: str
    pulse_time: float
    forced_emission_time: float


@dataclass
class ScheduleResult:
    events: list[ScheduleEvent]
    conflicts: list[Conflict]
    final_states: dict[str, str]
    emission_times: dict[str, float]

    @property
    def corrupted_trains(self) -> list[str]:
        return [c.train_id for c in self.conflicts]


class _TrainState:
    __slots__ = ("train", "domain", "optical_accum", "toggle_time", "corrupted", "emitted")

    def __init__(self, train: QubitTrain):
        self.train = train
        self.domain = None  # None until arrival, then 'optical'/'spin'
        self.optical_accum = 0.0
        self.toggle_time = train.arrival_time
        self.corrupted = False
        self.emitted = False


def simulate_spinwave_schedule(
    trains: Sequence[QubitTrain],
    pulses: Sequence[ControlPulse],
    afc_delay: float,
) -> ScheduleResult:
    """Run the memory timeline and report control-pulse conflicts.

    ``afc_delay`` is the comb rephasing time: a train re-emits once its
    accumulated *optical-domain* dwell reaches it (spin storage pauses the
    clock).  Each pulse toggles all stored trains; a pulse fired while some
    train still needs its downward transfer corrupts every train it knocks
    back into the optical domain.  Conflicts are results, not errors.
    """
    trains = list(trains)
    if any(
        trains[i].arrival_time > trains[i + 1].arrival_time
        for i in range(len(trains) - 1)
    ):
        raise ValueError("trains must be sorted by arrival time")
    pulse_times = [p.time for p in pulses]
    if any(pulse_times[i] >= pulse_times[i + 1] for i in range(len(pulse_times) - 1)):
        raise ValueError("pulse times must be strictly increasing")
    if afc_delay <= 0:
        raise ValueError("afc_delay must be positive")

    states = {t.id: _TrainState(t) for t in trains}
    events: list[ScheduleEvent] = []
    conflicts: list[Conflict] = []
    emission_times: dict[str, float] = {}

    def emission_time(st: _TrainState) -> float:
        if st.domain != "optical" or st.emitted:
            return math.inf
        return st.toggle_time + (afc_delay - st.optical_accum)

    def flush_emissions(up_to: float) -> None:
        while True:
            due = [
                st
                for st in states.values()
                if math.isfinite(emission_time(st))
                and emission_time(st) <= up_to + 1e-15
            ]
            if not due:
                return
            st = min(due, key=emission_time)
            te = emission_time(st)
            st.emitted = True
            st.optical_accum = afc_delay
            emission_times[st.train.id] = te
            kind = "forced_reemission" if st.corrupted else "reemission"
            events.append(ScheduleEvent(te, kind, st.train.id))

    timeline: list[tuple[float, int, str, object]] = []
    for t in trains:
        timeline.append((t.arrival_time, 0, "arrival", t))
    for p in pulses:
        timeline.append((p.time, 1, "pulse", p))
    timeline.sort(key=lambda e: (e[0], e[1]))

    for time, _, kind, payload in timeline:
        flush_emissions(time)
        if kind == "arrival":
            st = states[payload.id]
            st.domain = "optical"
            st.toggle_time = time
            events.append(ScheduleEvent(time, "absorbed", payload.id))
            continue

        # control pulse: toggle every train currently held in the memory
        pulse: ControlPulse = payload
        held = [
            st
            for st in states.values()
            if st.domain is not None and not st.emitted
        ]
        optical_held = [st for st in held if st.domain == "optical"]
        intent_down = bool(optical_held)
        events.append(
            ScheduleEvent(
                time,
                "control_pulse",
                None,
                f"direction={pulse.direction} toggles {len(held)} train(s)",
            )
        )
        for st in held:
            if st.domain == "optical":
                st.optical_accum += time - st.toggle_time
                st.domain = "spin"
                st.toggle_time = time
                events.append(ScheduleEvent(time, "to_spin", st.train.id))
            else:
                st.domain = "optical"
                st.toggle_time = time
                events.append(ScheduleEvent(time, "to_optical", st.train.id))
                if intent_down and not st.corrupted:
                    # this pulse was serving a newer train; the recall is forced
                    st.corrupted = True
                    conflicts.append(
                        Conflict(
                            train_id=st.train.id,
                            pulse_time=time,
                            forced_emission_time=emission_time(st),
                        )
                    )

    flush_emissions(math.inf)
    final_states = {}
    for st in states.values():
        if st.domain is None:
            final_states[st.train.id] = "optical"  # never arrived (empty input)
        elif st.corrupted:
            final_states[st.train.id] = "corrupted"
        elif st.emitted:
            final_states[st.train.id] = "reemitted"
        else:
            final_states[st.train.id] = st.domain
    events.sort(key=lambda e: e.time)
    return ScheduleResult(
        events=events,
        conflicts=conflicts,
        final_states=final_states,
        emission_times=emission_times,
    )


def max_conflict_free_block(optical_storage_time: float, mode_duration: float) -> int:
    """Temporal modes storable per block with no mid-block control operation."""
    if optical_storage_time <= 0 or mode_duration <= 0:
        raise ValueError("times must be positive")
    return int(math.floor(optical_storage_time / mode_duration + 1e-9))


@dataclass(frozen=True)
class RateEstimate:
    analytic_rate: float
    monte_carlo_rate: float
    std_error: float


def entanglement_rate(
    cfg: RepeaterConfig,
    seed: int = 0,
    n_cycles: int = 100_000,
) -> RateEstimate:
    """Single-link entanglement distribution rate, analytic and Monte Carlo.

    Each attempt cycle offers ``M`` independent mode slots (temporal block
    times spectral channels); for the spin-wave protocol a ``dead_time_fraction``
    of cycles is blocked by the control-pulse dead time.
    """
    if n_cycles < 1:
        raise ValueError("need at least one cycle")
    block = max_conflict_free_block(cfg.optical_storage_time, cfg.mode_duration)
    modes = block * cfg.n_spectral_channels
    p = cfg.per_mode_success_probability
    live = 1.0 - (cfg.dead_time_fraction if cfg.protocol == "spin_wave" else 0.0)
    analytic = modes * p * live / cfg.attempt_cycle

    rng = np.random.default_rng(seed)
    successes = rng.binomial(modes, p, n_cycles).astype(float) if modes else np.zeros(n_cycles)
    if cfg.protocol == "spin_wave" and cfg.dead_time_fraction > 0:
        successes *= rng.random(n_cycles) >= cfg.dead_time_fraction
    mean = float(successes.mean())
    sem = float(successes.std(ddof=1) / math.sqrt(n_cycles)) if n_cycles > 1 else 0.0
    return RateEstimate(
        analytic_rate=analytic,
        monte_carlo_rate=mean / cfg.attempt_cycle,
        std_error=sem / cfg.attempt_cycle,
    )
