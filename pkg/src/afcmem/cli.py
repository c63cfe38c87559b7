"""Experiment runners: figure-analog simulations driven by TOML configs.

Every subcommand reads a config (``--config``, TOML), writes CSV outputs plus
a matplotlib plot script into ``--out``, and drops a ``report.json`` that,
together with the package version and seed, reproduces the run bit-for-bit.
Exit codes: 0 success, 2 config/validation error, 3 runtime error.
"""

from __future__ import annotations

import json
import math
import os
import sys
import tempfile

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import __version__
from .comb import CombSpec, build_profile, profile_to_csv
from .fixtures import load_two_pulse_echo_decay
from .memory import (
    DecoherenceModel,
    SWEEP_GRID,
    efficiency_sweep,
    fit_exponential_decay,
    fit_two_pulse_echo,
    two_pulse_echo_intensity,
)
from .multiplex import (
    MULTIPLEX_GRID,
    ChannelPlan,
    FilterCavity,
    crosstalk_matrix,
    simulate_feedforward_run,
)
from .quantumstats import (
    PairSourceModel,
    classicality_check,
    g2_from_counts,
    simulate_counts,
)
from .repeater import (
    ControlPulse,
    QubitTrain,
    RepeaterConfig,
    entanglement_rate,
    simulate_spinwave_schedule,
)
from .signals import TimeGrid


class ConfigError(Exception):
    """Raised when a config file fails validation; exits with code 2."""


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

DEFAULTS = {
    "comb": {
        "comb": {
            "delta_hz": 200e3,
            "finesse": 2.0,
            "d_peak": 1.0,
            "d0": 0.0,
            "bandwidth_hz": 1e6,
            "center_detuning_hz": 0.0,
            "tooth_shape": "square",
        },
        "profile": {"df_hz": 2e3, "n_bins": 2048},
    },
    "sweep": {
        "comb": {
            "finesse": 2.0,
            "d_peak": 1.0,
            "d0": 0.0,
            "bandwidth_hz": 0.5e6,
            "center_detuning_hz": 0.0,
            "tooth_shape": "square",
        },
        "decoherence": {"t2_s": math.inf, "tm_extra_s": math.inf, "t1_s": math.inf},
        "sweep": {
            "tau_start_s": 10e-6,
            "tau_stop_s": 100e-6,
            "n_points": 10,
            "pulse_fwhm_s": 2e-6,
        },
        "grid": {"n_samples": SWEEP_GRID.n_samples, "dt_s": SWEEP_GRID.dt},
    },
    "echo-fit": {
        "echo": {"input_csv": "", "fit_stretch": False},
    },
    "multiplex": {
        "plan": {"n_channels": 3, "spacing_hz": 10e6, "channel_bandwidth_hz": 1e6},
        "comb": {
            "delta_hz": 200e3,
            "finesse": 2.0,
            "d_peak": 1.0,
            "d0": 0.0,
            "tooth_shape": "square",
        },
        "cavity": {"fwhm_hz": 7.5e6, "peak_transmission": 1.0},
        "decoherence": {"t2_s": math.inf, "tm_extra_s": math.inf, "t1_s": math.inf},
        "feedforward": {
            "selected": 0,
            "offset_step_s": 20e-6,
            "pulse_fwhm_s": 1e-6,
            "full_matrix": False,
        },
        "grid": {"n_samples": MULTIPLEX_GRID.n_samples, "dt_s": MULTIPLEX_GRID.dt},
    },
    "repeater": {
        "repeater": {
            "optical_storage_time_s": 100e-6,
            "mode_duration_s": 1e-6,
            "n_spectral_channels": 1,
            "per_mode_success_probability": 0.01,
            "attempt_cycle_s": 1e-3,
            "protocol": "two_level_afc",
            "dead_time_fraction": 0.0,
            "n_cycles": 100000,
        },
        "schedule": {"afc_delay_s": 10e-6, "trains": [], "pulses": []},
    },
    "g2": {
        "source": {
            "mean_pairs_per_window": 0.06,
            "herald_efficiency": 0.5,
            "signal_efficiency": 0.1,
            "dark_prob_herald": 1e-6,
            "dark_prob_signal": 1e-6,
        },
        "g2": {"n_windows": 1000000},
    },
}


def _merge_checked(defaults, overrides, path="") -> dict:
    """Overlay overrides on defaults, rejecting unknown keys."""
    merged = dict(defaults)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(defaults[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a table")
            merged[key] = _merge_checked(defaults[key], value, where)
        else:
            merged[key] = value
    return merged


def _load_config(subcommand: str, config_path) -> dict:
    defaults = DEFAULTS[subcommand]
    if config_path is None:
        return json.loads(json.dumps(defaults))  # deep copy
    try:
        with open(config_path, "rb") as fh:
            raw = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
    return _merge_checked(defaults, raw)


def _comb_spec(section, delta_override=None) -> CombSpec:
    try:
        return CombSpec(
            delta=section.get("delta_hz", delta_override) if delta_override is None else delta_override,
            finesse=section["finesse"],
            d_peak=section["d_peak"],
            d0=section["d0"],
            bandwidth=section.get("bandwidth_hz", 1e6),
            center_detuning=section.get("center_detuning_hz", 0.0),
            tooth_shape=section["tooth_shape"],
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [comb] section: {exc}") from exc


def _decoherence(section) -> DecoherenceModel:
    try:
        return DecoherenceModel(
            t2=section["t2_s"], tm_extra=section["tm_extra_s"], t1=section["t1_s"]
        )
    except ValueError as exc:
        raise ConfigError(f"invalid [decoherence] section: {exc}") from exc


def _grid(section) -> TimeGrid:
    try:
        return TimeGrid(int(section["n_samples"]), float(section["dt_s"]))
    except ValueError as exc:
        raise ConfigError(f"invalid [grid] section: {exc}") from exc


def _write_atomic(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header, rows) -> str:
    lines = [header]
    for row in rows:
        lines.append(
            ",".join(
                f"{float(v)!r}" if isinstance(v, (float, np.floating)) else str(v)
                for v in row
            )
        )
    return "\r\n".join(lines) + "\r\n"


_PLOT_TEMPLATE = """\
#!/usr/bin/env python3
# Auto-generated plot script; run next to the CSV it references.
import matplotlib.pyplot as plt
import numpy as np

data = np.loadtxt({csv!r}, delimiter=",", skiprows=1)
plt.figure()
plt.plot(data[:, 0] {xscale}, data[:, 1], {style})
plt.xlabel({xlabel!r})
plt.ylabel({ylabel!r})
{extra}
plt.tight_layout()
plt.savefig({png!r}, dpi=150)
print("wrote", {png!r})
"""


def _plot_script(csv_name, xlabel, ylabel, png, xscale="", style="'o-'", extra=""):
    return _PLOT_TEMPLATE.format(
        csv=csv_name, xlabel=xlabel, ylabel=ylabel, png=png, xscale=xscale,
        style=style, extra=extra,
    )


def _finish(out_dir: Path, subcommand, config, seed, outputs, summary) -> None:
    report = {
        "tool": "afcmem",
        "version": __version__,
        "subcommand": subcommand,
        "seed": seed,
        "config": config,
        "outputs": sorted(str(p) for p in outputs),
        "summary": summary,
    }
    _write_atomic(
        out_dir / "report.json",
        json.dumps(report, indent=2, sort_keys=True, default=str) + "\n",
    )
    click.echo(json.dumps(summary, indent=2, sort_keys=True, default=str))


def _print_defaults(subcommand: str) -> None:
    def emit(table, prefix=""):
        lines = []
        scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
        if prefix and scalars:
            lines.append(f"[{prefix}]")
        for k, v in scalars.items():
            if isinstance(v, bool):
                rendered = "true" if v else "false"
            elif isinstance(v, float) and math.isinf(v):
                rendered = "inf"
            elif isinstance(v, str):
                rendered = json.dumps(v)
            else:
                rendered = repr(v)
            lines.append(f"{k} = {rendered}")
        for k, v in table.items():
            if isinstance(v, dict):
                lines.append("")
                lines.extend(emit(v, f"{prefix}.{k}" if prefix else k))
        return lines

    click.echo("\n".join(emit(DEFAULTS[subcommand])))


def _common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="TOML config file; omit for defaults.")(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), default="afcmem-out",
                      help="Output directory (created if missing).")(fn)
    fn = click.option("--seed", type=int, default=0, show_default=True)(fn)
    fn = click.option("--threads", type=int, default=1, show_default=True,
                      help="Reserved; outputs are independent of its value.")(fn)
    fn = click.option("--print-defaults", "show_defaults", is_flag=True,
                      help="Print the default config for this subcommand and exit.")(fn)
    return fn


def _run_guarded(subcommand, show_defaults, body):
    if show_defaults:
        _print_defaults(subcommand)
        return
    try:
        body()
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(2)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        click.echo(f"runtime error: {exc}", err=True)
        sys.exit(3)


@click.group()
@click.version_option(__version__)
def main():
    """Atomic-frequency-comb memory simulator."""


@main.command("comb")
@_common_options
def comb_cmd(config_path, out_dir, seed, threads, show_defaults):
    """Emit a comb optical-depth profile (absorption-trace analog)."""

    def body():
        cfg = _load_config("comb", config_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        spec = _comb_spec(cfg["comb"])
        profile = build_profile(spec, cfg["profile"]["df_hz"], int(cfg["profile"]["n_bins"]))
        csv_path = out / "comb_profile.csv"
        profile_to_csv(profile, csv_path)
        _write_atomic(
            out / "plot_comb_profile.py",
            _plot_script("comb_profile.csv", "detuning (Hz)", "optical depth",
                         "comb_profile.png", style="'-'"),
        )
        summary = {
            "n_teeth": int(round(spec.bandwidth / spec.delta)),
            "storage_time_s": spec.storage_time,
        }
        _finish(out, "comb", cfg, seed, [csv_path, out / "plot_comb_profile.py"], summary)

    _run_guarded("comb", show_defaults, body)


@main.command("sweep")
@_common_options
def sweep_cmd(config_path, out_dir, seed, threads, show_defaults):
    """Efficiency vs storage time plus an exponential-decay fit."""

    def body():
        cfg = _load_config("sweep", config_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        sw = cfg["sweep"]
        taus = np.linspace(sw["tau_start_s"], sw["tau_stop_s"], int(sw["n_points"]))
        template = _comb_spec(cfg["comb"], delta_override=1.0 / taus[0])
        dec = _decoherence(cfg["decoherence"])
        grid = _grid(cfg["grid"])
        points = efficiency_sweep(
            taus, template, dec, grid=grid, pulse_fwhm=sw["pulse_fwhm_s"]
        )
        fit = fit_exponential_decay(points)
        csv_path = out / "sweep.csv"
        _write_atomic(csv_path, _csv("tau_s,efficiency", points))
        _write_atomic(
            out / "plot_sweep.py",
            _plot_script("sweep.csv", "storage time (s)", "efficiency",
                         "sweep.png", extra="plt.yscale('log')"),
        )
        summary = {"fit": asdict(fit), "n_points": len(points)}
        _finish(out, "sweep", cfg, seed, [csv_path, out / "plot_sweep.py"], summary)

    _run_guarded("sweep", show_defaults, body)


@main.command("echo-fit")
@_common_options
def echo_fit_cmd(config_path, out_dir, seed, threads, show_defaults):
    """Fit a coherence time to a two-pulse echo decay (bundled fixture by
    default)."""

    def body():
        cfg = _load_config("echo-fit", config_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        src = cfg["echo"]["input_csv"]
        if src:
            data = np.loadtxt(src, delimiter=",", skiprows=1)
            t12, inten = data[:, 0], data[:, 1]
        else:
            t12, inten = load_two_pulse_echo_decay()
        if cfg["echo"]["fit_stretch"]:
            t2, t2_std, stretch, stretch_std = fit_two_pulse_echo(t12, inten, True)
            summary = {"t2_s": t2, "t2_std_s": t2_std,
                       "stretch": stretch, "stretch_std": stretch_std}
        else:
            t2, t2_std = fit_two_pulse_echo(t12, inten)
            summary = {"t2_s": t2, "t2_std_s": t2_std}
        model = [
            (float(x), two_pulse_echo_intensity(float(x), t2)) for x in t12
        ]
        csv_path = out / "echo_decay.csv"
        _write_atomic(
            csv_path,
            _csv("t12_s,intensity,fitted_intensity",
                 [(float(x), float(y), m[1]) for x, y, m in zip(t12, inten, model)]),
        )
        _write_atomic(
            out / "plot_echo_decay.py",
            _plot_script("echo_decay.csv", "pulse separation (s)", "echo intensity",
                         "echo_decay.png", extra="plt.yscale('log')"),
        )
        _finish(out, "echo-fit", cfg, seed, [csv_path, out / "plot_echo_decay.py"], summary)

    _run_guarded("echo-fit", show_defaults, body)


@main.command("multiplex")
@_common_options
def multiplex_cmd(config_path, out_dir, seed, threads, show_defaults):
    """Feed-forward spectral mode mapping: detected trace plus crosstalk."""

    def body():
        cfg = _load_config("multiplex", config_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        base = _comb_spec(cfg["comb"])
        pl = cfg["plan"]
        plan = ChannelPlan(
            n_channels=int(pl["n_channels"]),
            spacing=pl["spacing_hz"],
            channel_bandwidth=pl["channel_bandwidth_hz"],
            base_comb=base,
        )
        cav = FilterCavity(
            fwhm=cfg["cavity"]["fwhm_hz"],
            peak_transmission=cfg["cavity"]["peak_transmission"],
        )
        dec = _decoherence(cfg["decoherence"])
        grid = _grid(cfg["grid"])
        ff = cfg["feedforward"]
        offsets = [ff["offset_step_s"] * i for i in range(plan.n_channels)]
        result = simulate_feedforward_run(
            plan, int(ff["selected"]), dec, cav, offsets,
            grid=grid, pulse_fwhm=ff["pulse_fwhm_s"],
        )
        trace_path = out / "trace.csv"
        stride = max(1, grid.n_samples // 65536)
        _write_atomic(
            trace_path,
            _csv("time_s,intensity",
                 zip(result.times[::stride].tolist(),
                     result.intensity[::stride].tolist())),
        )
        row_path = out / "crosstalk.csv"
        if ff["full_matrix"]:
            matrix = crosstalk_matrix(plan, dec, cav, offsets, grid=grid,
                                      pulse_fwhm=ff["pulse_fwhm_s"])
            rows = [[i] + r.tolist() for i, r in enumerate(matrix)]
        else:
            rows = [[int(ff["selected"])] + result.crosstalk_row.tolist()]
        header = "selected," + ",".join(f"ch{j}" for j in range(plan.n_channels))
        _write_atomic(row_path, _csv(header, rows))
        _write_atomic(
            out / "plot_trace.py",
            _plot_script("trace.csv", "time (s)", "intensity",
                         "trace.png", style="'-'"),
        )
        diag = result.crosstalk_row[result.selected]
        neighbours = [
            result.crosstalk_row[j]
            for j in (result.selected - 1, result.selected + 1)
            if 0 <= j < plan.n_channels
        ]
        summary = {
            "selected": result.selected,
            "diagonal_transmission": float(diag),
            "nearest_neighbour_crosstalk": [float(v / diag) for v in neighbours],
        }
        _finish(out, "multiplex", cfg, seed,
                [trace_path, row_path, out / "plot_trace.py"], summary)

    _run_guarded("multiplex", show_defaults, body)


@main.command("repeater")
@_common_options
def repeater_cmd(config_path, out_dir, seed, threads, show_defaults):
    """Spin-wave schedule conflicts plus the single-link rate model."""

    def body():
        cfg = _load_config("repeater", config_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rc = cfg["repeater"]
        config = RepeaterConfig(
            optical_storage_time=rc["optical_storage_time_s"],
            mode_duration=rc["mode_duration_s"],
            n_spectral_channels=int(rc["n_spectral_channels"]),
            per_mode_success_probability=rc["per_mode_success_probability"],
            attempt_cycle=rc["attempt_cycle_s"],
            protocol=rc["protocol"],
            dead_time_fraction=rc["dead_time_fraction"],
        )
        rate = entanglement_rate(config, seed=seed, n_cycles=int(rc["n_cycles"]))
        summary = {
            "analytic_rate_hz": rate.analytic_rate,
            "monte_carlo_rate_hz": rate.monte_carlo_rate,
            "rate_std_error_hz": rate.std_error,
        }
        outputs = []
        sched = cfg["schedule"]
        if sched["trains"]:
            trains = [
                QubitTrain(
                    id=str(t["id"]),
                    arrival_time=t["arrival_time_s"],
                    n_modes=int(t.get("n_modes", 1)),
                    mode_duration=t.get("mode_duration_s", rc["mode_duration_s"]),
                )
                for t in sched["trains"]
            ]
            pulses = [
                ControlPulse(time=p["time_s"], direction=p.get("direction", "down"))
                for p in sched["pulses"]
            ]
            result = simulate_spinwave_schedule(trains, pulses, sched["afc_delay_s"])
            events_path = out / "events.csv"
            _write_atomic(
                events_path,
                _csv("time_s,kind,train_id,detail",
                     [(e.time, e.kind, e.train_id or "", e.detail)
                      for e in result.events]),
            )
            outputs.append(events_path)
            summary["conflicts"] = [asdict(c) for c in result.conflicts]
            summary["final_states"] = result.final_states
        _finish(out, "repeater", cfg, seed, outputs, summary)

    _run_guarded("repeater", show_defaults, body)


@main.command("g2")
@_common_options
def g2_cmd(config_path, out_dir, seed, threads, show_defaults):
    """Photon-pair coincidence Monte Carlo and cross-correlation report."""

    def body():
        cfg = _load_config("g2", config_path)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        src = cfg["source"]
        try:
            model = PairSourceModel(
                mean_pairs_per_window=src["mean_pairs_per_window"],
                herald_efficiency=src["herald_efficiency"],
                signal_efficiency=src["signal_efficiency"],
                dark_prob_herald=src["dark_prob_herald"],
                dark_prob_signal=src["dark_prob_signal"],
            )
        except ValueError as exc:
            raise ConfigError(f"invalid [source] section: {exc}") from exc
        counts = simulate_counts(model, int(cfg["g2"]["n_windows"]), seed=seed)
        est = g2_from_counts(counts)
        summary = {
            "g2": est.g2,
            "std_error": est.std_error,
            "classical_bound_passed": classicality_check(est.g2),
            "counts": asdict(counts),
        }
        _finish(out, "g2", cfg, seed, [], summary)

    _run_guarded("g2", show_defaults, body)


if __name__ == "__main__":
    main()
