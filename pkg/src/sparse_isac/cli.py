"""Config-driven experiment runner.

Reads a JSON config, validates it fully before any work starts, runs the
named experiment, and writes plotting-tool-agnostic CSV artifacts plus a
manifest.json that captures the resolved config (re-running from the
manifest reproduces the outputs byte for byte).

Exit codes: 0 success, 2 config/schema violation, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .alloc import (
    OfdmParams,
    ResourceAllocation,
    hole_fill_curve,
    make_allocation,
    nested_params_for,
)
from .scene import LinkBudget, Target
from .analysis import (
    SingularFimError,
    SweepConfig,
    TwoTargetDemoConfig,
    ambiguity_function,
    crlb_report,
    monte_carlo_sweep,
    two_target_demo,
)

EXPERIMENTS = (
    "crlb_table",
    "hole_probability",
    "ambiguity",
    "two_target_demo",
    "rmse_pslr_sweep",
)

OUTDIR_ENV = "SPARSE_ISAC_OUTDIR"

PROFILES = {
    "desk": {
        "ofdm": {
            "n_subcarriers": 256,
            "n_symbols": 32,
            "subcarrier_spacing_hz": 120e3,
            "carrier_freq_hz": 24e9,
            "cp_len_s": 0.0,
        },
        "n_active": 64,
    },
    "paper": {
        "ofdm": {
            "n_subcarriers": 1000,
            "n_symbols": 720,
            "subcarrier_spacing_hz": 120e3,
            "carrier_freq_hz": 24e9,
            "cp_len_s": 0.0,
        },
        "n_active": 200,
    },
}


class ConfigError(Exception):
    """Invalid config; message lists every offending field."""


# ---------------------------------------------------------------------------
# validation


def _require(cfg: dict, key: str, kind, errors: list, prefix=""):
    path = f"{prefix}{key}"
    if key not in cfg:
        errors.append(f"{path}: missing required field")
        return None
    val = cfg[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, kind) or isinstance(val, bool):
        errors.append(f"{path}: expected {getattr(kind, '__name__', kind)}, got {type(val).__name__}")
        return None
    return val


def _check_number(cfg: dict, key: str, errors: list, positive=False, integer=False):
    """Optional numeric field; appends an error naming the field if bad."""
    if key not in cfg:
        return
    val = cfg[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        errors.append(f"{key}: expected a number, got {type(val).__name__}")
        return
    if integer and not isinstance(val, int):
        errors.append(f"{key}: expected an integer")
        return
    if positive and val <= 0:
        errors.append(f"{key}: must be positive")


def _validate_ofdm(cfg: dict, errors: list) -> OfdmParams | None:
    ofdm = _require(cfg, "ofdm", dict, errors)
    if ofdm is None:
        return None
    n = _require(ofdm, "n_subcarriers", int, errors, "ofdm.")
    m = _require(ofdm, "n_symbols", int, errors, "ofdm.")
    df = _require(ofdm, "subcarrier_spacing_hz", float, errors, "ofdm.")
    fc = _require(ofdm, "carrier_freq_hz", float, errors, "ofdm.")
    cp = ofdm.get("cp_len_s", 0.0)
    if errors:
        return None
    try:
        return OfdmParams(
            n_subcarriers=n,
            n_symbols=m,
            subcarrier_spacing_hz=df,
            carrier_freq_hz=fc,
            cp_len_s=float(cp),
        )
    except ValueError as exc:
        errors.append(f"ofdm: {exc}")
        return None


def _validate_allocation(cfg: dict, params: OfdmParams | None, errors: list):
    spec = cfg.get("allocation", {"pattern": "random"})
    if not isinstance(spec, dict):
        errors.append("allocation: expected object")
        return None
    pattern = spec.get("pattern", "random")
    if pattern not in ("full", "comb", "random", "coprime", "nested", "custom"):
        errors.append(f"allocation.pattern: unknown pattern {pattern!r}")
        return None
    if params is None:
        return spec
    n = params.n_subcarriers
    if pattern == "random":
        n_active = spec.get("n_active", cfg.get("n_active"))
        if n_active is None:
            errors.append("allocation.n_active: missing for random pattern")
        elif not isinstance(n_active, int) or not 2 <= n_active <= n:
            errors.append(f"allocation.n_active: must be an int in [2, {n}]")
    elif pattern == "comb":
        stride = spec.get("stride")
        if not isinstance(stride, int) or stride < 1:
            errors.append("allocation.stride: must be an int >= 1")
    elif pattern == "coprime":
        p, q = spec.get("p"), spec.get("q")
        if not isinstance(p, int) or not isinstance(q, int) or p < 1 or q < 1:
            errors.append("allocation.p/q: must be ints >= 1")
        elif math.gcd(p, q) != 1:
            errors.append(f"allocation.p/q: ({p}, {q}) are not co-prime")
        elif min(p, q) > n - 1:
            errors.append(f"allocation.p/q: strides exceed N-1 = {n - 1}")
    elif pattern == "nested":
        inner, outer = spec.get("inner"), spec.get("outer")
        if not isinstance(inner, int) or not isinstance(outer, int) or inner < 1 or outer < 1:
            errors.append("allocation.inner/outer: must be ints >= 1")
        elif (inner + 1) * outer - 1 > n - 1:
            errors.append(
                f"allocation.inner/outer: nested pattern reaches index "
                f"{(inner + 1) * outer - 1} > N-1 = {n - 1}"
            )
    elif pattern == "custom":
        if "indices" not in spec:
            errors.append("allocation.indices: missing for custom pattern")
    return spec


def _validate_targets(scene: dict, errors: list) -> list[Target]:
    targets = []
    raw = scene.get("targets")
    if not isinstance(raw, list) or not raw:
        errors.append("scene.targets: expected a non-empty list")
        return targets
    for i, t in enumerate(raw):
        prefix = f"scene.targets[{i}]."
        if not isinstance(t, dict):
            errors.append(f"scene.targets[{i}]: expected object")
            continue
        d = _require(t, "distance_m", float, errors, prefix)
        v = t.get("velocity_mps", 0.0)
        kwargs = {}
        if "rcs_m2" in t:
            kwargs["rcs_m2"] = t["rcs_m2"]
        if "amplitude" in t:
            kwargs["amplitude"] = t["amplitude"]
        if t.get("phase_rad") is not None:
            kwargs["phase_rad"] = t["phase_rad"]
        if d is None:
            continue
        try:
            targets.append(Target(distance_m=d, velocity_mps=float(v), **kwargs))
        except (ValueError, TypeError) as exc:
            errors.append(f"scene.targets[{i}]: {exc}")
    return targets


def _validate_link(scene: dict, cfg: dict, errors: list) -> LinkBudget | None:
    raw = scene.get("link")
    if raw is None:
        return None
    if not isinstance(raw, dict):
        errors.append("scene.link: expected object")
        return None
    ok = True
    for key in ("tx_power_w", "tx_gain", "rx_gain"):
        v = raw.get(key)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            errors.append(f"scene.link.{key}: must be a positive number")
            ok = False
    if not ok:
        return None
    fc = cfg.get("ofdm", {}).get("carrier_freq_hz", 0)
    if not isinstance(fc, (int, float)) or fc <= 0:
        return None
    return LinkBudget.for_carrier(
        fc, tx_power_w=raw["tx_power_w"], tx_gain=raw["tx_gain"], rx_gain=raw["rx_gain"]
    )


def _validate_scene(
    cfg: dict, errors: list
) -> tuple[list[Target], LinkBudget | None]:
    scene = cfg.get("scene")
    if scene is None:
        return [], None
    if not isinstance(scene, dict):
        errors.append("scene: expected object")
        return [], None
    targets = _validate_targets(scene, errors)
    link = _validate_link(scene, cfg, errors)
    snr = scene.get("snr_db")
    nv = scene.get("noise_variance_w")
    if snr is not None and nv is not None:
        errors.append("scene: snr_db and noise_variance_w are mutually exclusive")
    if link is None and any(t.rcs_m2 is not None for t in targets):
        errors.append("scene.link: required when targets are specified by RCS")
    return targets, link


def validate_config(cfg: dict) -> list[str]:
    """Full dry-run check; returns a list of error strings (empty if valid)."""
    errors: list[str] = []
    if not isinstance(cfg, dict):
        return ["config root must be a JSON object"]
    exp = cfg.get("experiment")
    if exp not in EXPERIMENTS:
        errors.append(
            f"experiment: must be one of {', '.join(EXPERIMENTS)}; got {exp!r}"
        )
        return errors
    params = _validate_ofdm(cfg, errors)
    seed = cfg.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        errors.append("seed: must be a non-negative integer")

    if exp == "crlb_table":
        _validate_allocation(cfg, params, errors)
        _check_number(cfg, "amplitude", errors, positive=True)
        _check_number(cfg, "noise_variance_w", errors, positive=True)
        n_active = cfg.get("n_active")
        if n_active is not None and params is not None:
            if not isinstance(n_active, int) or not 2 <= n_active <= params.n_subcarriers:
                errors.append(f"n_active: must be an int in [2, {params.n_subcarriers}]")
    elif exp == "hole_probability":
        axis = cfg.get("n_active_axis")
        if not isinstance(axis, list) or not axis:
            errors.append("n_active_axis: expected a non-empty list of ints")
        elif params is not None:
            for v in axis:
                if not isinstance(v, int) or not 2 <= v <= params.n_subcarriers:
                    errors.append(
                        f"n_active_axis: entries must be ints in [2, {params.n_subcarriers}]"
                    )
                    break
        trials = cfg.get("trials", 1000)
        if not isinstance(trials, int) or trials < 1:
            errors.append("trials: must be a positive integer")
    elif exp == "ambiguity":
        _validate_allocation(cfg, params, errors)
        for key in ("delay_points", "doppler_points"):
            v = cfg.get(key, 101)
            if not isinstance(v, int) or v < 3:
                errors.append(f"{key}: must be an int >= 3")
        _check_number(cfg, "delay_span_bins", errors, positive=True)
        _check_number(cfg, "doppler_span_bins", errors, positive=True)
    elif exp == "two_target_demo":
        if params is not None and "n_active" in cfg:
            if not isinstance(cfg["n_active"], int) or not 2 <= cfg["n_active"] <= params.n_subcarriers:
                errors.append(f"n_active: must be an int in [2, {params.n_subcarriers}]")
        for key in ("distances_m", "velocities_mps", "amplitudes"):
            v = cfg.get(key)
            if v is not None and (not isinstance(v, list) or len(v) != 2):
                errors.append(f"{key}: expected a list of exactly 2 numbers")
        _check_number(cfg, "snr_db", errors)
        _check_number(cfg, "oversample", errors, positive=True, integer=True)
        runs = cfg.get("runs", 100)
        if not isinstance(runs, int) or runs < 1:
            errors.append("runs: must be a positive integer")
    elif exp == "rmse_pslr_sweep":
        _validate_scene(cfg, errors)
        methods = cfg.get("methods")
        if methods is not None:
            from .analysis import SWEEP_METHODS

            if not isinstance(methods, list) or not methods:
                errors.append("methods: expected a non-empty list")
            else:
                for m in methods:
                    if m not in SWEEP_METHODS:
                        errors.append(f"methods: unknown method {m!r}")
        axis = cfg.get("snr_db_axis")
        if not isinstance(axis, list) or not axis:
            errors.append("snr_db_axis: expected a non-empty list of numbers")
        trials = cfg.get("trials", 500)
        if not isinstance(trials, int) or trials < 1:
            errors.append("trials: must be a positive integer")
        n_active = cfg.get("n_active")
        if params is not None:
            if not isinstance(n_active, int) or not 2 <= n_active <= params.n_subcarriers:
                errors.append(f"n_active: must be an int in [2, {params.n_subcarriers}]")
    return errors


# ---------------------------------------------------------------------------
# experiment runners (configs are pre-validated)


def _build_allocation(cfg: dict, params: OfdmParams, seed) -> ResourceAllocation:
    spec = dict(cfg.get("allocation", {"pattern": "random"}))
    pattern = spec.pop("pattern", "random")
    if pattern == "random" and "n_active" not in spec:
        spec["n_active"] = cfg.get("n_active", PROFILES["desk"]["n_active"])
    return make_allocation(params, pattern, seed=seed, **spec)


def _write_csv(path: Path, header: list[str], rows, comment: str | None = None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _exp_crlb_table(cfg: dict, params: OfdmParams, out: Path, seed: int) -> list[str]:
    n_active = cfg.get("n_active", PROFILES["desk"]["n_active"])
    amplitude = float(cfg.get("amplitude", 1.0))
    noise_var = float(cfg.get("noise_variance_w", 1.0))
    inner, outer = nested_params_for(n_active, params.n_subcarriers)
    allocs = {
        "full": make_allocation(params, "full"),
        "random": make_allocation(params, "random", n_active=n_active, seed=seed),
        "nested": make_allocation(params, "nested", inner=inner, outer=outer),
        "clustered": ResourceAllocation.constant(
            np.arange(n_active), params.n_symbols, params.n_subcarriers, "clustered"
        ),
    }
    rows = []
    for label, alloc in allocs.items():
        rep = crlb_report(alloc, params, amplitude, noise_var)
        idx = alloc.indices
        rows.append(
            [
                label,
                rep.n_active,
                int(idx.max() - idx.min()),
                _fmt(rep.crlb_delay_s2),
                _fmt(rep.crlb_range_m2),
                _fmt(math.sqrt(rep.crlb_range_m2)),
            ]
        )
    _write_csv(
        out / "crlb_table.csv",
        ["allocation", "n_active", "extent", "crlb_delay_s2", "crlb_range_m2", "range_rmse_floor_m"],
        rows,
    )
    report = crlb_report(allocs["random"], params, amplitude, noise_var)
    (out / "crlb_random.json").write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return ["crlb_table.csv", "crlb_random.json"]


def _exp_hole_probability(cfg: dict, params: OfdmParams, out: Path, seed: int) -> list[str]:
    axis = cfg["n_active_axis"]
    trials = cfg.get("trials", 1000)
    seeds = np.random.SeedSequence(seed).spawn(len(axis))
    long_rows = []
    summary_rows = []
    for n_active, child in zip(axis, seeds):
        curve = hole_fill_curve(params.n_subcarriers, n_active, n_trials=trials, seed=child)
        for lag, p, hw in zip(curve.lags, curve.fill_probability, curve.fill_halfwidth):
            long_rows.append([n_active, int(lag), _fmt(float(p)), _fmt(float(hw))])
        summary_rows.append(
            [
                n_active,
                _fmt(curve.min_fill_probability),
                _fmt(curve.all_filled_probability),
                _fmt(curve.all_filled_halfwidth),
                trials,
            ]
        )
    _write_csv(
        out / "hole_fill.csv",
        ["n_active", "lag", "fill_probability", "ci_halfwidth"],
        long_rows,
    )
    _write_csv(
        out / "hole_fill_summary.csv",
        ["n_active", "min_fill_probability", "all_filled_probability", "all_filled_ci", "trials"],
        summary_rows,
    )
    return ["hole_fill.csv", "hole_fill_summary.csv"]


def _exp_ambiguity(cfg: dict, params: OfdmParams, out: Path, seed: int) -> list[str]:
    alloc = _build_allocation(cfg, params, seed)
    delay_points = cfg.get("delay_points", 401)
    doppler_points = cfg.get("doppler_points", 101)
    delay_span_bins = float(cfg.get("delay_span_bins", 16.0))
    doppler_span_bins = float(cfg.get("doppler_span_bins", 4.0))
    delay_bin = 1.0 / (params.n_subcarriers * params.subcarrier_spacing_hz)
    doppler_bin = 1.0 / (params.n_symbols * params.symbol_dur_s)
    delays = np.linspace(-delay_span_bins, delay_span_bins, delay_points) * delay_bin
    dopplers = np.linspace(-doppler_span_bins, doppler_span_bins, doppler_points) * doppler_bin
    surf = ambiguity_function(alloc, params, delays, dopplers)
    rows = []
    for i, fd in enumerate(dopplers):
        for j, tau in enumerate(delays):
            rows.append(
                [_fmt(float(tau)), _fmt(float(fd)), _fmt(float(surf.direct[i, j])), _fmt(float(surf.virtual[i, j]))]
            )
    _write_csv(
        out / "ambiguity.csv",
        ["delay_s", "doppler_hz", "direct_magnitude", "virtual_magnitude"],
        rows,
    )
    cut_rows = [
        [_fmt(float(tau)), _fmt(float(d)), _fmt(float(v))]
        for tau, d, v in zip(delays, surf.direct_delay_cut(), surf.virtual_delay_cut())
    ]
    _write_csv(
        out / "ambiguity_delay_cut.csv",
        ["delay_s", "direct_magnitude", "virtual_magnitude"],
        cut_rows,
    )
    return ["ambiguity.csv", "ambiguity_delay_cut.csv"]


def _exp_two_target_demo(cfg: dict, params: OfdmParams, out: Path, seed: int) -> list[str]:
    demo_cfg = TwoTargetDemoConfig(
        params=params,
        n_active=cfg.get("n_active", 64),
        snr_db=float(cfg.get("snr_db", -10.0)),
        n_runs=cfg.get("runs", 100),
        master_seed=seed,
        oversample=cfg.get("oversample", 4),
        distances_m=tuple(cfg.get("distances_m", (200.0, 330.0))),
        velocities_mps=tuple(cfg.get("velocities_mps", (12.0, -9.0))),
        amplitudes=tuple(cfg.get("amplitudes", (1.0, 0.8))),
    )
    result = two_target_demo(demo_cfg)
    note = "snr_definition=per_active_re"
    result.example_direct.to_csv(out / "demo_direct_periodogram.csv", comment=note)
    result.example_virtual.to_csv(out / "demo_virtual_periodogram.csv", comment=note)
    result.to_csv(out / "demo_runs.csv")
    _write_csv(
        out / "demo_summary.csv",
        ["method", "both_detected_rate", "runs"],
        [
            ["direct_sparse", _fmt(result.direct_success_rate), demo_cfg.n_runs],
            ["autocorrelation", _fmt(result.virtual_success_rate), demo_cfg.n_runs],
        ],
        comment="snr_definition=per_active_re",
    )
    return [
        "demo_direct_periodogram.csv",
        "demo_virtual_periodogram.csv",
        "demo_runs.csv",
        "demo_summary.csv",
    ]


def _exp_rmse_pslr_sweep(cfg: dict, params: OfdmParams, out: Path, seed: int, threads: int) -> list[str]:
    targets, link = _validate_scene(cfg, [])
    if not targets:
        targets = [Target(distance_m=200.0, amplitude=1.0)]
    sweep_cfg = SweepConfig(
        params=params,
        n_active=cfg["n_active"],
        snr_db_axis=tuple(float(s) for s in cfg["snr_db_axis"]),
        methods=tuple(cfg.get("methods", ("full_bandwidth", "equivalent_bandwidth", "direct_sparse", "autocorrelation"))),
        targets=tuple(targets),
        link=link,
        n_trials=cfg.get("trials", 500),
        oversample=cfg.get("oversample", 4),
        master_seed=seed,
        miss_threshold_bins=float(cfg.get("miss_threshold_bins", 10.0)),
    )
    result = monte_carlo_sweep(sweep_cfg, threads=threads)
    result.to_csv(out / "sweep.csv")
    return ["sweep.csv"]


def run_experiment(cfg: dict, out: Path, threads: int = 1) -> list[str]:
    """Dispatch a validated config; returns the artifact file names."""
    params = _validate_ofdm(cfg, [])
    seed = int(cfg.get("seed", 0))
    exp = cfg["experiment"]
    if exp == "crlb_table":
        return _exp_crlb_table(cfg, params, out, seed)
    if exp == "hole_probability":
        return _exp_hole_probability(cfg, params, out, seed)
    if exp == "ambiguity":
        return _exp_ambiguity(cfg, params, out, seed)
    if exp == "two_target_demo":
        return _exp_two_target_demo(cfg, params, out, seed)
    if exp == "rmse_pslr_sweep":
        return _exp_rmse_pslr_sweep(cfg, params, out, seed, threads)
    raise ConfigError(f"experiment: unknown kind {exp!r}")


PLOT_SCRIPT = '''#!/usr/bin/env python3
"""Render the CSV artifacts written by sparse-isac (matplotlib required)."""
import sys
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(".")


def read_csv(path):
    import csv

    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, data = rows[0], rows[1:]
    return header, data


for name in sorted(out.glob("*periodogram*.csv")):
    header, data = read_csv(name)
    axis = np.array([float(r[0]) for r in data])
    mag = np.array([float(r[1]) for r in data])
    plt.figure()
    plt.plot(axis * 299792458.0 / 2.0, 20 * np.log10(np.maximum(mag, 1e-12) / mag.max()))
    plt.xlabel("range [m]")
    plt.ylabel("magnitude [dB]")
    plt.title(name.name)
    plt.grid(True, alpha=0.3)

sweep = out / "sweep.csv"
if sweep.exists():
    header, data = read_csv(sweep)
    methods = sorted({r[1] for r in data})
    plt.figure()
    for m in methods:
        pts = [(float(r[0]), float(r[2])) for r in data if r[1] == m]
        pts.sort()
        plt.semilogy([p[0] for p in pts], [p[1] for p in pts], marker="o", label=m)
    plt.xlabel("per-RE SNR [dB]")
    plt.ylabel("range RMSE [m]")
    plt.legend()
    plt.grid(True, alpha=0.3)

plt.show()
'''


# ---------------------------------------------------------------------------
# command-line front end


def _load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if (
        isinstance(cfg, dict)
        and isinstance(cfg.get("config"), dict)
        and "experiment" in cfg.get("config", {})
    ):
        cfg = cfg["config"]  # accept a manifest.json directly
    return cfg


def _out_dir(args, cfg: dict | None = None) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUTDIR_ENV)
    if env:
        return Path(env)
    if cfg and cfg.get("output_dir"):
        return Path(cfg["output_dir"])
    return Path("out")


def _finalize(cfg: dict, out: Path, outputs: list[str]) -> None:
    manifest = {
        "version": __version__,
        "experiment": cfg["experiment"],
        "snr_definition": "per_active_re",
        "config": cfg,
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    errors = validate_config(cfg)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    try:
        outputs = run_experiment(cfg, out, threads=_threads(args))
    except SingularFimError as exc:
        print(f"numeric failure in {cfg['experiment']}: {exc}", file=sys.stderr)
        return 3
    _finalize(cfg, out, outputs)
    for name in outputs:
        print(out / name)
    return 0


def _cmd_validate(args) -> int:
    try:
        cfg = _load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    errors = validate_config(cfg)
    for e in errors:
        print(f"config error: {e}", file=sys.stderr)
    return 2 if errors else 0


def _profile_config(args, experiment: str) -> dict:
    profile = PROFILES[args.profile]
    cfg = {
        "experiment": experiment,
        "seed": args.seed if args.seed is not None else 0,
        "ofdm": dict(profile["ofdm"]),
        "n_active": profile["n_active"],
    }
    if experiment == "two_target_demo":
        cfg["ofdm"]["n_symbols"] = max(cfg["ofdm"]["n_symbols"], 128)
        cfg["snr_db"] = -10.0
        cfg["runs"] = 100
    elif experiment == "rmse_pslr_sweep":
        cfg["snr_db_axis"] = [-10.0, -5.0, 0.0, 5.0, 10.0, 15.0]
        cfg["trials"] = 200
        cfg["methods"] = [
            "full_bandwidth",
            "equivalent_bandwidth",
            "direct_sparse",
            "autocorrelation",
        ]
        cfg["scene"] = {
            "targets": [{"distance_m": 200.0, "velocity_mps": 0.0, "amplitude": 1.0}]
        }
    return cfg


def _cmd_profile_experiment(args, experiment: str) -> int:
    if args.config:
        cfg = _load_config(args.config)
    else:
        cfg = _profile_config(args, experiment)
    cfg["experiment"] = experiment
    errors = validate_config(cfg)
    if errors:
        for e in errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    try:
        outputs = run_experiment(cfg, out, threads=_threads(args))
    except SingularFimError as exc:
        print(f"numeric failure in {experiment}: {exc}", file=sys.stderr)
        return 3
    _finalize(cfg, out, outputs)
    for name in outputs:
        print(out / name)
    return 0


def _cmd_plot_script(args) -> int:
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "plot_results.py"
    path.write_text(PLOT_SCRIPT)
    print(path)
    return 0


def _threads(args) -> int:
    k = getattr(args, "threads", 1) or 0
    if k == 0:
        return os.cpu_count() or 1
    return k


def _add_common(p: argparse.ArgumentParser, config_required: bool):
    p.add_argument("--config", required=config_required, help="JSON config path")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", default=None, help=f"output directory (or ${OUTDIR_ENV})")
    p.add_argument(
        "--profile", choices=sorted(PROFILES), default="desk", help="parameter profile"
    )
    p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparse-isac",
        description="Seeded sensing experiments on sparse OFDM resource allocations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment named in a config file")
    _add_common(p_run, config_required=True)

    p_val = sub.add_parser("validate", help="check a config without running anything")
    p_val.add_argument("--config", required=True)

    for name, helptext in (
        ("crlb", "CRLB table across allocation families"),
        ("sweep", "RMSE/PSLR vs SNR Monte-Carlo sweep"),
        ("demo", "two-target sparse detection demo"),
    ):
        p_sub = sub.add_parser(name, help=helptext)
        _add_common(p_sub, config_required=False)

    p_plot = sub.add_parser("plot-script", help="emit a matplotlib script for the CSVs")
    p_plot.add_argument("--out", default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "crlb":
            return _cmd_profile_experiment(args, "crlb_table")
        if args.command == "sweep":
            return _cmd_profile_experiment(args, "rmse_pslr_sweep")
        if args.command == "demo":
            return _cmd_profile_experiment(args, "two_target_demo")
        if args.command == "plot-script":
            return _cmd_plot_script(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
