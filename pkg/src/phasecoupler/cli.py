"""Command-line front end: load a JSON run config, run one experiment, write CSV + JSON.

Config format
-------------
A single JSON object. Every block and every key is optional; anything left
out takes the printed device values. Units are part of the key names::

    {
      "device": {"i_c0_uA": 1.58, "m_pH": 190, "l_offset_pH": 19},
      "simulation": {"dt_ns": 0.05, "rwa": true, "shots": null, "seed": 0},
      "reset": {"i_cb_minus_uA": -1.185, "i_cb_plus_uA": 1.185, "n_cycles": 30, "q": 0.746},
      "chevron": {"omega_c_MHz": 40, "n_delta": 61}
    }

Unknown blocks or keys are rejected. ``t1a_ns``/``t1b_ns`` may be ``null``
to switch relaxation off.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import device, dynamics, experiments, fitting, hysteresis, sequences
from .experiments import format_number, write_sidecar

COMMANDS = ("coupler-curve", "spectroscopy", "crosstalk", "chevron", "min-coupling",
            "reset-sim", "branch-map", "dump-sequence")


class ParseError(ValueError):
    """The config file is not valid JSON (message carries line and column)."""


class ValidationError(ValueError):
    """A config value is unknown, of the wrong type, or out of range."""


# (default, kind) per key; kinds are checked by _check_value
_P = device.DeviceParams()
SCHEMA: dict[str, dict[str, tuple]] = {
    "device": {
        "i_c0_uA": (round(_P.i_c0 * 1e6, 9), "pos"),
        "m_pH": (round(_P.m * 1e12, 9), "pos"),
        "l_m_pH": (round(_P.l_m * 1e12, 9), "pos"),
        "l_s_pH": (round(_P.l_s * 1e12, 9), "pos"),
        "l_pH": (round(_P.l * 1e12, 9), "pos"),
        "l_z_nH": (round(_P.l_z * 1e9, 9), "pos"),
        "c_pF": (round(_P.c * 1e12, 9), "pos"),
        "f10a_GHz": (round(_P.f10_a / 1e9, 9), "pos"),
        "f10b_GHz": (round(_P.f10_b / 1e9, 9), "pos"),
        "t1a_ns": (round(_P.t1_a * 1e9, 9), "pos_or_null"),
        "t1b_ns": (round(_P.t1_b * 1e9, 9), "pos_or_null"),
        "n_a": (round(_P.n_a, 9), "ge2"),
        "n_b": (round(_P.n_b, 9), "ge2"),
        "omega_c0_GHz": (round(_P.omega_c0 / (2 * math.pi) / 1e9, 9), "pos"),
        "bias_shift_coeff_MHz_per_uA": (round(_P.bias_shift_coeff * 1e-6 / 1e6, 9), "real"),
        "l_offset_pH": (round(_P.l_offset * 1e12, 9), "real"),
    },
    "simulation": {
        "dt_ns": (round(dynamics.DEFAULT_DT * 1e9, 9), "pos"),
        "rwa": (True, "bool"),
        "zz": (True, "bool"),
        "shots": (None, "count_or_null"),
        "seed": (0, "seed"),
    },
    "reset": {
        "i_cb_minus_uA": (round(-0.75 * _P.i_c0 * 1e6, 9), "real"),
        "i_cb_plus_uA": (round(0.75 * _P.i_c0 * 1e6, 9), "real"),
        "n_cycles": (30, "count"),
        "q": (0.746, "unit"),
        "initial": (None, "dist_or_null"),
    },
    "coupler_curve": {
        "bias_min_uA": (0.0, "real"),
        "bias_max_uA": (round(0.9 * _P.i_c0 * 1e6, 9), "real"),
        "n_bias": (41, "count"),
        "n_points": (121, "count"),
        "noise_shots": (experiments.DEFAULT_SHOTS_NOISE, "count"),
        "f_threshold": (experiments.F_THRESHOLD, "pos"),
    },
    "spectroscopy": {
        "omega_c_MHz": (17.0, "nonneg_or_null"),
        "i_cb_uA": (None, "real_or_null"),
        "delta_min_MHz": (-60.0, "real"),
        "delta_max_MHz": (60.0, "real"),
        "n_delta": (41, "count"),
        "probe_min_MHz": (-100.0, "real"),
        "probe_max_MHz": (60.0, "real"),
        "n_probe": (321, "count"),
        "probe_amp_MHz": (round(sequences.SPECTROSCOPY_AMP / (2 * math.pi) / 1e6, 9), "pos"),
    },
    "crosstalk": {
        "omega_c_MHz": ([0.0, 5.0, 17.0], "nonneg_list"),
        "t_max_ns": (200.0, "pos"),
        "n_t": (101, "count"),
        "rabi_MHz": (round(sequences.CROSSTALK_RABI / (2 * math.pi) / 1e6, 9), "pos"),
    },
    "chevron": {
        "omega_c_MHz": (40.0, "nonneg_or_null"),
        "i_cb_uA": (None, "real_or_null"),
        "delta_min_MHz": (-100.0, "real"),
        "delta_max_MHz": (100.0, "real"),
        "n_delta": (61, "count"),
        "t_max_ns": (150.0, "pos"),
        "n_t": (121, "count"),
    },
    "min_coupling": {
        "omega_c_MHz": ([0.1, 0.3, 0.5], "nonneg_list"),
        "t1_ns": (350.0, "pos"),
        "t_max_ns": (1000.0, "pos"),
        "n_t": (101, "count"),
        "noise_shots": (experiments.DEFAULT_SHOTS_NOISE, "count"),
        "f_threshold": (experiments.F_THRESHOLD, "pos"),
    },
    "branch_map": {
        "i_min_uA": (round(-0.5 * _P.i_c0 * 1e6, 9), "real"),
        "i_max_uA": (round(0.5 * _P.i_c0 * 1e6, 9), "real"),
        "n": (201, "count"),
    },
    "dump_sequence": {
        "kind": ("swap", ("swap", "spectroscopy", "crosstalk")),
        "omega_c_MHz": (40.0, "nonneg_or_null"),
        "i_cb_uA": (None, "real_or_null"),
        "delta_MHz": (0.0, "real"),
        "t_swap_ns": (12.5, "nonneg"),
        "probe_MHz": (0.0, "real"),
        "driven": ("a", ("a", "b")),
        "t_rabi_ns": (25.0, "nonneg"),
    },
}


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _check_value(block: str, key: str, v, kind) -> None:
    where = f"{block}.{key}"

    def fail(what):
        raise ValidationError(f"{where}: {what}, got {v!r}")

    if isinstance(kind, tuple):
        if v not in kind:
            fail(f"must be one of {list(kind)}")
        return
    if kind == "bool":
        if not isinstance(v, bool):
            fail("must be true or false")
        return
    if kind.endswith("_or_null"):
        if v is None:
            return
        kind = kind[: -len("_or_null")]
    if kind == "dist":
        if not isinstance(v, dict) or not v:
            fail("must be a non-empty object mapping branch id to probability")
        for k, m in v.items():
            try:
                int(k)
            except ValueError:
                fail(f"branch id {k!r} is not an integer")
            if not _is_number(m) or m < 0:
                fail("probabilities must be non-negative numbers")
        return
    if kind == "nonneg_list":
        if not isinstance(v, list) or not v or not all(_is_number(x) and x >= 0 for x in v):
            fail("must be a non-empty list of non-negative numbers")
        return
    if kind in ("count", "seed"):
        if not isinstance(v, int) or isinstance(v, bool) or v < (0 if kind == "seed" else 1):
            fail("must be a positive integer" if kind == "count" else "must be a non-negative integer")
        return
    if not _is_number(v):
        fail("must be a finite number")
    if kind == "pos" and not v > 0:
        fail("must be > 0")
    if kind == "nonneg" and not v >= 0:
        fail("must be >= 0")
    if kind == "ge2" and not v >= 2:
        fail("must be >= 2")
    if kind == "unit" and not 0 <= v < 1:
        fail("must lie in [0, 1)")


def resolve_config(raw: dict) -> dict:
    """Validate ``raw`` against the schema and fill in every default."""
    if not isinstance(raw, dict):
        raise ValidationError("top level of the config must be an object")
    for block in raw:
        if block not in SCHEMA:
            raise ValidationError(f"unknown config block {block!r}; expected one of {sorted(SCHEMA)}")
    out = {}
    for block, keys in SCHEMA.items():
        given = raw.get(block, {})
        if not isinstance(given, dict):
            raise ValidationError(f"{block}: must be an object")
        for key in given:
            if key not in keys:
                raise ValidationError(f"unknown key {key!r} in block {block!r}")
        resolved = {}
        for key, (default, kind) in keys.items():
            v = given.get(key, default)
            _check_value(block, key, v, kind)
            resolved[key] = v
        out[block] = resolved
    rs = out["reset"]
    if not rs["i_cb_minus_uA"] < rs["i_cb_plus_uA"]:
        raise ValidationError("reset.i_cb_minus_uA must be below reset.i_cb_plus_uA")
    try:
        device_params(out)
    except ValueError as exc:
        raise ValidationError(f"device: {exc}") from exc
    return out


def _read_raw(path) -> dict:
    text = Path(path).read_text()
    if not text.strip():
        return {}
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        lines = text.splitlines()
        line = lines[exc.lineno - 1] if 0 < exc.lineno <= len(lines) else ""
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}\n  {line}") from exc
    if not isinstance(raw, dict):
        raise ValidationError("top level of the config must be an object")
    return raw


def load_config(path) -> dict:
    """Read and validate a JSON config; an empty file gives all defaults."""
    return resolve_config(_read_raw(path))


def device_params(cfg: dict) -> device.DeviceParams:
    d = cfg["device"]
    t1 = lambda v: math.inf if v is None else v * 1e-9  # noqa: E731
    return device.DeviceParams(
        c=d["c_pF"] * 1e-12, l=d["l_pH"] * 1e-12, l_s=d["l_s_pH"] * 1e-12,
        l_m=d["l_m_pH"] * 1e-12, m=d["m_pH"] * 1e-12, l_z=d["l_z_nH"] * 1e-9,
        i_c0=d["i_c0_uA"] * 1e-6, f10_a=d["f10a_GHz"] * 1e9, f10_b=d["f10b_GHz"] * 1e9,
        n_a=d["n_a"], n_b=d["n_b"], t1_a=t1(d["t1a_ns"]), t1_b=t1(d["t1b_ns"]),
        omega_c0=2 * math.pi * d["omega_c0_GHz"] * 1e9,
        bias_shift_coeff=d["bias_shift_coeff_MHz_per_uA"] * 1e6 / 1e-6,
        l_offset=d["l_offset_pH"] * 1e-12,
    )


def simulation(cfg: dict, params: device.DeviceParams) -> experiments.Simulation:
    s = cfg["simulation"]
    return experiments.Simulation(params, dt=s["dt_ns"] * 1e-9, rwa=s["rwa"], include_zz=s["zz"],
                                  shots=s["shots"], seed=s["seed"])


def _bias(block: dict, params: device.DeviceParams) -> float:
    """Coupler bias from an explicit ``i_cb_uA`` or a target ``omega_c_MHz``."""
    if block.get("i_cb_uA") is not None:
        return block["i_cb_uA"] * 1e-6
    target = block.get("omega_c_MHz")
    if not target:
        return device.off_bias(params)
    return device.bias_for_coupling(params, 2 * math.pi * target * 1e6)


def _write_rows(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_number(v) for v in row])


# ------------------------------------------------------------ subcommands


def cmd_coupler_curve(cfg, params, sim, out: Path) -> dict:
    c = cfg["coupler_curve"]
    grid = np.linspace(c["bias_min_uA"], c["bias_max_uA"], c["n_bias"]) * 1e-6
    rows = experiments.run_coupling_curve(grid, params, sim, n_points=c["n_points"],
                                          noise_shots=c["noise_shots"], f_threshold=c["f_threshold"])
    _write_rows(out / "coupler-curve.csv", ["bias_uA", "omega_c_theory_MHz", "omega_c_fitted_MHz"],
                [[r["bias"] * 1e6, r["omega_c_theory_hz"] / 1e6, r["omega_c_fitted_hz"] / 1e6]
                 for r in rows])
    return {"rows": rows}


def cmd_spectroscopy(cfg, params, sim, out: Path) -> dict:
    c = cfg["spectroscopy"]
    res = experiments.run_spectroscopy(
        _bias(c, params),
        np.linspace(c["delta_min_MHz"], c["delta_max_MHz"], c["n_delta"]) * 1e6,
        np.linspace(c["probe_min_MHz"], c["probe_max_MHz"], c["n_probe"]) * 1e6,
        params, sim, probe_amp=2 * math.pi * c["probe_amp_MHz"] * 1e6)
    res.write_csv(out / "spectroscopy.csv")
    return {"fits": res.fits, "fingerprint": res.fingerprint}


def cmd_crosstalk(cfg, params, sim, out: Path) -> dict:
    c = cfg["crosstalk"]
    biases = [_bias({"omega_c_MHz": w}, params) for w in c["omega_c_MHz"]]
    res = experiments.run_crosstalk_scan(biases, np.linspace(0, c["t_max_ns"] * 1e-9, c["n_t"]),
                                         params, sim, rabi_amp=2 * math.pi * c["rabi_MHz"] * 1e6)
    res.write_csv(out / "crosstalk.csv")
    return {"fits": res.fits, "fingerprint": res.fingerprint}


def cmd_chevron(cfg, params, sim, out: Path) -> dict:
    c = cfg["chevron"]
    res = experiments.run_swap_chevron(
        _bias(c, params), np.linspace(c["delta_min_MHz"], c["delta_max_MHz"], c["n_delta"]) * 1e6,
        np.linspace(0, c["t_max_ns"] * 1e-9, c["n_t"]), params, sim)
    res.write_csv(out / "chevron.csv")
    return {"fits": res.fits, "fingerprint": res.fingerprint}


def cmd_min_coupling(cfg, params, sim, out: Path) -> dict:
    c = cfg["min_coupling"]
    t = np.linspace(0, c["t_max_ns"] * 1e-9, c["n_t"])
    study = experiments.run_min_coupling_study(
        [w * 1e6 for w in c["omega_c_MHz"]], params, t_grid=t, t1=c["t1_ns"] * 1e-9,
        shots=c["noise_shots"], f_threshold=c["f_threshold"])
    header = ["t_s"] + [f"p01_{w:g}MHz" for w in c["omega_c_MHz"]]
    cols = [t] + [case["p01"] for case in study["cases"]]
    _write_rows(out / "min-coupling.csv", header, zip(*cols))
    summary = {k: v for k, v in study.items() if k != "cases"}
    summary["cases"] = [{k: v for k, v in case.items() if k not in ("p01", "p10")}
                        for case in study["cases"]]
    return summary


def _reset_config(cfg, params) -> hysteresis.ResetConfig:
    r = cfg["reset"]
    return hysteresis.ResetConfig(r["i_cb_minus_uA"] * 1e-6, r["i_cb_plus_uA"] * 1e-6,
                                  r["n_cycles"], r["q"])


def cmd_reset_sim(cfg, params, sim, out: Path) -> dict:
    rc = _reset_config(cfg, params)
    init = cfg["reset"]["initial"]
    if init is None:
        # every branch but the target, equally weighted, at zero bias
        others = [k for k in hysteresis.stable_branch_ids(0.0, params) if k != 0]
        if not others:
            raise hysteresis.NoStableBranch("no non-target branch is stable at zero bias")
        init = {k: 1.0 / len(others) for k in others}
    init = {int(k): float(v) for k, v in init.items()}
    res = hysteresis.simulate_reset(init, rc, params)
    _write_rows(out / "reset-sim.csv", ["cycle", "residual_error"],
                [[k + 1, v] for k, v in enumerate(res.residual_by_cycle)])
    return {"beta": hysteresis.beta(params), "initial": init, "distribution": res.distribution,
            "residual_error": res.residual_error}


def cmd_branch_map(cfg, params, sim, out: Path) -> dict:
    c = cfg["branch_map"]
    pts = hysteresis.branch_map(params, c["i_min_uA"] * 1e-6, c["i_max_uA"] * 1e-6, c["n"])
    rows = [[p.bias * 1e6, p.delta, p.flux / device.PHI0, "1" if p.stable else "0",
             "" if p.branch_id is None else str(p.branch_id)] for p in pts]
    _write_rows(out / "branch-map.csv", ["bias_uA", "delta_rad", "flux_phi0", "stable", "branch_id"], rows)
    ids = sorted({p.branch_id for p in pts if p.branch_id is not None})
    return {"beta": hysteresis.beta(params), "branch_ids": ids, "n_points": len(pts)}


def cmd_dump_sequence(cfg, params, sim, out: Path) -> dict:
    c = cfg["dump_sequence"]
    if c["kind"] == "swap":
        seq = sequences.build_swap_sequence(c["delta_MHz"] * 1e6, _bias(c, params),
                                            c["t_swap_ns"] * 1e-9, params,
                                            i_cb_off=device.off_bias(params))
    elif c["kind"] == "spectroscopy":
        seq = sequences.build_spectroscopy_sequence(c["delta_MHz"] * 1e6, c["probe_MHz"] * 1e6,
                                                    params, i_cb=_bias(c, params))
    else:
        seq = sequences.build_crosstalk_sequence(c["driven"], c["t_rabi_ns"] * 1e-9,
                                                 _bias(c, params), params)
    trace = sequences.sample(seq, sim.dt, params)
    header = ["t_s", "dt_s", "repeat", "detune_a_rad_s", "detune_b_rad_s", "rabi_a_rad_s",
              "phase_a_rad", "rabi_b_rad_s", "phase_b_rad", "omega_c_rad_s"]
    _write_rows(out / "dump-sequence.csv", header,
                [[trace.t[k], trace.dt[k], str(int(trace.repeat[k]))] + list(trace.values[k])
                 for k in range(len(trace))])
    return {"sequence": seq.to_dict(), "n_steps": trace.n_steps}


HANDLERS = {
    "coupler-curve": cmd_coupler_curve,
    "spectroscopy": cmd_spectroscopy,
    "crosstalk": cmd_crosstalk,
    "chevron": cmd_chevron,
    "min-coupling": cmd_min_coupling,
    "reset-sim": cmd_reset_sim,
    "branch-map": cmd_branch_map,
    "dump-sequence": cmd_dump_sequence,
}

HELP = {
    "coupler-curve": "swap frequency vs coupler bias, simulated and closed form",
    "spectroscopy": "avoided-crossing map vs detuning and probe frequency",
    "crosstalk": "Rabi-drive one qubit and record both, per coupler bias",
    "chevron": "swap probabilities vs detuning and interaction time",
    "min-coupling": "resolvability of weak couplings against T1 decay",
    "reset-sim": "branch occupation through repeated bias reset cycles",
    "branch-map": "junction phase on every branch across a bias sweep",
    "dump-sequence": "sampled control trace of one pulse sequence",
}

NUMERICAL_ERRORS = (device.BiasAtOrBeyondCritical, dynamics.StepTooCoarse, fitting.FitDiverged,
                    fitting.DegenerateFit, fitting.NoPeak, hysteresis.NoStableBranch,
                    hysteresis.TargetNotStable, FloatingPointError, np.linalg.LinAlgError)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run config (default: all defaults)")
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="overrides simulation.seed")
    common.add_argument("--shots", type=int, help="single shots per grid point (default: exact)")
    common.add_argument("--dt-ns", type=float, help="overrides simulation.dt_ns")
    parser = argparse.ArgumentParser(prog="phasecoupler",
                                     description="Simulate a current-biased tuneable coupler between two phase qubits.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=HELP[name])
    return parser


def _apply_overrides(raw: dict, args) -> dict:
    sim = dict(raw.get("simulation", {}))
    for flag, key in (("seed", "seed"), ("shots", "shots"), ("dt_ns", "dt_ns")):
        v = getattr(args, flag)
        if v is not None:
            sim[key] = v
    if sim:
        raw = {**raw, "simulation": sim}
    return raw


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = {} if args.config is None else _read_raw(args.config)
        cfg = resolve_config(_apply_overrides(raw, args))
        params = device_params(cfg)
        sim = simulation(cfg, params)
    except (ParseError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = args.out
    try:
        out.mkdir(parents=True, exist_ok=True)
        payload = HANDLERS[args.command](cfg, params, sim, out)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sidecar = {"command": args.command, "config": cfg, "config_hash": experiments.fingerprint(cfg),
               "seed": cfg["simulation"]["seed"], **payload}
    write_sidecar(out / f"{args.command}.json", sidecar)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
