"""TOML experiment configuration with the device defaults filled in.

Frequencies in the file are ordinary frequencies in GHz; times are in ns
except T1, which is in microseconds.
"""
from __future__ import annotations

import math
from pathlib import Path

import tomli
import tomli_w

from .gates import DEFAULT_ERROR, CzParams
from .linalg import ValidationError
from .model import DeviceParams, PulseProfile, ghz
from .noise import NoiseModel
from .protocol import READOUT_MODES, ExperimentConfig, Schedule

TOP_KEYS = {"seed", "n_cycles", "readout", "log_populations", "initial_data_state",
            "device", "gate", "noise", "schedule", "pulse"}
SECTION_KEYS = {
    "device": {"eps1_GHz", "eps2_GHz", "eta1_GHz", "eta2_GHz", "g_GHz"},
    "gate": {"xi", "theta", "chi", "zeta", "phi", "random_phases"},
    "noise": {"T1_us", "enabled"},
    "schedule": {"t_H_ns", "t_CZ_ns"},
    "pulse": {"times_ns", "eps1_GHz"},
}

DEFAULTS = {
    "seed": 0,
    "n_cycles": 40_000,
    "readout": "ternary",
    "log_populations": False,
    "initial_data_state": [0.0, 1.0, 0.0],
    "device": {"eps1_GHz": 5.5, "eps2_GHz": 6.0, "eta1_GHz": 0.2, "eta2_GHz": 0.2, "g_GHz": 0.025},
    "gate": {
        "xi": [0.0, 0.0, 0.0, 0.0],
        "chi": [DEFAULT_ERROR] * 4,
        "zeta": [DEFAULT_ERROR] * 4,
        "phi": [0.0, 0.0, 0.0, 0.0],
        "random_phases": True,
    },
    "noise": {"T1_us": 40.0, "enabled": True},
    "schedule": {"t_H_ns": 10.0, "t_CZ_ns": 25.0},
}


def _check_keys(raw: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ValidationError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _amplitudes(values) -> tuple:
    """Real numbers or [re, im] pairs -> complex tuple."""
    out = []
    for v in values:
        if isinstance(v, (list, tuple)):
            if len(v) != 2:
                raise ValidationError("initial_data_state: complex entries must be [re, im]")
            out.append(complex(float(v[0]), float(v[1])))
        else:
            out.append(complex(float(v)))
    return tuple(out)


def _field(section: str, key: str, fn, value):
    try:
        return fn(value)
    except ValidationError as exc:
        raise ValidationError(f"{section}.{key}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{section}.{key}: invalid value {value!r} ({exc})") from None


def merge_defaults(raw: dict) -> dict:
    _check_keys(raw, TOP_KEYS, "config")
    merged = {k: v for k, v in DEFAULTS.items() if not isinstance(v, dict)}
    merged.update({k: v for k, v in raw.items() if k not in SECTION_KEYS})
    for section, keys in SECTION_KEYS.items():
        sub = raw.get(section, {})
        if not isinstance(sub, dict):
            raise ValidationError(f"[{section}] must be a table")
        _check_keys(sub, keys, f"[{section}]")
        if section in DEFAULTS:
            merged[section] = {**DEFAULTS[section], **sub}
        elif sub:
            merged[section] = dict(sub)
    return merged


def from_dict(raw: dict) -> ExperimentConfig:
    """Validated config from a (possibly partial) mapping."""
    c = merge_defaults(raw)
    dev = c["device"]
    device = DeviceParams(**{
        k[:-4]: _field("device", k, lambda v: ghz(float(v)), dev[k]) for k in sorted(dev)
    })

    gate = c["gate"]
    cz = _field("gate", "xi/chi/zeta/phi", lambda _: CzParams(
        xi=gate["xi"], chi=gate["chi"], zeta=gate["zeta"], phi=gate["phi"]), None)
    if "theta" in gate:
        cz = cz.with_theta(_field("gate", "theta", float, gate["theta"]))

    noise_raw = c["noise"]
    noise = _field("noise", "T1_us", lambda _: NoiseModel(
        T1=float(noise_raw["T1_us"]), enabled=bool(noise_raw["enabled"])), None)
    sch = c["schedule"]
    schedule = _field("schedule", "t_H_ns/t_CZ_ns", lambda _: Schedule(
        float(sch["t_H_ns"]), float(sch["t_CZ_ns"])), None)

    profile = None
    if "pulse" in c:
        pr = c["pulse"]
        _check_keys(pr, SECTION_KEYS["pulse"], "[pulse]")
        profile = _field("pulse", "times_ns/eps1_GHz", lambda _: PulseProfile(
            tuple(pr["times_ns"]), tuple(ghz(float(x)) for x in pr["eps1_GHz"])), None)

    readout = c["readout"]
    if readout not in READOUT_MODES:
        raise ValidationError(f"readout: must be one of {READOUT_MODES}, got {readout!r}")
    n_cycles = c["n_cycles"]
    if not isinstance(n_cycles, int) or isinstance(n_cycles, bool) or n_cycles < 1:
        raise ValidationError(f"n_cycles: must be an integer >= 1, got {n_cycles!r}")
    seed = c["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ValidationError(f"seed: must be a 64-bit unsigned integer, got {seed!r}")
    return _field("config", "initial_data_state", lambda _: ExperimentConfig(
        device=device, cz=cz, noise=noise, schedule=schedule, n_cycles=n_cycles, seed=seed,
        readout_mode=readout, initial_data_state=_amplitudes(c["initial_data_state"]),
        log_populations=bool(c["log_populations"]), random_phases=bool(gate["random_phases"]),
        profile=profile,
    ), None)


def to_dict(config: ExperimentConfig) -> dict:
    """Inverse of :func:`from_dict` (theta is folded into xi)."""
    d = config.device
    amps = config.initial_data_state
    state = ([a.real for a in amps] if all(a.imag == 0 for a in amps)
             else [[a.real, a.imag] for a in amps])
    out = {
        "seed": int(config.seed),
        "n_cycles": int(config.n_cycles),
        "readout": config.readout_mode,
        "log_populations": config.log_populations,
        "initial_data_state": state,
        "device": {
            "eps1_GHz": d.eps1 / (2 * math.pi), "eps2_GHz": d.eps2 / (2 * math.pi),
            "eta1_GHz": d.eta1 / (2 * math.pi), "eta2_GHz": d.eta2 / (2 * math.pi),
            "g_GHz": d.g / (2 * math.pi),
        },
        "gate": {
            "xi": list(config.cz.xi), "chi": list(config.cz.chi),
            "zeta": list(config.cz.zeta), "phi": list(config.cz.phi),
            "random_phases": config.random_phases,
        },
        "noise": {"T1_us": config.noise.T1, "enabled": config.noise.enabled},
        "schedule": {"t_H_ns": config.schedule.t_H, "t_CZ_ns": config.schedule.t_CZ},
    }
    if config.profile is not None:
        out["pulse"] = {
            "times_ns": list(config.profile.times),
            "eps1_GHz": [x / (2 * math.pi) for x in config.profile.eps1],
        }
    return out


def load(path: str | Path | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        try:
            return tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from None


def parse_config(path: str | Path | None = None, **overrides) -> ExperimentConfig:
    """Read ``path`` (TOML, optional) and apply flag overrides; flags win.

    Recognized overrides: seed, n_cycles, theta, T1_us, readout, log_populations.
    ``None`` values are ignored.
    """
    raw = load(path)
    over = {k: v for k, v in overrides.items() if v is not None}
    _check_keys(over, {"seed", "n_cycles", "theta", "T1_us", "readout", "log_populations"},
                "overrides")
    for k in ("seed", "n_cycles", "readout", "log_populations"):
        if k in over:
            raw[k] = over[k]
    if "theta" in over:
        raw.setdefault("gate", {})["theta"] = over["theta"]
    if "T1_us" in over:
        raw.setdefault("noise", {})["T1_us"] = over["T1_us"]
    return from_dict(raw)


def dumps(config: ExperimentConfig) -> str:
    return tomli_w.dumps(to_dict(config))

