"""Experiment configuration files and result records.

Configs are JSON objects whose numeric fields carry their unit in the key,
e.g. ``t_re_us`` or ``a_perp_khz``. Frequencies given in kHz or Hz are
ordinary frequencies and are multiplied by 2 pi; ``*_rad_s`` values are used
as given. :meth:`Experiment.echo` writes the fully resolved experiment back in
SI-suffixed form, which parses to the identical experiment.
"""

import copy
import json
import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import ResetProtocol
from .errors import InvalidInputError
from .geometry import NM, dipolar_coupling, hyperfine_from_position
from .model import (
    TWO_PI,
    DetuningSchedule,
    DriveParams,
    NoiseParams,
    NuclearSpin,
    PhysicalConstants,
    SpinSystem,
    static_detunings,
)

BACKENDS = ("full", "effective", "both")

_UNITS = {
    "freq": {"khz": TWO_PI * 1e3, "hz": TWO_PI, "rad_s": 1.0},
    "time": {"us": 1e-6, "ms": 1e-3, "s": 1.0},
    "rate": {"per_s": 1.0, "per_ms": 1e3, "per_us": 1e6},
    "field": {"gauss": 1e-4, "tesla": 1.0},
    "length": {"nm": NM, "m": 1.0},
}


class ConfigError(InvalidInputError):
    """A config field is missing or invalid; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _quantity(section: dict, name: str, kind: str, path: str, default=None, required: bool = False):
    """Read ``name_<unit>`` from ``section`` and convert to SI."""
    found = [(u, f) for u, f in _UNITS[kind].items() if f"{name}_{u}" in section]
    if len(found) > 1:
        raise ConfigError(f"{path}.{name}", "given in more than one unit")
    if not found:
        if required:
            units = ", ".join(f"{name}_{u}" for u in _UNITS[kind])
            raise ConfigError(f"{path}.{name}", f"missing (give one of {units})")
        return default
    unit, factor = found[0]
    value = section[f"{name}_{unit}"]
    if isinstance(value, (list, tuple)):
        return [None if v is None else _number(v, f"{path}.{name}_{unit}") * factor for v in value]
    return _number(value, f"{path}.{name}_{unit}") * factor


def _wrap(section: str, exc: Exception, fields=()) -> ConfigError:
    """ConfigError at ``section.field`` for the first field the message names."""
    msg = str(exc)
    for f in fields:
        if re.search(rf"\b{f}\b", msg):
            return ConfigError(f"{section}.{f}", msg)
    return ConfigError(section, msg)


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return float(value)


def _section(cfg: dict, name: str, required: bool = True) -> dict:
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(name, "missing section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be an object")
    return sec


@dataclass
class Experiment:
    """A fully resolved experiment, ready to run."""

    name: str
    system: SpinSystem
    drive: DriveParams
    protocol: ResetProtocol
    noise: NoiseParams
    backend: str = "full"
    t_total: float = 0.02
    sample_every: int = 10
    dt_max: Optional[float] = None
    alpha_mode: str = "pair_mean"
    tcv_threshold: float = 0.96
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def effective_dt(self) -> float:
        return self.dt_max if self.dt_max is not None else self.sample_every * self.protocol.t_re

    @property
    def initial_state(self) -> np.ndarray:
        d = 2 ** self.system.n_nuclei
        return np.eye(d, dtype=complex) / d

    def echo(self) -> dict:
        """The resolved experiment in SI-suffixed config form."""
        det = static_detunings(self.system, self.drive)
        sched = self.drive.detuning_schedule
        out = {
            "name": self.name,
            "system": {
                "b0_tesla": self.drive.b0,
                "pair": list(self.system.pair),
                "nuclei": [
                    {
                        "label": n.label,
                        "a_par_rad_s": n.a_par,
                        "a_perp_rad_s": n.a_perp,
                        **({"position_m": list(n.position)} if n.position is not None else {}),
                    }
                    for n in self.system.nuclei
                ],
                "couplings_rad_s": [[i, j, g] for (i, j), g in sorted(self.system.couplings.items())],
            },
            "drive": {
                "rf_tuning": "explicit",
                "omega_rf_rad_s": self.drive.omega_rf,
                "omega_mw_rad_s": self.drive.omega_mw,
                "omega_rf_rabi_rad_s": self.drive.omega_rf_rabi,
                "detunings_rad_s": [float(d) for d in det],
                "schedule": {"kind": sched.kind}
                if not sched.time_dependent
                else {
                    "kind": sched.kind,
                    "delta0_rad_s": sched.delta0,
                    "rate_per_s": sched.rate_lambda,
                    "delta_inf_rad_s": sched.delta_inf,
                },
            },
            "protocol": {
                "t_re_s": self.protocol.t_re,
                "polarization": self.protocol.polarization,
                "channel": self.protocol.channel,
                "nv_decay_in_segment": self.protocol.nv_decay_in_segment,
            },
            "noise": {
                "gamma_per_s": list(self.noise.gamma),
                "dephasing_per_s": list(self.noise.gamma_dephasing),
            },
            "backend": self.backend,
            "t_total_s": self.t_total,
            "sampling": {"sample_every": self.sample_every},
            "alpha_mode": self.alpha_mode,
            "tcv_threshold": self.tcv_threshold,
            "seed": self.seed,
        }
        if not math.isinf(self.protocol.t1_rho):
            out["protocol"]["t1_rho_s"] = self.protocol.t1_rho
        if self.dt_max is not None:
            out["sampling"]["dt_max_s"] = self.dt_max
        if self.meta:
            out["meta"] = copy.deepcopy(self.meta)
        return out


def _parse_nuclei(sys_cfg: dict, axis, constants) -> list:
    raw = sys_cfg.get("nuclei")
    if not isinstance(raw, list) or not raw:
        raise ConfigError("system.nuclei", "must be a non-empty list")
    nuclei = []
    for k, nc in enumerate(raw):
        path = f"system.nuclei[{k}]"
        if not isinstance(nc, dict):
            raise ConfigError(path, "must be an object")
        pos = _quantity(nc, "position", "length", path)
        a_par = _quantity(nc, "a_par", "freq", path)
        a_perp = _quantity(nc, "a_perp", "freq", path)
        if pos is not None and (a_par is None or a_perp is None):
            hp, hq = hyperfine_from_position(pos, axis, constants)
            a_par = hp if a_par is None else a_par
            a_perp = hq if a_perp is None else a_perp
        if a_par is None:
            raise ConfigError(f"{path}.a_par", "missing (give a_par_khz or a position)")
        if a_perp is None:
            raise ConfigError(f"{path}.a_perp", "missing (give a_perp_khz or a position)")
        try:
            nuclei.append(NuclearSpin(a_par, a_perp, tuple(pos) if pos is not None else None, str(nc.get("label", f"n{k}"))))
        except InvalidInputError as exc:
            raise ConfigError(path, str(exc)) from exc
    return nuclei


def parse_experiment(cfg: dict, backend: str = None) -> Experiment:
    """Resolve a config mapping into an :class:`Experiment`."""
    if not isinstance(cfg, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    constants = PhysicalConstants()
    sys_cfg = _section(cfg, "system")
    drive_cfg = _section(cfg, "drive")
    prot_cfg = _section(cfg, "protocol")
    noise_cfg = _section(cfg, "noise", required=False)
    samp_cfg = _section(cfg, "sampling", required=False)

    axis = np.asarray(sys_cfg.get("nv_axis", [1, 1, 1]), dtype=float)
    axis = axis / np.linalg.norm(axis)
    nuclei = _parse_nuclei(sys_cfg, axis, constants)
    pair = tuple(sys_cfg.get("pair", [0, 1]))
    if len(nuclei) >= 2 and len(pair) == 2 and all(isinstance(i, int) and 0 <= i < len(nuclei) for i in pair):
        asym = _quantity(sys_cfg, "a_perp_asymmetry", "freq", "system", default=0.0)
        if asym:
            i, j = pair
            ni, nj = nuclei[i], nuclei[j]
            nuclei[i] = NuclearSpin(ni.a_par, max(0.0, ni.a_perp + asym / 2), ni.position, ni.label)
            nuclei[j] = NuclearSpin(nj.a_par, max(0.0, nj.a_perp - asym / 2), nj.position, nj.label)
    b0 = _quantity(sys_cfg, "b0", "field", "system", required=True)

    couplings = {}
    raw_g = sys_cfg.get("couplings_khz", sys_cfg.get("couplings_rad_s"))
    scale = TWO_PI * 1e3 if "couplings_khz" in sys_cfg else 1.0
    for k, entry in enumerate(raw_g or []):
        path = f"system.couplings[{k}]"
        if not (isinstance(entry, list) and len(entry) == 3):
            raise ConfigError(path, "expected [i, j, value]")
        couplings[(int(entry[0]), int(entry[1]))] = _number(entry[2], path) * scale
    if sys_cfg.get("dipolar_from_positions"):
        for i in range(len(nuclei)):
            for j in range(i + 1, len(nuclei)):
                if (i, j) not in couplings and nuclei[i].position and nuclei[j].position:
                    r = np.subtract(nuclei[j].position, nuclei[i].position)
                    couplings[(i, j)] = dipolar_coupling(r, axis, constants)
    try:
        system = SpinSystem(tuple(nuclei), pair, couplings, constants)
    except InvalidInputError as exc:
        raise ConfigError("system", str(exc)) from exc
    i, j = system.require_pair()

    # rf carrier
    tuning = drive_cfg.get("rf_tuning", "midway")
    zeeman = constants.gamma_n * b0
    if tuning == "midway":
        omega_rf = zeeman + (nuclei[i].a_par + nuclei[j].a_par) / 4
    elif tuning == "delta1":
        d1 = _quantity(drive_cfg, "delta1", "freq", "drive", required=True)
        omega_rf = zeeman + nuclei[i].a_par / 2 - d1
    elif tuning == "explicit":
        omega_rf = _quantity(drive_cfg, "omega_rf", "freq", "drive", required=True)
    else:
        raise ConfigError("drive.rf_tuning", f"unknown value {tuning!r} (midway, delta1, explicit)")
    shift = _quantity(drive_cfg, "detuning_sum", "freq", "drive", default=0.0)
    omega_rf -= shift / 2
    omega_mw = _quantity(drive_cfg, "omega_mw", "freq", "drive", default=omega_rf)

    overrides = _quantity(drive_cfg, "detunings", "freq", "drive")
    if overrides is not None:
        if not isinstance(overrides, list) or len(overrides) != len(nuclei):
            raise ConfigError("drive.detunings", f"expected a list of {len(nuclei)} values (null keeps the derived value)")
        # a detuning-sum shift moves overridden values with the carrier
        overrides = tuple(None if v is None else v + shift / 2 for v in overrides)

    sched_cfg = drive_cfg.get("schedule", {"kind": "constant"})
    kind = sched_cfg.get("kind", "constant")
    try:
        if kind == "exponential":
            schedule = DetuningSchedule(
                "exponential",
                delta0=_quantity(sched_cfg, "delta0", "freq", "drive.schedule", required=True),
                rate_lambda=_quantity(sched_cfg, "rate", "rate", "drive.schedule", required=True),
                delta_inf=_quantity(sched_cfg, "delta_inf", "freq", "drive.schedule", default=0.0),
            )
        else:
            schedule = DetuningSchedule(kind)
    except InvalidInputError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("drive.schedule", str(exc)) from exc

    provisional = DriveParams(omega_mw, 0.0, b0, omega_rf, DetuningSchedule(), overrides, allow_mismatch=True)
    det = static_detunings(system, provisional)
    imbalance = abs(det[i] - det[j]) / 2
    rabi = _quantity(drive_cfg, "omega_rf_rabi", "freq", "drive")
    ratio = drive_cfg.get("omega_rf_over_delta")
    if rabi is None and ratio is None:
        raise ConfigError("drive.omega_rf_rabi", "missing (give omega_rf_rabi_khz or omega_rf_over_delta)")
    if rabi is not None and ratio is not None:
        raise ConfigError("drive.omega_rf_rabi", "give either omega_rf_rabi_* or omega_rf_over_delta, not both")
    if rabi is None:
        rabi = _number(ratio, "drive.omega_rf_over_delta") * imbalance
    try:
        drive = DriveParams(
            omega_mw, rabi, b0, omega_rf, schedule, overrides, allow_mismatch=bool(drive_cfg.get("allow_mismatch", False))
        )
    except InvalidInputError as exc:
        raise _wrap("drive", exc, ("omega_rf_rabi", "omega_rf", "omega_mw", "b0")) from exc

    # protocol
    t1 = _quantity(prot_cfg, "t1_rho", "time", "protocol", default=math.inf)
    t1 = math.inf if t1 is None else t1
    ratio_a = prot_cfg.get("alpha_sq_over_omega_rf")
    if ratio_a is not None:
        if _quantity(prot_cfg, "t_re", "time", "protocol") is not None:
            raise ConfigError("protocol.t_re", "give either t_re_* or alpha_sq_over_omega_rf, not both")
        a_perp = 0.5 * (nuclei[i].a_perp + nuclei[j].a_perp)
        t_re = 4 * _number(ratio_a, "protocol.alpha_sq_over_omega_rf") * rabi / a_perp ** 2
    else:
        t_re = _quantity(prot_cfg, "t_re", "time", "protocol", required=True)
    try:
        protocol = ResetProtocol(
            t_re=t_re,
            polarization=_number(prot_cfg.get("polarization", 1.0), "protocol.polarization"),
            t1_rho=t1,
            nv_decay_in_segment=bool(prot_cfg.get("nv_decay_in_segment", False)),
            channel=prot_cfg.get("channel", "mixture"),
        )
    except InvalidInputError as exc:
        raise _wrap("protocol", exc, ("t_re", "polarization", "t1_rho", "channel")) from exc

    # noise
    n = len(nuclei)
    gamma = _quantity(noise_cfg, "gamma", "rate", "noise")
    t2 = _quantity(noise_cfg, "t2", "time", "noise")
    if gamma is not None and t2 is not None:
        raise ConfigError("noise", "give either gamma_* or t2_*, not both")
    if t2 is not None:
        targets = noise_cfg.get("t2_applies_to", "pair")
        idx = (i, j) if targets == "pair" else range(n)
        gamma = [1.0 / t2 if k in idx else 0.0 for k in range(n)]
    dephasing = _quantity(noise_cfg, "dephasing", "rate", "noise")
    try:
        noise = NoiseParams(tuple(_pad(gamma, n, "noise.gamma")), tuple(_pad(dephasing, n, "noise.dephasing")))
    except InvalidInputError as exc:
        raise ConfigError("noise", str(exc)) from exc

    backend = backend or cfg.get("backend", "full")
    if backend not in BACKENDS:
        raise ConfigError("backend", f"must be one of {BACKENDS}")
    t_total = _quantity(cfg, "t_total", "time", "<root>", required=True)
    if not t_total > 0:
        raise ConfigError("t_total", "must be positive")
    sample_every = samp_cfg.get("sample_every", 10)
    if not isinstance(sample_every, int) or sample_every < 1:
        raise ConfigError("sampling.sample_every", "must be a positive integer")
    dt_max = _quantity(samp_cfg, "dt_max", "time", "sampling")
    alpha_mode = cfg.get("alpha_mode", "pair_mean")
    if alpha_mode not in ("pair_mean", "individual"):
        raise ConfigError("alpha_mode", "must be 'pair_mean' or 'individual'")
    return Experiment(
        name=str(cfg.get("name", "experiment")),
        system=system,
        drive=drive,
        protocol=protocol,
        noise=noise,
        backend=backend,
        t_total=t_total,
        sample_every=sample_every,
        dt_max=dt_max,
        alpha_mode=alpha_mode,
        tcv_threshold=_number(cfg.get("tcv_threshold", 0.96), "tcv_threshold"),
        seed=int(cfg.get("seed", 0)),
        meta=dict(cfg.get("meta", {})),
    )


def _pad(values, n, path):
    if values is None:
        return [0.0] * n
    if not isinstance(values, list):
        return [values] * n
    if len(values) != n:
        raise ConfigError(path, f"expected {n} values")
    return [0.0 if v is None else v for v in values]


def load_config(path) -> dict:
    """Read a JSON config; a bare name such as ``fig2a`` selects a bundled one."""
    name = str(path)
    if not os.path.exists(name) and os.sep not in name and not name.endswith(".json"):
        return bundled_config(name)
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError("<root>", f"cannot read {path}: {exc}") from exc


def bundled_config(name: str) -> dict:
    """One of the parameter sets shipped in ``nvsinglet/data``."""
    res = resources.files("nvsinglet").joinpath("data", f"{name}.json")
    if not res.is_file():
        raise ConfigError("<root>", f"no bundled config named {name!r}")
    return json.loads(res.read_text(encoding="utf-8"))


def set_path(cfg: dict, path: str, value) -> dict:
    """Return a copy of ``cfg`` with the dotted ``path`` set to ``value``.

    List elements are addressed by integer components, e.g.
    ``system.nuclei.0.a_perp_khz``.
    """
    out = copy.deepcopy(cfg)
    parts = path.split(".")
    node = out
    for k, part in enumerate(parts[:-1]):
        here = ".".join(parts[: k + 1])
        if isinstance(node, list):
            if not part.isdigit() or int(part) >= len(node):
                raise ConfigError(here, "invalid list index")
            node = node[int(part)]
        elif isinstance(node, dict):
            if part not in node:
                node[part] = {}
            node = node[part]
        else:
            raise ConfigError(here, "cannot descend into a scalar")
    last = parts[-1]
    if isinstance(node, list):
        if not last.isdigit() or int(last) >= len(node):
            raise ConfigError(path, "invalid list index")
        node[int(last)] = value
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(path, "cannot set a field on a scalar")
    return out


def get_path(cfg: dict, path: str):
    node = cfg
    for part in path.split("."):
        if isinstance(node, list) and part.isdigit() and int(part) < len(node):
            node = node[int(part)]
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise KeyError(path)
    return node


# ---------------------------------------------------------------------------
# results


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


@dataclass
class ResultRecord:
    config: dict
    trajectories: dict = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        body = {
            "config": self.config,
            "trajectories": self.trajectories,
            "summary": self.summary,
            "provenance": self.provenance,
        }
        return json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        data = json.loads(text)
        return cls(data["config"], data.get("trajectories", {}), data.get("summary", {}), data.get("provenance", {}))


def provenance(seed: int, backend: str) -> dict:
    return {"package": "nvsinglet", "version": __version__, "seed": seed, "backend": backend}
