"""Run configuration files.

Plain ``key = value`` lines, optionally grouped under ``[section]`` headers.
Matrices live in ``[matrix NAME]`` sections, one row per line, entries
separated by ``;`` and each entry a ``re,im`` pair (a bare ``re`` means a real
entry). ``#`` starts a comment.

    experiment = static-thermo
    beta = 1.0

    [matrix H_S]
    0,0; 0,0
    0,0; 1,0
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError
from .jaynes_cummings import JCParams
from .operators import HERMITIAN_TOL, hermitian_asymmetry

log = logging.getLogger(__name__)

EXPERIMENTS = ("static-thermo", "evolve", "jc", "check-commutators")
MATRIX_NAMES = ("H_S", "H_E", "H_SE", "rho_S0", "amplitudes", "H_drive")
HERMITIAN_MATRICES = ("H_S", "H_E", "H_SE", "rho_S0", "H_drive")
DRIVE_PROFILES = ("none", "linear", "ramp", "sine")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text

    return parse


# section -> key -> (parser, default); a default of None means "experiment dependent"
SCHEMA: dict[str, dict[str, tuple[Any, Any]]] = {
    "": {
        "experiment": (_choice(*EXPERIMENTS), None),
        "beta": (float, 1.0),
        "out": (str, ""),
    },
    "time": {
        "t_end": (float, None),
        "dt": (float, None),
        "step": (float, 1e-3),
    },
    "evolve": {
        "eq18_mode": (_choice("literal", "log_form"), "literal"),
        "integrator": (_choice("exact", "rk4"), None),
        "cross_check": (_bool, False),
        "initial": (_choice("product", "entangled"), "product"),
        "drive_profile": (_choice(*DRIVE_PROFILES), "none"),
        "drive_rate": (float, 1.0),
    },
    "jc": {
        "omega_c": (float, 1.0),
        "omega_a": (float, 1.05),
        "omega_a_rate": (float, 0.0),
        "Omega": (float, 0.2),
        "ramp_alpha": (float, 0.5),
        "n_max": (int, 60),
        "quadrature_step": (float, 0.005),
        "normalize": (_bool, True),
    },
    "tolerances": {
        "h_beta_rel": (float, 1e-4),
        "hermitian": (float, HERMITIAN_TOL),
        "tol_traj": (float, 1e-6),
        "second_law": (float, 1e-6),
        "rwa_ratio": (float, 0.2),
        "cutoff_ratio": (float, 1e-12),
    },
    "checks": {
        "enforce_second_law": (_bool, False),
    },
}

# sections whose defaults are echoed for each experiment; the rest are filled silently
RELEVANT_SECTIONS = {
    "static-thermo": ("", "tolerances"),
    "evolve": ("", "time", "evolve", "tolerances", "checks"),
    "jc": ("", "time", "jc", "tolerances", "checks"),
    "check-commutators": ("",),
}

TIME_DEFAULTS = {
    "static-thermo": (0.0, 1.0),
    "evolve": (5.0, 0.1),
    "jc": (20.0, 0.01),
    "check-commutators": (0.0, 1.0),
}


@dataclass
class RunConfig:
    experiment: str
    values: dict[str, Any]
    matrices: dict[str, np.ndarray]
    defaults_applied: list[str] = field(default_factory=list)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def beta(self) -> float:
        return self.values["beta"]

    def times(self) -> np.ndarray:
        t_end, dt = self.values["time.t_end"], self.values["time.dt"]
        n = int(round(t_end / dt))
        return dt * np.arange(n + 1)

    def jc_params(self) -> JCParams:
        v = self.values
        omega_a = v["jc.omega_a"]
        rate = v["jc.omega_a_rate"]
        wa = omega_a if rate == 0 else (lambda t, a=omega_a, r=rate: a + r * np.asarray(t))
        return JCParams(
            omega_c=v["jc.omega_c"],
            omega_a=wa,
            Omega=v["jc.Omega"],
            ramp_alpha=v["jc.ramp_alpha"],
            beta=self.beta,
            n_max=v["jc.n_max"],
            t_grid=self.times(),
            quadrature_step=v["jc.quadrature_step"],
            rwa_ratio=v["tolerances.rwa_ratio"],
            cutoff_ratio=v["tolerances.cutoff_ratio"],
        )


def _parse_entry(text: str, name: str, lineno: int) -> complex:
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise ConfigError(f"line {lineno}: bad entry {text!r} in matrix {name}; expected 're,im'")


def _matrix_from_rows(name: str, rows: list[tuple[int, str]]) -> np.ndarray:
    if not rows:
        raise ConfigError(f"matrix {name} has no rows")
    table = [[_parse_entry(e, name, lineno) for e in line.split(";")] for lineno, line in rows]
    widths = {len(r) for r in table}
    if len(widths) != 1:
        raise ConfigError(f"dimension error: matrix {name} has rows of unequal length {sorted(widths)}")
    return np.array(table, dtype=complex)


def parse_config(text: str, experiment: str | None = None) -> RunConfig:
    """Parse and validate a configuration; every applied default is logged.

    ``experiment`` (the command-line subcommand) fills in a missing
    ``experiment`` key and must agree with it when both are present.
    """
    raw: dict[str, tuple[int, str]] = {}
    matrix_rows: dict[str, list[tuple[int, str]]] = {}
    section = ""
    current_matrix = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            header = line[1:-1].strip()
            current_matrix = None
            if header.startswith("matrix"):
                name = header[len("matrix"):].strip()
                if name not in MATRIX_NAMES:
                    raise ConfigError(f"line {lineno}: unknown matrix {name!r}")
                if name in matrix_rows:
                    raise ConfigError(f"line {lineno}: matrix {name} given twice")
                matrix_rows[name] = []
                current_matrix = name
            elif header in SCHEMA and header:
                section = header
            else:
                raise ConfigError(f"line {lineno}: unknown section [{header}]")
            continue
        if current_matrix is not None:
            matrix_rows[current_matrix].append((lineno, line))
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA[section]:
            where = f"[{section}]" if section else "top level"
            raise ConfigError(f"line {lineno}: unknown key {key!r} at {where}")
        full = f"{section}.{key}" if section else key
        if full in raw:
            raise ConfigError(f"line {lineno}: key {key!r} given twice")
        raw[full] = (lineno, value)

    values: dict[str, Any] = {}
    for sec, keys in SCHEMA.items():
        for key, (parse, _) in keys.items():
            full = f"{sec}.{key}" if sec else key
            if full in raw:
                lineno, text_value = raw[full]
                try:
                    values[full] = parse(text_value)
                except ValueError as exc:
                    raise ConfigError(f"line {lineno}: invalid value for {key!r}: {exc}") from None

    if experiment is not None:
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment!r}")
        if values.setdefault("experiment", experiment) != experiment:
            raise ConfigError(f"config is for experiment {values['experiment']!r}, invoked as {experiment!r}")
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'")
    experiment = values["experiment"]
    cfg = RunConfig(experiment, values, {})
    _apply_defaults(cfg)
    cfg.matrices = {name: _matrix_from_rows(name, rows) for name, rows in matrix_rows.items()}
    _validate(cfg)
    return cfg


def _default(cfg: RunConfig, key: str, value: Any, echo: bool = True) -> None:
    cfg.values[key] = value
    if echo:
        cfg.defaults_applied.append(f"{key} = {value}")
        log.info("default applied: %s = %s", key, value)


def _apply_defaults(cfg: RunConfig) -> None:
    t_end, dt = TIME_DEFAULTS[cfg.experiment]
    for sec, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            full = f"{sec}.{key}" if sec else key
            if full in cfg.values:
                continue
            if full == "time.t_end":
                default = t_end
            elif full == "time.dt":
                default = dt
            elif full == "evolve.integrator":
                default = "exact" if cfg.values.get("evolve.drive_profile", "none") == "none" else "rk4"
            _default(cfg, full, default, sec in RELEVANT_SECTIONS[cfg.experiment])


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    if not (math.isfinite(v["beta"]) and v["beta"] > 0):
        raise ConfigError(f"beta must be positive, got {v['beta']}")
    for key in ("time.dt", "time.step", "tolerances.h_beta_rel", "tolerances.hermitian", "tolerances.tol_traj"):
        if not v[key] > 0:
            raise ConfigError(f"{key} must be positive, got {v[key]}")
    if v["time.t_end"] < 0:
        raise ConfigError(f"time.t_end must be non-negative, got {v['time.t_end']}")
    n = round(v["time.t_end"] / v["time.dt"])
    if abs(n * v["time.dt"] - v["time.t_end"]) > 1e-9 * max(1.0, v["time.t_end"]):
        raise ConfigError("time grid violation: t_end is not a multiple of dt")

    m = cfg.matrices
    tol = v["tolerances.hermitian"]
    for name, mat in m.items():
        if name != "amplitudes" and mat.shape[0] != mat.shape[1]:
            raise ConfigError(f"dimension error: matrix {name} is {mat.shape[0]}x{mat.shape[1]}, must be square")
        if name in HERMITIAN_MATRICES:
            scale = max(1.0, float(np.max(np.abs(mat))))
            asym = hermitian_asymmetry(mat)
            if asym > tol * scale:
                raise ConfigError(f"matrix {name} is not Hermitian: max asymmetry {asym:.3e}")

    if cfg.experiment == "jc":
        return
    for name in ("H_S", "H_E"):
        if name not in m:
            raise ConfigError(f"experiment {cfg.experiment} needs matrix {name}")
    d_s, d_e = m["H_S"].shape[0], m["H_E"].shape[0]
    if "H_SE" not in m:
        m["H_SE"] = np.zeros((d_s * d_e, d_s * d_e), dtype=complex)
        cfg.defaults_applied.append("H_SE = 0")
        log.info("default applied: H_SE = 0 (%dx%d)", d_s * d_e, d_s * d_e)
    if m["H_SE"].shape[0] != d_s * d_e:
        raise ConfigError(f"dimension error: H_SE is {m['H_SE'].shape[0]}-dimensional, expected {d_s * d_e}")
    if cfg.experiment != "evolve":
        return
    if v["evolve.initial"] == "product":
        if "rho_S0" not in m:
            rho = np.zeros((d_s, d_s), dtype=complex)
            rho[0, 0] = 1.0
            m["rho_S0"] = rho
            cfg.defaults_applied.append("rho_S0 = |0><0|")
            log.info("default applied: rho_S0 = |0><0|")
        if m["rho_S0"].shape[0] != d_s:
            raise ConfigError(f"dimension error: rho_S0 is {m['rho_S0'].shape[0]}-dimensional, expected {d_s}")
    elif "amplitudes" not in m:
        raise ConfigError("initial = entangled needs matrix amplitudes")
    elif m["amplitudes"].shape != (d_s, d_e):
        raise ConfigError(f"dimension error: amplitudes table is {m['amplitudes'].shape}, expected ({d_s}, {d_e})")
    if v["evolve.drive_profile"] != "none":
        if "H_drive" not in m:
            raise ConfigError("drive_profile needs matrix H_drive")
        if m["H_drive"].shape[0] != d_s:
            raise ConfigError(f"dimension error: H_drive is {m['H_drive'].shape[0]}-dimensional, expected {d_s}")
        if v["evolve.integrator"] == "exact":
            raise ConfigError("a driven run needs integrator = rk4")
    if v["evolve.integrator"] == "rk4":
        ratio = v["time.dt"] / v["time.step"]
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError("time grid violation: integrator step does not divide dt")
