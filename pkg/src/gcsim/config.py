"""TOML scenario files.

A scenario file either starts from a built-in experiment::

    [scenario]
    builtin = "stern-gerlach"      # or "dispersive-entanglement"
    engine = "closed-form"         # closed-form | ode | oracle (optional)
    seed = 7

    [params]                       # keyword arguments of the built-in
    f_q = 0.5
    Gamma_x = 0.02

or describes a model explicitly::

    [scenario]
    name = "driven-cavity"
    engine = "ode"

    [model]
    n_modes = 1
    n_qubits = 1
    H_m = [[1.0, 0.0], [0.0, 1.0]]
    r_m = [0.0, 0.0]
    H_q = [[[0.2, 0.0], [0.0, 0.2]]]   # one matrix per qubit
    r_q = [[0.0, 0.0]]
    H_q0 = [0.0]
    Gamma_z = [0.1]
    B = { re = [[0.25, 0.0], [0.0, 0.25]], im = [[0.0, -0.25], [0.25, 0.0]] }
    # or D = [[...]] and E = [[...]]
    d = [0.0, 0.0]

    [initial]
    mode = "displaced-squeezed"     # vacuum | squeezed-thermal | displaced-squeezed | explicit
    x0 = 2.0
    s = 1.5
    qubits = "plus-state"           # or qrdm = { re = [[...]], im = [[...]] }

    [schedule]
    t0 = 0.0
    t1 = 3.0
    n = 61                          # or: times = [0.0, 0.5, 1.0]

    [[measurements]]
    kind = "homodyne"
    phi = 1.5707963267948966
    eta = 0.8
    grid = [[-6.0, 6.0, 121]]       # one [lo, hi, n] per measured quadrature
    region = [-1.0, 1.0]
    post_qrdm = true

    [outputs]
    observables = ["trajectory", "qrdm"]

    [integrator]
    method = "RK45"
    rel_tol = 1e-9

Matrices are row-major nested lists; complex arrays are tables with ``re``
and ``im`` entries.  Every error names the offending field; syntax errors
carry the line and column reported by the TOML parser.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import tomli

from .dynamics import IntegratorConfig
from .errors import ConfigError, EngineIncompatibility
from .model import HybridModel, noise_from_B
from .scenarios import (
    BUILTINS,
    MeasurementSpec,
    ScenarioConfig,
    builtin,
    displaced_squeezed,
    plus_state_qrdm,
    squeezed_thermal,
    vacuum,
)

_MEAS_FIELDS = {"kind", "name", "axis", "qubit", "phi", "eta", "sigma_m", "mode", "at", "grid", "region",
                "post_qrdm", "wigner", "samples"}


def _field(section: dict, key: str, where: str, default=..., kind=None):
    if key not in section:
        if default is ...:
            raise ConfigError(f"{where}.{key}: required field missing")
        return default
    val = section[key]
    if kind is not None:
        try:
            val = kind(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.{key}: {exc}") from exc
    return val


def _array(val, where: str, dtype=float) -> np.ndarray:
    if isinstance(val, dict):
        if set(val) - {"re", "im"}:
            raise ConfigError(f"{where}: complex arrays take only 're' and 'im' entries")
        re = _array(val.get("re", 0.0), where + ".re")
        im = _array(val.get("im", 0.0), where + ".im")
        return re + 1j * im
    try:
        return np.asarray(val, dtype=dtype)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: not a numeric array ({exc})") from exc


def _model(sec: dict) -> HybridModel:
    w = "model"
    n = _field(sec, "n_modes", w, kind=int)
    nq = _field(sec, "n_qubits", w, kind=int)
    kw = dict(n_modes=n, n_qubits=nq)
    for key in ("H_m", "r_m", "H_q0", "Gamma_z", "d", "zz", "D", "E"):
        if key in sec:
            kw[key] = _array(sec[key], f"{w}.{key}")
    kw.setdefault("H_m", np.zeros((2 * n, 2 * n)))
    kw.setdefault("r_m", np.zeros(2 * n))
    for key in ("H_q", "r_q"):
        if key in sec:
            kw[key] = tuple(_array(sec[key], f"{w}.{key}"))
    if "B" in sec:
        if "D" in sec or "E" in sec:
            raise ConfigError(f"{w}.B: give either B or D/E, not both")
        try:
            kw["D"], kw["E"] = noise_from_B(_array(sec["B"], f"{w}.B", complex))
        except ValueError as exc:
            raise ConfigError(f"{w}.B: {exc}") from exc
    unknown = set(sec) - {"n_modes", "n_qubits", "H_m", "r_m", "H_q", "r_q", "H_q0", "Gamma_z", "D", "E",
                          "d", "zz", "B"}
    if unknown:
        raise ConfigError(f"{w}: unknown fields {sorted(unknown)}")
    try:
        return HybridModel(**kw)
    except ValueError as exc:
        raise ConfigError(f"{w}: {exc}") from exc


def _initial(sec: dict, model: HybridModel):
    w = "initial"
    mode = _field(sec, "mode", w, "vacuum", str)
    if mode == "vacuum":
        r0, sigma0 = vacuum(model.n_modes)
    elif mode == "squeezed-thermal":
        r0, sigma0 = squeezed_thermal(_field(sec, "N_p", w, 0.0, float), _field(sec, "s", w, 1.0, float))
    elif mode == "displaced-squeezed":
        r0, sigma0 = displaced_squeezed(_field(sec, "x0", w, kind=float), _field(sec, "s", w, 1.0, float))
    elif mode == "explicit":
        r0 = _array(_field(sec, "r0", w), f"{w}.r0")
        sigma0 = _array(_field(sec, "sigma0", w), f"{w}.sigma0")
    else:
        raise ConfigError(f"{w}.mode: unknown preset {mode!r}")
    if "qrdm" in sec:
        q = _array(sec["qrdm"], f"{w}.qrdm", complex)
    else:
        preset = _field(sec, "qubits", w, "plus-state", str)
        if preset != "plus-state":
            raise ConfigError(f"{w}.qubits: unknown preset {preset!r}")
        q = plus_state_qrdm(model.n_qubits)
    return r0, sigma0, q


def _schedule(sec: dict) -> np.ndarray:
    w = "schedule"
    if "times" in sec:
        return _array(sec["times"], f"{w}.times")
    t0 = _field(sec, "t0", w, 0.0, float)
    t1 = _field(sec, "t1", w, kind=float)
    n = _field(sec, "n", w, kind=int)
    if n < 1:
        raise ConfigError(f"{w}.n: must be at least 1")
    return np.linspace(t0, t1, n)


def _measurement(sec: dict, i: int) -> MeasurementSpec:
    w = f"measurements[{i}]"
    unknown = set(sec) - _MEAS_FIELDS
    if unknown:
        raise ConfigError(f"{w}: unknown fields {sorted(unknown)}")
    kw = dict(sec)
    for key in ("grid", "wigner"):
        if key in kw:
            kw[key] = tuple(tuple(g) for g in kw[key])
    if "region" in kw:
        kw["region"] = tuple(kw["region"])
    if "sigma_m" in kw:
        kw["sigma_m"] = _array(kw["sigma_m"], f"{w}.sigma_m")
    try:
        return MeasurementSpec(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{w}: {exc}") from exc
    except TypeError as exc:
        raise ConfigError(f"{w}: {exc}") from exc


def config_from_dict(data: dict) -> ScenarioConfig:
    """Build a :class:`ScenarioConfig` from parsed TOML data."""
    top = data.get("scenario", {})
    engine = top.get("engine")
    seed = int(top.get("seed", 0))
    if "builtin" in top:
        name = top["builtin"]
        if name not in BUILTINS:
            raise ConfigError(f"scenario.builtin: unknown built-in {name!r}; known: {sorted(BUILTINS)}")
        params = dict(data.get("params", {}))
        if engine is not None:
            params["engine"] = engine
        cfg = builtin(name, **params)
        cfg.seed = seed
        if "integrator" in data:
            cfg.integrator = _integrator(data["integrator"])
        if "n_max" in top:
            cfg.n_max = int(top["n_max"])
        return cfg
    for sec in ("model", "schedule"):
        if sec not in data:
            raise ConfigError(f"{sec}: required section missing")
    model = _model(data["model"])
    r0, sigma0, q0 = _initial(data.get("initial", {}), model)
    times = _schedule(data["schedule"])
    meas = [_measurement(m, i) for i, m in enumerate(data.get("measurements", []))]
    outputs = tuple(data.get("outputs", {}).get("observables", ("trajectory", "qrdm")))
    bad = set(outputs) - {"trajectory", "qrdm", "widths"}
    if bad:
        raise ConfigError(f"outputs.observables: unknown observables {sorted(bad)}")
    integ = _integrator(data.get("integrator", {}))
    return ScenarioConfig(top.get("name", "custom"), model, r0, sigma0, q0, times, engine or "ode", meas,
                          outputs, seed, None, {}, integ, int(top.get("n_max", 40)))


def _integrator(sec: dict) -> IntegratorConfig:
    try:
        return IntegratorConfig(**sec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integrator: {exc}") from exc


def load_config(path: str | Path) -> ScenarioConfig:
    """Parse a TOML scenario file."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return config_from_dict(data)
    except EngineIncompatibility:
        raise
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
