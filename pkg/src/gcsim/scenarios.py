"""Scenario descriptions, the two built-in experiments and the scenario runner.

A :class:`ScenarioConfig` bundles a model, an initial product state, a time
schedule, an engine and a list of measurement requests.  :func:`run_scenario`
evaluates it and returns in-memory tables; writing them to disk is left to
:mod:`gcsim.cli`.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import regressions as R
from .dynamics import (
    IntegratorConfig,
    Trajectory,
    closed_form_trajectory,
    diagonal_closed_form,
    integrate,
)
from .errors import ConfigError, EngineIncompatibility, NumericalFailure, RegressionFailure
from .measurement import (
    GeneralDyne,
    computational_povm,
    general_dyne,
    generaldyne_density,
    generaldyne_post_qrdm,
    heterodyne,
    homodyne_cov,
    joint_measurement_density,
    negativity_two_qubit,
    pauli_povm,
    postselect_success_probability,
    qubit_measure,
    sample_outcomes,
)
from .model import HybridModel, loss_B, noise_from_B
from .phase_space import (
    BranchQuantities,
    GCSState,
    inactive_branch,
    product_state,
    qrdm,
)

ENGINES = ("closed-form", "ode", "oracle")
TOL_CLOSED = 1e-6
TOL_ODE = 1e-4


# ---------------------------------------------------------------------------
# initial-state presets


def plus_state_qrdm(n_qubits: int) -> np.ndarray:
    d = 2**n_qubits
    return np.full((d, d), 1.0 / d, dtype=complex)


def vacuum(n_modes: int = 1) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(2 * n_modes), np.eye(2 * n_modes)


def squeezed_thermal(N_p: float, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-mode squeezed thermal state ``(1 + 2 N_p) diag(s, 1/s)``."""
    if N_p < 0 or s <= 0:
        raise ConfigError("squeezed-thermal needs N_p >= 0 and s > 0")
    return np.zeros(2), (1 + 2 * N_p) * np.diag([s, 1 / s])


def displaced_squeezed(x0: float, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-mode squeezed vacuum ``diag(s, 1/s)`` displaced to ``(x0, 0)``."""
    if s <= 0:
        raise ConfigError("displaced-squeezed needs s > 0")
    return np.array([x0, 0.0]), np.diag([s, 1 / s])


# ---------------------------------------------------------------------------
# configuration types


@dataclass
class MeasurementSpec:
    """One measurement request.

    ``kind`` is ``"qubit"``, ``"homodyne"``, ``"heterodyne"``,
    ``"general-dyne"`` or ``"joint"`` (qubit POVM together with a dyne
    detection).  Qubit POVMs are Pauli measurements of one qubit (``axis``
    ``x``, ``y`` or ``z``) or the full ``"computational"`` basis.  ``at``
    selects the schedule time (default: last point).
    """

    kind: str
    name: str = ""
    axis: str = "x"
    qubit: int = 0
    phi: float = 0.0
    eta: float = 1.0
    sigma_m: np.ndarray | None = None
    mode: int = 0
    at: float | None = None
    grid: tuple | None = None
    region: tuple | None = None
    post_qrdm: bool = False
    wigner: tuple | None = None
    samples: int = 0
    frame_phi: bool = False

    def __post_init__(self):
        kinds = ("qubit", "homodyne", "heterodyne", "general-dyne", "joint")
        if self.kind not in kinds:
            raise ConfigError(f"measurement kind must be one of {kinds}, got {self.kind!r}")
        if self.kind in ("homodyne", "heterodyne", "joint") and not 0 < self.eta <= 1:
            raise ConfigError(f"measurement efficiency eta must lie in (0, 1], got {self.eta}")
        if not self.name:
            self.name = self.kind


@dataclass
class ScenarioConfig:
    name: str
    model: HybridModel
    r0: np.ndarray
    sigma0: np.ndarray
    qrdm0: np.ndarray
    times: np.ndarray
    engine: str = "ode"
    measurements: list = field(default_factory=list)
    outputs: tuple = ("trajectory", "qrdm")
    seed: int = 0
    builtin: str | None = None
    params: dict = field(default_factory=dict)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    n_max: int = 40
    check_regressions: bool = True

    def __post_init__(self):
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size == 0 or np.any(np.diff(self.times) <= 0):
            raise ConfigError("schedule must be a strictly increasing, non-empty list of times")
        if self.times[0] < 0:
            raise ConfigError("schedule times must be non-negative")
        state = self.initial_state()  # validates shapes
        if state.n_modes != self.model.n_modes or state.n_qubits != self.model.n_qubits:
            raise ConfigError("initial state and model dimensions differ")
        if self.engine == "closed-form" and not self.model.is_linear and self.needs_coherences():
            raise EngineIncompatibility(
                "closed-form engine needs linear coupling unless only diagonal branches are requested"
            )

    def initial_state(self) -> GCSState:
        try:
            return product_state(self.r0, self.sigma0, self.qrdm0, self.model.n_qubits)
        except ValueError as exc:
            raise ConfigError(f"initial state: {exc}") from exc

    def needs_coherences(self) -> bool:
        """Whether any request depends on off-diagonal branches."""
        if "trajectory" in self.outputs or "qrdm" in self.outputs:
            return True
        for m in self.measurements:
            if m.kind == "joint" or (m.kind == "qubit" and m.axis not in ("z", "computational")):
                return True
            if m.post_qrdm:
                return True
        return False

    def at_index(self, at: float | None) -> int:
        if at is None:
            return len(self.times) - 1
        idx = int(np.argmin(np.abs(self.times - at)))
        if abs(self.times[idx] - at) > 1e-9 * max(1.0, abs(at)):
            raise ConfigError(f"measurement time {at} is not on the schedule")
        return idx


# ---------------------------------------------------------------------------
# built-in scenarios


def scenario_stern_gerlach(f_q=0.5, f_u=2.0, s=2.0, N_p=0.8, Gamma_x=0.1, Gamma_z=0.8, omega_q=0.0,
                           t_end=2 * np.pi, n_times=201, engine="closed-form") -> ScenarioConfig:
    """Qubit-controlled force on a harmonic oscillator with momentum diffusion.

    ``H_m = 1``, ``r_m = (f_u, 0)``, ``r_q = (f_q, 0)``, ``D = diag(0, 2 Gamma_x)``,
    qubit splitting ``omega_q`` and dephasing ``Gamma_z``; initial state
    ``|+> (x) squeezed-thermal(N_p, s)``.  The default schedule has 201
    points on ``[0, 2 pi]`` so that the half period, where the post-measurement
    Wigner function is recorded, lies on the grid.
    """
    if s <= 0 or N_p < 0 or Gamma_x < 0 or Gamma_z < 0:
        raise ConfigError("Stern-Gerlach needs s > 0 and non-negative N_p, Gamma_x, Gamma_z")
    model = HybridModel(
        1, 1, np.eye(2), np.array([f_u, 0.0]),
        H_q=(np.zeros((2, 2)),), r_q=(np.array([f_q, 0.0]),),
        H_q0=[omega_q], Gamma_z=[Gamma_z], D=np.diag([0.0, 2 * Gamma_x]),
        meta={"scenario": "stern-gerlach"},
    )
    r0, sigma0 = squeezed_thermal(N_p, s)
    params = dict(f_q=f_q, f_u=f_u, s=s, N_p=N_p, Gamma_x=Gamma_x, Gamma_z=Gamma_z, omega_q=omega_q)
    times = np.linspace(0.0, t_end, int(n_times))
    t_wigner = float(times[np.argmin(np.abs(times - np.pi))])
    meas = [
        MeasurementSpec("qubit", name="px", axis="x"),
        MeasurementSpec("qubit", name="post_wigner", axis="x", at=t_wigner,
                        wigner=((-4.0, 8.0, 101), (-5.0, 5.0, 101))),
    ]
    cfg = ScenarioConfig("stern-gerlach", model, r0, sigma0, plus_state_qrdm(1), times, engine,
                         meas, ("trajectory", "qrdm"), builtin="stern-gerlach", params=params)
    return cfg


def scenario_dispersive(chi=1.0, kappa=3.0, eta=0.6, x0=20.0, s=1.0, Gamma_z=0.0, omega=0.0,
                        frame="rotating", include_xy=False, n_times=101, engine="ode",
                        p_grid=(-30.0, 30.0, 601)) -> ScenarioConfig:
    """Two qubits dispersively coupled to a lossy cavity, read out by momentum homodyne.

    ``H_q = (chi / 2) 1`` per qubit, photon loss ``kappa``; in the rotating
    frame ``H_m = 0``, in the lab frame ``H_m = omega 1`` and the homodyne
    angle co-rotates so that the rotating-frame momentum is measured.  With
    ``include_xy`` the qubit exchange term is kept through its
    ``sigma_z sigma_z`` part.  The schedule ends at the time of maximal
    branch separation.
    """
    if chi <= 0 or kappa < 0 or s <= 0 or Gamma_z < 0:
        raise ConfigError("dispersive scenario needs chi > 0, s > 0, kappa >= 0, Gamma_z >= 0")
    if not 0 < eta <= 1:
        raise ConfigError("eta must lie in (0, 1]")
    if frame not in ("rotating", "lab"):
        raise ConfigError("frame must be 'rotating' or 'lab'")
    H_m = np.zeros((2, 2)) if frame == "rotating" else omega * np.eye(2)
    D, E = noise_from_B(loss_B(kappa))
    zz = np.zeros((2, 2))
    if include_xy:
        # exchange acts as a relative phase chi between odd and even sectors
        zz[0, 1] = -chi / 2
    model = HybridModel(
        1, 2, H_m, np.zeros(2), H_q=(0.5 * chi * np.eye(2),) * 2, r_q=(np.zeros(2),) * 2,
        Gamma_z=[Gamma_z] * 2, D=D, E=E, zz=zz, meta={"scenario": "dispersive-entanglement", "frame": frame},
    )
    r0, sigma0 = displaced_squeezed(x0, s)
    t_max = R.tau_max(chi, kappa) if kappa > 0 else np.pi / (2 * chi)
    times = np.linspace(0.0, t_max, int(n_times))
    lo, hi, n = p_grid
    meas = [
        MeasurementSpec("homodyne", name="p_homodyne", phi=np.pi / 2, eta=eta,
                        grid=((lo, hi, n),), region=(-1.0, 1.0), post_qrdm=True, frame_phi=frame == "lab"),
    ]
    params = dict(chi=chi, kappa=kappa, eta=eta, x0=x0, s=s, Gamma_z=Gamma_z, omega=omega)
    return ScenarioConfig("dispersive-entanglement", model, r0, sigma0, plus_state_qrdm(2), times, engine,
                          meas, ("trajectory", "qrdm", "widths"), builtin="dispersive-entanglement",
                          params=dict(params, frame=frame, include_xy=include_xy))


BUILTINS = {
    "stern-gerlach": scenario_stern_gerlach,
    "dispersive-entanglement": scenario_dispersive,
}


def builtin(name: str, **params) -> ScenarioConfig:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise ConfigError(f"unknown built-in scenario {name!r}; known: {sorted(BUILTINS)}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ConfigError(f"built-in {name!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# engines


def _oracle_trajectory(cfg: ScenarioConfig) -> tuple[Trajectory, list]:
    from .oracle import FockConfig, build_initial_state, evolve, extract_phase_space

    if cfg.model.n_modes > 2:
        raise EngineIncompatibility("the Fock oracle handles at most two modes")
    fcfg = FockConfig(n_max=cfg.n_max)
    rho0 = build_initial_state(cfg.r0, cfg.sigma0, cfg.qrdm0, fcfg)
    rhos = evolve(cfg.model, rho0, cfg.times, fcfg)
    states = []
    template = cfg.initial_state()
    for t, rho in zip(cfg.times, rhos):
        branches = {}
        for J, K in template.keys():
            try:
                r, sigma, amp = extract_phase_space(rho, J, K, method="moments" if J == K else "stencil")
            except NumericalFailure:
                branches[(J, K)] = inactive_branch(template.dim)
                continue
            if J == K:
                branches[(J, K)] = BranchQuantities(sigma.real, r.real, complex(np.log(amp.real)))
            else:
                branches[(J, K)] = BranchQuantities(sigma, r, complex(np.log(amp)))
        states.append(template.with_branches(branches, float(t)))
    return Trajectory(cfg.times, states, {"method": "fock-oracle", "n_max": cfg.n_max}), rhos


def simulate(cfg: ScenarioConfig) -> Trajectory:
    """Evolve the configured initial state over the schedule with the chosen engine."""
    state0 = cfg.initial_state()
    if cfg.engine == "ode":
        return integrate(cfg.model, state0, cfg.times, cfg.integrator)
    if cfg.engine == "oracle":
        return _oracle_trajectory(cfg)[0]
    if cfg.model.is_linear:
        return closed_form_trajectory(cfg.model, state0, cfg.times, cfg.integrator)
    if cfg.needs_coherences():
        raise EngineIncompatibility("closed-form engine cannot produce coherences for quadratic coupling")
    dim = state0.dim
    states = []
    for t in cfg.times:
        diag = diagonal_closed_form(cfg.model, state0, t - state0.time, cfg.integrator)
        branches = {k: diag.get(k, inactive_branch(dim)) for k in state0.keys()}
        states.append(state0.with_branches(branches, float(t)))
    return Trajectory(cfg.times, states, {"method": "closed-form-diagonal"})


# ---------------------------------------------------------------------------
# measurement evaluation


@dataclass
class Table:
    """Column-oriented table; complex columns are split on output."""

    columns: list
    rows: list

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])


def _grid(spec) -> np.ndarray:
    lo, hi, n = spec
    if int(n) < 1 or hi < lo:
        raise ConfigError(f"invalid grid specification {spec}")
    return np.linspace(float(lo), float(hi), int(n))


def _detector(m: MeasurementSpec, n_modes: int, tau: float, model: HybridModel) -> GeneralDyne:
    if m.kind in ("homodyne", "joint"):
        phi = m.phi
        if m.frame_phi:
            # measure a rotating-frame quadrature in the lab frame
            omega = model.H_m[0, 0]
            phi = m.phi - omega * tau
        return homodyne_cov(phi, m.eta, n_modes, m.mode)
    if m.kind == "heterodyne":
        return heterodyne(m.eta, n_modes)
    if m.sigma_m is None:
        raise ConfigError(f"measurement {m.name!r}: general-dyne needs sigma_m")
    try:
        return general_dyne(m.sigma_m)
    except ValueError as exc:
        raise ConfigError(f"measurement {m.name!r}: {exc}") from exc


def _povm(m: MeasurementSpec, n_qubits: int):
    if m.axis == "computational":
        return computational_povm(n_qubits)
    try:
        return pauli_povm(m.axis, m.qubit, n_qubits)
    except ValueError as exc:
        raise ConfigError(f"measurement {m.name!r}: {exc}") from exc


def _dyne_points(det: GeneralDyne, m: MeasurementSpec) -> np.ndarray:
    if m.grid is None:
        raise ConfigError(f"measurement {m.name!r} needs an outcome grid")
    axes = [_grid(g) for g in m.grid]
    if len(axes) != det.n_outcomes:
        raise ConfigError(f"measurement {m.name!r}: grid has {len(axes)} axes, detector has {det.n_outcomes} outcomes")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def evaluate_measurements(cfg: ScenarioConfig, traj: Trajectory) -> dict[str, Table]:
    tables: dict[str, Table] = {}
    rng = np.random.default_rng(cfg.seed)
    nq, nm = cfg.model.n_qubits, cfg.model.n_modes
    for m in cfg.measurements:
        if m.kind == "qubit":
            povm = _povm(m, nq)
            rows = []
            sel = range(len(traj)) if m.at is None else [cfg.at_index(m.at)]
            for i in sel:
                t, st = traj.times[i], traj.states[i]
                for out in qubit_measure(st, povm):
                    rows.append([t, out.label, out.probability])
            tables[m.name] = Table(["tau", "outcome", "probability"], rows)
            if m.wigner is not None:
                st = traj[cfg.at_index(m.at)]
                xs, ps = _grid(m.wigner[0]), _grid(m.wigner[1])
                X, P = np.meshgrid(xs, ps, indexing="ij")
                pts = np.stack([X, P], axis=-1)
                if nm != 1:
                    raise ConfigError("Wigner grids are available for single-mode scenarios")
                rows = []
                for out in qubit_measure(st, povm):
                    if out.state.empty:
                        continue
                    W = out.state.wigner(pts)
                    rows.extend([out.label, x, p, w] for x, p, w in zip(X.ravel(), P.ravel(), W.ravel()))
                tables[m.name + "_wigner"] = Table(["outcome", "x", "p", "value"], rows)
            continue
        idx = cfg.at_index(m.at)
        st, tau = traj[idx], traj.times[idx]
        det = _detector(m, nm, tau, cfg.model)
        pts = _dyne_points(det, m)
        names = ["y"] if det.n_outcomes == 1 else [f"y{i}" for i in range(det.n_outcomes)]
        if m.kind == "joint":
            povm = _povm(m, nq)
            dens = joint_measurement_density(st, det, povm, pts)
            rows = [[lab, *y, d] for lab, row in zip(povm.labels, dens) for y, d in zip(pts, row)]
            tables[m.name] = Table(["outcome", *names, "density"], rows)
        else:
            dens = generaldyne_density(st, det, pts)
            tables[m.name] = Table([*names, "density"], [[*y, d] for y, d in zip(pts, dens)])
        if m.region is not None:
            prob = postselect_success_probability(st, det, m.region)
            tables[m.name + "_postselect"] = Table(["tau", "lo", "hi", "probability"],
                                                   [[tau, m.region[0], m.region[1], prob]])
        if m.post_qrdm:
            rows = []
            d = 2**nq
            for y in pts:
                post = generaldyne_post_qrdm(st, det, y)
                rho = post.normalized if post.normalized is not None else np.full((d, d), np.nan)
                neg = negativity_two_qubit(rho) if (nq == 2 and not post.flagged) else np.nan
                rows.append([*y, post.density, int(post.flagged), neg, *rho.ravel()])
            ent = [f"rho_{a}{b}" for a in range(d) for b in range(d)]
            tables[m.name + "_post_qrdm"] = Table([*names, "density", "flagged", "negativity", *ent], rows)
        if m.samples:
            draws = sample_outcomes(st, det, int(m.samples), rng)
            tables[m.name + "_samples"] = Table(names, [list(r) for r in draws])
    return tables


def trajectory_tables(cfg: ScenarioConfig, traj: Trajectory) -> dict[str, Table]:
    tables = {}
    if "trajectory" in cfg.outputs:
        cols = ["tau", "key", "active", "r0", "contrast", "phase"]
        dim = traj[0].dim
        cols += [f"mean{i}" for i in range(dim)] + [f"sigma{i}{j}" for i in range(dim) for j in range(dim)]
        rows = []
        for t, st in zip(traj.times, traj.states):
            for key in st.keys():
                q = st[key]
                label = _key_str(key)
                rows.append([t, label, int(q.active), q.r0, q.contrast if q.active else np.inf,
                             q.phase if q.active else 0.0, *q.r, *q.sigma.ravel()])
        tables["trajectory"] = Table(cols, rows)
    if "qrdm" in cfg.outputs:
        d = 2**cfg.model.n_qubits
        cols = ["tau"] + [f"rho_{a}{b}" for a in range(d) for b in range(d)]
        tables["qrdm"] = Table(cols, [[t, *qrdm(st).ravel()] for t, st in zip(traj.times, traj.states)])
    if cfg.builtin == "stern-gerlach" and cfg.model.n_qubits == 1:
        # interference observables of the (+,-) block: C, phi and sigma_x outcome probabilities
        rows = []
        for t, st in zip(traj.times, traj.states):
            q = st[((1,), (-1,))]
            C = q.contrast - np.log(2) if q.active else np.inf
            phi = q.phase if q.active else 0.0
            off = 2 * qrdm(st)[0, 1].real
            rows.append([t, C, phi, 0.5 * (1 + off), 0.5 * (1 - off)])
        tables["interference"] = Table(["tau", "C", "phi", "px_plus", "px_minus"], rows)
    if "widths" in cfg.outputs:
        # homodyne variances of every diagonal branch along the schedule
        m = next((x for x in cfg.measurements if x.kind in ("homodyne", "joint")), None)
        if m is not None:
            labels = traj[0].labels
            cols = ["tau"] + [f"width_{_label_str(j)}" for j in labels]
            rows = []
            for t, st in zip(traj.times, traj.states):
                det = _detector(m, cfg.model.n_modes, t, cfg.model)
                P = det.projector
                row = [t]
                for j in labels:
                    q = st[(j, j)]
                    row.append(float((P @ q.sigma.real @ P.T + det.noise)[0, 0]) if q.active else np.nan)
                rows.append(row)
            tables["widths"] = Table(cols, rows)
    return tables


def _label_str(j) -> str:
    return "".join("+" if v == 1 else "-" for v in j)


def _key_str(key) -> str:
    return f"{_label_str(key[0])}|{_label_str(key[1])}"


# ---------------------------------------------------------------------------
# regression checks for the built-ins


@dataclass
class RegressionResult:
    name: str
    max_abs_diff: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_abs_diff <= self.tolerance)


def _sg_checks(cfg: ScenarioConfig, traj: Trajectory, tol: float) -> list[RegressionResult]:
    p = cfg.params
    fq, fu, s, Np, Gx, Gz, wq = (p[k] for k in ("f_q", "f_u", "s", "N_p", "Gamma_x", "Gamma_z", "omega_q"))
    key = ((1,), (-1,))
    out = {name: 0.0 for name in ("sg_sigma", "sg_r_on", "sg_r_off", "sg_contrast", "sg_phase", "sg_px")}
    for t, st in zip(traj.times, traj.states):
        q = st[key]
        out["sg_sigma"] = max(out["sg_sigma"], np.abs(q.sigma - R.sg_sigma(t, s, Np, Gx)).max())
        for j in (1, -1):
            qd = st[((j,), (j,))]
            out["sg_r_on"] = max(out["sg_r_on"], np.abs(qd.r - R.sg_r_on(t, fu, fq, j)).max())
            out["sg_sigma"] = max(out["sg_sigma"], np.abs(qd.sigma - R.sg_sigma(t, s, Np, Gx)).max())
        out["sg_r_off"] = max(out["sg_r_off"], np.abs(q.r - R.sg_r_off(t, fu, fq, s, Np, Gx)).max())
        out["sg_contrast"] = max(out["sg_contrast"], abs(q.contrast - np.log(2) - R.sg_contrast(t, fq, s, Np, Gx, Gz)))
        dphi = np.angle(np.exp(1j * (q.phase - R.sg_phase(t, fq, fu, wq))))
        out["sg_phase"] = max(out["sg_phase"], abs(dphi))
        rho = qrdm(st)
        px = 0.5 * (1 + 2 * rho[0, 1].real)
        out["sg_px"] = max(out["sg_px"], abs(px - R.sg_px_plus(t, fq, fu, s, Np, Gx, Gz, wq)))
    return [RegressionResult(k, float(v), tol) for k, v in out.items()]


def _dispersive_checks(cfg: ScenarioConfig, traj: Trajectory, tol: float) -> list[RegressionResult]:
    p = cfg.params
    chi, kappa, eta, x0, s = (p[k] for k in ("chi", "kappa", "eta", "x0", "s"))
    m = next(x for x in cfg.measurements if x.kind == "homodyne")
    w_err = 0.0
    for t, st in zip(traj.times, traj.states):
        det = _detector(m, 1, t, cfg.model)
        P = det.projector
        for j in st.labels:
            var = float((P @ st[(j, j)].sigma.real @ P.T + det.noise)[0, 0])
            ref = R.sigma_o(t, s, eta, kappa) if j[0] != j[1] else R.sigma_e(t, s, eta, kappa, chi)
            w_err = max(w_err, abs(var - ref))
    st, t = traj[-1], traj.times[-1]
    det = _detector(m, 1, t, cfg.model)
    ys = _grid(m.grid[0])
    dens = generaldyne_density(st, det, ys)
    ref = np.array([R.dispersive_p_density(y, t, chi, kappa, x0, s, eta) for y in ys])
    return [RegressionResult("homodyne_widths", w_err, tol),
            RegressionResult("dispersive_p_density", float(np.abs(dens - ref).max()), tol)]


def regression_checks(cfg: ScenarioConfig, traj: Trajectory) -> list[RegressionResult]:
    if cfg.builtin is None or not cfg.check_regressions:
        return []
    tol = TOL_CLOSED if cfg.engine == "closed-form" else TOL_ODE
    if cfg.builtin == "stern-gerlach":
        return _sg_checks(cfg, traj, tol)
    if cfg.builtin == "dispersive-entanglement":
        return _dispersive_checks(cfg, traj, tol)
    return []


# ---------------------------------------------------------------------------
# oracle comparison


def oracle_comparison(cfg: ScenarioConfig, traj: Trajectory) -> tuple[Table, float]:
    """Side-by-side branch quantities from the Fock oracle and the configured engine."""
    o_cfg = ScenarioConfig(**{**cfg.__dict__, "engine": "oracle", "measurements": [], "check_regressions": False})
    o_traj, _ = _oracle_trajectory(o_cfg)
    rows = []
    worst = 0.0
    for t, a, b in zip(cfg.times, traj.states, o_traj.states):
        for key in a.keys():
            qa, qb = a[key], b[key]
            if not (qa.active and qb.active):
                continue
            pairs = [("amplitude", [qa.amplitude], [qb.amplitude]), ("r", qa.r, qb.r),
                     ("sigma", qa.sigma.ravel(), qb.sigma.ravel())]
            for name, va, vb in pairs:
                for i, (x, y) in enumerate(zip(va, vb)):
                    diff = abs(complex(x) - complex(y))
                    worst = max(worst, diff)
                    rows.append([t, _key_str(key), f"{name}[{i}]", complex(x), complex(y), diff])
    return Table(["tau", "key", "quantity", "engine", "oracle", "abs_diff"], rows), worst


# ---------------------------------------------------------------------------
# runner


@dataclass
class RunResult:
    config: ScenarioConfig
    trajectory: Trajectory
    tables: dict
    regressions: list
    oracle_max_diff: float | None
    wall_time: float

    @property
    def failed_regressions(self) -> list[RegressionResult]:
        return [r for r in self.regressions if not r.passed]


def run_scenario(cfg: ScenarioConfig, with_oracle: bool = False, strict: bool = True) -> RunResult:
    """Simulate, evaluate measurements and regressions, optionally compare to the oracle.

    With ``strict`` a failed regression raises :class:`RegressionFailure`
    after all tables have been computed (available as ``exc.result``).
    """
    start = _time.perf_counter()
    traj = simulate(cfg)
    tables = trajectory_tables(cfg, traj)
    tables.update(evaluate_measurements(cfg, traj))
    regs = regression_checks(cfg, traj)
    if regs:
        tables["regressions"] = Table(["name", "max_abs_diff", "tolerance", "passed"],
                                      [[r.name, r.max_abs_diff, r.tolerance, int(r.passed)] for r in regs])
    o_diff = None
    if with_oracle:
        tables["oracle_comparison"], o_diff = oracle_comparison(cfg, traj)
    result = RunResult(cfg, traj, tables, regs, o_diff, _time.perf_counter() - start)
    if strict and result.failed_regressions:
        exc = RegressionFailure("regression check failed: " + ", ".join(
            f"{r.name} ({r.max_abs_diff:.2e} > {r.tolerance:.0e})" for r in result.failed_regressions))
        exc.result = result
        raise exc
    return result
