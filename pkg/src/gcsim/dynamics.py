"""Time evolution of Gaussian-branched cat states.

Two routes are provided:

* :func:`integrate` solves the branch ODEs (Riccati equation for the complex
  covariance, linear equations for the first moments and the QRDM exponent)
  with an adaptive Dormand-Prince scheme or a fixed-step RK4;
* :func:`closed_form_linear_unitary`, :func:`closed_form_linear_open` and
  :func:`diagonal_closed_form` evaluate exact solutions where they exist,
  with Lyapunov integrals computed by adaptive Gauss-Kronrod quadrature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec, solve_ivp
from scipy.linalg import expm

from .errors import EngineIncompatibility, NumericalFailure
from .model import HybridModel, dephasing_rate, resolve_branch
from .phase_space import (
    PRUNE_LOG,
    BranchQuantities,
    GCSState,
    Key,
    Label,
    inactive_branch,
    symplectic_form,
    validate_state,
)

log = logging.getLogger(__name__)

METHODS = ("RK45", "DOP853", "rk4")


@dataclass(frozen=True)
class IntegratorConfig:
    """Integrator and quadrature settings.

    ``method`` is one of ``"RK45"`` (Dormand-Prince 5(4), default),
    ``"DOP853"`` (Dormand-Prince 8(5,3)) or ``"rk4"`` (classical fixed step,
    step ``max_step``).
    """

    method: str = "RK45"
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = np.inf
    quadrature_tol: float = 1e-10
    norm_tol: float = 1e-9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown integrator method {self.method!r}; choose from {METHODS}")
        for name in ("rel_tol", "abs_tol", "max_step", "quadrature_tol", "norm_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.method == "rk4" and not np.isfinite(self.max_step):
            raise ValueError("fixed-step rk4 needs a finite max_step")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list[GCSState]
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if len(self.times) != len(self.states):
            raise ValueError("times and states differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i) -> GCSState:
        return self.states[i]

    def series(self, key: Key, attr: str) -> np.ndarray:
        """Stack one branch attribute (``sigma``, ``r``, ``r0``) along time."""
        return np.array([getattr(s[key], attr) for s in self.states])


# ---------------------------------------------------------------------------
# right-hand sides


@dataclass(frozen=True)
class _KeyCoefficients:
    """Pre-resolved constant matrices of the branch ODE for one key."""

    M: np.ndarray  # Omega (H_J + H_K + 2E) / 2
    Hd: np.ndarray  # H_J - H_K
    OHdO: np.ndarray  # Omega Hd Omega
    D: np.ndarray
    lin: np.ndarray  # Omega (2d - r_J - r_K) / 2
    dr: np.ndarray  # r_J - r_K
    const: complex  # -(i/2)(c_J - c_K) - dephasing rate

    @classmethod
    def build(cls, model: HybridModel, J: Label, K: Label) -> "_KeyCoefficients":
        om = symplectic_form(model.n_modes)
        bj, bk = resolve_branch(model, J), resolve_branch(model, K)
        Hd = bj.H - bk.H
        return cls(
            M=0.5 * om @ (bj.H + bk.H + 2.0 * model.E),
            Hd=Hd,
            OHdO=om @ Hd @ om,
            D=model.D,
            lin=0.5 * om @ (2.0 * model.d - bj.r - bk.r),
            dr=bj.r - bk.r,
            const=-0.5j * (bj.const - bk.const) - dephasing_rate(model, J, K),
        )

    def rhs(self, sigma, r, r0=None):
        # M^T = (H_J + H_K + 2E^T) Omega^T / 2, so sigma M^T carries the transpose term
        sH = sigma @ self.Hd
        ds = self.M @ sigma + sigma @ self.M.T + self.D - 0.5j * (sH @ sigma + self.OHdO)
        dr = self.M @ r - 0.5j * sH @ r + self.lin + 0.5j * sigma @ self.dr
        dr0 = (
            -0.5j * r @ self.Hd @ r
            + 1j * self.dr @ r
            - 0.25j * np.trace(sH)
            + self.const
        )
        return ds, dr, dr0


def rhs_open(model: HybridModel, J, K, q: BranchQuantities) -> BranchQuantities:
    """Time derivatives of ``(sigma_JK, r_JK, r0_JK)`` under open dynamics.

    With ``D = E = d = Gamma_z = 0`` this is the unitary set of equations.
    The returned object reuses :class:`BranchQuantities` as a container for
    the derivatives.
    """
    co = _KeyCoefficients.build(model, J, K)
    ds, dr, dr0 = co.rhs(q.sigma, q.r)
    return BranchQuantities(ds, dr, dr0)


def _pack(sigma, r, r0) -> np.ndarray:
    z = np.concatenate([np.asarray(sigma, complex).ravel(), np.asarray(r, complex), [complex(r0)]])
    return z.view(np.float64).copy()


def _unpack(y, dim):
    z = np.ascontiguousarray(y).view(np.complex128)
    sigma = z[: dim * dim].reshape(dim, dim)
    r = z[dim * dim: dim * dim + dim]
    return sigma, r, z[-1]


def _rk4(f, t_grid, y0, h_max):
    out = np.empty((len(t_grid), y0.size))
    out[0] = y0
    y = y0.copy()
    for i in range(1, len(t_grid)):
        t0, t1 = t_grid[i - 1], t_grid[i]
        n = max(1, int(np.ceil((t1 - t0) / h_max - 1e-12)))
        h = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = f(t, y)
            k2 = f(t + h / 2, y + h / 2 * k1)
            k3 = f(t + h / 2, y + h / 2 * k2)
            k4 = f(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[i] = y
    return out


def _integrate_key(co: _KeyCoefficients, q0: BranchQuantities, times, cfg: IntegratorConfig, key):
    """Integrate one branch; returns per-time BranchQuantities."""
    dim = q0.sigma.shape[0]
    n_sig = dim * dim

    def f(t, y):
        sigma, r, r0 = _unpack(y, dim)
        ds, dr, dr0 = co.rhs(sigma, r)
        return _pack(ds, dr, dr0)

    y0 = _pack(q0.sigma, q0.r, q0.r0)
    idx_re_r0 = 2 * (n_sig + dim)

    if cfg.method == "rk4":
        ys = _rk4(f, times, y0, cfg.max_step)
        t_end = times[-1]
    else:
        def prune_event(t, y):
            return y[idx_re_r0] - PRUNE_LOG

        prune_event.terminal = True
        prune_event.direction = -1
        with np.errstate(over="raise", invalid="raise"):
            try:
                sol = solve_ivp(
                    f, (times[0], times[-1]), y0, method=cfg.method, t_eval=times,
                    rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
                    events=prune_event,
                )
            except FloatingPointError as exc:
                raise NumericalFailure(f"overflow integrating branch {key}: {exc}") from exc
        if sol.status == -1:
            raise NumericalFailure(f"integration failed for branch {key} near tau={sol.t[-1] if sol.t.size else times[0]:.6g}: {sol.message}")
        ys = sol.y.T
        t_end = sol.t[-1] if sol.status == 1 and sol.t.size else times[-1]
        if sol.status == 1:
            t_end = sol.t_events[0][0]
    out = []
    for i, t in enumerate(times):
        if i >= len(ys) or t > t_end:
            out.append(inactive_branch(dim))
            continue
        if not np.all(np.isfinite(ys[i])):
            raise NumericalFailure(f"non-finite values in branch {key} at tau={t:.6g}")
        sigma, r, r0 = _unpack(ys[i], dim)
        if r0.real < PRUNE_LOG:
            out.append(inactive_branch(dim))
            continue
        sigma = 0.5 * (sigma + sigma.T)
        if key[0] == key[1]:
            sigma, r, r0 = sigma.real.astype(complex), r.real.astype(complex), complex(r0.real)
        out.append(BranchQuantities(sigma, r, r0))
    return out


def integrate(model: HybridModel, state0: GCSState, tau_grid, cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate every stored branch of ``state0`` over ``tau_grid``.

    Branch keys evolve independently.  Inactive branches stay inactive;
    branches whose weight drops below ``1e-300`` are pruned.  The diagonal
    weights are conserved exactly by the equations; a drift above
    ``cfg.norm_tol`` is reported as :class:`NumericalFailure`.
    """
    cfg = cfg or IntegratorConfig()
    times = np.asarray(tau_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("tau_grid must be a non-empty 1-D array")
    if np.any(np.diff(times) <= 0):
        raise ValueError("tau_grid must be strictly increasing")
    _check_dims(model, state0)
    per_key = {}
    dim = state0.dim
    for key in state0.keys():
        q0 = state0.branches[key]
        if not q0.active:
            per_key[key] = [inactive_branch(dim)] * len(times)
            continue
        if times.size == 1 or np.all(times == times[0]):
            per_key[key] = [q0] * len(times)
            continue
        grid = times if times[0] == state0.time else np.concatenate([[state0.time], times])
        if grid[0] > times[0]:
            raise ValueError("tau_grid starts before the state's time")
        co = _KeyCoefficients.build(model, *key)
        series = _integrate_key(co, q0, grid, cfg, key)
        per_key[key] = series[len(grid) - len(times):]
    states = [
        state0.with_branches({k: per_key[k][i] for k in per_key}, float(t))
        for i, t in enumerate(times)
    ]
    w0 = _diag_weight(state0)
    drift = max(abs(_diag_weight(s) - w0) for s in states)
    if drift > cfg.norm_tol:
        raise NumericalFailure(f"normalisation drift {drift:.3e} exceeds {cfg.norm_tol:.1e}")
    return Trajectory(times, states, {"method": cfg.method, "rel_tol": cfg.rel_tol,
                                      "abs_tol": cfg.abs_tol, "norm_drift": drift})


def _diag_weight(state: GCSState) -> float:
    return float(sum(state[(j, j)].amplitude.real for j in state.labels))


def _check_dims(model: HybridModel, state: GCSState):
    if model.n_modes != state.n_modes or model.n_qubits != state.n_qubits:
        raise ValueError(
            f"model is {model.n_modes} modes x {model.n_qubits} qubits but state is "
            f"{state.n_modes} x {state.n_qubits}"
        )


# ---------------------------------------------------------------------------
# closed forms


def symplectic_exp(M, tau: float) -> np.ndarray:
    """``exp(tau Omega M)`` (symplectic when ``M`` is symmetric)."""
    M = np.asarray(M, dtype=float)
    return expm(tau * symplectic_form(M.shape[0] // 2) @ M)


def _require_product(state0: GCSState):
    """Return ``(sigma0, r0)`` shared by all active branches of a product state."""
    active = [state0.branches[k] for k in state0.active_keys()]
    ref = active[0]
    same = all(
        np.array_equal(q.sigma, ref.sigma) and np.array_equal(q.r, ref.r) for q in active[1:]
    )
    if not same or np.any(ref.sigma.imag) or np.any(ref.r.imag):
        raise EngineIncompatibility(
            "closed forms need a product initial state (Gaussian modes times a qubit state)"
        )
    return ref.sigma.real, ref.r.real


def _invert(A: np.ndarray, what: str) -> np.ndarray:
    if np.linalg.cond(A) > 1e12:
        raise EngineIncompatibility(
            f"{what} is singular; closed forms require its inverse, use integrate() instead"
        )
    return np.linalg.inv(A)


class _LinearFlow:
    """Key-independent pieces of the linear-coupling solution at one time."""

    def __init__(self, A: np.ndarray, D: np.ndarray, tau: float, quad_tol: float, table_v: bool):
        self.A = A
        self.om = symplectic_form(A.shape[0] // 2)
        self.gen = self.om @ A
        self.tau = tau
        self.S = expm(tau * self.gen)
        dim = A.shape[0]
        self.has_noise = bool(np.any(D))
        I = np.eye(dim)
        if self.has_noise and tau > 0:
            if table_v:
                Ainv = np.linalg.inv(A)

                def integrand(v):
                    Sv = expm(v * self.gen)
                    Dv = Sv @ D @ Sv.T
                    dv = self.om @ (Sv - I) @ Ainv  # Omega delta(v) per unit Delta
                    return np.concatenate([Dv.ravel(), (Dv @ self.om @ Sv).ravel(), (dv.T @ Dv @ dv).ravel()])

                vals, _ = quad_vec(integrand, 0.0, tau, epsabs=quad_tol, epsrel=quad_tol)
                k = dim * dim
                self.int_SDS = vals[:k].reshape(dim, dim)
                self.int_SDSOS = vals[k:2 * k].reshape(dim, dim)
                self.int_dDd = vals[2 * k:].reshape(dim, dim)
            else:
                def integrand(v):
                    Sv = expm(v * self.gen)
                    SD = Sv @ D
                    return np.concatenate([(SD @ Sv.T).ravel(), SD.ravel()])

                vals, _ = quad_vec(integrand, 0.0, tau, epsabs=quad_tol, epsrel=quad_tol)
                k = dim * dim
                self.int_SDS = vals[:k].reshape(dim, dim)
                int_SD = vals[k:].reshape(dim, dim)
                self.int_X = self.int_SDS - int_SD  # int S D (S^T - 1)
                self.int_Y = self.int_SDS - int_SD - int_SD.T + tau * D  # int (S-1) D (S^T-1)
        else:
            z = np.zeros((dim, dim))
            self.int_SDS = self.int_X = self.int_Y = self.int_SDSOS = self.int_dDd = z


def _linear_solution(model, state0, tau, quad_tol, table_v=False, unitary_form=False):
    sigma0, r0 = _require_product(state0)
    A = model.H_m + model.E
    Ainv = _invert(A, "A = H_m + E")
    flow = _LinearFlow(A, model.D, tau, quad_tol, table_v)
    S, om, I = flow.S, flow.om, np.eye(state0.dim)
    sigma_t = S @ sigma0 @ S.T + flow.int_SDS
    sigma_t = 0.5 * (sigma_t + sigma_t.T)
    branches = {}
    resolved = {j: resolve_branch(model, j) for j in state0.labels}
    for key in state0.keys():
        q0 = state0.branches[key]
        if not q0.active:
            branches[key] = q0
            continue
        J, K = key
        bj, bk = resolved[J], resolved[K]
        delta = bj.r - bk.r
        rbar = 0.5 * (bj.r + bk.r)
        c = model.d - rbar
        real_part = S @ r0 + (S - I) @ Ainv @ c
        if table_v or unitary_form:
            # Table-V style: tilde vectors rotated by the flow
            dt0 = Ainv @ delta
            d_tau = (S - I) @ dt0
            imag = sigma_t @ om @ d_tau
            if flow.has_noise and tau > 0:
                imag = imag + flow.int_SDSOS @ dt0 - flow.int_SDS @ om @ S @ dt0
            r_t = real_part - 0.5j * imag
            C = 0.25 * d_tau @ om.T @ (S @ sigma0 @ S.T) @ om @ d_tau
            if flow.has_noise and tau > 0:
                C += 0.25 * delta @ flow.int_dDd @ delta
        else:
            AinvT = Ainv.T
            w = om @ AinvT @ delta
            r_t = real_part + 0.5j * (S @ sigma0 @ (S.T - I) @ w + flow.int_X @ w)
            v = Ainv @ om.T @ (S - I)
            C = 0.25 * delta @ v @ sigma0 @ v.T @ delta + 0.25 * w @ flow.int_Y @ w
        C += tau * dephasing_rate(model, J, K)
        phi = delta @ (-Ainv @ om @ (S - I) @ (r0 + Ainv @ c) - tau * Ainv @ c)
        phi -= 0.5 * tau * (bj.const - bk.const)
        r0_t = q0.r0 + complex(-C, phi)
        if J == K:
            branches[key] = BranchQuantities(sigma_t, real_part, q0.r0)
        elif r0_t.real < PRUNE_LOG:
            branches[key] = inactive_branch(state0.dim)
        else:
            branches[key] = BranchQuantities(sigma_t, r_t, r0_t)
    return state0.with_branches(branches, float(state0.time + tau))


def closed_form_linear_unitary(model: HybridModel, state0: GCSState, tau: float) -> GCSState:
    """Exact noiseless evolution for force-only coupling (``H_q = 0``).

    Uses the shifted vectors ``H_m^{-1} r_a`` rotated by ``exp(tau Omega H_m)``.
    """
    _check_dims(model, state0)
    if not model.is_linear:
        raise EngineIncompatibility("closed forms need linear coupling (all H_q = 0); use integrate()")
    if model.is_noisy:
        raise EngineIncompatibility("model has noise; use closed_form_linear_open()")
    return _linear_solution(model, state0, tau, 1e-10, unitary_form=True)


def closed_form_linear_open(model: HybridModel, state0: GCSState, tau: float,
                            cfg: IntegratorConfig | None = None, form: str = "auto") -> GCSState:
    """Exact open evolution for force-only coupling.

    ``form="drift"`` evaluates the general expressions in ``A = H_m + E``;
    ``form="symmetric"`` uses the rotated-vector expressions valid for
    ``E = 0``; ``"auto"`` picks the latter whenever ``E`` vanishes.
    """
    _check_dims(model, state0)
    cfg = cfg or IntegratorConfig()
    if not model.is_linear:
        raise EngineIncompatibility("closed forms need linear coupling (all H_q = 0); use integrate()")
    if form not in ("auto", "drift", "symmetric"):
        raise ValueError(f"unknown closed-form variant {form!r}")
    sym = not np.any(model.E)
    if form == "symmetric" and not sym:
        raise EngineIncompatibility("the symmetric closed form requires E = 0")
    table_v = sym if form == "auto" else form == "symmetric"
    return _linear_solution(model, state0, tau, cfg.quadrature_tol, table_v=table_v)


def closed_form_trajectory(model: HybridModel, state0: GCSState, tau_grid,
                           cfg: IntegratorConfig | None = None, form: str = "auto") -> Trajectory:
    times = np.asarray(tau_grid, dtype=float)
    if model.is_noisy:
        states = [closed_form_linear_open(model, state0, t - state0.time, cfg, form) for t in times]
    else:
        states = [closed_form_linear_unitary(model, state0, t - state0.time) for t in times]
    return Trajectory(times, states, {"method": "closed-form"})


def diagonal_closed_form(model: HybridModel, state0: GCSState, tau: float,
                         cfg: IntegratorConfig | None = None) -> dict[Key, BranchQuantities]:
    """Exact diagonal branches for any quadratic coupling.

    Each diagonal branch is a Gaussian process with drift ``A_J = H_J + E``;
    its covariance follows the Lyapunov solution and its mean relaxes to the
    fixed point of the force ``r_J - d``.
    """
    _check_dims(model, state0)
    cfg = cfg or IntegratorConfig()
    om = symplectic_form(model.n_modes)
    I = np.eye(state0.dim)
    out = {}
    for j in state0.labels:
        q0 = state0[(j, j)]
        if not q0.active:
            out[(j, j)] = q0
            continue
        bj = resolve_branch(model, j)
        gen = om @ (bj.H + model.E)
        S = expm(tau * gen)
        force = om @ (model.d - bj.r)
        need_quad = bool(np.any(model.D)) or np.linalg.cond(bj.H + model.E) > 1e12
        sigma0, r0 = q0.sigma.real, q0.r.real
        sigma = S @ sigma0 @ S.T
        r = S @ r0
        if need_quad and tau > 0:
            def integrand(v):
                Sv = expm(v * gen)
                return np.concatenate([(Sv @ model.D @ Sv.T).ravel(), Sv @ force])

            vals, _ = quad_vec(integrand, 0.0, tau, epsabs=cfg.quadrature_tol, epsrel=cfg.quadrature_tol)
            k = state0.dim ** 2
            sigma = sigma + vals[:k].reshape(state0.dim, state0.dim)
            r = r + vals[k:]
        elif tau > 0:
            r = r + (S - I) @ np.linalg.solve(bj.H + model.E, model.d - bj.r)
        out[(j, j)] = BranchQuantities(0.5 * (sigma + sigma.T), r, q0.r0)
    return out


def check_trajectory(traj: Trajectory, tol: float = 1e-9) -> list[str]:
    """Run :func:`validate_state` on every snapshot; return all violations."""
    problems = []
    for t, s in zip(traj.times, traj.states):
        rep = validate_state(s, tol)
        problems.extend(f"tau={t:.6g}: {v}" for v in rep.violations)
    return problems
