"""Expectation values and measurements on Gaussian-branched cat states.

General-dyne detections are Gaussian POVMs.  Every detection is stored as a
projection ``P`` onto the measured quadratures (``k x 2n``) together with the
detector's added covariance ``noise`` (``k x k``): the outcome density of a
Gaussian branch ``(sigma, r)`` is then

    exp(-(P r - y)^T M^{-1} (P r - y)) / (pi^{k/2} sqrt(det M)),
    M = P sigma P^T + noise,

which integrates to one over ``y``.  Heterodyne and general-dyne detections
have ``P = 1``; homodyne keeps only the measured quadrature, the conjugate one
being marginalised analytically.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .phase_space import (
    GCSState,
    Key,
    gaussian_sqrt_det,
    gaussian_wigner,
    label_index,
    qrdm,
    symplectic_form,
)

PROB_TOL = 1e-12


@dataclass(frozen=True)
class GeneralDyne:
    """Gaussian detection: measured-subspace projection and added noise."""

    projector: np.ndarray
    noise: np.ndarray
    degenerate_directions: tuple = ()
    label: str = "general-dyne"

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.projector, dtype=float))
        Nz = np.atleast_2d(np.asarray(self.noise, dtype=float))
        if Nz.shape != (P.shape[0], P.shape[0]):
            raise ValueError("noise must be k x k for a k-row projector")
        object.__setattr__(self, "projector", P)
        object.__setattr__(self, "noise", 0.5 * (Nz + Nz.T))

    @property
    def n_outcomes(self) -> int:
        return self.projector.shape[0]

    @property
    def sigma_m(self) -> np.ndarray:
        """Measurement covariance on the measured subspace."""
        return self.noise

    def regularized(self, z2: float = 1e-8) -> "GeneralDyne":
        """Full-rank stand-in: degenerate directions get variance ``1/z2``.

        Only meaningful for homodyne detections; used to cross-check the
        analytic marginalisation.
        """
        if not self.degenerate_directions:
            return self
        dim = self.projector.shape[1]
        rows = list(self.projector) + [np.asarray(e, float) for e in self.degenerate_directions]
        R = np.array(rows)
        if R.shape != (dim, dim):
            raise ValueError("regularisation needs a complete set of directions")
        k = self.n_outcomes
        noise = np.zeros((dim, dim))
        noise[:k, :k] = self.noise + z2 * np.eye(k)
        noise[k:, k:] = np.eye(dim - k) / z2
        return GeneralDyne(R, noise, (), self.label + "-regularized")


def _check_sigma_m(sigma_m: np.ndarray):
    n = sigma_m.shape[0] // 2
    herm = sigma_m + 1j * symplectic_form(n)
    if np.linalg.eigvalsh(0.5 * (herm + herm.conj().T)).min() < -1e-9:
        raise ValueError("measurement covariance violates the uncertainty principle")


def general_dyne(sigma_m) -> GeneralDyne:
    """Ideal general-dyne detection with covariance ``sigma_m`` on all modes."""
    sigma_m = np.asarray(sigma_m, dtype=float)
    _check_sigma_m(sigma_m)
    return GeneralDyne(np.eye(sigma_m.shape[0]), sigma_m, (), "general-dyne")


def _theta_tan2(eta: float) -> float:
    if not 0 < eta <= 1:
        raise ValueError(f"efficiency must lie in (0, 1], got {eta}")
    theta = np.arccos(np.sqrt(eta))
    return float(np.tan(theta) ** 2)


def homodyne_cov(phi: float, eta: float, n_modes: int, mode: int = 0) -> GeneralDyne:
    """Homodyne of ``cos(phi) x + sin(phi) p`` on ``mode`` with efficiency ``eta``.

    The measured direction carries added variance ``tan(theta)^2``,
    ``theta = arccos(sqrt(eta))``; the conjugate direction is degenerate.
    Unmeasured modes are traced out.
    """
    t2 = _theta_tan2(eta)
    if not 0 <= mode < n_modes:
        raise ValueError("mode index out of range")
    dim = 2 * n_modes
    e = np.zeros(dim)
    e[2 * mode: 2 * mode + 2] = np.cos(phi), np.sin(phi)
    conj = np.zeros(dim)
    conj[2 * mode: 2 * mode + 2] = -np.sin(phi), np.cos(phi)
    degenerate = [conj]
    for m in range(n_modes):
        if m != mode:
            for c in range(2):
                u = np.zeros(dim)
                u[2 * m + c] = 1.0
                degenerate.append(u)
    return GeneralDyne(e[None, :], np.array([[t2]]), tuple(degenerate), f"homodyne(phi={phi:g}, eta={eta:g})")


def heterodyne(eta: float, n_modes: int) -> GeneralDyne:
    """Heterodyne detection: ``sigma_m = (1 + 2 tan(theta)^2) 1``."""
    t2 = _theta_tan2(eta)
    dim = 2 * n_modes
    return GeneralDyne(np.eye(dim), (1 + 2 * t2) * np.eye(dim), (), f"heterodyne(eta={eta:g})")


# ---------------------------------------------------------------------------
# qubit POVMs


@dataclass(frozen=True)
class QubitPOVM:
    elements: tuple
    labels: tuple

    def __post_init__(self):
        els = tuple(np.asarray(m, dtype=complex) for m in self.elements)
        if len(els) != len(self.labels):
            raise ValueError("one label per POVM element required")
        dim = els[0].shape[0]
        total = sum(els)
        if np.max(np.abs(total - np.eye(dim))) > 1e-12:
            raise ValueError("POVM elements must sum to the identity")
        for m in els:
            if np.max(np.abs(m - m.conj().T)) > 1e-12 or np.linalg.eigvalsh(m).min() < -1e-12:
                raise ValueError("POVM elements must be positive semidefinite")
        object.__setattr__(self, "elements", els)

    @property
    def n_qubits(self) -> int:
        return int(round(np.log2(self.elements[0].shape[0])))


_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_povm(axis: str, qubit: int = 0, n_qubits: int = 1) -> QubitPOVM:
    """Projective measurement of ``sigma_axis`` on one qubit (outcomes +1, -1)."""
    axis = axis.lower()
    if axis not in _PAULI:
        raise ValueError(f"unknown Pauli axis {axis!r}")
    if not 0 <= qubit < n_qubits:
        raise ValueError("qubit index out of range")
    els = []
    for sign in (1, -1):
        proj = 0.5 * (np.eye(2) + sign * _PAULI[axis])
        mats = [np.eye(2)] * n_qubits
        mats[qubit] = proj
        full = mats[0]
        for m in mats[1:]:
            full = np.kron(full, m)
        els.append(full)
    return QubitPOVM(tuple(els), (f"{axis}+", f"{axis}-"))


def computational_povm(n_qubits: int) -> QubitPOVM:
    """Projectors onto the sigma_z product basis."""
    d = 2**n_qubits
    els = []
    labels = []
    for lab in itertools.product((1, -1), repeat=n_qubits):
        m = np.zeros((d, d), dtype=complex)
        idx = label_index(lab)
        m[idx, idx] = 1.0
        els.append(m)
        labels.append("".join("+" if j == 1 else "-" for j in lab))
    return QubitPOVM(tuple(els), tuple(labels))


def identity_povm(n_qubits: int) -> QubitPOVM:
    return QubitPOVM((np.eye(2**n_qubits, dtype=complex),), ("1",))


# ---------------------------------------------------------------------------
# expectation values


def _isserlis(indices, sigma, r) -> complex:
    """Symmetrised moment ``E[prod r_i]`` of a Gaussian with mean ``r`` and covariance ``sigma/2``."""
    idx = list(indices)
    if not idx:
        return 1.0 + 0j
    first, rest = idx[0], idx[1:]
    total = r[first] * _isserlis(rest, sigma, r)
    for k in range(len(rest)):
        other = rest[:k] + rest[k + 1:]
        total += 0.5 * sigma[first, rest[k]] * _isserlis(other, sigma, r)
    return complex(total)


def expectation_product(state: GCSState, indices, qubit_op=None):
    """Weyl-symmetrised moment of canonical operators ``r_{i1} ... r_{ik}``.

    Returns ``(table, value)``: ``table[(J, K)] = Tr[rho_JK sym(prod r)]`` for
    every stored key and the joint value ``sum_JK table[J,K] O_KJ`` with the
    qubit operator ``O`` (identity by default).
    """
    idx = [int(i) for i in indices]
    if any(i < 0 or i >= state.dim for i in idx):
        raise ValueError(f"operator indices must lie in [0, {state.dim})")
    d = 2**state.n_qubits
    O = np.eye(d) if qubit_op is None else np.asarray(qubit_op, dtype=complex)
    table = {}
    value = 0j
    for a, J in enumerate(state.labels):
        for b, K in enumerate(state.labels):
            q = state[(J, K)]
            if not q.active:
                v = 0j
            else:
                v = q.amplitude * _isserlis(idx, q.sigma, q.r)
            if a <= b:
                table[(J, K)] = v
            value += v * O[b, a]
    return table, value


# ---------------------------------------------------------------------------
# qubit measurements


@dataclass
class CVMixture:
    """Mode state ``sum_c w_c G(sigma_c, r_c)`` with complex weights.

    The weights are those of the branch characteristic functions, so the
    characteristic function is ``sum_c w_c exp(-1/4 rt^T sigma_c rt + i rt^T r_c)``.
    """

    weights: list
    sigmas: list
    means: list
    keys: list = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.weights

    def char(self, r_tilde) -> complex | np.ndarray:
        rt = np.asarray(r_tilde, dtype=float)
        out = 0j
        for w, s, r in zip(self.weights, self.sigmas, self.means):
            quad_ = np.einsum("...i,ij,...j->...", rt, s, rt)
            out = out + w * np.exp(-0.25 * quad_ + 1j * rt @ r)
        return out

    def wigner(self, points) -> np.ndarray:
        """Wigner function at ``points`` (last axis ``2n``); real by construction."""
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1], dtype=complex)
        for w, s, r in zip(self.weights, self.sigmas, self.means):
            out = out + gaussian_wigner(s, r, w, pts)
        return out.real

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance (vacuum = identity) of the mixture."""
        mean = sum(w * r for w, r in zip(self.weights, self.means))
        second = sum(w * (s + 2 * np.outer(r, r)) for w, s, r in zip(self.weights, self.sigmas, self.means))
        mean = np.real_if_close(mean)
        cov = np.real_if_close(second - 2 * np.outer(mean, mean))
        return np.real(mean), np.real(cov)


@dataclass
class QubitOutcome:
    label: str
    probability: float
    state: CVMixture


def qubit_measure(state: GCSState, povm: QubitPOVM) -> list[QubitOutcome]:
    """Outcome probabilities ``Tr[M rho_q]`` and conditional mode states."""
    if povm.n_qubits != state.n_qubits:
        raise ValueError("POVM acts on a different number of qubits")
    rho = qrdm(state)
    outcomes = []
    for lab, M in zip(povm.labels, povm.elements):
        p = float(np.real(np.trace(M @ rho)))
        if p <= PROB_TOL:
            outcomes.append(QubitOutcome(lab, max(p, 0.0), CVMixture([], [], [])))
            continue
        ws, ss, rs, ks = [], [], [], []
        for a, J in enumerate(state.labels):
            for b, K in enumerate(state.labels):
                q = state[(J, K)]
                if not q.active or M[b, a] == 0:
                    continue
                ws.append(M[b, a] * q.amplitude / p)
                ss.append(q.sigma)
                rs.append(q.r)
                ks.append((J, K))
        outcomes.append(QubitOutcome(lab, p, CVMixture(ws, ss, rs, ks)))
    return outcomes


# ---------------------------------------------------------------------------
# general-dyne measurements


@dataclass(frozen=True)
class _BranchOverlap:
    amp: complex
    center: np.ndarray
    Minv: np.ndarray
    norm: complex  # pi^{k/2} sqrt(det M)

    def __call__(self, y: np.ndarray) -> np.ndarray:
        diff = self.center - y
        expo = np.einsum("...i,ij,...j->...", diff, self.Minv, diff)
        return self.amp * np.exp(-expo) / self.norm


def _overlaps(state: GCSState, meas: GeneralDyne, keys, sqrt_refs=None) -> dict:
    if meas.projector.shape[1] != state.dim:
        raise ValueError("detection acts on a different number of modes")
    P = meas.projector
    k = meas.n_outcomes
    out = {}
    for key in keys:
        q = state[key]
        if not q.active:
            continue
        M = P @ q.sigma @ P.T + meas.noise
        if abs(np.linalg.det(M)) < 1e-300:
            raise np.linalg.LinAlgError(f"singular overlap covariance for branch {key}")
        ref = None if sqrt_refs is None else sqrt_refs.get(key)
        root = gaussian_sqrt_det(M, ref)
        out[key] = _BranchOverlap(q.amplitude, P @ q.r, np.linalg.inv(M), np.pi ** (k / 2) * root)
    return out


def _outcomes(meas: GeneralDyne, r_m) -> np.ndarray:
    y = np.asarray(r_m, dtype=float)
    if meas.n_outcomes == 1 and (y.ndim == 0 or y.shape[-1] != 1):
        y = y[..., None]
    if y.shape[-1] != meas.n_outcomes:
        raise ValueError(f"outcome has {y.shape[-1]} components, detection measures {meas.n_outcomes}")
    return y


def generaldyne_density(state: GCSState, meas: GeneralDyne, r_m) -> np.ndarray:
    """Outcome density: mixture over diagonal branches.  Vectorised over ``r_m``."""
    y = _outcomes(meas, r_m)
    ov = _overlaps(state, meas, [(j, j) for j in state.labels])
    return np.real(sum(o(y) for o in ov.values()))


@dataclass
class PostQRDM:
    unnormalized: np.ndarray
    normalized: np.ndarray | None
    density: float
    flagged: bool


def generaldyne_post_qrdm(state: GCSState, meas: GeneralDyne, r_m, sqrt_refs=None,
                          floor: float = 1e-300) -> PostQRDM:
    """Qubit state conditioned on a general-dyne outcome ``r_m``.

    Off-diagonal entries use the complex branch overlaps; ``sqrt_refs`` maps
    keys to previous determinant roots to keep the sheet continuous along a
    sweep in time.  Outcomes with density below ``floor`` are flagged and
    return ``normalized=None``.
    """
    y = _outcomes(meas, r_m)
    if y.ndim != 1:
        raise ValueError("post-measurement QRDM takes a single outcome")
    labels = state.labels
    ov = _overlaps(state, meas, state.keys(), sqrt_refs)
    d = len(labels)
    Q = np.zeros((d, d), dtype=complex)
    for (J, K), o in ov.items():
        a, b = label_index(J), label_index(K)
        Q[a, b] = o(y)
        Q[b, a] = np.conj(Q[a, b])
    for a in range(d):
        Q[a, a] = Q[a, a].real
    dens = float(np.trace(Q).real)
    if dens < floor:
        return PostQRDM(Q, None, dens, True)
    return PostQRDM(Q, Q / dens, dens, False)


def joint_measurement_density(state: GCSState, meas: GeneralDyne, povm: QubitPOVM, r_m) -> np.ndarray:
    """Densities ``P^i(r_m)`` of joint (qubit outcome ``i``, dyne outcome) events.

    Returns an array of shape ``(n_povm, ...)``; summing over ``i`` recovers
    :func:`generaldyne_density`.
    """
    y = _outcomes(meas, r_m)
    ov = _overlaps(state, meas, state.keys())
    vals = {key: o(y) for key, o in ov.items()}
    out = []
    for M in povm.elements:
        tot = 0j
        for (J, K), v in vals.items():
            a, b = label_index(J), label_index(K)
            tot = tot + M[b, a] * v
            if a != b:
                tot = tot + M[a, b] * np.conj(v)
        out.append(np.real(tot))
    return np.array(out)


def postselect_success_probability(state: GCSState, meas: GeneralDyne, region, tol: float = 1e-8) -> float:
    """Probability that a 1-D homodyne outcome falls in ``region = (lo, hi)``."""
    if meas.n_outcomes != 1:
        raise ValueError("post-selection regions are defined for one measured quadrature")
    lo, hi = float(region[0]), float(region[1])
    if hi <= lo:
        return 0.0
    ov = _overlaps(state, meas, [(j, j) for j in state.labels])
    total = 0.0
    for o in ov.values():
        c = float(o.center[0].real)
        width = np.sqrt(1.0 / o.Minv[0, 0].real)
        pts = [p for p in (c - 3 * width, c, c + 3 * width) if lo < p < hi]
        val, _ = quad(lambda x: float(np.real(o(np.array([x])))), lo, hi, epsabs=tol, epsrel=tol,
                      points=pts or None, limit=200)
        total += val
    return float(total)


def sample_outcomes(state: GCSState, meas: GeneralDyne, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw dyne outcomes: pick a diagonal branch by weight, then its Gaussian."""
    ov = _overlaps(state, meas, [(j, j) for j in state.labels])
    keys = list(ov)
    w = np.array([ov[k].amp.real for k in keys])
    w = w / w.sum()
    choice = rng.choice(len(keys), size=size, p=w)
    out = np.empty((size, meas.n_outcomes))
    for i, key in enumerate(keys):
        sel = choice == i
        if not np.any(sel):
            continue
        cov = 0.5 * np.linalg.inv(ov[key].Minv).real
        out[sel] = rng.multivariate_normal(ov[key].center.real, cov, size=int(sel.sum()))
    return out


def negativity_two_qubit(rho) -> float:
    """Sum of the magnitudes of negative eigenvalues of the partial transpose."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError("expected a 4x4 two-qubit density matrix")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-10:
        raise ValueError("density matrix must be Hermitian")
    pt = rho.reshape(2, 2, 2, 2).transpose(0, 3, 2, 1).reshape(4, 4)
    ev = np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))
    return float(-ev[ev < 0].sum())
