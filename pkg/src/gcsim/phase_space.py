"""Gaussian-branched cat state (GCS) representation and phase-space evaluation.

A GCS of ``n`` modes and ``N`` qubits is stored as a table of branched
characteristic functions

    chi_JK(rt) = exp(-1/4 rt^T sigma_JK rt + i rt^T r_JK + r0_JK)

indexed by pairs of qubit labels ``J, K`` (tuples of +/-1, the sigma_z
eigenvalues).  ``rt`` is the phase-space argument with
``chi_JK(rt) = Tr[exp(i rt . r_hat) rho_JK]``.  Only keys with
``index(J) <= index(K)`` are stored; the rest follow from hermiticity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator

import numpy as np

Label = tuple[int, ...]
Key = tuple[Label, Label]

DEFAULT_TOL = 1e-9
# Branches whose QRDM exponent falls below this are frozen and treated as zero.
PRUNE_LOG = np.log(1e-300)


def symplectic_form(n: int) -> np.ndarray:
    """Block-diagonal symplectic form of ``n`` modes, ``[[0, 1], [-1, 0]]`` per block."""
    if n < 1:
        raise ValueError(f"mode count must be >= 1, got {n}")
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def ladder_transform(n: int) -> np.ndarray:
    """Map ``(x1, p1, ..., xn, pn)`` to ``(a1, a1^dag, ..., an, an^dag)``."""
    if n < 1:
        raise ValueError(f"mode count must be >= 1, got {n}")
    u1 = np.array([[1.0, 1.0j], [1.0, -1.0j]]) / np.sqrt(2.0)
    return np.kron(np.eye(n), u1)


def branch_labels(n_qubits: int) -> list[Label]:
    """All qubit labels in sigma_z product-basis order (+1 first)."""
    return [tuple(lab) for lab in itertools.product((1, -1), repeat=n_qubits)]


def label_index(label: Label) -> int:
    """Row index of ``|J>`` in the computational basis (+1 -> bit 0)."""
    idx = 0
    for j in label:
        idx = 2 * idx + (0 if j == 1 else 1)
    return idx


def check_label(label, n_qubits: int) -> Label:
    lab = tuple(int(j) for j in label)
    if len(lab) != n_qubits:
        raise ValueError(f"label {label} has length {len(lab)}, expected {n_qubits}")
    if any(j not in (1, -1) for j in lab):
        raise ValueError(f"label entries must be +1 or -1, got {label}")
    return lab


def gaussian_sqrt_det(m: np.ndarray, ref: complex | None = None) -> complex:
    """Square root of ``det(m)`` on the Gaussian-integral sheet.

    For complex symmetric ``m`` whose inverse has positive-definite real part,
    ``pi^k sqrt(det m) = int exp(-x^T m^{-1} x) dx`` with the root equal to the
    product of principal roots of the eigenvalues.  If ``ref`` is given the
    sign is chosen closest to it instead (continuation along a sweep).
    """
    m = np.asarray(m)
    if np.isrealobj(m):
        det = np.linalg.det(m)
        root = complex(np.sqrt(det)) if det >= 0 else complex(np.sqrt(complex(det)))
    else:
        root = complex(np.prod(np.sqrt(np.linalg.eigvals(m).astype(complex))))
    if ref is not None and abs(root - ref) > abs(root + ref):
        root = -root
    return root


def continuous_sqrt(values) -> np.ndarray:
    """Square roots of a sequence, sign-tracked so consecutive roots stay close."""
    vals = np.asarray(values, dtype=complex)
    out = np.empty_like(vals)
    prev = None
    for i, v in enumerate(vals):
        root = np.sqrt(v)
        if prev is not None and abs(root - prev) > abs(root + prev):
            root = -root
        out[i] = root
        prev = root
    return out


@dataclass(frozen=True)
class GaussianState:
    """Real first moments ``r`` and covariance ``sigma`` (vacuum: identity)."""

    r: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float))
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=float))

    @property
    def n_modes(self) -> int:
        return self.r.shape[0] // 2

    def is_physical(self, tol: float = DEFAULT_TOL) -> bool:
        return uncertainty_margin(self.sigma) >= -tol


def uncertainty_margin(sigma: np.ndarray) -> float:
    """Smallest eigenvalue of ``sigma + i Omega`` (negative means unphysical)."""
    n = sigma.shape[0] // 2
    herm = np.asarray(sigma) + 1j * symplectic_form(n)
    herm = 0.5 * (herm + herm.conj().T)
    return float(np.linalg.eigvalsh(herm).min())


@dataclass(frozen=True)
class BranchQuantities:
    """Phase-space quantities of one branch: ``sigma``, ``r`` and exponent ``r0``.

    ``r0 = -C + i phi``; ``exp(r0)`` is the QRDM element.  Inactive branches
    carry identically zero amplitude.
    """

    sigma: np.ndarray
    r: np.ndarray
    r0: complex
    active: bool = True

    def __post_init__(self):
        object.__setattr__(self, "sigma", np.asarray(self.sigma, dtype=complex))
        object.__setattr__(self, "r", np.asarray(self.r, dtype=complex))
        object.__setattr__(self, "r0", complex(self.r0))

    @property
    def contrast(self) -> float:
        return -self.r0.real

    @property
    def phase(self) -> float:
        return self.r0.imag

    @property
    def amplitude(self) -> complex:
        return complex(np.exp(self.r0)) if self.active else 0.0j

    def conj(self) -> "BranchQuantities":
        return BranchQuantities(self.sigma.conj(), self.r.conj(), self.r0.conjugate(), self.active)


@dataclass(frozen=True)
class GCSState:
    """Gaussian-branched cat state: upper-triangle table of branch quantities."""

    n_modes: int
    n_qubits: int
    branches: dict[Key, BranchQuantities]
    time: float = 0.0
    labels: list[Label] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "labels", branch_labels(self.n_qubits))
        for (j, k) in self.branches:
            if label_index(j) > label_index(k):
                raise ValueError(f"branch key {(j, k)} is not in upper-triangle order")
            if len(j) != self.n_qubits or len(k) != self.n_qubits:
                raise ValueError(f"branch key {(j, k)} does not match {self.n_qubits} qubits")

    @property
    def dim(self) -> int:
        return 2 * self.n_modes

    def keys(self) -> list[Key]:
        """Stored keys in lexicographic (upper-triangle) order."""
        labs = self.labels
        return [(labs[a], labs[b]) for a in range(len(labs)) for b in range(a, len(labs))]

    def __getitem__(self, key: Key) -> BranchQuantities:
        j, k = key
        if (j, k) in self.branches:
            return self.branches[(j, k)]
        if (k, j) in self.branches:
            return self.branches[(k, j)].conj()
        raise KeyError(key)

    def active_keys(self) -> Iterator[Key]:
        for key in self.keys():
            if key in self.branches and self.branches[key].active:
                yield key

    def with_branches(self, branches: dict[Key, BranchQuantities], time: float) -> "GCSState":
        return replace(self, branches=branches, time=time)


def inactive_branch(dim: int) -> BranchQuantities:
    return BranchQuantities(np.eye(dim), np.zeros(dim), -np.inf + 0j, active=False)


def product_state(r0, sigma0, qrdm0, n_qubits: int | None = None, time: float = 0.0) -> GCSState:
    """GCS for ``rho_gauss(r0, sigma0) (x) rho_qubit``.

    Branches with zero QRDM amplitude are stored inactive.
    """
    r0 = np.asarray(r0, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    qrdm0 = np.asarray(qrdm0, dtype=complex)
    if n_qubits is None:
        n_qubits = int(round(np.log2(qrdm0.shape[0])))
    if qrdm0.shape != (2**n_qubits, 2**n_qubits):
        raise ValueError(f"QRDM shape {qrdm0.shape} does not match {n_qubits} qubits")
    dim = r0.shape[0]
    if sigma0.shape != (dim, dim) or dim % 2:
        raise ValueError("sigma0 must be 2n x 2n matching r0")
    labels = branch_labels(n_qubits)
    branches = {}
    for a, j in enumerate(labels):
        for b in range(a, len(labels)):
            k = labels[b]
            amp = qrdm0[a, b]
            if abs(amp) == 0.0:
                branches[(j, k)] = inactive_branch(dim)
            else:
                branches[(j, k)] = BranchQuantities(sigma0, r0, np.log(complex(amp)))
    return GCSState(dim // 2, n_qubits, branches, time)


def _check_rt(state: GCSState, r_tilde) -> np.ndarray:
    rt = np.asarray(r_tilde, dtype=float)
    if rt.shape[-1] != state.dim:
        raise ValueError(f"phase-space point has length {rt.shape[-1]}, expected {state.dim}")
    return rt


def eval_branched_char(state: GCSState, key: Key, r_tilde) -> complex | np.ndarray:
    """Branched characteristic function ``chi_JK`` at ``r_tilde`` (last axis 2n)."""
    rt = _check_rt(state, r_tilde)
    q = state[key]
    if not q.active:
        return np.zeros(rt.shape[:-1], dtype=complex) if rt.ndim > 1 else 0.0j
    quad = np.einsum("...i,ij,...j->...", rt, q.sigma, rt)
    lin = rt @ q.r
    return np.exp(-0.25 * quad + 1j * lin + q.r0)


def eval_branched_wigner(state: GCSState, key: Key, r_tilde, sqrt_det: complex | None = None):
    """Branched Wigner function ``W_JK`` at ``r_tilde`` (last axis 2n).

    Normalised so that ``W_JJ`` integrates to the branch probability
    ``exp(r0_JJ)``.  ``sqrt_det`` overrides the root of ``det sigma_JK`` (use
    :func:`continuous_sqrt` along parameter sweeps).
    """
    rt = _check_rt(state, r_tilde)
    q = state[key]
    if not q.active:
        return np.zeros(rt.shape[:-1], dtype=complex) if rt.ndim > 1 else 0.0j
    return gaussian_wigner(q.sigma, q.r, np.exp(q.r0), rt, sqrt_det)


def gaussian_wigner(sigma, r, weight, r_tilde, sqrt_det=None):
    """``weight * exp(-(x-r)^T sigma^-1 (x-r)) / (pi^n sqrt(det sigma))``."""
    sigma = np.asarray(sigma)
    n = sigma.shape[0] // 2
    if abs(np.linalg.det(sigma)) < 1e-300:
        raise np.linalg.LinAlgError("singular branch covariance")
    inv = np.linalg.inv(sigma)
    if sqrt_det is None:
        sqrt_det = gaussian_sqrt_det(sigma)
    diff = np.asarray(r_tilde) - r
    expo = np.einsum("...i,ij,...j->...", diff, inv, diff)
    return weight * np.exp(-expo) / (np.pi**n * sqrt_det)


def qrdm(state: GCSState) -> np.ndarray:
    """Qubit reduced density matrix ``exp(r0_JK)`` in the sigma_z product basis."""
    labels = state.labels
    out = np.zeros((len(labels), len(labels)), dtype=complex)
    for a, j in enumerate(labels):
        for b in range(a, len(labels)):
            val = state[(j, labels[b])].amplitude
            out[a, b] = val
            out[b, a] = np.conj(val)
    return out


def modes_reduced_moments(state: GCSState) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance (``sigma`` convention) of the modes' reduced state."""
    dim = state.dim
    mean = np.zeros(dim)
    second = np.zeros((dim, dim))
    for j in state.labels:
        q = state[(j, j)]
        if not q.active:
            continue
        w = np.exp(q.r0.real)
        r = q.r.real
        mean += w * r
        second += w * (q.sigma.real + 2.0 * np.outer(r, r))
    cov = second - 2.0 * np.outer(mean, mean)
    return mean, 0.5 * (cov + cov.T)


@dataclass
class StateReport:
    """Violations found by :func:`validate_state`; empty means the state is sound."""

    violations: list[str] = field(default_factory=list)
    symmetry_drift: float = 0.0
    trace_error: float = 0.0
    min_uncertainty: float = np.inf
    max_cs_excess: float = -np.inf

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_state(state: GCSState, tol: float = DEFAULT_TOL) -> StateReport:
    """Check hermiticity, symmetry, normalisation, uncertainty and Cauchy-Schwarz."""
    rep = StateReport()
    for key in state.keys():
        if key not in state.branches:
            rep.violations.append(f"missing branch {key}")
            continue
        q = state.branches[key]
        back = q.conj().conj()
        if not (np.array_equal(back.sigma, q.sigma) and np.array_equal(back.r, q.r)):
            rep.violations.append(f"hermitian reconstruction unstable for {key}")
        if not q.active:
            continue
        drift = float(np.max(np.abs(q.sigma - q.sigma.T)))
        rep.symmetry_drift = max(rep.symmetry_drift, drift)
        if drift > tol:
            rep.violations.append(f"sigma not symmetric for {key}: {drift:.3e}")
        j, k = key
        if j == k:
            imag = max(np.max(np.abs(q.sigma.imag)), np.max(np.abs(q.r.imag)), abs(q.r0.imag))
            if imag > tol:
                rep.violations.append(f"diagonal branch {j} not real: {imag:.3e}")
            margin = uncertainty_margin(q.sigma.real)
            rep.min_uncertainty = min(rep.min_uncertainty, margin)
            if margin < -tol:
                rep.violations.append(f"uncertainty violated for {j}: min eig {margin:.3e}")
            if q.r0.real > tol:
                rep.violations.append(f"diagonal weight of {j} exceeds 1")
    rho = qrdm(state)
    rep.trace_error = float(abs(np.trace(rho).real - 1.0))
    if rep.trace_error > tol:
        rep.violations.append(f"trace error {rep.trace_error:.3e}")
    diag = np.clip(np.diag(rho).real, 0.0, None)
    bound = np.sqrt(np.outer(diag, diag))
    excess = np.abs(rho) - bound
    rep.max_cs_excess = float(excess.max())
    if rep.max_cs_excess > tol:
        rep.violations.append(f"Cauchy-Schwarz bound exceeded by {rep.max_cs_excess:.3e}")
    return rep
