"""Operator-valued Gaussian Hamiltonians and Markovian Gaussian noise.

The joint Hamiltonian acting on the ``|J>`` block is

    H_J = 1/2 r^T H_J r - r_J^T r + const_J / 2,

with ``H_J = H_m + sum_i j_i H_q_i``, ``r_J = r_m + sum_i j_i r_q_i`` and
``const_J = sum_i j_i H_q0_i`` (plus optional ``sigma_z sigma_z`` couplings).
Noise is described by the Hermitian matrix ``B`` of the dissipator
``sum_mn B_mn (r_m rho r_n - 1/2 {r_n r_m, rho})``, a classical drive ``d``
entering as ``+d^T r`` and single-qubit dephasing rates ``Gamma_z``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .phase_space import Label, check_label, ladder_transform, symplectic_form

SYM_TOL = 1e-12
REPAIR_WARN = 1e-9


def _as_square(name: str, m, dim: int) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (dim, dim):
        raise ValueError(f"{name} must have shape {(dim, dim)}, got {m.shape}")
    return m


def _symmetrize(name: str, m: np.ndarray, anti: bool = False) -> np.ndarray:
    sym = 0.5 * (m - m.T) if anti else 0.5 * (m + m.T)
    dev = float(np.max(np.abs(m - sym))) if m.size else 0.0
    if dev > REPAIR_WARN:
        kind = "antisymmetric" if anti else "symmetric"
        warnings.warn(f"{name} not {kind} (deviation {dev:.2e}); repaired", stacklevel=3)
    return sym


@dataclass(frozen=True)
class HybridModel:
    """Model data shared by the phase-space engines and the Fock oracle.

    Parameters
    ----------
    n_modes, n_qubits : int
    H_m : (2n, 2n) array
        Mode quadratic potential.
    r_m : (2n,) array
        Classical force.
    H_q, r_q : sequences of length ``n_qubits``
        Per-qubit coupling matrices and force vectors.
    H_q0 : (N,) array
        Qubit splittings; qubit ``i`` contributes ``H_q0_i sigma_z / 2``.
    Gamma_z : (N,) array
        Dephasing rates, dissipator ``Gamma/2 (sigma_z rho sigma_z - rho)``.
    D, E, d :
        Diffusion (symmetric PSD), drift (antisymmetric) and drive.
    zz : (N, N) array, optional
        Couplings ``sum_{i<k} zz_ik sigma_z^i sigma_z^k`` (upper triangle used).
    """

    n_modes: int
    n_qubits: int
    H_m: np.ndarray
    r_m: np.ndarray
    H_q: tuple = ()
    r_q: tuple = ()
    H_q0: np.ndarray = None
    Gamma_z: np.ndarray = None
    D: np.ndarray = None
    E: np.ndarray = None
    d: np.ndarray = None
    zz: np.ndarray = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        n, nq = int(self.n_modes), int(self.n_qubits)
        if n < 1:
            raise ValueError("model needs at least one mode")
        if nq < 0:
            raise ValueError("negative qubit count")
        dim = 2 * n
        s = object.__setattr__
        s(self, "H_m", _symmetrize("H_m", _as_square("H_m", self.H_m, dim)))
        s(self, "r_m", _vec("r_m", self.r_m, dim))
        hq = tuple(self.H_q) if len(self.H_q) else tuple(np.zeros((dim, dim)) for _ in range(nq))
        rq = tuple(self.r_q) if len(self.r_q) else tuple(np.zeros(dim) for _ in range(nq))
        if len(hq) != nq or len(rq) != nq:
            raise ValueError(f"expected {nq} per-qubit couplings, got {len(hq)} H_q and {len(rq)} r_q")
        s(self, "H_q", tuple(_symmetrize(f"H_q[{i}]", _as_square(f"H_q[{i}]", h, dim)) for i, h in enumerate(hq)))
        s(self, "r_q", tuple(_vec(f"r_q[{i}]", r, dim) for i, r in enumerate(rq)))
        s(self, "H_q0", _vec("H_q0", np.zeros(nq) if self.H_q0 is None else self.H_q0, nq))
        gz = _vec("Gamma_z", np.zeros(nq) if self.Gamma_z is None else self.Gamma_z, nq)
        if np.any(gz < 0):
            raise ValueError("dephasing rates must be non-negative")
        s(self, "Gamma_z", gz)
        D = _symmetrize("D", _as_square("D", np.zeros((dim, dim)) if self.D is None else self.D, dim))
        if dim and np.linalg.eigvalsh(D).min() < -1e-12:
            raise ValueError("diffusion matrix D must be positive semidefinite")
        s(self, "D", D)
        E = _as_square("E", np.zeros((dim, dim)) if self.E is None else self.E, dim)
        s(self, "E", _symmetrize("E", E, anti=True))
        s(self, "d", _vec("d", np.zeros(dim) if self.d is None else self.d, dim))
        zz = np.zeros((nq, nq)) if self.zz is None else np.asarray(self.zz, dtype=float)
        if zz.shape != (nq, nq):
            raise ValueError(f"zz must be {nq}x{nq}")
        s(self, "zz", np.triu(zz, 1))

    @property
    def dim(self) -> int:
        return 2 * self.n_modes

    @property
    def is_linear(self) -> bool:
        """True when every qubit coupling is a pure force (``H_q = 0``)."""
        return all(not np.any(h) for h in self.H_q)

    @property
    def is_noisy(self) -> bool:
        return bool(np.any(self.D) or np.any(self.E) or np.any(self.d) or np.any(self.Gamma_z))

    @property
    def B(self) -> np.ndarray:
        """Noise matrix ``B = 1/2 Omega^T D Omega - i E``."""
        return B_from_noise(self.D, self.E)

    def with_(self, **changes) -> "HybridModel":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return HybridModel(**kw)


def _vec(name: str, v, dim: int) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (dim,):
        raise ValueError(f"{name} must have length {dim}, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class BranchHamiltonian:
    """Classical data of the Hamiltonian restricted to one qubit label."""

    H: np.ndarray
    r: np.ndarray
    const: float


def resolve_branch(model: HybridModel, label) -> BranchHamiltonian:
    """Replace each ``sigma_z^(i)`` by its eigenvalue ``j_i``."""
    j = check_label(label, model.n_qubits)
    H = model.H_m.copy()
    r = model.r_m.copy()
    const = 0.0
    for i, ji in enumerate(j):
        H += ji * model.H_q[i]
        r += ji * model.r_q[i]
        const += ji * model.H_q0[i]
    # zz couplings enter the doubled energy constant like the splittings do
    for a in range(model.n_qubits):
        for b in range(a + 1, model.n_qubits):
            const += 2.0 * model.zz[a, b] * j[a] * j[b]
    return BranchHamiltonian(H, r, float(const))


def dephasing_rate(model: HybridModel, J: Label, K: Label) -> float:
    """``sum_i Gamma_i (1 - j_i k_i) / 2``: decay rate of the ``JK`` coherence."""
    return float(sum(g * (1 - j * k) / 2 for g, j, k in zip(model.Gamma_z, J, K)))


def noise_from_B(B) -> tuple[np.ndarray, np.ndarray]:
    """Split a Hermitian noise matrix into diffusion ``D`` and drift ``E``."""
    B = np.asarray(B, dtype=complex)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] % 2:
        raise ValueError(f"B must be a square 2n x 2n matrix, got {B.shape}")
    if np.max(np.abs(B - B.conj().T)) > 1e-12:
        raise ValueError("B must be Hermitian")
    om = symplectic_form(B.shape[0] // 2)
    D = 2.0 * om @ B.real @ om.T
    E = -B.imag
    return 0.5 * (D + D.T), 0.5 * (E - E.T)


def B_from_noise(D, E) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    om = symplectic_form(D.shape[0] // 2)
    return 0.5 * om.T @ D @ om - 1j * np.asarray(E, dtype=float)


def noise_from_bath_coupling(H_C, sigma_in, r_in) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Diffusion, drift and drive induced by a Gaussian input bath.

    ``H_C`` couples the ``2n`` system quadratures to ``2m`` bath quadratures
    whose state has covariance ``sigma_in`` and mean ``r_in``.
    """
    H_C = np.atleast_2d(np.asarray(H_C, dtype=float))
    sigma_in = np.asarray(sigma_in, dtype=float)
    r_in = np.asarray(r_in, dtype=float)
    m2 = H_C.shape[1]
    if sigma_in.shape != (m2, m2) or r_in.shape != (m2,) or H_C.shape[0] % 2 or m2 % 2:
        raise ValueError("inconsistent bath-coupling dimensions")
    om_m = symplectic_form(m2 // 2)
    herm = sigma_in + 1j * om_m
    if np.linalg.eigvalsh(0.5 * (herm + herm.conj().T)).min() < -1e-9:
        raise ValueError("bath covariance violates the uncertainty principle")
    om = symplectic_form(H_C.shape[0] // 2)
    D = om @ H_C @ sigma_in @ H_C.T @ om.T
    E = 0.5 * H_C @ om_m @ H_C.T
    return 0.5 * (D + D.T), 0.5 * (E - E.T), H_C @ r_in


def ladder_noise_to_canonical(B_a, d_a) -> tuple[np.ndarray, np.ndarray]:
    """Convert noise written for ``(a_1, a_1^dag, ...)`` to canonical quadratures.

    With ``alpha = (a_1, a_1^dag, ...)``, entry ``B_a[m, n]`` multiplies
    ``alpha_m^dag rho alpha_n`` in the dissipator, so photon loss at rate
    ``kappa`` is ``B_a = diag(0, kappa)``.  The canonical matrix is
    ``U^dag B_a U`` with ``U`` from :func:`ladder_transform`.
    """
    B_a = np.asarray(B_a, dtype=complex)
    d_a = np.asarray(d_a, dtype=complex)
    if B_a.ndim != 2 or B_a.shape[0] != B_a.shape[1] or B_a.shape[0] % 2 or d_a.shape != (B_a.shape[0],):
        raise ValueError("inconsistent ladder noise dimensions")
    U = ladder_transform(B_a.shape[0] // 2)
    B = U.conj().T @ B_a @ U
    d = U.conj().T @ d_a
    B = 0.5 * (B + B.conj().T)
    if np.max(np.abs(d.imag)) < 1e-12:
        d = d.real
    return B, d


def loss_B(kappa: float, n_modes: int = 1) -> np.ndarray:
    """Noise matrix of photon loss ``sqrt(kappa) a`` on every mode."""
    return 0.5 * kappa * (np.eye(2 * n_modes) - 1j * symplectic_form(n_modes))
