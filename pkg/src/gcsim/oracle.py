"""Brute-force reference: qubits times truncated Fock space.

The joint density matrix is stored as blocks ``rho[J, K]`` (each an
``M x M`` matrix on the modes, ``M = n_max ** n_modes``) and evolved with the
full Lindblad equation, applied matrix-free.  Phase-space quantities of each
block are recovered for comparison with the Gaussian engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, logm, schur, sqrtm

from .errors import NumericalFailure
from .model import HybridModel, resolve_branch
from .phase_space import Label, branch_labels, label_index, symplectic_form

MAX_MODES = 2


@dataclass(frozen=True)
class FockConfig:
    """Truncation and solver settings of the oracle.

    ``pad`` extra levels are kept while forming operator products so that
    quadratic operators have exact matrix elements inside the truncation.
    """

    n_max: int = 40
    convergence_factor: float = 1e-8
    overflow_tol: float = 1e-4
    pad: int = 2
    synth_pad: int = 60
    rtol: float = 1e-9
    atol: float = 1e-11

    def __post_init__(self):
        if self.n_max < 2:
            raise ValueError("n_max must be >= 2")


@dataclass
class FockDensityMatrix:
    """Blocks ``rho[J, K]`` of the joint state; ``J, K`` index qubit labels."""

    blocks: np.ndarray  # (2^N, 2^N, M, M)
    n_modes: int
    n_qubits: int
    n_max: int
    time: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def labels(self) -> list[Label]:
        return branch_labels(self.n_qubits)

    def block(self, J, K) -> np.ndarray:
        return self.blocks[label_index(tuple(J)), label_index(tuple(K))]

    def full(self) -> np.ndarray:
        q, M = self.blocks.shape[0], self.blocks.shape[2]
        return self.blocks.transpose(0, 2, 1, 3).reshape(q * M, q * M)

    def qrdm(self) -> np.ndarray:
        return np.trace(self.blocks, axis1=2, axis2=3)

    def modes(self) -> np.ndarray:
        """Reduced density matrix of the modes."""
        return np.einsum("jjab->ab", self.blocks)

    def trace(self) -> complex:
        return complex(np.trace(self.qrdm()))

    def hermiticity_error(self) -> float:
        f = self.full()
        return float(np.max(np.abs(f - f.conj().T)))

    def tail_population(self) -> float:
        """Largest population on the top Fock level of any mode."""
        rho = self.modes().real
        dims = [self.n_max] * self.n_modes
        diag = np.diag(rho).reshape(dims)
        tails = []
        for ax in range(self.n_modes):
            tails.append(np.take(diag, -1, axis=ax).sum())
        return float(max(tails))


# ---------------------------------------------------------------------------
# operators


def _single_mode_ops(dim: int):
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    ad = a.conj().T
    x = (a + ad) / np.sqrt(2.0)
    p = (a - ad) / (1j * np.sqrt(2.0))
    return a, ad, x, p


def _embed(op, mode: int, n_modes: int, dim: int):
    mats = [np.eye(dim, dtype=complex)] * n_modes
    mats[mode] = op
    return reduce(np.kron, mats)


def build_operators(cfg: FockConfig, n_modes: int = 1, dim: int | None = None) -> dict:
    """Truncated ``a, a^dag, x, p`` for each mode and the quadrature vector ``r``.

    Returns a dict with lists ``a``, ``adag``, ``x``, ``p`` (one entry per mode)
    and ``r``, the list ``[x1, p1, x2, p2, ...]``.
    """
    if not 1 <= n_modes <= MAX_MODES:
        raise ValueError(f"oracle supports 1..{MAX_MODES} modes")
    dim = cfg.n_max if dim is None else dim
    a1, ad1, x1, p1 = _single_mode_ops(dim)
    ops = {"a": [], "adag": [], "x": [], "p": [], "r": []}
    for m in range(n_modes):
        for name, op in zip(("a", "adag", "x", "p"), (a1, ad1, x1, p1)):
            ops[name].append(_embed(op, m, n_modes, dim))
        ops["r"] += [ops["x"][-1], ops["p"][-1]]
    return ops


def _truncate(op: np.ndarray, n_modes: int, big: int, small: int) -> np.ndarray:
    """Restrict an operator on ``big^n`` levels to the first ``small^n``."""
    if big == small:
        return op
    shape = (big,) * (2 * n_modes)
    t = op.reshape(shape)
    sl = tuple([slice(0, small)] * (2 * n_modes))
    return t[sl].reshape(small**n_modes, small**n_modes)


def quadratic_operator(G, v, n_modes: int, dim: int, pad: int) -> np.ndarray:
    """``1/2 r^T G r + v^T r`` with exact matrix elements on ``dim`` levels."""
    big = dim + pad
    r = build_operators(FockConfig(n_max=big), n_modes)["r"]
    G = np.asarray(G)
    out = np.zeros((big**n_modes, big**n_modes), dtype=complex)
    for i in range(2 * n_modes):
        out += v[i] * r[i]
        for k in range(2 * n_modes):
            if G[i, k] != 0:
                out += 0.5 * G[i, k] * (r[i] @ r[k])
    return _truncate(out, n_modes, big, dim)


# ---------------------------------------------------------------------------
# Gaussian state synthesis


def williamson(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symplectic eigenvalues ``nu`` and ``S`` with ``sigma = S diag(nu,nu) S^T``."""
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0] // 2
    om = symplectic_form(n)
    half = np.real(sqrtm(sigma))
    ihalf = np.linalg.inv(half)
    K = ihalf @ om @ ihalf
    T, Z = schur(K, output="real")
    nus = np.empty(n)
    # order each 2x2 block as [[0, w], [-w, 0]] with w > 0
    perm = np.eye(2 * n)
    for k in range(n):
        blk = T[2 * k: 2 * k + 2, 2 * k: 2 * k + 2]
        w = blk[0, 1]
        if w < 0:
            perm[:, [2 * k, 2 * k + 1]] = perm[:, [2 * k + 1, 2 * k]]
            w = -w
        nus[k] = 1.0 / w
    O = Z @ perm
    dnu = np.repeat(nus, 2)
    S = half @ O @ np.diag(np.sqrt(dnu))
    return nus, S


def _thermal(nu: float, dim: int) -> np.ndarray:
    nbar = max((nu - 1.0) / 2.0, 0.0)
    k = np.arange(dim)
    if nbar == 0.0:
        p = (k == 0).astype(float)
    else:
        p = np.exp(k * np.log(nbar) - (k + 1) * np.log1p(nbar))
    return np.diag(p).astype(complex)


def _symplectic_unitary(S: np.ndarray, n_modes: int, dim: int, pad: int) -> np.ndarray:
    """Unitary ``U`` with ``U^dag r U = S r`` (in a padded space, then cut)."""
    om = symplectic_form(n_modes)
    # polar split S = O P keeps both logarithms real
    P = np.real(sqrtm(S.T @ S))
    O = S @ np.linalg.inv(P)
    unis = []
    for F in (O, P):
        L = logm(F)
        if np.max(np.abs(np.imag(L))) > 1e-9:
            raise NumericalFailure("symplectic factor has no real logarithm")
        G = om.T @ np.real(L)
        G = 0.5 * (G + G.T)
        Hq = quadratic_operator(G, np.zeros(2 * n_modes), n_modes, dim, pad)
        unis.append(expm(-1j * Hq))
    U = unis[0] @ unis[1]
    return U


def build_initial_state(r0, sigma0, qrdm0, cfg: FockConfig) -> FockDensityMatrix:
    """``rho_gauss(r0, sigma0) (x) rho_q`` via thermal, squeeze/rotate and displace."""
    r0 = np.asarray(r0, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    qrdm0 = np.asarray(qrdm0, dtype=complex)
    n = r0.shape[0] // 2
    if not 1 <= n <= MAX_MODES:
        raise ValueError(f"oracle supports 1..{MAX_MODES} modes")
    herm = sigma0 + 1j * symplectic_form(n)
    if np.linalg.eigvalsh(0.5 * (herm + herm.conj().T)).min() < -1e-9:
        raise ValueError("initial covariance is unphysical")
    nq = int(round(math.log2(qrdm0.shape[0])))
    big = cfg.n_max + cfg.synth_pad
    nus, S = williamson(sigma0)
    rho = reduce(np.kron, [_thermal(nu, big) for nu in nus])
    U = _symplectic_unitary(S, n, big, cfg.pad)
    rho = U @ rho @ U.conj().T
    if np.any(r0):
        v = symplectic_form(n) @ r0
        Hd = quadratic_operator(np.zeros((2 * n, 2 * n)), v, n, big, cfg.pad)
        Dop = expm(1j * Hd)
        rho = Dop @ rho @ Dop.conj().T
    rho = _truncate(rho, n, big, cfg.n_max)
    loss = 1.0 - np.trace(rho).real
    if loss > cfg.overflow_tol:
        raise NumericalFailure(
            f"truncation n_max={cfg.n_max} loses {loss:.2e} of the initial state; increase n_max"
        )
    rho = rho / np.trace(rho).real
    blocks = qrdm0[:, :, None, None] * rho[None, None, :, :]
    out = FockDensityMatrix(blocks, n, nq, cfg.n_max, 0.0, {"truncation_loss": float(loss)})
    out.info["tail"] = out.tail_population()
    return out


# ---------------------------------------------------------------------------
# dynamics


class Liouvillian:
    """Matrix-free generator for all blocks of the joint density matrix."""

    def __init__(self, model: HybridModel, cfg: FockConfig):
        n, dim = model.n_modes, cfg.n_max
        self.shape = None
        labels = branch_labels(model.n_qubits)
        r = build_operators(cfg, n)["r"]
        M = dim**n
        # jump operators from the eigen-decomposition of B
        lam, vec = np.linalg.eigh(model.B)
        self.jumps = []
        no_jump = np.zeros((M, M), dtype=complex)
        for k, lk in enumerate(lam):
            if abs(lk) < 1e-14:
                continue
            L = sum(vec[i, k] * r[i] for i in range(2 * n))
            self.jumps.append((lk, L, L.conj().T))
            no_jump += lk * (L.conj().T @ L)
        heff = []
        for J in labels:
            b = resolve_branch(model, J)
            H = quadratic_operator(b.H, model.d - b.r, n, dim, cfg.pad)
            H = H + 0.5 * b.const * np.eye(M)
            heff.append(H - 0.5j * no_jump)
        self.heff = np.array(heff)
        self.heff_dag = np.conj(np.transpose(self.heff, (0, 2, 1)))
        q = len(labels)
        deph = np.zeros((q, q))
        for a, J in enumerate(labels):
            for c, K in enumerate(labels):
                deph[a, c] = sum(g * (j * k - 1) / 2 for g, j, k in zip(model.Gamma_z, J, K))
        self.deph = deph[:, :, None, None]

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (np.matmul(self.heff[:, None], rho) - np.matmul(rho, self.heff_dag[None, :]))
        for lk, L, Ld in self.jumps:
            out += lk * (L @ rho @ Ld)
        out += self.deph * rho
        return out


def evolve(model: HybridModel, rho0: FockDensityMatrix, tau_grid, cfg: FockConfig) -> list[FockDensityMatrix]:
    """Integrate the Lindblad equation and return snapshots on ``tau_grid``."""
    if model.n_modes != rho0.n_modes or model.n_qubits != rho0.n_qubits:
        raise ValueError("model and oracle state dimensions differ")
    if cfg.n_max != rho0.n_max:
        raise ValueError("oracle state was built with a different n_max")
    times = np.asarray(tau_grid, dtype=float)
    gen = Liouvillian(model, cfg)
    shape = rho0.blocks.shape

    def f(t, y):
        rho = np.ascontiguousarray(y).view(np.complex128).reshape(shape)
        return gen(rho).ravel().view(np.float64)

    y0 = np.ascontiguousarray(rho0.blocks, dtype=complex).ravel().view(np.float64).copy()
    if times.size == 1 and times[0] == rho0.time:
        ys = [y0]
    else:
        grid = times if times[0] == rho0.time else np.concatenate([[rho0.time], times])
        sol = solve_ivp(f, (grid[0], grid[-1]), y0, method="RK45", t_eval=grid,
                        rtol=cfg.rtol, atol=cfg.atol)
        if not sol.success:
            raise NumericalFailure(f"oracle integration failed: {sol.message}")
        ys = list(sol.y.T[len(grid) - len(times):])
    out = []
    for t, y in zip(times, ys):
        blocks = np.ascontiguousarray(y).view(np.complex128).reshape(shape).copy()
        st = FockDensityMatrix(blocks, rho0.n_modes, rho0.n_qubits, rho0.n_max, float(t))
        tail = st.tail_population()
        st.info["tail"] = tail
        st.info["converged"] = tail < cfg.convergence_factor
        if tail > cfg.overflow_tol:
            raise NumericalFailure(f"population {tail:.2e} reached the top Fock level at tau={t:.4g}")
        out.append(st)
    return out


# ---------------------------------------------------------------------------
# phase-space extraction


def _weyl(rt, n_modes: int, dim: int, pad: int) -> np.ndarray:
    """``exp(i rt . r)`` with exact small-displacement elements on ``dim`` levels."""
    big = dim + pad
    Hd = quadratic_operator(np.zeros((2 * n_modes, 2 * n_modes)), rt, n_modes, big, 0)
    return _truncate(expm(1j * Hd), n_modes, big, dim)


def characteristic(rho: FockDensityMatrix, J, K, r_tilde, pad: int = 20) -> complex:
    """``Tr[exp(i r_tilde . r) rho_JK]`` computed in the Fock basis."""
    W = _weyl(np.asarray(r_tilde, dtype=float), rho.n_modes, rho.n_max, pad)
    return complex(np.sum(W.T * rho.block(J, K)))


def extract_phase_space(rho: FockDensityMatrix, J, K, method: str = "stencil",
                        radius: float = 1e-2, pad: int = 20):
    """Recover ``(r_JK, sigma_JK, rho_q_JK)`` from one block.

    ``method="stencil"`` fits the quadratic form of ``log chi_JK`` on a
    symmetric stencil of radius ``radius`` around the origin;
    ``method="moments"`` uses symmetrised second moments of the block,
    ``sigma = <{r_a, r_b}>/rho_q - 2 r_a r_b``.
    """
    blk = rho.block(J, K)
    n = rho.n_modes
    dim2 = 2 * n
    rq = complex(np.trace(blk))
    if abs(rq) < 1e-12:
        raise NumericalFailure(f"block {J},{K} has vanishing weight; phase-space quantities undefined")
    ops = build_operators(FockConfig(n_max=rho.n_max + 2), n)["r"]
    big = rho.n_max + 2
    r_ops = [_truncate(o, n, big, rho.n_max) for o in ops]
    r = np.array([np.sum(o.T * blk) for o in r_ops]) / rq
    if method == "moments":
        sigma = np.empty((dim2, dim2), dtype=complex)
        for a in range(dim2):
            for b in range(dim2):
                anti = _truncate(ops[a] @ ops[b] + ops[b] @ ops[a], n, big, rho.n_max)
                sigma[a, b] = np.sum(anti.T * blk) / rq - 2 * r[a] * r[b]
    elif method == "stencil":
        sigma = _stencil_sigma(rho, J, K, rq, radius, pad)
    else:
        raise ValueError(f"unknown extraction method {method!r}")
    if J == K or tuple(J) == tuple(K):
        return r.real, 0.5 * (sigma + sigma.T).real, rq.real
    return r, 0.5 * (sigma + sigma.T), rq


def _stencil_sigma(rho, J, K, rq, h, pad):
    n = rho.n_modes
    dim2 = 2 * n
    pts = [np.zeros(dim2)]
    for a in range(dim2):
        e = np.zeros(dim2)
        e[a] = h
        pts += [e, -e]
        for b in range(a + 1, dim2):
            f = np.zeros(dim2)
            f[a] = f[b] = h
            g = np.zeros(dim2)
            g[a], g[b] = h, -h
            pts += [f, -f, g, -g]
    blk = rho.block(J, K)
    vals = []
    for p in pts:
        W = _weyl(p, n, rho.n_max, pad)
        vals.append(np.log(np.sum(W.T * blk) / rq))
    # unknowns: c, r (dim2), upper-triangular sigma entries
    tri = [(a, b) for a in range(dim2) for b in range(a, dim2)]
    A = np.zeros((len(pts), 1 + dim2 + len(tri)), dtype=complex)
    for i, p in enumerate(pts):
        A[i, 0] = 1.0
        A[i, 1: 1 + dim2] = 1j * p
        for c, (a, b) in enumerate(tri):
            A[i, 1 + dim2 + c] = -0.25 * p[a] * p[b] * (1 if a == b else 2)
    sol, *_ = np.linalg.lstsq(A, np.array(vals), rcond=None)
    sigma = np.zeros((dim2, dim2), dtype=complex)
    for c, (a, b) in enumerate(tri):
        sigma[a, b] = sigma[b, a] = sol[1 + dim2 + c]
    return sigma


def moments(rho: FockDensityMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance (vacuum = identity) of the modes' reduced state."""
    n = rho.n_modes
    red = rho.modes()
    big = rho.n_max + 2
    ops = build_operators(FockConfig(n_max=big), n)["r"]
    r_ops = [_truncate(o, n, big, rho.n_max) for o in ops]
    r = np.array([np.sum(o.T * red) for o in r_ops]).real
    sigma = np.empty((2 * n, 2 * n))
    for a in range(2 * n):
        for b in range(2 * n):
            anti = _truncate(ops[a] @ ops[b] + ops[b] @ ops[a], n, big, rho.n_max)
            sigma[a, b] = np.sum(anti.T * red).real - 2 * r[a] * r[b]
    return r, sigma


# ---------------------------------------------------------------------------
# Wigner function and homodyne statistics


def wigner_grid(rho_m: np.ndarray, xvec, pvec) -> np.ndarray:
    """Wigner function of a single-mode Hermitian density matrix on a grid.

    Normalised to unit integral (vacuum peak ``1/pi``); uses the Laguerre
    recursion on ``A = (x + i p) / sqrt(2)``.  Returns shape ``(len(pvec), len(xvec))``.
    """
    rho_m = np.asarray(rho_m, dtype=complex)
    if np.max(np.abs(rho_m - rho_m.conj().T)) > 1e-10:
        raise ValueError("wigner_grid needs a Hermitian operator")
    M = rho_m.shape[0]
    X, P = np.meshgrid(np.asarray(xvec, float), np.asarray(pvec, float))
    A2 = X + 1j * P  # 2A with A = (x + i p)/sqrt(2), scaled by sqrt(2)
    Wlist = [None] * M
    Wlist[0] = np.exp(-np.abs(A2) ** 2) / np.pi
    W = rho_m[0, 0].real * Wlist[0].real
    for k in range(1, M):
        Wlist[k] = A2 * np.sqrt(2.0) * Wlist[k - 1] / np.sqrt(k)
        W = W + 2 * np.real(rho_m[0, k] * Wlist[k])
    for m in range(1, M):
        temp = Wlist[m].copy()
        Wlist[m] = (np.sqrt(2.0) * np.conj(A2) * temp - np.sqrt(m) * Wlist[m - 1]) / np.sqrt(m)
        W = W + np.real(rho_m[m, m] * Wlist[m])
        for k in range(m + 1, M):
            temp2 = (np.sqrt(2.0) * A2 * Wlist[k - 1] - np.sqrt(m) * temp) / np.sqrt(k)
            temp = Wlist[k].copy()
            Wlist[k] = temp2
            W = W + 2 * np.real(rho_m[m, k] * Wlist[k])
    return W


def _hermite_functions(x: np.ndarray, M: int) -> np.ndarray:
    """``psi_k(x) = <x|k>`` for ``k < M`` by the stable three-term recursion."""
    x = np.asarray(x, dtype=float)
    psi = np.empty((M, x.size))
    psi[0] = np.pi ** -0.25 * np.exp(-x**2 / 2)
    if M > 1:
        psi[1] = np.sqrt(2.0) * x * psi[0]
    for k in range(2, M):
        psi[k] = np.sqrt(2.0 / k) * x * psi[k - 1] - np.sqrt((k - 1) / k) * psi[k - 2]
    return psi


def homodyne_block_density(block: np.ndarray, outcomes, phi: float = 0.0, eta: float = 1.0,
                           quad_points: int = 201) -> np.ndarray:
    """``<x_phi|block|x_phi>`` smeared by detector inefficiency (single mode).

    ``x_phi = cos(phi) x + sin(phi) p``; inefficiency adds Gaussian noise of
    variance ``tan(theta)^2 / 2`` with ``theta = arccos(sqrt(eta))``.
    """
    block = np.asarray(block, dtype=complex)
    M = block.shape[0]
    k = np.arange(M)
    # rotate so that x_phi becomes x: rho -> U rho U^dag with U = exp(-i phi n)
    ph = np.exp(-1j * phi * k)
    rot = ph[:, None] * block * ph.conj()[None, :]
    xs = np.atleast_1d(np.asarray(outcomes, dtype=float))
    t2 = (1.0 - eta) / eta
    if t2 == 0.0:
        psi = _hermite_functions(xs, M)
        return np.einsum("ax,ab,bx->x", psi, rot, psi)
    # Gauss-Hermite convolution with the noise kernel exp(-y^2/t2)/sqrt(pi t2)
    nodes, weights = np.polynomial.hermite.hermgauss(quad_points)
    shifts = np.sqrt(t2) * nodes
    pts = xs[:, None] - shifts[None, :]
    psi = _hermite_functions(pts.ravel(), M).reshape(M, *pts.shape)
    dens = np.einsum("axq,ab,bxq->xq", psi, rot, psi)
    return dens @ weights / np.sqrt(np.pi)


def homodyne_density(rho: FockDensityMatrix, outcomes, phi=0.0, eta=1.0) -> np.ndarray:
    """Marginal outcome density of a single-mode homodyne measurement."""
    if rho.n_modes != 1:
        raise ValueError("homodyne oracle supports one mode")
    return homodyne_block_density(rho.modes(), outcomes, phi, eta).real


def homodyne_post_qrdm(rho: FockDensityMatrix, outcome: float, phi=0.0, eta=1.0) -> np.ndarray:
    """Unnormalised qubit state conditioned on a homodyne outcome."""
    if rho.n_modes != 1:
        raise ValueError("homodyne oracle supports one mode")
    q = rho.blocks.shape[0]
    out = np.empty((q, q), dtype=complex)
    for a in range(q):
        for b in range(q):
            out[a, b] = homodyne_block_density(rho.blocks[a, b], [outcome], phi, eta)[0]
    return out
