"""Shared fixtures and random-model generators for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.linalg import expm

from gcsim.model import HybridModel, noise_from_B
from gcsim.phase_space import product_state, symplectic_form

# Acceptance results are collected here and printed once at the end of the run.
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_symplectic(rng: np.random.Generator, n: int, scale: float = 0.4) -> np.ndarray:
    K = rng.normal(size=(2 * n, 2 * n)) * scale
    return expm(symplectic_form(n) @ (0.5 * (K + K.T)))


def random_physical_sigma(rng: np.random.Generator, n: int) -> np.ndarray:
    S = random_symplectic(rng, n)
    nu = 1.0 + rng.exponential(0.5, size=n)
    return S @ np.diag(np.repeat(nu, 2)) @ S.T


def random_qrdm(rng: np.random.Generator, n_qubits: int) -> np.ndarray:
    d = 2**n_qubits
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


def random_spd(rng: np.random.Generator, dim: int, shift: float = 0.5) -> np.ndarray:
    G = rng.normal(size=(dim, dim))
    return G @ G.T / dim + shift * np.eye(dim)


def random_noise(rng: np.random.Generator, n: int, strength: float = 0.3):
    """Diffusion and drift from a random positive semidefinite noise matrix ``B``."""
    G = (rng.normal(size=(2 * n, 2 * n)) + 1j * rng.normal(size=(2 * n, 2 * n))) * np.sqrt(strength / (2 * n))
    return noise_from_B(G @ G.conj().T)


def random_model(rng: np.random.Generator, n_modes: int, n_qubits: int, quadratic: bool = True,
                 noisy: bool = True) -> HybridModel:
    dim = 2 * n_modes
    H_m = random_spd(rng, dim, 0.8)
    H_q = tuple(0.3 * (lambda g: 0.5 * (g + g.T))(rng.normal(size=(dim, dim))) if quadratic
                else np.zeros((dim, dim)) for _ in range(n_qubits))
    r_q = tuple(rng.normal(size=dim) * 0.5 for _ in range(n_qubits))
    kw = {}
    if noisy:
        kw["D"], kw["E"] = random_noise(rng, n_modes)
        kw["d"] = rng.normal(size=dim) * 0.3
        kw["Gamma_z"] = rng.uniform(0, 0.3, size=n_qubits)
    return HybridModel(n_modes, n_qubits, H_m, rng.normal(size=dim) * 0.5, H_q=H_q, r_q=r_q,
                       H_q0=rng.normal(size=n_qubits), **kw)


def random_product_state(rng: np.random.Generator, n_modes: int, n_qubits: int):
    return product_state(rng.normal(size=2 * n_modes), random_physical_sigma(rng, n_modes),
                         random_qrdm(rng, n_qubits))


def stern_gerlach_model(f_u=2.0, f_q=0.5, Gamma_x=0.1, Gamma_z=0.8, omega_q=0.0) -> HybridModel:
    return HybridModel(1, 1, np.eye(2), [f_u, 0.0], r_q=[np.array([f_q, 0.0])],
                       H_q0=[omega_q], Gamma_z=[Gamma_z], D=np.diag([0.0, 2 * Gamma_x]))


def stern_gerlach_state(N_p=0.8, s=2.0):
    return product_state([0.0, 0.0], (1 + 2 * N_p) * np.diag([s, 1 / s]), np.full((2, 2), 0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
