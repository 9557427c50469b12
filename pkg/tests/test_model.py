import warnings

import numpy as np
import pytest

from gcsim.model import (
    B_from_noise,
    HybridModel,
    dephasing_rate,
    ladder_noise_to_canonical,
    loss_B,
    noise_from_B,
    noise_from_bath_coupling,
    resolve_branch,
)
from gcsim.phase_space import symplectic_form


def test_defaults_and_flags():
    m = HybridModel(1, 2, np.eye(2), [0, 0])
    assert m.is_linear and not m.is_noisy
    assert len(m.H_q) == 2 and m.zz.shape == (2, 2)
    m2 = m.with_(H_q=(np.eye(2), np.zeros((2, 2))))
    assert not m2.is_linear


def test_shape_validation():
    with pytest.raises(ValueError):
        HybridModel(1, 1, np.eye(3), [0, 0])
    with pytest.raises(ValueError):
        HybridModel(1, 1, np.eye(2), [0, 0], H_q=(np.eye(2), np.eye(2)))
    with pytest.raises(ValueError):
        HybridModel(1, 1, np.eye(2), [0, 0], D=-np.eye(2))
    with pytest.raises(ValueError):
        HybridModel(1, 1, np.eye(2), [0, 0], Gamma_z=[-0.1])


def test_symmetrisation_warns_only_above_threshold():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        HybridModel(1, 0, np.array([[1.0, 1e-13], [0.0, 1.0]]), [0, 0])
    with pytest.warns(UserWarning):
        m = HybridModel(1, 0, np.array([[1.0, 0.2], [0.0, 1.0]]), [0, 0])
    np.testing.assert_allclose(m.H_m, [[1.0, 0.1], [0.1, 1.0]])


def test_resolve_branch_sums_couplings():
    Hq = (np.diag([0.5, 0.5]), np.diag([0.1, 0.2]))
    rq = (np.array([1.0, 0.0]), np.array([0.0, 2.0]))
    zz = np.array([[0, 0.3], [0, 0]])
    m = HybridModel(1, 2, np.eye(2), [0.1, 0.1], H_q=Hq, r_q=rq, H_q0=[1.0, 2.0], zz=zz)
    b = resolve_branch(m, (1, -1))
    np.testing.assert_allclose(b.H, np.eye(2) + Hq[0] - Hq[1])
    np.testing.assert_allclose(b.r, [1.1, -1.9])
    assert b.const == pytest.approx(1.0 - 2.0 - 2 * 0.3)
    with pytest.raises(ValueError):
        resolve_branch(m, (1,))


def test_dephasing_rate_counts_differing_qubits():
    m = HybridModel(1, 2, np.eye(2), [0, 0], Gamma_z=[0.4, 1.0])
    assert dephasing_rate(m, (1, 1), (1, 1)) == 0
    assert dephasing_rate(m, (1, 1), (-1, 1)) == pytest.approx(0.4)
    assert dephasing_rate(m, (1, 1), (-1, -1)) == pytest.approx(1.4)


def test_B_round_trip(rng):
    G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    B = G @ G.conj().T
    D, E = noise_from_B(B)
    np.testing.assert_allclose(B_from_noise(D, E), B, atol=1e-12)
    assert np.linalg.eigvalsh(D).min() > -1e-12
    np.testing.assert_allclose(E, -E.T)


def test_loss_noise_from_ladder_form():
    kappa = 0.7
    B, d = ladder_noise_to_canonical(np.diag([0.0, kappa]), np.zeros(2))
    np.testing.assert_allclose(B, loss_B(kappa), atol=1e-15)
    D, E = noise_from_B(B)
    np.testing.assert_allclose(D, kappa * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(E, 0.5 * kappa * symplectic_form(1), atol=1e-15)


def test_position_diffusion_noise():
    # Gamma (x rho x - 1/2 {x x, rho}) -> B = diag(Gamma, 0), D = diag(0, 2 Gamma)
    D, E = noise_from_B(np.diag([0.1, 0.0]))
    np.testing.assert_allclose(D, np.diag([0.0, 0.2]))
    np.testing.assert_allclose(E, 0.0)


def test_bath_coupling_beam_splitter_vacuum():
    # weak beam-splitter coupling sqrt(kappa) to a vacuum bath reproduces loss
    kappa = 0.5
    g = np.sqrt(kappa)
    H_C = g * np.array([[0.0, -1.0], [1.0, 0.0]])
    D, E, d = noise_from_bath_coupling(H_C, np.eye(2), np.zeros(2))
    np.testing.assert_allclose(D, kappa * np.eye(2))
    np.testing.assert_allclose(np.abs(E), np.abs(0.5 * kappa * symplectic_form(1)))
    np.testing.assert_allclose(d, 0)
    with pytest.raises(ValueError):
        noise_from_bath_coupling(H_C, 0.1 * np.eye(2), np.zeros(2))
