"""Fock-space oracle: its own sanity checks and cross-checks against the phase-space engines."""

import numpy as np
import pytest
from scipy.integrate import simpson

from conftest import stern_gerlach_model
from gcsim.dynamics import closed_form_linear_open, integrate
from gcsim.measurement import expectation_product, generaldyne_post_qrdm, homodyne_cov
from gcsim.model import HybridModel, loss_B, noise_from_B
from gcsim.oracle import (
    FockConfig,
    build_initial_state,
    build_operators,
    evolve,
    extract_phase_space,
    homodyne_post_qrdm,
    moments,
    wigner_grid,
)
from gcsim.phase_space import product_state, qrdm
from gcsim.scenarios import scenario_dispersive


def test_ladder_and_quadrature_matrices():
    ops = build_operators(FockConfig(n_max=8))
    a, x, p = ops["a"][0], ops["x"][0], ops["p"][0]
    assert a[0, 1] == pytest.approx(1.0)
    assert (x @ x)[0, 0].real == pytest.approx(0.5)
    comm = x @ p - p @ x
    defect = comm - 1j * np.eye(8)
    assert np.abs(defect[:-1, :-1]).max() < 1e-14
    assert abs(defect[-1, -1]) > 1


def test_vacuum_and_displaced_initial_states():
    cfg = FockConfig(n_max=30)
    vac = build_initial_state([0, 0], np.eye(2), np.ones((1, 1)), cfg)
    assert vac.modes()[0, 0].real == pytest.approx(1.0, abs=1e-12)
    disp = build_initial_state([2.0, 0.0], np.eye(2), np.ones((1, 1)), cfg)
    r, sigma = moments(disp)
    np.testing.assert_allclose(r, [2.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(sigma, np.eye(2), atol=1e-8)


def test_squeezed_thermal_synthesis():
    cfg = FockConfig(n_max=80)
    rho = build_initial_state([0, 0], 2.6 * np.diag([2.0, 0.5]), np.ones((1, 1)), cfg)
    _, sigma = moments(rho)
    np.testing.assert_allclose(sigma, 2.6 * np.diag([2.0, 0.5]), atol=1e-6)


def test_no_dynamics_is_constant():
    cfg = FockConfig(n_max=20)
    m = HybridModel(1, 1, np.zeros((2, 2)), [0, 0])
    rho0 = build_initial_state([0.5, 0.0], np.eye(2), np.full((2, 2), 0.5), cfg)
    out = evolve(m, rho0, [0.0, 1.0], cfg)
    assert np.abs(out[1].blocks - rho0.blocks).max() < 1e-10


def test_cavity_decay_matches_closed_form():
    kappa, omega, alpha = 0.4, 1.0, 1.5
    D, E = noise_from_B(loss_B(kappa))
    m = HybridModel(1, 0, omega * np.eye(2), [0, 0], D=D, E=E)
    cfg = FockConfig(n_max=30)
    r0 = np.array([np.sqrt(2) * alpha, 0.0])
    rho0 = build_initial_state(r0, np.eye(2), np.ones((1, 1)), cfg)
    taus = np.array([0.0, 0.5, 1.5])
    a_op = build_operators(cfg)["a"][0]
    for t, rho in zip(taus, evolve(m, rho0, taus, cfg)):
        a_mean = np.sum(a_op.T * rho.modes())
        assert a_mean == pytest.approx(alpha * np.exp(-kappa * t / 2) * np.exp(-1j * omega * t), abs=1e-8)
        assert rho.trace().real == pytest.approx(1.0, abs=1e-8)
        assert rho.hermiticity_error() < 1e-10
        gcs = closed_form_linear_open(m, product_state(r0, np.eye(2), np.ones((1, 1)), n_qubits=0), t)
        np.testing.assert_allclose(moments(rho)[0], gcs[((), ())].r.real, atol=1e-8)


def test_dispersive_branch_rotation_frequencies():
    chi = 1.0
    m = HybridModel(1, 2, np.zeros((2, 2)), [0, 0], H_q=(0.5 * chi * np.eye(2),) * 2)
    cfg = FockConfig(n_max=30)
    rho0 = build_initial_state([1.5, 0.0], np.eye(2), np.full((4, 4), 0.25), cfg)
    t = 0.7
    rho = evolve(m, rho0, [0.0, t], cfg)[1]
    # rotation frequencies -chi, 0, 0, +chi for labels (-,-), (+,-), (-,+), (+,+)
    for lab, w in (((1, 1), chi), ((1, -1), 0.0), ((-1, 1), 0.0), ((-1, -1), -chi)):
        r, _, _ = extract_phase_space(rho, lab, lab, method="moments")
        np.testing.assert_allclose(r, 1.5 * np.array([np.cos(w * t), -np.sin(w * t)]), atol=1e-8)


def test_product_state_extraction_round_trip():
    cfg = FockConfig(n_max=40)
    q0 = np.array([[0.6, 0.3 - 0.2j], [0.3 + 0.2j, 0.4]])
    sigma0 = np.array([[1.5, 0.2], [0.2, 0.9]])
    rho = build_initial_state([0.3, -0.4], sigma0, q0, cfg)
    for J, K in (((1,), (1,)), ((1,), (-1,))):
        r, sigma, rq = extract_phase_space(rho, J, K)
        np.testing.assert_allclose(r, [0.3, -0.4], atol=1e-8)
        np.testing.assert_allclose(sigma, sigma0, atol=1e-5)
    np.testing.assert_allclose(rho.qrdm(), q0, atol=1e-10)


def test_stern_gerlach_off_diagonal_mean_at_full_period():
    f_q, Gamma_x = 0.5, 0.1
    m = stern_gerlach_model(f_u=0.5, f_q=f_q, Gamma_x=Gamma_x, Gamma_z=0.0)
    cfg = FockConfig(n_max=40)
    rho0 = build_initial_state([0, 0], np.eye(2), np.full((2, 2), 0.5), cfg)
    rho = evolve(m, rho0, [0.0, 2 * np.pi], cfg)[1]
    # the printed off-diagonal mean is that of the (-1, +1) block
    r, _, _ = extract_phase_space(rho, (-1,), (1,))
    np.testing.assert_allclose(r, [0.0, 2j * np.pi * f_q * Gamma_x], atol=1e-3)
    r_pm, _, _ = extract_phase_space(rho, (1,), (-1,))
    np.testing.assert_allclose(r_pm, np.conj(r), atol=1e-10)


def test_stern_gerlach_position_expectation():
    m = stern_gerlach_model(f_u=0.5, f_q=0.5, Gamma_x=0.05, Gamma_z=0.2)
    cfg = FockConfig(n_max=40)
    sigma0 = 1.4 * np.diag([1.5, 1 / 1.5])
    rho0 = build_initial_state([0, 0], sigma0, np.full((2, 2), 0.5), cfg)
    taus = np.linspace(0, np.pi, 4)
    x_op = build_operators(cfg)["x"][0]
    st0 = product_state([0, 0], sigma0, np.full((2, 2), 0.5))
    for t, rho in zip(taus, evolve(m, rho0, taus, cfg)):
        gcs = closed_form_linear_open(m, st0, t)
        _, x_gcs = expectation_product(gcs, [0])
        assert x_gcs.real == pytest.approx(np.sum(x_op.T * rho.modes()).real, abs=1e-3)


def test_wigner_grid_vacuum():
    xs = np.linspace(-6, 6, 121)
    W = wigner_grid(np.diag([1.0] + [0.0] * 9), xs, xs)
    assert W.max() == pytest.approx(1 / np.pi)
    assert W.min() > -1e-15
    assert simpson(simpson(W, x=xs), x=xs) == pytest.approx(1.0, abs=1e-6)


def test_truncation_convergence():
    """Doubling the truncation changes the reported observables by < 1e-6."""
    cfg_small, cfg_big = FockConfig(n_max=25), FockConfig(n_max=50)
    m = scenario_dispersive(chi=1.0, kappa=0.5, x0=1.0, s=1.0).model
    res = []
    for cfg in (cfg_small, cfg_big):
        rho0 = build_initial_state([1.0, 0.0], np.eye(2), np.full((4, 4), 0.25), cfg)
        rho = evolve(m, rho0, [0.0, 1.0], cfg)[1]
        r, sigma, rq = extract_phase_space(rho, (1, 1), (-1, -1), method="moments")
        res.append(np.concatenate([r, sigma.ravel(), [rq]]))
    assert np.abs(res[0] - res[1]).max() < 1e-6


def test_homodyne_post_qrdm_matches_phase_space():
    cfg_s = scenario_dispersive(chi=1.0, kappa=3.0, x0=2.5, s=1.5, eta=0.6)
    fcfg = FockConfig(n_max=40)
    tau = cfg_s.times[-1]
    rho0 = build_initial_state(cfg_s.r0, cfg_s.sigma0, cfg_s.qrdm0, fcfg)
    rho = evolve(cfg_s.model, rho0, [0.0, tau], fcfg)[1]
    st = integrate(cfg_s.model, cfg_s.initial_state(), [0.0, tau])[-1]
    det = homodyne_cov(np.pi / 2, 0.6, 1)
    for y in (-1.0, 0.0, 0.7):
        ref = homodyne_post_qrdm(rho, y, phi=np.pi / 2, eta=0.6)
        got = generaldyne_post_qrdm(st, det, [y]).unnormalized
        np.testing.assert_allclose(got, ref, atol=1e-3)
    np.testing.assert_allclose(qrdm(st), rho.qrdm(), atol=1e-6)


@pytest.mark.parametrize("seed", [5, 6])
def test_random_two_qubit_model_matches_oracle(seed):
    """Constant-term bookkeeping (H_q0, zz, drift) of multi-qubit blocks against the oracle."""
    from conftest import random_model

    rng = np.random.default_rng(seed)
    m = random_model(rng, 1, 2, quadratic=True, noisy=True)
    m = HybridModel(1, 2, m.H_m, m.r_m, H_q=m.H_q, r_q=m.r_q, H_q0=m.H_q0, Gamma_z=m.Gamma_z, D=m.D, E=m.E,
                    d=m.d, zz=np.array([[0.0, 0.4], [0.0, 0.0]]))
    q0 = np.full((4, 4), 0.25)
    r0 = np.array([0.4, -0.2])
    st0 = product_state(r0, np.eye(2), q0)
    cfg = FockConfig(n_max=40)
    taus = [0.0, 0.8]
    st = integrate(m, st0, taus)[-1]
    rho = evolve(m, build_initial_state(r0, np.eye(2), q0, cfg), taus, cfg)[-1]
    np.testing.assert_allclose(qrdm(st), rho.qrdm(), atol=1e-6)
    for J, K in (((1, 1), (-1, 1)), ((1, -1), (-1, -1)), ((1, 1), (-1, -1))):
        r, _, rq = extract_phase_space(rho, J, K, method="moments")
        np.testing.assert_allclose(st[(J, K)].r, r, atol=1e-6)
        assert st[(J, K)].amplitude == pytest.approx(rq, abs=1e-6)


def test_stern_gerlach_full_period_phase_has_no_dephasing_term():
    f_q, f_u, Gamma_z = 0.5, 0.4, 0.3
    m = stern_gerlach_model(f_u=f_u, f_q=f_q, Gamma_x=0.0, Gamma_z=Gamma_z)
    cfg = FockConfig(n_max=40)
    rho = evolve(m, build_initial_state([0, 0], np.eye(2), np.full((2, 2), 0.5), cfg), [0.0, 2 * np.pi], cfg)[1]
    amp = rho.qrdm()[0, 1]
    assert abs(amp / abs(amp) - np.exp(4j * np.pi * f_q * f_u)) < 1e-6
    assert abs(amp) == pytest.approx(0.5 * np.exp(-2 * np.pi * Gamma_z), abs=1e-6)
