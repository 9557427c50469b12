"""Closed-form reference formulas for the built-in scenarios.

Each formula is registered as an :class:`AnalyticRegression` under a name
usable from the command line (``gcsim eval <name> key=value ...``).  The
``status`` field distinguishes formulas reproduced as published
(``"published"``) from their re-derived counterparts (``"derived"``) where
the published display and a direct solution of the dynamics disagree; the
simulator is always compared against the derived form, and the published
form is kept so that the disagreement stays visible and testable.

Conventions: Stern-Gerlach branches carry force ``f_u + j f_q`` on the label
``j = +/-1``; off-diagonal quantities refer to the ``(+1, -1)`` block; the
phase is the imaginary part of that block's log-amplitude.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import constants

from .errors import ConfigError


@dataclass(frozen=True)
class AnalyticRegression:
    name: str
    func: Callable
    origin: str
    status: str = "published"

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(k for k in inspect.signature(self.func).parameters if not k.startswith("_"))

    def __call__(self, **kw) -> float:
        missing = [p for p in self.params if p not in kw and
                   inspect.signature(self.func).parameters[p].default is inspect.Parameter.empty]
        if missing:
            raise ConfigError(f"regression {self.name!r} needs parameters {missing}")
        unknown = [k for k in kw if k not in self.params]
        if unknown:
            raise ConfigError(f"regression {self.name!r} got unknown parameters {unknown}")
        return self.func(**kw)


REGISTRY: dict[str, AnalyticRegression] = {}


def _register(name: str, origin: str, status: str = "published"):
    def deco(func):
        REGISTRY[name] = AnalyticRegression(name, func, origin, status)
        return func
    return deco


def regression_eval(name: str, **params) -> float:
    """Evaluate a registered closed-form formula."""
    try:
        reg = REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown regression {name!r}; known: {sorted(REGISTRY)}") from None
    return reg(**{k: float(v) for k, v in params.items()})


# ---------------------------------------------------------------------------
# dispersive two-qubit entanglement


@_register("tau_max", "dispersive: time of maximal branch separation")
def tau_max(chi, kappa):
    return float(np.arctan(2 * chi / kappa) / chi)


@_register("sigma_o", "dispersive: odd-subspace homodyne variance")
def sigma_o(tau, s, eta, kappa):
    return float((s + np.exp(-kappa * tau) * eta * (1 - s)) / (s * eta))


@_register("sigma_e", "dispersive: even-subspace homodyne variance")
def sigma_e(tau, s, eta, kappa, chi):
    c2, s2 = np.cos(chi * tau) ** 2, np.sin(chi * tau) ** 2
    return float((s + np.exp(-kappa * tau) * eta * (c2 - s + s**2 * s2)) / (s * eta))


@_register("r_p", "dispersive: even-branch momentum displacement")
def r_p(tau, x0, kappa, chi):
    return float(x0 * np.exp(-kappa * tau / 2) * np.sin(chi * tau))


@_register("dispersive_p_density", "dispersive: three-Gaussian momentum homodyne density")
def dispersive_p_density(p_m, tau, chi, kappa, x0, s, eta):
    so = sigma_o(tau, s, eta, kappa)
    se = sigma_e(tau, s, eta, kappa, chi)
    rp = r_p(tau, x0, kappa, chi)
    odd = np.exp(-p_m**2 / so) / (2 * np.sqrt(np.pi * so))
    even = (np.exp(-(p_m + rp) ** 2 / se) + np.exp(-(p_m - rp) ** 2 / se)) / (4 * np.sqrt(np.pi * se))
    return odd + even


@_register("chi_dispersive", "dispersive: effective shift 4 g^2 / detuning")
def chi_dispersive(g, Delta):
    return float(4 * g**2 / Delta)


# ---------------------------------------------------------------------------
# Stern-Gerlach interferometer


@_register("gamma_x", "Stern-Gerlach: diffusion rate of an Ohmic high-temperature bath (SI inputs)")
def gamma_x(gamma0, T_p, omega):
    return float(2 * gamma0 * constants.k * T_p / (constants.hbar * omega**2))


@_register("delta_x", "Stern-Gerlach: branch separation at half period")
def delta_x(f_q):
    return 4.0 * f_q


def sg_rotation(tau) -> np.ndarray:
    """Phase-space flow ``exp(tau Omega)`` of the unit-frequency oscillator."""
    c, s = np.cos(tau), np.sin(tau)
    return np.array([[c, s], [-s, c]])


@_register("sg_rotation_xp", "Stern-Gerlach: x-p entry of the oscillator flow", "derived")
def sg_rotation_xp(tau):
    return float(np.sin(tau))


@_register("sg_rotation_xp_published", "Stern-Gerlach: x-p entry of the oscillator flow as printed")
def sg_rotation_xp_published(tau):
    return float(-np.sin(tau))


def sg_sigma(tau, s, N_p, Gamma_x) -> np.ndarray:
    """Covariance shared by all branches."""
    n = 1 + 2 * N_p
    c, sn = np.cos(tau), np.sin(tau)
    unitary = n * np.array([[s * c**2 + sn**2 / s, (1 / s - s) * sn * c],
                            [(1 / s - s) * sn * c, s * sn**2 + c**2 / s]])
    diffusive = Gamma_x * np.array([[tau - sn * c, sn**2], [sn**2, tau + sn * c]])
    return unitary + diffusive


@_register("sg_sigma_xx", "Stern-Gerlach: covariance xx")
def sg_sigma_xx(tau, s, N_p, Gamma_x):
    return float(sg_sigma(tau, s, N_p, Gamma_x)[0, 0])


@_register("sg_sigma_xp", "Stern-Gerlach: covariance xp")
def sg_sigma_xp(tau, s, N_p, Gamma_x):
    return float(sg_sigma(tau, s, N_p, Gamma_x)[0, 1])


@_register("sg_sigma_pp", "Stern-Gerlach: covariance pp")
def sg_sigma_pp(tau, s, N_p, Gamma_x):
    return float(sg_sigma(tau, s, N_p, Gamma_x)[1, 1])


def sg_r_on(tau, f_u, f_q, j) -> np.ndarray:
    """Diagonal-branch mean for qubit label ``j``."""
    return (f_u + j * f_q) * np.array([1 - np.cos(tau), np.sin(tau)])


@_register("sg_r_on_x", "Stern-Gerlach: diagonal-branch mean x")
def sg_r_on_x(tau, f_u, f_q, j):
    return float(sg_r_on(tau, f_u, f_q, j)[0])


@_register("sg_r_on_p", "Stern-Gerlach: diagonal-branch mean p")
def sg_r_on_p(tau, f_u, f_q, j):
    return float(sg_r_on(tau, f_u, f_q, j)[1])


def sg_r_off(tau, f_u, f_q, s, N_p, Gamma_x) -> np.ndarray:
    """Complex mean of the ``(+1, -1)`` block (derived)."""
    n = 1 + 2 * N_p
    c, sn = np.cos(tau), np.sin(tau)
    real = f_u * np.array([1 - c, sn])
    im_x = n * ((s - 1 / s) * sn * c + sn / s) + Gamma_x * (1 - c) ** 2
    im_p = n * (-s * sn**2 + c * (1 - c) / s) - Gamma_x * (tau - 2 * sn + sn * c)
    return real + 1j * f_q * np.array([im_x, im_p])


def sg_r_off_published(tau, f_u, f_q, s, N_p, Gamma_x) -> np.ndarray:
    """Off-diagonal mean as printed; equals the ``(-1, +1)`` block's mean."""
    n = 1 + 2 * N_p
    c, sn = np.cos(tau), np.sin(tau)
    real = f_u * np.array([1 - c, sn])
    im = n * np.array([sn * ((1 / s - s) * c - 1 / s), 2 * np.sin(tau / 2) ** 2 * ((s - 1 / s) * c + s)])
    im = im + Gamma_x * np.array([-4 * np.sin(tau / 2) ** 4, tau + sn * (c - 2)])
    return real + 1j * f_q * im


for _comp, _idx in (("x", 0), ("p", 1)):
    for _part in ("re", "im"):
        def _f(tau, f_u, f_q, s, N_p, Gamma_x, _i=_idx, _p=_part):
            v = sg_r_off(tau, f_u, f_q, s, N_p, Gamma_x)[_i]
            return float(v.real if _p == "re" else v.imag)
        _register(f"sg_r_off_{_comp}_{_part}", f"Stern-Gerlach: (+,-) block mean {_comp} ({_part})", "derived")(_f)

        def _g(tau, f_u, f_q, s, N_p, Gamma_x, _i=_idx, _p=_part):
            v = sg_r_off_published(tau, f_u, f_q, s, N_p, Gamma_x)[_i]
            return float(v.real if _p == "re" else v.imag)
        _register(f"sg_r_off_{_comp}_{_part}_published", f"Stern-Gerlach: off-diagonal mean {_comp} ({_part}) as printed")(_g)


@_register("sg_contrast", "Stern-Gerlach: contrast C(tau)")
def sg_contrast(tau, f_q, s, N_p, Gamma_x, Gamma_z=0.0):
    n = 1 + 2 * N_p
    c, sn = np.cos(tau), np.sin(tau)
    return float(f_q**2 * (2 * n * np.sin(tau / 2) ** 2 * ((s - 1 / s) * c + s + 1 / s)
                           + Gamma_x * (3 * tau + sn * (c - 4))) + Gamma_z * tau)


@_register("sg_contrast_pi", "Stern-Gerlach: contrast at half period")
def sg_contrast_pi(f_q, s, N_p, Gamma_x, Gamma_z=0.0):
    return float(f_q**2 * (4 * (1 + 2 * N_p) / s + 3 * np.pi * Gamma_x) + np.pi * Gamma_z)


@_register("sg_contrast_2pi", "Stern-Gerlach: contrast at full period")
def sg_contrast_2pi(f_q, Gamma_x, Gamma_z=0.0):
    return float(6 * np.pi * f_q**2 * Gamma_x + 2 * np.pi * Gamma_z)


@_register("sg_phase_published", "Stern-Gerlach: interference phase as printed")
def sg_phase_published(tau, f_q, f_u, omega_q=0.0):
    return float(2 * f_q * f_u * (tau + np.sin(tau)) + 0.5 * omega_q * tau)


@_register("sg_phase", "Stern-Gerlach: interference phase of the (+,-) block", "derived")
def sg_phase(tau, f_q, f_u, omega_q=0.0):
    return float(2 * f_q * f_u * (tau - np.sin(tau)) - omega_q * tau)


def _px(sign, C, phi):
    return 0.5 * (1 + sign * np.exp(-C) * np.cos(phi))


@_register("sg_px_plus_published", "Stern-Gerlach: sigma_x outcome +1 probability with the printed phase")
def sg_px_plus_published(tau, f_q, f_u, s, N_p, Gamma_x, Gamma_z=0.0, omega_q=0.0):
    return float(_px(1, sg_contrast(tau, f_q, s, N_p, Gamma_x, Gamma_z), sg_phase_published(tau, f_q, f_u, omega_q)))


@_register("sg_px_minus_published", "Stern-Gerlach: sigma_x outcome -1 probability with the printed phase")
def sg_px_minus_published(tau, f_q, f_u, s, N_p, Gamma_x, Gamma_z=0.0, omega_q=0.0):
    return float(_px(-1, sg_contrast(tau, f_q, s, N_p, Gamma_x, Gamma_z), sg_phase_published(tau, f_q, f_u, omega_q)))


@_register("sg_px_plus", "Stern-Gerlach: sigma_x outcome +1 probability", "derived")
def sg_px_plus(tau, f_q, f_u, s, N_p, Gamma_x, Gamma_z=0.0, omega_q=0.0):
    return float(_px(1, sg_contrast(tau, f_q, s, N_p, Gamma_x, Gamma_z), sg_phase(tau, f_q, f_u, omega_q)))


@_register("sg_px_minus", "Stern-Gerlach: sigma_x outcome -1 probability", "derived")
def sg_px_minus(tau, f_q, f_u, s, N_p, Gamma_x, Gamma_z=0.0, omega_q=0.0):
    return float(_px(-1, sg_contrast(tau, f_q, s, N_p, Gamma_x, Gamma_z), sg_phase(tau, f_q, f_u, omega_q)))


# --- Wigner fringes of the post-sigma_x-measurement state at half period


def sg_fringe(x, p, f_u, f_q, s, N_p, Gamma_x, Gamma_z=0.0, omega_q=0.0):
    """Interference term ``W_q`` at ``tau = pi`` (derived).

    ``W_q = 2 Re[rho_{+-} W_{+-}]`` with the complex Gaussian of the
    ``(+, -)`` block, normalised like the Wigner function (vacuum peak
    ``1/pi``).  Writing ``r_{+-} = a + i b``,

        W_q = exp(-C - (x-a)^T s^-1 (x-a) + b^T s^-1 b)
              cos(phi + 2 b^T s^-1 (x-a)) / (pi sqrt(det s)).
    """
    n = 1 + 2 * N_p
    sx = n * s + np.pi * Gamma_x
    sp = n / s + np.pi * Gamma_x
    bx = 4 * Gamma_x * f_q
    bp = -f_q * (2 * n / s + np.pi * Gamma_x)
    dx = np.asarray(x, float) - 2 * f_u
    p = np.asarray(p, float)
    C = sg_contrast_pi(f_q, s, N_p, Gamma_x, Gamma_z)
    phi = sg_phase(np.pi, f_q, f_u, omega_q)
    expo = -C - dx**2 / sx - p**2 / sp + bx**2 / sx + bp**2 / sp
    arg = phi + 2 * (bx * dx / sx + bp * p / sp)
    return np.exp(expo) * np.cos(arg) / (np.pi * np.sqrt(sx * sp))


def sg_classical(x, p, f_u, f_q, s, N_p, Gamma_x):
    """Classical part ``W_c``: equal-weight mixture of the diagonal Gaussians at ``tau = pi``."""
    n = 1 + 2 * N_p
    sx = n * s + np.pi * Gamma_x
    sp = n / s + np.pi * Gamma_x
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    out = 0.0
    for j in (1, -1):
        out = out + 0.5 * np.exp(-(x - 2 * (f_u + j * f_q)) ** 2 / sx - p**2 / sp)
    return out / (np.pi * np.sqrt(sx * sp))


def sg_post_wigner(sign, x, p, f_u, f_q, s, N_p, Gamma_x, Gamma_z=0.0, omega_q=0.0):
    """Wigner function of the mode after sigma_x outcome ``sign`` at ``tau = pi``."""
    wc = sg_classical(x, p, f_u, f_q, s, N_p, Gamma_x)
    wq = sg_fringe(x, p, f_u, f_q, s, N_p, Gamma_x, Gamma_z, omega_q)
    prob = sg_px_plus(np.pi, f_q, f_u, s, N_p, Gamma_x, Gamma_z, omega_q) if sign > 0 else \
        sg_px_minus(np.pi, f_q, f_u, s, N_p, Gamma_x, Gamma_z, omega_q)
    return (wc + sign * wq) / (2 * prob)


@_register("sg_fringe_wq", "Stern-Gerlach: fringe term at half period", "derived")
def _sg_fringe_scalar(x, p, f_u, f_q, s, N_p, Gamma_x, Gamma_z=0.0, omega_q=0.0):
    return float(sg_fringe(x, p, f_u, f_q, s, N_p, Gamma_x, Gamma_z, omega_q))


@_register("sg_fringe_cw_published", "Stern-Gerlach: fringe decay exponent as printed")
def sg_fringe_cw_published(x, p, f_u, f_q, s, N_p, Gamma_x):
    n = 1 + 2 * N_p
    return float(n * 8 * f_q**2 / s
                 - ((x - 2 * f_u) ** 2 - (4 * Gamma_x * f_q) ** 2) / (np.pi * Gamma_x + n * s)
                 - (p**2 - (np.pi * Gamma_x * f_q) ** 2) / (np.pi * Gamma_x + n / s))


@_register("sg_fringe_phiw_published", "Stern-Gerlach: fringe phase as printed")
def sg_fringe_phiw_published(x, p, f_u, f_q, s, N_p, Gamma_x):
    n = 1 + 2 * N_p
    return float(4 * f_q * (2 * p - 4 * Gamma_x * (x - 2 * f_u) / (np.pi * Gamma_x + n * s)
                            - np.pi * Gamma_x * p / (np.pi * Gamma_x + n / s)))


def list_regressions() -> list[AnalyticRegression]:
    return [REGISTRY[k] for k in sorted(REGISTRY)]
