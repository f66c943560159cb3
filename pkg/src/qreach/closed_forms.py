"""Analytic ``A``, ``U``, ``E`` and ``J*`` for the worked examples.

These are independent of the matrix engine in ``qreach.bound`` and serve as
its oracles. Each ``j_star`` is evaluated from the displayed closed form (for
example with the ``1/2 [...]^2`` prefactor) rather than from ``(E/(A+U))^2``,
so agreement with the engine also checks the algebra linking the two.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from . import tolerances as tol

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class OracleResult:
    a_val: float
    u_val: float
    e_val: float
    j_star: float

    def as_dict(self) -> dict[str, float]:
        return {"A": self.a_val, "U": self.u_val, "E": self.e_val, "j_star": self.j_star}


def _nonneg(**kw):
    for name, val in kw.items():
        if not math.isfinite(val) or val < 0:
            raise ValueError(f"{name} must be finite and >= 0, got {val}")


def _ratio_sq(num, den, prefactor=1.0):
    if num <= tol.E_ZERO:
        return 0.0
    return prefactor * (num / den) ** 2


def qubit_bound(theta: float, phi: float, kappa: float, gamma: float, u_bar: float) -> OracleResult:
    """Qubit with ``H = sigma_y``, ``M = sqrt(kappa) sigma_z``, ``L = sqrt(gamma) sigma_-``."""
    if not 0 <= theta < math.pi / 2:
        raise ValueError(f"theta={theta} outside [0, pi/2)")
    if not 0 <= phi < 2 * math.pi:
        raise ValueError(f"phi={phi} outside [0, 2 pi)")
    _nonneg(kappa=kappa, gamma=gamma, u_bar=u_bar)
    s2 = math.sin(2 * theta) ** 2
    sp2 = math.sin(phi) ** 2
    a_half = 2 * kappa + gamma * (math.sin(theta) ** 2 + math.cos(theta))
    e_val = kappa * s2 + gamma * math.cos(theta) ** 4
    u_val = 2 * u_bar * math.sqrt(max(1 - s2 * sp2, 0.0))
    den = a_half + u_bar * math.sqrt(max(2 - 2 * s2 * sp2, 0.0))
    return OracleResult(SQRT2 * a_half, u_val, e_val, _ratio_sq(e_val, den, 0.5))


def qutrit_bound(theta: float, phi: float, kappa: float, gamma: float, u_bar: float) -> OracleResult:
    """Qutrit target ``[s cos(phi/2), c, s sin(phi/2)]`` with ``s, c = sin, cos(theta/2)``.

    Uses ``H`` = spin-1 ``J_y``, ``M = sqrt(kappa) J_z`` and the ladder decay
    ``L = sqrt(gamma) (|S><E| + |G><S|)``.
    """
    for name, val in (("theta", theta), ("phi", phi)):
        if not 0 <= val <= math.pi:
            raise ValueError(f"{name}={val} outside [0, pi]")
    _nonneg(kappa=kappa, gamma=gamma, u_bar=u_bar)
    s, c = math.sin(theta / 2), math.cos(theta / 2)
    sh, ch = math.sin(phi / 2), math.cos(phi / 2)
    a_half = (kappa * (s * s + s)
              + gamma * (c * c + s * s * sh * sh + math.sqrt(s * s * ch * ch + c * c)))
    u_val = SQRT2 * u_bar * math.sqrt(max(1 + c * c - s * s * math.sin(phi), 0.0))
    # variances: <J_z^2> - <J_z>^2 and ||L psi||^2 - |<psi|L|psi>|^2
    e_val = (kappa * (s * s - s ** 4 * math.cos(phi) ** 2)
             + gamma * (s * s * ch * ch + c * c - c * c * s * s * (1 + math.sin(phi))))
    e_val = max(e_val, 0.0)
    a_val = SQRT2 * a_half
    return OracleResult(a_val, u_val, e_val, _ratio_sq(e_val, a_val + u_val))


class BellBounds(NamedTuple):
    phi: float        # both |Phi+> and |Phi->
    psi_plus: float
    psi_minus: float


def _check_bell(gamma, u_mag):
    _nonneg(gamma=gamma, u_mag=u_mag)
    if gamma == 0 and u_mag == 0:
        raise ZeroDivisionError("gamma = U = 0 leaves J* undefined (0/0)")


def bell_bounds(gamma: float, u_mag: float) -> BellBounds:
    """Bell-state bounds under collective decay, for a shared control magnitude ``U``."""
    _check_bell(gamma, u_mag)
    phi = gamma ** 2 / ((2 + SQRT2) * gamma + u_mag) ** 2
    psi_plus = 4 * gamma ** 2 / (4 * SQRT2 * gamma + u_mag) ** 2
    return BellBounds(phi, psi_plus, 0.0)


def bell_bounds_local(gamma: float, u_mag: float) -> BellBounds:
    """Same as ``bell_bounds`` for independent local decay: all four states coincide."""
    _check_bell(gamma, u_mag)
    j = gamma ** 2 / ((2 + SQRT2) * gamma + u_mag) ** 2
    return BellBounds(j, j, j)


def _check_dicke(l, m):
    two_l, two_m = 2 * l, 2 * m
    if (two_l < 0 or abs(two_l - round(two_l)) > 1e-12 or abs(two_m - round(two_m)) > 1e-12
            or abs(m) > l or round(two_l - two_m) % 2):
        raise ValueError(f"invalid Dicke labels l={l}, m={m}")


def dicke_bound(l, m, kappa: float, gamma: float, u_bar: float) -> OracleResult:
    """Dicke target ``|l, m>`` with ``H = J_y``, ``M = sqrt(kappa) J_z``, ``L = sqrt(gamma) J_-``."""
    _check_dicke(l, m)
    _nonneg(kappa=kappa, gamma=gamma, u_bar=u_bar)
    w = l * l + l - m * m
    e_val = gamma * (w + m)
    a_val = SQRT2 * (2 * kappa * m * m + 2 * gamma * w)
    u_val = SQRT2 * u_bar * math.sqrt(w)
    den = 2 * kappa * m * m + 2 * gamma * w + u_bar * math.sqrt(w)
    return OracleResult(a_val, u_val, e_val, _ratio_sq(e_val, den, 0.5))


def coherent_spin_bound(n_atoms: int, kappa: float, gamma: float, u_bar: float) -> float:
    """``J*`` of the coherent spin state ``|N/2, N/2>``."""
    if n_atoms < 1:
        raise ValueError("N must be >= 1")
    _nonneg(kappa=kappa, gamma=gamma, u_bar=u_bar)
    N = n_atoms
    return _ratio_sq(SQRT2 * gamma * N, kappa * N * N + 2 * gamma * N + u_bar * math.sqrt(2 * N))


def dicke_center_bound(n_atoms: int, gamma: float, u_bar: float) -> float:
    """``J*`` of ``|N/2, 0>`` (``N`` even); independent of the measurement strength."""
    if n_atoms < 2 or n_atoms % 2:
        raise ValueError("N must be an even integer >= 2")
    _nonneg(gamma=gamma, u_bar=u_bar)
    N = n_atoms
    w = N * N + 2 * N
    return _ratio_sq(gamma * w, 2 * gamma * N * N + 4 * gamma * N + 2 * u_bar * math.sqrt(w), 0.5)


def _check_n(n_atoms):
    if int(n_atoms) != n_atoms or n_atoms < 1:
        raise ValueError(f"N must be an integer >= 1, got {n_atoms}")


def plus_product_bound(n_atoms: int, gamma: float, u_mag: float) -> OracleResult:
    """``|+>^N`` under collective dephasing ``L = sqrt(gamma) J_z``, no measurement."""
    _check_n(n_atoms)
    _nonneg(gamma=gamma, u_mag=u_mag)
    N = n_atoms
    root = math.sqrt(6 * N * N - 4 * N)
    e_val = gamma * N / 4
    a_val = gamma / 4 * (SQRT2 * N + root)
    j = _ratio_sq(gamma * N, SQRT2 * gamma * N + gamma * root + 4 * u_mag)
    return OracleResult(a_val, u_mag, e_val, j)


def ghz_bound(n_atoms: int, gamma: float, u_mag: float) -> OracleResult:
    """GHZ target under collective dephasing ``L = sqrt(gamma) J_z``, no measurement."""
    _check_n(n_atoms)
    _nonneg(gamma=gamma, u_mag=u_mag)
    N2 = n_atoms * n_atoms
    e_val = gamma * N2 / 4
    a_val = SQRT2 * gamma * N2 / 2
    j = _ratio_sq(gamma * N2, 2 * SQRT2 * gamma * N2 + 4 * u_mag)
    return OracleResult(a_val, u_mag, e_val, j)


def fock_bound(n: int, kappa: float, gamma: float, u_bar: float) -> OracleResult:
    """Fock target ``|n>`` with ``H = i(a^+ - a)``, ``M = sqrt(kappa) a^+ a``, ``L = sqrt(gamma) a``."""
    if int(n) != n or n < 0:
        raise ValueError(f"Fock level must be an integer >= 0, got {n}")
    _nonneg(kappa=kappa, gamma=gamma, u_bar=u_bar)
    a_val = 2 * SQRT2 * kappa * n * n + SQRT2 * gamma * (2 * n + 1)
    u_val = 2 * u_bar * math.sqrt(2 * n + 1)
    e_val = gamma * n
    den = 2 * kappa * n * n + gamma * (2 * n + 1) + u_bar * math.sqrt(4 * n + 2)
    return OracleResult(a_val, u_val, e_val, _ratio_sq(e_val, den, 0.5))


PRODUCT_LIMIT = 1 / (8 + 4 * math.sqrt(3))
GHZ_LIMIT = 1 / 8
DICKE_CENTER_LIMIT = 1 / 8
