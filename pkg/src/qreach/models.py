"""Operator sets for the worked examples (qubit, qutrit, Dicke, Bell, dephasing, Fock).

Channels with zero rate are omitted rather than stored as zero matrices.
"""
from __future__ import annotations

import math

import numpy as np

from .bound import HamiltonianTerm, SystemSpec
from .quantum_core import (SIGMA_MINUS, SIGMA_Y, SIGMA_Z, annihilation, collective_spin_operators,
                           creation, embed, number, spin_operators)


def _check_rates(**rates):
    for name, val in rates.items():
        if not np.isfinite(val) or val < 0:
            raise ValueError(f"{name} must be a finite non-negative number, got {val}")


def _spec(H, u_bar, L=(), M=(), **kw):
    hams = [] if H is None else [HamiltonianTerm(H, u_bar)]
    return SystemSpec(hams, [op for op in L if op is not None],
                      [op for op in M if op is not None], **kw)


def _scaled(rate, op):
    return None if rate == 0 else math.sqrt(rate) * op


def qubit_system(kappa: float, gamma: float, u_bar: float) -> SystemSpec:
    """``H = sigma_y``, ``M = sqrt(kappa) sigma_z``, ``L = sqrt(gamma) sigma_-``."""
    _check_rates(kappa=kappa, gamma=gamma, u_bar=u_bar)
    return _spec(SIGMA_Y, u_bar, [_scaled(gamma, SIGMA_MINUS)], [_scaled(kappa, SIGMA_Z)])


QUTRIT_H = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]]) / math.sqrt(2)
QUTRIT_JZ = np.diag([1.0, 0.0, -1.0]).astype(complex)
QUTRIT_LADDER = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=complex)


def qutrit_system(kappa: float, gamma: float, u_bar: float) -> SystemSpec:
    """Symmetric two-qubit (qutrit) MBF setup on ``(|E>, |S>, |G>)``.

    The decay operator is ``sqrt(gamma) (|S><E| + |G><S|)``, i.e. the ladder without
    the ``sqrt(2)`` of the spin-1 ``J_-``.
    """
    _check_rates(kappa=kappa, gamma=gamma, u_bar=u_bar)
    return _spec(QUTRIT_H, u_bar, [_scaled(gamma, QUTRIT_LADDER)], [_scaled(kappa, QUTRIT_JZ)])


def dicke_system(l, kappa: float, gamma: float, u_bar: float) -> SystemSpec:
    """``H = J_y``, ``M = sqrt(kappa) J_z``, ``L = sqrt(gamma) J_-`` in the spin-``l`` irrep."""
    _check_rates(kappa=kappa, gamma=gamma, u_bar=u_bar)
    J = spin_operators(l)
    return _spec(J.jy, u_bar, [_scaled(gamma, J.jm)], [_scaled(kappa, J.jz)])


def bell_collective_system(gamma: float, H=None, u_bar: float = 0.0) -> SystemSpec:
    """Two qubits with collective decay ``sqrt(gamma) (sigma_- x I + I x sigma_-)``."""
    _check_rates(gamma=gamma, u_bar=u_bar)
    L = embed(SIGMA_MINUS, 0, 2) + embed(SIGMA_MINUS, 1, 2)
    return _spec(H, u_bar, [_scaled(gamma, L)])


def bell_local_system(gamma: float, H=None, u_bar: float = 0.0) -> SystemSpec:
    """Two qubits with independent decay ``sqrt(gamma) sigma_-`` on each."""
    _check_rates(gamma=gamma, u_bar=u_bar)
    return _spec(H, u_bar, [_scaled(gamma, embed(SIGMA_MINUS, k, 2)) for k in range(2)])


def dephasing_system(n_qubits: int, gamma: float, H=None, u_bar: float = 0.0,
                     basis: str = "product") -> SystemSpec:
    """Collective dephasing ``L = sqrt(gamma) J_z`` on ``N`` spins, no measurement."""
    _check_rates(gamma=gamma, u_bar=u_bar)
    if basis == "product":
        jz = collective_spin_operators(n_qubits).jz
    elif basis == "dicke":
        jz = spin_operators(n_qubits / 2).jz
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return _spec(H, u_bar, [_scaled(gamma, jz)])


def fock_dim(n: int) -> int:
    """Truncation that keeps every vector produced for ``|n>`` out of the top two levels."""
    return n + 4


def fock_system(dim: int, kappa: float, gamma: float, u_bar: float) -> SystemSpec:
    """``H = i(a^+ - a)``, ``M = sqrt(kappa) a^+ a``, ``L = sqrt(gamma) a`` (truncated)."""
    _check_rates(kappa=kappa, gamma=gamma, u_bar=u_bar)
    a, ad = annihilation(dim), creation(dim)
    return _spec(1j * (ad - a), u_bar, [_scaled(gamma, a)], [_scaled(kappa, number(dim))],
                 truncation_levels=2)
