"""Steady-state infidelity lower bound ``J* = (E / (A + U))**2``.

For a target ``|psi>`` and a system with Hamiltonian terms ``H_j`` (controls
bounded by ``|u_j| <= ubar_j``, or fixed with coefficient 1), decoherence
channels ``L_j`` and measurement channels ``M_j``::

    A = sqrt(2) * sum_{K in L, M} (||K^+ psi||^2 + ||K^+ K psi||)
    U = 2 * sum_j c_j * sqrt(<H_j^2> - <H_j>^2)       c_j = ubar_j, or 1 if fixed
    E = sum_{K in L, M} (||K psi||^2 - |<psi|K|psi>|^2)

No equation of motion is solved; only matrix-vector products are needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import tolerances as tol
from .errors import DimensionError, TruncationError
from .quantum_core import as_operator, as_state, dagger, is_hermitian


@dataclass(frozen=True)
class HamiltonianTerm:
    """A Hermitian term ``u_t H`` with ``|u_t| <= u_max``, or a fixed ``H_0``."""

    matrix: np.ndarray
    u_max: float = 0.0
    fixed: bool = False

    def __post_init__(self):
        H = as_operator(self.matrix)
        if not is_hermitian(H):
            raise ValueError("Hamiltonian term is not Hermitian")
        if not self.fixed and (not np.isfinite(self.u_max) or self.u_max < 0):
            raise ValueError(f"u_max must be >= 0, got {self.u_max}")
        object.__setattr__(self, "matrix", H)

    @property
    def coefficient(self) -> float:
        return 1.0 if self.fixed else float(self.u_max)


@dataclass(frozen=True)
class SystemSpec:
    """Problem instance: Hamiltonian terms, decoherence and measurement channels.

    ``truncation_levels > 0`` marks a truncated bosonic basis; every vector the
    bound engine produces must then have less than ``1e-12`` population in the
    top ``truncation_levels`` basis states.
    """

    hamiltonians: Sequence[HamiltonianTerm] = ()
    decoherence_ops: Sequence[np.ndarray] = ()
    measurement_ops: Sequence[np.ndarray] = ()
    truncation_levels: int = 0

    def __post_init__(self):
        hams = tuple(h if isinstance(h, HamiltonianTerm) else HamiltonianTerm(*h)
                     for h in self.hamiltonians)
        object.__setattr__(self, "hamiltonians", hams)
        object.__setattr__(self, "decoherence_ops",
                           tuple(as_operator(L) for L in self.decoherence_ops))
        object.__setattr__(self, "measurement_ops",
                           tuple(as_operator(M) for M in self.measurement_ops))
        mats = [h.matrix for h in hams] + list(self.decoherence_ops) + list(self.measurement_ops)
        dims = {m.shape[0] for m in mats}
        if len(dims) > 1:
            raise DimensionError(f"operators have differing dimensions {sorted(dims)}")
        if self.truncation_levels < 0:
            raise ValueError("truncation_levels must be >= 0")

    @property
    def dim(self) -> int | None:
        for m in self.operators():
            return m.shape[0]
        return None

    def operators(self):
        yield from (h.matrix for h in self.hamiltonians)
        yield from self.decoherence_ops
        yield from self.measurement_ops

    @property
    def controlled(self) -> tuple[HamiltonianTerm, ...]:
        return tuple(h for h in self.hamiltonians if not h.fixed)

    def with_u_max(self, values: Sequence[float]) -> "SystemSpec":
        """Copy with new control bounds for the controlled terms, in order."""
        values = list(values)
        if len(values) != len(self.controlled):
            raise ValueError("need one bound per controlled Hamiltonian term")
        it = iter(values)
        hams = [h if h.fixed else HamiltonianTerm(h.matrix, next(it)) for h in self.hamiltonians]
        return SystemSpec(hams, self.decoherence_ops, self.measurement_ops, self.truncation_levels)


@dataclass(frozen=True)
class BoundResult:
    a_val: float
    u_val: float
    e_val: float
    j_star: float

    def as_dict(self) -> dict[str, float]:
        return {"A": self.a_val, "U": self.u_val, "E": self.e_val, "j_star": self.j_star}


def j_star_from_parts(a_val: float, u_val: float, e_val: float) -> float:
    if e_val <= tol.E_ZERO:
        return 0.0
    return (e_val / (a_val + u_val)) ** 2


class _Applier:
    """Matrix-vector products with the truncation guard."""

    def __init__(self, spec: SystemSpec):
        self.levels = spec.truncation_levels

    def check(self, v):
        if self.levels:
            pop = float(np.sum(np.abs(v[-self.levels:]) ** 2))
            if pop >= tol.TRUNCATION_POPULATION:
                raise TruncationError(
                    f"population {pop:.3e} in the top {self.levels} truncated levels; "
                    "increase the basis dimension")
        return v

    def __call__(self, op, v):
        return self.check(op @ v)


def _prepare(spec: SystemSpec, psi) -> np.ndarray:
    psi = as_state(psi)
    if spec.dim is not None and spec.dim != psi.size:
        raise DimensionError(f"state dimension {psi.size} != system dimension {spec.dim}")
    _Applier(spec).check(psi)
    return psi


def _channels(spec):
    return list(spec.decoherence_ops) + list(spec.measurement_ops)


def _a_terms(spec, psi, apply):
    out = []
    for K in _channels(spec):
        Kd = dagger(K)
        out.append(math.sqrt(2) * (np.linalg.norm(apply(Kd, psi)) ** 2
                                   + np.linalg.norm(apply(Kd, apply(K, psi)))))
    return out


def _u_terms(spec, psi, apply):
    out = []
    for h in spec.hamiltonians:
        hpsi = apply(h.matrix, psi)
        mean = np.vdot(psi, hpsi).real
        var = np.vdot(hpsi, hpsi).real - mean ** 2
        if var < -tol.VARIANCE_CLAMP:
            raise ArithmeticError(f"negative variance {var!r} for a Hermitian term")
        out.append(2.0 * h.coefficient * math.sqrt(max(var, 0.0)))
    return out


def _e_terms(spec, psi, apply):
    out = []
    for K in _channels(spec):
        kpsi = apply(K, psi)
        out.append(np.vdot(kpsi, kpsi).real - abs(np.vdot(psi, kpsi)) ** 2)
    return out


def compute_A(spec: SystemSpec, psi) -> float:
    psi = _prepare(spec, psi)
    return float(sum(_a_terms(spec, psi, _Applier(spec))))


def compute_U(spec: SystemSpec, psi) -> float:
    psi = _prepare(spec, psi)
    return float(sum(_u_terms(spec, psi, _Applier(spec))))


def compute_E(spec: SystemSpec, psi) -> float:
    psi = _prepare(spec, psi)
    return float(sum(_e_terms(spec, psi, _Applier(spec))))


def compute_bound(spec: SystemSpec, psi) -> BoundResult:
    """Evaluate ``A``, ``U``, ``E`` and ``J*`` for target ``psi``.

    Parameters
    ----------
    spec : SystemSpec
        Operators of the controlled open system.
    psi : array_like
        Normalized target state.

    Returns
    -------
    BoundResult
        ``j_star`` is exactly 0 when ``E <= 1e-14``.

    Raises
    ------
    DimensionError
        If the state and operators disagree in dimension.
    ValueError
        If ``psi`` is not normalized.
    TruncationError
        If a truncated basis is too small (see ``SystemSpec.truncation_levels``).
    """
    psi = _prepare(spec, psi)
    apply = _Applier(spec)
    a_val = float(sum(_a_terms(spec, psi, apply)))
    u_val = float(sum(_u_terms(spec, psi, apply)))
    e_val = float(sum(_e_terms(spec, psi, apply)))
    if e_val < -tol.E_NEGATIVE_ATOL * max(1.0, a_val):
        raise ArithmeticError(f"E = {e_val!r} is negative beyond round-off")
    e_val = max(e_val, 0.0)
    return BoundResult(a_val, u_val, e_val, j_star_from_parts(a_val, u_val, e_val))


def is_common_eigenvector(spec: SystemSpec, psi, atol: float = 1e-12) -> bool:
    """True if ``psi`` is an eigenvector of every ``L_j`` and ``M_j``."""
    psi = as_state(psi)
    for K in _channels(spec):
        kpsi = K @ psi
        residual = kpsi - np.vdot(psi, kpsi) * psi
        if np.linalg.norm(residual) > atol:
            return False
    return True
