"""Dense operators, states and superoperators.

Everything is carried as plain complex ``numpy`` arrays: operators and
density matrices are ``(d, d)``, pure states are ``(d,)``. Constructors
return read-only arrays so cached values can be shared safely.

Basis conventions used throughout the package:

* qubit: ``(|e>, |g>)`` which is also ``(|up>, |down>)``;
* spin ``l``: ``m = l, l-1, ..., -l``;
* bosonic mode: Fock levels ``0 ... dim-1``.

Superoperators (``dissipator``, ``h_superop``, ``commutator``) broadcast over
leading batch axes, so a stack of density matrices ``(B, d, d)`` can be
processed in one call.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple

import numpy as np

from . import tolerances as tol
from .errors import DimensionError


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# validation and predicates
# ---------------------------------------------------------------------------

def as_operator(A) -> np.ndarray:
    """Return ``A`` as a complex square matrix, raising on bad shape."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return A


def as_state(psi, atol: float = tol.NORM_ATOL) -> np.ndarray:
    """Return ``psi`` as a complex vector, checking that it is normalized."""
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim != 1 or psi.size < 1:
        raise DimensionError(f"expected a state vector, got shape {psi.shape}")
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > atol:
        raise ValueError(f"state is not normalized (norm = {norm!r})")
    return psi


def is_hermitian(A, atol: float = tol.HERMITIAN_ATOL) -> bool:
    A = np.asarray(A)
    return bool(np.max(np.abs(A - np.swapaxes(A, -1, -2).conj()), initial=0.0) <= atol)


def is_density_matrix(rho, herm_atol: float = tol.HERMITIAN_ATOL,
                      trace_atol: float = tol.TRACE_ATOL,
                      min_eig: float = tol.DENSITY_MIN_EIG) -> bool:
    """Hermitian, unit trace and (numerically) positive semidefinite."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not is_hermitian(rho, herm_atol):
        return False
    if abs(np.trace(rho) - 1.0) > trace_atol:
        return False
    herm = 0.5 * (rho + rho.conj().T)
    return bool(np.linalg.eigvalsh(herm).min() >= min_eig)


def as_density(rho) -> np.ndarray:
    rho = as_operator(rho)
    if not is_density_matrix(rho):
        raise ValueError("not a valid density matrix (Hermitian, unit trace, PSD)")
    return rho


def _check_dims(*ops):
    dims = {op.shape[-1] for op in ops}
    if len(dims) > 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


# ---------------------------------------------------------------------------
# algebra
# ---------------------------------------------------------------------------

def dagger(A) -> np.ndarray:
    """Conjugate transpose (over the last two axes)."""
    return np.swapaxes(np.asarray(A, dtype=complex), -1, -2).conj()


def expectation(A, psi) -> complex:
    """``<psi|A|psi>``."""
    A = as_operator(A)
    psi = np.asarray(psi, dtype=complex)
    _check_dims(A, psi)
    return complex(np.vdot(psi, A @ psi))


def commutator(A, B) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    _check_dims(A, B)
    return A @ B - B @ A


def dissipator(A, rho) -> np.ndarray:
    """Lindblad dissipator ``A rho A^+ - (A^+A rho + rho A^+A)/2``."""
    A = np.asarray(A, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    _check_dims(A, rho)
    Ad = dagger(A)
    AdA = Ad @ A
    return A @ rho @ Ad - 0.5 * (AdA @ rho + rho @ AdA)


def h_superop(A, rho) -> np.ndarray:
    """Measurement back-action ``A rho + rho A^+ - Tr[(A + A^+) rho] rho``."""
    A = np.asarray(A, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    _check_dims(A, rho)
    X = A @ rho + rho @ dagger(A)
    tr = np.trace(X, axis1=-2, axis2=-1)
    return X - np.expand_dims(tr, (-1, -2)) * rho


def kron(*ops) -> np.ndarray:
    """Kronecker product of any number of operators or vectors."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def embed(op, site: int, n_sites: int, local_dim: int = 2) -> np.ndarray:
    """``I x ... x op x ... x I`` with ``op`` on ``site`` (0 is the leftmost factor)."""
    if not 0 <= site < n_sites:
        raise ValueError(f"site {site} outside 0..{n_sites - 1}")
    eye = np.eye(local_dim, dtype=complex)
    return kron(*[op if k == site else eye for k in range(n_sites)])


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def maximally_mixed(dim: int) -> np.ndarray:
    return np.eye(dim, dtype=complex) / dim


# ---------------------------------------------------------------------------
# qubit operators
# ---------------------------------------------------------------------------

SIGMA_X = _frozen([[0, 1], [1, 0]])
SIGMA_Y = _frozen([[0, -1j], [1j, 0]])
SIGMA_Z = _frozen([[1, 0], [0, -1]])
SIGMA_MINUS = _frozen([[0, 0], [1, 0]])  # |g><e|
SIGMA_PLUS = _frozen([[0, 1], [0, 0]])   # |e><g|
KET_E = _frozen([1, 0])
KET_G = _frozen([0, 1])


# ---------------------------------------------------------------------------
# angular momentum
# ---------------------------------------------------------------------------

class SpinOperators(NamedTuple):
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jm: np.ndarray

    @property
    def jp(self) -> np.ndarray:
        return dagger(self.jm)

    @property
    def j_squared(self) -> np.ndarray:
        return self.jx @ self.jx + self.jy @ self.jy + self.jz @ self.jz


def _twice(l) -> int:
    """Return ``2l`` as an int, raising unless ``l`` is a non-negative half-integer."""
    two_l = 2 * l
    if isinstance(two_l, Fraction):
        ok = two_l.denominator == 1
    else:
        ok = abs(float(two_l) - round(float(two_l))) <= 1e-12
    if not ok or two_l < 0:
        raise ValueError(f"spin l={l} is not a non-negative half-integer")
    return int(round(float(two_l)))


def spin_dim(l) -> int:
    return _twice(l) + 1


def spin_m_values(l) -> np.ndarray:
    """``m = l, l-1, ..., -l`` (the basis order)."""
    two_l = _twice(l)
    return (two_l - 2 * np.arange(two_l + 1)) / 2.0


@lru_cache(maxsize=64)
def _spin_operators(two_l: int) -> SpinOperators:
    l = two_l / 2.0
    m = spin_m_values(Fraction(two_l, 2))
    # J+ |l,m> = sqrt((l-m)(l+m+1)) |l,m+1>, and m+1 sits one index up
    jp = np.diag(np.sqrt((l - m[1:]) * (l + m[1:] + 1)), k=1).astype(complex)
    jm = jp.conj().T
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    jz = np.diag(m).astype(complex)
    return SpinOperators(*(_frozen(x) for x in (jx, jy, jz, jm)))


def spin_operators(l) -> SpinOperators:
    """Spin-``l`` matrices ``(J_x, J_y, J_z, J_-)`` in the ``m = l..-l`` basis.

    Ladder elements follow the Condon-Shortley convention (all positive).

    Raises
    ------
    ValueError
        If ``2l`` is not a non-negative integer.
    """
    return _spin_operators(_twice(l))


def collective_spin_operators(n_qubits: int) -> SpinOperators:
    """Collective ``J_i = sum_j sigma_i^(j)/2`` on the ``2**N`` product space."""
    if not 1 <= n_qubits <= 12:
        raise ValueError("product-space representation is limited to 1 <= N <= 12")
    half = spin_operators(Fraction(1, 2))
    ops = []
    for local in half:
        ops.append(sum(embed(local, k, n_qubits) for k in range(n_qubits)))
    return SpinOperators(*ops)


# ---------------------------------------------------------------------------
# bosonic mode
# ---------------------------------------------------------------------------

def annihilation(dim: int) -> np.ndarray:
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return _frozen(np.diag(np.sqrt(np.arange(1, dim)), k=1))


def creation(dim: int) -> np.ndarray:
    return _frozen(annihilation(dim).conj().T)


def number(dim: int) -> np.ndarray:
    return _frozen(np.diag(np.arange(dim, dtype=float)))


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

def basis_state(index: int, dim: int) -> np.ndarray:
    if not 0 <= index < dim:
        raise ValueError(f"index {index} outside 0..{dim - 1}")
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return _frozen(v)


def qubit_target(theta: float, phi: float) -> np.ndarray:
    """``[cos(theta), exp(i phi) sin(theta)]`` with ``0 <= theta < pi/2``, ``0 <= phi < 2 pi``."""
    if not 0.0 <= theta < math.pi / 2:
        raise ValueError(f"theta={theta} outside [0, pi/2)")
    if not 0.0 <= phi < 2 * math.pi:
        raise ValueError(f"phi={phi} outside [0, 2 pi)")
    return _frozen([math.cos(theta), np.exp(1j * phi) * math.sin(theta)])


def qutrit_target(theta: float, phi: float) -> np.ndarray:
    """Real qutrit vector on ``(|E>, |S>, |G>)`` with ``0 <= theta, phi <= pi``."""
    for name, val in (("theta", theta), ("phi", phi)):
        if not 0.0 <= val <= math.pi:
            raise ValueError(f"{name}={val} outside [0, pi]")
    s, c = math.sin(theta / 2), math.cos(theta / 2)
    return _frozen([s * math.cos(phi / 2), c, s * math.sin(phi / 2)])


def dicke_state(l, m) -> np.ndarray:
    """``|l, m>`` in the ``(2l+1)``-dimensional irreducible basis."""
    two_l = _twice(l)
    try:
        two_m = _twice(abs(m)) * (1 if m >= 0 else -1)
    except ValueError:
        raise ValueError(f"invalid Dicke labels l={l}, m={m}") from None
    if abs(two_m) > two_l or (two_l - two_m) % 2:
        raise ValueError(f"invalid Dicke labels l={l}, m={m}")
    return basis_state((two_l - two_m) // 2, two_l + 1)


def _check_n(n_qubits, basis):
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise ValueError(f"N must be a positive integer, got {n_qubits}")
    if basis not in ("product", "dicke"):
        raise ValueError(f"unknown basis {basis!r}")
    if basis == "product" and n_qubits > 12:
        raise ValueError("product-space states are limited to N <= 12; use basis='dicke'")


def ghz_state(n_qubits: int, basis: str = "product") -> np.ndarray:
    """``(|up...up> + |down...down>)/sqrt(2)``.

    ``basis='dicke'`` gives the same state in the ``l = N/2`` irreducible basis.
    """
    _check_n(n_qubits, basis)
    dim = 2 ** n_qubits if basis == "product" else n_qubits + 1
    v = np.zeros(dim, dtype=complex)
    v[0] = v[-1] = 1 / math.sqrt(2)
    return _frozen(v)


def plus_product_state(n_qubits: int, basis: str = "product") -> np.ndarray:
    """``|+>^N`` with ``|+> = (|up> + |down>)/sqrt(2)``."""
    _check_n(n_qubits, basis)
    if basis == "product":
        plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
        return _frozen(kron(*[plus] * n_qubits))
    k = np.arange(n_qubits + 1)
    log_amp = 0.5 * np.array([math.lgamma(n_qubits + 1) - math.lgamma(i + 1)
                              - math.lgamma(n_qubits - i + 1) for i in k])
    log_amp -= 0.5 * n_qubits * math.log(2.0)
    return _frozen(np.exp(log_amp))


def dicke_state_product(n_qubits: int, m) -> np.ndarray:
    """Symmetric Dicke state ``|N/2, m>`` written in the ``2**N`` product basis."""
    _check_n(n_qubits, "product")
    two_down = n_qubits - 2 * m
    if abs(two_down - round(two_down)) > 1e-12 or round(two_down) % 2 \
            or not 0 <= two_down <= 2 * n_qubits:
        raise ValueError(f"invalid m={m} for N={n_qubits}")
    v = np.zeros(2 ** n_qubits, dtype=complex)
    for downs in combinations(range(n_qubits), int(round(two_down)) // 2):
        # qubit 0 is the most significant bit; bit 1 means |down>
        v[sum(1 << (n_qubits - 1 - q) for q in downs)] = 1.0
    return _frozen(v / np.linalg.norm(v))


def fock_state(n: int, dim: int) -> np.ndarray:
    if n < 0:
        raise ValueError("Fock level must be >= 0")
    if n >= dim:
        raise ValueError(f"Fock level {n} does not fit in dimension {dim}")
    return basis_state(n, dim)


def bell_states() -> dict[str, np.ndarray]:
    """``phi_plus, phi_minus, psi_plus, psi_minus`` on two qubits, basis (e, g) per qubit."""
    ee, eg, ge, gg = (kron(a, b) for a in (KET_E, KET_G) for b in (KET_E, KET_G))
    r = 1 / math.sqrt(2)
    return {
        "phi_plus": _frozen(r * (gg + ee)),
        "phi_minus": _frozen(r * (gg - ee)),
        "psi_plus": _frozen(r * (ge + eg)),
        "psi_minus": _frozen(r * (ge - eg)),
    }
