"""Master-equation and stochastic-master-equation integration with feedback.

The deterministic integrator is fixed-step RK4 on

    d rho/dt = -i[H(u), rho] + sum_K D[K] rho,      K in {L_j} + {M_j}

with ``H(u) = sum_fixed H_0 + sum_j u_j H_j``. Conditional trajectories use
Euler-Maruyama on the diffusive unraveling, with one independent Wiener
increment per measurement channel::

    d rho = (...) dt + sum_j H[M_j] rho dW_j

Ensembles are split into fixed-size blocks of trajectories. Each trajectory
owns an RNG stream spawned from the ensemble seed, and blocks are reduced in
trajectory order, so results do not depend on the number of worker threads.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from . import tolerances as tol
from .bound import BoundResult, SystemSpec
from .errors import ConvergenceWarning, DimensionError, NumericalError, PositivityWarning
from .quantum_core import as_density, as_state, dagger

METHODS = ("rk4", "euler_maruyama", "kraus")
STOCHASTIC_METHODS = ("euler_maruyama", "kraus")
BLOCK_SIZE = 128
NOISE_CHUNK = 1024

USchedule = Callable[[float], Sequence[float]]


@dataclass(frozen=True)
class IntegratorConfig:
    """Time stepping and bookkeeping for one run.

    ``method`` is ``"rk4"`` for the master equation, or ``"euler_maruyama"`` /
    ``"kraus"`` for conditional trajectories. ``"kraus"`` is the first-order
    step ``rho -> K rho K^+ + sum_L L rho L^+ dt`` (normalized) with
    ``K = 1 - (iH + G/2) dt + sum_j M_j dy_j``; it agrees with Euler-Maruyama
    to the same order but keeps every state positive. States are sampled
    every ``record_every`` steps.
    """

    dt: float
    t_final: float
    method: str = "euler_maruyama"
    seed: int = 0
    renormalize_every: int = 1
    record_every: int = 1
    emit_records: bool = False
    store_states: bool = False

    def __post_init__(self):
        if not (self.dt > 0 and self.t_final > 0):
            raise ValueError("dt and t_final must be positive")
        if self.dt > self.t_final:
            raise ValueError("dt must not exceed t_final")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.renormalize_every < 1 or self.record_every < 1:
            raise ValueError("renormalize_every and record_every must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        if abs(self.t_final / self.dt - round(self.t_final / self.dt)) > 1e-6:
            raise ValueError("t_final must be an integer multiple of dt")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @property
    def record_steps(self) -> np.ndarray:
        steps = np.arange(0, self.n_steps + 1, self.record_every)
        if steps[-1] != self.n_steps:
            steps = np.append(steps, self.n_steps)
        return steps


@dataclass(frozen=True)
class FeedbackConfig:
    """Switching feedback law with gain ``alpha`` (also the input bound) and threshold ``beta``.

    The law drives the ``control_index``-th controlled Hamiltonian term.
    """

    alpha: float
    target: np.ndarray
    beta: float = 0.4
    control_index: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        object.__setattr__(self, "target", as_state(self.target))

    @property
    def projector(self) -> np.ndarray:
        return np.outer(self.target, self.target.conj())


@dataclass
class TrajectoryEnsemble:
    """Cost samples ``j_t = 1 - <psi|rho_t|psi>`` for one or many trajectories.

    ``j`` has shape ``(n_traj, n_times)``. ``rho_mean`` (if stored) is the
    trajectory-averaged density matrix at each recorded time.
    """

    times: np.ndarray
    j: np.ndarray
    seeds: Optional[np.ndarray] = None
    rho_mean: Optional[np.ndarray] = None
    max_abs_u: Optional[np.ndarray] = None
    positivity_flags: Optional[np.ndarray] = None
    min_eigenvalue: Optional[np.ndarray] = None
    records: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def n_traj(self) -> int:
        return self.j.shape[0]

    @cached_property
    def mean(self) -> np.ndarray:
        # fsum is exactly rounded, hence independent of summation order
        return np.array([math.fsum(col) / self.n_traj for col in self.j.T])

    @cached_property
    def stderr(self) -> np.ndarray:
        if self.n_traj < 2:
            return np.zeros(self.j.shape[1])
        dev = self.j - self.mean
        var = np.array([math.fsum(col) for col in (dev * dev).T]) / (self.n_traj - 1)
        return np.sqrt(var / self.n_traj)

    def window(self, fraction: float = 0.1) -> np.ndarray:
        t_end = self.times[-1]
        return self.times >= t_end - fraction * t_end - 1e-12

    def steady_state(self, fraction: float = 0.1) -> tuple[float, float]:
        """``(J_inf, stderr)`` from per-trajectory averages over the final time window."""
        per_traj = self.j[:, self.window(fraction)].mean(axis=1)
        mean = math.fsum(per_traj) / per_traj.size
        if per_traj.size < 2:
            return mean, 0.0
        var = math.fsum((per_traj - mean) ** 2) / (per_traj.size - 1)
        return mean, math.sqrt(var / per_traj.size)

    def trend(self, fraction: float = 0.1) -> float:
        """Least-squares change of the mean cost across the final window."""
        mask = self.window(fraction)
        t, y = self.times[mask], self.mean[mask]
        if t.size < 2:
            return 0.0
        slope = np.polyfit(t - t[0], y, 1)[0]
        return float(slope * (t[-1] - t[0]))


class _Generator:
    """Precomputed operator stacks for a ``SystemSpec``."""

    def __init__(self, spec: SystemSpec, dim: int):
        if spec.dim is not None and spec.dim != dim:
            raise DimensionError(f"state dimension {dim} != system dimension {spec.dim}")
        self.dim = dim
        self.spec = spec
        fixed = [h.matrix for h in spec.hamiltonians if h.fixed]
        self.h0 = sum(fixed) if fixed else None
        ctrl = spec.controlled
        self.hc = np.array([h.matrix for h in ctrl]).reshape(len(ctrl), dim, dim)
        self.u_max = np.array([h.u_max for h in ctrl])
        chans = list(spec.decoherence_ops) + list(spec.measurement_ops)
        self.k = np.array(chans).reshape(len(chans), dim, dim)
        self.kd = dagger(self.k)
        self.g = (self.kd @ self.k).sum(axis=0) if chans else None
        self.m = np.array(spec.measurement_ops).reshape(len(spec.measurement_ops), dim, dim)
        self.md = dagger(self.m)
        n_l = len(spec.decoherence_ops)
        self.l = self.k[:n_l]
        self.ld = self.kd[:n_l]

    @property
    def n_controls(self):
        return self.hc.shape[0]

    @property
    def n_channels(self):
        return self.m.shape[0]

    def check_controls(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1:] != (self.n_controls,):
            raise ValueError(f"expected {self.n_controls} control values, got shape {u.shape}")
        if np.any(np.abs(u) > self.u_max * (1 + 1e-12)):
            raise ValueError("control bound violated: |u_j| > u_max_j")
        return u

    def drift(self, rho, u):
        out = np.zeros_like(rho)
        H = None
        if self.n_controls:
            H = np.einsum("...j,jab->...ab", u, self.hc)
        if self.h0 is not None:
            H = self.h0 if H is None else H + self.h0
        if H is not None:
            out += -1j * (H @ rho - rho @ H)
        if self.g is not None:
            rk = rho[..., None, :, :]
            out += (self.k @ rk @ self.kd).sum(axis=-3)
            out -= 0.5 * (self.g @ rho + rho @ self.g)
        return out

    def hamiltonian(self, u):
        H = np.zeros(u.shape[:-1] + (self.dim, self.dim), dtype=complex)
        if self.n_controls:
            H = H + np.einsum("...j,jab->...ab", u, self.hc)
        if self.h0 is not None:
            H = H + self.h0
        return H

    def kraus_step(self, rho, u, dW, dt):
        """Positivity-preserving first-order step with measurement records ``dy = <M+M^+> dt + dW``."""
        K = np.eye(self.dim) - 1j * self.hamiltonian(u) * dt
        if self.g is not None:
            K = K - 0.5 * self.g * dt
        if self.n_channels:
            dy = self.innovation_mean(rho) * dt + dW
            K = K + np.einsum("...k,kab->...ab", dy, self.m)
        new = K @ rho @ dagger(K)
        if self.l.shape[0]:
            new = new + (self.l @ rho[..., None, :, :] @ self.ld).sum(axis=-3) * dt
        new = 0.5 * (new + dagger(new))
        return new / np.trace(new, axis1=-2, axis2=-1).real[..., None, None]

    def backaction(self, rho):
        """``H[M_j] rho`` for every measurement channel, stacked on axis -3."""
        rk = rho[..., None, :, :]
        X = self.m @ rk + rk @ self.md
        tr = np.trace(X, axis1=-2, axis2=-1)
        return X - tr[..., None, None] * rk

    def innovation_mean(self, rho):
        """``Tr[(M_j + M_j^+) rho]`` for every channel."""
        rk = rho[..., None, :, :]
        return np.trace((self.m + self.md) @ rk, axis1=-2, axis2=-1).real


def _cost(rho, psi):
    return 1.0 - np.einsum("i,...ij,j->...", psi.conj(), rho, psi).real


def lindblad_rhs(spec: SystemSpec, u: Sequence[float], rho) -> np.ndarray:
    """Right-hand side of the master equation for controls ``u`` (one per controlled term).

    Raises
    ------
    ValueError
        If any ``|u_j|`` exceeds the term's ``u_max``.
    """
    rho = np.asarray(rho, dtype=complex)
    gen = _Generator(spec, rho.shape[-1])
    return gen.drift(rho, gen.check_controls(u))


def _zero_controls(n):
    zeros = np.zeros(n)
    return lambda t: zeros


def integrate_master(spec: SystemSpec, u_schedule: Optional[USchedule], rho0, cfg: IntegratorConfig,
                     target) -> TrajectoryEnsemble:
    """Integrate the master equation with RK4 and record ``J_t`` for ``target``.

    Raises
    ------
    NumericalError
        If the trace drifts by more than ``1e-10`` in one step or the state
        loses Hermiticity beyond ``1e-10``.
    """
    if cfg.method != "rk4":
        raise ValueError("integrate_master needs method='rk4'")
    rho = as_density(rho0).copy()
    psi = as_state(target)
    gen = _Generator(spec, rho.shape[0])
    schedule = u_schedule or _zero_controls(gen.n_controls)
    dt = cfg.dt

    def f(t, r):
        return gen.drift(r, gen.check_controls(schedule(t)))

    rec = cfg.record_steps
    times = rec * dt
    j = np.empty(rec.size)
    states = np.empty((rec.size,) + rho.shape, dtype=complex) if cfg.store_states else None
    ri = 0
    for n in range(cfg.n_steps + 1):
        if n == rec[ri]:
            j[ri] = _cost(rho, psi)
            if states is not None:
                states[ri] = rho
            ri += 1
            if n == cfg.n_steps:
                break
        t = n * dt
        tr_old = np.trace(rho).real
        k1 = f(t, rho)
        k2 = f(t + dt / 2, rho + dt / 2 * k1)
        k3 = f(t + dt / 2, rho + dt / 2 * k2)
        k4 = f(t + dt, rho + dt * k3)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = abs(np.trace(rho).real - tr_old)
        if drift > tol.TRACE_DRIFT_PER_STEP:
            raise NumericalError(f"trace drift {drift:.3e} at t={t + dt:.6g}; reduce dt")
        herm = np.max(np.abs(rho - rho.conj().T))
        if herm > tol.HERMITICITY_DRIFT:
            raise NumericalError(f"Hermiticity drift {herm:.3e} at t={t + dt:.6g}; reduce dt")
        rho = 0.5 * (rho + rho.conj().T)
        if not np.all(np.isfinite(rho)):
            raise NumericalError(f"non-finite state at t={t + dt:.6g}")
    return TrajectoryEnsemble(times=times, j=j[None, :], rho_mean=states,
                              meta={"method": "rk4", "dt": dt})


def sme_step(spec: SystemSpec, u, rho, dW, dt: float, renormalize: bool = True) -> np.ndarray:
    """One Euler-Maruyama step of the conditional master equation.

    ``rho`` may carry leading batch axes; ``dW`` then has shape
    ``(..., n_measurement_channels)`` with entries drawn from ``N(0, dt)``.
    A :class:`PositivityWarning` is issued if an eigenvalue drops below ``-1e-6``.
    """
    rho = np.asarray(rho, dtype=complex)
    gen = _Generator(spec, rho.shape[-1])
    u = gen.check_controls(np.broadcast_to(np.asarray(u, dtype=float),
                                           rho.shape[:-2] + (gen.n_controls,)))
    out = _em_update(gen, rho, u, np.asarray(dW, dtype=float), dt, renormalize)
    if np.any(_min_eig(out) < tol.POSITIVITY_FLAG):
        warnings.warn("density matrix eigenvalue below -1e-6", PositivityWarning, stacklevel=2)
    return out


def _em_update(gen, rho, u, dW, dt, renormalize):
    new = rho + gen.drift(rho, u) * dt
    if gen.n_channels:
        new = new + np.einsum("...k,...kab->...ab", dW, gen.backaction(rho))
    new = 0.5 * (new + dagger(new))
    if renormalize:
        new = new / np.trace(new, axis1=-2, axis2=-1).real[..., None, None]
    return new


def _min_eig(rho):
    return np.linalg.eigvalsh(rho)[..., 0]


def feedback_signal(rho, hamiltonian, target) -> np.ndarray:
    """``Tr{i[H, rho] Q}`` with ``Q = |target><target|`` (real; batched over ``rho``)."""
    psi = np.asarray(target, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    comm = hamiltonian @ rho - rho @ hamiltonian
    return (1j * np.einsum("i,...ij,j->...", psi.conj(), comm, psi)).real


def feedback_u(rho, hamiltonian, fb: FeedbackConfig, state):
    """Switching feedback input and updated hysteresis state.

    ``state`` is True when the trajectory last left the band
    ``beta/2 < Tr(Q rho) < beta`` through its upper edge. The returned input
    satisfies ``|u| <= alpha`` exactly.

    Returns
    -------
    u : ndarray
        Control input, same leading shape as ``rho``.
    new_state : ndarray of bool
    """
    rho = np.asarray(rho, dtype=complex)
    fid = 1.0 - _cost(rho, fb.target)
    state = np.broadcast_to(np.asarray(state, dtype=bool), fid.shape)
    new_state = np.where(fid >= fb.beta, True, np.where(fid <= fb.beta / 2, False, state))
    u_fb = np.clip(-fb.alpha * feedback_signal(rho, hamiltonian, fb.target), -fb.alpha, fb.alpha)
    u = np.where(new_state, u_fb, fb.alpha)
    return u, new_state


def initial_hysteresis(rho, fb: FeedbackConfig):
    """Starting state: inside the band the trajectory counts as having entered from below."""
    fid = 1.0 - _cost(np.asarray(rho, dtype=complex), fb.target)
    return np.asarray(fid >= fb.beta)


def trajectory_seeds(seed: int, n_traj: int) -> np.ndarray:
    children = np.random.SeedSequence(int(seed)).spawn(n_traj)
    return np.array([c.generate_state(1, dtype=np.uint64)[0] for c in children], dtype=np.uint64)


def _run_block(gen: _Generator, rho0, psi, cfg: IntegratorConfig, seeds, fb, u_schedule):
    b = seeds.size
    dt = cfg.dt
    sqdt = math.sqrt(dt)
    rngs = [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
    rho = np.broadcast_to(rho0, (b,) + rho0.shape).copy()
    rec = cfg.record_steps
    j = np.empty((b, rec.size))
    rho_sum = np.empty((rec.size,) + rho0.shape, dtype=complex) if cfg.store_states else None
    y = np.zeros((b, gen.n_channels))
    records = np.empty((b, rec.size, gen.n_channels)) if cfg.emit_records else None
    max_u = np.zeros(b)
    flags = np.zeros(b, dtype=np.int64)
    min_eig = np.full(b, np.inf)
    controls = np.zeros((b, gen.n_controls))
    if fb is not None:
        h_fb = gen.hc[fb.control_index]
        state = np.broadcast_to(initial_hysteresis(rho0, fb), (b,)).copy()
    kraus = cfg.method == "kraus"
    noise = None
    ri = 0
    for n in range(cfg.n_steps + 1):
        if n == rec[ri]:
            j[:, ri] = _cost(rho, psi)
            if rho_sum is not None:
                rho_sum[ri] = rho.sum(axis=0)
            if records is not None:
                records[:, ri] = y
            ri += 1
            if n == cfg.n_steps:
                break
        if fb is not None:
            u_val, state = feedback_u(rho, h_fb, fb, state)
            controls[:, fb.control_index] = u_val
        elif u_schedule is not None:
            controls[:] = gen.check_controls(u_schedule(n * dt))
        if gen.n_controls:
            max_u = np.maximum(max_u, np.abs(controls).max(axis=1))
            if np.any(np.abs(controls) > gen.u_max):
                raise ValueError("control bound violated: |u_j| > u_max_j")
        if gen.n_channels:
            c = n % NOISE_CHUNK
            if c == 0:
                noise = np.stack([g.standard_normal((NOISE_CHUNK, gen.n_channels)) for g in rngs])
            dW = noise[:, c, :] * sqdt
            if records is not None:
                y += gen.innovation_mean(rho) * dt + dW
        else:
            dW = np.zeros((b, 0))
        if kraus:
            new = gen.kraus_step(rho, controls, dW, dt)
        else:
            tr_old = np.trace(rho, axis1=-2, axis2=-1).real
            new = rho + gen.drift(rho, controls) * dt
            if gen.n_channels:
                new += np.einsum("bk,bkxy->bxy", dW, gen.backaction(rho))
            drift = np.max(np.abs(np.trace(new, axis1=-2, axis2=-1).real - tr_old))
            if drift > tol.TRACE_DRIFT_PER_STEP:
                raise NumericalError(f"trace drift {drift:.3e} at step {n + 1}; reduce dt")
            new = 0.5 * (new + dagger(new))
            if (n + 1) % cfg.renormalize_every == 0:
                new /= np.trace(new, axis1=-2, axis2=-1).real[:, None, None]
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"non-finite state at step {n + 1}; reduce dt")
        low = _min_eig(new)
        flags += low < tol.POSITIVITY_FLAG
        np.minimum(min_eig, low, out=min_eig)
        rho = new
    return j, rho_sum, max_u, flags, records, min_eig


def simulate_ensemble(spec: SystemSpec, rho0, cfg: IntegratorConfig, n_traj: int, target,
                      feedback: Optional[FeedbackConfig] = None,
                      u_schedule: Optional[USchedule] = None,
                      threads: int = 1) -> TrajectoryEnsemble:
    """Simulate ``n_traj`` conditional trajectories (``cfg.method`` stochastic).

    Controls come from ``feedback`` (state-dependent), from ``u_schedule``
    (open loop), or are zero. ``threads`` changes speed only, never results.
    """
    if cfg.method not in STOCHASTIC_METHODS:
        raise ValueError(f"stochastic simulation needs method in {STOCHASTIC_METHODS}")
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    if feedback is not None and u_schedule is not None:
        raise ValueError("give either feedback or u_schedule, not both")
    rho0 = as_density(rho0)
    psi = as_state(target)
    gen = _Generator(spec, rho0.shape[0])
    if feedback is not None:
        if not 0 <= feedback.control_index < gen.n_controls:
            raise ValueError("feedback control_index does not name a controlled term")
        if feedback.alpha > gen.u_max[feedback.control_index]:
            raise ValueError("feedback gain alpha exceeds the term's u_max")
    seeds = trajectory_seeds(cfg.seed, n_traj)
    blocks = [seeds[i:i + BLOCK_SIZE] for i in range(0, n_traj, BLOCK_SIZE)]

    def work(block):
        return _run_block(gen, rho0, psi, cfg, block, feedback, u_schedule)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]

    j = np.concatenate([p[0] for p in parts])
    rho_mean = None
    if cfg.store_states:
        total = parts[0][1].copy()
        for p in parts[1:]:
            total += p[1]
        rho_mean = total / n_traj
    flags = np.concatenate([p[3] for p in parts])
    min_eig = np.concatenate([p[5] for p in parts])
    if flags.any():
        warnings.warn(f"{int((flags > 0).sum())} of {n_traj} trajectories had eigenvalues below "
                      f"-1e-6 (lowest {min_eig.min():.3g}); reduce dt to shrink the excursion",
                      PositivityWarning, stacklevel=2)
    return TrajectoryEnsemble(
        times=cfg.record_steps * cfg.dt, j=j, seeds=seeds, rho_mean=rho_mean,
        max_abs_u=np.concatenate([p[2] for p in parts]), positivity_flags=flags,
        min_eigenvalue=min_eig,
        records=np.concatenate([p[4] for p in parts]) if cfg.emit_records else None,
        meta={"method": cfg.method, "dt": cfg.dt, "seed": int(cfg.seed)})


def simulate_feedback_ensemble(spec: SystemSpec, fb: FeedbackConfig, rho0, cfg: IntegratorConfig,
                               n_traj: int, threads: int = 1, window: float = 0.1,
                               trend_tol: float = 0.02) -> TrajectoryEnsemble:
    """Feedback-controlled ensemble toward ``fb.target``.

    The steady-state estimate (mean over the final ``window`` fraction of the
    run) is stored in ``meta["j_inf"]`` / ``meta["j_inf_stderr"]``. A
    :class:`ConvergenceWarning` is issued when the mean cost still changes by
    more than ``trend_tol`` across that window.
    """
    ens = simulate_ensemble(spec, rho0, cfg, n_traj, fb.target, feedback=fb, threads=threads)
    j_inf, se = ens.steady_state(window)
    change = ens.trend(window)
    converged = abs(change) <= max(trend_tol, 3 * se)
    ens.meta.update(j_inf=j_inf, j_inf_stderr=se, trend=change, converged=converged,
                    alpha=fb.alpha, beta=fb.beta)
    if not converged:
        warnings.warn(f"mean cost changes by {change:.3g} over the final window; "
                      "increase t_final", ConvergenceWarning, stacklevel=2)
    return ens


def default_t_final(gamma: float, kappa: float) -> float:
    """``20/gamma``, or ``20/kappa`` without decoherence."""
    rate = gamma if gamma > 0 else kappa
    if rate <= 0:
        raise ValueError("need gamma > 0 or kappa > 0 for a default t_final")
    return 20.0 / rate


def differential_inequality_slack(times, j, bound: BoundResult) -> np.ndarray:
    """``dJ/dt + (A + U) sqrt(J) - E`` along a sampled cost curve (non-negative in theory)."""
    j = np.asarray(j, dtype=float)
    dj = np.gradient(j, times, edge_order=2)
    return dj + (bound.a_val + bound.u_val) * np.sqrt(np.clip(j, 0.0, None)) - bound.e_val
