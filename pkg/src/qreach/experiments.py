"""Experiment catalog, result tables and CSV serialization.

Every experiment maps a validated :class:`~qreach.config.Config` to one or
more :class:`ResultTable` objects. Bound sweeps record the generic engine's
``A``, ``U``, ``E``, ``J*`` next to the closed-form ``J*`` so that each CSV
doubles as a consistency check.
"""
from __future__ import annotations

import datetime
import hashlib
import json
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from . import closed_forms as cf
from . import models
from . import quantum_core as qc
from .bound import compute_bound, j_star_from_parts
from .config import Config, build_state, build_system, canonical, expand_grid, require_section
from .dynamics import (BLOCK_SIZE, FeedbackConfig, IntegratorConfig, default_t_final,
                       integrate_master, simulate_ensemble, simulate_feedback_ensemble)
from .errors import ConfigError


@dataclass
class ResultTable:
    """Rectangular table of reals with provenance metadata."""

    name: str
    columns: tuple
    rows: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.columns = tuple(self.columns)
        self.rows = np.asarray(self.rows, dtype=float).reshape(-1, len(self.columns))

    def column(self, name) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def to_csv_text(self) -> str:
        lines = [f"# {k}: {v}" for k, v in self.meta.items()]
        lines.append(",".join(self.columns))
        lines.extend(",".join(format(x, ".17g") for x in row) for row in self.rows)
        return "\n".join(lines) + "\n"

    def write(self, directory, prefix="") -> str:
        """Write ``<prefix><name>.csv`` plus a ``.meta.json`` sidecar holding the timestamp."""
        os.makedirs(directory, exist_ok=True)
        path = os.path.join(directory, f"{prefix}{self.name}.csv")
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv_text())
        side = dict(self.meta, timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
                    columns=list(self.columns), rows=int(self.rows.shape[0]))
        with open(path[:-4] + ".meta.json", "w", encoding="utf-8") as fh:
            json.dump(side, fh, indent=2, sort_keys=True)
        return path


def read_csv(path) -> ResultTable:
    meta, header, rows = {}, None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(": ")
                meta[key] = val
            elif header is None:
                header = line.split(",")
            elif line:
                rows.append([float(x) for x in line.split(",")])
    name = os.path.basename(path)[:-4]
    return ResultTable(name, header, np.array(rows).reshape(-1, len(header)), meta)


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    params: dict
    simulation: dict
    runner: Callable


def config_hash(payload) -> str:
    blob = json.dumps(canonical(payload), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _grid_product(*grids):
    return np.array(np.meshgrid(*grids, indexing="ij")).reshape(len(grids), -1).T


def _bound_row(spec, psi):
    r = compute_bound(spec, psi)
    return [r.a_val, r.u_val, r.e_val, r.j_star]


BOUND_COLS = ("A", "U", "E", "j_star", "j_star_oracle")


def _run_qubit(p, sim, threads):
    rows = []
    for u_bar, kappa, gamma, phi, theta in _grid_product(p["u_bar"], p["kappa"], p["gamma"],
                                                         p["phi"], p["theta"]):
        spec = models.qubit_system(kappa, gamma, u_bar)
        row = _bound_row(spec, qc.qubit_target(theta, phi))
        row.append(cf.qubit_bound(theta, phi, kappa, gamma, u_bar).j_star)
        rows.append([theta, phi, kappa, gamma, u_bar] + row)
    return [("bound", ("theta", "phi", "kappa", "gamma", "u_bar") + BOUND_COLS, rows)]


def _run_qutrit(p, sim, threads):
    rows = []
    for u_bar, kappa, gamma, theta, phi in _grid_product(p["u_bar"], p["kappa"], p["gamma"],
                                                         p["theta"], p["phi"]):
        spec = models.qutrit_system(kappa, gamma, u_bar)
        row = _bound_row(spec, qc.qutrit_target(theta, phi))
        row.append(cf.qutrit_bound(theta, phi, kappa, gamma, u_bar).j_star)
        rows.append([theta, phi, kappa, gamma, u_bar] + row)
    return [("bound", ("theta", "phi", "kappa", "gamma", "u_bar") + BOUND_COLS, rows)]


def _run_dicke(p, sim, threads):
    rows = []
    for l in p["l"]:
        ms = p["m"] if "m" in p else qc.spin_m_values(l)
        for u_bar, kappa, gamma, m in _grid_product(p["u_bar"], p["kappa"], p["gamma"], ms):
            spec = models.dicke_system(l, kappa, gamma, u_bar)
            row = _bound_row(spec, qc.dicke_state(l, m))
            row.append(cf.dicke_bound(l, m, kappa, gamma, u_bar).j_star)
            rows.append([l, m, kappa, gamma, u_bar] + row)
    return [("bound", ("l", "m", "kappa", "gamma", "u_bar") + BOUND_COLS, rows)]


def _run_fock(p, sim, threads):
    rows = []
    for u_bar, kappa, gamma, n in _grid_product(p["u_bar"], p["kappa"], p["gamma"], p["n"]):
        n = int(n)
        dim = models.fock_dim(n)
        spec = models.fock_system(dim, kappa, gamma, u_bar)
        row = _bound_row(spec, qc.fock_state(n, dim))
        row.append(cf.fock_bound(n, kappa, gamma, u_bar).j_star)
        rows.append([n, dim, kappa, gamma, u_bar] + row)
    return [("bound", ("n", "dim", "kappa", "gamma", "u_bar") + BOUND_COLS, rows)]


BELL_NAMES = ("phi_plus", "phi_minus", "psi_plus", "psi_minus")


def _run_bell(p, sim, threads):
    states = qc.bell_states()
    rows = []
    for gamma, u_mag in _grid_product(p["gamma"], p["U"]):
        if gamma == 0 and u_mag == 0:
            raise ConfigError("gamma = U = 0 leaves the Bell bounds undefined", field="params")
        for local in (0, 1):
            spec = (models.bell_local_system if local else models.bell_collective_system)(gamma)
            engine = []
            for name in BELL_NAMES:
                r = compute_bound(spec, states[name])
                engine.append(j_star_from_parts(r.a_val, u_mag, r.e_val))
            oracle = (cf.bell_bounds_local if local else cf.bell_bounds)(gamma, u_mag)
            rows.append([gamma, u_mag, local] + engine + list(oracle))
    cols = (("gamma", "U", "local") + tuple(f"j_{n}" for n in BELL_NAMES)
            + ("j_phi_oracle", "j_psi_plus_oracle", "j_psi_minus_oracle"))
    return [("bound", cols, rows)]


def _run_asymptotics(p, sim, threads):
    nan = math.nan
    limit = int(p["engine_max_N"])
    rows = []
    for gamma, kappa, u_bar, u_mag, N in _grid_product(p["gamma"], p["kappa"], p["u_bar"],
                                                       p["U"], p["N"]):
        if N < 1 or N != int(N):
            raise ConfigError(f"N must be a positive integer, got {N}", field="params.N")
        N = int(N)
        even = N % 2 == 0
        oracle = [cf.plus_product_bound(N, gamma, u_mag).j_star, cf.ghz_bound(N, gamma, u_mag).j_star,
                  cf.coherent_spin_bound(N, kappa, gamma, u_bar),
                  cf.dicke_center_bound(N, gamma, u_bar) if even else nan]
        engine = [nan] * 4
        if N <= limit:
            deph = models.dephasing_system(N, gamma, basis="dicke")
            for i, psi in enumerate((qc.plus_product_state(N, "dicke"), qc.ghz_state(N, "dicke"))):
                r = compute_bound(deph, psi)
                engine[i] = j_star_from_parts(r.a_val, u_mag, r.e_val)
            spin = models.dicke_system(N / 2, kappa, gamma, u_bar)
            engine[2] = compute_bound(spin, qc.dicke_state(N / 2, N / 2)).j_star
            if even:
                engine[3] = compute_bound(spin, qc.dicke_state(N / 2, 0)).j_star
        rows.append([N, gamma, kappa, u_bar, u_mag] + oracle + engine)
    names = ("product", "ghz", "css", "dicke_center")
    cols = (("N", "gamma", "kappa", "u_bar", "U") + names + tuple(f"{n}_engine" for n in names))
    return [("bound", cols, rows)]


def _point_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def _run_fig1c(p, sim, threads):
    summary, series = [], []
    kappa = float(p["kappa"][0])
    alpha = float(sim["alpha"])
    rho0 = qc.projector(qc.KET_G)
    for idx, (gamma, beta) in enumerate(_grid_product(p["gamma"], p["beta"])):
        spec = models.qubit_system(kappa, gamma, alpha)
        j_star = compute_bound(spec, qc.KET_E).j_star
        t_final = sim.get("t_final") or default_t_final(gamma, kappa)
        n_steps = int(round(t_final / sim["dt"]))
        record_every = sim.get("record_every") or max(1, n_steps // 1000)
        cfg = IntegratorConfig(dt=sim["dt"], t_final=t_final, method=sim["method"],
                               seed=_point_seed(sim["seed"], idx), record_every=record_every)
        fb = FeedbackConfig(alpha=alpha, beta=beta, target=qc.KET_E)
        ens = simulate_feedback_ensemble(spec, fb, rho0, cfg, sim["n_traj"], threads=threads)
        m = ens.meta
        summary.append([gamma, beta, kappa, alpha, j_star, m["j_inf"], m["j_inf_stderr"],
                        m["j_inf"] - j_star, m["trend"], float(m["converged"]),
                        ens.max_abs_u.max(), int((ens.positivity_flags > 0).sum()),
                        ens.min_eigenvalue.min()])
        for t, mu, se in zip(ens.times, ens.mean, ens.stderr):
            series.append([gamma, beta, t, mu, se, j_star])
    return [("summary", ("gamma", "beta", "kappa", "alpha", "j_star", "j_inf", "j_inf_stderr",
                         "gap", "trend", "converged", "max_abs_u", "flagged_trajectories",
                         "min_eigenvalue"), summary),
            ("timeseries", ("gamma", "beta", "t", "j_mean", "j_stderr", "j_star"), series)]


def _run_custom(cfg: Config):
    spec = build_system(cfg)
    targets = require_section(cfg, "targets")
    rows = []
    for i in range(len(targets)):
        psi = build_state(cfg, "targets", i)
        try:
            rows.append([i] + _bound_row(spec, psi))
        except ValueError as exc:
            raise cfg.error(str(exc), "targets", i) from None
    return [("bound", ("target", "A", "U", "E", "j_star"), rows)]


_THETA = {"start": 0.0, "stop": math.pi / 2, "num": 200, "endpoint": False}
_ANGLE = {"start": 0.0, "stop": math.pi, "num": 61}
_STOCHASTIC = {"method": "euler_maruyama", "dt": 2e-3, "n_traj": 300, "seed": 0, "alpha": 1.0,
               "beta": 0.4}

CATALOG = {
    e.name: e for e in (
        Experiment("fig1a", "qubit J* vs theta, kappa = 0, u_bar in {0, 1, 5}",
                   {"theta": _THETA, "phi": [0.0], "kappa": [0.0], "gamma": [1.0],
                    "u_bar": [0.0, 1.0, 5.0]}, {}, _run_qubit),
        Experiment("fig1b", "qubit J* vs theta, kappa = 1, u_bar in {0, 1, 5}",
                   {"theta": _THETA, "phi": [0.0], "kappa": [1.0], "gamma": [1.0],
                    "u_bar": [0.0, 1.0, 5.0]}, {}, _run_qubit),
        Experiment("fig1c", "feedback-stabilized J_inf vs J* for target |e>, kappa = u_bar = alpha = 1",
                   {"gamma": [0.2, 0.5, 1.0], "kappa": [1.0], "beta": None}, _STOCHASTIC,
                   _run_fig1c),
        Experiment("fig2a", "qutrit J* over (theta, phi), kappa = 0",
                   {"theta": _ANGLE, "phi": _ANGLE, "kappa": [0.0], "gamma": [1.0],
                    "u_bar": [0.0, 1.0, 5.0]}, {}, _run_qutrit),
        Experiment("fig2b", "qutrit J* over (theta, phi), kappa = 1",
                   {"theta": _ANGLE, "phi": _ANGLE, "kappa": [1.0], "gamma": [1.0],
                    "u_bar": [0.0, 1.0, 5.0]}, {}, _run_qutrit),
        Experiment("fig3a", "Dicke |10, m> J* for kappa in {0, 1}",
                   {"l": [10.0], "kappa": [0.0, 1.0], "gamma": [1.0], "u_bar": [0.0, 1.0, 5.0],
                    "m": None}, {}, _run_dicke),
        Experiment("fig3b", "Fock |n> J* for kappa in {0, 1}",
                   {"n": {"start": 0, "stop": 10, "num": 11}, "kappa": [0.0, 1.0],
                    "gamma": [1.0], "u_bar": [0.0, 1.0, 5.0]}, {}, _run_fock),
        Experiment("bell", "Bell-state J* under collective and local decay",
                   {"gamma": [1.0], "U": [0.0, 0.5, 1.0, 2.0, 5.0]}, {}, _run_bell),
        Experiment("asymptotics", "large-N limits: product, GHZ, CSS and |N/2, 0>",
                   {"N": [1, 2, 4, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000, 10000],
                    "gamma": [1.0], "kappa": [1.0], "u_bar": [1.0], "U": [0.0],
                    "engine_max_N": 1000}, {}, _run_asymptotics),
        Experiment("custom", "J* for an explicit system and list of targets", {}, {}, None),
    )
}


def list_experiments():
    return [(e.name, e.description) for e in CATALOG.values()]


def resolve(cfg: Config):
    """Experiment, grid parameters and simulation settings with defaults applied."""
    name = cfg.get("experiment")
    if name is None:
        raise cfg.error("missing 'experiment'", "experiment")
    exp = CATALOG[name]
    given = cfg.get("params", {})
    for key in given:
        if key not in exp.params:
            raise cfg.error(f"parameter '{key}' does not apply to experiment {name}", "params", key)
    params = {}
    for key, default in exp.params.items():
        val = given.get(key, default)
        if val is None:
            continue
        params[key] = val if key == "engine_max_N" else expand_grid(val)
    sim = dict(exp.simulation)
    for key, val in cfg.get("simulation", {}).items():
        if not exp.simulation:
            raise cfg.error(f"experiment {name} runs no simulation", "simulation", key)
        sim[key] = val
    if name == "fig1c":
        if "beta" not in params:
            params["beta"] = np.array([sim["beta"]])
        if np.any((params["beta"] <= 0) | (params["beta"] >= 1)):
            raise cfg.error("beta must lie in (0, 1)", "params", "beta")
        if sim["method"] == "rk4":
            raise cfg.error("fig1c needs a stochastic method", "simulation", "method")
        if len(params["kappa"]) != 1:
            raise cfg.error("fig1c takes a single kappa", "params", "kappa")
    return exp, params, sim


def _tables(raw, meta):
    return [ResultTable(name, cols, rows, dict(meta, table=name)) for name, cols, rows in raw]


def run_experiment(cfg: Config, threads: int = 1) -> list[ResultTable]:
    """Run the configured experiment; ``threads`` never changes the numbers."""
    if cfg.get("experiment") == "custom":
        meta = {"qreach": __version__, "experiment": "custom",
                "config_hash": config_hash({k: cfg[k] for k in ("system", "targets") if k in cfg})}
        return _tables(_run_custom(cfg), meta)
    exp, params, sim = resolve(cfg)
    meta = {"qreach": __version__, "experiment": exp.name,
            "config_hash": config_hash({"experiment": exp.name, "params": params, "simulation": sim})}
    for key in ("method", "dt", "n_traj", "seed"):
        if key in sim:
            meta[key] = sim[key]
    try:
        raw = exp.runner(params, sim, threads)
    except ConfigError:
        raise
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(str(exc), field="params") from None
    return _tables(raw, meta)


def run_bound(cfg: Config) -> list[ResultTable]:
    """Bounds for ``system`` and ``target`` / ``targets`` (the ``bound`` subcommand)."""
    if "target" in cfg and "targets" in cfg:
        raise cfg.error("give either 'target' or 'targets'", "target")
    if "target" in cfg:
        lines = dict(cfg.lines)
        lines[("targets", 0)] = cfg.line("target")
        cfg = Config(dict(cfg, targets=[cfg["target"]]), lines, cfg.source)
    tables = _tables(_run_custom(cfg), {"qreach": __version__, "experiment": "bound"})
    for t in tables:
        t.meta["config_hash"] = config_hash({k: cfg[k] for k in ("system", "targets")})
    return tables


def run_simulation(cfg: Config, threads: int = 1) -> list[ResultTable]:
    """Master-equation or trajectory run described by ``system``, ``initial_state``, ``target``."""
    spec = build_system(cfg)
    sim = dict(require_section(cfg, "simulation"))
    for key in ("dt", "t_final"):
        if key not in sim:
            raise cfg.error(f"simulation needs '{key}'", "simulation")
    method = sim.get("method", "rk4")
    target = build_state(cfg, "target") if "target" in cfg else None
    if target is None:
        raise cfg.error("missing 'target'", "target")
    rho0 = build_state(cfg, "initial_state", density=True) if "initial_state" in cfg else None
    if rho0 is None:
        raise cfg.error("missing 'initial_state'", "initial_state")
    try:
        icfg = IntegratorConfig(dt=sim["dt"], t_final=sim["t_final"], method=method,
                                seed=sim.get("seed", 0), record_every=sim.get("record_every", 1),
                                renormalize_every=sim.get("renormalize_every", 1),
                                emit_records=sim.get("emit_records", False))
        controls = sim.get("controls")
        schedule = None
        if controls is not None:
            u = np.array(controls, dtype=float)
            schedule = lambda t: u  # noqa: E731
        if method == "rk4":
            if sim.get("feedback"):
                raise cfg.error("feedback needs a stochastic method", "simulation", "feedback")
            ens = integrate_master(spec, schedule, rho0, icfg, target)
        elif sim.get("feedback"):
            if controls is not None:
                raise cfg.error("feedback and controls are exclusive", "simulation", "controls")
            fb = FeedbackConfig(alpha=sim.get("alpha", 1.0), beta=sim.get("beta", 0.4),
                                target=target)
            ens = simulate_feedback_ensemble(spec, fb, rho0, icfg, sim.get("n_traj", 1),
                                             threads=threads)
        else:
            ens = simulate_ensemble(spec, rho0, icfg, sim.get("n_traj", 1), target,
                                    u_schedule=schedule, threads=threads)
    except ConfigError:
        raise
    except ValueError as exc:
        raise cfg.error(str(exc), "simulation") from None
    meta = {"qreach": __version__, "experiment": "simulate", "method": method,
            "config_hash": config_hash({k: cfg[k] for k in cfg if k != "output"}),
            "seed": sim.get("seed", 0), "n_traj": ens.n_traj}
    for key in ("j_inf", "j_inf_stderr", "converged"):
        if key in ens.meta:
            meta[key] = ens.meta[key]
    rows = np.column_stack([ens.times, ens.mean, ens.stderr])
    return [ResultTable("simulate", ("t", "j_mean", "j_stderr"), rows, dict(meta, table="simulate"))]


def _calibrate_block_cost(method, n_steps=100) -> float:
    """Seconds per step of one full trajectory block of the qubit feedback simulation."""
    spec = models.qubit_system(1.0, 1.0, 1.0)
    cfg = IntegratorConfig(dt=1e-3, t_final=n_steps * 1e-3, method=method, seed=0)
    fb = FeedbackConfig(alpha=1.0, target=qc.KET_E)
    rho0 = qc.projector(qc.KET_G)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        simulate_ensemble(spec, rho0, cfg, 1, qc.KET_E, feedback=fb)
        t0 = time.perf_counter()
        simulate_ensemble(spec, rho0, cfg, BLOCK_SIZE, qc.KET_E, feedback=fb)
    return (time.perf_counter() - t0) / n_steps


def _calibrate_bound_cost(n_evals=20) -> float:
    """Seconds per small bound evaluation, including the closed form."""
    t0 = time.perf_counter()
    for _ in range(n_evals):
        _run_qubit({k: np.array([v]) for k, v in
                    dict(theta=0.3, phi=0.0, kappa=1.0, gamma=1.0, u_bar=1.0).items()}, {}, 1)
    return (time.perf_counter() - t0) / n_evals


def estimate_runtime(cfg: Config) -> float:
    """Rough wall-clock estimate in seconds from a cheap calibration run."""
    if cfg.get("experiment") == "custom":
        return 1e-3 * len(cfg.get("targets", []))
    exp, params, sim = resolve(cfg)
    if exp.name == "fig1c":
        # a partial block costs about as much as a full one
        per_block_step = _calibrate_block_cost(sim["method"])
        n_blocks = -(-sim["n_traj"] // BLOCK_SIZE)
        total = 0.0
        for gamma in params["gamma"]:
            t_final = sim.get("t_final") or default_t_final(gamma, params["kappa"][0])
            total += n_blocks * t_final / sim["dt"] * per_block_step
        return total * len(params["beta"])
    n_points = 1
    for key, val in params.items():
        if key not in ("engine_max_N",) and isinstance(val, np.ndarray):
            n_points *= val.size
    if exp.name == "fig3a" and "m" not in params:
        n_points *= int(2 * max(params["l"]) + 1)
    return n_points * _calibrate_bound_cost()
