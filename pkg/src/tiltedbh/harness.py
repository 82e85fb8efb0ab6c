"""Experiment orchestration: parameter sweeps, ensembles, CSV outputs.

Configs are INI files (sections documented in the README).  Every output CSV
starts with `#`-prefixed metadata lines carrying the config hash, seed and
package version; identical config + seed produces byte-identical CSVs, and
writing over a file with a different config hash is refused.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .fock import ModelParams, enumerate_basis, sector_basis
from .floquet import converged_propagator, eigenphases
from .mps import from_product_state
from .spectral import (
    empirical_cdf,
    integrated_poisson,
    integrated_wigner,
    mean_square_deviation,
    spacings_from_phases,
)
from .tebd import Trajectory, evolve

EXPERIMENT_KINDS = (
    "schmidt-distribution",
    "spectral-scan",
    "entropy-scan",
    "threshold-scan",
)


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class OutputHashMismatch(RuntimeError):
    """Refusing to overwrite an output produced by a different config."""


@dataclass
class ExperimentConfig:
    kind: str
    j: float = 1.0
    u_over_j: list = field(default_factory=lambda: [1.0])
    f_over_j: list = field(default_factory=lambda: [1.0])
    n_sites: int = 32
    n_particles: int = 6
    window: int = 6
    n_max: int = 6
    kappa: int = 0
    steps_per_period: int = 250
    t_final_periods: float = 4.776
    chi_max: int = 100
    epsilon: float = 0.01
    observe_every_periods: float = 0.1
    n_initial_states: int = 10
    seed: int = 0
    scheme: str = "cf4"
    start_steps: int = 32
    phase_tol: float = 1e-6
    constrain_all_occupied: bool = False

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.u_over_j or not self.f_over_j:
            raise ConfigError("parameter ranges must be nonempty")
        if any(f <= 0 for f in self.f_over_j):
            raise ConfigError("f_over_j values must be positive")
        if self.t_final_periods <= 0:
            raise ConfigError("t_final_periods must be positive")
        if self.window < 1 or self.window > self.n_sites:
            raise ConfigError("window must fit in the lattice")
        if self.seed is None:
            raise ConfigError("a seed is required; unseeded runs are not allowed")
        steps = self.t_final_periods * self.steps_per_period
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigError("steps_per_period must make t_final an integer "
                              "number of steps")

    def canonical_text(self) -> str:
        pairs = sorted(self.__dict__.items())
        lines = []
        for key, val in pairs:
            if isinstance(val, list):
                val = ",".join(f"{v:.12g}" for v in val)
            lines.append(f"{key}={val}")
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()[:16]


_FIELD_SECTIONS = {
    "kind": ("experiment", str),
    "j": ("model", float),
    "u_over_j": ("model", "floatlist"),
    "f_over_j": ("model", "floatlist"),
    "n_sites": ("lattice", int),
    "n_particles": ("lattice", int),
    "window": ("lattice", int),
    "n_max": ("lattice", int),
    "kappa": ("lattice", int),
    "steps_per_period": ("evolution", int),
    "t_final_periods": ("evolution", float),
    "chi_max": ("evolution", int),
    "epsilon": ("evolution", float),
    "observe_every_periods": ("evolution", float),
    "n_initial_states": ("ensemble", int),
    "seed": ("ensemble", int),
    "constrain_all_occupied": ("ensemble", "bool"),
    "scheme": ("floquet", str),
    "start_steps": ("floquet", int),
    "phase_tol": ("floquet", float),
}


def load_config(path) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    kwargs = {}
    for name, (section, kind) in _FIELD_SECTIONS.items():
        if not parser.has_option(section, name):
            continue
        raw = parser.get(section, name)
        if kind == "floatlist":
            kwargs[name] = [float(x) for x in raw.split(",") if x.strip()]
        elif kind == "bool":
            kwargs[name] = parser.getboolean(section, name)
        else:
            kwargs[name] = kind(raw)
    if "kind" not in kwargs:
        raise ConfigError("config must set [experiment] kind")
    return ExperimentConfig(**kwargs)


def random_initial_occupations(n_particles: int, window_size: int, n_max: int,
                               rng: np.random.Generator,
                               require_all_occupied: bool = False) -> tuple:
    """Uniform weak composition of n_particles into window_size parts.

    Sampled by uniform stars-and-bars placement with rejection of
    over-cutoff parts; deterministic for a given generator state.
    """
    if window_size < 1:
        raise ValueError("window_size must be >= 1")
    if n_particles > n_max * window_size:
        raise ValueError("cutoff makes the requested filling impossible")
    if window_size == 1:
        return (n_particles,)
    slots = n_particles + window_size - 1
    for _ in range(100_000):
        bars = np.sort(rng.choice(slots, size=window_size - 1, replace=False))
        edges = np.concatenate(([-1], bars, [slots]))
        counts = np.diff(edges) - 1
        if counts.max() > n_max:
            continue
        if require_all_occupied and counts.min() == 0:
            continue
        return tuple(int(c) for c in counts)
    raise RuntimeError("rejection sampling failed to produce a valid filling")


def _placed_occupations(config: ExperimentConfig, rng) -> list:
    window = random_initial_occupations(
        config.n_particles, config.window, config.n_max, rng,
        config.constrain_all_occupied,
    )
    occ = [0] * config.n_sites
    offset = (config.n_sites - config.window) // 2
    for i, n in enumerate(window):
        occ[offset + i] = n
    return occ


def _write_csv(path: Path, metadata: dict, header: str, rows) -> None:
    cfg_hash = metadata["config_hash"]
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.startswith("# config_hash="):
                    old = line.strip().split("=", 1)[1]
                    if old != cfg_hash:
                        raise OutputHashMismatch(
                            f"{path} was written with config {old}, "
                            f"refusing to overwrite with {cfg_hash}"
                        )
                    break
    buf = io.StringIO()
    for key in ("config_hash", "version", "seed", "experiment"):
        buf.write(f"# {key}={metadata[key]}\n")
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(_fmt(x) for x in row) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _metadata(config: ExperimentConfig) -> dict:
    return {
        "config_hash": config.hash(),
        "version": __version__,
        "seed": config.seed,
        "experiment": config.kind,
    }


def write_run_record(config: ExperimentConfig, out_dir: Path,
                     wall_time: float) -> Path:
    """Side record with provenance; wall time is intentionally outside the
    byte-determinism contract of the CSVs."""
    record = {
        "config_hash": config.hash(),
        "version": __version__,
        "seed": config.seed,
        "experiment": config.kind,
        "wall_time_s": wall_time,
    }
    path = out_dir / "run_record.json"
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def run_evolution_ensemble(config: ExperimentConfig, progress=None) -> dict:
    """All TEBD trajectories of the configured sweep.

    Returns {(u_over_j, f_over_j): [Trajectory, ...]}.  Runs execute in a
    fixed order; run r of parameter point p is seeded with (seed, p, r).
    """
    out = {}
    for p_idx, u in enumerate(config.u_over_j):
        for f_idx, f in enumerate(config.f_over_j):
            params = ModelParams(J=config.j, U=u * config.j, F=f * config.j)
            t_b = params.bloch_period
            dt = t_b / config.steps_per_period
            trajs = []
            for r in range(config.n_initial_states):
                rng = np.random.default_rng(
                    [config.seed, p_idx * len(config.f_over_j) + f_idx, r]
                )
                occ = _placed_occupations(config, rng)
                state = from_product_state(occ, config.n_max, config.chi_max)
                traj = evolve(
                    state, params,
                    t_final=config.t_final_periods * t_b,
                    dt=dt,
                    chi_max=config.chi_max,
                    observe_every=config.observe_every_periods * t_b,
                    epsilon=config.epsilon,
                )
                trajs.append(traj)
                if progress is not None:
                    progress(u, f, r)
            out[(u, f)] = trajs
    return out


def _padded_mean_spectrum(trajs, chi: int, index: int = -1) -> np.ndarray:
    """Index-wise mean of descending spectra, zero-padded to length chi."""
    stack = np.zeros((len(trajs), chi))
    for i, traj in enumerate(trajs):
        spec = traj.spectra[index][:chi]
        stack[i, : len(spec)] = spec
    return stack.mean(axis=0)


def run_schmidt_distribution(config: ExperimentConfig, out_dir,
                             ensemble=None) -> Path:
    """Ensemble-averaged descending Schmidt spectrum at the final time."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    if ensemble is None:
        ensemble = run_evolution_ensemble(config)
    rows = []
    for (u, f), trajs in ensemble.items():
        mean_spec = _padded_mean_spectrum(trajs, config.chi_max)
        for alpha, lam in enumerate(mean_spec, start=1):
            rows.append((u, f, alpha, float(lam)))
    path = out_dir / "schmidt_distribution.csv"
    _write_csv(path, _metadata(config), "u_over_j,f_over_j,alpha,lambda_mean",
               rows)
    write_run_record(config, out_dir, time.time() - t0)
    return path


def run_entropy_scan(config: ExperimentConfig, out_dir, ensemble=None):
    """Mean max-bond entropy at the final time plus full S(t) traces."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    if ensemble is None:
        ensemble = run_evolution_ensemble(config)
    final_rows, trace_rows = [], []
    for (u, f), trajs in ensemble.items():
        t_b = 2.0 * np.pi / (f * config.j)
        s_stack = np.array([traj.s_max for traj in trajs])
        times = np.array(trajs[0].times) / t_b
        final_rows.append((u, f, float(s_stack[:, -1].mean())))
        for t, s in zip(times, s_stack.mean(axis=0)):
            trace_rows.append((u, f, float(t), float(s)))
    meta = _metadata(config)
    path_final = out_dir / "entropy_vs_f.csv"
    _write_csv(path_final, meta, "u_over_j,f_over_j,s_mean", final_rows)
    path_trace = out_dir / "entropy_vs_t.csv"
    _write_csv(path_trace, meta, "u_over_j,f_over_j,t_over_tb,s_mean",
               trace_rows)
    write_run_record(config, out_dir, time.time() - t0)
    return path_final, path_trace


def run_threshold_scan(config: ExperimentConfig, out_dir, ensemble=None) -> Path:
    """Mean number of Schmidt coefficients above epsilon at the final time."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    if ensemble is None:
        ensemble = run_evolution_ensemble(config)
    rows = []
    for (u, f), trajs in ensemble.items():
        counts = [traj.n_above_eps[-1] for traj in trajs]
        rows.append((u, f, float(np.mean(counts))))
    path = out_dir / "threshold_counts.csv"
    _write_csv(path, _metadata(config),
               "u_over_j,f_over_j,count_mean", rows)
    write_run_record(config, out_dir, time.time() - t0)
    return path


def floquet_point(config: ExperimentConfig, u: float, f: float):
    """Converged Floquet spectrum statistics at one (U/J, F/J) point."""
    params = ModelParams(J=config.j, U=u * config.j, F=f * config.j)
    basis = enumerate_basis(config.n_particles, config.n_sites,
                            config.n_particles)
    sector = sector_basis(basis, config.kappa)
    prop = converged_propagator(sector, params, scheme=config.scheme,
                                start_steps=config.start_steps,
                                phase_tol=config.phase_tol)
    phases = eigenphases(prop)
    sample = spacings_from_phases(phases.phases)
    d2p = mean_square_deviation(sample, "poisson")
    d2w = mean_square_deviation(sample, "wigner")
    return sample, prop, d2p, d2w


def run_spectral_scan(config: ExperimentConfig, out_dir) -> Path:
    """Delta^2 against both reference statistics over the (U/J, F/J) grid."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()
    meta = _metadata(config)
    rows = []
    grid = np.linspace(0.0, 5.0, 1000)
    for u in config.u_over_j:
        for f in config.f_over_j:
            sample, prop, d2p, d2w = floquet_point(config, u, f)
            rows.append((u, f, prop.dim, prop.n_steps, d2p, d2w))
            cdf = empirical_cdf(sample)
            cdf_rows = zip(grid, cdf(grid), integrated_poisson(grid),
                           integrated_wigner(grid))
            _write_csv(
                out_dir / f"spacing_cdf_u{_fmt(u)}_f{_fmt(f)}.csv", meta,
                "s,f_empirical,i_poisson,i_wigner",
                [(float(a), float(b), float(c), float(d))
                 for a, b, c, d in cdf_rows],
            )
    path = out_dir / "spectral_scan.csv"
    _write_csv(path, meta,
               "u_over_j,f_over_j,dim,n_steps,delta2_poisson,delta2_wigner",
               rows)
    write_run_record(config, out_dir, time.time() - t0)
    return path


def run_experiment(config: ExperimentConfig, out_dir):
    if config.kind == "spectral-scan":
        return run_spectral_scan(config, out_dir)
    if config.kind == "schmidt-distribution":
        return run_schmidt_distribution(config, out_dir)
    if config.kind == "entropy-scan":
        return run_entropy_scan(config, out_dir)
    if config.kind == "threshold-scan":
        return run_threshold_scan(config, out_dir)
    raise ConfigError(f"unknown experiment kind {config.kind!r}")
