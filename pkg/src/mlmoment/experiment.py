"""Synthetic reconstruction experiments: truth and noise generation, the
full sampling -> noise -> multi-level pipeline, and report files."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError
from .io import read_grid_signal, read_measurements, read_points
from .operators import make_operator
from .sampling import SamplingSet, build_sampling_set, generate_jittered_set, nyquist_level
from .solvers import (MultiLevelResult, StopConfig, default_max_level, raw_measurements,
                      run_fixed_level, run_multilevel)
from .spaces import GridSignal, Spectrum, eval_at, grid_points, max_level, synthesize, tail_energy

__all__ = [
    "ExperimentConfig",
    "RunReport",
    "add_noise",
    "emit_report",
    "fixed_level_error",
    "generate_truth",
    "run_experiment",
]

log = logging.getLogger(__name__)


def generate_truth(M: int, seed=None, L: int = 1024) -> GridSignal:
    """Real signal of degree M with random coefficients of size ~ 1/(1+|n|).

    a_n = (g_n / sqrt(2)) / (1 + |n|) with g_n standard complex Gaussian for
    n > 0, a_{-n} = conj(a_n), and a real Gaussian a_0.
    """
    rng = np.random.default_rng(seed)
    pos = (rng.standard_normal(M) + 1j * rng.standard_normal(M)) / np.sqrt(2.0)
    pos /= 1.0 + np.arange(1, M + 1)
    a0 = rng.standard_normal()
    coeffs = np.concatenate([np.conj(pos[::-1]), [a0], pos])
    spec = Spectrum(coeffs)
    assert spec.is_conjugate_symmetric()
    x = synthesize(spec, L)
    return GridSignal(x.values.real.astype(complex))


def add_noise(values, level: float, seed=None, weights=None):
    """Add white noise with weighted norm exactly ``level`` times the signal's.

    Returns ``(noisy_values, delta)`` where delta is the weighted l^2 norm of
    the noise, sqrt(sum_j w_j |n_j|^2). Real input gets real noise.
    """
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level}")
    values = np.asarray(values, dtype=complex)
    w = np.ones(values.size) if weights is None else np.asarray(weights, dtype=float)
    if level == 0:
        return values.copy(), 0.0
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(values.size).astype(complex)
    if np.any(values.imag != 0):
        noise = (noise + 1j * rng.standard_normal(values.size)) / np.sqrt(2.0)
    wnorm = lambda v: float(np.sqrt(np.sum(w * np.abs(v) ** 2)))
    delta = level * wnorm(values)
    noise *= delta / wnorm(noise)
    return values + noise, delta


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one run.

    The noise level is a noise-to-signal norm ratio: 0.12 means the weighted
    l^2 norm of the noise is 12% of that of the clean samples.
    """

    grid_size: int = 1024
    bandwidth: int = 30
    samples: int = 107
    irregularity: float = 0.5
    noise: float = 0.12
    delta: Optional[float] = None
    method: str = "lw"
    stop_flavor: Optional[str] = None
    eta: float = 0.1
    tau: float = 1.5
    drop_factor_two: bool = False
    max_level: Optional[int] = None
    max_iters_per_level: Optional[int] = None
    tail_source: str = "recursive"
    bound_source: str = "theoretical"
    residual_floor: float = 1e-12
    seed: int = 0
    truth_seed: Optional[int] = None
    sampling_seed: Optional[int] = None
    noise_seed: Optional[int] = None
    signal_file: Optional[str] = None
    points_file: Optional[str] = None
    measurements_file: Optional[str] = None
    subsample: int = 1
    out: Optional[str] = None

    def __post_init__(self):
        if self.grid_size < 1:
            raise ConfigError("grid_size must be positive")
        if self.measurements_file is None and self.signal_file is None:
            if self.bandwidth < 0 or 2 * self.bandwidth + 1 > self.grid_size:
                raise ConfigError(f"bandwidth {self.bandwidth} does not fit grid size {self.grid_size}")
        if self.points_file is None and self.measurements_file is None:
            if self.samples < 2:
                raise ConfigError("need at least 2 samples")
            if not 0 <= self.irregularity < 1:
                raise ConfigError("irregularity must lie in [0, 1)")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if self.delta is not None and self.delta < 0:
            raise ConfigError("delta must be >= 0")
        if self.method not in ("cg", "lw"):
            raise ConfigError(f"method must be cg or lw, got {self.method!r}")
        if self.subsample < 1:
            raise ConfigError("subsample must be >= 1")
        if self.measurements_file is not None and self.delta is None:
            raise ConfigError("measured data of unknown truth needs an explicit delta")

    @property
    def seeds(self):
        base = self.seed
        return (base if self.truth_seed is None else self.truth_seed,
                base + 1 if self.sampling_seed is None else self.sampling_seed,
                base + 2 if self.noise_seed is None else self.noise_seed)

    def stop_config(self, delta: float) -> StopConfig:
        return StopConfig(eta=self.eta, tau=self.tau, delta=delta,
                          flavor=self.stop_flavor or ("cg_squared" if self.method == "cg" else "lw_linear"),
                          tail_source=self.tail_source, drop_factor_two=self.drop_factor_two,
                          max_level=self.max_level, max_iters_per_level=self.max_iters_per_level,
                          residual_floor=self.residual_floor)

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: f.type for f in fields(cls)}


@dataclass
class RunReport:
    config: dict
    result: MultiLevelResult
    sampling: SamplingSet
    samples: np.ndarray
    delta: float
    grid_size: int
    truth: Optional[GridSignal] = None
    normalized_error: Optional[float] = None
    true_tails: dict = field(default_factory=dict)
    estimated_tails: dict = field(default_factory=dict)
    tails_used: dict = field(default_factory=dict)
    raw_energy: float = 0.0
    elapsed: float = 0.0

    @property
    def reconstruction(self) -> GridSignal:
        return self.result.x

    def summary(self) -> dict:
        L = self.grid_size
        s = self.sampling
        out = {
            "final_level": self.result.level,
            "termination": self.result.termination,
            "total_iterations": self.result.total_iterations,
            "samples": s.size,
            "delta": self.delta,
            "max_gap": s.max_gap,
            "max_gap_grid_units": s.max_gap * L,
            "gap_sigma": s.gap_sigma,
            "gap_sigma_grid_units": s.gap_sigma * L,
            "nyquist_level": nyquist_level(s),
            "normalized_error": self.normalized_error,
            "data_space": "scaled",
            "delta_norm": "weighted l2",
            "elapsed": self.elapsed,
        }
        return out


def _load_sampling(cfg: ExperimentConfig, sampling_seed):
    if cfg.points_file is not None:
        return build_sampling_set(read_points(cfg.points_file))
    return generate_jittered_set(cfg.samples, cfg.irregularity, seed=sampling_seed)


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    t0 = time.perf_counter()
    truth_seed, sampling_seed, noise_seed = cfg.seeds
    L = cfg.grid_size
    truth = None
    if cfg.measurements_file is not None:
        points, values = read_measurements(cfg.measurements_file)
        keep = slice(None, None, cfg.subsample)
        sampling = build_sampling_set(points[keep])
        noisy = values[keep]
        delta = float(cfg.delta)
    else:
        if cfg.signal_file is not None:
            truth = read_grid_signal(cfg.signal_file)
            if truth.L != L:
                raise ConfigError(f"signal file has {truth.L} grid points, config says {L}")
        else:
            truth = generate_truth(cfg.bandwidth, truth_seed, L)
        sampling = _load_sampling(cfg, sampling_seed)
        if cfg.subsample > 1:
            sampling = sampling.subset(cfg.subsample)
        clean = eval_at(truth, max_level(L), sampling.points)
        if np.all(truth.values.imag == 0):
            clean = clean.real.astype(complex)
        noisy, delta = add_noise(clean, cfg.noise, noise_seed, sampling.weights)
        if cfg.delta is not None:
            delta = float(cfg.delta)

    stop = cfg.stop_config(delta)
    raw = raw_measurements(noisy, sampling)
    result = run_multilevel(cfg.method, raw, sampling, L, stop, truth=truth,
                            bound_source=cfg.bound_source)
    report = RunReport(config=asdict(cfg), result=result, sampling=sampling, samples=noisy,
                       delta=delta, grid_size=L, truth=truth)
    raw_energy = float(np.sum(np.abs(raw) ** 2))
    levels = [t.level for t in result.traces]
    report.tails_used = {N: t.tail_estimate ** 2 for N, t in zip(levels, result.traces)}
    # ||x* - P_N x*||^2 estimated from the last iterate of level N
    report.estimated_tails = {N: max(raw_energy - t.final_norm_sq, 0.0)
                              for N, t in zip(levels, result.traces)}
    if truth is not None:
        nrm = truth.norm()
        report.normalized_error = (truth - result.x).norm() / nrm if nrm > 0 else None
        report.true_tails = {N: tail_energy(truth, N) for N in range(0, max(levels or [0]) + 2)}
    report.raw_energy = raw_energy
    report.elapsed = time.perf_counter() - t0
    return report


def fixed_level_error(cfg: ExperimentConfig, level: int, rho: Optional[float] = None) -> float:
    """Normalized error of a single-level solve at ``level`` on the same data."""
    truth_seed, sampling_seed, noise_seed = cfg.seeds
    L = cfg.grid_size
    truth = generate_truth(cfg.bandwidth, truth_seed, L)
    sampling = _load_sampling(cfg, sampling_seed)
    clean = eval_at(truth, max_level(L), sampling.points).real.astype(complex)
    noisy, delta = add_noise(clean, cfg.noise, noise_seed, sampling.weights)
    op = make_operator(level, sampling, L, cfg.bound_source)
    y = op.scale * raw_measurements(noisy, sampling)
    x, _ = run_fixed_level(cfg.method, op, y, rho=rho, cfg=cfg.stop_config(delta))
    return (truth - x).norm() / truth.norm()


def emit_report(report: RunReport, out_dir) -> list:
    """Write reconstruction.csv, trace.json and (with known truth) tails.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    L = report.grid_size
    t = grid_points(L)
    written = []

    recon = out / "reconstruction.csv"
    # nearest grid node of each sample, for plotting the sample markers
    marks = np.full(L, "", dtype=object)
    idx = np.rint(report.sampling.points * L).astype(int) % L
    for i, v in zip(idx, report.samples):
        marks[i] = repr(float(np.real(v)))
    with open(recon, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "truth", "reconstruction", "sample"])
        for l in range(L):
            tv = "" if report.truth is None else repr(float(report.truth.values[l].real))
            wr.writerow([repr(float(t[l])), tv, repr(float(report.result.x.values[l].real)), marks[l]])
    written.append(recon)

    trace = out / "trace.json"
    payload = {"summary": report.summary(), "result": report.result.to_dict(),
               "config": report.config}
    with open(trace, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    written.append(trace)

    if report.truth is not None:
        tails = out / "tails.csv"
        with open(tails, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["N", "true_tail_sq", "estimated_tail_sq", "tail_sq_used"])
            for N, est in sorted(report.estimated_tails.items()):
                wr.writerow([N, repr(float(report.true_tails.get(N, float("nan")))), repr(float(est)),
                             repr(float(report.tails_used[N]))])
        written.append(tails)
    return written


def _jsonable(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, os.PathLike):
        return os.fspath(obj)
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
