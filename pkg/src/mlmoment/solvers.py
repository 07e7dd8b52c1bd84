"""CGNE and Landweber-Richardson iterations and the multi-level drivers.

The drivers walk up the nested levels X_0 c X_1 c ... . At level N they
iterate with the scaled operator T_N until the generalized discrepancy
principle

    ||T_N x - y_N|| <= 2 (1 + eta) (delta + eps_N)            (lw_linear)
    ||T_N x - y_N||^2 <= 2 (1 + eta) (delta + eps_N) ||y_N||    (cg_squared)

fires, where eps_N estimates the tail ||x* - P_N x*||, and they terminate
for good once the residual drops to 2 (1 + eta) tau delta (or its squared
counterpart).

Raw measurements are kept once as ``raw_j = sqrt(w_j) x^delta(t_j)``. Level N
sees ``y_N = s_N * raw``; delta and eps_N are multiplied by the same s_N, so
every test is equivalent to the unscaled one and the thresholds agree
across levels.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, ZeroDirectionError
from .operators import MomentOperator, coef_norm, make_operator
from .sampling import SamplingSet
from .spaces import GridSignal, project, tail_energy

__all__ = [
    "CgneState",
    "LevelTrace",
    "MultiLevelResult",
    "StopConfig",
    "cgne_step",
    "global_stop",
    "increment_stop",
    "landweber_step",
    "level_stop",
    "raw_measurements",
    "run_fixed_level",
    "run_level",
    "run_multilevel",
    "tail_update",
]

log = logging.getLogger(__name__)

FLAVORS = ("cg_squared", "lw_linear", "lw_increment", "cg_with_lw_stop")
TAIL_SOURCES = ("recursive", "known_truth", "user_supplied")
METHODS = ("cg", "lw")
DEFAULT_FLAVOR = {"cg": "cg_squared", "lw": "lw_linear"}


@dataclass(frozen=True)
class StopConfig:
    """Parameters of the stopping rules.

    ``tails`` holds eps_N (not squared) per level for the ``user_supplied``
    source; the last entry is reused beyond its end. ``residual_floor`` is
    a relative floor: a residual at or below ``residual_floor * ||y_N||``
    counts as zero, so that noiseless runs can terminate in floating point.
    """

    eta: float = 0.1
    tau: float = 1.5
    delta: float = 0.0
    flavor: str = "lw_linear"
    tail_source: str = "recursive"
    tails: Optional[Sequence[float]] = None
    drop_factor_two: bool = False
    max_level: Optional[int] = None
    max_iters_per_level: Optional[int] = None
    residual_floor: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError(f"eta must be > 0, got {self.eta}")
        if not self.tau > 1:
            raise ConfigError(f"tau must be > 1, got {self.tau}")
        if not self.delta >= 0:
            raise ConfigError(f"delta must be >= 0, got {self.delta}")
        if self.flavor not in FLAVORS:
            raise ConfigError(f"unknown stop flavor {self.flavor!r}")
        if self.tail_source not in TAIL_SOURCES:
            raise ConfigError(f"unknown tail source {self.tail_source!r}")
        if self.tail_source == "user_supplied" and not self.tails:
            raise ConfigError("tail_source='user_supplied' needs a tails sequence")
        if self.max_level is not None and self.max_level < 0:
            raise ConfigError("max_level must be non-negative")
        if self.max_iters_per_level is not None and self.max_iters_per_level < 1:
            raise ConfigError("max_iters_per_level must be positive")
        if self.residual_floor < 0:
            raise ConfigError("residual_floor must be non-negative")

    @property
    def factor(self) -> float:
        return (1.0 if self.drop_factor_two else 2.0) * (1.0 + self.eta)

    def with_(self, **changes) -> "StopConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class CgneState:
    x: GridSignal
    r: np.ndarray
    w: np.ndarray
    k: int = 0
    # ||T^* r_k||^2, carried over so each step needs one fresh adjoint of r
    grad_norm2: Optional[float] = None


@dataclass
class LevelTrace:
    level: int
    iterations: int
    residual_norms: list
    tail_estimate: float
    stop_reason: str
    scale: float = 1.0
    increment_norms: list = field(default_factory=list)
    elapsed: float = 0.0
    final_norm_sq: float = 0.0

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "iterations": self.iterations,
            "residual_norms": [float(v) for v in self.residual_norms],
            "increment_norms": [float(v) for v in self.increment_norms],
            "tail_estimate": float(self.tail_estimate),
            "stop_reason": self.stop_reason,
            "scale": float(self.scale),
            "elapsed": float(self.elapsed),
            "final_norm_sq": float(self.final_norm_sq),
        }


@dataclass
class MultiLevelResult:
    x: GridSignal
    level: int
    iteration: int
    traces: list
    termination: str
    clamped_tails: list = field(default_factory=list)

    @property
    def total_iterations(self) -> int:
        return sum(t.iterations for t in self.traces)

    @property
    def tail_estimates(self) -> dict:
        return {t.level: t.tail_estimate for t in self.traces}

    def to_dict(self) -> dict:
        return {
            "final_level": self.level,
            "final_iteration": self.iteration,
            "total_iterations": self.total_iterations,
            "termination": self.termination,
            "clamped_tails": list(self.clamped_tails),
            "levels": [t.to_dict() for t in self.traces],
        }


def raw_measurements(values, sampling: SamplingSet) -> np.ndarray:
    """sqrt(w_j) * x(t_j): the unscaled data sequence shared by all levels."""
    values = np.asarray(values, dtype=complex)
    return np.sqrt(sampling.weights) * values


def cgne_step(state: CgneState, op: MomentOperator, y) -> CgneState:
    """One CGNE update (conjugate gradients on T^* T x = T^* y)."""
    g2 = state.grad_norm2
    if g2 is None:
        g2 = op.adjoint(state.r).norm() ** 2
    d = op.adjoint(state.w)
    Td = op.analyze(d)
    td2 = coef_norm(Td) ** 2
    if td2 == 0.0:
        raise ZeroDirectionError("||T d_k|| = 0")
    alpha = g2 / td2
    x = state.x + alpha * d
    r = state.r - alpha * Td
    g2_next = op.adjoint(r).norm() ** 2
    beta = g2_next / g2
    w = r + beta * state.w
    return CgneState(x, r, w, state.k + 1, g2_next)


def landweber_step(x: GridSignal, op: MomentOperator, y) -> GridSignal:
    return x - op.adjoint(op.analyze(x) - np.asarray(y))


def level_stop(flavor: str, residual_norm: float, y_norm: float, cfg: StopConfig,
               eps: float, scale: float = 1.0, floor: float = 0.0) -> bool:
    """Generalized discrepancy test at a fixed level (True means stop)."""
    if residual_norm <= floor:
        return True
    bound = cfg.factor * scale * (cfg.delta + eps)
    if flavor == "cg_squared":
        return residual_norm ** 2 <= bound * y_norm
    return residual_norm <= bound


def global_stop(flavor: str, residual_norm: float, y_norm: float, cfg: StopConfig,
                scale: float = 1.0, floor: float = 0.0) -> bool:
    """Final discrepancy test that ends the multi-level run."""
    if residual_norm <= floor:
        return True
    bound = cfg.factor * cfg.tau * scale * cfg.delta
    if flavor == "cg_squared":
        return residual_norm ** 2 <= bound * y_norm
    return residual_norm <= bound


def increment_stop(x_next: GridSignal, x_curr: GridSignal, cfg: StopConfig,
                   scale: float = 1.0, floor: float = 0.0) -> bool:
    return _increment_small((x_next - x_curr).norm(), cfg, scale, floor)


def _increment_small(increment: float, cfg: StopConfig, scale: float, floor: float) -> bool:
    if increment <= floor:
        return True
    return increment <= cfg.factor * cfg.tau * scale * cfg.delta


def tail_update(raw_energy: float, approx_norm2: float) -> float:
    """Squared tail estimate sum_j w_j |x^delta(t_j)|^2 - ||x_N||^2, clamped at 0."""
    est = raw_energy - approx_norm2
    if est < 0.0:
        log.info("tail estimate clamped at zero (raw energy %.6g < iterate energy %.6g)",
                 raw_energy, approx_norm2)
        return 0.0
    return est


def _resolve_flavor(method: str, flavor: Optional[str]) -> str:
    if method not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {method!r}")
    flavor = flavor or DEFAULT_FLAVOR[method]
    if method == "cg" and flavor == "lw_increment":
        raise ConfigError("the increment rule is defined for the Landweber iteration only")
    return flavor


def run_level(method: str, op: MomentOperator, y, x_init: Optional[GridSignal],
              cfg: StopConfig, eps: float, *, min_iters: int = 0,
              callback: Optional[Callable] = None):
    """Iterate at one level until a stopping rule fires.

    The stopping rules are evaluated at every iterate x_k, k >= min_iters.
    ``callback(k, x_k, residual_k)`` is invoked for every new iterate.
    Returns ``(x_out, LevelTrace)``.
    """
    flavor = _resolve_flavor(method, cfg.flavor)
    N = op.level
    y = np.asarray(y, dtype=complex)
    y_norm = coef_norm(y)
    floor = cfg.residual_floor * y_norm
    s = op.scale
    cap = cfg.max_iters_per_level or 50 * (2 * N + 1)
    t0 = time.perf_counter()

    x = project(x_init, N) if x_init is not None else GridSignal.zeros(op.grid_size)
    r = y - op.analyze(x)
    grad = op.adjoint(r)
    residuals = [coef_norm(r)]
    increments = [grad.norm()]
    state = CgneState(x, r, r, 0, increments[0] ** 2) if method == "cg" else None
    k = 0
    while True:
        rn = residuals[-1]
        if k >= min_iters:
            if global_stop(flavor, rn, y_norm, cfg, s, floor):
                reason = "global_discrepancy"
                break
            if flavor == "lw_increment":
                done = _increment_small(increments[-1], cfg, s, floor)
            else:
                done = level_stop(flavor, rn, y_norm, cfg, eps, s, floor)
            if done:
                reason = "level_discrepancy"
                break
        if k >= cap:
            reason = "iter_cap"
            break
        if increments[-1] == 0.0:
            reason = "stationary"
            break
        if method == "cg":
            try:
                state = cgne_step(state, op, y)
            except ZeroDirectionError:
                reason = "stationary"
                break
            x, r = state.x, state.r
            increments.append(np.sqrt(state.grad_norm2))
        else:
            x = x + grad
            r = y - op.analyze(x)
            grad = op.adjoint(r)
            increments.append(grad.norm())
        k += 1
        residuals.append(coef_norm(r))
        if callback is not None:
            callback(k, x, r)

    if reason == "iter_cap":
        log.info("level %d hit the iteration cap (%d) with residual %.4g", N, cap, residuals[-1])
    trace = LevelTrace(N, k, residuals, float(eps), reason, s, increments,
                       time.perf_counter() - t0, x.norm() ** 2)
    return x, trace


def run_fixed_level(method: str, op: MomentOperator, y, rho: Optional[float] = None,
                    cfg: Optional[StopConfig] = None, max_iters: Optional[int] = None):
    """Plain single-level solve, stopped by ||r_k|| <= rho ||y|| or by the
    final discrepancy rule of ``cfg`` when ``rho`` is None."""
    if rho is None and cfg is None:
        raise ConfigError("run_fixed_level needs either rho or a StopConfig")
    y = np.asarray(y, dtype=complex)
    y_norm = coef_norm(y)
    flavor = _resolve_flavor(method, cfg.flavor if cfg is not None else None)
    if flavor == "lw_increment":
        flavor = "lw_linear"
    cap = max_iters or (cfg.max_iters_per_level if cfg is not None else None) or 50 * (2 * op.level + 1)
    t0 = time.perf_counter()

    def stop(rn):
        if rho is not None:
            return rn <= rho * y_norm
        return global_stop(flavor, rn, y_norm, cfg, op.scale, cfg.residual_floor * y_norm)

    x = GridSignal.zeros(op.grid_size)
    r = y.copy()
    residuals = [coef_norm(r)]
    state = CgneState(x, r, r, 0)
    k = 0
    reason = "iter_cap"
    while k < cap:
        if stop(residuals[-1]):
            reason = "global_discrepancy"
            break
        if method == "cg":
            try:
                state = cgne_step(state, op, y)
            except ZeroDirectionError:
                reason = "stationary"
                break
            x, r = state.x, state.r
        else:
            x = landweber_step(x, op, y)
            r = y - op.analyze(x)
        k += 1
        residuals.append(coef_norm(r))
    else:
        if stop(residuals[-1]):
            reason = "global_discrepancy"
    return x, LevelTrace(op.level, k, residuals, 0.0, reason, op.scale, [],
                         time.perf_counter() - t0)


class _LevelOperators:
    """Lazily built operators T_N for one sampling set, cached by level."""

    def __init__(self, sampling: SamplingSet, L: int, bound_source: str):
        self.sampling = sampling
        self.L = L
        self.bound_source = bound_source
        self._ops = {}

    def __getitem__(self, N: int) -> MomentOperator:
        if N not in self._ops:
            self._ops[N] = make_operator(N, self.sampling, self.L, self.bound_source)
        return self._ops[N]


def default_max_level(sampling: SamplingSet, L: int) -> int:
    return min((sampling.size - 1) // 2, (L - 1) // 2)


def run_multilevel(method: str, raw_data, sampling: SamplingSet, L: int, cfg: StopConfig, *,
                   truth: Optional[GridSignal] = None, bound_source: str = "theoretical",
                   callback: Optional[Callable] = None) -> MultiLevelResult:
    """Multi-level CGNE (``method="cg"``) or Landweber (``method="lw"``) solve.

    ``raw_data`` are the unscaled measurements sqrt(w_j) x^delta(t_j). With
    ``tail_source="known_truth"`` the tails ||x* - P_N x*|| are computed from
    ``truth``. ``callback(N, k, x, r)`` sees every iterate.
    """
    flavor = _resolve_flavor(method, cfg.flavor)
    cfg = cfg.with_(flavor=flavor)
    raw = np.asarray(raw_data, dtype=complex)
    if raw.shape != (sampling.size,):
        raise ConfigError(f"expected {sampling.size} measurements, got {raw.shape}")
    if cfg.tail_source == "known_truth" and truth is None:
        raise ConfigError("tail_source='known_truth' needs the true signal")

    ops = _LevelOperators(sampling, L, bound_source)
    top = default_max_level(sampling, L) if cfg.max_level is None else min(cfg.max_level, (L - 1) // 2)
    raw_energy = coef_norm(raw) ** 2
    eps2_recursive = raw_energy
    clamped = []

    def tail(N):
        if cfg.tail_source == "known_truth":
            return np.sqrt(tail_energy(truth, N))
        if cfg.tail_source == "user_supplied":
            seq = list(cfg.tails)
            return float(seq[min(N, len(seq) - 1)])
        return np.sqrt(eps2_recursive)

    def residual_at(N, x):
        op = ops[N]
        y = op.scale * raw
        return coef_norm(y - op.analyze(x)), coef_norm(y), op.scale, coef_norm(y) * cfg.residual_floor

    x = GridSignal.zeros(L)
    rn, yn, s, floor = residual_at(0, x)
    if global_stop(flavor, rn, yn, cfg, s, floor):
        return MultiLevelResult(x, 0, 0, [], "initial_accept")

    start = 0
    if cfg.tail_source != "recursive" and flavor != "lw_increment":
        # renumber: first level whose generalized discrepancy test fails at x = 0
        while start < top:
            rn, yn, s, floor = residual_at(start, x)
            if not level_stop(flavor, rn, yn, cfg, tail(start), s, floor):
                break
            start += 1

    traces = []
    N = start
    while True:
        op = ops[N]
        level_cb = None if callback is None else (lambda k, xk, rk, _N=N: callback(_N, k, xk, rk))
        x, trace = run_level(method, op, op.scale * raw, x, cfg, tail(N), min_iters=1,
                             callback=level_cb)
        traces.append(trace)
        if trace.stop_reason == "global_discrepancy":
            termination = "global_discrepancy"
            break
        if N >= top:
            termination = "level_cap"
            break
        rn, yn, s, floor = residual_at(N + 1, x)
        if global_stop(flavor, rn, yn, cfg, s, floor):
            termination = "global_discrepancy"
            break
        if cfg.tail_source == "recursive":
            eps2_recursive = tail_update(raw_energy, x.norm() ** 2)
            if eps2_recursive == 0.0:
                clamped.append(N + 1)
        N += 1

    return MultiLevelResult(x, N, traces[-1].iterations, traces, termination, clamped)
