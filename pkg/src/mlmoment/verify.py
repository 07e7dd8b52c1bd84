"""Oracle-backed self checks on small random instances (``mlmoment verify``)."""

from __future__ import annotations

import numpy as np

from .operators import empirical_frame_bounds, make_operator
from .oracle import dense_frame_bounds, dense_least_squares, densify
from .sampling import generate_jittered_set, theoretical_frame_bounds
from .solvers import run_fixed_level
from .spaces import GridSignal, Spectrum, synthesize

__all__ = ["random_instance", "run_checks"]


def random_instance(rng: np.random.Generator, max_level: int = 8, max_samples: int = 40,
                    grid_sizes=(32, 64, 128)):
    """Random (N, jittered sampling set, L) with 2N + 1 < r <= max_samples."""
    L = int(rng.choice(grid_sizes))
    N = int(rng.integers(0, min(max_level, (L - 1) // 2, (max_samples - 2) // 2) + 1))
    r = int(rng.integers(2 * N + 2, max_samples + 1))
    rho = float(rng.uniform(0.0, 0.9))
    return N, generate_jittered_set(r, rho, seed=int(rng.integers(2**31))), L


def _random_signal(rng, L):
    return GridSignal(rng.standard_normal(L) + 1j * rng.standard_normal(L))


def run_checks(configs: int = 50, seed: int = 0):
    """Return a list of ``(name, passed, detail)``."""
    rng = np.random.default_rng(seed)
    adj = mat = bnd = bracket = lsq = norm = 0.0
    bracket_ok = True
    for _ in range(configs):
        N, s, L = random_instance(rng)
        op = make_operator(N, s, L)
        x = _random_signal(rng, L)
        c = rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size)
        lhs = np.vdot(c, op.analyze(x))
        rhs = op.adjoint(c).inner(x)
        adj = max(adj, abs(lhs - np.conj(rhs)) / (x.norm() * np.linalg.norm(c)))

        D = densify(op)
        a = rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1)
        ref = D @ a
        mat = max(mat, np.linalg.norm(op.analyze(synthesize(Spectrum(a), L)) - ref) / np.linalg.norm(ref))

        dense = dense_frame_bounds(D)
        emp = empirical_frame_bounds(op)
        bnd = max(bnd, abs(emp.lower - dense.lower) / dense.upper, abs(emp.upper - dense.upper) / dense.upper)
        norm = max(norm, op.scale ** 2 * dense.upper - 1.0)
        if (2 * N + 1) * s.max_gap < 1:
            th = theoretical_frame_bounds(s, N)
            bracket_ok &= th.lower <= dense.lower * (1 + 1e-12) and dense.upper <= th.upper * (1 + 1e-12)

        y = D @ a
        x_cg, trace = run_fixed_level("cg", op, y, rho=1e-12, max_iters=2 * N + 1)
        a_ls = dense_least_squares(D, y)
        r_ls = np.linalg.norm(D @ a_ls - y)
        lsq = max(lsq, (np.linalg.norm(op.analyze(x_cg) - y) - r_ls) / np.linalg.norm(y))

    return [
        ("adjointness", adj <= 1e-10, f"max relative defect {adj:.2e}"),
        ("dense matvec", mat <= 1e-10, f"max relative difference {mat:.2e}"),
        ("eigenvalue bounds", bnd <= 1e-5, f"max relative difference to dense {bnd:.2e}"),
        ("theoretical bracket", bracket_ok, "theoretical bounds contain dense bounds"),
        ("scaled norm", norm <= 1e-8, f"max ||T||^2 - 1 = {norm:.2e}"),
        ("cgne vs dense", lsq <= 1e-7, f"max excess residual after 2N+1 steps {lsq:.2e}"),
    ]
