import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mlmoment import (Spectrum, build_sampling_set, dense_frame_bounds, dense_least_squares,
                      densify, empirical_frame_bounds, make_operator, run_fixed_level, synthesize,
                      theoretical_frame_bounds)
from mlmoment.errors import SingularNormalMatrixError
from mlmoment.verify import random_instance, run_checks

instances = st.integers(0, 2**32 - 1).map(lambda seed: random_instance(np.random.default_rng(seed)))


@given(instances, st.integers(0, 2**32 - 1))
def test_dense_matches_operator(inst, seed):
    N, s, L = inst
    op = make_operator(N, s, L)
    D = densify(op)
    assert D.matrix.shape == (s.size, 2 * N + 1)
    a = np.random.default_rng(seed).standard_normal(2 * N + 1) + 0j
    assert np.allclose(D @ Spectrum(a), op.analyze(synthesize(Spectrum(a), L)), atol=1e-10)


def test_tight_regular_dense_bounds():
    s = build_sampling_set(np.arange(7) / 7)
    fb = dense_frame_bounds(densify(make_operator(3, s, 32)))
    assert fb.lower == pytest.approx(fb.upper) and fb.lower == pytest.approx(1.0)


@given(instances)
def test_bounds_agree(inst):
    N, s, L = inst
    op = make_operator(N, s, L)
    d = dense_frame_bounds(densify(op))
    e = empirical_frame_bounds(op)
    assert e.lower == pytest.approx(d.lower, rel=1e-5, abs=1e-5 * d.upper)
    assert e.upper == pytest.approx(d.upper, rel=1e-5)
    if (2 * N + 1) * s.max_gap < 1:
        th = theoretical_frame_bounds(s, N)
        assert th.lower <= d.lower * (1 + 1e-12) and d.upper <= th.upper * (1 + 1e-12)


@given(instances, st.integers(0, 2**32 - 1))
def test_least_squares_is_optimal(inst, seed):
    N, s, L = inst
    op = make_operator(N, s, L)
    D = densify(op)
    rng = np.random.default_rng(seed)
    y = rng.standard_normal(s.size) + 1j * rng.standard_normal(s.size)
    a = dense_least_squares(D, y)
    best = np.linalg.norm(D @ a - y)
    x, trace = run_fixed_level("cg", op, y, rho=0.3)
    for k in range(len(trace.residual_norms)):
        assert best <= trace.residual_norms[k] + 1e-12


def test_singular_normal_matrix():
    s = build_sampling_set([0.0, 0.5])
    with pytest.raises(SingularNormalMatrixError):
        dense_least_squares(densify(make_operator(3, s, 32)), np.ones(2))


def test_verify_checks_pass():
    for name, ok, detail in run_checks(configs=20, seed=3):
        assert ok, f"{name}: {detail}"
