import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_poly
from mlmoment import (GridSignal, StopConfig, add_noise, build_sampling_set, cgne_step,
                      dense_least_squares, densify, eval_at, generate_jittered_set, generate_truth,
                      global_stop, landweber_step, level_stop, make_operator, project,
                      raw_measurements, run_fixed_level, run_level, run_multilevel, tail_energy,
                      tail_update)
from mlmoment.errors import ConfigError, ZeroDirectionError
from mlmoment.solvers import CgneState, increment_stop
from mlmoment.verify import random_instance


def cfg(**kw):
    return StopConfig(**kw)


class TestStopRules:
    def test_level_stop_arithmetic(self):
        c = cfg(eta=0.1, delta=0.05)
        assert not level_stop("lw_linear", 0.45, 1.0, c, 0.15)
        assert level_stop("lw_linear", 0.43, 1.0, c, 0.15)

    def test_level_stop_squared(self):
        c = cfg(eta=0.1, delta=0.05)
        # bound 0.44 * ||y|| = 0.44
        assert level_stop("cg_squared", 0.66, 1.0, c, 0.15)
        assert not level_stop("cg_squared", 0.67, 1.0, c, 0.15)

    def test_noiseless_level_stop_needs_zero_residual(self):
        c = cfg()
        assert not level_stop("lw_linear", 1e-14, 1.0, c, 0.0)
        assert level_stop("lw_linear", 0.0, 1.0, c, 0.0)
        assert level_stop("lw_linear", 1e-14, 1.0, c.with_(residual_floor=1e-12), 0.0, floor=1e-12)

    def test_global_stop_examples(self):
        c = cfg(eta=0.1, tau=1.5, delta=0.1)
        assert global_stop("lw_linear", 0.3, 1.0, c)
        assert not global_stop("lw_linear", 0.34, 1.0, c)
        assert global_stop("cg_squared", 0.5, 1.0, c)
        assert global_stop("cg_with_lw_stop", 0.3, 1.0, c)
        assert not global_stop("lw_linear", 1e-9, 1.0, c.with_(delta=0.0))

    def test_factor_two_dropped(self):
        c = cfg(eta=0.1, tau=1.5, delta=0.1, drop_factor_two=True)
        assert c.factor == pytest.approx(1.1)
        assert not global_stop("lw_linear", 0.3, 1.0, c)
        assert global_stop("lw_linear", 0.16, 1.0, c)

    def test_scale_multiplies_thresholds(self):
        c = cfg(eta=0.1, tau=1.5, delta=0.1)
        assert global_stop("lw_linear", 0.3 * 0.5, 0.5, c, scale=0.5)
        assert not global_stop("lw_linear", 0.3, 0.5, c, scale=0.5)

    def test_increment_stop(self):
        x = GridSignal(np.arange(4.0))
        c = cfg(eta=0.1, tau=1.5, delta=0.1)
        assert increment_stop(x, x, c)
        assert not increment_stop(x + GridSignal(np.full(4, 1e-9)), x, c.with_(delta=0.0))
        assert increment_stop(x + GridSignal(np.full(4, 0.3)), x, c)
        assert not increment_stop(x + GridSignal(np.full(4, 0.34)), x, c)

    def test_tail_update(self):
        assert tail_update(2.5, 0.0) == 2.5
        assert tail_update(2.5, 2.5) == 0.0
        assert tail_update(2.5, 3.0) == 0.0

    def test_config_validation(self):
        for bad in (dict(eta=0), dict(tau=1.0), dict(delta=-1), dict(flavor="x"),
                    dict(tail_source="x"), dict(tail_source="user_supplied"),
                    dict(max_level=-1), dict(max_iters_per_level=0), dict(residual_floor=-1)):
            with pytest.raises(ConfigError):
                cfg(**bad)

    def test_cg_rejects_increment_rule(self):
        s = generate_jittered_set(10, 0.3, seed=0)
        with pytest.raises(ConfigError):
            run_multilevel("cg", np.ones(10), s, 32, cfg(flavor="lw_increment"))


class TestSteps:
    def test_cgne_on_tight_minimal_set(self, rng):
        s = build_sampling_set(np.arange(7) / 7)
        op = make_operator(3, s, 32, bound_source="empirical")
        y = rng.standard_normal(7) + 0j
        st0 = CgneState(GridSignal.zeros(32), y, y)
        st1 = cgne_step(st0, op, y)
        assert np.linalg.norm(st1.r) < 1e-5 * np.linalg.norm(y)

    def test_cgne_matches_dense_in_2n_plus_1_steps(self, rng):
        s = generate_jittered_set(7, 0.5, seed=4)
        op = make_operator(2, s, 32)
        y = rng.standard_normal(7) + 1j * rng.standard_normal(7)
        state = CgneState(GridSignal.zeros(32), y, y)
        for _ in range(5):
            state = cgne_step(state, op, y)
            assert np.allclose(state.r, y - op.analyze(state.x), atol=1e-9)
        D = densify(op)
        best = np.linalg.norm(D @ dense_least_squares(D, y) - y)
        assert np.linalg.norm(state.r) == pytest.approx(best, abs=1e-8)

    def test_cgne_zero_data(self):
        s = generate_jittered_set(7, 0.5, seed=4)
        op = make_operator(2, s, 32)
        y = np.zeros(7, dtype=complex)
        with pytest.raises(ZeroDirectionError):
            cgne_step(CgneState(GridSignal.zeros(32), y, y), op, y)
        x, trace = run_level("cg", op, y, None, cfg(), 0.0)
        assert x.norm() == 0 and trace.residual_norms[-1] == 0

    def test_landweber_step(self, rng):
        s = generate_jittered_set(15, 0.5, seed=4)
        op = make_operator(3, s, 32)
        x = random_poly(rng, 3, 32)
        y = op.analyze(x)
        assert landweber_step(x, op, y).allclose(x, atol=1e-12)
        y2 = rng.standard_normal(15) + 0j
        assert landweber_step(GridSignal.zeros(32), op, y2).allclose(op.adjoint(y2), atol=1e-12)

    def test_landweber_converges_to_least_squares(self, rng):
        s = generate_jittered_set(12, 0.5, seed=9)
        op = make_operator(2, s, 32)
        y = rng.standard_normal(12) + 1j * rng.standard_normal(12)
        x, trace = run_fixed_level("lw", op, y, rho=0.0, max_iters=10000)
        a = dense_least_squares(densify(op), y)
        from mlmoment import synthesize
        assert (x - synthesize(a, 32)).norm() < 1e-6


class TestRunLevel:
    def setup_method(self):
        self.s = generate_jittered_set(30, 0.5, seed=11)
        self.op = make_operator(6, self.s, 64)

    def test_zero_iterations_when_already_satisfied(self, rng):
        y = self.op.analyze(random_poly(rng, 6, 64))
        x0 = random_poly(rng, 6, 64)
        x, trace = run_level("lw", self.op, y, x0, cfg(delta=1e6), 0.0)
        assert trace.iterations == 0 and x.allclose(x0)
        assert trace.stop_reason == "global_discrepancy"

    def test_min_iters_forces_a_step(self, rng):
        y = self.op.analyze(random_poly(rng, 6, 64))
        x, trace = run_level("lw", self.op, y, None, cfg(delta=0.0), 1e6, min_iters=1)
        assert trace.iterations == 1 and trace.stop_reason == "level_discrepancy"

    @pytest.mark.parametrize("method", ["cg", "lw"])
    def test_noiseless_consistent(self, rng, method):
        xt = random_poly(rng, 6, 64)
        y = self.op.analyze(xt)
        c = cfg(residual_floor=1e-11, max_iters_per_level=20000)
        x, trace = run_level(method, self.op, y, None, c, 0.0)
        assert trace.stop_reason == "global_discrepancy"
        assert trace.residual_norms[-1] <= 1e-11 * np.linalg.norm(y)
        assert (x - xt).norm() < 1e-8 * xt.norm()

    def test_iteration_cap(self, rng):
        y = self.op.analyze(random_poly(rng, 6, 64))
        x, trace = run_level("lw", self.op, y, None, cfg(max_iters_per_level=3), 0.0)
        assert trace.iterations == 3 and trace.stop_reason == "iter_cap"

    def test_iterates_stay_in_level_space(self, rng):
        y = rng.standard_normal(30) + 0j
        seen = []
        run_level("lw", self.op, y, random_signal_in(rng), cfg(max_iters_per_level=20), 0.0,
                  callback=lambda k, x, r: seen.append(x))
        assert all(project(x, 6).allclose(x, atol=1e-12 * max(1, x.norm())) for x in seen)


def random_signal_in(rng):
    return GridSignal(rng.standard_normal(64))


def _fixture(M=5, r=40, noise=0.01, seed=0, L=256):
    truth = generate_truth(M, seed, L)
    s = build_sampling_set(np.arange(r) / r)
    clean = eval_at(truth, (L - 1) // 2, s.points).real.astype(complex)
    noisy, delta = add_noise(clean, noise, seed + 10, s.weights)
    return truth, s, raw_measurements(noisy, s), delta


class TestMultilevel:
    def test_noiseless_constant_stays_at_level_zero(self):
        L = 64
        s = generate_jittered_set(20, 0.5, seed=1)
        raw = raw_measurements(np.full(20, 2.0 + 0j), s)
        truth = GridSignal(np.full(L, 2.0))
        base = cfg(residual_floor=1e-12, max_iters_per_level=5000)
        # one CGNE step solves the one-dimensional level exactly
        runs = [("cg", base), ("cg", base.with_(tail_source="known_truth")),
                ("lw", base.with_(tail_source="known_truth"))]
        for method, c in runs:
            res = run_multilevel(method, raw, s, L, c, truth=truth)
            assert res.level == 0 and res.termination == "global_discrepancy"
            assert np.allclose(res.x.values, 2.0, atol=1e-8)

    @pytest.mark.parametrize("method", ["cg", "lw"])
    def test_regression_fixture_one_percent_noise(self, method):
        # x* in X_5, 40 regular samples, 1% noise, recursive tails
        for seed in range(3):
            truth, s, raw, delta = _fixture(seed=seed)
            res = run_multilevel(method, raw, s, 256, cfg(delta=delta))
            assert res.termination == "global_discrepancy"
            assert res.level <= 7
            assert (truth - res.x).norm() / truth.norm() <= 0.1

    def test_initial_accept(self):
        truth, s, raw, delta = _fixture()
        res = run_multilevel("lw", raw, s, 256, cfg(delta=100 * delta))
        assert res.termination == "initial_accept" and res.x.norm() == 0

    def test_level_cap(self):
        truth, s, raw, delta = _fixture(noise=0.0)
        res = run_multilevel("lw", raw, s, 256, cfg(max_level=2))
        assert res.termination == "level_cap" and res.level == 2
        assert [t.level for t in res.traces] == [0, 1, 2]

    def test_known_truth_renumbers_start(self):
        truth, s, raw, delta = _fixture(M=8, noise=0.001)
        res = run_multilevel("lw", raw, s, 256, cfg(delta=delta, tail_source="known_truth"), truth=truth)
        first = res.traces[0].level
        assert first > 0
        # every skipped level satisfied its generalized discrepancy test at x = 0
        for N in range(first):
            op = make_operator(N, s, 256)
            y = op.scale * raw
            assert level_stop("lw_linear", np.linalg.norm(y), np.linalg.norm(y), cfg(delta=delta),
                              np.sqrt(tail_energy(truth, N)), op.scale)

    def test_user_supplied_tails(self):
        truth, s, raw, delta = _fixture(noise=0.01)
        tails = [np.sqrt(tail_energy(truth, N)) for N in range(10)]
        a = run_multilevel("lw", raw, s, 256, cfg(delta=delta, tail_source="user_supplied", tails=tails))
        b = run_multilevel("lw", raw, s, 256, cfg(delta=delta, tail_source="known_truth"), truth=truth)
        assert a.level == b.level and a.x.allclose(b.x)

    def test_recursive_tails_follow_iterate_energy(self):
        truth, s, raw, delta = _fixture(M=12, noise=0.02)
        res = run_multilevel("lw", raw, s, 256, cfg(delta=delta))
        energy = np.sum(np.abs(raw) ** 2)
        assert res.traces[0].tail_estimate == pytest.approx(np.sqrt(energy))
        for prev, nxt in zip(res.traces, res.traces[1:]):
            assert nxt.tail_estimate ** 2 == pytest.approx(max(energy - prev.final_norm_sq, 0.0), rel=1e-12)

    def test_every_level_makes_progress(self):
        truth, s, raw, delta = _fixture(M=12, noise=0.02)
        for method in ("cg", "lw"):
            res = run_multilevel(method, raw, s, 256, cfg(delta=delta))
            assert all(t.iterations >= 1 for t in res.traces)
            assert [t.level for t in res.traces] == list(range(res.traces[0].level, res.level + 1))

    def test_deterministic(self):
        truth, s, raw, delta = _fixture(M=12, noise=0.05)
        a = run_multilevel("cg", raw, s, 256, cfg(delta=delta))
        b = run_multilevel("cg", raw, s, 256, cfg(delta=delta))
        assert a.x == b.x
        da, db = a.to_dict(), b.to_dict()
        for lv in da["levels"] + db["levels"]:
            lv.pop("elapsed")
        assert da == db

    def test_increment_flavor_runs(self):
        truth, s, raw, delta = _fixture(M=8, noise=0.05)
        res = run_multilevel("lw", raw, s, 256, cfg(delta=delta, flavor="lw_increment"))
        assert res.termination == "global_discrepancy"
        for t in res.traces:
            # the increment never exceeds the residual since ||T|| <= 1
            assert all(i <= r + 1e-12 for i, r in zip(t.increment_norms, t.residual_norms))


def test_fixed_level_rho_one_stops_immediately(rng):
    s = generate_jittered_set(20, 0.5, seed=1)
    op = make_operator(4, s, 64)
    x, trace = run_fixed_level("cg", op, rng.standard_normal(20) + 0j, rho=1.0)
    assert trace.iterations == 0 and x.norm() == 0


@given(st.integers(0, 2**32 - 1))
def test_cgne_reaches_least_squares(seed):
    rng = np.random.default_rng(seed)
    N, s, L = random_instance(rng)
    op = make_operator(N, s, L)
    D = densify(op)
    a = rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1)
    y = D @ a
    x, trace = run_fixed_level("cg", op, y, rho=1e-14, max_iters=2 * N + 1)
    best = np.linalg.norm(D @ dense_least_squares(D, y) - y)
    assert trace.residual_norms[-1] - best <= 1e-7 * np.linalg.norm(y)
