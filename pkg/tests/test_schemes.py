"""Scheme steps, path simulation, the exact transition, and grid coupling."""

import math
from dataclasses import replace

import numpy as np
import pytest
import scipy.stats as st

from cirbench import kernels
from cirbench.model import CirParams, conditional_moments, feller_ratio, make_grid
from cirbench.rng import BROWNIAN, EXACT_TRANSITION, Stream, StreamKey
from cirbench.schemes import (
    SchemeKind,
    baseline_step,
    coupled_terminals_from_increments,
    exact_step,
    fte_step,
    interpolate_fte,
    pairwise_coarsen,
    simulate_coupled,
    simulate_path,
)

GENTLE = CirParams(v0=0.04, k=2.0, theta=0.02, xi=0.8, T=1.0)


class TestSteps:
    def test_fte_step_positive_state(self):
        # 0.04 + 2*(0.02-0.04)*0.25 + 0.8*sqrt(0.04)*0.1
        got = fte_step(0.04, 0.1, 0.25, GENTLE)
        assert got == pytest.approx(0.046, rel=1e-12)

    def test_fte_step_negative_state_keeps_only_constant_drift(self):
        # truncation removes the state from drift and diffusion entirely
        got = fte_step(-0.01, 0.0, 0.01, GENTLE)
        assert got == pytest.approx(-0.0096, rel=1e-12)
        noisy = fte_step(-0.01, 123.0, 0.01, GENTLE)
        assert noisy == got  # diffusion coefficient is exactly zero

    def test_interpolation_between_nodes(self):
        got = interpolate_fte(0.04, 0.05, 0.125, GENTLE)
        assert got == pytest.approx(0.043, rel=1e-12)
        assert interpolate_fte(0.04, 0.0, 0.0, GENTLE) == 0.04
        with pytest.raises(ValueError):
            interpolate_fte(0.04, 0.0, -0.01, GENTLE)

    def test_interpolation_at_full_step_reproduces_step(self):
        for v, dw in [(0.04, 0.1), (-0.01, 0.3), (0.0, -0.2), (1e-12, 0.05)]:
            assert interpolate_fte(v, dw, 0.25, GENTLE) == fte_step(v, dw, 0.25, GENTLE)

    def test_partial_truncation_keeps_signed_drift(self):
        got = baseline_step(SchemeKind.PARTIAL_TRUNCATION, -0.01, 0.0, 0.01, GENTLE)
        assert got == pytest.approx(-0.0094, rel=1e-12)
        # the diffusion is still truncated: no nan from sqrt of a negative
        assert math.isfinite(baseline_step(SchemeKind.PARTIAL_TRUNCATION, -0.01, 0.5, 0.01, GENTLE))

    def test_reflection_steps_from_absolute_value(self):
        got = baseline_step(SchemeKind.REFLECTION, -0.04, 0.1, 0.25, GENTLE)
        assert got == fte_step(0.04, 0.1, 0.25, GENTLE)

    def test_baseline_step_rejects_non_baseline_kinds(self):
        with pytest.raises(ValueError):
            baseline_step(SchemeKind.FULL_TRUNCATION, 0.02, 0.0, 0.01, GENTLE)
        with pytest.raises(ValueError):
            baseline_step(SchemeKind.EXACT, 0.02, 0.0, 0.01, GENTLE)

    def test_weak_consistency_of_the_drift(self):
        # E[one step - v] = k*(theta - v)*dt for v > 0
        v, dt = 0.03, 0.01
        dw = Stream(StreamKey(21, 0)).normals(200_000) * math.sqrt(dt)
        stepped = v + GENTLE.k * (GENTLE.theta - v) * dt + GENTLE.xi * math.sqrt(v) * dw
        drift = np.mean(stepped) - v
        se = GENTLE.xi * math.sqrt(v * dt / 200_000)
        assert drift == pytest.approx(GENTLE.k * (GENTLE.theta - v) * dt, abs=4 * se)


class TestExactTransition:
    def test_scalar_and_array_shapes(self):
        stream = Stream(StreamKey(3, 0, EXACT_TRANSITION))
        out = exact_step(0.02, 0.5, GENTLE, stream)
        assert isinstance(out, float) and out >= 0.0
        arr = exact_step(np.full(5, 0.02), 0.5, GENTLE, stream)
        assert arr.shape == (5,)
        sized = exact_step(0.02, 0.5, GENTLE, stream, size=7)
        assert sized.shape == (7,)

    def test_validation(self):
        stream = Stream(StreamKey(3, 1, EXACT_TRANSITION))
        with pytest.raises(ValueError):
            exact_step(-0.01, 0.5, GENTLE, stream)
        with pytest.raises(ValueError):
            exact_step(0.02, 0.0, GENTLE, stream)

    def test_conditional_moments_match_closed_form(self):
        params = CirParams(v0=0.02, k=64.0, theta=0.02, xi=0.8, T=1.0)
        v, delta, n = 0.03, 0.25, 200_000
        draws = exact_step(np.full(n, v), delta, params, Stream(StreamKey(19, 0, EXACT_TRANSITION)))
        mean, var = conditional_moments(params, v, delta)
        se_mean = draws.std(ddof=1) / math.sqrt(n)
        assert draws.mean() == pytest.approx(mean, abs=4 * se_mean)
        centered = draws - draws.mean()
        se_var = math.sqrt((np.mean(centered**4) - var**2) / n)
        assert draws.var(ddof=1) == pytest.approx(var, abs=4 * se_var)

    def test_distribution_is_scaled_noncentral_chi2(self):
        params = GENTLE  # Feller ratio 1/8, the awkward low-dof regime
        v, delta, n = 0.02, 0.5, 100_000
        draws = exact_step(np.full(n, v), delta, params, Stream(StreamKey(23, 0, EXACT_TRANSITION)))
        e = math.exp(-params.k * delta)
        c = 2.0 * params.k / (params.xi**2 * (1.0 - e))
        d = 2.0 * feller_ratio(params)
        lam = 2.0 * c * v * e
        ks = st.kstest(draws * 2.0 * c, st.ncx2(d, lam).cdf)
        assert ks.pvalue > 1e-3


class TestSimulatePath:
    def test_fte_path_matches_kernel_row(self):
        grid = make_grid(1.0, 64)
        key = StreamKey(42, 7)
        result = simulate_path(SchemeKind.FULL_TRUNCATION, GENTLE, grid, key)
        dw = (Stream(replace(key, substream=BROWNIAN)).normals(64) * math.sqrt(grid.dt)).reshape(1, -1)
        traj = kernels.fte_trajectory(GENTLE.v0, GENTLE.k, GENTLE.theta, GENTLE.xi, grid.dt, dw)[0]
        assert np.array_equal(result.tilde, traj)
        assert np.array_equal(result.bar, np.maximum(result.tilde, 0.0))
        assert np.array_equal(result.negative, result.tilde <= 0.0)
        assert np.array_equal(result.nodes, grid.nodes)

    def test_substream_field_of_the_key_is_ignored(self):
        grid = make_grid(1.0, 16)
        a = simulate_path(SchemeKind.FULL_TRUNCATION, GENTLE, grid, StreamKey(5, 2, 0))
        b = simulate_path(SchemeKind.FULL_TRUNCATION, GENTLE, grid, StreamKey(5, 2, 1))
        assert np.array_equal(a.tilde, b.tilde)

    def test_stubbed_increments_reproduce_hand_computation(self):
        grid = make_grid(0.5, 2)
        dw = np.array([0.1, -0.3])
        result = simulate_path(SchemeKind.FULL_TRUNCATION, GENTLE, grid, StreamKey(0, 0), increments=dw)
        v1 = fte_step(GENTLE.v0, 0.1, 0.25, GENTLE)
        v2 = fte_step(v1, -0.3, 0.25, GENTLE)
        assert result.tilde == pytest.approx([GENTLE.v0, v1, v2], rel=1e-15)
        with pytest.raises(ValueError):
            simulate_path(SchemeKind.FULL_TRUNCATION, GENTLE, grid, StreamKey(0, 0), increments=np.zeros(3))

    def test_node_interpolation_consistency(self):
        grid = make_grid(1.0, 8)
        dw = Stream(StreamKey(31, 0)).normals(8) * math.sqrt(grid.dt)
        result = simulate_path(SchemeKind.FULL_TRUNCATION, GENTLE, grid, StreamKey(0, 0), increments=dw)
        for n in range(8):
            stepped = interpolate_fte(float(result.tilde[n]), float(dw[n]), grid.dt, GENTLE)
            assert stepped == result.tilde[n + 1]

    def test_reflection_reads_absolute_value(self):
        grid = make_grid(1.0, 256)
        result = simulate_path(SchemeKind.REFLECTION, GENTLE, grid, StreamKey(11, 4))
        assert np.array_equal(result.bar, np.abs(result.tilde))
        assert np.all(result.bar >= 0.0)

    def test_partial_truncation_bar_is_positive_part(self):
        grid = make_grid(1.0, 256)
        result = simulate_path(SchemeKind.PARTIAL_TRUNCATION, GENTLE, grid, StreamKey(11, 5))
        assert np.array_equal(result.bar, np.maximum(result.tilde, 0.0))

    def test_exact_path_is_strictly_positive_and_rejects_increments(self):
        params = CirParams(v0=0.02, k=8.0, theta=0.25, xi=1.0, T=1.0)  # ratio 4
        grid = make_grid(1.0, 32)
        result = simulate_path(SchemeKind.EXACT, params, grid, StreamKey(11, 6))
        assert np.all(result.tilde > 0.0)
        assert np.array_equal(result.bar, result.tilde)
        assert not result.negative.any()
        with pytest.raises(ValueError):
            simulate_path(SchemeKind.EXACT, params, grid, StreamKey(11, 6), increments=np.zeros(32))

    def test_path_states_accessors(self):
        grid = make_grid(1.0, 4)
        result = simulate_path(SchemeKind.FULL_TRUNCATION, GENTLE, grid, StreamKey(1, 1))
        states = result.states()
        assert len(states) == 5
        assert states[0].tilde_v == GENTLE.v0
        assert states[3] == result.state(3)
        assert states[2].t == pytest.approx(0.5)


class TestCoupling:
    def test_pairwise_coarsen_is_exact_adjacent_sum(self):
        w = Stream(StreamKey(2, 0)).normals(64).reshape(4, 16)
        coarse = pairwise_coarsen(w)
        assert coarse.shape == (4, 8)
        for i in range(4):
            for n in range(8):
                assert coarse[i, n] == w[i, 2 * n] + w[i, 2 * n + 1]
        with pytest.raises(ValueError):
            pairwise_coarsen(w[:, :15])
        with pytest.raises(ValueError):
            pairwise_coarsen(w[0])

    def test_refinement_factor_validation(self):
        w = np.zeros((2, 32))
        for bad in (0, 1, 3, 12):
            with pytest.raises(ValueError):
                coupled_terminals_from_increments(GENTLE, 8, bad, w)
        with pytest.raises(ValueError):
            coupled_terminals_from_increments(GENTLE, 8, 2, np.zeros((2, 18)))

    def test_telescoping_matches_manual_coarsening(self):
        n_coarse, refine = 16, 8
        w = np.asarray(
            [Stream(StreamKey(41, i)).normals(n_coarse * refine) for i in range(6)]
        ) * math.sqrt(GENTLE.T / (n_coarse * refine))
        coarse, fine, reference = coupled_terminals_from_increments(GENTLE, n_coarse, refine, w)
        assert reference is not None

        def terminal(increments):
            dt = GENTLE.T / increments.shape[1]
            return np.maximum(
                kernels.fte_terminal(GENTLE.v0, GENTLE.k, GENTLE.theta, GENTLE.xi, dt, increments), 0.0
            )

        w_2n = pairwise_coarsen(pairwise_coarsen(w))
        w_n = pairwise_coarsen(w_2n)
        assert np.array_equal(reference, terminal(w))
        assert np.array_equal(fine, terminal(w_2n))
        assert np.array_equal(coarse, terminal(w_n))
        assert np.all(coarse >= 0.0) and np.all(fine >= 0.0) and np.all(reference >= 0.0)

    def test_refine_two_has_no_reference(self):
        w = np.zeros((2, 32))
        coarse, fine, reference = coupled_terminals_from_increments(GENTLE, 16, 2, w)
        assert reference is None
        assert coarse.shape == fine.shape == (2,)

    def test_zero_noise_grids_agree_to_discretization_error(self):
        params = CirParams(v0=0.05, k=8.0, theta=0.02, xi=0.8, T=1.0)
        coarse, fine, _ = coupled_terminals_from_increments(params, 16, 4, np.zeros((3, 64)))
        assert np.max(np.abs(coarse - fine)) < 1e-3

    def test_simulate_coupled_reuses_the_brownian_substream(self):
        grid = make_grid(1.0, 16)
        key = StreamKey(42, 3)
        one = simulate_coupled(GENTLE, grid, 4, key)
        z = Stream(replace(key, substream=BROWNIAN)).normals(64)
        w = (z * math.sqrt(GENTLE.T / 64)).reshape(1, 64)
        coarse, fine, reference = coupled_terminals_from_increments(GENTLE, 16, 4, w)
        assert one.coarse_terminal == coarse[0]
        assert one.fine_terminal == fine[0]
        assert one.reference_terminal == reference[0]
        two = simulate_coupled(GENTLE, grid, 2, key)
        assert two.reference_terminal is None
