"""Zero-forcing init, the smoothed objective, and the projected-gradient
optimizer."""

import numpy as np
import pytest

from noma_forge.beamforming import (
    OptimizerConfig,
    _project_power,
    finite_difference_gradient,
    grad_as_real_vector,
    optimize_beams,
    smoothed_sum_rate,
    zf_init,
    zf_init_all,
)
from noma_forge.channel import ChannelGenConfig, NetworkInstance, generate_single_cell
from noma_forge.sic import SicMatrix, rate_report, scheme_bb_noma, scheme_sdma
from noma_forge._model import RateModel


def _instance_from_channels(h, noise=1.0, power=10.0):
    h = np.asarray(h, dtype=np.complex128)
    return NetworkInstance(
        num_cells=1,
        antennas_per_cell=h.shape[1],
        users_per_cell=h.shape[0],
        channel=h[None, :, :],
        cell_of=np.zeros(h.shape[0], dtype=np.int64),
        noise_power=noise,
        power_budget=power,
    )


# ----------------------------------------------------------------- zf init


def test_zf_single_user_is_matched_filter():
    inst = generate_single_cell(1, 4, ChannelGenConfig(seed=3))
    h = inst.channel[0, 0]
    sol = zf_init(inst, 0)
    expected_rate = np.log2(1 + inst.power_budget * np.linalg.norm(h) ** 2 / inst.noise_power)
    rep = rate_report(inst, scheme_sdma(1), sol)
    assert rep.sum_rate == pytest.approx(expected_rate, abs=1e-9)
    # direction parallel to h, power P
    gain = abs(np.vdot(h, sol.w[0])) ** 2
    assert gain == pytest.approx(inst.power_budget * np.linalg.norm(h) ** 2, rel=1e-9)


def test_zf_orthogonal_channels_null_cross_gains():
    h = [[2.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]]
    inst = _instance_from_channels(h)
    sol = zf_init(inst, 0)
    for i in range(2):
        for j in range(2):
            if i != j:
                assert abs(np.vdot(np.asarray(h[i]), sol.w[j])) <= 1e-10


def test_zf_overloaded_regime_finite_and_full_power():
    inst = generate_single_cell(6, 4, ChannelGenConfig(corr_target=0.5, seed=8))
    sol = zf_init(inst, 0)
    assert np.all(np.isfinite(sol.w.view(np.float64)))
    assert sol.p_cell[0] == pytest.approx(inst.power_budget, abs=1e-9)


def test_zf_init_all_covers_every_cell():
    from noma_forge.channel import generate_multi_cell

    inst = generate_multi_cell(3, 4, 4, ChannelGenConfig(seed=2))
    sol = zf_init_all(inst)
    assert np.allclose(sol.p_cell, inst.power_budget, rtol=1e-9)


# ------------------------------------------------------------ smoothed min


def test_smoothed_equals_truth_for_single_decoders():
    inst = generate_single_cell(3, 4, ChannelGenConfig(seed=4))
    sic = scheme_sdma(3)
    W = zf_init_all(inst).w
    rep = rate_report(inst, sic, W)
    smooth = smoothed_sum_rate(inst, sic, W, beta=50.0)
    assert smooth == pytest.approx(rep.sum_rate, abs=1e-12)


def test_smoothed_identical_rates_closed_form():
    # identical channels and identical beams: user 0's two decode rates agree
    h = np.array([[1.0, 0.5j], [1.0, 0.5j]], dtype=np.complex128)
    inst = _instance_from_channels(h)
    d = np.zeros((2, 2), dtype=np.int8)
    d[0, 1] = 1
    W = np.array([[0.8, 0.2], [0.8, 0.2]], dtype=np.complex128)
    beta = 50.0
    rep = rate_report(inst, SicMatrix(d), W)
    assert rep.decode_rate[0, 0] == pytest.approx(rep.decode_rate[0, 1], abs=1e-12)
    expected = (rep.decode_rate[0, 0] - np.log(2.0) / beta) + rep.decode_rate[1, 1]
    assert smoothed_sum_rate(inst, SicMatrix(d), W, beta) == pytest.approx(expected, abs=1e-12)


def test_smoothed_min_bounds_random_instances():
    for seed in range(20):
        inst = generate_single_cell(5, 4, ChannelGenConfig(corr_target=0.7, seed=seed))
        sic = scheme_bb_noma(inst)
        W = zf_init_all(inst).w
        rep = rate_report(inst, sic, W)
        beta = 50.0
        smooth = smoothed_sum_rate(inst, sic, W, beta)
        decoders_per_user = 1 + sic.d.sum(axis=1)
        gap_bound = np.sum(np.log(decoders_per_user) / beta)
        assert 0.0 <= rep.sum_rate - smooth <= gap_bound + 1e-12


# ------------------------------------------------------------- projection


def test_projection_rescales_only_over_budget_cells():
    rng = np.random.default_rng(0)
    W = rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))
    cell_of = np.array([0, 0, 1, 1])
    before = W.copy()
    p_before = [np.sum(np.abs(before[:2]) ** 2), np.sum(np.abs(before[2:]) ** 2)]
    budget = float(p_before[0]) + 1.0  # cell 0 inside, maybe cell 1 outside
    W2, p_cell = _project_power(W.copy(), cell_of, 2, budget)
    assert np.all(p_cell <= budget * (1 + 1e-12))
    assert np.allclose(W2[:2], before[:2])  # untouched cell is untouched
    if p_before[1] > budget:
        ratio = W2[2:] / before[2:]
        assert np.allclose(ratio, ratio.flat[0])  # direction kept, pure rescale


# -------------------------------------------------------------- optimizer


def test_single_user_converges_to_matched_filter_rate():
    inst = generate_single_cell(1, 4, ChannelGenConfig(seed=6))
    sic = scheme_sdma(1)
    rng = np.random.default_rng(1)
    W0 = 0.3 * (rng.standard_normal((1, 4)) + 1j * rng.standard_normal((1, 4)))
    sol, trace = optimize_beams(inst, sic, W0, OptimizerConfig(max_iters=300))
    optimum = np.log2(
        1 + inst.power_budget * np.linalg.norm(inst.channel[0, 0]) ** 2 / inst.noise_power
    )
    assert trace.best_true_rate == pytest.approx(optimum, abs=1e-3)


def test_never_worse_than_start_100_runs():
    for seed in range(100):
        inst = generate_single_cell(4, 4, ChannelGenConfig(corr_target=0.5, seed=seed))
        sic = scheme_bb_noma(inst) if seed % 2 else scheme_sdma(4)
        W0 = zf_init_all(inst)
        start_rate = rate_report(inst, sic, W0).sum_rate
        _, trace = optimize_beams(inst, sic, W0, OptimizerConfig(max_iters=40))
        assert trace.best_true_rate >= start_rate - 1e-12


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(42)
    for seed in range(10):
        inst = generate_single_cell(4, 3, ChannelGenConfig(corr_target=0.6, seed=seed))
        sic = scheme_bb_noma(inst) if seed % 2 else scheme_sdma(4)
        W = zf_init_all(inst).w + 0.05 * (
            rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        )
        model = RateModel(inst, sic.d)
        Wc = np.ascontiguousarray(W)
        ord_idx = model.orders_csr(Wc)
        _, g = model.objective_grad(Wc, 50.0, ord_idx)
        fd = finite_difference_gradient(
            inst, sic, W, 50.0, 1e-5, orders=model.order_lists(ord_idx)
        )
        rel = np.linalg.norm(grad_as_real_vector(g) - fd) / np.linalg.norm(fd)
        assert rel <= 1e-4


def test_trace_smoothed_objective_strictly_increases():
    for seed in range(10):
        inst = generate_single_cell(5, 4, ChannelGenConfig(corr_target=0.8, seed=seed))
        sic = scheme_bb_noma(inst)
        _, trace = optimize_beams(inst, sic, zf_init_all(inst), OptimizerConfig(max_iters=80))
        after = np.array(trace.smoothed_after)
        before = np.array(trace.smoothed_before)
        assert np.all(after > before)
        for p in trace.p_cell:
            assert np.all(p <= inst.power_budget * (1 + 1e-9))


def test_optimized_sdma_beats_zf_init():
    for seed in range(20):
        inst = generate_single_cell(4, 4, ChannelGenConfig(corr_target=0.4, seed=seed))
        sic = scheme_sdma(4)
        W0 = zf_init_all(inst)
        base = rate_report(inst, sic, W0).sum_rate
        _, trace = optimize_beams(inst, sic, W0)
        assert trace.best_true_rate >= base - 1e-12


def test_finite_difference_mode_runs():
    inst = generate_single_cell(2, 2, ChannelGenConfig(seed=5))
    sic = scheme_sdma(2)
    cfg = OptimizerConfig(max_iters=5, grad_mode="finite_difference")
    sol, trace = optimize_beams(inst, sic, zf_init_all(inst), cfg)
    assert trace.n_iters >= 1
    assert np.all(np.isfinite(sol.w.view(np.float64)))


# ---------------------------------------------------- FD gradient oracle


def test_fd_gradient_single_user_closed_form():
    inst = generate_single_cell(1, 3, ChannelGenConfig(seed=9))
    sic = scheme_sdma(1)
    h = inst.channel[0, 0]
    rng = np.random.default_rng(2)
    W = 0.5 * (rng.standard_normal((1, 3)) + 1j * rng.standard_normal((1, 3)))
    fd = finite_difference_gradient(inst, sic, W, beta=50.0, h=1e-5)
    # F = log2(1 + |h^H w|^2 / sigma^2); complex-form gradient is
    # 2 h (h^H w) / (ln 2 (sigma^2 + g))
    g = abs(np.vdot(h, W[0])) ** 2
    coef = 1.0 / (np.log(2.0) * (inst.noise_power + g))
    grad_c = 2.0 * coef * h * np.vdot(h, W[0])
    expected = np.concatenate([grad_c.real, grad_c.imag])
    assert np.allclose(fd, expected, atol=1e-4)


def test_fd_gradient_zero_beam_is_zero():
    inst = generate_single_cell(1, 3, ChannelGenConfig(seed=9))
    fd = finite_difference_gradient(inst, scheme_sdma(1), np.zeros((1, 3), dtype=complex), 50.0)
    assert np.allclose(fd, 0.0, atol=1e-9)


def test_fd_gradient_deterministic():
    inst = generate_single_cell(3, 2, ChannelGenConfig(seed=1))
    sic = scheme_bb_noma(inst)
    W = zf_init_all(inst).w
    a = finite_difference_gradient(inst, sic, W, 50.0)
    b = finite_difference_gradient(inst, sic, W, 50.0)
    assert np.array_equal(a, b)


def test_fd_operator_linearity():
    # central differences are linear: FD of c*f equals c * FD of f
    inst = generate_single_cell(3, 2, ChannelGenConfig(seed=7))
    sic = scheme_sdma(3)
    W = zf_init_all(inst).w
    model = RateModel(inst, sic.d)
    ord_idx = model.orders_csr(np.ascontiguousarray(W))
    c = 3.7
    h = 1e-5

    def fd_of(fn):
        flat = W.ravel()
        n = flat.size
        out = np.empty(2 * n)
        for t in range(n):
            for part, off in ((1.0, 0), (1.0j, n)):
                bump = np.zeros(n, dtype=complex)
                bump[t] = part * h
                up = fn(np.ascontiguousarray((flat + bump).reshape(W.shape)))
                dn = fn(np.ascontiguousarray((flat - bump).reshape(W.shape)))
                out[off + t] = (up - dn) / (2 * h)
        return out

    base = fd_of(lambda x: model.objective(x, 50.0, ord_idx))
    scaled = fd_of(lambda x: c * model.objective(x, 50.0, ord_idx))
    assert np.allclose(scaled, c * base, atol=1e-8)
