"""Coordination patterns: overhead ledgers, distributed rounds, GNN forward."""

import numpy as np
import pytest

from noma_forge.beamforming import OptimizerConfig, optimize_beams, zf_init, zf_init_all
from noma_forge.channel import ChannelGenConfig, NetworkInstance, extract_cell, generate_multi_cell
from noma_forge.coordination import (
    CENTER,
    GnnArchitecture,
    OverheadLedger,
    centralized_optimize,
    distributed_optimize,
    gnn_forward,
    gnn_overhead_closed_form,
    init_gnn_weights,
    load_gnn_weights,
    overhead_bits,
    save_gnn_weights,
)
from noma_forge.sic import rate_report, scheme_sdma


def _three_cell_instance(seed=0, iota=0.3):
    cfg = ChannelGenConfig(corr_target=0.5, cross_cell_gain=iota, seed=seed)
    return generate_multi_cell(3, 6, 4, cfg)


# ------------------------------------------------------------------ ledger


def test_overhead_bits_examples():
    ledger = OverheadLedger()
    assert overhead_bits(ledger) == 0
    ledger.add(1, 0, 1, n_real=2, n_complex=3)
    assert overhead_bits(ledger) == 64  # 16 + 48
    ledger.add(2, 1, CENTER, n_real=5)
    assert ledger.total_bits == sum(8 * e.n_real + 16 * e.n_complex for e in ledger.entries)


def test_ledger_rejects_negative_counts():
    ledger = OverheadLedger()
    with pytest.raises(ValueError):
        ledger.add(1, 0, 1, n_real=-1)


# ------------------------------------------------------------- centralized


def test_centralized_overhead_three_cell_topology():
    inst = _three_cell_instance()
    _, ledger = centralized_optimize(inst, scheme_sdma(18), OptimizerConfig(max_iters=5))
    uplink = [e for e in ledger.entries if e.receiver == CENTER]
    downlink = [e for e in ledger.entries if e.sender == CENTER]
    assert sum(16 * e.n_complex for e in uplink) == 3456  # 3 x 72 complex
    assert sum(16 * e.n_complex for e in downlink) == 1152  # 3 x 24 complex
    assert ledger.total_bits == 4608


def test_centralized_single_cell_formula():
    cfg = ChannelGenConfig(corr_target=0.5, seed=1)
    inst = generate_multi_cell(1, 4, 2, cfg)
    _, ledger = centralized_optimize(inst, scheme_sdma(4), OptimizerConfig(max_iters=5))
    K, Nt, Kc = 4, 2, 4
    assert ledger.total_bits == 16 * (K * Nt + Kc * Nt)


def test_centralized_overhead_independent_of_iterations():
    inst = _three_cell_instance()
    _, l1 = centralized_optimize(inst, scheme_sdma(18), OptimizerConfig(max_iters=2))
    _, l2 = centralized_optimize(inst, scheme_sdma(18), OptimizerConfig(max_iters=60))
    assert l1.total_bits == l2.total_bits == 4608


# ------------------------------------------------------------- distributed


def test_distributed_overhead_closed_form():
    inst = _three_cell_instance()
    _, ledger, trace = distributed_optimize(
        inst, scheme_sdma(18), rounds=10, cfg=OptimizerConfig(max_iters=5)
    )
    assert ledger.total_bits == 2880  # 10 x 3*2 x 6 reals x 8 bits
    assert len(trace) == 10
    assert np.all(np.isfinite(trace))


def test_distributed_overhead_linear_in_rounds():
    inst = _three_cell_instance()
    bits = []
    for rounds in (1, 2, 4):
        _, ledger, _ = distributed_optimize(
            inst, scheme_sdma(18), rounds, OptimizerConfig(max_iters=2)
        )
        bits.append(ledger.total_bits)
    assert bits[1] == 2 * bits[0]
    assert bits[2] == 4 * bits[0]


def test_distributed_one_round_no_coupling_equals_independent():
    cfg = ChannelGenConfig(corr_target=0.5, cross_cell_gain=0.0, seed=3)
    inst = generate_multi_cell(3, 3, 2, cfg)
    opt = OptimizerConfig(max_iters=60)
    sol, _, _ = distributed_optimize(inst, scheme_sdma(9), rounds=1, cfg=opt)
    for b in range(3):
        sub = extract_cell(inst, b)
        sub_sol, _ = optimize_beams(sub, scheme_sdma(3), zf_init_all(sub), opt)
        assert np.array_equal(sol.w[inst.users_of(b)], sub_sol.w)


def test_distributed_requires_at_least_one_round():
    inst = _three_cell_instance()
    with pytest.raises(ValueError):
        distributed_optimize(inst, scheme_sdma(18), rounds=0)


# -------------------------------------------------------------------- GNN


def test_gnn_overhead_closed_form_examples():
    assert gnn_overhead_closed_form(GnnArchitecture(2, (16, 16), 8, "mean"), 3) == 1536
    assert gnn_overhead_closed_form(GnnArchitecture(1, (1,), 8, "mean"), 2) == 16


def test_gnn_ledger_matches_closed_form_random_archs():
    rng = np.random.default_rng(0)
    inst = _three_cell_instance(seed=5)
    for _ in range(20):
        depth = int(rng.integers(1, 4))
        embed = tuple(int(rng.integers(1, 33)) for _ in range(depth))
        arch = GnnArchitecture(
            depth, embed, int(rng.integers(4, 33)), str(rng.choice(["max", "sum", "mean"]))
        )
        weights = init_gnn_weights(arch, 6, 4, seed=int(rng.integers(0, 1000)))
        _, ledger = gnn_forward(inst, arch, weights)
        assert ledger.total_bits == gnn_overhead_closed_form(arch, 3)
        per_layer = {}
        for e in ledger.entries:
            per_layer.setdefault(e.round, 0)
            per_layer[e.round] += e.n_real
        assert per_layer == {
            ell + 1: 6 * arch.embed_size[ell] for ell in range(arch.depth)
        }


def _permute_cells(inst, perm):
    B, Kc, K = inst.num_cells, inst.users_per_cell, inst.num_users
    user_map = np.empty(K, dtype=int)
    for b in range(B):
        for j in range(Kc):
            user_map[b * Kc + j] = perm[b] * Kc + j
    ch = np.empty_like(inst.channel)
    for b in range(B):
        ch[perm[b], user_map, :] = inst.channel[b, :, :]
    inst2 = NetworkInstance(
        B,
        inst.antennas_per_cell,
        Kc,
        ch,
        np.repeat(np.arange(B), Kc),
        inst.noise_power,
        inst.power_budget,
        inst.seed,
    )
    return inst2, user_map


@pytest.mark.parametrize("agg", ["max", "sum", "mean"])
def test_gnn_permutation_invariance(agg):
    inst = _three_cell_instance(seed=7)
    arch = GnnArchitecture(2, (16, 16), 32, agg)
    weights = init_gnn_weights(arch, 6, 4, seed=11)
    sol, _ = gnn_forward(inst, arch, weights)
    for perm in ([1, 2, 0], [2, 0, 1], [0, 2, 1]):
        inst2, user_map = _permute_cells(inst, np.array(perm))
        sol2, _ = gnn_forward(inst2, arch, weights)
        assert np.allclose(sol2.w[user_map], sol.w, atol=1e-9)


def test_gnn_deterministic():
    inst = _three_cell_instance(seed=9)
    arch = GnnArchitecture(2, (8, 8), 16, "mean")
    weights = init_gnn_weights(arch, 6, 4, seed=3)
    a, _ = gnn_forward(inst, arch, weights)
    b, _ = gnn_forward(inst, arch, weights)
    assert np.array_equal(a.w, b.w)


def test_gnn_zero_weights_fall_back_to_zf():
    inst = _three_cell_instance(seed=2)
    arch = GnnArchitecture(1, (4,), 8, "sum")
    weights = init_gnn_weights(arch, 6, 4, seed=0)
    for name, arr in weights.named_arrays():
        arr[...] = 0.0
    sol, _ = gnn_forward(inst, arch, weights)
    for b in range(3):
        users = inst.users_of(b)
        assert np.allclose(sol.w[users], zf_init(inst, b).w[users])
    rep = rate_report(inst, scheme_sdma(18), sol)
    assert np.all(np.isfinite(rep.achievable_rate))


def test_gnn_shape_mismatch_rejected():
    inst = _three_cell_instance(seed=2)
    arch = GnnArchitecture(2, (8, 8), 16, "mean")
    weights = init_gnn_weights(arch, 6, 4, seed=1)
    other = GnnArchitecture(2, (8, 8), 24, "mean")
    with pytest.raises(ValueError):
        gnn_forward(inst, other, weights)


def test_gnn_weights_roundtrip(tmp_path):
    arch = GnnArchitecture(2, (8, 4), 16, "max")
    weights = init_gnn_weights(arch, 6, 4, seed=21)
    path = tmp_path / "weights.json"
    save_gnn_weights(path, arch, weights)
    assert "NOMAGNN1" in path.read_text()[:40]
    arch2, weights2 = load_gnn_weights(path)
    assert arch2 == arch
    for (n1, a1), (n2, a2) in zip(weights.named_arrays(), weights2.named_arrays()):
        assert n1 == n2
        assert np.array_equal(a1, a2)
    inst = _three_cell_instance(seed=4)
    w1, _ = gnn_forward(inst, arch, weights)
    w2, _ = gnn_forward(inst, arch2, weights2)
    assert np.array_equal(w1.w, w2.w)


def test_gnn_weights_magic_check(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"magic": "NOPE", "arrays": []}')
    with pytest.raises(ValueError):
        load_gnn_weights(path)


def test_gnn_beats_centralized_overhead_for_small_embeddings():
    # 3-cell topology: any arch with total embedding <= 32 stays under the
    # 4608-bit centralized upload+download
    rng = np.random.default_rng(5)
    for _ in range(20):
        depth = int(rng.integers(1, 4))
        sizes = []
        remaining = 32
        for ell in range(depth):
            hi = max(1, remaining - (depth - ell - 1))
            s = int(rng.integers(1, hi + 1))
            sizes.append(s)
            remaining -= s
        arch = GnnArchitecture(depth, tuple(sizes), 8, "mean")
        assert sum(arch.embed_size) <= 32
        assert gnn_overhead_closed_form(arch, 3) < 4608
