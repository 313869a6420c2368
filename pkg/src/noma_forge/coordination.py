"""Multi-cell coordination patterns and their communication-overhead ledgers.

Three patterns are simulated: centralized CSI collection (one upload round,
one beam download round), a distributed round-based scheme that freezes
inter-cell interference at the most recently exchanged values, and an
inference-only GNN whose per-layer messages are the only inter-BS traffic.
Every exchanged float lands in an OverheadLedger entry; bits are billed at
8 per real and 16 per complex value, payload only.

Rounds are synchronous: all messages of round r are produced from
round-(r-1) state before any state update of round r.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._model import RateModel
from .beamforming import OptimizerConfig, optimize_beams, zf_init, zf_init_all
from .channel import NetworkInstance, extract_cell, _link_rng
from .sic import BeamformingSolution, SicMatrix, _require_valid

CENTER = "CENTER"

GNN_WEIGHTS_MAGIC = "NOMAGNN1"


@dataclass(frozen=True)
class LedgerEntry:
    round: int
    sender: int | str
    receiver: int | str
    n_real: int = 0
    n_complex: int = 0


@dataclass
class OverheadLedger:
    """Message trace with exact bit accounting (8 per real, 16 per complex)."""

    entries: list = field(default_factory=list)

    def add(self, round: int, sender, receiver, n_real: int = 0, n_complex: int = 0):
        if n_real < 0 or n_complex < 0:
            raise ValueError("element counts must be nonnegative")
        self.entries.append(LedgerEntry(round, sender, receiver, int(n_real), int(n_complex)))

    @property
    def total_bits(self) -> int:
        return overhead_bits(self)


def overhead_bits(ledger: OverheadLedger) -> int:
    """Total payload bits of a ledger, recomputed from its entries."""
    total = 0
    for e in ledger.entries:
        if e.n_real < 0 or e.n_complex < 0:
            raise ValueError(f"negative element count in ledger entry {e}")
        total += 8 * e.n_real + 16 * e.n_complex
    return total


def centralized_optimize(
    inst: NetworkInstance, sic: SicMatrix, cfg: OptimizerConfig | None = None
) -> tuple[BeamformingSolution, OverheadLedger]:
    """Full CSI collection at a central node, joint optimization, beam download.

    Each BS uploads the channels it observes locally (itself to all K
    users: K * N_t complex values); the center returns each BS its own
    users' beams (K_c * N_t complex values).  Overhead does not depend on
    the optimizer's iteration count.
    """
    ledger = OverheadLedger()
    K, Nt, Kc = inst.num_users, inst.antennas_per_cell, inst.users_per_cell
    for b in range(inst.num_cells):
        ledger.add(1, b, CENTER, n_complex=K * Nt)
    sol, _ = optimize_beams(inst, sic, zf_init_all(inst), cfg)
    for b in range(inst.num_cells):
        ledger.add(2, CENTER, b, n_complex=Kc * Nt)
    return sol, ledger


def distributed_optimize(
    inst: NetworkInstance,
    sic: SicMatrix,
    rounds: int,
    cfg: OptimizerConfig | None = None,
) -> tuple[BeamformingSolution, OverheadLedger, list[float]]:
    """Round-based interference exchange: per round, every BS tells every
    other BS the interference power it imposes on each of that BS's users
    (K_c reals per directed pair), then re-optimizes its own cell with the
    received values frozen into the noise floor.

    Returns the final beams, the ledger, and the global true sum rate after
    each round (recorded, not guaranteed to improve).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    _require_valid(sic, inst)
    B, Kc = inst.num_cells, inst.users_per_cell
    W = zf_init_all(inst).w.copy()
    ledger = OverheadLedger()
    trace = []
    full_model = RateModel(inst, sic.d)

    for r in range(1, rounds + 1):
        frozen = np.zeros(inst.num_users)
        for b in range(B):
            senders = inst.users_of(b)
            for b_rx in range(B):
                if b_rx == b:
                    continue
                targets = inst.users_of(b_rx)
                # |h_{b->u}^H w_j|^2 summed over b's own beams, per target user
                amp = np.conj(inst.channel[b, targets, :]) @ W[senders].T
                frozen[targets] += np.sum(np.abs(amp) ** 2, axis=1)
                ledger.add(r, b, b_rx, n_real=Kc)

        W_next = W.copy()
        for b in range(B):
            users = inst.users_of(b)
            sub = extract_cell(inst, b)
            sub_sic = SicMatrix(sic.d[np.ix_(users, users)])
            sol, _ = optimize_beams(sub, sub_sic, W[users], cfg, extra_noise=frozen[users])
            W_next[users] = sol.w
        W = W_next
        trace.append(full_model.true_sum_rate(W))

    return BeamformingSolution.from_weights(inst, W), ledger, trace


@dataclass(frozen=True)
class GnnArchitecture:
    """Forward-pass shape of the message-passing network."""

    depth: int = 2
    embed_size: tuple = (16, 16)
    hidden_width: int = 64
    aggregation: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "embed_size", tuple(int(s) for s in self.embed_size))
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if len(self.embed_size) != self.depth:
            raise ValueError("embed_size must list one size per layer")
        if any(s < 1 for s in self.embed_size) or self.hidden_width < 1:
            raise ValueError("embedding and hidden sizes must be >= 1")
        if self.aggregation not in ("max", "sum", "mean"):
            raise ValueError("aggregation must be one of max, sum, mean")


@dataclass
class GnnWeights:
    """Shared (across BSs) parameters: per-layer message encoders and hidden
    combiners, plus the output layer that emits the beam coordinates."""

    enc_w: list
    enc_b: list
    comb_w: list
    comb_b: list
    out_w: np.ndarray
    out_b: np.ndarray
    source: str = "seed"

    def named_arrays(self):
        for ell, (w, b) in enumerate(zip(self.enc_w, self.enc_b)):
            yield f"enc_w_{ell}", w
            yield f"enc_b_{ell}", b
        for ell, (w, b) in enumerate(zip(self.comb_w, self.comb_b)):
            yield f"comb_w_{ell}", w
            yield f"comb_b_{ell}", b
        yield "out_w", self.out_w
        yield "out_b", self.out_b


def _gnn_dims(arch: GnnArchitecture, K_c: int, N_t: int):
    feat = 2 * K_c * N_t  # node and edge features have the same length
    enc_in = [feat + feat] + [arch.hidden_width + feat] * (arch.depth - 1)
    comb_in = [
        arch.embed_size[ell] + (feat if ell == 0 else arch.hidden_width) + feat
        for ell in range(arch.depth)
    ]
    return feat, enc_in, comb_in


def init_gnn_weights(arch: GnnArchitecture, K_c: int, N_t: int, seed: int = 0) -> GnnWeights:
    """Seeded random weights, 1/sqrt(fan_in) scale."""
    feat, enc_in, comb_in = _gnn_dims(arch, K_c, N_t)
    rng = _link_rng(seed, 0x474E4E)

    def draw(rows, cols):
        return rng.standard_normal((rows, cols)) / np.sqrt(cols)

    enc_w = [draw(arch.embed_size[ell], enc_in[ell]) for ell in range(arch.depth)]
    enc_b = [np.zeros(arch.embed_size[ell]) for ell in range(arch.depth)]
    comb_w = [draw(arch.hidden_width, comb_in[ell]) for ell in range(arch.depth)]
    comb_b = [np.zeros(arch.hidden_width) for ell in range(arch.depth)]
    out_w = draw(feat, arch.hidden_width)
    out_b = np.zeros(feat)
    return GnnWeights(enc_w, enc_b, comb_w, comb_b, out_w, out_b, source=f"seed:{seed}")


def _check_shapes(arch: GnnArchitecture, weights: GnnWeights, K_c: int, N_t: int):
    feat, enc_in, comb_in = _gnn_dims(arch, K_c, N_t)
    expected = {}
    for ell in range(arch.depth):
        expected[f"enc_w_{ell}"] = (arch.embed_size[ell], enc_in[ell])
        expected[f"enc_b_{ell}"] = (arch.embed_size[ell],)
        expected[f"comb_w_{ell}"] = (arch.hidden_width, comb_in[ell])
        expected[f"comb_b_{ell}"] = (arch.hidden_width,)
    expected["out_w"] = (feat, arch.hidden_width)
    expected["out_b"] = (feat,)
    got = dict(weights.named_arrays())
    if set(got) != set(expected):
        raise ValueError("weight arrays do not match the architecture's layer count")
    for name, shape in expected.items():
        if got[name].shape != shape:
            raise ValueError(
                f"shape mismatch for {name}: expected {shape}, got {got[name].shape}"
            )


def _relu(x):
    return np.maximum(x, 0.0)


def _flatten_ri(block: np.ndarray) -> np.ndarray:
    return np.concatenate([block.real.ravel(), block.imag.ravel()])


def gnn_forward(
    inst: NetworkInstance, arch: GnnArchitecture, weights: GnnWeights
) -> tuple[BeamformingSolution, OverheadLedger]:
    """Inference-only message passing over the fully connected BS graph.

    Node feature of BS b: its own users' data channels (re/im flattened);
    edge feature b->b': the interference channels from b to b''s users.
    Layer ell: encode [hidden_b ; edge feature] into an embed_size[ell]
    message per neighbor, aggregate received messages with the configured
    permutation-invariant function, combine [aggregate ; hidden ; node
    feature] into the new hidden state.  A final affine layer emits
    2 * K_c * N_t reals per BS, reshaped to complex beams and rescaled into
    the power budget.  All-zero raw outputs for a BS fall back to that
    cell's ZF initialization, so rates stay finite for degenerate weights.
    """
    _check_shapes(arch, weights, inst.users_per_cell, inst.antennas_per_cell)
    B, Kc, Nt = inst.num_cells, inst.users_per_cell, inst.antennas_per_cell

    node = [_flatten_ri(inst.channel[b, inst.users_of(b), :]) for b in range(B)]
    edge = {
        (b, b2): _flatten_ri(inst.channel[b, inst.users_of(b2), :])
        for b in range(B)
        for b2 in range(B)
        if b2 != b
    }

    ledger = OverheadLedger()
    hidden = list(node)
    for ell in range(arch.depth):
        msgs = {}
        for b in range(B):
            for b2 in range(B):
                if b2 == b:
                    continue
                x = np.concatenate([hidden[b], edge[(b, b2)]])
                msgs[(b, b2)] = _relu(weights.enc_w[ell] @ x + weights.enc_b[ell])
                ledger.add(ell + 1, b, b2, n_real=arch.embed_size[ell])
        new_hidden = []
        for b2 in range(B):
            received = [msgs[(b, b2)] for b in range(B) if b != b2]
            if not received:
                agg = np.zeros(arch.embed_size[ell])
            elif arch.aggregation == "max":
                agg = np.max(received, axis=0)
            elif arch.aggregation == "sum":
                agg = np.sum(received, axis=0)
            else:
                agg = np.mean(received, axis=0)
            x = np.concatenate([agg, hidden[b2], node[b2]])
            new_hidden.append(_relu(weights.comb_w[ell] @ x + weights.comb_b[ell]))
        hidden = new_hidden

    w = np.zeros((inst.num_users, Nt), dtype=np.complex128)
    for b in range(B):
        out = weights.out_w @ hidden[b] + weights.out_b
        if np.all(out == 0.0):
            w[inst.users_of(b)] = zf_init(inst, b).w[inst.users_of(b)]
            continue
        half = Kc * Nt
        block = (out[:half] + 1j * out[half:]).reshape(Kc, Nt)
        p = float(np.sum(np.abs(block) ** 2))
        if p > inst.power_budget:
            block = block * np.sqrt(inst.power_budget / p)
        w[inst.users_of(b)] = block

    return BeamformingSolution.from_weights(inst, w), ledger


def gnn_overhead_closed_form(arch: GnnArchitecture, B: int) -> int:
    """Exact bits exchanged by one forward pass over the full BS mesh."""
    return 8 * B * (B - 1) * int(sum(arch.embed_size))


def save_gnn_weights(path, arch: GnnArchitecture, weights: GnnWeights):
    """Write weights as the versioned NOMAGNN1 container (JSON, named real
    arrays with shape headers)."""
    doc = {
        "magic": GNN_WEIGHTS_MAGIC,
        "arch": {
            "depth": arch.depth,
            "embed_size": list(arch.embed_size),
            "hidden_width": arch.hidden_width,
            "aggregation": arch.aggregation,
        },
        "arrays": [
            {"name": name, "shape": list(a.shape), "data": np.asarray(a).ravel().tolist()}
            for name, a in weights.named_arrays()
        ],
    }
    Path(path).write_text(json.dumps(doc))


def load_gnn_weights(path) -> tuple[GnnArchitecture, GnnWeights]:
    doc = json.loads(Path(path).read_text())
    if doc.get("magic") != GNN_WEIGHTS_MAGIC:
        raise ValueError(f"not a {GNN_WEIGHTS_MAGIC} weights file: {path}")
    arch = GnnArchitecture(
        depth=doc["arch"]["depth"],
        embed_size=tuple(doc["arch"]["embed_size"]),
        hidden_width=doc["arch"]["hidden_width"],
        aggregation=doc["arch"]["aggregation"],
    )
    arrays = {}
    for item in doc["arrays"]:
        arrays[item["name"]] = np.array(item["data"], dtype=np.float64).reshape(item["shape"])
    enc_w = [arrays[f"enc_w_{ell}"] for ell in range(arch.depth)]
    enc_b = [arrays[f"enc_b_{ell}"] for ell in range(arch.depth)]
    comb_w = [arrays[f"comb_w_{ell}"] for ell in range(arch.depth)]
    comb_b = [arrays[f"comb_b_{ell}"] for ell in range(arch.depth)]
    weights = GnnWeights(
        enc_w, enc_b, comb_w, comb_b, arrays["out_w"], arrays["out_b"], source=str(path)
    )
    return arch, weights
