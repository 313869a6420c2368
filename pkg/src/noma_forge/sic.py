"""Cluster-free SIC matrices, the decode-rate model, and the classic schemes.

The SIC operations of a K-user network are a binary matrix d where
d[i, k] = 1 means receiver k decodes (and cancels) user i's signal before
its own.  SDMA, BB-NOMA and CB-NOMA are particular choices of that matrix;
the rate model below evaluates any valid choice.

A signal must be decodable at every receiver that cancels it, so a user's
achievable rate is the minimum of its decode rates across its decoders
(own receiver included).  Decoding at a receiver runs in descending
effective gain |h_k^H w_i|^2 with ties broken by ascending user index, the
receiver's own signal last; signals from other cells are never decoded and
always count as interference.
"""

from dataclasses import dataclass, field

import numpy as np

from ._model import RateModel
from .channel import NetworkInstance

_POWER_SLACK = 1.0 + 1e-9


@dataclass(eq=False)
class SicMatrix:
    """Binary SIC-operation matrix; d[i, k] = 1 -> k decodes i before itself."""

    d: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=np.int8)
        if self.d.ndim != 2 or self.d.shape[0] != self.d.shape[1]:
            raise ValueError("SIC matrix must be square")
        if not np.isin(self.d, (0, 1)).all():
            raise ValueError("SIC matrix entries must be 0 or 1")

    @property
    def num_users(self) -> int:
        return self.d.shape[0]

    def copy(self) -> "SicMatrix":
        return SicMatrix(self.d.copy())


@dataclass(eq=False)
class BeamformingSolution:
    """Per-user beamforming vectors with per-cell power accounting."""

    w: np.ndarray
    p_cell: np.ndarray

    @classmethod
    def from_weights(cls, inst: NetworkInstance, w: np.ndarray) -> "BeamformingSolution":
        w = np.ascontiguousarray(w, dtype=np.complex128)
        if w.shape != (inst.num_users, inst.antennas_per_cell):
            raise ValueError(
                f"beamformer array must have shape {(inst.num_users, inst.antennas_per_cell)}"
            )
        if not np.all(np.isfinite(w.view(np.float64))):
            raise ValueError("beamformer entries must be finite")
        p_user = np.sum(np.abs(w) ** 2, axis=1)
        p_cell = np.bincount(inst.cell_of, weights=p_user, minlength=inst.num_cells)
        if np.any(p_cell > inst.power_budget * _POWER_SLACK):
            raise ValueError(
                f"per-cell power {p_cell} exceeds budget {inst.power_budget}"
            )
        return cls(w=w, p_cell=p_cell)


@dataclass
class RateReport:
    """Decode-rate table plus the per-user achievable (min-over-decoders) rates.

    decode_rate[i, k] is NaN for (signal, receiver) pairs that never occur,
    i.e. k != i with d[i, k] = 0.
    """

    decode_rate: np.ndarray
    achievable_rate: np.ndarray
    sum_rate: float
    order: list = field(default_factory=list)


@dataclass(frozen=True)
class Scheme:
    """Tag for one of the supported SIC strategies."""

    kind: str
    n_clusters: int | None = None
    strategy: str = "local"

    KINDS = ("sdma", "bb_noma", "cb_noma", "cluster_free")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}; expected one of {self.KINDS}")

    @classmethod
    def parse(cls, text: str) -> "Scheme":
        """Parse 'sdma', 'bb_noma', 'cb_noma[:clusters]' or 'cluster_free[:strategy]'."""
        name, _, arg = text.strip().partition(":")
        if name == "cb_noma":
            return cls("cb_noma", n_clusters=int(arg) if arg else None)
        if name == "cluster_free":
            return cls("cluster_free", strategy=arg or "local")
        return cls(name)

    def label(self) -> str:
        if self.kind == "cb_noma" and self.n_clusters is not None:
            return f"cb_noma:{self.n_clusters}"
        return self.kind


def validate(sic: SicMatrix, inst: NetworkInstance) -> list[str]:
    """All violated SIC-matrix invariants, with indices; empty list when valid."""
    d = sic.d
    K = inst.num_users
    if d.shape != (K, K):
        raise ValueError(f"SIC matrix shape {d.shape} does not match {K} users")
    violations = []
    for i in np.flatnonzero(np.diagonal(d)):
        violations.append(f"self-decoding at ({i}, {i})")
    mutual = (d == 1) & (d.T == 1)
    for i, k in zip(*np.nonzero(np.triu(mutual, 1))):
        violations.append(f"mutual decoding at ({i}, {k})")
    cross = (d == 1) & (inst.cell_of[:, None] != inst.cell_of[None, :])
    for i, k in zip(*np.nonzero(cross)):
        violations.append(f"cross-cell SIC at ({i}, {k})")
    return violations


def _require_valid(sic: SicMatrix, inst: NetworkInstance):
    violations = validate(sic, inst)
    if violations:
        raise ValueError("invalid SIC matrix: " + "; ".join(violations))


def decoding_order(inst: NetworkInstance, sic: SicMatrix, W, k: int) -> list[int]:
    """Sequence in which receiver k decodes: cancelled signals by descending
    effective gain (ties by ascending index), then its own."""
    if isinstance(W, BeamformingSolution):
        W = W.w
    model = RateModel(inst, sic.d)
    G = model.gains(np.ascontiguousarray(W, dtype=np.complex128))
    ds = np.flatnonzero(sic.d[:, k])
    if len(ds):
        ds = ds[np.lexsort((ds, -G[k, ds]))]
    return [int(i) for i in ds] + [int(k)]


def rate_report(inst: NetworkInstance, sic: SicMatrix, W, extra_noise=None) -> RateReport:
    """Evaluate the decode-rate table, achievable rates and sum rate."""
    _require_valid(sic, inst)
    if isinstance(W, BeamformingSolution):
        W = W.w
    else:
        W = BeamformingSolution.from_weights(inst, W).w  # enforces the power invariant
    model = RateModel(inst, sic.d, extra_noise=extra_noise)
    ord_idx = model.orders_csr(W)
    R = model.decode_rates(W, ord_idx)
    achievable = model.achievable_rates(R)
    table = np.where(model.defined, R, np.nan)
    return RateReport(
        decode_rate=table,
        achievable_rate=achievable,
        sum_rate=float(achievable.sum()),
        order=model.order_lists(ord_idx),
    )


def sum_rate(report: RateReport) -> float:
    return float(np.sum(report.achievable_rate))


def scheme_sdma(K: int) -> SicMatrix:
    """No SIC at all: beamforming-only operation."""
    return SicMatrix(np.zeros((K, K), dtype=np.int8))


def _norm_order(inst: NetworkInstance, users: np.ndarray) -> np.ndarray:
    """Users sorted by descending serving-channel norm, ties by index."""
    norms = np.array([np.linalg.norm(inst.serving_channel(u)) for u in users])
    return users[np.lexsort((users, -norms))]


def scheme_bb_noma(inst: NetworkInstance) -> SicMatrix:
    """Full sequential SIC per cell: every stronger user decodes every weaker one."""
    K = inst.num_users
    d = np.zeros((K, K), dtype=np.int8)
    for b in range(inst.num_cells):
        order = _norm_order(inst, inst.users_of(b))
        for pos, k in enumerate(order):
            for i in order[pos + 1 :]:
                d[i, k] = 1
    return SicMatrix(d)


def _zf_directions(H: np.ndarray, reg: float) -> np.ndarray:
    """Unit-norm regularized zero-forcing directions for the rows of H."""
    A = np.conj(H)  # row u maps a beam w to the receive amplitude h_u^H w
    gram = A @ A.conj().T
    V = A.conj().T @ np.linalg.inv(gram + reg * np.eye(H.shape[0]))
    V = V / np.linalg.norm(V, axis=0, keepdims=True)
    return V  # column c serves the user of row c


def scheme_cb_noma(inst: NetworkInstance, n_clusters: int | None = None):
    """Cluster-based NOMA: correlation clusters, one shared beam direction per
    cluster, sequential SIC inside each cluster.

    Heads are chosen k-center style (mutually least correlated, starting
    from the strongest user); remaining users join the head they correlate
    with most.  Each cluster gets budget P / n_clusters, split inside the
    cluster proportionally to 1 / ||h_u||^2.

    Returns (clusters, SicMatrix, BeamformingSolution) with per-user beams
    w_u = sqrt(p_u) * v_cluster, so the generic rate model applies as-is.
    """
    from .channel import pairwise_correlation

    K = inst.num_users
    Nt = inst.antennas_per_cell
    if n_clusters is None:
        n_clusters = min(Nt, inst.users_per_cell)  # one cluster per RF chain, capped
    if n_clusters < 1 or n_clusters > inst.users_per_cell:
        raise ValueError(
            f"n_clusters must be in [1, {inst.users_per_cell}], got {n_clusters}"
        )

    d = np.zeros((K, K), dtype=np.int8)
    w = np.zeros((K, Nt), dtype=np.complex128)
    all_clusters = []
    for b in range(inst.num_cells):
        users = inst.users_of(b)
        h = {u: inst.serving_channel(u) for u in users}
        norms = {u: np.linalg.norm(h[u]) for u in users}
        corr = {
            (u, v): pairwise_correlation(h[u], h[v])
            for ui, u in enumerate(users)
            for v in users[ui + 1 :]
        }

        def corr_of(u, v):
            return 1.0 if u == v else corr[(min(u, v), max(u, v))]

        heads = [max(users, key=lambda u: (norms[u], -u))]
        rest = [u for u in users if u != heads[0]]
        while len(heads) < n_clusters:
            nxt = min(rest, key=lambda u: (max(corr_of(u, hd) for hd in heads), u))
            heads.append(nxt)
            rest.remove(nxt)
        heads.sort()

        clusters = {hd: [hd] for hd in heads}
        for u in rest:
            hd = max(heads, key=lambda hd: (corr_of(u, hd), -hd))
            clusters[hd].append(u)

        reg = inst.noise_power * n_clusters / inst.power_budget
        V = _zf_directions(np.array([h[hd] for hd in heads]), reg)
        p_cluster = inst.power_budget / n_clusters
        for c, hd in enumerate(heads):
            members = np.array(sorted(clusters[hd]))
            all_clusters.append([int(u) for u in members])
            order = _norm_order(inst, members)
            for pos, k in enumerate(order):
                for i in order[pos + 1 :]:
                    d[i, k] = 1
            inv_gain = np.array([1.0 / norms[u] ** 2 for u in members])
            p = p_cluster * inv_gain / inv_gain.sum()
            for u, pu in zip(members, p):
                w[u] = np.sqrt(pu) * V[:, c]

    return all_clusters, SicMatrix(d), BeamformingSolution.from_weights(inst, w)
