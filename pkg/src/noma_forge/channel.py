"""Seeded channel generation for single-cell and multi-cell downlink networks.

Channels are drawn with a shared-component construction: inside a cell,
user u gets  h_u = sqrt(rho) * h0 + sqrt(1 - rho) * e_u  where h0 is one
common vector per cell and e_u is private, both with i.i.d. CN(0, 1)
entries.  rho = 0 gives independent channels, rho = 1 collapses the whole
cell onto one direction.  Inter-cell links are independent draws scaled by
the cross_cell_gain amplitude factor.

Every draw comes from its own counter-based Philox substream keyed by
(master seed, link identity), so enlarging the network never perturbs the
channels of links that already existed.
"""

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1

# Stream tags keep the per-link substreams of the three draw families apart.
_TAG_SHARED = 0x53484152
_TAG_INTRA = 0x494E5452
_TAG_CROSS = 0x43524F53


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64, state


def _mix(*parts: int) -> int:
    """Fold integers into one 64-bit value (splitmix64 chain)."""
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h, _ = _splitmix64(h ^ (int(p) & _MASK64))
    return h


def _link_rng(*parts: int) -> np.random.Generator:
    """Counter-based generator for one link, keyed by the identity parts."""
    k0 = _mix(*parts, 1)
    k1 = _mix(*parts, 2)
    key = np.array([k0, k1], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _draw_cn(rng: np.random.Generator, n: int) -> np.ndarray:
    """n i.i.d. CN(0, 1) entries (unit variance per complex dimension)."""
    x = rng.standard_normal(2 * n)
    return (x[:n] + 1j * x[n:]) / np.sqrt(2.0)


@dataclass
class ChannelGenConfig:
    """Knobs of the channel generator.

    corr_target is the intra-cell pairwise correlation control in [0, 1];
    cross_cell_gain attenuates inter-cell link amplitudes.
    """

    corr_target: float = 0.5
    cross_cell_gain: float = 0.3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.corr_target <= 1.0:
            raise ValueError(f"corr_target must be in [0, 1], got {self.corr_target}")
        if not 0.0 <= self.cross_cell_gain <= 1.0:
            raise ValueError(
                f"cross_cell_gain must be in [0, 1], got {self.cross_cell_gain}"
            )


@dataclass(eq=False)
class NetworkInstance:
    """One realization of a downlink network.

    channel[b, u, :] is the length-N_t vector from BS b to global user u.
    Serving-cell vectors are never zero; inter-cell vectors may be (they
    vanish exactly when cross_cell_gain = 0).
    """

    num_cells: int
    antennas_per_cell: int
    users_per_cell: int
    channel: np.ndarray
    cell_of: np.ndarray
    noise_power: float = 1.0
    power_budget: float = 10.0
    seed: int = 0

    def __post_init__(self):
        B, Nt, Kc = self.num_cells, self.antennas_per_cell, self.users_per_cell
        if B < 1 or Nt < 1 or Kc < 1:
            raise ValueError("num_cells, antennas_per_cell, users_per_cell must be >= 1")
        K = B * Kc
        self.channel = np.ascontiguousarray(self.channel, dtype=np.complex128)
        self.cell_of = np.asarray(self.cell_of, dtype=np.int64)
        if self.channel.shape != (B, K, Nt):
            raise ValueError(f"channel must have shape {(B, K, Nt)}, got {self.channel.shape}")
        if self.cell_of.shape != (K,):
            raise ValueError(f"cell_of must have shape {(K,)}")
        if self.noise_power <= 0 or self.power_budget <= 0:
            raise ValueError("noise_power and power_budget must be positive")
        if not np.all(np.isfinite(self.channel.view(np.float64))):
            raise ValueError("channel entries must be finite")
        counts = np.bincount(self.cell_of, minlength=B)
        if len(counts) != B or not np.all(counts == Kc):
            raise ValueError("cell_of must assign exactly users_per_cell users to each cell")
        own = self.channel[self.cell_of, np.arange(K)]
        if np.any(np.linalg.norm(own, axis=1) == 0.0):
            raise ValueError("serving-cell channel vectors must be nonzero")

    @property
    def num_users(self) -> int:
        return self.num_cells * self.users_per_cell

    def users_of(self, cell: int) -> np.ndarray:
        """Global indices of the users served by one cell."""
        return self.cell_users()[cell]

    def serving_channel(self, user: int) -> np.ndarray:
        """Channel from the user's own BS."""
        return self.channel[self.cell_of[user], user]

    def cell_users(self) -> list:
        """Per-cell user index arrays (cached; instances are immutable in use)."""
        cached = getattr(self, "_cell_users", None)
        if cached is None:
            cached = [np.flatnonzero(self.cell_of == b) for b in range(self.num_cells)]
            self._cell_users = cached
        return cached

    def effective_channels(self) -> np.ndarray:
        """Cached (K, K, N_t) tensor with conj(channel from j's serving BS to
        receiver k) at [k, j, :]; the layout the rate kernels consume."""
        cached = getattr(self, "_heff", None)
        if cached is None:
            cached = np.ascontiguousarray(
                np.conj(self.channel[self.cell_of].transpose(1, 0, 2))
            )
            self._heff = cached
        return cached


def generate_multi_cell(
    B: int,
    K_c: int,
    N_t: int,
    cfg: ChannelGenConfig,
    noise_power: float = 1.0,
    power_budget: float = 10.0,
) -> NetworkInstance:
    """Draw a B-cell instance with K_c users per cell and N_t antennas per BS."""
    if B < 1 or K_c < 1 or N_t < 1:
        raise ValueError("B, K_c and N_t must be >= 1")
    rho = cfg.corr_target
    iota = cfg.cross_cell_gain
    K = B * K_c
    channel = np.zeros((B, K, N_t), dtype=np.complex128)
    cell_of = np.repeat(np.arange(B), K_c)

    for b in range(B):
        h0 = _draw_cn(_link_rng(cfg.seed, _TAG_SHARED, b), N_t)
        for j in range(K_c):
            u = b * K_c + j
            e = _draw_cn(_link_rng(cfg.seed, _TAG_INTRA, b, j), N_t)
            channel[b, u] = np.sqrt(rho) * h0 + np.sqrt(1.0 - rho) * e
        for b_rx in range(B):
            if b_rx == b:
                continue
            for j in range(K_c):
                u = b_rx * K_c + j
                g = _draw_cn(_link_rng(cfg.seed, _TAG_CROSS, b, b_rx, j), N_t)
                channel[b, u] = iota * g

    return NetworkInstance(
        num_cells=B,
        antennas_per_cell=N_t,
        users_per_cell=K_c,
        channel=channel,
        cell_of=cell_of,
        noise_power=noise_power,
        power_budget=power_budget,
        seed=cfg.seed,
    )


def generate_single_cell(
    K: int,
    N_t: int,
    cfg: ChannelGenConfig,
    noise_power: float = 1.0,
    power_budget: float = 10.0,
) -> NetworkInstance:
    """Draw a 1-cell instance with K users (degenerate multi-cell case)."""
    return generate_multi_cell(1, K, N_t, cfg, noise_power, power_budget)


def pairwise_correlation(h_i: np.ndarray, h_j: np.ndarray) -> float:
    """|h_i^H h_j| / (||h_i|| ||h_j||), the spatial channel correlation in [0, 1]."""
    h_i = np.asarray(h_i, dtype=np.complex128)
    h_j = np.asarray(h_j, dtype=np.complex128)
    if h_i.shape != h_j.shape:
        raise ValueError("channel vectors must have equal length")
    ni = np.linalg.norm(h_i)
    nj = np.linalg.norm(h_j)
    if ni == 0.0 or nj == 0.0:
        raise ValueError("pairwise_correlation is undefined for zero vectors")
    return float(min(abs(np.vdot(h_i, h_j)) / (ni * nj), 1.0))


def extract_cell(inst: NetworkInstance, cell: int) -> NetworkInstance:
    """Single-cell view of one cell: its BS, its users, their intra-cell channels."""
    users = inst.users_of(cell)
    return NetworkInstance(
        num_cells=1,
        antennas_per_cell=inst.antennas_per_cell,
        users_per_cell=inst.users_per_cell,
        channel=inst.channel[cell : cell + 1, users, :].copy(),
        cell_of=np.zeros(len(users), dtype=np.int64),
        noise_power=inst.noise_power,
        power_budget=inst.power_budget,
        seed=inst.seed,
    )
