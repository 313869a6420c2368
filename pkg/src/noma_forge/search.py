"""Search over the discrete space of valid SIC matrices.

Three strategies with a strict dominance relation when run with shared
inner-optimizer settings: an exhaustive oracle for tiny user counts, a
correlation-threshold greedy constructor, and steepest-ascent local search
over single-pair moves.  Every candidate matrix is scored the same way:
optimize beams from the zero-forcing initialization, read off the best
true sum rate.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .beamforming import OptimizerConfig, optimize_beams, zf_init_all
from .channel import NetworkInstance, pairwise_correlation
from .sic import SicMatrix, validate


@dataclass
class SearchConfig:
    tau: float = 0.5
    exhaustive_limit: int = 4
    inner_opt: OptimizerConfig = field(
        default_factory=lambda: OptimizerConfig(max_iters=100)
    )
    flip_budget: int = 200

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must be in [0, 1]")
        if self.exhaustive_limit < 1 or self.flip_budget < 0:
            raise ValueError("exhaustive_limit must be >= 1 and flip_budget >= 0")


def evaluate_candidate(inst: NetworkInstance, d: np.ndarray, cfg: SearchConfig, W0=None):
    """Score one SIC matrix: beams from ZF init, inner-budget optimization.

    Returns (solution, true sum rate).  Every search strategy uses exactly
    this evaluation, which is what makes their results comparable.  W0 is
    the ZF initialization, precomputable because it does not depend on d.
    """
    if W0 is None:
        W0 = zf_init_all(inst).w
    sol, trace = optimize_beams(inst, SicMatrix(d), W0, cfg.inner_opt)
    return sol, trace.best_true_rate


def _intra_cell_pairs(inst: NetworkInstance) -> list[tuple[int, int]]:
    pairs = []
    for b in range(inst.num_cells):
        users = inst.users_of(b)
        for ui, u in enumerate(users):
            for v in users[ui + 1 :]:
                pairs.append((int(u), int(v)))
    return pairs


def _set_pair(d: np.ndarray, i: int, k: int, state: int):
    """Pair state: 0 = no SIC, 1 = k decodes i (d[i,k]=1), 2 = i decodes k."""
    d[i, k] = 1 if state == 1 else 0
    d[k, i] = 1 if state == 2 else 0


def _pair_state(d: np.ndarray, i: int, k: int) -> int:
    if d[i, k]:
        return 1
    if d[k, i]:
        return 2
    return 0


def candidate_moves(d: np.ndarray, pairs):
    """Single-pair state changes reachable from d: at most 2 per pair."""
    for i, k in pairs:
        state = _pair_state(d, i, k)
        for new_state in (0, 1, 2):
            if new_state != state:
                yield i, k, new_state


def enumerate_valid_matrices(K: int):
    """All 3^(K(K-1)/2) valid single-cell SIC matrices, lexicographic in the
    per-pair states (all-zero matrix first)."""
    pairs = [(i, k) for i in range(K) for k in range(i + 1, K)]
    for states in itertools.product((0, 1, 2), repeat=len(pairs)):
        d = np.zeros((K, K), dtype=np.int8)
        for (i, k), s in zip(pairs, states):
            _set_pair(d, i, k, s)
        yield d


def exhaustive_search(inst: NetworkInstance, cfg: SearchConfig | None = None):
    """Brute-force oracle: evaluate every valid SIC matrix, keep the best.

    Ties go to the lexicographically smallest matrix (row-major).  Only
    meant for single-cell instances with at most exhaustive_limit users.
    """
    cfg = cfg or SearchConfig()
    if inst.num_cells != 1:
        raise ValueError("exhaustive_search expects a single-cell instance")
    K = inst.num_users
    if K > cfg.exhaustive_limit:
        raise ValueError(
            f"exhaustive_search limited to {cfg.exhaustive_limit} users, got {K}"
        )
    W0 = zf_init_all(inst).w
    best = None
    for d in enumerate_valid_matrices(K):
        sol, rate = evaluate_candidate(inst, d, cfg, W0)
        if (
            best is None
            or rate > best[2]
            or (rate == best[2] and tuple(d.ravel()) < tuple(best[0].ravel()))
        ):
            best = (d, sol, rate)
    return SicMatrix(best[0]), best[1], best[2]


def greedy_correlation(inst: NetworkInstance, cfg: SearchConfig | None = None) -> SicMatrix:
    """Threshold rule: for every intra-cell pair more correlated than tau,
    the stronger user (by channel norm, ties to the lower index) decodes the
    weaker user's signal."""
    cfg = cfg or SearchConfig()
    K = inst.num_users
    d = np.zeros((K, K), dtype=np.int8)
    for u, v in _intra_cell_pairs(inst):
        if pairwise_correlation(inst.serving_channel(u), inst.serving_channel(v)) > cfg.tau:
            nu = np.linalg.norm(inst.serving_channel(u))
            nv = np.linalg.norm(inst.serving_channel(v))
            stronger, weaker = (u, v) if nu >= nv else (v, u)
            d[weaker, stronger] = 1
    return SicMatrix(d)


def local_search(inst: NetworkInstance, D0: SicMatrix, cfg: SearchConfig | None = None):
    """Steepest-ascent over single-pair moves (none <-> i->k <-> k->i).

    The start pool contains D0 and the all-zero matrix, so the result never
    scores below optimized SDMA.  Each step evaluates every alternative
    state of every intra-cell pair and takes the best strictly improving
    one; stops at a local optimum or after flip_budget accepted moves.
    """
    cfg = cfg or SearchConfig()
    violations = validate(D0, inst)
    if violations:
        raise ValueError("invalid start matrix: " + "; ".join(violations))

    pairs = _intra_cell_pairs(inst)
    W0 = zf_init_all(inst).w
    current_d = D0.d.copy()
    current_sol, current_rate = evaluate_candidate(inst, current_d, cfg, W0)
    zero_d = np.zeros_like(current_d)
    if not np.array_equal(current_d, zero_d):
        zero_sol, zero_rate = evaluate_candidate(inst, zero_d, cfg, W0)
        if zero_rate > current_rate:
            current_d, current_sol, current_rate = zero_d, zero_sol, zero_rate

    accepted = 0
    while accepted < cfg.flip_budget:
        best_move = None
        for i, k, new_state in candidate_moves(current_d, pairs):
            d_new = current_d.copy()
            _set_pair(d_new, i, k, new_state)
            sol, rate = evaluate_candidate(inst, d_new, cfg, W0)
            if rate > current_rate and (best_move is None or rate > best_move[2]):
                best_move = (d_new, sol, rate)
        if best_move is None:
            break
        current_d, current_sol, current_rate = best_move
        accepted += 1

    return SicMatrix(current_d), current_sol, current_rate
