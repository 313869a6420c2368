"""Beamformer initialization and sum-rate maximization for a fixed SIC matrix.

The optimizer is projected gradient ascent on a smoothed surrogate of the
sum rate: each user's min-over-decoders rate is replaced by the soft
minimum smin_beta(x) = -(1/beta) ln(sum exp(-beta x)), which underestimates
the true min by at most ln(m)/beta.  Decoding orders are recomputed every
order_refresh_period iterations and frozen in between, keeping the
objective smooth along the path the gradient sees.  Steps are accepted by
an Armijo test; feasibility is kept by rescaling any cell whose transmit
power exceeds the budget.  The returned beams are the best iterate seen as
measured by the true (unsmoothed) sum rate.
"""

from dataclasses import dataclass, field

import numpy as np

from ._model import RateModel
from .channel import NetworkInstance
from .sic import BeamformingSolution, SicMatrix, _require_valid, _zf_directions

_MIN_STEP = 1e-14
_MAX_STEP = 1e6


@dataclass
class OptimizerConfig:
    beta: float = 50.0
    max_iters: int = 500
    order_refresh_period: int = 25
    step_init: float = 0.1
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    tol: float = 1e-6
    grad_mode: str = "analytic"

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.max_iters < 1 or self.order_refresh_period < 1:
            raise ValueError("max_iters and order_refresh_period must be >= 1")
        if self.step_init <= 0 or self.tol < 0:
            raise ValueError("step_init must be positive and tol nonnegative")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError("armijo_c must lie in (0, 1)")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if self.grad_mode not in ("analytic", "finite_difference"):
            raise ValueError("grad_mode must be 'analytic' or 'finite_difference'")


@dataclass
class OptimTrace:
    """One row per accepted ascent step, plus totals."""

    iteration: list = field(default_factory=list)
    smoothed_before: list = field(default_factory=list)
    smoothed_after: list = field(default_factory=list)
    true_sum_rate: list = field(default_factory=list)
    step_size: list = field(default_factory=list)
    p_cell: list = field(default_factory=list)
    n_iters: int = 0
    converged: bool = False
    best_true_rate: float = 0.0


def _cell_powers(W: np.ndarray, cell_of: np.ndarray, B: int) -> np.ndarray:
    flat = W.view(np.float64).reshape(W.shape[0], -1)
    p_user = np.einsum("ut,ut->u", flat, flat)
    return np.bincount(cell_of, weights=p_user, minlength=B)


def _project_power(W: np.ndarray, cell_of: np.ndarray, B: int, budget: float):
    """Rescale any over-budget cell onto the power ball (directions kept).

    Returns (W, per-cell power after projection); W is modified in place.
    """
    p_cell = _cell_powers(W, cell_of, B)
    over = p_cell > budget
    if over.any():
        scale = np.ones(B)
        scale[over] = np.sqrt(budget / p_cell[over])
        W *= scale[cell_of][:, None]
        p_cell = _cell_powers(W, cell_of, B)
    return W, p_cell


def zf_init(inst: NetworkInstance, cell: int) -> BeamformingSolution:
    """Regularized zero-forcing beams for one cell, equal power split.

    Regularization sigma^2 * K_c / P keeps the construction defined in the
    overloaded regime K_c > N_t.  Users of other cells get zero beams.
    """
    w = np.zeros((inst.num_users, inst.antennas_per_cell), dtype=np.complex128)
    users = inst.users_of(cell)
    H = inst.channel[cell, users, :]
    reg = inst.noise_power * len(users) / inst.power_budget
    V = _zf_directions(H, reg)
    w[users] = np.sqrt(inst.power_budget / len(users)) * V.T
    return BeamformingSolution.from_weights(inst, w)


def zf_init_all(inst: NetworkInstance) -> BeamformingSolution:
    """Regularized zero-forcing initialization for every cell."""
    w = np.zeros((inst.num_users, inst.antennas_per_cell), dtype=np.complex128)
    for b in range(inst.num_cells):
        w += zf_init(inst, b).w
    return BeamformingSolution.from_weights(inst, w)


def _orders_to_csr(model: RateModel, orders) -> np.ndarray:
    ord_idx = np.empty(model.ord_ptr[-1], dtype=np.int32)
    for k, seq in enumerate(orders):
        s, e = model.ord_ptr[k], model.ord_ptr[k + 1]
        if len(seq) != e - s or seq[-1] != k:
            raise ValueError(f"order for receiver {k} must list its decode set, own signal last")
        ord_idx[s:e] = seq
    return ord_idx


def smoothed_sum_rate(inst: NetworkInstance, sic: SicMatrix, W, beta: float, orders=None) -> float:
    """Soft-min surrogate of the sum rate; with orders=None the canonical
    decoding orders of the current beams are used, otherwise the given
    (frozen) orders."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if isinstance(W, BeamformingSolution):
        W = W.w
    W = np.ascontiguousarray(W, dtype=np.complex128)
    model = RateModel(inst, sic.d)
    ord_idx = model.orders_csr(W) if orders is None else _orders_to_csr(model, orders)
    return model.objective(W, beta, ord_idx)


def finite_difference_gradient(
    inst: NetworkInstance, sic: SicMatrix, W, beta: float, h: float = 1e-5, orders=None
) -> np.ndarray:
    """Central differences of the smoothed objective over all real coordinates.

    Layout: first the K*N_t partials w.r.t. Re(W), then w.r.t. Im(W), both
    row-major.  Orders are computed once at W and frozen across all
    perturbed evaluations.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if isinstance(W, BeamformingSolution):
        W = W.w
    W = np.ascontiguousarray(W, dtype=np.complex128)
    model = RateModel(inst, sic.d)
    ord_idx = model.orders_csr(W) if orders is None else _orders_to_csr(model, orders)

    def f(x):
        return model.objective(np.ascontiguousarray(x), beta, ord_idx)

    n = W.size
    grad = np.empty(2 * n)
    flat = W.ravel()
    for t in range(n):
        for part, offset in ((1.0, 0), (1.0j, n)):
            bump = np.zeros(n, dtype=np.complex128)
            bump[t] = part * h
            up = f((flat + bump).reshape(W.shape))
            dn = f((flat - bump).reshape(W.shape))
            grad[offset + t] = (up - dn) / (2.0 * h)
    return grad


def grad_as_real_vector(grad: np.ndarray) -> np.ndarray:
    """Complex-array gradient to the real-coordinate layout of the FD oracle."""
    return np.concatenate([grad.real.ravel(), grad.imag.ravel()])


def _real_vector_as_grad(vec: np.ndarray, shape) -> np.ndarray:
    n = vec.size // 2
    return (vec[:n] + 1j * vec[n:]).reshape(shape)


def optimize_beams(
    inst: NetworkInstance,
    sic: SicMatrix,
    W0,
    cfg: OptimizerConfig | None = None,
    extra_noise=None,
) -> tuple[BeamformingSolution, OptimTrace]:
    """Projected gradient ascent on the smoothed sum rate.

    Returns the best-seen beams by true sum rate (never worse than W0) and
    the per-accepted-step trace.
    """
    cfg = cfg or OptimizerConfig()
    _require_valid(sic, inst)
    if isinstance(W0, BeamformingSolution):
        W0 = W0.w
    model = RateModel(inst, sic.d, extra_noise=extra_noise)
    cell_of, B = inst.cell_of, inst.num_cells
    budget = inst.power_budget

    W, _ = _project_power(np.array(W0, dtype=np.complex128, order="C"), cell_of, B, budget)
    ord_idx = model.orders_csr(W)
    f = model.objective(W, cfg.beta, ord_idx)
    if not np.isfinite(f):
        raise ValueError("non-finite smoothed objective at the initial point")

    best_rate = model.true_sum_rate(W)
    best_W = W.copy()
    trace = OptimTrace()
    step = cfg.step_init

    for it in range(1, cfg.max_iters + 1):
        trace.n_iters = it
        if it > 1 and (it - 1) % cfg.order_refresh_period == 0:
            ord_idx = model.orders_csr(W)
            f = model.objective(W, cfg.beta, ord_idx)

        if cfg.grad_mode == "analytic":
            _, g = model.objective_grad(W, cfg.beta, ord_idx)
        else:
            orders = model.order_lists(ord_idx)
            vec = finite_difference_gradient(inst, sic, W, cfg.beta, orders=orders)
            g = _real_vector_as_grad(vec, W.shape)

        accepted = False
        while step >= _MIN_STEP:
            W_new, p_cell = _project_power(W + step * g, cell_of, B, budget)
            delta = W_new - W
            ascent = np.vdot(g, delta).real
            f_new = model.objective(W_new, cfg.beta, ord_idx)
            if not np.isfinite(f_new):
                raise ValueError("non-finite smoothed objective during line search")
            if ascent > 0.0 and f_new >= f + cfg.armijo_c * ascent:
                accepted = True
                break
            step *= cfg.backtrack_factor
        if not accepted:
            break  # no ascent direction left on this smooth piece

        rel_change = (f_new - f) / max(1.0, abs(f))
        W = W_new
        true_rate = model.true_sum_rate(W)
        if true_rate > best_rate:
            best_rate = true_rate
            best_W = W.copy()

        trace.iteration.append(it)
        trace.smoothed_before.append(f)
        trace.smoothed_after.append(f_new)
        trace.true_sum_rate.append(true_rate)
        trace.step_size.append(step)
        trace.p_cell.append(p_cell)
        f = f_new
        step = min(step * 2.0, _MAX_STEP)
        if rel_change <= cfg.tol:
            trace.converged = True
            break

    trace.best_true_rate = float(best_rate)
    return BeamformingSolution.from_weights(inst, best_W), trace
