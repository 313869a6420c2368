"""Internal evaluation state shared by the rate, optimizer and search code.

A RateModel freezes everything about (instance, SIC matrix) that does not
depend on the beamformers: the effective-channel tensor consumed by the
kernels, the per-receiver noise floor, and the CSR layout of the decode
sets.  All beam-dependent quantities go through the selected kernel
backend.
"""

import numpy as np

from . import _kernels
from .channel import NetworkInstance


class RateModel:
    def __init__(self, inst: NetworkInstance, d: np.ndarray, extra_noise=None):
        K = inst.num_users
        # Heff[k, j, :] = conj(channel from j's serving BS to receiver k)
        self.Heff = inst.effective_channels()
        noise = np.full(K, float(inst.noise_power))
        if extra_noise is not None:
            noise = noise + np.asarray(extra_noise, dtype=np.float64)
        self.noise = np.ascontiguousarray(noise)
        self.d = np.asarray(d, dtype=np.int8)
        self.K = K
        self.Nt = inst.antennas_per_cell

        # receiver k decodes dec_idx[dec_ptr[k]:dec_ptr[k+1]] (ascending index)
        counts = np.count_nonzero(self.d, axis=0)
        self.dec_ptr = np.zeros(K + 1, dtype=np.int64)
        np.cumsum(counts, out=self.dec_ptr[1:])
        self.dec_idx = np.empty(self.dec_ptr[-1], dtype=np.int32)
        for k in range(K):
            self.dec_idx[self.dec_ptr[k] : self.dec_ptr[k + 1]] = np.flatnonzero(
                self.d[:, k]
            )
        # full decode orders hold the own signal too
        self.ord_ptr = self.dec_ptr + np.arange(K + 1, dtype=np.int64)
        # defined (signal, receiver) pairs of the decode-rate table
        self.defined = (self.d > 0) | np.eye(K, dtype=bool)
        # receiver-major mask used to sort decode sets by gain
        self._maskT = self.defined.T.copy()

    def gains(self, W):
        U = _kernels.gain_products(self.Heff, W)
        return U.real**2 + U.imag**2

    def orders_csr(self, W):
        """Canonical decode orders: descending gain, ties by index, own last."""
        G = self.gains(W)
        A = np.where(self._maskT, -G, np.inf)
        np.fill_diagonal(A, np.inf)  # own signal appended manually
        by_gain = np.argsort(A, axis=1, kind="stable")
        ord_idx = np.empty(self.ord_ptr[-1], dtype=np.int32)
        for k in range(self.K):
            s, e = self.ord_ptr[k], self.ord_ptr[k + 1]
            ord_idx[s : e - 1] = by_gain[k, : e - 1 - s]
            ord_idx[e - 1] = k
        return ord_idx

    def order_lists(self, ord_idx):
        return [
            ord_idx[self.ord_ptr[k] : self.ord_ptr[k + 1]].tolist()
            for k in range(self.K)
        ]

    def decode_rates(self, W, ord_idx):
        R, _ = _kernels.decode_rates(self.Heff, W, self.noise, ord_idx, self.ord_ptr)
        return R

    def objective(self, W, beta, ord_idx):
        return _kernels.smoothed_objective(
            self.Heff, W, self.noise, beta, ord_idx, self.ord_ptr
        )

    def objective_grad(self, W, beta, ord_idx):
        return _kernels.smoothed_objective_grad(
            self.Heff, W, self.noise, beta, ord_idx, self.ord_ptr
        )

    def true_sum_rate(self, W):
        return _kernels.achievable_sum_rate(
            self.Heff, W, self.noise, self.dec_idx, self.dec_ptr
        )

    def achievable_rates(self, R):
        """Per-signal min of the decode-rate table over each signal's decoders."""
        masked = np.where(self.defined, R, np.inf)
        return masked.min(axis=1)
