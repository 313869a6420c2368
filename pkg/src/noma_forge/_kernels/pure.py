"""Pure NumPy rate/gradient kernels (reference semantics, fallback backend).

Shared conventions of both backends:

* ``Heff`` is (K, K, N_t) complex with ``Heff[k, j, :] = conj(h)`` where h is
  the channel from user j's serving BS to receiver k, so the beam inner
  product is ``u[k, j] = Heff[k, j, :] @ W[j, :]`` and the effective gain is
  ``g_k(j) = |u[k, j]|^2``.
* ``noise`` is a per-receiver noise power vector (K,), which lets callers
  fold frozen inter-cell interference into the noise floor.
* Decode orders are CSR-packed: receiver k decodes the signals
  ``ord_idx[ord_ptr[k]:ord_ptr[k+1]]`` in sequence, its own signal last.
* The decode rate of signal i at receiver k at position p of the order is
  ``log2(1 + g / (noise_k + T_k - g - C))`` with T_k the total received
  power at k and C the power already cancelled (positions before p).
* The smoothed objective sums, over signals i, the soft minimum
  ``smin_beta`` of i's decode rates across its decoders, where
  ``smin_beta(x) = -(1/beta) * ln(sum(exp(-beta * x)))``.

The gradient is returned as a complex (K, N_t) array whose real/imag parts
are the partial derivatives w.r.t. the real/imag parts of W.
"""

import numpy as np

_LN2 = float(np.log(2.0))


def gain_products(Heff, W):
    """Inner products u[k, j] = Heff[k, j, :] @ W[j, :]."""
    return np.einsum("kjt,jt->kj", Heff, W)


def _receiver_slices(ord_idx, ord_ptr):
    K = len(ord_ptr) - 1
    for k in range(K):
        yield k, ord_idx[ord_ptr[k] : ord_ptr[k + 1]]


def decode_rates(Heff, W, noise, ord_idx, ord_ptr):
    """Decode-rate table R[i, k] for the listed (signal, receiver) pairs.

    Returns (R, U); entries of R not covered by any order are 0.
    """
    U = gain_products(Heff, W)
    G = U.real**2 + U.imag**2
    K = W.shape[0]
    T = G.sum(axis=1)
    R = np.zeros((K, K))
    for k, seq in _receiver_slices(ord_idx, ord_ptr):
        g = G[k, seq]
        cancelled = np.concatenate(([0.0], np.cumsum(g)[:-1]))
        interf = noise[k] + (T[k] - g - cancelled)
        R[seq, k] = np.log2(1.0 + g / interf)
    return R, U


def achievable_sum_rate(Heff, W, noise, dec_idx, dec_ptr):
    """Sum of min-over-decoders rates under the canonical decode orders.

    ``dec_idx[dec_ptr[k]:dec_ptr[k+1]]`` lists receiver k's decode set
    (ascending user index, own signal excluded).  Each receiver decodes in
    descending effective gain, ties by ascending index, own signal last.
    """
    U = gain_products(Heff, W)
    G = U.real**2 + U.imag**2
    K = W.shape[0]
    T = G.sum(axis=1)
    amin = np.full(K, np.inf)
    for k in range(K):
        ds = dec_idx[dec_ptr[k] : dec_ptr[k + 1]]
        if len(ds):
            order = ds[np.lexsort((ds, -G[k, ds]))]
            seq = np.concatenate((order, [k]))
        else:
            seq = np.array([k])
        g = G[k, seq]
        cancelled = np.concatenate(([0.0], np.cumsum(g)[:-1]))
        interf = noise[k] + (T[k] - g - cancelled)
        np.minimum.at(amin, seq, np.log2(1.0 + g / interf))
    return float(amin.sum())


def _decoder_lists(ord_idx, ord_ptr, K):
    decoders = [[] for _ in range(K)]
    for k, seq in _receiver_slices(ord_idx, ord_ptr):
        for i in seq:
            decoders[i].append(k)
    return decoders


def _smin_sum(R, decoders, beta):
    total = 0.0
    for i, ks in enumerate(decoders):
        r = R[i, ks]
        rmin = r.min()
        total += rmin - np.log(np.exp(-beta * (r - rmin)).sum()) / beta
    return float(total)


def smoothed_objective(Heff, W, noise, beta, ord_idx, ord_ptr):
    """Smoothed sum rate under the given frozen decode orders."""
    R, _ = decode_rates(Heff, W, noise, ord_idx, ord_ptr)
    return _smin_sum(R, _decoder_lists(ord_idx, ord_ptr, W.shape[0]), beta)


def smoothed_objective_grad(Heff, W, noise, beta, ord_idx, ord_ptr):
    """Smoothed objective and its gradient w.r.t. the beamformers."""
    U = gain_products(Heff, W)
    G = U.real**2 + U.imag**2
    K = W.shape[0]
    T = G.sum(axis=1)

    R = np.zeros((K, K))
    INTF = np.zeros((K, K))
    for k, seq in _receiver_slices(ord_idx, ord_ptr):
        g = G[k, seq]
        cancelled = np.concatenate(([0.0], np.cumsum(g)[:-1]))
        interf = noise[k] + (T[k] - g - cancelled)
        R[seq, k] = np.log2(1.0 + g / interf)
        INTF[seq, k] = interf

    decoders = _decoder_lists(ord_idx, ord_ptr, K)
    lam = np.zeros((K, K))
    F = 0.0
    for i, ks in enumerate(decoders):
        r = R[i, ks]
        rmin = r.min()
        e = np.exp(-beta * (r - rmin))
        Z = e.sum()
        F += rmin - np.log(Z) / beta
        lam[i, ks] = e / Z

    # dF/dg_k(j) accumulated into c[k, j]: the decoded signal's own gain
    # enters only its numerator; every user outside the cancelled prefix
    # contributes interference.
    c = np.zeros((K, K))
    for k, seq in _receiver_slices(ord_idx, ord_ptr):
        g = G[k, seq]
        interf = INTF[seq, k]
        l = lam[seq, k]
        a = l / (_LN2 * (interf + g))
        b = -l * g / (_LN2 * interf * (interf + g))
        c[k, :] += b.sum()
        suffix = np.cumsum(b[::-1])[::-1]
        c[k, seq] -= suffix
        c[k, seq] += a

    grad = 2.0 * np.einsum("kj,kjt->jt", c * U, np.conj(Heff))
    return float(F), grad
