"""Vectorized numpy implementation of the per-shot simulation loop.

This is the fallback used when the compiled extension is unavailable.

``simulate_block(zg, zh, u, R, M, w, K, obs)`` processes ``N`` shots:

* ``zg``, ``zh``: complex Ginibre matrices ``(N, d, d)``; their Gram-Schmidt
  orthonormalizations ``a``, ``b`` are the Haar-random conjugations of the
  shot, ``G = a (x) b``;
* ``u``: uniforms ``(N,)`` used for inverse-CDF outcome sampling;
* ``R``: Choi matrix ``(D, D)`` with ``D = d * d``;
* ``M``, ``w``: base tester elements ``w_e |M_e>><<M_e|`` as rows ``(n_el, D)``;
* ``K``: dual matrices ``(n_el, D, D)`` of the base elements;
* ``obs``: observables ``(n_obs, D, D)``.

Shot probabilities are ``p_e = w_e <<M_e| G^dag R G |M_e>>`` and the estimate
of observable ``A`` on outcome ``e`` is ``Re Tr[K_e G^dag A G]``.  An outcome
index equal to ``n_el`` marks the no-click event of a trace-decreasing
operation (estimates are zero).  Returns
``(outcome, values, psum, pmin)``.
"""

from __future__ import annotations

import numpy as np


def gram_schmidt(z: np.ndarray) -> np.ndarray:
    """Column-wise modified Gram-Schmidt over a batch ``(N, d, d)``."""
    q = np.array(z, dtype=complex, copy=True)
    d = q.shape[-1]
    for j in range(d):
        for i in range(j):
            s = np.einsum("nr,nr->n", q[:, :, i].conj(), q[:, :, j])
            q[:, :, j] -= s[:, None] * q[:, :, i]
        q[:, :, j] /= np.sqrt(np.einsum("nr,nr->n", q[:, :, j].conj(), q[:, :, j]).real)[:, None]
    return q


def simulate_block(zg, zh, u, R, M, w, K, obs):
    N, d, _ = zg.shape
    D = d * d
    n_el = M.shape[0]
    a = gram_schmidt(zg)
    b = gram_schmidt(zh)
    G = np.einsum("nij,nkl->nikjl", a, b).reshape(N, D, D)
    Gh = G.conj().transpose(0, 2, 1)
    Rp = Gh @ R @ G
    p = w * np.einsum("ea,nab,eb->ne", M.conj(), Rp, M).real
    psum = p.sum(axis=1)
    pmin = p.min(axis=1)
    cdf = np.cumsum(np.clip(p, 0.0, None), axis=1)
    outcome = np.sum(cdf <= u[:, None], axis=1).astype(np.int64)
    values = np.zeros((N, len(obs)))
    hit = outcome < n_el
    if hit.any():
        Kh = K[outcome[hit]]
        Gs, Ghs = G[hit], Gh[hit]
        for o, A in enumerate(obs):
            Ap = Ghs @ A @ Gs
            values[hit, o] = np.einsum("nab,nba->n", Kh, Ap).real
    return outcome, values, psum, pmin
