"""Choi operators, testers and their physical realizations.

Leg order is fixed everywhere in the package:

* Choi operator ``R`` acts on ``out (x) in``;
* realization input state ``nu`` acts on ``in (x) anc``;
* realization POVM elements act on ``out (x) anc``.

With these conventions ``Tr[R Pi_i] == Tr[(T (x) id)(nu) P_i]`` where the
tester element is the contraction

    Pi_i[(o', j'), (o, j)] = sum_{a, a'} nu[(j, a), (j', a')] P_i[(o', a'), (o, a)]

and the normalization state of the tester is ``sigma = (Tr_anc nu)^T``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .opalg import (TOL, haar_unitary, inv_sqrt_on_support, is_psd, is_unitary, partial_trace,
                    psd_sqrt, weyl_basis)


@dataclass(frozen=True)
class ChoiOp:
    """Choi operator ``R_T = (T (x) id)(|I>><<I|)`` on ``out (x) in``."""

    d_out: int
    d_in: int
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.d_out * self.d_in
        if m.shape != (n, n):
            raise DimensionError(f"Choi matrix must be {n}x{n}, got {m.shape}")
        if not is_psd(m, TOL):
            raise ValidationError("Choi operator must be positive semidefinite")
        object.__setattr__(self, "matrix", m)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.d_out, self.d_in)

    def out_marginal(self) -> np.ndarray:
        """``Tr_out R`` (an operator on ``in``)."""
        return partial_trace(self.matrix, self.dims, [0])

    def in_marginal(self) -> np.ndarray:
        return partial_trace(self.matrix, self.dims, [1])

    def is_operation(self, tol: float = TOL) -> bool:
        """Trace non-increasing: ``Tr_out R <= I``."""
        gap = np.eye(self.d_in) - self.out_marginal()
        return is_psd(gap, tol)

    def is_channel(self, tol: float = TOL) -> bool:
        return np.allclose(self.out_marginal(), np.eye(self.d_in), rtol=0, atol=tol)

    def is_unital(self, tol: float = TOL) -> bool:
        return self.is_channel(tol) and np.allclose(self.in_marginal(), np.eye(self.d_out), rtol=0, atol=tol)


def choi_from_kraus(kraus) -> ChoiOp:
    """``R = sum_k |K_k>><<K_k|`` for Kraus operators of shape ``(d_out, d_in)``."""
    K = np.asarray(kraus, dtype=complex)
    if K.ndim == 2:
        K = K[None]
    if K.ndim != 3:
        raise DimensionError("Kraus operators must be a list of equally shaped matrices")
    _, d_out, d_in = K.shape
    gap = np.eye(d_in) - np.einsum("kab,kac->bc", K.conj(), K)
    if not is_psd(gap, TOL):
        raise ValidationError("sum of K^dag K exceeds the identity")
    v = K.reshape(len(K), -1)
    return ChoiOp(d_out, d_in, v.T @ v.conj())


def apply_choi(R: ChoiOp, rho: np.ndarray) -> np.ndarray:
    """``T(rho) = Tr_in[(I (x) rho^T) R]``."""
    rho = np.asarray(rho)
    if rho.shape != (R.d_in, R.d_in):
        raise DimensionError(f"input must be {R.d_in}x{R.d_in}")
    M = np.kron(np.eye(R.d_out), rho.T) @ R.matrix
    return partial_trace(M, R.dims, [1])


def apply_choi_extended(R: ChoiOp, nu: np.ndarray, d_anc: int) -> np.ndarray:
    """``(T (x) id_anc)(nu)`` for ``nu`` on ``in (x) anc``; result on ``out (x) anc``."""
    nu = np.asarray(nu)
    if nu.shape != (R.d_in * d_anc,) * 2:
        raise DimensionError("input state does not live on in (x) anc")
    r = R.matrix.reshape(R.d_out, R.d_in, R.d_out, R.d_in)
    n = nu.reshape(R.d_in, d_anc, R.d_in, d_anc)
    out = np.einsum("ojpk,jakb->oapb", r, n)
    return out.reshape(R.d_out * d_anc, R.d_out * d_anc)


def depolarizing_choi(d: int) -> ChoiOp:
    """Completely depolarizing channel ``rho -> Tr[rho] I/d``; Choi ``I (x) I / d``."""
    return ChoiOp(d, d, np.eye(d * d, dtype=complex) / d)


def random_channel(d: int, rng: np.random.Generator, n_kraus: int = 2, d_in: int | None = None) -> ChoiOp:
    """Channel ``C^{d_in} -> C^d`` with Kraus operators cut from a Haar isometry."""
    d_in = d if d_in is None else d_in
    if n_kraus * d < d_in:
        raise ValueError("need n_kraus * d >= d_in for a trace-preserving map")
    V = haar_unitary(n_kraus * d, rng)[:, :d_in]
    return choi_from_kraus(V.reshape(n_kraus, d, d_in))


def random_operation(d: int, rng: np.random.Generator, n_kraus: int = 2) -> ChoiOp:
    """Trace-decreasing operation: a random channel with one Kraus operator dropped."""
    V = haar_unitary((n_kraus + 1) * d, rng)[:, :d]
    return choi_from_kraus(V.reshape(n_kraus + 1, d, d)[:n_kraus])


def random_unital_channel(d: int, rng: np.random.Generator, n_unitaries: int = 3) -> ChoiOp:
    """Random mixture of Haar unitaries."""
    p = rng.dirichlet(np.ones(n_unitaries))
    K = [np.sqrt(pk) * haar_unitary(d, rng) for pk in p]
    return choi_from_kraus(K)


# ---------------------------------------------------------------------------
# testers

@dataclass(frozen=True)
class Tester:
    """PSD operators ``Pi_i`` on ``out (x) in`` with ``sum_i Pi_i = I (x) sigma``."""

    elements: np.ndarray
    d_out: int
    d_in: int
    sigma: np.ndarray

    def __len__(self) -> int:
        return len(self.elements)


def make_tester(elements, d_out: int, d_in: int, tol: float = TOL, trace_tol: float = 1e-12) -> Tester:
    """Build a :class:`Tester`, extracting and validating its normalization state."""
    E = np.asarray(elements, dtype=complex)
    if E.ndim != 3 or E.shape[1:] != (d_out * d_in,) * 2:
        raise DimensionError(f"tester elements must have shape (n, {d_out * d_in}, {d_out * d_in})")
    t = Tester(E, d_out, d_in, np.zeros((d_in, d_in), dtype=complex))
    sigma = validate_tester(t, tol, trace_tol)
    return Tester(E, d_out, d_in, sigma)


def validate_tester(t: Tester, tol: float = TOL, trace_tol: float = 1e-12) -> np.ndarray:
    """Check ``sum_i Pi_i = I (x) sigma`` with ``sigma`` a state; return ``sigma``."""
    for e in t.elements:
        if not is_psd(e, tol):
            raise ValidationError("tester elements must be positive semidefinite")
    S = t.elements.sum(axis=0)
    sigma = partial_trace(S, (t.d_out, t.d_in), [0]) / t.d_out
    resid = np.abs(S - np.kron(np.eye(t.d_out), sigma)).max()
    if resid > tol:
        raise ValidationError(f"elements do not sum to I (x) sigma (residual {resid:.3e})")
    if abs(np.trace(sigma) - 1) > max(trace_tol, 0.0):
        raise ValidationError(f"normalization state has trace {np.trace(sigma).real:.15g}")
    if not is_psd(sigma, tol):
        raise ValidationError("normalization state is not positive")
    return sigma


def tester_probabilities(R: ChoiOp, t: Tester) -> np.ndarray:
    """Generalized Born rule ``p_i = Tr[R Pi_i]``."""
    if (R.d_out, R.d_in) != (t.d_out, t.d_in):
        raise DimensionError("Choi operator and tester act on different spaces")
    return np.real(np.einsum("ab,iba->i", R.matrix, t.elements))


def bell_tester(d: int) -> Tester:
    """Bell measurement on ``out (x) in`` with the maximally mixed normalization."""
    U = weyl_basis(d).reshape(d * d, -1)
    E = np.einsum("ia,ib->iab", U, U.conj()) / d ** 2
    return make_tester(E, d, d)


def random_tester(d_out: int, d_in: int, rng: np.random.Generator, n: int | None = None,
                  sigma: np.ndarray | None = None) -> Tester:
    """Random tester with ``n`` rank-one elements and normalization ``sigma``.

    Random PSD operators ``E_i`` are renormalized as
    ``Pi_i = T E_i T^dag`` with ``T = (I (x) sigma^{1/2}) S^{-1/2}``,
    ``S = sum_i E_i``.  ``sigma`` defaults to a random full-rank state.
    """
    D = d_out * d_in
    n = 2 * D * D if n is None else n
    if n < D:
        raise ValueError(f"need at least {D} elements to span out (x) in")
    if sigma is None:
        G = rng.standard_normal((d_in, d_in)) + 1j * rng.standard_normal((d_in, d_in))
        sigma = G @ G.conj().T
        sigma = sigma / np.trace(sigma).real
    v = rng.standard_normal((n, D)) + 1j * rng.standard_normal((n, D))
    E = np.einsum("ia,ib->iab", v, v.conj())
    T = np.kron(np.eye(d_out), psd_sqrt(sigma)) @ inv_sqrt_on_support(E.sum(axis=0))
    return make_tester(T @ E @ T.conj().T, d_out, d_in, tol=1e-9, trace_tol=1e-9)


# ---------------------------------------------------------------------------
# realizations

@dataclass(frozen=True)
class Realization:
    """Input state ``nu`` on ``in (x) anc`` and POVM ``{P_i}`` on ``out (x) anc``."""

    nu: np.ndarray
    povm: np.ndarray
    d_out: int
    d_in: int
    d_anc: int

    def __post_init__(self):
        nu = np.asarray(self.nu, dtype=complex)
        povm = np.asarray(self.povm, dtype=complex)
        if nu.shape != (self.d_in * self.d_anc,) * 2:
            raise DimensionError("nu must act on in (x) anc")
        if povm.ndim != 3 or povm.shape[1:] != (self.d_out * self.d_anc,) * 2:
            raise DimensionError("POVM elements must act on out (x) anc")
        if not is_psd(nu, TOL) or abs(np.trace(nu) - 1) > TOL:
            raise ValidationError("nu must be a density operator")
        if not all(is_psd(p, TOL) for p in povm):
            raise ValidationError("POVM elements must be positive")
        if np.abs(povm.sum(axis=0) - np.eye(povm.shape[1])).max() > TOL:
            raise ValidationError("POVM elements must sum to the identity")
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "povm", povm)


def tester_to_realization(t: Tester, strict: bool = False) -> Realization:
    """Physical scheme reproducing the statistics of ``t`` for every operation.

    For invertible ``sigma`` this is ``nu = |s>><<s|`` with ``s = (sqrt sigma)^T``
    and ``P_i = (I (x) sigma^{-1/2}) Pi_i (I (x) sigma^{-1/2})``.  A singular
    ``sigma`` is handled on its support with an ancilla of dimension
    ``rank(sigma)``; ``strict=True`` refuses it instead.
    """
    sigma = t.sigma
    w, v = np.linalg.eigh(0.5 * (sigma + sigma.conj().T))
    support = w > 1e-12 * w.max()
    rank = int(support.sum())
    if rank == t.d_in:
        root = psd_sqrt(sigma)
        s = root.T
        Minv = inv_sqrt_on_support(sigma)
        left = np.kron(np.eye(t.d_out), Minv)
        povm = left @ t.elements @ left
        d_anc = t.d_in
    else:
        if strict:
            raise ValidationError("normalization state is singular")
        vs, ws = v[:, support], w[support]
        s = vs.conj() * np.sqrt(ws)                       # d_in x rank
        L = (vs / np.sqrt(ws)).conj().T                   # rank x d_in
        left = np.kron(np.eye(t.d_out), L)
        povm = left @ t.elements @ left.conj().T
        d_anc = rank
    vec = s.reshape(-1)
    nu = np.outer(vec, vec.conj())
    # absorb the rounding of sigma^{-1/2} so the POVM sums to I exactly
    povm = 0.5 * (povm + povm.conj().transpose(0, 2, 1))
    return Realization(nu, povm, t.d_out, t.d_in, d_anc)


def realization_to_tester(r: Realization) -> Tester:
    """Tester ``Pi_i`` equivalent to measuring ``P_i`` on ``(T (x) id)(nu)``."""
    n = r.nu.reshape(r.d_in, r.d_anc, r.d_in, r.d_anc)
    P = r.povm.reshape(-1, r.d_out, r.d_anc, r.d_out, r.d_anc)
    # Pi[(o', j'), (o, j)] = sum nu[(j, a), (j', a')] P[(o', a'), (o, a)]
    E = np.einsum("jakb,ipbqa->ipkqj", n, P)
    E = E.reshape(len(r.povm), r.d_out * r.d_in, r.d_out * r.d_in)
    return make_tester(E, r.d_out, r.d_in, tol=1e-9, trace_tol=1e-9)


def realization_probabilities(R: ChoiOp, r: Realization) -> np.ndarray:
    """``Tr[(T (x) id)(nu) P_i]``."""
    rho = apply_choi_extended(R, r.nu, r.d_anc)
    return np.real(np.einsum("ab,iba->i", rho, r.povm))


# ---------------------------------------------------------------------------
# seeds of covariant testers

@dataclass(frozen=True)
class SeedSet:
    """Rank-one seeds ``Pi_i = alpha_i |Psi_i>><<Psi_i|`` with ``sum alpha_i = d_out``.

    ``psis`` has shape ``(n, d_out, d_in)``; each ``Psi_i`` has unit
    Hilbert-Schmidt norm.
    """

    alphas: np.ndarray
    psis: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).reshape(-1)
        psis = np.asarray(self.psis, dtype=complex)
        if psis.ndim == 2:
            psis = psis[None]
        if psis.ndim != 3 or len(psis) != len(a) or len(a) == 0:
            raise DimensionError("need one (d_out x d_in) matrix per seed weight")
        if a.min() <= 0:
            raise ValidationError("seed weights must be positive")
        norms = np.linalg.norm(psis.reshape(len(a), -1), axis=1)
        if np.abs(norms - 1).max() > 1e-12:
            raise ValidationError("seed operators must have unit Hilbert-Schmidt norm")
        if abs(a.sum() - psis.shape[1]) > 1e-12 * max(1, psis.shape[1]):
            raise ValidationError(f"seed weights sum to {a.sum():.15g}, expected {psis.shape[1]}")
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "psis", psis)

    @classmethod
    def normalized(cls, alphas, psis) -> "SeedSet":
        """Rescale raw weights and operators so the invariants hold."""
        psis = np.asarray(psis, dtype=complex)
        if psis.ndim == 2:
            psis = psis[None]
        a = np.asarray(alphas, dtype=float).reshape(-1)
        norms = np.linalg.norm(psis.reshape(len(psis), -1), axis=1)
        return cls(a * psis.shape[1] / a.sum(), psis / norms[:, None, None])

    def __len__(self) -> int:
        return len(self.alphas)

    @property
    def d_out(self) -> int:
        return self.psis.shape[1]

    @property
    def d_in(self) -> int:
        return self.psis.shape[2]

    @property
    def elements(self) -> np.ndarray:
        v = self.psis.reshape(len(self), -1)
        return self.alphas[:, None, None] * np.einsum("ia,ib->iab", v, v.conj())


def covariant_element(seeds: SeedSet, i: int, g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """``(g (x) h) Pi_i (g (x) h)^dag``."""
    if not (is_unitary(g) and is_unitary(h)):
        raise ValidationError("group elements must be unitary")
    W = np.kron(g, h)
    return W @ seeds.elements[i] @ W.conj().T
