"""Operator frames, dual frames and the statistical-error functionals.

A frame ``{P_i}`` is stored as a stacked array of shape ``(n, r, c)``.  All
frame-level linear algebra happens on the vectorized space of dimension
``r * c`` (see :mod:`optomo.opalg` for the convention).

Subspace restrictions use an orthogonal projector ``Q`` on that vectorized
space.  A dual ``{D_i}`` is *dual on V* when ``Q sum_i |P_i>><<D_i| = Q`` and
every ``D_i`` lies in ``V``; this is exactly what makes
``sum_i <<D_i|A>> Tr[rho P_i]`` an unbiased estimate of ``Tr[rho A]`` for
every state ``rho`` in ``V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, IncompleteError, ValidationError
from .opalg import is_psd, pseudo_inverse

#: a frame is complete on V iff its lower bound is at least this times the upper bound
COMPLETENESS_RATIO = 1e-8
DUALITY_TOL = 1e-9


def _stack(ops) -> np.ndarray:
    arr = np.asarray(ops, dtype=complex)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[0] == 0:
        raise DimensionError("expected a non-empty list of equally shaped matrices")
    return arr


@dataclass(frozen=True)
class OperatorFrame:
    """Finite operator frame with optional outcome probabilities."""

    elements: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "elements", _stack(self.elements))
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != (len(self.elements),):
                raise DimensionError("one weight per frame element is required")
            if w.min() < 0 or abs(w.sum() - 1) > 1e-12:
                raise ValidationError("frame weights must be a probability vector")
            object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def shape(self) -> tuple[int, int]:
        return self.elements.shape[1:]

    @property
    def vecs(self) -> np.ndarray:
        """Rows are ``|P_i>>``."""
        return self.elements.reshape(len(self.elements), -1)


@dataclass(frozen=True)
class DualSet:
    elements: np.ndarray
    projector: np.ndarray

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def vecs(self) -> np.ndarray:
        return self.elements.reshape(len(self.elements), -1)

    def coefficients(self, A: np.ndarray) -> np.ndarray:
        """Estimator coefficients ``<<D_i|A>>``."""
        return self.vecs.conj() @ np.asarray(A).reshape(-1)


@dataclass(frozen=True)
class WeightedObservables:
    """Observables ``A_n`` with positive weights ``q_n``."""

    weights: np.ndarray
    ops: np.ndarray
    G: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = np.asarray(self.weights, dtype=float)
        ops = _stack(self.ops)
        if q.shape != (len(ops),) or q.min() <= 0:
            raise ValidationError("observable weights must be positive, one per observable")
        v = ops.reshape(len(ops), -1)
        object.__setattr__(self, "weights", q)
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "G", (v.T * q) @ v.conj())


@dataclass(frozen=True)
class StateEnsemble:
    """Prior ensemble ``{p_k, rho_k}`` of states (or Choi operators)."""

    probs: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        states = _stack(self.states)
        if p.shape != (len(states),) or p.min() < 0 or abs(p.sum() - 1) > 1e-12:
            raise ValidationError("ensemble probabilities must form a probability vector")
        for s in states:
            if not is_psd(s):
                raise ValidationError("ensemble members must be positive semidefinite")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "states", states)

    @property
    def average(self) -> np.ndarray:
        return np.tensordot(self.probs, self.states, axes=1)


# ---------------------------------------------------------------------------

def frame_operator(frame: OperatorFrame) -> np.ndarray:
    """``F = sum_i |P_i>><<P_i|``."""
    v = frame.vecs
    return v.T @ v.conj()


def _range_basis(Q: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (Q + Q.conj().T))
    return v[:, w > 0.5]


def _projector(frame: OperatorFrame, Q: np.ndarray | None) -> np.ndarray:
    n = frame.vecs.shape[1]
    if Q is None:
        return np.eye(n)
    Q = np.asarray(Q)
    if Q.shape != (n, n):
        raise DimensionError(f"projector of shape {Q.shape} does not act on a {n}-dim space")
    if not np.allclose(Q @ Q, Q, atol=1e-10) or not np.allclose(Q, Q.conj().T, atol=1e-10):
        raise ValidationError("subspace projector must be a Hermitian idempotent")
    return Q


def frame_bounds(frame: OperatorFrame, Q: np.ndarray | None = None) -> tuple[float, float]:
    """Extreme eigenvalues of ``Q F Q`` restricted to ``range(Q)``."""
    Q = _projector(frame, Q)
    B = _range_basis(Q)
    w = np.linalg.eigvalsh(B.conj().T @ frame_operator(frame) @ B)
    return max(float(w[0]), 0.0), float(w[-1])


def is_complete(frame: OperatorFrame, Q: np.ndarray | None = None) -> bool:
    a, b = frame_bounds(frame, Q)
    return b > 0 and a >= COMPLETENESS_RATIO * b


def _require_complete(frame, Q):
    a, b = frame_bounds(frame, Q)
    if not (b > 0 and a >= COMPLETENESS_RATIO * b):
        raise IncompleteError(f"frame is not informationally complete on V (bounds a={a:.3e}, b={b:.3e})")


def _dual_from(frame: OperatorFrame, Q: np.ndarray, M: np.ndarray, scale: np.ndarray) -> DualSet:
    Minv = pseudo_inverse(Q @ M @ Q)
    dvecs = (Minv @ (Q @ frame.vecs.T)).T / scale[:, None]
    return DualSet(dvecs.reshape(frame.elements.shape), Q)


def canonical_dual(frame: OperatorFrame, Q: np.ndarray | None = None) -> DualSet:
    """``D_i = (Q F Q)^+ |P_i>>``."""
    Q = _projector(frame, Q)
    _require_complete(frame, Q)
    return _dual_from(frame, Q, frame_operator(frame), np.ones(len(frame)))


def optimal_dual(frame: OperatorFrame, Q: np.ndarray | None = None, weights=None) -> DualSet:
    """Dual minimising ``sum_i p_i <<D_i|G|D_i>>`` for every ``G >= 0``.

    With ``X = sum_i |P_i>><<P_i| / p_i`` the dual
    ``D_i = (Q X Q)^+ |P_i>> / p_i`` makes ``sum_i p_i |D_i>><<D_i|`` minimal in
    the Loewner order among all duals on V, so it is optimal for any weight
    operator simultaneously.  The weights ``p_i`` default to
    ``frame.weights``.
    """
    Q = _projector(frame, Q)
    p = frame.weights if weights is None else np.asarray(weights, dtype=float)
    if p is None:
        raise ValidationError("optimal_dual needs outcome probabilities")
    if p.shape != (len(frame),):
        raise DimensionError("one probability per frame element is required")
    norms = np.linalg.norm(frame.vecs, axis=1)
    if np.any((p <= 0) & (norms > 0)):
        raise ValidationError("frame element with zero probability but nonzero operator")
    keep = p > 0
    _require_complete(frame, Q)
    v = frame.vecs[keep]
    X = (v.T / p[keep]) @ v.conj()
    scale = np.where(keep, p, 1.0)
    return _dual_from(frame, Q, X, scale)


def duality_residual(frame: OperatorFrame, dual: DualSet) -> float:
    """``|| Q sum_i |P_i>><<D_i| - Q ||`` (spectral norm)."""
    if len(frame) != len(dual):
        raise DimensionError("frame and dual have different lengths")
    S = frame.vecs.T @ dual.vecs.conj()
    Q = dual.projector
    return float(np.linalg.norm(Q @ S - Q, 2))


def reconstruct(frame: OperatorFrame, dual: DualSet, A: np.ndarray) -> np.ndarray:
    """``sum_i <<D_i|A>> P_i``."""
    return np.tensordot(dual.coefficients(A), frame.elements, axes=1)


def _probs(frame: OperatorFrame, rho: np.ndarray) -> np.ndarray:
    # Tr[rho P_i] for Hermitian P_i
    return np.real(np.einsum("ab,iba->i", rho, frame.elements))


def _check_pair(frame, dual):
    if len(frame) != len(dual):
        raise DimensionError("frame and dual have different lengths")


def variance(frame: OperatorFrame, dual: DualSet, A: np.ndarray, rho: np.ndarray) -> float:
    """Single-state variance of the estimator of ``<A>``."""
    _check_pair(frame, dual)
    c = dual.coefficients(A)
    return float(np.sum(np.abs(c) ** 2 * _probs(frame, rho)) - abs(np.trace(rho @ A)) ** 2)


def variance_S(frame: OperatorFrame, dual: DualSet, A: np.ndarray, ensemble: StateEnsemble) -> float:
    """Variance averaged over a prior ensemble."""
    _check_pair(frame, dual)
    c = dual.coefficients(A)
    first = np.sum(np.abs(c) ** 2 * _probs(frame, ensemble.average))
    means = np.abs(np.einsum("kab,ba->k", ensemble.states, A)) ** 2
    return float(first - ensemble.probs @ means)


def variance_SG(frame: OperatorFrame, dual: DualSet, obs: WeightedObservables,
                ensemble: StateEnsemble) -> float:
    """Variance averaged over the ensemble and the weighted observables."""
    _check_pair(frame, dual)
    first = eta_term(frame, dual, ensemble.average, obs.G)
    means = np.abs(np.einsum("kab,nba->kn", ensemble.states, obs.ops)) ** 2
    return float(first - ensemble.probs @ means @ obs.weights)


def eta_term(frame: OperatorFrame, dual: DualSet, rho_avg: np.ndarray,
             G: np.ndarray | None = None) -> float:
    """Design-dependent part ``sum_i <<D_i|Q G Q|D_i>> Tr[rho_avg P_i]``."""
    _check_pair(frame, dual)
    Q = dual.projector
    G = np.eye(Q.shape[0]) if G is None else np.asarray(G)
    D = dual.vecs
    quad = np.real(np.einsum("ia,ab,ib->i", D.conj(), Q @ G @ Q, D))
    return float(quad @ _probs(frame, rho_avg))
