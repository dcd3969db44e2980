"""Complex operator algebra on finite-dimensional Hilbert spaces.

Operators are plain ``numpy`` arrays of shape ``(rows, cols)``.  The
vectorization convention is fixed once for the whole package and is
row-major::

    A = sum_mn A[m, n] |m><n|   <->   |A>> = sum_mn A[m, n] |m>|n>

so that ``vectorize(A)[m * cols + n] == A[m, n]``.  Under this convention

* ``<<A|B>> == Tr[A^dag B]``
* ``(X kron Y) |A>> == |X A Y^T>>``
* ``Tr_2 |A>><<B| == A B^dag`` and ``Tr_1 |A>><<B| == (B^dag A)^T``.

Randomness is always drawn from an explicit ``numpy.random.Generator``;
:func:`make_rng` and :func:`substream` build reproducible ones backed by the
counter-based Philox bit generator.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ValidationError

#: Absolute tolerance for structural validation (hermiticity, normalization).
TOL = 1e-10
#: Relative eigenvalue cutoff of the pseudo-inverse.
PINV_RTOL = 1e-12


# ---------------------------------------------------------------------------
# predicates

def is_hermitian(A: np.ndarray, tol: float = TOL) -> bool:
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and np.allclose(A, A.conj().T, rtol=0, atol=tol)


def is_psd(A: np.ndarray, tol: float = TOL) -> bool:
    if not is_hermitian(A, tol):
        return False
    return bool(np.linalg.eigvalsh(_herm(A)).min() >= -tol)


def is_unitary(A: np.ndarray, tol: float = TOL) -> bool:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    return np.allclose(A.conj().T @ A, np.eye(A.shape[0]), rtol=0, atol=tol)


def _herm(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.conj().T)


# ---------------------------------------------------------------------------
# vectorization

def vectorize(A: np.ndarray) -> np.ndarray:
    """Return ``|A>>`` (row-major flattening, no copy when possible)."""
    A = np.asarray(A)
    if A.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {A.shape}")
    return A.reshape(-1)


def unvectorize(v: np.ndarray, rows: int, cols: int | None = None) -> np.ndarray:
    """Inverse of :func:`vectorize` for a ``rows x cols`` operator."""
    v = np.asarray(v)
    cols = rows if cols is None else cols
    if v.ndim != 1 or v.size != rows * cols:
        raise DimensionError(f"vector of shape {v.shape} cannot hold a {rows}x{cols} operator")
    return v.reshape(rows, cols)


def hs_inner(A: np.ndarray, B: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product ``<<A|B>> = Tr[A^dag B]``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    return complex(np.vdot(A.reshape(-1), B.reshape(-1)))


def ketbra(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """``|a><b|`` for 1-D vectors (``b`` defaults to ``a``)."""
    a = np.asarray(a).reshape(-1)
    b = a if b is None else np.asarray(b).reshape(-1)
    return np.outer(a, b.conj())


# ---------------------------------------------------------------------------
# leg calculus

def _check_dims(M: np.ndarray, dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(x) for x in dims)
    if any(x < 1 for x in dims):
        raise DimensionError(f"leg dimensions must be positive, got {dims}")
    n = int(np.prod(dims))
    if M.ndim != 2 or M.shape != (n, n):
        raise DimensionError(f"operator of shape {M.shape} does not match legs {dims}")
    return dims


def partial_trace(M: np.ndarray, dims: Sequence[int], traced: Iterable[int]) -> np.ndarray:
    """Trace out the legs listed in ``traced`` (0-based).

    The kept legs stay in their original order.
    """
    M = np.asarray(M)
    dims = _check_dims(M, dims)
    traced = sorted(set(int(t) for t in traced))
    if any(t < 0 or t >= len(dims) for t in traced):
        raise DimensionError(f"leg index out of range in {traced} for {len(dims)} legs")
    n = len(dims)
    T = M.reshape(dims + dims)
    # contract one leg at a time, from the highest index down so indices stay valid
    for t in reversed(traced):
        m = T.ndim // 2
        T = np.trace(T, axis1=t, axis2=t + m)
    kept = [dims[i] for i in range(n) if i not in traced]
    size = int(np.prod(kept)) if kept else 1
    return T.reshape(size, size)


def permute_legs(M: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of ``M``: new leg ``k`` is old leg ``perm[k]``."""
    M = np.asarray(M)
    dims = _check_dims(M, dims)
    perm = list(perm)
    if sorted(perm) != list(range(len(dims))):
        raise DimensionError(f"{perm} is not a permutation of {len(dims)} legs")
    n = len(dims)
    T = M.reshape(dims + dims).transpose(perm + [p + n for p in perm])
    return T.reshape(M.shape)


def transpose_theta(A: np.ndarray) -> np.ndarray:
    """Transpose in the computational basis (no conjugation)."""
    return np.asarray(A).T.copy()


def partial_transpose(M: np.ndarray, dims: Sequence[int], legs: Iterable[int]) -> np.ndarray:
    M = np.asarray(M)
    dims = _check_dims(M, dims)
    n = len(dims)
    axes = list(range(2 * n))
    for leg in legs:
        axes[leg], axes[leg + n] = axes[leg + n], axes[leg]
    return M.reshape(dims + dims).transpose(axes).reshape(M.shape)


# ---------------------------------------------------------------------------
# special unitaries

def weyl_unitary(m: int, n: int, d: int) -> np.ndarray:
    """Weyl-Heisenberg operator ``shift**m @ clock**n`` on ``C^d``."""
    if d < 1 or not (0 <= m < d and 0 <= n < d):
        raise ValueError(f"weyl indices (m={m}, n={n}) out of range for d={d}")
    shift = np.roll(np.eye(d, dtype=complex), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    return np.linalg.matrix_power(shift, m) @ np.linalg.matrix_power(clock, n)


def weyl_basis(d: int) -> np.ndarray:
    """All ``d**2`` Weyl unitaries stacked as ``(d*d, d, d)``, index ``m*d + n``."""
    return np.stack([weyl_unitary(m, n, d) for m in range(d) for n in range(d)])


def bell_vectors(d: int) -> np.ndarray:
    """Orthonormal Bell basis ``|U_mn>> / sqrt(d)`` as rows of a ``(d*d, d*d)`` array."""
    return weyl_basis(d).reshape(d * d, d * d) / np.sqrt(d)


# ---------------------------------------------------------------------------
# randomness

def make_rng(seed: int | None = None) -> np.random.Generator:
    """Reproducible generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def substream(seed: int, *index: int) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *index)``.

    Substreams for different indices never overlap, so work split by index
    can run in any order and still reproduce the same draws.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, index)])))


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix.

    The phases of ``R``'s diagonal are absorbed into ``Q`` so the result is
    exactly Haar distributed.
    """
    if d < 1:
        raise ValueError("dimension must be positive")
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def haar_unitaries(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent Haar unitaries, shape ``(n, d, d)``."""
    z = (rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=1, axis2=2)
    return q * (diag / np.abs(diag))[:, None, :]


def random_state(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix of the given rank (full rank by default)."""
    rank = d if rank is None else rank
    g = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


# ---------------------------------------------------------------------------
# spectral functions

def psd_sqrt(A: np.ndarray, tol: float = TOL) -> np.ndarray:
    """Positive square root of a PSD operator.

    Eigenvalues in ``[-tol, 0)`` are clipped to zero; anything more negative
    is an error.
    """
    A = np.asarray(A)
    if not is_hermitian(A, tol):
        raise ValidationError("psd_sqrt needs a Hermitian operator")
    w, v = np.linalg.eigh(_herm(A))
    if w.min() < -tol:
        raise ValidationError(f"operator has eigenvalue {w.min():.3e} < -{tol:g}")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def pseudo_inverse(A: np.ndarray, rel_tol: float = PINV_RTOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a Hermitian operator.

    Eigenvalues with ``|lambda| <= rel_tol * max|lambda|`` are treated as zero.
    """
    A = np.asarray(A)
    if not is_hermitian(A, TOL * max(1.0, float(np.abs(A).max(initial=0.0)))):
        raise ValidationError("pseudo_inverse needs a Hermitian operator")
    w, v = np.linalg.eigh(_herm(A))
    cut = rel_tol * np.abs(w).max(initial=0.0)
    keep = np.abs(w) > cut
    winv = np.zeros_like(w)
    winv[keep] = 1.0 / w[keep]
    return (v * winv) @ v.conj().T


def support_projector(A: np.ndarray, rel_tol: float = PINV_RTOL) -> np.ndarray:
    """Orthogonal projector onto the range of a Hermitian operator."""
    w, v = np.linalg.eigh(_herm(np.asarray(A)))
    keep = np.abs(w) > rel_tol * np.abs(w).max(initial=0.0)
    vk = v[:, keep]
    return vk @ vk.conj().T


def inv_sqrt_on_support(A: np.ndarray, rel_tol: float = PINV_RTOL) -> np.ndarray:
    """``A^{-1/2}`` on the support of a PSD operator, zero elsewhere."""
    w, v = np.linalg.eigh(_herm(np.asarray(A)))
    keep = w > rel_tol * np.abs(w).max(initial=0.0)
    f = np.zeros_like(w)
    f[keep] = 1.0 / np.sqrt(w[keep])
    return (v * f) @ v.conj().T
