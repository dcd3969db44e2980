"""Covariant tester optimization.

The operator space ``B(out (x) in)`` is vectorized with legs
``(o, i, o', i')``.  Conjugation by ``g (x) h`` acts there as
``g (x) h (x) conj(g) (x) conj(h)``, whose commutant is spanned by four
orthogonal projectors built from the two partial-trace maps

    Phi_in(Y)  = Tr_in(Y)  (x) I_in / d_in
    Phi_out(Y) = I_out / d_out (x) Tr_out(Y)

namely ``P1 = Phi_out Phi_in``, ``P2 = (1 - Phi_out) Phi_in``,
``P3 = Phi_out (1 - Phi_in)`` and ``P4 = (1 - Phi_out)(1 - Phi_in)``.

The figure of merit of a covariant tester generated by seeds ``Pi_i`` is
``Tr[Xt^+ Q_V]`` with ``Xt`` the group average of
``X = d_in sum_i |Pi_i>><<Pi_i| / Tr[Pi_i]``.  Because ``Xt`` is block scalar,
``Xt = P1 + A P2 + B P3 + C P4`` and the figure of merit reduces to a sum of
block ranks over block coefficients.  Everything here is computed along two
independent routes: the block formulas (``path="spectral"``) and a dense
pseudo-inverse against a subspace projector built directly from the
defining linear constraints of each protocol class (``path="dense"``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import IncompleteError, ValidationError
from .opalg import haar_unitaries, partial_trace, psd_sqrt
from .tester import SeedSet

CLASSES = ("qo", "channel", "unital", "state", "povm")
PROCESS_CLASSES = ("qo", "channel", "unital")

# blocks (1..4) spanned by each class subspace
_CLASS_BLOCKS = {
    "qo": (1, 2, 3, 4),
    "channel": (1, 2, 4),
    "unital": (1, 4),
    "state": (1, 2, 3, 4),
    "povm": (1, 2, 3, 4),
}

SQRT2 = math.sqrt(2.0)


def _check_class(cls: str) -> str:
    cls = cls.lower()
    if cls not in CLASSES:
        raise ValueError(f"unknown protocol class {cls!r}; expected one of {CLASSES}")
    return cls


def class_dims(cls: str, d: int) -> tuple[int, int]:
    """``(d_out, d_in)`` of the protocol class at dimension ``d``."""
    cls = _check_class(cls)
    if cls == "state":
        return d, 1
    if cls == "povm":
        return 1, d
    return d, d


# ---------------------------------------------------------------------------
# Schur blocks

def _phi_in(d_out: int, d_in: int) -> np.ndarray:
    Io, Ii = np.eye(d_out), np.eye(d_in)
    T = np.einsum("oO,pP,ij,IJ->oipjOIPJ", Io, Io, Ii, Ii) / d_in
    n = (d_out * d_in) ** 2
    return T.reshape(n, n)


def _phi_out(d_out: int, d_in: int) -> np.ndarray:
    Io, Ii = np.eye(d_out), np.eye(d_in)
    T = np.einsum("op,OP,iI,jJ->oipjOIPJ", Io, Io, Ii, Ii) / d_out
    n = (d_out * d_in) ** 2
    return T.reshape(n, n)


def _unit_identity(d_out: int, d_in: int) -> np.ndarray:
    D = d_out * d_in
    return np.eye(D).reshape(-1) / math.sqrt(D)


@dataclass(frozen=True)
class SchurBlocks:
    """The four commutant projectors on the vectorized ``out (x) in`` space."""

    d_out: int
    d_in: int
    P: np.ndarray = field(repr=False)

    @property
    def ranks(self) -> tuple[int, int, int, int]:
        ko, ki = self.d_out ** 2 - 1, self.d_in ** 2 - 1
        return (1, ko, ki, ko * ki)

    def __getitem__(self, k: int) -> np.ndarray:
        """Projector ``P_k`` for ``k`` in 1..4."""
        return self.P[k - 1]


@lru_cache(maxsize=8)
def _blocks_cached(d_out: int, d_in: int) -> SchurBlocks:
    fi, fo = _phi_in(d_out, d_in), _phi_out(d_out, d_in)
    e = _unit_identity(d_out, d_in)
    P1 = np.outer(e, e)
    P2 = fi - P1
    P3 = fo - P1
    P4 = np.eye(len(e)) - fi - fo + P1
    P = np.stack([P1, P2, P3, P4])
    P.setflags(write=False)
    return SchurBlocks(d_out, d_in, P)


def schur_projectors(d_out: int, d_in: int) -> SchurBlocks:
    if d_out < 1 or d_in < 1:
        raise ValueError("dimensions must be positive")
    return _blocks_cached(int(d_out), int(d_in))


def conjugation_superop(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Matrix of ``Y -> (g (x) h) Y (g (x) h)^dag`` on the vectorized space."""
    W = np.kron(g, h)
    return np.kron(W, W.conj())


# ---------------------------------------------------------------------------
# coefficients

def _elements_and_dims(obj, d_out=None, d_in=None):
    if isinstance(obj, SeedSet):
        return obj.elements, obj.d_out, obj.d_in
    if hasattr(obj, "elements") and hasattr(obj, "d_out"):
        return np.asarray(obj.elements), obj.d_out, obj.d_in
    if d_out is None or d_in is None:
        raise ValueError("raw element arrays need explicit d_out and d_in")
    return np.asarray(obj), d_out, d_in


@dataclass(frozen=True)
class BlockCoefficients:
    """Block coefficients of the twirled ``X``; ``None`` marks an empty block."""

    c1: float
    A: float | None
    B: float | None
    C: float | None
    d_out: int
    d_in: int

    def as_tuple(self) -> tuple[float | None, float | None, float | None]:
        return (self.A, self.B, self.C)

    def values(self) -> tuple[float, float, float, float]:
        return tuple(np.nan if v is None else v for v in (self.c1, self.A, self.B, self.C))


def block_coefficients(obj, d_out: int | None = None, d_in: int | None = None) -> BlockCoefficients:
    """Block coefficients from partial-trace purities of the seeds.

    Accepts a :class:`SeedSet`, a :class:`~optomo.tester.Tester` or a raw
    ``(n, D, D)`` element array (then ``d_out``/``d_in`` are required).  The
    elements must satisfy ``sum_i Tr[Pi_i] = d_out``.
    """
    E, d_out, d_in = _elements_and_dims(obj, d_out, d_in)
    dims = (d_out, d_in)
    tr = np.real(np.einsum("iaa->i", E))
    if np.any(tr <= 0):
        raise ValidationError("seed element with non-positive trace")
    total = tr.sum()
    if abs(total - d_out) > 1e-9 * d_out:
        raise ValidationError(f"seed traces sum to {total:.15g}, expected {d_out}")
    pur_out = np.array([np.real(np.trace(m @ m)) for m in (partial_trace(e, dims, [1]) for e in E)])
    pur_in = np.array([np.real(np.trace(m @ m)) for m in (partial_trace(e, dims, [0]) for e in E)])
    pur = np.real(np.einsum("iab,iba->i", E, E))
    ko, ki = d_out ** 2 - 1, d_in ** 2 - 1
    c1 = total / d_out
    A = (np.sum(pur_out / tr) - c1) / ko if ko else None
    B = ((d_in / d_out) * np.sum(pur_in / tr) - c1) / ki if ki else None
    C = None
    if ko and ki:
        C = (d_in * np.sum(pur / tr) - c1 - ko * A - ki * B) / (ko * ki)
    return BlockCoefficients(float(c1), _f(A), _f(B), _f(C), d_out, d_in)


def _f(x):
    return None if x is None else float(x)


def coeffs_ABC(obj, d_out: int | None = None, d_in: int | None = None):
    """``(A, B, C)`` of a seed set or tester."""
    return block_coefficients(obj, d_out, d_in).as_tuple()


# ---------------------------------------------------------------------------
# dense route

def x_operator(obj, d_out: int | None = None, d_in: int | None = None) -> np.ndarray:
    """``X = d_in sum_i |Pi_i>><<Pi_i| / Tr[Pi_i]`` as a dense matrix."""
    E, d_out, d_in = _elements_and_dims(obj, d_out, d_in)
    v = E.reshape(len(E), -1)
    tr = np.real(np.einsum("iaa->i", E))
    return d_in * (v.T / tr) @ v.conj()


def twirl(X: np.ndarray, d_out: int, d_in: int) -> np.ndarray:
    """Exact average of ``W X W^dag`` over the product unitary group."""
    blocks = schur_projectors(d_out, d_in)
    out = np.zeros(X.shape, dtype=complex if np.iscomplexobj(X) else float)
    for k, r in enumerate(blocks.ranks, start=1):
        if r:
            Pk = blocks[k]
            out = out + (np.real(np.trace(X @ Pk)) / r) * Pk
    return out


def sampled_twirl(X: np.ndarray, d_out: int, d_in: int, samples: int,
                  rng: np.random.Generator, batch: int = 2048) -> np.ndarray:
    """Monte Carlo group average of ``W X W^dag`` over Haar pairs."""
    D = d_out * d_in
    T = np.asarray(X, dtype=complex).reshape(D, D, D, D)
    acc = np.zeros((D, D, D, D), dtype=complex)
    done = 0
    while done < samples:
        n = min(batch, samples - done)
        gs = haar_unitaries(n, d_out, rng)
        hs = haar_unitaries(n, d_in, rng)
        W = np.einsum("nab,ncd->nacbd", gs, hs).reshape(n, D, D)
        # (W (x) conj W) X (W (x) conj W)^dag, one tensor leg at a time
        Y = np.einsum("nap,pqrs->naqrs", W, T)
        Y = np.einsum("nbq,naqrs->nabrs", W.conj(), Y)
        Y = np.einsum("ncr,nabrs->nabcs", W.conj(), Y)
        acc += np.einsum("nds,nabcs->abcd", W, Y)
        done += n
    return acc.reshape(X.shape) / samples


def xtilde(obj, d_out: int | None = None, d_in: int | None = None) -> np.ndarray:
    """Dense twirled ``X``: block weights taken from ``Tr[X P_k]`` directly."""
    E, d_out, d_in = _elements_and_dims(obj, d_out, d_in)
    return np.real_if_close(twirl(x_operator(E, d_out, d_in), d_out, d_in))


def traceless_basis(d: int) -> np.ndarray:
    """Real orthonormal basis (Hilbert-Schmidt) of the traceless ``d x d`` matrices."""
    mats = []
    for a in range(d):
        for b in range(d):
            if a != b:
                m = np.zeros((d, d))
                m[a, b] = 1.0
                mats.append(m)
    # Helmert-type orthonormal traceless diagonals
    for k in range(1, d):
        diag = np.zeros(d)
        diag[:k] = 1.0
        diag[k] = -k
        mats.append(np.diag(diag / math.sqrt(k * (k + 1))))
    return np.array(mats).reshape(len(mats), d, d) if mats else np.zeros((0, d, d))


def class_complement(cls: str, d_out: int, d_in: int) -> np.ndarray:
    """Orthonormal vectors spanning the complement of the class subspace.

    ``channel``: operators ``I_out (x) E`` with ``E`` traceless, i.e. the
    directions fixed by ``Tr_out R = I_in``.  ``unital`` additionally removes
    ``E' (x) I_in``.  Rows are vectorized operators.
    """
    cls = _check_class(cls)
    n = (d_out * d_in) ** 2
    rows = []
    if cls in ("channel", "unital"):
        for E in traceless_basis(d_in):
            rows.append(np.kron(np.eye(d_out), E).reshape(-1) / math.sqrt(d_out))
    if cls == "unital":
        for E in traceless_basis(d_out):
            rows.append(np.kron(E, np.eye(d_in)).reshape(-1) / math.sqrt(d_in))
    return np.array(rows).reshape(len(rows), n)


def class_projector(cls: str, d_out: int, d_in: int) -> np.ndarray:
    """Projector ``Q_V`` on the linear span of the class."""
    V = class_complement(cls, d_out, d_in)
    n = (d_out * d_in) ** 2
    return np.eye(n) - V.T @ V.conj()


def _dense_eta(Xt: np.ndarray, comp: np.ndarray, G: np.ndarray | None = None,
               rel_tol: float = 1e-12) -> float:
    w, v = np.linalg.eigh(Xt)
    cut = rel_tol * np.abs(w).max()
    keep = np.abs(w) > cut
    null = v[:, ~keep]
    if null.shape[1]:
        # Q_V must lie inside the support: every null vector must be in the complement
        resid = null - comp.T @ (comp.conj() @ null) if len(comp) else null
        if np.abs(resid).max() > 1e-6:
            raise IncompleteError("design is not informationally complete on the class subspace")
    Xp = (v[:, keep] / w[keep]) @ v[:, keep].conj().T
    if G is not None:
        Q = np.eye(len(Xt)) - comp.T @ comp.conj()
        return float(np.real(np.trace(Xp @ Q @ G @ Q)))
    eta = np.real(np.trace(Xp))
    if len(comp):
        eta -= np.real(np.einsum("ka,ab,kb->", comp.conj(), Xp, comp))
    return float(eta)


_DENSE_PROJECTOR_LIMIT = 1296


def dense_block_coefficients(obj, d_out: int | None = None, d_in: int | None = None) -> BlockCoefficients:
    """Block coefficients ``Tr[X P_k] / rank(P_k)`` of the twirl of ``X``.

    Small spaces use the dense ``X`` and projector matrices; larger ones apply
    the projectors to each ``|Pi_i>>`` through the partial-trace maps.
    """
    E, d_out, d_in = _elements_and_dims(obj, d_out, d_in)
    ranks = schur_ranks(d_out, d_in)
    D = d_out * d_in
    if D * D <= _DENSE_PROJECTOR_LIMIT:
        X = x_operator(E, d_out, d_in)
        blocks = schur_projectors(d_out, d_in)
        tr = [float(np.real(np.trace(X @ blocks[k]))) for k in (1, 2, 3, 4)]
    else:
        dims = (d_out, d_in)
        t = np.real(np.einsum("iaa->i", E))
        q_all = np.real(np.einsum("iab,iab->i", E.conj(), E))
        q_in = np.array([np.vdot(e, np.kron(partial_trace(e, dims, [1]), np.eye(d_in))).real
                         for e in E]) / d_in
        q_out = np.array([np.vdot(e, np.kron(np.eye(d_out), partial_trace(e, dims, [0]))).real
                          for e in E]) / d_out
        p1 = t ** 2 / D
        parts = (p1, q_in - p1, q_out - p1, q_all - q_in - q_out + p1)
        tr = [float(d_in * np.sum(p / t)) for p in parts]
    vals = [tr[k] / r if r else None for k, r in enumerate(ranks)]
    return BlockCoefficients(vals[0], vals[1], vals[2], vals[3], d_out, d_in)


def dense_eta_from_coefficients(coef: BlockCoefficients, cls: str) -> float:
    """``Tr[Xt^+ Q_V]`` with ``Xt`` assembled densely from block coefficients."""
    d_out, d_in = coef.d_out, coef.d_in
    c1, A, B, C = (0.0 if v is None else v for v in (coef.c1, coef.A, coef.B, coef.C))
    fi, fo = _phi_in(d_out, d_in), _phi_out(d_out, d_in)
    e = _unit_identity(d_out, d_in)
    # c1 P1 + A P2 + B P3 + C P4 expanded in Phi_in, Phi_out, P1
    Xt = C * np.eye(len(e))
    Xt += (A - C) * fi
    del fi
    Xt += (B - C) * fo
    del fo
    Xt += (c1 - A - B + C) * np.outer(e, e)
    return _dense_eta(Xt, class_complement(cls, d_out, d_in))


# ---------------------------------------------------------------------------
# figure of merit

def eta_spectral(coef: BlockCoefficients, cls: str, weights=(1.0, 1.0, 1.0, 1.0)) -> float:
    """``Tr[Xt^+ G]`` restricted to the class blocks, from block coefficients."""
    cls = _check_class(cls)
    ranks = schur_ranks(coef.d_out, coef.d_in)
    vals = coef.values()
    eta = 0.0
    for k in _CLASS_BLOCKS[cls]:
        r, g, c = ranks[k - 1], weights[k - 1], vals[k - 1]
        if r == 0 or g == 0:
            continue
        if not (c > 1e-12 * max(1.0, abs(coef.c1))):
            raise IncompleteError(f"block P{k} is not covered by the design (coefficient {c:.3e})")
        eta += g * r / c
    return float(eta)


def schur_ranks(d_out: int, d_in: int) -> tuple[int, int, int, int]:
    ko, ki = d_out ** 2 - 1, d_in ** 2 - 1
    return (1, ko, ki, ko * ki)


def eta_of(seeds, cls: str, path: str = "spectral") -> float:
    """Figure of merit ``Tr[Xt^+ Q_V]`` of the covariant tester generated by ``seeds``.

    ``path="spectral"`` uses the partial-trace block coefficients,
    ``path="dense"`` twirls the dense ``X`` and pseudo-inverts it against the
    class projector built from the class constraints.  Raises
    :class:`~optomo.errors.IncompleteError` when the class subspace is not
    inside the support of ``Xt``.
    """
    cls = _check_class(cls)
    E, d_out, d_in = _elements_and_dims(seeds)
    if path == "spectral":
        return eta_spectral(block_coefficients(E, d_out, d_in), cls)
    if path == "dense":
        return dense_eta_from_coefficients(dense_block_coefficients(E, d_out, d_in), cls)
    raise ValueError(f"unknown path {path!r}")


def eta_restricted(X: np.ndarray, Q: np.ndarray) -> float:
    """Optimal-dual figure of merit ``Tr[(Q X Q)^+]`` of a (non-covariant) ``X``."""
    w = np.linalg.eigvalsh(Q @ X @ Q)
    keep = w > 1e-12 * np.abs(w).max()
    return float(np.sum(1.0 / w[keep]))


# ---------------------------------------------------------------------------
# one-dimensional objectives and golden-section search

@dataclass(frozen=True)
class ReciprocalSum:
    """``offset + sum_j c_j / (a_j + b_j x)`` with exact-sign comparisons."""

    terms: tuple[tuple[float, float, float], ...]
    offset: float = 0.0

    def __call__(self, x: float) -> float:
        total = self.offset
        for c, a, b in self.terms:
            if c:
                den = a + b * x
                total += math.inf if den <= 0 else c / den
        return total

    def diff(self, x1: float, x2: float) -> float:
        """``f(x1) - f(x2)`` without cancellation between large terms."""
        s = 0.0
        for c, a, b in self.terms:
            if c:
                s += c * b / ((a + b * x1) * (a + b * x2))
        return (x2 - x1) * s


def golden_section(f: ReciprocalSum, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Minimize a unimodal ``f`` on ``[lo, hi]`` to an interval of width ``tol``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    while b - a > tol:
        if f.diff(c, d) < 0:
            b, d = d, c
            c = b - invphi * (b - a)
        else:
            a, c = c, d
            d = a + invphi * (b - a)
    return 0.5 * (a + b)


def class_objective(cls: str, d: int) -> ReciprocalSum:
    """Figure of merit of a single-parameter rank-one design as a function of ``A``."""
    cls = _check_class(cls)
    k = d * d - 1
    if cls == "qo":
        return ReciprocalSum(((2.0 * k, 0.0, 1.0), (k ** 3, 1.0, -2.0)), 1.0)
    if cls == "channel":
        return ReciprocalSum(((float(k), 0.0, 1.0), (k ** 3, 1.0, -2.0)), 1.0)
    if cls == "unital":
        return ReciprocalSum(((k ** 3, 1.0, -2.0),), 1.0)
    raise ValueError(f"class {cls!r} has no one-parameter objective")


def optimal_A(cls: str, d: int) -> float:
    """Closed-form minimizer of :func:`class_objective`."""
    cls = _check_class(cls)
    if cls == "qo":
        return 1.0 / (d * d + 1)
    if cls == "channel":
        return 1.0 / (SQRT2 * (d * d - 1) + 2.0)
    if cls == "unital":
        return 0.0
    return 1.0 / (d + 1)


def eta_bound(cls: str, d: int) -> float:
    """Optimal figure of merit of the class at dimension ``d``."""
    cls = _check_class(cls)
    if d < 2:
        raise ValueError("dimension must be at least 2")
    if cls == "qo":
        return float(d ** 6 + d ** 4 - d ** 2)
    if cls == "channel":
        return d ** 6 + (2 * SQRT2 - 3) * d ** 4 + (5 - 4 * SQRT2) * d ** 2 + 2 * (SQRT2 - 1)
    if cls == "unital":
        return float((d * d - 1) ** 3 + 1)
    return float(d ** 3 + d ** 2 - d)


# ---------------------------------------------------------------------------
# designs

@dataclass(frozen=True)
class CovariantDesign:
    """Optimal covariant design of a protocol class.

    ``A`` is the coefficient of the non-trivial output block (for ``povm``,
    where that block is empty, it holds the input-block coefficient).
    ``psi`` is the seed operator (``d_out x d_in``); the seed weight is
    ``d_out``.
    """

    cls: str
    d: int
    A: float
    beta: float
    psi: np.ndarray
    eta: float
    B: float | None = None

    @property
    def dims(self) -> tuple[int, int]:
        return class_dims(self.cls, self.d)

    @property
    def seeds(self) -> SeedSet:
        d_out = self.dims[0]
        return SeedSet([float(d_out)], self.psi[None])

    @property
    def purity(self) -> float:
        m = self.psi @ self.psi.conj().T
        return float(np.real(np.trace(m @ m)))


def seed_operator(beta: float, d: int, psi_vec: np.ndarray | None = None) -> np.ndarray:
    """``[(1 - beta)/d I + beta |psi><psi|]^{1/2}`` (default ``|psi> = |0>``)."""
    if psi_vec is None:
        psi_vec = np.zeros(d, dtype=complex)
        psi_vec[0] = 1.0
    psi_vec = np.asarray(psi_vec, dtype=complex)
    psi_vec = psi_vec / np.linalg.norm(psi_vec)
    M = (1.0 - beta) / d * np.eye(d) + beta * np.outer(psi_vec, psi_vec.conj())
    return psd_sqrt(M)


def beta_for_A(A: float, d: int) -> float:
    """Seed parameter giving block coefficient ``A`` for a single seed of weight ``d``.

    The seed purity is ``(1 + (d - 1) beta^2) / d`` and the coefficient is
    ``(d * purity - 1) / (d^2 - 1)``, hence ``beta^2 = A (d + 1)``.
    """
    return math.sqrt(max(A, 0.0) * (d + 1))


def _alternative_channel_beta(d: int) -> float:
    return ((d - 1) * (2.0 + SQRT2 * (d * d - 1))) ** -0.5


def optimize_class(cls: str, d: int, check: bool = True) -> CovariantDesign:
    """Optimal single-seed design for ``qo``, ``channel`` or ``unital`` tomography."""
    cls = _check_class(cls)
    if cls in ("state", "povm"):
        return state_povm_design(cls, d)
    if d < 2:
        raise ValueError("dimension must be at least 2")
    A = optimal_A(cls, d)
    if check:
        hi = 1.0 / (d + 1)
        Ag = golden_section(class_objective(cls, d), 0.0, hi)
        if abs(Ag - A) > 1e-9:
            raise RuntimeError(f"golden-section minimizer {Ag!r} disagrees with closed form {A!r}")
    beta = beta_for_A(A, d)
    psi = seed_operator(beta, d)
    eta = eta_bound(cls, d)
    if cls == "channel":
        # a second candidate seed parameter is kept only if the dense route prefers it
        alt_beta = _alternative_channel_beta(d)
        alt = SeedSet([float(d)], seed_operator(alt_beta, d)[None])
        ours = SeedSet([float(d)], psi[None])
        if eta_of(alt, cls, "dense") < eta_of(ours, cls, "dense"):
            beta, psi = alt_beta, alt.psis[0]
            A = block_coefficients(alt).A
            eta = eta_of(alt, cls, "dense")
    return CovariantDesign(cls, d, float(A), float(beta), psi, float(eta), float(A))


def state_povm_design(kind: str, d: int) -> CovariantDesign:
    """Pure-seed design for state (``d_in = 1``) or POVM (``d_out = 1``) tomography."""
    kind = _check_class(kind)
    if kind not in ("state", "povm"):
        raise ValueError("kind must be 'state' or 'povm'")
    if d < 2:
        raise ValueError("dimension must be at least 2")
    vec = np.zeros(d, dtype=complex)
    vec[0] = 1.0
    psi = vec.reshape(d, 1) if kind == "state" else vec.reshape(1, d)
    A = 1.0 / (d + 1)
    return CovariantDesign(kind, d, A, 1.0, psi, eta_bound(kind, d), None)


def von_neumann_seeds(kind: str, d: int) -> SeedSet:
    """Seeds of the randomly rotated computational-basis measurement."""
    basis = np.eye(d, dtype=complex)
    if kind == "state":
        return SeedSet(np.ones(d), basis[:, :, None])
    if kind == "povm":
        return SeedSet(np.full(d, 1.0 / d), basis[:, None, :])
    raise ValueError("kind must be 'state' or 'povm'")


# ---------------------------------------------------------------------------
# weighted observables

@dataclass(frozen=True)
class WeightSpec:
    """Spectrum ``(g1, g2, g3, g4)`` of the observable weight operator on the blocks."""

    g1: float
    g2: float
    g3: float
    g4: float

    def __post_init__(self):
        if min(self.g1, self.g2, self.g3, self.g4) < 0:
            raise ValidationError("block weights must be nonnegative")
        if self.g2 == self.g3 == self.g4 == 0:
            raise ValidationError("at least one of g2, g3, g4 must be positive")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.g1, self.g2, self.g3, self.g4)


def _ratio(g: float, x: float) -> float:
    if g == 0:
        return 0.0
    return math.inf if x <= 0 else g / x


def weighted_eta(w: WeightSpec, d: int, A: float, B: float) -> float:
    """``g1 + k (g2/A + g3/B + k g4 / C)`` with ``C = (1 - A - B)/k`` and ``k = d^2 - 1``."""
    k = d * d - 1
    s = 1.0 - A - B
    return w.g1 + k * (_ratio(w.g2, A) + _ratio(w.g3, B) + _ratio(k * k * w.g4, s))


def _best_1d(g: float, h: float, s0: float, hi: float) -> float:
    """argmin over ``x`` in ``[0, hi]`` of ``g/x + h/(s0 - x)``."""
    rg, rh = math.sqrt(g), math.sqrt(h)
    if rg + rh == 0 or rh == 0:
        return hi
    return min(max(s0 * rg / (rg + rh), 0.0), hi)


def optimize_weighted(w: WeightSpec, d: int, manifold: str = "rank_one") -> tuple[float, float, float]:
    """Minimize :func:`weighted_eta` from its stationarity conditions.

    ``manifold="rank_one"`` enforces ``A = B``, which holds identically for
    rank-one seeds (``Tr_in`` and ``Tr_out`` of ``|Psi>><<Psi|`` have equal
    purities); the optimum is then attainable by a single seed.
    ``manifold="relaxed"`` treats ``A`` and ``B`` as independent in
    ``[0, 1/(d+1)]^2``.  Returns ``(A*, B*, eta*)``.
    """
    if d < 2:
        raise ValueError("dimension must be at least 2")
    k = d * d - 1
    hi = 1.0 / (d + 1)
    g1, g2, g3, g4 = w.as_tuple()
    h = k * k * g4
    if manifold == "rank_one":
        # g1 + k[(g2 + g3)/t + h/(1 - 2t)]; substitute u = 2t
        t = 0.5 * _best_1d(2.0 * (g2 + g3), h, 1.0, 2.0 * hi)
        return t, t, weighted_eta(w, d, t, t)
    if manifold != "relaxed":
        raise ValueError(f"unknown manifold {manifold!r}")
    cands = []
    lam = math.sqrt(g2) + math.sqrt(g3) + math.sqrt(h)
    if math.sqrt(h) > 0:
        cands.append((math.sqrt(g2) / lam, math.sqrt(g3) / lam))
    cands.append((hi, _best_1d(g3, h, 1.0 - hi, hi)))
    cands.append((_best_1d(g2, h, 1.0 - hi, hi), hi))
    cands.append((hi, hi))
    best = None
    for A, B in cands:
        if not (0 <= A <= hi + 1e-15 and 0 <= B <= hi + 1e-15):
            continue
        val = weighted_eta(w, d, A, B)
        if best is None or val < best[2]:
            best = (A, B, val)
    if best is None or not math.isfinite(best[2]):
        raise ValidationError("weight specification has an empty feasible region")
    return best


def grid_minimize(w: WeightSpec, d: int, n: int = 200, rounds: int = 8,
                  manifold: str = "relaxed") -> tuple[float, float, float]:
    """Brute-force oracle: ``n x n`` grid over ``[0, 1/(d+1)]^2`` with zooming refinement."""
    hi = 1.0 / (d + 1)
    a_lo, a_hi, b_lo, b_hi = 0.0, hi, 0.0, hi
    best = (math.nan, math.nan, math.inf)
    for _ in range(rounds):
        As = np.linspace(a_lo, a_hi, n)
        Bs = As if manifold == "rank_one" else np.linspace(b_lo, b_hi, n)
        k = d * d - 1
        Ag, Bg = (As, As) if manifold == "rank_one" else np.meshgrid(As, Bs, indexing="ij")
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = w.g1 + k * (_grid_ratio(w.g2, Ag) + _grid_ratio(w.g3, Bg)
                               + _grid_ratio(k * k * w.g4, 1.0 - Ag - Bg))
        idx = np.unravel_index(np.argmin(vals), vals.shape)
        if vals[idx] < best[2]:
            if manifold == "rank_one":
                best = (float(As[idx[0]]), float(As[idx[0]]), float(vals[idx]))
            else:
                best = (float(As[idx[0]]), float(Bs[idx[1]]), float(vals[idx]))
        da, db = (a_hi - a_lo) / (n - 1), (b_hi - b_lo) / (n - 1)
        a_lo, a_hi = max(0.0, best[0] - da), min(hi, best[0] + da)
        b_lo, b_hi = max(0.0, best[1] - db), min(hi, best[1] + db)
    return best


def _grid_ratio(g: float, x: np.ndarray) -> np.ndarray:
    if g == 0:
        return np.zeros_like(x)
    return np.where(x > 0, g / np.where(x > 0, x, 1.0), np.inf)


# ---------------------------------------------------------------------------
# random seed sets

def random_seedset(d_out: int, d_in: int, rng: np.random.Generator, n_seeds: int | None = None) -> SeedSet:
    n = int(rng.integers(1, 6)) if n_seeds is None else n_seeds
    psis = rng.standard_normal((n, d_out, d_in)) + 1j * rng.standard_normal((n, d_out, d_in))
    alphas = rng.dirichlet(np.ones(n))
    return SeedSet.normalized(alphas, psis)


def seed_A_batch(alphas: np.ndarray, psis: np.ndarray) -> np.ndarray:
    """Block coefficient ``A`` of many rank-one seed sets at once.

    ``alphas`` has shape ``(m, n)`` and ``psis`` ``(m, n, d, d)``; each seed
    set must be normalized.
    """
    d = psis.shape[-2]
    M = np.einsum("mnab,mncb->mnac", psis, psis.conj())
    pur = np.real(np.einsum("mnab,mnba->mn", M, M))
    return (np.sum(alphas * pur, axis=1) - 1.0) / (d * d - 1)
