"""Monte Carlo simulation of the randomized double-Bell-measurement scheme.

The scheme: two ancillas ``A1 A2`` are prepared in ``|Psi>>``; the two legs
``S1`` (output) and ``S2`` (input) of the Choi state are rotated by Haar
random unitaries ``g`` and ``h``; then ``(A1, S1)`` and ``(A2, S2)`` are each
measured in the Bell basis ``|U_mn>> / sqrt(d)``.  Contracting the ancillas
gives the tester on ``out (x) in``

    Pi_{mnpq}(g, h) = (g^dag (x) h^dag) |M_{mnpq}>><<M_{mnpq}| (g (x) h) / d^3,
    M_{mnpq} = U_mn^T conj(Psi) U_pq,

which sums to ``I (x) I / d`` for every ``(g, h)``.  Each shot draws a fresh
``(g, h)``, samples an outcome from ``Tr[R Pi]`` and records the optimal-dual
estimate ``<<Delta|A>>`` of every requested observable.

Shots are grouped into fixed-size blocks; block ``b`` draws all its
randomness from ``substream(rng_seed, b)``, so any partition of the blocks
into shards merges back into exactly the single-stream result.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import covopt
from .errors import IncompleteError, ValidationError
from .kernels import get_backend
from .opalg import haar_unitary, is_hermitian, is_unitary, make_rng, substream, weyl_basis
from .tester import ChoiOp, SeedSet, Tester, make_tester

BLOCK_SIZE = 16384
PSUM_TOL = 1e-8
NEG_PROB_TOL = 1e-12


# ---------------------------------------------------------------------------
# the physical scheme

def scheme_tester(psi: np.ndarray, g: np.ndarray, h: np.ndarray, ancilla: str = "psi") -> Tester:
    """Tester of one round of the scheme for fixed local unitaries ``g``, ``h``.

    Computed by explicit contraction of the ancilla state with the two
    rotated Bell measurements.  ``ancilla="conj"`` prepares ``conj(Psi)``
    instead of ``Psi``.
    """
    psi = np.asarray(psi, dtype=complex)
    d = psi.shape[0]
    if psi.shape != (d, d) or abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise ValidationError("seed must be a unit-norm square matrix")
    if not (is_unitary(g) and is_unitary(h)):
        raise ValidationError("local unitaries must be unitary")
    if ancilla == "conj":
        psi = psi.conj()
    elif ancilla != "psi":
        raise ValueError("ancilla must be 'psi' or 'conj'")
    bell = weyl_basis(d) / np.sqrt(d)                     # [mn, a, s]
    # effective vectors (I (x) g^dag)|U>> of the rotated measurement on (A, S)
    phi1 = np.einsum("kas,st->kat", bell, g.conj())
    phi2 = np.einsum("kas,st->kat", bell, h.conj())
    # amplitude chi[k, l, s1, s2] = sum conj(Psi[a1, a2]) phi1[k, a1, s1] phi2[l, a2, s2]
    chi = np.einsum("xy,kxs,lyt->klst", psi.conj(), phi1, phi2).reshape(d ** 4, d * d)
    E = np.einsum("ia,ib->iab", chi, chi.conj()) / d
    return make_tester(E, d, d)


def scheme_elements(seeds: SeedSet, ancilla: str = "psi") -> tuple[np.ndarray, np.ndarray]:
    """Base (``g = h = I``) elements ``w_e |M_e>><<M_e|`` of the scheme.

    Several seeds are realized by choosing seed ``s`` with probability
    ``alpha_s / d`` in each shot.  Returns ``(M, w)`` with rows ``|M_e>>``.
    """
    d = seeds.d_out
    if seeds.d_in != d:
        raise ValidationError("the scheme needs square seeds")
    U = weyl_basis(d)
    Ms, ws = [], []
    for alpha, psi in zip(seeds.alphas, seeds.psis):
        anc = psi.conj() if ancilla == "psi" else psi
        M = np.einsum("mba,bc,pcd->mpad", U, anc, U).reshape(d ** 4, d * d)
        Ms.append(M)
        ws.append(np.full(d ** 4, alpha / d ** 4))
    return np.concatenate(Ms), np.concatenate(ws)


def class_pinv_superop(coef: covopt.BlockCoefficients, cls: str) -> np.ndarray:
    """``Q_V Xt^+ Q_V`` as a dense superoperator matrix."""
    blocks = covopt.schur_projectors(coef.d_out, coef.d_in)
    vals = coef.values()
    out = np.zeros_like(blocks[1])
    for k in covopt._CLASS_BLOCKS[cls]:
        if blocks.ranks[k - 1] == 0:
            continue
        c = vals[k - 1]
        if not (c > 1e-12):
            raise IncompleteError(f"design does not cover block P{k} required by class {cls!r}")
        out = out + blocks[k] / c
    return out


def check_class_member(R: ChoiOp, cls: str) -> None:
    ok = {"qo": R.is_operation, "channel": R.is_channel, "unital": R.is_unital}[cls]()
    if not ok:
        raise ValidationError(f"Choi operator is not a valid member of class {cls!r}")


# ---------------------------------------------------------------------------
# specification and results

@dataclass(frozen=True)
class SchemeSpec:
    seeds: SeedSet
    cls: str
    shots: int
    rng_seed: int
    observables: tuple[np.ndarray, ...]
    names: tuple[str, ...] = ()
    block_size: int = BLOCK_SIZE
    ancilla: str = "psi"

    def __post_init__(self):
        if self.shots < 1:
            raise ValidationError("shot count must be positive")
        if self.cls not in covopt.PROCESS_CLASSES:
            raise ValidationError(f"simulation supports classes {covopt.PROCESS_CLASSES}")
        obs = tuple(np.asarray(a, dtype=complex) for a in self.observables)
        object.__setattr__(self, "observables", obs)
        names = tuple(self.names) or tuple(f"A{n}" for n in range(len(obs)))
        if len(names) != len(obs):
            raise ValidationError("one name per observable is required")
        object.__setattr__(self, "names", names)

    @classmethod
    def from_design(cls, design: covopt.CovariantDesign, shots: int, rng_seed: int,
                    observables, names=(), **kw) -> "SchemeSpec":
        return cls(design.seeds, design.cls, shots, rng_seed, tuple(observables), tuple(names), **kw)

    @property
    def d(self) -> int:
        return self.seeds.d_out

    @property
    def n_blocks(self) -> int:
        return -(-self.shots // self.block_size)


@dataclass(frozen=True)
class ShotRecord:
    index: int
    seed_index: int | None
    outcome: tuple[int, int, int, int] | None
    g: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


@dataclass
class BlockStats:
    """Per-block running moments; merged in block order."""

    n: int
    mean: np.ndarray
    m2: np.ndarray
    eta_mean: float
    eta_m2: float
    nulls: int
    block_vars: list = field(default_factory=list)

    def merge(self, other: "BlockStats") -> "BlockStats":
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.n * other.n / n)
        de = other.eta_mean - self.eta_mean
        eta_mean = self.eta_mean + de * (other.n / n)
        eta_m2 = self.eta_m2 + other.eta_m2 + de ** 2 * (self.n * other.n / n)
        return BlockStats(n, mean, m2, eta_mean, eta_m2, self.nulls + other.nulls,
                          self.block_vars + other.block_vars)


@dataclass(frozen=True)
class SimReport:
    cls: str
    d: int
    shots: int
    rng_seed: int
    names: tuple[str, ...]
    observables: tuple[np.ndarray, ...] = field(repr=False)
    means: np.ndarray = field(repr=False)
    ses: np.ndarray = field(repr=False)
    variances: np.ndarray = field(repr=False)
    variance_ses: np.ndarray = field(repr=False)
    truths: np.ndarray = field(repr=False)
    eta_hat: float = math.nan
    eta_se: float = math.nan
    eta_analytic: float = math.nan
    null_fraction: float = 0.0

    @property
    def z_scores(self) -> np.ndarray:
        diff = self.means - self.truths
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.ses > 0, diff / np.where(self.ses > 0, self.ses, 1.0),
                         np.where(diff == 0, 0.0, np.inf * np.sign(diff)))
        return z

    def to_dict(self) -> dict:
        """JSON-ready summary; non-finite numbers become ``null``."""
        rows = []
        for n, name in enumerate(self.names):
            rows.append({"name": name, "mean": _finite(self.means[n]), "se": _finite(self.ses[n]),
                         "truth": _finite(self.truths[n]), "z": _finite(self.z_scores[n]),
                         "variance": _finite(self.variances[n]),
                         "variance_se": _finite(self.variance_ses[n])})
        return {"class": self.cls, "d": self.d, "shots": self.shots, "rng_seed": self.rng_seed,
                "eta_hat": _finite(self.eta_hat), "eta_se": _finite(self.eta_se),
                "eta_analytic": _finite(self.eta_analytic),
                "null_fraction": _finite(self.null_fraction), "observables": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["name", "mean", "se", "truth", "z"])
        for n, name in enumerate(self.names):
            w.writerow([name] + [f"{x:.17g}" for x in (self.means[n], self.ses[n], self.truths[n],
                                                      self.z_scores[n])])
        return buf.getvalue()


def _finite(x) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# simulation driver

@dataclass(frozen=True)
class _Prepared:
    d: int
    R: np.ndarray
    M: np.ndarray
    w: np.ndarray
    K: np.ndarray
    knorm2: np.ndarray
    obs: np.ndarray
    dep_cdf: np.ndarray
    expected_psum: float
    eta_analytic: float


def prepare(spec: SchemeSpec, R: ChoiOp) -> _Prepared:
    """Validate inputs and precompute base elements, duals and observables."""
    d = spec.d
    if (R.d_out, R.d_in) != (d, d):
        raise ValidationError(f"Choi operator must act on C^{d} (x) C^{d}")
    check_class_member(R, spec.cls)
    M, w = scheme_elements(spec.seeds, spec.ancilla)
    D = d * d
    E = w[:, None, None] * np.einsum("ea,eb->eab", M, M.conj())
    coef = covopt.block_coefficients(E, d, d)
    Xp = class_pinv_superop(coef, spec.cls)
    tr = w * np.einsum("ea,ea->e", M.conj(), M).real
    K = (d * (Xp @ E.reshape(len(E), -1).T).T / tr[:, None]).reshape(len(E), D, D)
    K = 0.5 * (K + K.conj().transpose(0, 2, 1))
    obs = np.array(spec.observables, dtype=complex).reshape(len(spec.observables), D, D)
    Q = covopt.class_projector(spec.cls, d, d)
    for name, A in zip(spec.names, obs):
        if not is_hermitian(A, 1e-10 * max(1.0, np.abs(A).max())):
            raise ValidationError(f"observable {name!r} must be Hermitian")
        v = A.reshape(-1)
        if np.linalg.norm(v - Q @ v) > 1e-9 * max(1.0, np.linalg.norm(v)):
            raise IncompleteError(f"observable {name!r} lies outside the {spec.cls} subspace")
    knorm2 = np.einsum("eab,eab->e", K.conj(), K).real
    dep_cdf = np.cumsum(tr / d)
    expected = float(np.trace(R.matrix).real) / d
    eta = covopt.eta_spectral(coef, spec.cls)
    return _Prepared(d, np.ascontiguousarray(R.matrix), np.ascontiguousarray(M), w,
                     np.ascontiguousarray(K), knorm2, np.ascontiguousarray(obs), dep_cdf, expected, eta)


def _draw(spec: SchemeSpec, block: int):
    n = min(spec.block_size, spec.shots - block * spec.block_size)
    rng = substream(spec.rng_seed, block)
    d = spec.d
    zg = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    zh = rng.standard_normal((n, d, d)) + 1j * rng.standard_normal((n, d, d))
    u = rng.random(n)
    u_dep = rng.random(n)
    return zg, zh, u, u_dep


def _run_block(spec: SchemeSpec, prep: _Prepared, block: int, backend) -> tuple:
    zg, zh, u, u_dep = _draw(spec, block)
    outcome, values, psum, pmin = backend.simulate_block(zg, zh, u, prep.R, prep.M, prep.w,
                                                         prep.K, prep.obs)
    if np.abs(psum - prep.expected_psum).max() > PSUM_TOL or psum.max() > 1 + PSUM_TOL:
        raise FloatingPointError("shot probabilities do not sum to the expected total")
    if pmin.min() < -NEG_PROB_TOL:
        raise FloatingPointError(f"negative outcome probability {pmin.min():.3e}")
    dep = np.minimum(np.searchsorted(prep.dep_cdf, u_dep, side="right"), len(prep.dep_cdf) - 1)
    eta_vals = prep.knorm2[dep]
    return outcome, values, eta_vals


def _stats(outcome, values, eta_vals, n_el) -> BlockStats:
    n = len(outcome)
    mean = values.mean(axis=0)
    m2 = ((values - mean) ** 2).sum(axis=0)
    em = float(eta_vals.mean())
    return BlockStats(n, mean, m2, em, float(((eta_vals - em) ** 2).sum()),
                      int(np.sum(outcome == n_el)), [m2 / max(n - 1, 1)])


def run_blocks(spec: SchemeSpec, R: ChoiOp, blocks, backend: str | None = None,
               workers: int = 1) -> list[BlockStats]:
    """Simulate the listed blocks; returns their statistics in the given order."""
    prep = prepare(spec, R)
    be = get_backend(backend)
    n_el = len(prep.M)

    def one(b):
        return _stats(*_run_block(spec, prep, b, be), n_el)

    blocks = list(blocks)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(one, blocks))
    return [one(b) for b in blocks]


def merge_stats(stats: list[BlockStats]) -> BlockStats:
    total = stats[0]
    for s in stats[1:]:
        total = total.merge(s)
    return total


def finalize(spec: SchemeSpec, R: ChoiOp, total: BlockStats) -> SimReport:
    prep = prepare(spec, R)
    n = total.n
    var = total.m2 / max(n - 1, 1)
    bv = np.array(total.block_vars)
    if len(bv) > 1:
        var_se = bv.std(axis=0, ddof=1) / math.sqrt(len(bv))
    else:
        var_se = np.full(len(var), np.nan)
    truths = np.einsum("ab,nba->n", prep.R, prep.obs).real
    eta_var = total.eta_m2 / max(n - 1, 1)
    return SimReport(spec.cls, spec.d, n, spec.rng_seed, spec.names, spec.observables,
                     total.mean, np.sqrt(var / n), var, var_se, truths,
                     total.eta_mean, math.sqrt(eta_var / n), prep.eta_analytic, total.nulls / n)


def run_simulation(spec: SchemeSpec, R: ChoiOp, design: covopt.CovariantDesign | None = None,
                   backend: str | None = None, workers: int = 1) -> SimReport:
    """Run ``spec.shots`` rounds of the scheme on the operation ``R``.

    When ``design`` is given its seed and class replace those of ``spec``.
    """
    if design is not None:
        spec = SchemeSpec(design.seeds, design.cls, spec.shots, spec.rng_seed, spec.observables,
                          spec.names, spec.block_size, spec.ancilla)
    stats = run_blocks(spec, R, range(spec.n_blocks), backend, workers)
    return finalize(spec, R, merge_stats(stats))


def record_shots(spec: SchemeSpec, R: ChoiOp, count: int, backend: str | None = None) -> list[ShotRecord]:
    """Per-shot records of the first ``count`` shots of the stream."""
    prep = prepare(spec, R)
    be = get_backend(backend)
    from ._kernels_py import gram_schmidt
    d = spec.d
    n_el = len(prep.M)
    records = []
    b = 0
    while len(records) < count and b < spec.n_blocks:
        zg, zh, u, _ = _draw(spec, b)
        outcome, values, _, _ = be.simulate_block(zg, zh, u, prep.R, prep.M, prep.w, prep.K, prep.obs)
        a, bb = gram_schmidt(zg), gram_schmidt(zh)
        for j in range(len(outcome)):
            if len(records) == count:
                break
            e = int(outcome[j])
            if e == n_el:
                s_idx, quad = None, None
            else:
                s_idx, r = divmod(e, d ** 4)
                quad = tuple(int(x) for x in np.unravel_index(r, (d, d, d, d)))
            records.append(ShotRecord(b * spec.block_size + j, s_idx, quad,
                                      a[j].conj().T, bb[j].conj().T, values[j].copy()))
        b += 1
    return records


def empirical_variance(report: SimReport, A, R: ChoiOp | None = None) -> float:
    """Sample variance of the estimator of observable ``A`` (name or matrix)."""
    idx = _lookup(report, A)
    if R is not None:
        truth = float(np.real(np.trace(R.matrix @ report.observables[idx])))
        if abs(truth - report.truths[idx]) > 1e-9:
            raise ValidationError("report was produced for a different operation")
    return float(report.variances[idx])


def _lookup(report: SimReport, A) -> int:
    if isinstance(A, str):
        if A in report.names:
            return report.names.index(A)
    else:
        A = np.asarray(A)
        for n, B in enumerate(report.observables):
            if B.shape == A.shape and np.allclose(A, B, atol=1e-12):
                return n
    raise KeyError("observable was not part of the simulation")


def analytic_variance(spec: SchemeSpec, R: ChoiOp, A: np.ndarray, samples: int = 10_000,
                      seed: int = 0) -> tuple[float, float]:
    """Quadrature estimate of the estimator variance for observable ``A``.

    Averages ``sum_i Tr[R Pi_i] <<Delta_i|A>>^2`` over ``samples`` fixed Haar
    pairs, building each tester by explicit contraction
    (:func:`scheme_tester`) and each dual densely.  Returns
    ``(delta, standard_error)``.
    """
    d = spec.d
    A = np.asarray(A, dtype=complex)
    seeds = spec.seeds
    coef = covopt.block_coefficients(seeds)
    Xp = class_pinv_superop(coef, spec.cls)
    rng = make_rng(seed)
    truth = float(np.real(np.trace(R.matrix @ A)))
    acc = np.empty(samples)
    for s in range(samples):
        g, h = haar_unitary(d, rng), haar_unitary(d, rng)
        tot = 0.0
        for alpha, psi in zip(seeds.alphas, seeds.psis):
            E = scheme_tester(psi, g, h, spec.ancilla).elements * (alpha / d)
            v = E.reshape(len(E), -1)
            tr = np.einsum("iaa->i", E).real
            Dl = (Xp @ v.T).T * (d / tr)[:, None]
            c = (Dl.conj() @ A.reshape(-1)).real
            p = np.einsum("ab,iba->i", R.matrix, E).real
            tot += float(np.sum(p * c ** 2))
        acc[s] = tot
    return float(acc.mean() - truth ** 2), float(acc.std(ddof=1) / math.sqrt(samples))
