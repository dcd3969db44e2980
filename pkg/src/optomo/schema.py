"""JSON encoding of operators, testers, seeds, designs and simulation configs.

Encodings:

* complex scalar: ``[re, im]``
* matrix: ``{"rows": r, "cols": c, "data": [[[re, im], ...], ...]}`` (row-major)
* Choi operator: ``{"d_out", "d_in", "matrix"}``
* tester: ``{"sigma", "elements": [matrix, ...]}``
* seeds: ``{"alphas": [...], "psis": [matrix, ...]}``
* design: ``{"class", "d", "A", "beta", "eta", "psi"}`` (optional ``"B"``)
* realization: ``{"d_out", "d_in", "d_anc", "nu", "povm": [matrix, ...]}``
* simulation config: ``{"design" | "seeds", "choi", "shots", "rng_seed", "observables"}``
  plus ``"class"`` (required with ``"seeds"``) and optional ``"block_size"``;
  an observable is a matrix or ``{"name", "matrix"}``.

Floats are written with ``repr`` precision, so parse/serialize round trips
are exact.  Unknown fields raise :class:`~optomo.errors.ValidationError`.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from . import covopt
from .errors import ValidationError
from .simkit import SchemeSpec
from .tester import ChoiOp, Realization, SeedSet, Tester, make_tester

SEED_ENV = "OPTOMO_SEED"


def _fields(obj, required: set[str], optional: set[str] = frozenset(), what: str = "object") -> dict:
    if not isinstance(obj, dict):
        raise ValidationError(f"{what} must be a JSON object")
    keys = set(obj)
    unknown = keys - required - set(optional)
    if unknown:
        raise ValidationError(f"unknown field(s) in {what}: {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise ValidationError(f"missing field(s) in {what}: {sorted(missing)}")
    return obj


def _int(x, what: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ValidationError(f"{what} must be an integer")
    return x


def _num(x, what: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ValidationError(f"{what} must be a number")
    return float(x)


# --- scalars and matrices ------------------------------------------------

def complex_to_json(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def complex_from_json(v) -> complex:
    if not (isinstance(v, list) and len(v) == 2):
        raise ValidationError("complex scalar must be a [re, im] pair")
    return complex(_num(v[0], "real part"), _num(v[1], "imaginary part"))


def matrix_to_json(M) -> dict:
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2:
        raise ValidationError("matrix must be two-dimensional")
    data = np.stack([M.real, M.imag], axis=-1).tolist()
    return {"rows": M.shape[0], "cols": M.shape[1], "data": data}


def matrix_from_json(obj, what: str = "matrix") -> np.ndarray:
    _fields(obj, {"rows", "cols", "data"}, what=what)
    r, c = _int(obj["rows"], "rows"), _int(obj["cols"], "cols")
    if r < 1 or c < 1:
        raise ValidationError(f"{what} must have positive dimensions")
    data = obj["data"]
    if not (isinstance(data, list) and len(data) == r and all(isinstance(row, list) and len(row) == c for row in data)):
        raise ValidationError(f"{what} data does not match rows={r}, cols={c}")
    try:
        arr = np.array(data, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} entries must be [re, im] number pairs") from None
    if arr.shape != (r, c, 2) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for row in data for z in row for x in z
    ):
        raise ValidationError(f"{what} entries must be [re, im] number pairs")
    return arr[..., 0] + 1j * arr[..., 1]


# --- domain objects ------------------------------------------------------

def choi_to_json(R: ChoiOp) -> dict:
    return {"d_out": R.d_out, "d_in": R.d_in, "matrix": matrix_to_json(R.matrix)}


def choi_from_json(obj) -> ChoiOp:
    _fields(obj, {"d_out", "d_in", "matrix"}, what="choi")
    return ChoiOp(_int(obj["d_out"], "d_out"), _int(obj["d_in"], "d_in"), matrix_from_json(obj["matrix"]))


def tester_to_json(t: Tester) -> dict:
    return {"sigma": matrix_to_json(t.sigma), "elements": [matrix_to_json(e) for e in t.elements]}


def tester_from_json(obj) -> Tester:
    _fields(obj, {"sigma", "elements"}, what="tester")
    sigma = matrix_from_json(obj["sigma"], "sigma")
    if not isinstance(obj["elements"], list) or not obj["elements"]:
        raise ValidationError("tester needs a non-empty element list")
    E = np.array([matrix_from_json(e, "element") for e in obj["elements"]])
    d_in = sigma.shape[0]
    D = E.shape[1]
    if D % d_in:
        raise ValidationError("element size is not a multiple of the sigma size")
    t = make_tester(E, D // d_in, d_in)
    if np.abs(t.sigma - sigma).max() > 1e-9:
        raise ValidationError("stored sigma does not match the elements")
    return t


def seeds_to_json(s: SeedSet) -> dict:
    return {"alphas": [float(a) for a in s.alphas], "psis": [matrix_to_json(p) for p in s.psis]}


def seeds_from_json(obj) -> SeedSet:
    _fields(obj, {"alphas", "psis"}, what="seeds")
    if not isinstance(obj["alphas"], list) or not isinstance(obj["psis"], list):
        raise ValidationError("alphas and psis must be lists")
    alphas = [_num(a, "alpha") for a in obj["alphas"]]
    psis = [matrix_from_json(p, "psi") for p in obj["psis"]]
    if len({p.shape for p in psis}) > 1:
        raise ValidationError("all seed operators must share one shape")
    return SeedSet(np.array(alphas), np.array(psis))


def design_to_json(des: covopt.CovariantDesign) -> dict:
    out = {"class": des.cls, "d": des.d, "A": des.A, "beta": des.beta, "eta": des.eta,
           "psi": matrix_to_json(des.psi)}
    if des.B is not None:
        out["B"] = des.B
    return out


def design_from_json(obj) -> covopt.CovariantDesign:
    _fields(obj, {"class", "d", "A", "beta", "eta", "psi"}, {"B"}, what="design")
    cls = obj["class"]
    if cls not in covopt.CLASSES:
        raise ValidationError(f"unknown class {cls!r}")
    d = _int(obj["d"], "d")
    psi = matrix_from_json(obj["psi"], "psi")
    if psi.shape != covopt.class_dims(cls, d):
        raise ValidationError(f"psi shape {psi.shape} does not fit class {cls!r} at d={d}")
    B = obj.get("B")
    return covopt.CovariantDesign(cls, d, _num(obj["A"], "A"), _num(obj["beta"], "beta"), psi,
                                  _num(obj["eta"], "eta"), None if B is None else _num(B, "B"))


def realization_to_json(r: Realization) -> dict:
    return {"d_out": r.d_out, "d_in": r.d_in, "d_anc": r.d_anc, "nu": matrix_to_json(r.nu),
            "povm": [matrix_to_json(p) for p in r.povm]}


def realization_from_json(obj) -> Realization:
    _fields(obj, {"d_out", "d_in", "d_anc", "nu", "povm"}, what="realization")
    if not isinstance(obj["povm"], list) or not obj["povm"]:
        raise ValidationError("realization needs a non-empty POVM list")
    return Realization(matrix_from_json(obj["nu"], "nu"),
                       np.array([matrix_from_json(p, "povm element") for p in obj["povm"]]),
                       _int(obj["d_out"], "d_out"), _int(obj["d_in"], "d_in"), _int(obj["d_anc"], "d_anc"))


# --- simulation config ---------------------------------------------------

def default_rng_seed() -> int:
    """Seed used when a config omits ``rng_seed``: ``$OPTOMO_SEED`` or 0."""
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def config_from_json(obj, rng_seed: int | None = None) -> tuple[SchemeSpec, ChoiOp]:
    """Parse a simulation config; ``rng_seed`` overrides the stored seed."""
    _fields(obj, {"choi", "shots", "observables"},
            {"design", "seeds", "class", "rng_seed", "block_size"}, what="config")
    if ("design" in obj) == ("seeds" in obj):
        raise ValidationError("config needs exactly one of 'design' or 'seeds'")
    if "design" in obj:
        des = design_from_json(obj["design"])
        seeds, cls = des.seeds, obj.get("class", des.cls)
    else:
        if "class" not in obj:
            raise ValidationError("a 'seeds' config must name its 'class'")
        seeds, cls = seeds_from_json(obj["seeds"]), obj["class"]
    shots = _int(obj["shots"], "shots")
    if shots < 1:
        raise ValidationError("shots must be at least 1")
    if rng_seed is None:
        rng_seed = _int(obj["rng_seed"], "rng_seed") if "rng_seed" in obj else default_rng_seed()
    if rng_seed < 0:
        raise ValidationError("rng_seed must be non-negative")
    if not isinstance(obj["observables"], list) or not obj["observables"]:
        raise ValidationError("config needs a non-empty observable list")
    names, mats = [], []
    for n, o in enumerate(obj["observables"]):
        if isinstance(o, dict) and "name" in o:
            _fields(o, {"name", "matrix"}, what="observable")
            if not isinstance(o["name"], str):
                raise ValidationError("observable name must be a string")
            names.append(o["name"])
            mats.append(matrix_from_json(o["matrix"], "observable"))
        else:
            names.append(f"A{n}")
            mats.append(matrix_from_json(o, "observable"))
    if len(set(names)) != len(names):
        raise ValidationError("observable names must be unique")
    kw = {}
    if "block_size" in obj:
        kw["block_size"] = _int(obj["block_size"], "block_size")
        if kw["block_size"] < 1:
            raise ValidationError("block_size must be positive")
    R = choi_from_json(obj["choi"])
    spec = SchemeSpec(seeds, cls, shots, rng_seed, tuple(mats), tuple(names), **kw)
    return spec, R


def config_to_json(spec: SchemeSpec, R: ChoiOp) -> dict:
    return {"seeds": seeds_to_json(spec.seeds), "class": spec.cls, "choi": choi_to_json(R),
            "shots": spec.shots, "rng_seed": spec.rng_seed, "block_size": spec.block_size,
            "observables": [{"name": n, "matrix": matrix_to_json(A)}
                            for n, A in zip(spec.names, spec.observables)]}


# --- files ---------------------------------------------------------------

def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def load(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
