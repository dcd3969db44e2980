import os
import subprocess
import sys

import numpy as np
import pytest

from optomo import covopt, kernels, simkit
from optomo.opalg import make_rng
from optomo.tester import random_operation

BACKENDS = kernels.available_backends()


def block_inputs(n=500, seed=0):
    rng = make_rng(seed)
    spec = simkit.SchemeSpec.from_design(covopt.optimize_class("qo", 2), n, seed,
                                         [np.diag([1.0, -1.0, -1.0, 1.0]), np.eye(4)])
    prep = simkit.prepare(spec, random_operation(2, rng))
    zg, zh, u, _ = simkit._draw(spec, 0)
    return zg, zh, u, prep.R, prep.M, prep.w, prep.K, prep.obs


@pytest.mark.parametrize("backend", BACKENDS)
def test_backend_matches_reference(backend):
    args = block_inputs()
    ref = kernels.get_backend("numpy").simulate_block(*args)
    out = kernels.get_backend(backend).simulate_block(*args)
    np.testing.assert_array_equal(out[0], ref[0])
    for a, b in zip(out[1:], ref[1:]):
        np.testing.assert_allclose(a, b, atol=1e-12)
    # trace-decreasing input exercises the no-click outcome
    assert np.any(ref[0] == len(args[4]))


def test_gram_schmidt_is_unitary():
    from optomo._kernels_py import gram_schmidt
    rng = make_rng(1)
    z = rng.standard_normal((50, 3, 3)) + 1j * rng.standard_normal((50, 3, 3))
    q = gram_schmidt(z)
    np.testing.assert_allclose(np.einsum("nab,nac->nbc", q.conj(), q), np.broadcast_to(np.eye(3), (50, 3, 3)),
                               atol=1e-12)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_environment_forces_numpy_fallback():
    env = dict(os.environ, OPTOMO_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import optomo.kernels as k; print(k.DEFAULT_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"


def test_compiled_backend_is_default_when_built():
    if "cython" in BACKENDS and not os.environ.get("OPTOMO_PURE_PYTHON"):
        assert kernels.DEFAULT_BACKEND == "cython"
