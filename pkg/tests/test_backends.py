import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from toeplab import _backend, _pykernels
from toeplab.ensembles import EnsembleSpec, parse_family, sample_array
from toeplab.matrix_core import dense_eigvalsh

needs_cython = pytest.mark.skipif("cython" not in _backend.BACKENDS, reason="compiled kernels not built")


def test_python_backend_always_present():
    assert _backend.get("python") is _pykernels
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_env_forces_fallback():
    code = "from toeplab import _backend; print(_backend.NAME)"
    env = dict(os.environ, TOEPLAB_BACKEND="python")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_splitmix_reference_value():
    # splitmix64 with state 0: first output 0xE220A8397B1DCDAF
    u = _pykernels.splitmix_uniforms(0, 0, 1)[0]
    assert u == ((0xE220A8397B1DCDAF >> 11) + 0.5) * 2.0**-53


def test_splitmix_offsets_are_stream_positions():
    full = _pykernels.splitmix_uniforms(123, 0, 50)
    np.testing.assert_array_equal(_pykernels.splitmix_uniforms(123, 20, 30), full[20:])
    assert np.all((full > 0) & (full < 1))


def test_jacobi_fallback_matches_lapack(rng):
    a = rng.standard_normal((30, 30))
    a = a + a.T
    w, sweeps = _pykernels.jacobi_eigvalsh(a.copy())
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-12 * np.abs(a).sum())
    assert 0 < sweeps < 60


@needs_cython
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40), st.integers(0, 300))
def test_splitmix_backends_identical(key, start, count):
    c = _backend.get("cython").splitmix_uniforms(key, start, count)
    np.testing.assert_array_equal(c, _pykernels.splitmix_uniforms(key, start, count))


@needs_cython
@given(
    arrays(np.float64, st.integers(1, 60), elements=st.floats(-10, 10)),
    arrays(np.float64, st.integers(0, 40), elements=st.floats(-3, 3)),
)
def test_cosine_series_backends_agree(c, t):
    a = _backend.get("cython").cosine_series(c, t)
    b = _pykernels.cosine_series(c, t)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12 * max(1.0, np.abs(c).sum()))


@needs_cython
@pytest.mark.parametrize("n", [1, 2, 3, 8, 25, 64])
def test_jacobi_backends_agree(n, rng):
    a = rng.standard_normal((n, n))
    a = a + a.T
    wc, sc = dense_eigvalsh(a, backend="cython")
    wp, sp = dense_eigvalsh(a, backend="python")
    np.testing.assert_allclose(wc, wp, atol=1e-12 * max(1.0, np.abs(a).sum()))
    assert sc == sp


@needs_cython
def test_sampling_backends_identical():
    s = EnsembleSpec(parse_family("student_t:3"), master_seed=8)
    np.testing.assert_array_equal(sample_array(s, 500, 2, backend="cython"), sample_array(s, 500, 2, backend="python"))
