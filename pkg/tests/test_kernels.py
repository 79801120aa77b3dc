"""The compiled and numpy kernels must agree bit for bit."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fsk import _pykernels, kernels

compiled = kernels.compiled_backend
needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
    assert (kernels.BACKEND == "cython") == (compiled is not None)


@needs_compiled
@settings(max_examples=60, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(3, 40), st.integers(3, 40))))
def test_lbp_backends_identical(g):
    assert np.array_equal(_pykernels.lbp_plane(g), np.asarray(compiled.lbp_plane(g)))


@needs_compiled
@settings(max_examples=60, deadline=None)
@given(
    arrays(np.uint8, st.tuples(st.integers(4, 40), st.integers(4, 40))),
    st.integers(2, 4),
    st.integers(2, 12),
)
def test_hog_backends_identical(g, cell, bins):
    a = _pykernels.hog_cell_histograms(g, cell, bins)
    b = np.asarray(compiled.hog_cell_histograms(g, cell, bins))
    assert a.shape == b.shape
    assert np.array_equal(a, b)


def test_wrappers_accept_non_contiguous():
    g = np.random.default_rng(0).integers(0, 256, (20, 30), dtype=np.uint8)
    view = g[:, ::2]
    assert np.array_equal(kernels.lbp_plane(view), _pykernels.lbp_plane(np.ascontiguousarray(view)))


def test_env_forces_fallback():
    env = dict(os.environ, FSK_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import fsk; print(fsk.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "python"
