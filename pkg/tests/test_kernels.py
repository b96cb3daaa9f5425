import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stabletransfer import kernels
from stabletransfer._accel import HAVE_NUMBA


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 40), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_exp_sum_matches_direct(d, P, K, seed):
    rng = np.random.default_rng(seed)
    im = rng.normal(size=(P, d))
    re = rng.normal(size=(P, d)) * 0.3
    x = rng.normal(size=(K, d))
    c = rng.normal(size=K) + 1j * rng.normal(size=K)
    want = np.exp((re + 1j * im) @ x.T) @ c
    for b in ["numpy"] + (["numba"] if HAVE_NUMBA else []):
        assert np.allclose(kernels.exp_sum(im, x, c, 1.0, re, backend=b), want, rtol=1e-12, atol=1e-12)


def test_gram_backends_agree(backend):
    rng = np.random.default_rng(0)
    v = rng.normal(size=(6, 50)) + 1j * rng.normal(size=(6, 50))
    w = rng.random(50)
    G = kernels.hermitian_gram(v, w, backend=backend)
    assert np.allclose(G, (v * w) @ v.conj().T, atol=1e-12)
    assert np.allclose(G, G.conj().T)


def test_interp_exact_on_multilinear(backend):
    n = 11
    nodes = -1 + 0.2 * np.arange(n)
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    samples = (1 + 2 * X - Y + 3 * X * Y).astype(np.complex128)
    pts = np.random.default_rng(1).uniform(-1, 1, (40, 2))
    got = kernels.multilinear_interp(samples, -1.0, 0.2, pts, backend=backend)
    want = 1 + 2 * pts[:, 0] - pts[:, 1] + 3 * pts[:, 0] * pts[:, 1]
    assert np.allclose(got, want, atol=1e-12)


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.hermitian_gram(np.ones((1, 1)), np.ones(1), backend="cuda")


@pytest.mark.skipif(HAVE_NUMBA, reason="numba active")
def test_numba_request_without_numba():
    with pytest.raises(RuntimeError):
        kernels.hermitian_gram(np.ones((1, 1)), np.ones(1), backend="numba")
