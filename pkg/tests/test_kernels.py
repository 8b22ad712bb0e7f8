"""Both kernel backends must agree bit for bit."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conformal_lab import kernels
from conformal_lab.ifs import validate_ifs

from conftest import C3_MAPS, Q_MAPS

BACKENDS = kernels.available_backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled core not built")

SYSTEMS = {
    "c3": (C3_MAPS, (0.5, 0.5)),
    "q": (Q_MAPS, (0.3, 0.7)),
    "moebius3": (("x/(2+x)", "(x+1)/(x+3)", "-x/4 + 0.5"), (0.2, 0.3, 0.5)),
}


def _prog(name):
    maps, probs = SYSTEMS[name]
    ifs = validate_ifs(maps, probs)
    return ifs.program, ifs.probs


def _same(a, b):
    if isinstance(a, tuple):
        assert len(a) == len(b)
        for x, y in zip(a, b):
            _same(x, y)
    else:
        assert np.array_equal(np.asarray(a), np.asarray(b))


def _both(fn, *args):
    py = fn(*args, impl=BACKENDS["python"])
    cy = fn(*args, impl=BACKENDS["cython"])
    _same(py, cy)
    return py


@needs_both
@pytest.mark.parametrize("name", SYSTEMS)
def test_point_chain_parity(name):
    prog, _ = _prog(name)
    rng = np.random.default_rng(1)
    m = prog.n_maps
    for length in (1, 3, 9):
        word = rng.integers(0, m, size=length)
        _both(kernels.point_chain, prog, word, rng.random(50))


@needs_both
@pytest.mark.parametrize("name", SYSTEMS)
def test_log_derivative_parity(name):
    prog, _ = _prog(name)
    rng = np.random.default_rng(2)
    words = rng.integers(0, prog.n_maps, size=(40, 12))
    lengths = rng.integers(1, 13, size=40)
    for x0 in (0.0, 0.3, 1.0):
        _both(kernels.log_derivative_chain, prog, words, lengths, x0)


@needs_both
@pytest.mark.parametrize("name", SYSTEMS)
def test_interval_chain_parity(name):
    prog, _ = _prog(name)
    rng = np.random.default_rng(3)
    words = rng.integers(0, prog.n_maps, size=(30, 7))
    lengths = rng.integers(1, 8, size=30)
    los = rng.random(30) * 0.5
    his = los + rng.random(30) * 0.5
    _both(kernels.interval_chain_words, prog, words, lengths, los, his)


@needs_both
@pytest.mark.parametrize("name", SYSTEMS)
def test_word_sups_and_cut_set_parity(name):
    prog, probs = _prog(name)
    _both(kernels.word_sups, prog, 6, 10 ** 6)
    for n in (1, 5, 11):
        _both(kernels.cut_set, prog, probs, n, 10 ** 6)


@needs_both
@given(st.integers(2, 60), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_chebyshev_parity(rows, cols, seed):
    rng = np.random.default_rng(seed)
    feats = np.round(rng.random((rows, cols)), 3)
    i, j, d = _both(kernels.chebyshev_min, feats)
    brute = min(np.max(np.abs(feats[a] - feats[b])) for a in range(rows)
                for b in range(a + 1, rows))
    assert d == brute
    assert np.max(np.abs(feats[i] - feats[j])) == d
    I, J, D = _both(kernels.chebyshev_pairs, feats, 0.2)
    expect = {(a, b) for a in range(rows) for b in range(a + 1, rows)
              if np.max(np.abs(feats[a] - feats[b])) <= 0.2}
    assert set(zip(I.tolist(), J.tolist())) == expect


def test_backend_reported():
    import conformal_lab
    assert conformal_lab.BACKEND in ("cython", "python")
    assert "python" in BACKENDS
