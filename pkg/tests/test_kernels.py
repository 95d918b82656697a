"""Cross-backend equivalence: the compiled kernels and the numpy fallback
must produce identical estimates, orders and tie-breaks."""

import subprocess
import sys

import numpy as np
import pytest
from conftest import awgn, rayleigh

from mimodet import _pykernels as pk
from mimodet import kernels
from mimodet.modem import build_constellation
from mimodet.numerics import RankDeficientError, SingularMatrixError

ck = pytest.importorskip("mimodet._ckernels")

SIZES = [(2, 2, 4), (4, 4, 4), (6, 12, 4), (2, 2, 16), (3, 6, 16), (2, 4, 64)]


def _noisy_instance(rng, nr, nt, c):
    h = rayleigh(rng, nr, nt)
    x = rng.integers(0, c.order, nt)
    y = h @ c.points[x] + awgn(rng, nr, nt / 10 ** (rng.uniform(0, 2)))
    return h, y


@pytest.mark.parametrize("nt,nr,m", SIZES)
def test_linear_soft_parity(nt, nr, m):
    rng = np.random.default_rng(nt * 100 + nr + m)
    c = build_constellation(m)
    for sigma2 in (0.0, 0.3):
        for _ in range(30):
            h, y = _noisy_instance(rng, nr, nt, c)
            np.testing.assert_allclose(
                ck.linear_soft(y, h, sigma2), pk.linear_soft(y, h, sigma2), rtol=0, atol=1e-10
            )


@pytest.mark.parametrize("nt,nr,m", [(2, 2, 4), (3, 3, 4), (4, 4, 4), (2, 2, 16), (3, 4, 16), (2, 2, 64)])
def test_ml_and_sphere_parity(nt, nr, m):
    rng = np.random.default_rng(nt * 1000 + nr + m)
    c = build_constellation(m)
    for _ in range(60):
        h, y = _noisy_instance(rng, nr, nt, c)
        ml_c = ck.ml_search(y, h, c.points)
        ml_p = pk.ml_search(y, h, c.points)
        sp_c, v_c = ck.sphere_search(y, h, c.pam_levels, c.side)
        sp_p, v_p = pk.sphere_search(y, h, c.pam_levels, c.side)
        np.testing.assert_array_equal(ml_c, ml_p)
        np.testing.assert_array_equal(sp_c, ml_c)
        np.testing.assert_array_equal(sp_p, ml_p)
        assert 1 <= v_c <= m**nt
        assert 1 <= v_p <= m**nt


@pytest.mark.parametrize("nt,nr,m", SIZES)
@pytest.mark.parametrize("use_mmse", [False, True])
def test_vblast_parity(nt, nr, m, use_mmse):
    rng = np.random.default_rng(nt * 17 + nr * 3 + m + use_mmse)
    c = build_constellation(m)
    for _ in range(30):
        h, y = _noisy_instance(rng, nr, nt, c)
        sigma2 = 0.2 if use_mmse else 0.0
        est_c, ord_c, soft_c = ck.vblast(y, h, sigma2, c.points, use_mmse)
        est_p, ord_p, soft_p = pk.vblast(y, h, sigma2, c.points, use_mmse)
        np.testing.assert_array_equal(est_c, est_p)
        np.testing.assert_array_equal(ord_c, ord_p)
        np.testing.assert_allclose(soft_c, soft_p, rtol=0, atol=1e-9)


def test_error_types_match():
    c = build_constellation(4)
    h = np.ones((4, 2), dtype=complex)
    y = np.ones(4, dtype=complex)
    for mod in (ck, pk):
        with pytest.raises(SingularMatrixError):
            mod.linear_soft(y, h, 0.0)
        with pytest.raises(RankDeficientError):
            mod.sphere_search(y, h, c.pam_levels, c.side)
        with pytest.raises(RankDeficientError):
            mod.vblast(y, h, 0.0, c.points, False)


def test_ml_tie_break_lexicographic_both_backends():
    # y equidistant from all 4 points in each layer: expect all-zero indices
    c = build_constellation(4)
    y = np.zeros(2, dtype=complex)
    h = np.eye(2, dtype=complex)
    np.testing.assert_array_equal(ck.ml_search(y, h, c.points), [0, 0])
    np.testing.assert_array_equal(pk.ml_search(y, h, c.points), [0, 0])
    sp_c, _ = ck.sphere_search(y, h, c.pam_levels, c.side)
    sp_p, _ = pk.sphere_search(y, h, c.pam_levels, c.side)
    np.testing.assert_array_equal(sp_c, [0, 0])
    np.testing.assert_array_equal(sp_p, [0, 0])


def test_tie_rich_integer_instances_agree_everywhere():
    # structured channels with exact metric ties stress the shared tie-break
    c = build_constellation(4)
    rng = np.random.default_rng(77)
    for trial in range(600):
        kind = trial % 3
        if kind == 0:
            h = np.eye(2, dtype=complex) * rng.integers(1, 3)
            y = np.zeros(2, dtype=complex)
        elif kind == 1:
            h = np.array([[1, 1], [1, -1]], dtype=complex)
            y = np.array([rng.integers(-1, 2), rng.integers(-1, 2)], dtype=complex)
        else:
            h = np.array([[1j, 0], [0, 1j]], dtype=complex)
            y = c.points[rng.integers(0, 4, 2)] * 1j
        ml = ck.ml_search(y, h, c.points)
        np.testing.assert_array_equal(ml, pk.ml_search(y, h, c.points))
        np.testing.assert_array_equal(ml, ck.sphere_search(y, h, c.pam_levels, c.side)[0])
        np.testing.assert_array_equal(ml, pk.sphere_search(y, h, c.pam_levels, c.side)[0])


def test_backend_selection_env():
    assert kernels.backend() in ("cython", "python")
    out = subprocess.run(
        [sys.executable, "-c", "import mimodet.kernels as k; print(k.backend())"],
        env={"PATH": "/usr/bin:/bin", "MIMODET_BACKEND": "python"},
        capture_output=True,
        text=True,
        cwd="/",
    )
    assert out.stdout.strip() == "python"
