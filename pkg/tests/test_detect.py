import itertools

import numpy as np
import pytest
from conftest import awgn, metric, rayleigh

from mimodet.channel import NoiseSpec
from mimodet.detect import (
    DetectorSpec,
    GuardExceededError,
    detect_ml,
    detect_mmse,
    detect_sphere,
    detect_vblast,
    detect_zf,
    run_detector,
)
from mimodet.modem import build_constellation
from mimodet.numerics import RankDeficientError, SingularMatrixError, pseudo_inverse

C4 = build_constellation(4)
C16 = build_constellation(16)
NOISELESS = NoiseSpec(0.0)


def _instance(rng, nr, nt, c, snr_db=None):
    h = rayleigh(rng, nr, nt)
    x = rng.integers(0, c.order, nt)
    y = h @ c.points[x]
    if snr_db is not None:
        y = y + awgn(rng, nr, nt / 10 ** (snr_db / 10))
    return h, x, y


# ---------------------------------------------------------------- linear

def test_zf_noiseless_recovers_exactly():
    rng = np.random.default_rng(0)
    h, x, y = _instance(rng, 4, 4, C4)
    np.testing.assert_array_equal(detect_zf(y, h, C4).estimate, x)


def test_zf_scaled_identity():
    x = np.array([1, 3])
    y = 2.0 * C4.points[x]
    np.testing.assert_array_equal(detect_zf(y, 2.0 * np.eye(2), C4).estimate, x)


def test_zf_noiseless_seeded_sweep():
    rng = np.random.default_rng(12)
    for _ in range(1000):
        h, x, y = _instance(rng, 4, 4, C4)
        assert np.array_equal(detect_zf(y, h, C4).estimate, x)


def test_zf_receive_scaling_invariance():
    rng = np.random.default_rng(13)
    h, x, y = _instance(rng, 4, 4, C4, snr_db=8.0)
    base = detect_zf(y, h, C4).estimate
    for alpha in (2.0, 0.5j, -3 + 1j):
        np.testing.assert_array_equal(detect_zf(alpha * y, alpha * h, C4).estimate, base)


def test_mmse_reduces_to_zf_at_zero_noise():
    rng = np.random.default_rng(14)
    for _ in range(50):
        h, x, y = _instance(rng, 4, 4, C4, snr_db=10.0)
        np.testing.assert_array_equal(detect_mmse(y, h, NOISELESS, C4).estimate, detect_zf(y, h, C4).estimate)


def test_mmse_scalar_shrinkage():
    y = np.array([(1 + 1j) / np.sqrt(2)])
    h = np.array([[1.0 + 0j]])
    r = detect_mmse(y, h, NoiseSpec(1.0), C4)
    # filter output y/2 keeps the quadrant
    assert r.estimate[0] == 3
    assert C4.points[r.estimate[0]] == pytest.approx((1 + 1j) / np.sqrt(2))


def test_mmse_matches_direct_formula():
    rng = np.random.default_rng(15)
    for _ in range(50):
        h, x, y = _instance(rng, 2, 2, C4, snr_db=6.0)
        sigma2 = 2 / 10 ** 0.6
        soft = np.linalg.solve(h.conj().T @ h + sigma2 * np.eye(2), h.conj().T @ y)
        d = np.abs(soft[:, None] - C4.points[None, :])
        np.testing.assert_array_equal(detect_mmse(y, h, NoiseSpec(sigma2), C4).estimate, np.argmin(d, axis=1))


def test_mmse_zero_noise_rank_deficient_raises():
    h = np.ones((4, 2), dtype=complex)
    with pytest.raises(SingularMatrixError):
        detect_mmse(np.ones(4, dtype=complex), h, NOISELESS, C4)
    # regularized case is fine
    detect_mmse(np.ones(4, dtype=complex), h, NoiseSpec(0.5), C4)


def test_mmse_converges_to_zf_for_tiny_sigma():
    rng = np.random.default_rng(16)
    for _ in range(100):
        h, x, y = _instance(rng, 4, 4, C16, snr_db=14.0)
        np.testing.assert_array_equal(
            detect_mmse(y, h, NoiseSpec(1e-12), C16).estimate, detect_zf(y, h, C16).estimate
        )


# ---------------------------------------------------------------- ml

def test_ml_scalar_equals_slice():
    y = np.array([0.9 + 0.8j])
    got = detect_ml(y, np.array([[1.0 + 0j]]), C4).estimate
    assert C4.points[got[0]] == pytest.approx((1 + 1j) / np.sqrt(2))


def test_ml_noiseless_exact():
    rng = np.random.default_rng(17)
    for _ in range(100):
        h, x, y = _instance(rng, 3, 3, C4)
        np.testing.assert_array_equal(detect_ml(y, h, C4).estimate, x)


def test_ml_against_explicit_candidate_table():
    rng = np.random.default_rng(18)
    for _ in range(200):
        h = rayleigh(rng, 2, 2)
        y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        table = list(itertools.product(range(4), repeat=2))
        metrics = [metric(y, h, C4.points[list(cand)]) for cand in table]
        expected = np.array(table[int(np.argmin(metrics))])
        np.testing.assert_array_equal(detect_ml(y, h, C4).estimate, expected)


def test_ml_guard():
    with pytest.raises(GuardExceededError, match=r"68719476736.*1000000"):
        detect_ml(np.zeros(6, dtype=complex), np.eye(6, dtype=complex), build_constellation(64))
    detect_ml(np.zeros(2, dtype=complex), np.eye(2, dtype=complex), C4, guard=16)
    with pytest.raises(GuardExceededError):
        detect_ml(np.zeros(2, dtype=complex), np.eye(2, dtype=complex), C4, guard=15)


# ---------------------------------------------------------------- sphere

def test_sphere_equals_ml_on_random_instances():
    rng = np.random.default_rng(19)
    for nt, m in ((2, 4), (3, 4), (4, 4), (2, 16), (3, 16)):
        c = build_constellation(m)
        for _ in range(120):
            h, x, y = _instance(rng, nt, nt, c, snr_db=rng.uniform(0, 20))
            a = detect_ml(y, h, c).estimate
            b = detect_sphere(y, h, c).estimate
            np.testing.assert_array_equal(a, b)
            assert metric(y, h, c.points[a]) == metric(y, h, c.points[b])


def test_sphere_noiseless_zero_metric():
    rng = np.random.default_rng(20)
    h, x, y = _instance(rng, 4, 4, C4)
    r = detect_sphere(y, h, C4)
    np.testing.assert_array_equal(r.estimate, x)
    assert metric(y, h, C4.points[r.estimate]) == 0.0


def test_sphere_node_visits_bounded():
    rng = np.random.default_rng(21)
    visits = []
    space = 16**3
    for _ in range(300):
        h, x, y = _instance(rng, 3, 3, C16, snr_db=20.0)
        r = detect_sphere(y, h, C16)
        assert 1 <= r.node_visits <= space
        visits.append(r.node_visits)
    # at high SNR the search is far below exhaustive on average
    assert np.mean(visits) < 0.5 * space


def test_sphere_rank_deficient():
    h = np.ones((4, 2), dtype=complex)
    with pytest.raises(RankDeficientError):
        detect_sphere(np.ones(4, dtype=complex), h, C4)


# ---------------------------------------------------------------- v-blast

def test_vblast_ordering_closed_form():
    # pseudoinverse rows of diag(1, 3) have squared norms 1 and 1/9: antenna 1 first
    h = np.array([[1.0, 0.0], [0.0, 3.0]], dtype=complex)
    y = h @ C4.points[[2, 1]]
    r = detect_vblast(y, h, NOISELESS, C4, criterion="zf")
    np.testing.assert_array_equal(r.trace.order, [1, 0])
    np.testing.assert_array_equal(r.estimate, [2, 1])


def test_vblast_noiseless_exact_and_cancels_to_zero():
    rng = np.random.default_rng(22)
    for criterion in ("zf", "mmse"):
        for _ in range(100):
            h, x, y = _instance(rng, 4, 4, C4)
            r = detect_vblast(y, h, NOISELESS, C4, criterion=criterion)
            np.testing.assert_array_equal(r.estimate, x)
            resid = y - h @ C4.points[r.estimate]
            assert np.abs(resid).max() == 0.0


def test_vblast_trace_is_audit_sufficient():
    # replaying the documented procedure from the trace reproduces the estimate
    rng = np.random.default_rng(23)
    for _ in range(50):
        h, x, y = _instance(rng, 4, 4, C4, snr_db=10.0)
        r = detect_vblast(y, h, NOISELESS, C4, criterion="zf")
        assert sorted(r.trace.order) == [0, 1, 2, 3]
        active = list(range(4))
        resid = y.copy()
        replay = np.zeros(4, dtype=int)
        for k, z in zip(r.trace.order, r.trace.per_layer_soft):
            g = pseudo_inverse(h[:, active])
            row = g[active.index(k)]
            np.testing.assert_allclose(row @ resid, z, atol=1e-9)
            d = np.abs(C4.points - z)
            replay[k] = int(np.argmin(d * d))
            resid = resid - h[:, k] * C4.points[replay[k]]
            active.remove(k)
        np.testing.assert_array_equal(replay, r.estimate)


def _vblast_oracle(y, h, sigma2, points, use_mmse):
    """Independent reimplementation of the SIC procedure on np.linalg
    (SVD pseudoinverse), sharing no code with the kernels."""
    nt = h.shape[1]
    active = list(range(nt))
    est = np.zeros(nt, dtype=np.int64)
    order = []
    r = y.astype(complex)
    while active:
        ha = h[:, active]
        if use_mmse:
            p = np.linalg.inv(ha.conj().T @ ha + sigma2 * np.eye(len(active)))
            j = int(np.argmin(np.diag(p).real))
            w = (p @ ha.conj().T)[j]
        else:
            g = np.linalg.pinv(ha)
            j = int(np.argmin(np.sum(np.abs(g) ** 2, axis=1)))
            w = g[j]
        k = active[j]
        z = w @ r
        e = int(np.argmin(np.abs(points - z) ** 2))
        est[k] = e
        order.append(k)
        r = r - h[:, k] * points[e]
        active.remove(k)
    return est, np.array(order)


@pytest.mark.parametrize("criterion", ["zf", "mmse"])
def test_vblast_matches_independent_oracle(criterion):
    rng = np.random.default_rng(26)
    for m, nt, nr in ((4, 4, 4), (16, 6, 12)):
        c = build_constellation(m)
        for _ in range(150):
            h, x, y = _instance(rng, nr, nt, c, snr_db=rng.uniform(4, 16))
            sigma2 = nt / 10 ** (rng.uniform(0.4, 1.6))
            got = detect_vblast(y, h, NoiseSpec(sigma2), c, criterion=criterion)
            est, order = _vblast_oracle(y, h, sigma2, c.points, criterion == "mmse")
            np.testing.assert_array_equal(got.estimate, est)
            np.testing.assert_array_equal(got.trace.order, order)


def test_vblast_mmse_ordering_matches_zf_in_zero_noise_limit():
    rng = np.random.default_rng(24)
    for _ in range(1000):
        h, x, y = _instance(rng, 4, 4, C4, snr_db=12.0)
        a = detect_vblast(y, h, NoiseSpec(1e-12), C4, criterion="mmse")
        b = detect_vblast(y, h, NOISELESS, C4, criterion="zf")
        np.testing.assert_array_equal(a.trace.order, b.trace.order)


def test_vblast_rank_deficient_zf():
    h = np.ones((4, 2), dtype=complex)
    with pytest.raises(RankDeficientError):
        detect_vblast(np.ones(4, dtype=complex), h, NOISELESS, C4, criterion="zf")
    # mmse with real noise regularizes fine
    detect_vblast(np.ones(4, dtype=complex), h, NoiseSpec(0.5), C4, criterion="mmse")


def test_vblast_bad_criterion():
    with pytest.raises(ValueError, match="criterion"):
        detect_vblast(np.zeros(2, dtype=complex), np.eye(2, dtype=complex), NOISELESS, C4, criterion="map")


# ---------------------------------------------------------------- shared

def test_noiseless_exactness_all_detectors():
    rng = np.random.default_rng(25)
    specs = [DetectorSpec(n) for n in ("zf", "mmse", "ml", "sphere", "vblast-zf", "vblast-mmse")]
    for _ in range(200):
        h, x, y = _instance(rng, 4, 4, C4)
        for spec in specs:
            assert np.array_equal(run_detector(spec, y, h, NOISELESS, C4).estimate, x), spec.algorithm


def test_detector_spec_validation():
    with pytest.raises(ValueError, match="unknown detector"):
        DetectorSpec("viterbi")
    with pytest.raises(ValueError, match="guard"):
        DetectorSpec("ml", ml_candidate_guard=0)


def test_dimension_validation():
    with pytest.raises(ValueError, match="nr >= nt"):
        detect_zf(np.zeros(2, dtype=complex), np.ones((2, 3), dtype=complex), C4)
    with pytest.raises(ValueError, match="length"):
        detect_zf(np.zeros(3, dtype=complex), np.ones((2, 2), dtype=complex), C4)
