import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from symqnn.circuit import ParamCircuit
from symqnn.encoding import (
    TWO_PI,
    FeatureScaler,
    FitError,
    PointCloudSample,
    SignatureError,
    block_groups,
    encode_batch,
    euclidean_features,
    fit_scaler,
    flatten_baseline,
    inner_products_euclidean,
    inner_products_minkowski,
    minkowski_features,
    n_invariant_features,
    normalize_size,
    pair_list,
    z_feature_map,
)
from symqnn.statevector import apply_circuit, init_state
from symqnn.symmetry import Permutation

from oracle import lorentz_boost, random_rotation

finite = st.floats(-50, 50, allow_nan=False)


# --- samples --------------------------------------------------------------------


@pytest.mark.parametrize("points, label", [(np.array([[np.nan, 0.0]]), 1), (np.ones((2, 2)), 0),
                                           (np.empty((0, 2)), 1)])
def test_sample_validation(points, label):
    with pytest.raises(ValueError):
        PointCloudSample(points, label)


# --- Euclidean ---------------------------------------------------------------------


def test_orthonormal_pair():
    f = inner_products_euclidean(PointCloudSample([[1.0, 0.0], [0.0, 1.0]]), include_self=True)
    np.testing.assert_array_equal(f.self_block, [1, 1])
    np.testing.assert_array_equal(f.pair_block, [0])


@pytest.mark.parametrize("n, include_self, expected", [(4, True, 10), (4, False, 6), (3, True, 6), (2, False, 1)])
def test_feature_counts(n, include_self, expected, rng):
    f = inner_products_euclidean(PointCloudSample(rng.normal(size=(n, 2))), include_self)
    assert len(f) == expected == n_invariant_features(n, include_self)


def test_layout_self_then_lexicographic_pairs(rng):
    p = rng.normal(size=(4, 3))
    f = euclidean_features(p)
    expected = [p[i] @ p[i] for i in range(4)] + [p[i] @ p[j] for i, j in pair_list(4)]
    np.testing.assert_allclose(f, expected, rtol=1e-14)
    assert pair_list(4) == [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


@pytest.mark.parametrize("d", [2, 3, 4])
def test_rotational_invariance(d):
    rng = np.random.default_rng(d)
    for _ in range(200):
        p = rng.normal(scale=3.0, size=(4, d))
        R = random_rotation(d, rng)
        np.testing.assert_allclose(euclidean_features(p @ R.T), euclidean_features(p), atol=1e-9)


def test_euclidean_self_block_nonnegative(rng):
    assert np.all(euclidean_features(rng.normal(size=(50, 5, 3)))[:, :5] >= 0)


def test_batched_matches_single(rng):
    p = rng.normal(size=(7, 4, 2))
    batch = euclidean_features(p)
    for k in range(7):
        np.testing.assert_array_equal(batch[k], euclidean_features(p[k]))


@given(st.integers(0, 2**31 - 1), st.integers(2, 5))
def test_permutation_covariance(seed, n):
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(n, 2))
    sigma = Permutation(tuple(rng.permutation(n)))
    before = euclidean_features(p)
    after = euclidean_features(sigma.apply_to_points(p))
    pairs = pair_list(n)
    index = {pr: n + k for k, pr in enumerate(pairs)}
    # explicit index oracle: q'_{s(i) s(j)} = q_ij
    for i in range(n):
        assert after[sigma(i)] == pytest.approx(before[i])
    for k, (i, j) in enumerate(pairs):
        a, b = sorted((sigma(i), sigma(j)))
        assert after[index[(a, b)]] == pytest.approx(before[n + k])


# --- Minkowski ---------------------------------------------------------------------


def test_null_vector():
    f = inner_products_minkowski(PointCloudSample([[1.0, 0.0, 0.0, 1.0]]), include_self=True)
    assert f.self_block[0] == 0.0


def test_z_pair_back_to_back():
    e = 45.6
    f = inner_products_minkowski(PointCloudSample([[e, 0, 0, e], [e, 0, 0, -e]]))
    assert f.pair_block[0] == pytest.approx(2 * e**2, rel=1e-12)
    assert f.pair_block[0] == pytest.approx(4158.72, rel=1e-12)
    assert np.sqrt(2 * f.pair_block[0]) == pytest.approx(91.2, rel=1e-12)


def test_signature_error():
    with pytest.raises(SignatureError):
        minkowski_features(np.ones((2, 3)))


def test_boost_along_z_half_c(rng):
    p = rng.normal(scale=30.0, size=(4, 4))
    p[:, 0] = np.linalg.norm(p[:, 1:], axis=1) + 5.0
    L = lorentz_boost([0.0, 0.0, 0.5])
    np.testing.assert_allclose(minkowski_features(p @ L.T, True), minkowski_features(p, True), rtol=1e-6)


def test_lorentz_invariance_random():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = rng.normal(scale=40.0, size=(4, 4))
        p[:, 0] = np.linalg.norm(p[:, 1:], axis=1) * rng.uniform(1.0, 2.0, 4)
        direction = rng.normal(size=3)
        beta = rng.uniform(0, 0.9) * direction / np.linalg.norm(direction)
        R = np.eye(4)
        R[1:, 1:] = random_rotation(3, rng)
        M = lorentz_boost(beta) @ R
        ref = minkowski_features(p, True)
        got = minkowski_features(p @ M.T, True)
        np.testing.assert_allclose(got, ref, rtol=1e-6, atol=1e-6 * np.max(np.abs(ref)))


# --- flatten ----------------------------------------------------------------------


def test_flatten_order():
    np.testing.assert_array_equal(flatten_baseline(PointCloudSample([[1, 2], [3, 4]])), [1, 2, 3, 4])
    np.testing.assert_array_equal(flatten_baseline(PointCloudSample([[5.0]])), [5])
    assert flatten_baseline(np.zeros((4, 2))).shape == (8,)


# --- scaler -------------------------------------------------------------------------


def test_scaler_linear_map():
    s = fit_scaler([[0.0], [10.0]])
    np.testing.assert_allclose(s([[0.0], [10.0], [5.0]]).ravel(), [0, TWO_PI, np.pi])


def test_scaler_degenerate_midpoint():
    s = fit_scaler([[3.0], [3.0], [3.0]])
    np.testing.assert_array_equal(s([[3.0], [-1.0], [7.0]]).ravel(), [np.pi] * 3)


def test_scaler_clamps():
    s = fit_scaler([[0.0], [10.0]])
    assert s([[12.0]])[0, 0] == TWO_PI
    assert s([[-3.0]])[0, 0] == 0.0


def test_scaler_empty():
    with pytest.raises(FitError):
        fit_scaler(np.empty((0, 3)))


def test_scaler_accepts_invariant_features(rng):
    feats = [inner_products_euclidean(PointCloudSample(rng.normal(size=(3, 2)))) for _ in range(5)]
    s = fit_scaler(feats)
    assert s.lo.shape == (6,)


@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 5)), elements=finite))
def test_scaler_idempotent_on_extrema(X):
    s = fit_scaler(X)
    out = s(X)
    assert np.all((out >= 0) & (out <= TWO_PI))
    span = X.max(0) - X.min(0)
    live = span > 0
    lo_rows, hi_rows = X.argmin(0), X.argmax(0)
    cols = np.arange(X.shape[1])
    assert np.all(out[lo_rows, cols][live] == 0.0)
    assert np.all(out[hi_rows, cols][live] == TWO_PI)


def test_scaler_groups_tie_ranges():
    X = np.array([[0.0, 5.0, 1.0], [2.0, 6.0, 3.0]])
    s = fit_scaler(X, groups=[0, 0, 1])
    np.testing.assert_array_equal(s.lo, [0, 0, 1])
    np.testing.assert_array_equal(s.hi, [6, 6, 3])
    with pytest.raises(FitError):
        fit_scaler(X, groups=[0, 1])
    assert block_groups(3, True) == [0, 0, 0, 1, 1, 1]
    assert block_groups(3, False) == [1, 1, 1]


def test_scaler_roundtrip():
    s = fit_scaler([[0.0, 1.0], [2.0, 4.0]])
    back = FeatureScaler.from_dict(s.to_dict())
    np.testing.assert_array_equal(back.lo, s.lo)
    np.testing.assert_array_equal(back.hi, s.hi)


# --- Z feature map -------------------------------------------------------------------


def test_feature_map_zero():
    c = z_feature_map([0.0])
    assert [g.kind for g in c.gates] == ["H", "RZ"]
    np.testing.assert_allclose(apply_circuit(init_state(1), c), [2**-0.5, 2**-0.5], atol=1e-15)


def test_feature_map_ten_qubits():
    c = z_feature_map(np.linspace(0, 1, 10))
    assert isinstance(c, ParamCircuit) and c.n_qubits == 10 and c.n_params == 0


def test_feature_map_product_form_symmetric():
    a = apply_circuit(init_state(2), z_feature_map([np.pi, np.pi]))
    b = apply_circuit(init_state(2), z_feature_map([np.pi, np.pi][::-1]))
    np.testing.assert_allclose(a, b, atol=1e-15)


@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(0, TWO_PI)))
def test_closed_form_encoding_matches_gates(phi):
    ref = apply_circuit(init_state(len(phi)), z_feature_map(phi))
    np.testing.assert_allclose(encode_batch(phi[None])[0], ref, atol=1e-12)


def test_encoding_distinguishes_inputs():
    a = encode_batch([[0.3, 1.0]])[0]
    b = encode_batch([[0.3, 1.2]])[0]
    assert abs(np.vdot(a, b)) < 1 - 1e-3


# --- size normalization ---------------------------------------------------------------


def test_normalize_size_removes_translation_and_scale(rng):
    p = rng.normal(size=(4, 2))
    q = 3.7 * p + np.array([2.0, -1.0])
    np.testing.assert_allclose(normalize_size(q), normalize_size(p), atol=1e-12)
    r = normalize_size(p)
    assert np.mean(np.sum(r**2, axis=1)) == pytest.approx(1.0)
    np.testing.assert_allclose(r.mean(axis=0), 0, atol=1e-12)
