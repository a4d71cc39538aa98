import numpy as np
import pytest

from eegentropy.classify import (ClassifierSpec, ConvergenceError, Kernel, cross_validate,
                                 lda_fit, lda_predict, stratified_kfold, svm_fit, svm_predict)

XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([0, 0, 1, 1])


def mirrored_gaussians(n=200, seed=0):
    """Class 1 is class 0 reflected through x=1, so the boundary is exactly x=1."""
    p = np.random.default_rng(seed).normal(size=(n, 2))
    q = np.column_stack([2.0 - p[:, 0], p[:, 1]])
    return np.vstack([p, q]), np.repeat([0, 1], n)


# --- LDA ------------------------------------------------------------------

def test_lda_1d_threshold():
    X = np.array([-1.0, 0.0, 1.0, 1.0, 2.0, 3.0])[:, None]
    model = lda_fit(X, [0, 0, 0, 1, 1, 1])
    assert model.threshold / model.weights[0] == pytest.approx(1.0, abs=1e-9)


def test_lda_boundary_x_equals_one():
    X, y = mirrored_gaussians()
    model = lda_fit(X, y)
    w = model.weights
    assert abs(w[1]) < 1e-6 * abs(w[0])
    assert model.threshold / w[0] == pytest.approx(1.0, abs=1e-6)
    grid = np.array([[1.0 - 1e-4, 3.0], [1.0 + 1e-4, -3.0]])
    assert lda_predict(model, grid).tolist() == [0, 1]


def test_lda_tie_goes_to_class_zero():
    X = np.array([-1.0, 1.0, 1.0, 3.0])[:, None]
    model = lda_fit(X, [0, 0, 1, 1])
    assert lda_predict(model, [[1.0]]).tolist() == [0]


def test_lda_matches_discriminant_oracle():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal([0, 0], 1, size=(40, 2)), rng.normal([3, 1], 1, size=(25, 2))])
    y = np.repeat([0, 1], [40, 25])
    model = lda_fit(X, y, ridge=0.0)
    mu = [X[y == c].mean(axis=0) for c in (0, 1)]
    S = sum((X[y == c] - mu[c]).T @ (X[y == c] - mu[c]) for c in (0, 1)) / (len(y) - 2)
    Si = np.linalg.inv(S)
    pri = [40 / 65, 25 / 65]
    test = rng.normal(1.5, 2, size=(200, 2))
    scores = np.column_stack([test @ Si @ mu[c] - 0.5 * mu[c] @ Si @ mu[c] + np.log(pri[c])
                              for c in (0, 1)])
    assert np.allclose(model.scores(test), scores, atol=1e-10)
    assert np.array_equal(lda_predict(model, test), (scores[:, 1] > scores[:, 0]).astype(int))


def test_lda_affine_invariance():
    rng = np.random.default_rng(2)
    X = np.vstack([rng.normal(0, 1, size=(30, 3)), rng.normal(1, 1, size=(30, 3))])
    y = np.repeat([0, 1], 30)
    A = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    b = rng.normal(size=3)
    test = rng.normal(0.5, 1.5, size=(100, 3))
    m1, m2 = lda_fit(X, y, ridge=0.0), lda_fit(X @ A + b, y, ridge=0.0)
    d1 = np.diff(m1.scores(test), axis=1).ravel()
    d2 = np.diff(m2.scores(test @ A + b), axis=1).ravel()
    assert np.allclose(d1, d2, atol=1e-8)
    assert np.array_equal(np.argsort(d1), np.argsort(d2))


def test_lda_errors():
    with pytest.raises(ValueError):
        lda_fit([[0.0], [1.0], [2.0]], [0, 0, 1])
    with pytest.raises(ValueError):
        lda_fit([[0.0], [1.0]], [0, 2])
    model = lda_fit(*mirrored_gaussians(20))
    with pytest.raises(ValueError):
        lda_predict(model, np.ones((2, 3)))


def test_lda_covariance_positive_definite_when_collinear():
    X = np.column_stack([np.arange(10.0), 2 * np.arange(10.0)])
    model = lda_fit(X, np.repeat([0, 1], 5))
    assert np.all(np.linalg.eigvalsh(model.covariance) > 0)


# --- SVM ------------------------------------------------------------------

def _kkt_residual(model, X, y):
    """Largest KKT violation recomputed from the model on its training set."""
    f = model.decision_function(X)
    yy = np.where(y == 1, 1.0, -1.0)
    yf = yy * f
    alpha = np.zeros(len(y))
    for sv, a in zip(model.support_vectors, model.alphas):
        alpha[np.flatnonzero(np.all(X == sv, axis=1))[0]] = a
    C = model.C
    viol = np.where(alpha <= 0, np.maximum(0, 1 - yf),
                    np.where(alpha >= C, np.maximum(0, yf - 1), np.abs(yf - 1)))
    return viol.max()


def test_svm_1d_symmetric():
    model = svm_fit([[-1.0], [1.0]], [0, 1], Kernel("linear"), C=1.0)
    assert np.allclose(model.alphas, [0.5, 0.5], atol=1e-6)
    assert abs(model.bias) < 1e-6
    f = model.decision_function(np.array([[-1e-6 * 2], [1e-6 * 2]]))
    assert f[0] < 0 < f[1]


def test_svm_xor_rbf_and_linear():
    rbf = svm_fit(XOR_X, XOR_Y, Kernel("rbf", 1.0), C=10.0)
    assert np.array_equal(svm_predict(rbf, XOR_X), XOR_Y)
    lin = svm_fit(XOR_X, XOR_Y, Kernel("linear"), C=10.0)
    assert np.mean(svm_predict(lin, XOR_X) == XOR_Y) < 1.0


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("kernel", [Kernel("linear"), Kernel("rbf", 0.5)])
def test_svm_kkt_and_dual_feasibility(seed, kernel):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(0, 1, size=(40, 2)), rng.normal(1.2, 1, size=(40, 2))])
    y = np.repeat([0, 1], 40)
    tol = 1e-3
    model = svm_fit(X, y, kernel, C=1.0, tol=tol)
    assert model.kkt_residual < tol
    assert _kkt_residual(model, X, y) < tol
    assert np.all((model.alphas > 0) & (model.alphas <= model.C))
    assert abs(np.sum(model.alphas * model.sv_signs)) < 1e-6
    assert model.duality_gap >= -1e-6


def test_svm_linear_separable_large_c():
    rng = np.random.default_rng(3)
    X = np.vstack([rng.normal(-2, 0.5, size=(30, 2)), rng.normal(2, 0.5, size=(30, 2))])
    y = np.repeat([0, 1], 30)
    model = svm_fit(X, y, Kernel("linear"), C=1e3)
    assert np.array_equal(svm_predict(model, X), y)


def test_svm_matches_sklearn_if_available():
    svc = pytest.importorskip("sklearn.svm")
    rng = np.random.default_rng(4)
    X = np.vstack([rng.normal(0, 1, size=(30, 3)), rng.normal(0.8, 1, size=(30, 3))])
    y = np.repeat([0, 1], 30)
    ours = svm_fit(X, y, Kernel("rbf", 0.3), C=2.0, tol=1e-8)
    ref = svc.SVC(C=2.0, kernel="rbf", gamma=0.3, tol=1e-8).fit(X, y)
    test = rng.normal(0.4, 1.5, size=(50, 3))
    assert np.allclose(ours.decision_function(test), ref.decision_function(test), atol=1e-5)


def test_svm_errors():
    with pytest.raises(ValueError):
        svm_fit([[0.0], [1.0]], [1, 1])
    with pytest.raises(ValueError):
        svm_fit([[0.0], [1.0]], [0, 1], C=0)
    with pytest.raises(ValueError):
        Kernel("poly")
    with pytest.raises(ConvergenceError) as info:
        rng = np.random.default_rng(0)
        svm_fit(rng.normal(size=(40, 2)), np.repeat([0, 1], 20), C=100.0, max_iter=2)
    assert info.value.kkt_residual > 0
    model = svm_fit(XOR_X, XOR_Y, Kernel("rbf", 1.0))
    with pytest.raises(ValueError):
        svm_predict(model, np.ones((1, 3)))


# --- folds and cross-validation ----------------------------------------------

def test_folds_balanced_and_disjoint():
    y = np.repeat([0, 1], 100)
    folds = stratified_kfold(y, 10, 42)
    assert len(folds) == 10
    seen = np.concatenate([test for _, test in folds])
    assert np.array_equal(np.sort(seen), np.arange(200))
    for train, test in folds:
        assert test.size == 20
        assert np.sum(y[test] == 0) == 10 and np.sum(y[test] == 1) == 10
        assert np.intersect1d(train, test).size == 0
        assert train.size + test.size == 200


def test_folds_unbalanced_proportions():
    y = np.repeat([0, 1], [37, 23])
    for train, test in stratified_kfold(y, 7, 1):
        for c, total in ((0, 37), (1, 23)):
            assert abs(np.sum(y[test] == c) - total / 7) <= 1


def test_folds_tiny_and_determinism():
    # k equal to the class size: one sample of each class per fold
    y = np.array([0, 1, 0, 1, 0, 1])
    folds = stratified_kfold(y, 3, 0)
    assert all(sorted(y[t].tolist()) == [0, 1] for _, t in folds)
    # k = N would leave classes smaller than k, which is rejected
    with pytest.raises(ValueError, match="fewer than k"):
        stratified_kfold(y, 6, 0)
    a = stratified_kfold(np.repeat([0, 1], 50), 10, 7)
    b = stratified_kfold(np.repeat([0, 1], 50), 10, 7)
    assert all(np.array_equal(x[1], z[1]) for x, z in zip(a, b))
    c = stratified_kfold(np.repeat([0, 1], 50), 10, 8)
    assert not all(np.array_equal(x[1], z[1]) for x, z in zip(a, c))


def test_folds_errors():
    with pytest.raises(ValueError):
        stratified_kfold(np.repeat([0, 1], [5, 20]), 10)
    with pytest.raises(ValueError):
        stratified_kfold(np.repeat([0, 1], 20), 1)


@pytest.mark.parametrize("kind", ["lda", "svm"])
def test_separable_feature_is_perfect(kind):
    y = np.repeat([0, 1], 50)
    X = (y + np.random.default_rng(0).uniform(-0.3, 0.3, size=100))[:, None]
    rep = cross_validate(X, y, ClassifierSpec(kind=kind), 10, 42, "x")
    assert rep.fold_mean == {"accuracy": 100.0, "specificity": 100.0, "sensitivity": 100.0}
    assert rep.pooled == rep.fold_mean
    assert sum(f.n_test for f in rep.folds) == 100
    assert np.all(rep.predictions == y)


def test_rates_and_confusion_consistent():
    rng = np.random.default_rng(1)
    y = np.repeat([0, 1], 40)
    X = rng.normal(size=(80, 2)) + 0.8 * y[:, None]
    rep = cross_validate(X, y, ClassifierSpec("lda"), 8, 3)
    assert rep.tp + rep.fn == 40 and rep.tn + rep.fp == 40
    assert rep.pooled["accuracy"] == pytest.approx(100 * (rep.tp + rep.tn) / 80)
    assert rep.pooled["sensitivity"] == pytest.approx(100 * rep.tp / 40)
    assert rep.pooled["specificity"] == pytest.approx(100 * rep.tn / 40)
    d = rep.as_dict()
    assert d["seed"] == 3 and len(d["folds"]) == 8


@pytest.mark.parametrize("kind", ["lda", "svm"])
def test_shuffled_labels_near_chance(kind):
    accs = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(200, 6))
        y = rng.permutation(np.repeat([0, 1], 100))
        accs.append(cross_validate(X, y, ClassifierSpec(kind), 10, seed).accuracy)
    assert 40 <= np.mean(accs) <= 60


def test_standardization_leak_changes_metrics():
    rng = np.random.default_rng(5)
    y = np.repeat([0, 1], 50)
    X = rng.normal(size=(100, 3)) * [1, 10, 100] + 0.6 * y[:, None]
    X[::17] *= 8  # outliers make fold statistics differ from global ones
    spec = ClassifierSpec("svm")
    clean = cross_validate(X, y, spec, 10, 42, standardize="train")
    leaky = cross_validate(X, y, spec, 10, 42, standardize="all")
    assert [f.accuracy for f in clean.folds] != [f.accuracy for f in leaky.folds]


def test_classifier_spec_validation():
    with pytest.raises(ValueError):
        ClassifierSpec(kind="knn")
    with pytest.raises(ValueError):
        ClassifierSpec(kernel="poly")
    assert ClassifierSpec().describe() == "svm(rbf, C=1, gamma=scale)"
    assert ClassifierSpec("lda").describe().startswith("lda")


def test_cross_validate_rejects_nan():
    X = np.ones((20, 1))
    X[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        cross_validate(X, np.repeat([0, 1], 10), k=2)
