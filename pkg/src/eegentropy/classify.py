"""Two-class LDA and SVM classifiers with stratified k-fold cross-validation.

Class 1 (Epileptic) is the positive class throughout: sensitivity is the
true-positive rate on class 1, specificity the true-negative rate on class 0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .signal_io import FeatureMatrix


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, kkt_residual: float):
        super().__init__(f"{message} (KKT residual {kkt_residual:.3g})")
        self.kkt_residual = kkt_residual


def _check_xy(features, labels) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels).astype(int).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("features must be (n_samples, n_features) with one label per row")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be 0 or 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite values")
    return X, y


def _as_matrix(features, n_features: int) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None] if n_features == 1 else X[None, :]
    if X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[1]}")
    return X


# --- LDA ------------------------------------------------------------------

@dataclass(frozen=True)
class LdaModel:
    means: np.ndarray        # (2, d)
    covariance: np.ndarray   # pooled, regularized
    priors: np.ndarray       # (2,)
    weights: np.ndarray      # Sigma^-1 (mu1 - mu0)
    threshold: float         # predict 1 when x @ weights > threshold

    @property
    def n_features(self) -> int:
        return self.means.shape[1]

    def scores(self, features) -> np.ndarray:
        """Gaussian discriminant score per class, shape (n, 2)."""
        X = _as_matrix(features, self.n_features)
        solved = np.linalg.solve(self.covariance, self.means.T)  # (d, 2)
        const = -0.5 * np.sum(self.means.T * solved, axis=0) + np.log(self.priors)
        return X @ solved + const


def lda_fit(features, labels, ridge: float = 1e-6) -> LdaModel:
    """Fit a shared-covariance Gaussian discriminant.

    The pooled within-class covariance gets ``ridge * trace / d`` added to
    its diagonal.
    """
    X, y = _check_xy(features, labels)
    counts = np.bincount(y, minlength=2)
    if np.any(counts < 2):
        raise ValueError(f"LDA needs at least 2 samples per class, got {counts.tolist()}")
    means = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    centered = X - means[y]
    d = X.shape[1]
    cov = centered.T @ centered / (y.size - 2)
    cov = cov + ridge * (np.trace(cov) / d if np.trace(cov) > 0 else 1.0) * np.eye(d)
    priors = counts / counts.sum()
    weights = np.linalg.solve(cov, means[1] - means[0])
    threshold = float(weights @ (means[0] + means[1]) / 2.0 - math.log(priors[1] / priors[0]))
    return LdaModel(means, cov, priors, weights, threshold)


def lda_predict(model: LdaModel, features) -> np.ndarray:
    """Class with the larger discriminant score; exact ties go to class 0."""
    s = model.scores(features)
    return (s[:, 1] > s[:, 0]).astype(int)


# --- SVM ------------------------------------------------------------------

@dataclass(frozen=True)
class Kernel:
    kind: str = "rbf"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}; use 'linear' or 'rbf'")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError(f"RBF gamma must be positive, got {self.gamma}")

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return A @ B.T
        sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T)
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray        # in [0, C]
    sv_signs: np.ndarray      # +1 for class 1, -1 for class 0
    bias: float
    kernel: Kernel
    C: float
    n_iter: int
    kkt_residual: float
    duality_gap: float

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, features) -> np.ndarray:
        X = _as_matrix(features, self.n_features)
        return self.kernel(X, self.support_vectors) @ (self.alphas * self.sv_signs) + self.bias


def _kkt_violations(alpha: np.ndarray, yf: np.ndarray, C: float) -> np.ndarray:
    at_zero = alpha <= 0
    at_c = alpha >= C
    free = ~(at_zero | at_c)
    v = np.zeros_like(yf)
    v[at_zero] = np.maximum(0.0, 1.0 - yf[at_zero])
    v[at_c] = np.maximum(0.0, yf[at_c] - 1.0)
    v[free] = np.abs(yf[free] - 1.0)
    return v


def svm_fit(features, labels, kernel: Kernel | None = None, C: float = 1.0,
            tol: float = 1e-3, max_iter: int = 200_000) -> SvmModel:
    """Soft-margin SVM dual solved by SMO with second-order pair selection.

    Stops when the maximal KKT violation gap drops below ``tol``.

    Raises:
        ConvergenceError: if ``max_iter`` updates do not reach ``tol``.
    """
    X, labels = _check_xy(features, labels)
    if len(np.unique(labels)) < 2:
        raise ValueError("SVM needs both classes in the training set")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    kernel = kernel or Kernel("rbf", 1.0 / X.shape[1])
    y = np.where(labels == 1, 1.0, -1.0)
    n = y.size
    K = kernel(X, X)
    Q = (y[:, None] * y[None, :]) * K
    diag = np.diag(Q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    tau = 1e-12

    it = 0
    while True:
        yg = -y * grad
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        i = int(np.flatnonzero(up)[np.argmax(yg[up])])
        g_max = yg[i]
        g_min = yg[low].min()
        if g_max - g_min < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(f"SMO did not converge in {max_iter} iterations", g_max - g_min)
        it += 1

        cand = low & (yg < g_max)
        b = g_max - yg[cand]
        a = diag[i] + diag[cand] - 2.0 * y[i] * y[cand] * Q[i, cand]
        a = np.where(a > 0, a, tau)
        j = int(np.flatnonzero(cand)[np.argmin(-(b * b) / a)])

        ai_old, aj_old = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = max(diag[i] + diag[j] + 2.0 * Q[i, j], tau)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Q[i, j], tau)
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += Q[:, i] * (ai - ai_old) + Q[:, j] * (aj - aj_old)

    yg_signed = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yg_signed[free].mean())
    else:
        ub, lb = math.inf, -math.inf
        for t in range(n):
            at_upper = alpha[t] >= C
            if (at_upper and y[t] < 0) or (not at_upper and y[t] > 0):
                ub = min(ub, yg_signed[t])
            else:
                lb = max(lb, yg_signed[t])
        rho = (ub + lb) / 2.0
    bias = -rho

    sv = alpha > 0
    if not sv.any():
        raise AssertionError("SMO finished without support vectors")
    f = K[:, sv] @ (alpha[sv] * y[sv]) + bias
    yf = y * f
    residual = float(_kkt_violations(alpha, yf, C).max())
    quad_term = float(alpha @ Q @ alpha)
    primal = 0.5 * quad_term + C * float(np.maximum(0.0, 1.0 - yf).sum())
    dual = float(alpha.sum()) - 0.5 * quad_term
    return SvmModel(X[sv].copy(), alpha[sv].copy(), y[sv].copy(), bias, kernel, float(C),
                    it, residual, primal - dual)


def svm_predict(model: SvmModel, features) -> np.ndarray:
    """Class 1 where the decision function is positive, else class 0."""
    return (model.decision_function(features) > 0).astype(int)


# --- validation -----------------------------------------------------------

def stratified_kfold(labels, k: int = 10, seed: int = 42) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffle each class with ``seed`` and deal it round-robin into ``k`` folds.

    Each class continues dealing at the fold where the previous class
    stopped, so fold sizes differ by at most one.
    """
    y = np.asarray(labels).astype(int).ravel()
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    classes, counts = np.unique(y, return_counts=True)
    small = classes[counts < k]
    if small.size:
        raise ValueError(f"class {int(small[0])} has fewer than k={k} members")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.size, dtype=int)
    start = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        fold_of[idx] = (start + np.arange(idx.size)) % k
        start = (start + idx.size) % k
    folds = []
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        folds.append((train, test))
    return folds


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "svm"
    kernel: str = "rbf"
    C: float = 1.0
    gamma: float | None = None  # None: 1 / (d * variance of the training features)
    tol: float = 1e-3
    ridge: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("lda", "svm"):
            raise ValueError(f"unknown classifier {self.kind!r}; use 'lda' or 'svm'")
        Kernel(self.kernel, self.gamma if self.gamma is not None else 1.0)

    def describe(self) -> str:
        if self.kind == "lda":
            return f"lda(ridge={self.ridge:g})"
        g = "scale" if self.gamma is None else f"{self.gamma:g}"
        extra = f", gamma={g}" if self.kernel == "rbf" else ""
        return f"svm({self.kernel}, C={self.C:g}{extra})"

    def fit_predict(self, X_train, y_train, X_test) -> np.ndarray:
        if self.kind == "lda":
            return lda_predict(lda_fit(X_train, y_train, self.ridge), X_test)
        gamma = self.gamma
        if gamma is None:
            var = float(X_train.var())
            gamma = 1.0 / (X_train.shape[1] * var) if var > 0 else 1.0
        model = svm_fit(X_train, y_train, Kernel(self.kernel, gamma), self.C, self.tol)
        return svm_predict(model, X_test)


def _rates(tp: int, tn: int, fp: int, fn: int) -> tuple[float, float, float]:
    total = tp + tn + fp + fn
    acc = 100.0 * (tp + tn) / total if total else math.nan
    sens = 100.0 * tp / (tp + fn) if tp + fn else math.nan
    spec = 100.0 * tn / (tn + fp) if tn + fp else math.nan
    return acc, spec, sens


@dataclass(frozen=True)
class FoldResult:
    fold: int
    n_test: int
    tp: int
    tn: int
    fp: int
    fn: int
    accuracy: float
    specificity: float
    sensitivity: float


@dataclass
class PerformanceReport:
    feature: str
    classifier: str
    k: int
    seed: int
    folds: list[FoldResult]
    predictions: np.ndarray = field(repr=False)
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        self.tp = sum(f.tp for f in self.folds)
        self.tn = sum(f.tn for f in self.folds)
        self.fp = sum(f.fp for f in self.folds)
        self.fn = sum(f.fn for f in self.folds)

    @property
    def pooled(self) -> dict[str, float]:
        acc, spec, sens = _rates(self.tp, self.tn, self.fp, self.fn)
        return {"accuracy": acc, "specificity": spec, "sensitivity": sens}

    @property
    def fold_mean(self) -> dict[str, float]:
        return {key: float(np.nanmean([getattr(f, key) for f in self.folds]))
                for key in ("accuracy", "specificity", "sensitivity")}

    @property
    def accuracy(self) -> float:
        return self.fold_mean["accuracy"]

    def as_dict(self) -> dict:
        return {
            "feature": self.feature,
            "classifier": self.classifier,
            "k": self.k,
            "seed": self.seed,
            "fold_mean": self.fold_mean,
            "pooled": self.pooled,
            "confusion": {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn},
            "folds": [asdict(f) for f in self.folds],
        }


def cross_validate(features, labels, spec: ClassifierSpec = ClassifierSpec(), k: int = 10,
                   seed: int = 42, feature_name: str = "", standardize: str = "train"
                   ) -> PerformanceReport:
    """Stratified k-fold evaluation with per-fold standardization.

    ``standardize="train"`` fits the scaler on each training fold only;
    ``"all"`` fits it once on the whole data set (a deliberate leak, kept
    for checking that the default really matters); ``"none"`` skips it.
    """
    X, y = _check_xy(features, labels)
    if standardize not in ("train", "all", "none"):
        raise ValueError(f"unknown standardize mode {standardize!r}")
    global_scaler = Standardizer.fit(X) if standardize == "all" else None
    predictions = np.full(y.size, -1, dtype=int)
    folds = []
    for f, (train, test) in enumerate(stratified_kfold(y, k, seed)):
        Xtr, Xte = X[train], X[test]
        scaler = Standardizer.fit(Xtr) if standardize == "train" else global_scaler
        if scaler is not None:
            Xtr, Xte = scaler.transform(Xtr), scaler.transform(Xte)
        pred = spec.fit_predict(Xtr, y[train], Xte)
        predictions[test] = pred
        truth = y[test]
        tp = int(np.sum((pred == 1) & (truth == 1)))
        tn = int(np.sum((pred == 0) & (truth == 0)))
        fp = int(np.sum((pred == 1) & (truth == 0)))
        fn = int(np.sum((pred == 0) & (truth == 1)))
        folds.append(FoldResult(f, int(test.size), tp, tn, fp, fn, *_rates(tp, tn, fp, fn)))
    return PerformanceReport(feature_name, spec.describe(), k, seed, folds, predictions)


def cross_validate_matrix(matrix: FeatureMatrix, columns: list[str], spec: ClassifierSpec,
                          k: int = 10, seed: int = 42, feature_name: str = "") -> PerformanceReport:
    X = matrix.select(columns)
    return cross_validate(X, matrix.labels, spec, k, seed, feature_name or ",".join(columns))
