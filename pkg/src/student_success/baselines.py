"""Classical comparison models on flattened stage inputs."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .metrics import evaluate, metrics
from .nn import AdamState, Inputs, adam_step, softmax


class SingularCovariance(ValueError):
    pass


class EmptyClass(ValueError):
    pass


KINDS = ("LR", "LDA", "KNN", "CART", "GaussianNB", "LinearSVM")
DEFAULT_PARAM = {"KNN": 5, "CART": 12, "LinearSVM": 1.0}


@dataclass(frozen=True)
class BaselineKind:
    kind: str
    param: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}")
        if self.param is None and self.kind in DEFAULT_PARAM:
            object.__setattr__(self, "param", DEFAULT_PARAM[self.kind])
        if self.kind in ("KNN", "CART") and (self.param < 1 or int(self.param) != self.param):
            raise ValueError(f"{self.kind} needs an integer parameter >= 1")
        if self.kind == "LinearSVM" and not self.param > 0:
            raise ValueError("LinearSVM needs C > 0")

    @classmethod
    def parse(cls, text: str) -> "BaselineKind":
        m = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*([0-9.eE+-]+)\s*\))?\s*", text)
        if not m:
            raise ValueError(f"bad baseline spec {text!r}")
        name, arg = m.group(1), m.group(2)
        return cls(name, None if arg is None else float(arg))

    def __str__(self) -> str:
        if self.kind in ("KNN", "CART"):
            return f"{self.kind}({int(self.param)})"
        if self.kind == "LinearSVM":
            return f"{self.kind}({self.param:g})"
        return self.kind


ALL_BASELINES = tuple(BaselineKind(k) for k in KINDS)


def flatten(inputs: Inputs) -> np.ndarray:
    parts = [inputs.fixed]
    for a in (inputs.semesters, inputs.years):
        if a is not None:
            parts.append(a.reshape(a.shape[0], -1))
    return np.hstack(parts)


def _check_classes(y: np.ndarray, n_classes: int) -> None:
    counts = np.bincount(y, minlength=n_classes)
    if (counts == 0).any():
        raise EmptyClass(f"classes {np.flatnonzero(counts == 0).tolist()} have no training rows")


class BaselineModel:
    kind: BaselineKind
    n_classes: int

    def scores(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)  # first maximum: smallest class on ties


class _Standardized(BaselineModel):
    def _fit_scale(self, X):
        self.mu = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)

    def _z(self, X):
        return (X - self.mu) / self.sd


class LogisticRegression(_Standardized):
    """Multinomial logistic regression, full-batch Adam on standardized inputs."""

    def __init__(self, n_classes: int, epochs: int = 300, lr: float = 0.05, l2: float = 1e-3):
        self.kind, self.n_classes, self.epochs, self.lr, self.l2 = BaselineKind("LR"), n_classes, epochs, lr, l2
        self.W = self.b = None

    def fit(self, X, y):
        self._fit_scale(X)
        Z = self._z(X)
        n, p = Z.shape
        self.W, self.b = np.zeros((p, self.n_classes)), np.zeros(self.n_classes)
        Y = np.eye(self.n_classes)[y]
        state = AdamState()
        params = {"W": self.W, "b": self.b}
        for _ in range(self.epochs):
            G = (softmax(Z @ self.W + self.b) - Y) / n
            adam_step(params, {"W": Z.T @ G + self.l2 * self.W, "b": G.sum(axis=0)}, state, lr=self.lr)
        return self

    def scores(self, X):
        return softmax(self._z(X) @ self.W + self.b)


class LDA(BaselineModel):
    def __init__(self, n_classes: int, ridge: float = 1e-6):
        self.kind, self.n_classes, self.ridge = BaselineKind("LDA"), n_classes, ridge

    def fit(self, X, y):
        k = self.n_classes
        self.means = np.stack([X[y == c].mean(axis=0) for c in range(k)])
        self.log_prior = np.log(np.bincount(y, minlength=k) / len(y))
        R = X - self.means[y]
        cov = R.T @ R / max(len(y) - k, 1)
        scale = max(float(np.trace(cov)) / max(cov.shape[0], 1), 1e-12)
        try:
            factor = cho_factor(cov + self.ridge * scale * np.eye(cov.shape[0]))
        except LinAlgError as exc:
            raise SingularCovariance("pooled covariance singular even after ridge") from exc
        self.coef = cho_solve(factor, self.means.T).T  # Σ⁻¹ μ_c per row
        self.intercept = -0.5 * np.einsum("ij,ij->i", self.means, self.coef) + self.log_prior
        return self

    def scores(self, X):
        return X @ self.coef.T + self.intercept


class KNN(BaselineModel):
    def __init__(self, n_classes: int, k: int = 5):
        self.kind, self.n_classes, self.k = BaselineKind("KNN", k), n_classes, int(k)

    def fit(self, X, y):
        self.X, self.y = X.copy(), y.copy()
        self.xn = (X * X).sum(axis=1)
        return self

    def scores(self, X, chunk: int = 512):
        k = min(self.k, len(self.y))
        out = np.zeros((len(X), self.n_classes))
        for s in range(0, len(X), chunk):
            Q = X[s:s + chunk]
            d = (Q * Q).sum(axis=1)[:, None] + self.xn[None, :] - 2.0 * Q @ self.X.T
            nb = np.argsort(d, axis=1, kind="stable")[:, :k]
            for c in range(self.n_classes):
                out[s:s + chunk, c] = (self.y[nb] == c).sum(axis=1)
        return out / k


@dataclass
class _Node:
    proba: np.ndarray
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None


def best_gini_split(X: np.ndarray, y: np.ndarray, n_classes: int) -> tuple[int, float, float] | None:
    """(feature, threshold, weighted child impurity) of the best binary split
    ``x <= threshold``; thresholds are midpoints between distinct values."""
    m = len(y)
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    onehot = np.eye(n_classes)[y]
    left = np.cumsum(onehot[order], axis=0)[:-1]  # (m-1, F, K)
    total = onehot.sum(axis=0)
    right = total - left
    nl = np.arange(1, m)[:, None]
    nr = m - nl
    gini_l = 1.0 - ((left / nl[..., None]) ** 2).sum(axis=2)
    gini_r = 1.0 - ((right / nr[..., None]) ** 2).sum(axis=2)
    imp = (nl * gini_l + nr * gini_r) / m
    imp[xs[1:] == xs[:-1]] = np.inf
    if not np.isfinite(imp).any():
        return None
    i, f = np.unravel_index(np.argmin(imp), imp.shape)
    return int(f), float((xs[i, f] + xs[i + 1, f]) / 2), float(imp[i, f])


class CART(BaselineModel):
    def __init__(self, n_classes: int, max_depth: int = 12, min_split: int = 2):
        self.kind, self.n_classes = BaselineKind("CART", max_depth), n_classes
        self.max_depth, self.min_split = int(max_depth), min_split

    def fit(self, X, y):
        self.root = self._grow(X, y, 0)
        return self

    def _grow(self, X, y, depth):
        counts = np.bincount(y, minlength=self.n_classes)
        node = _Node(counts / counts.sum())
        if depth >= self.max_depth or len(y) < self.min_split or (counts > 0).sum() == 1:
            return node
        split = best_gini_split(X, y, self.n_classes)
        if split is None:
            return node
        f, t, imp = split
        parent = 1.0 - ((counts / counts.sum()) ** 2).sum()
        if imp >= parent - 1e-15:
            return node
        go = X[:, f] <= t
        node.feature, node.threshold = f, t
        node.left = self._grow(X[go], y[go], depth + 1)
        node.right = self._grow(X[~go], y[~go], depth + 1)
        return node

    def scores(self, X):
        out = np.zeros((len(X), self.n_classes))
        stack = [(self.root, np.arange(len(X)))]
        while stack:
            node, rows = stack.pop()
            if node.left is None:
                out[rows] = node.proba
                continue
            go = X[rows, node.feature] <= node.threshold
            stack.append((node.left, rows[go]))
            stack.append((node.right, rows[~go]))
        return out

    def depth(self) -> int:
        def d(n):
            return 0 if n.left is None else 1 + max(d(n.left), d(n.right))
        return d(self.root)


class GaussianNB(BaselineModel):
    VAR_FLOOR = 1e-9

    def __init__(self, n_classes: int):
        self.kind, self.n_classes = BaselineKind("GaussianNB"), n_classes

    def fit(self, X, y):
        k = self.n_classes
        self.mean = np.stack([X[y == c].mean(axis=0) for c in range(k)])
        self.var = np.maximum(np.stack([X[y == c].var(axis=0) for c in range(k)]), self.VAR_FLOOR)
        self.log_prior = np.log(np.bincount(y, minlength=k) / len(y))
        return self

    def log_joint(self, X):
        ll = -0.5 * (np.log(2 * np.pi * self.var)[None] + (X[:, None, :] - self.mean[None]) ** 2 / self.var[None])
        return ll.sum(axis=2) + self.log_prior

    def scores(self, X):
        lj = self.log_joint(X)
        lj -= lj.max(axis=1, keepdims=True)
        p = np.exp(lj)
        return p / p.sum(axis=1, keepdims=True)


class LinearSVM(_Standardized):
    """One-vs-rest squared hinge, ½‖w‖² + C·mean(max(0, 1 − y·f)²), Adam."""

    def __init__(self, n_classes: int, C: float = 1.0, epochs: int = 300, lr: float = 0.05):
        self.kind, self.n_classes, self.C = BaselineKind("LinearSVM", C), n_classes, C
        self.epochs, self.lr = epochs, lr

    def fit(self, X, y):
        self._fit_scale(X)
        Z = self._z(X)
        n, p = Z.shape
        T = np.where(np.eye(self.n_classes)[y] > 0, 1.0, -1.0)
        self.W, self.b = np.zeros((p, self.n_classes)), np.zeros(self.n_classes)
        state = AdamState()
        params = {"W": self.W, "b": self.b}
        for _ in range(self.epochs):
            slack = np.maximum(0.0, 1.0 - T * (Z @ self.W + self.b))
            G = -2.0 * self.C * T * slack / n
            adam_step(params, {"W": self.W / n + Z.T @ G, "b": G.sum(axis=0)}, state, lr=self.lr)
        return self

    def scores(self, X):
        return self._z(X) @ self.W + self.b


def fit(kind: BaselineKind | str, X: np.ndarray, y: np.ndarray, n_classes: int | None = None) -> BaselineModel:
    kind = BaselineKind.parse(kind) if isinstance(kind, str) else kind
    y = np.asarray(y, dtype=int)
    k = n_classes or int(y.max()) + 1
    _check_classes(y, k)
    X = np.asarray(X, dtype=float)
    model = {
        "LR": lambda: LogisticRegression(k),
        "LDA": lambda: LDA(k),
        "KNN": lambda: KNN(k, int(kind.param)),
        "CART": lambda: CART(k, int(kind.param)),
        "GaussianNB": lambda: GaussianNB(k),
        "LinearSVM": lambda: LinearSVM(k, kind.param),
    }[kind.kind]()
    return model.fit(X, y)


COMPARISON_COLUMNS = ("model", "stage", "scenario", "accuracy", "macro_f1")


def compare(X_train, y_train, X_eval, y_eval, n_classes: int, stage: int, scenario: str,
            kinds: Sequence[BaselineKind] = ALL_BASELINES) -> list[list]:
    """One ``model,stage,scenario,accuracy,macro_f1`` row per baseline."""
    rows = []
    for kind in kinds:
        m = fit(kind, X_train, y_train, n_classes)
        r = metrics(evaluate(y_eval, m.predict(X_eval), n_classes))
        rows.append([str(kind), stage, scenario, r.accuracy, r.macro_f1])
    return rows
