from __future__ import annotations

import numpy as np


def hinge_objective(w, b, X, y, l2):
    margins = y * (X @ w + b)
    return 0.5 * l2 * float(w @ w) + float(np.mean(np.maximum(0.0, 1.0 - margins)))


class LinearSVM:
    """Soft-margin linear SVM trained by full-batch subgradient descent.

    Minimises ``l2/2 * |w|^2 + mean(hinge)`` with an unpenalised bias and a
    1/sqrt(t) step schedule, keeping the best iterate seen.
    """

    family = "svm"

    def __init__(self, l2: float = 1e-3, iterations: int = 1000, step: float = 1.0):
        self.l2 = l2
        self.iterations = iterations
        self.step = step

    def fit(self, X: np.ndarray, y: np.ndarray, rng=None):
        n, d = X.shape
        yf = y.astype(np.float64)
        w, b = np.zeros(d), 0.0
        best = (hinge_objective(w, b, X, yf, self.l2), w.copy(), b)
        for t in range(1, self.iterations + 1):
            active = yf * (X @ w + b) < 1.0
            grad_w = self.l2 * w - (yf[active] @ X[active]) / n
            grad_b = -yf[active].sum() / n
            eta = self.step / np.sqrt(t)
            w = w - eta * grad_w
            b = b - eta * grad_b
            obj = hinge_objective(w, b, X, yf, self.l2)
            if obj < best[0]:
                best = (obj, w.copy(), b)
        self.objective, self.w, self.b = best
        return self

    def decision_score(self, X: np.ndarray) -> np.ndarray:
        return X @ self.w + self.b

    def state(self) -> dict:
        return {"w": self.w, "b": np.array([self.b])}

    def load_state(self, state: dict):
        self.w, self.b = state["w"], float(state["b"][0])
        return self
