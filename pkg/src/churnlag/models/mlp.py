from __future__ import annotations

import numpy as np

PARAM_NAMES = ("W1", "b1", "w2", "b2")


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return np.exp(-_softplus(-x))


def forward(params: dict, X: np.ndarray):
    pre = X @ params["W1"] + params["b1"]
    hidden = np.maximum(pre, 0.0)
    return hidden @ params["w2"] + params["b2"][0], pre, hidden


def loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray):
    """Mean logistic loss for labels in {-1, +1} and its analytic gradient."""
    z, pre, hidden = forward(params, X)
    loss = float(np.mean(_softplus(-y * z)))
    dz = -y * _sigmoid(-y * z) / len(y)
    dhidden = np.outer(dz, params["w2"]) * (pre > 0)
    grads = {
        "W1": X.T @ dhidden,
        "b1": dhidden.sum(axis=0),
        "w2": hidden.T @ dz,
        "b2": np.array([dz.sum()]),
    }
    return loss, grads


def init_params(n_features: int, hidden: int, rng: np.random.Generator) -> dict:
    return {
        "W1": rng.normal(0.0, np.sqrt(2.0 / n_features), size=(n_features, hidden)),
        "b1": np.zeros(hidden),
        "w2": rng.normal(0.0, np.sqrt(1.0 / hidden), size=hidden),
        "b2": np.zeros(1),
    }


class MLP:
    """One hidden ReLU layer, logistic output, plain minibatch SGD."""

    family = "mlp"

    def __init__(self, hidden: int = 64, epochs: int = 200, step: float = 0.01, batch_size: int = 32):
        self.hidden = hidden
        self.epochs = epochs
        self.step = step
        self.batch_size = batch_size

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator):
        yf = y.astype(np.float64)
        params = init_params(X.shape[1], self.hidden, rng)
        n = len(yf)
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                idx = order[start:start + self.batch_size]
                _, grads = loss_and_grad(params, X[idx], yf[idx])
                for k in PARAM_NAMES:
                    params[k] -= self.step * grads[k]
        self.params = params
        return self

    def decision_score(self, X: np.ndarray) -> np.ndarray:
        return forward(self.params, X)[0]

    def state(self) -> dict:
        return dict(self.params)

    def load_state(self, state: dict):
        self.params = {k: np.asarray(state[k], dtype=np.float64) for k in PARAM_NAMES}
        return self
