from __future__ import annotations

import numpy as np
from scipy.special import expit

LOG_2PI = np.log(2.0 * np.pi)


class GaussianNaiveBayes:
    """Per-feature Gaussian class conditionals with a variance floor."""

    family = "naive_bayes"

    def __init__(self, var_floor: float = 1e-9):
        self.var_floor = var_floor

    def fit(self, X: np.ndarray, y: np.ndarray, rng=None):
        pos, neg = X[y == 1], X[y == -1]
        self.means = np.stack([neg.mean(axis=0), pos.mean(axis=0)])
        self.vars = np.maximum(np.stack([neg.var(axis=0), pos.var(axis=0)]), self.var_floor)
        self.priors = np.array([len(neg), len(pos)], dtype=np.float64) / len(y)
        return self

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        """Columns: log p(x, -1), log p(x, +1)."""
        out = np.empty((X.shape[0], 2))
        for c in range(2):
            resid = (X - self.means[c]) ** 2 / self.vars[c]
            out[:, c] = np.log(self.priors[c]) - 0.5 * np.sum(LOG_2PI + np.log(self.vars[c]) + resid, axis=1)
        return out

    def decision_score(self, X: np.ndarray) -> np.ndarray:
        # log posterior odds of +1 over -1
        jll = self.joint_log_likelihood(X)
        return jll[:, 1] - jll[:, 0]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Posterior probability of the +1 class."""
        return expit(self.decision_score(X))

    def state(self) -> dict:
        return {"means": self.means, "vars": self.vars, "priors": self.priors}

    def load_state(self, state: dict):
        self.means, self.vars, self.priors = state["means"], state["vars"], state["priors"]
        return self
