"""Tree ensembles.

Trees are grown with scikit-learn's CART builder and immediately flattened
into plain node arrays; voting, out-of-bag estimation, boosting scores and
serialisation all work on those arrays.
"""

from __future__ import annotations

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier

LEAF = -1


def gini_impurity(labels) -> float:
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0.0
    _, counts = np.unique(labels, return_counts=True)
    p = counts / labels.size
    return float(1.0 - np.sum(p * p))


class NodeArrays:
    """A list of binary trees stored as one set of flat node arrays.

    Leaves point to themselves, so walking ``depth`` steps from the roots
    lands every row on its leaf without masking.
    """

    def __init__(self, left, right, feature, threshold, value, roots, depth):
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.value = np.asarray(value, dtype=np.float64)
        self.roots = np.asarray(roots, dtype=np.int64)
        self.depth = int(depth)

    @classmethod
    def from_sklearn(cls, trees, leaf_value):
        lefts, rights, feats, thrs, vals, roots = [], [], [], [], [], []
        offset, depth = 0, 0
        for t in trees:
            n = t.node_count
            idx = np.arange(n) + offset
            is_leaf = t.children_left == LEAF
            lefts.append(np.where(is_leaf, idx, t.children_left + offset))
            rights.append(np.where(is_leaf, idx, t.children_right + offset))
            feats.append(np.where(is_leaf, 0, t.feature))
            thrs.append(np.where(is_leaf, 0.0, t.threshold))
            vals.append(leaf_value(t))
            roots.append(offset)
            depth = max(depth, t.max_depth)
            offset += n
        return cls(
            np.concatenate(lefts), np.concatenate(rights), np.concatenate(feats),
            np.concatenate(thrs), np.concatenate(vals), roots, depth,
        )

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index per (row, tree)."""
        # the tree builder compares float32 features against float64 thresholds
        X32 = np.asarray(X, dtype=np.float32)
        nodes = np.broadcast_to(self.roots, (X32.shape[0], self.n_trees)).copy()
        rows = np.arange(X32.shape[0])[:, None]
        for _ in range(self.depth):
            go_left = X32[rows, self.feature[nodes]] <= self.threshold[nodes]
            nodes = np.where(go_left, self.left[nodes], self.right[nodes])
        return nodes

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def state(self, prefix: str) -> dict:
        return {
            f"{prefix}left": self.left, f"{prefix}right": self.right,
            f"{prefix}feature": self.feature, f"{prefix}threshold": self.threshold,
            f"{prefix}value": self.value, f"{prefix}roots": self.roots,
            f"{prefix}depth": np.array([self.depth]),
        }

    @classmethod
    def from_state(cls, state: dict, prefix: str) -> "NodeArrays":
        g = lambda k: state[prefix + k]  # noqa: E731
        return cls(g("left"), g("right"), g("feature"), g("threshold"), g("value"), g("roots"), int(g("depth")[0]))


def _seed32(rng: np.random.Generator) -> int:
    return int(rng.integers(0, 2**31 - 1))


def _vote_leaf(tree) -> np.ndarray:
    # classes are ordered (-1, +1); ties go to +1
    v = tree.value[:, 0, :]
    return np.where(v[:, 1] >= v[:, 0], 1.0, -1.0)


class RandomForest:
    family = "random_forest"

    def __init__(self, n_trees: int = 300, max_features: str | int = "sqrt", max_depth: int | None = None,
                 min_samples_leaf: int = 1, n_jobs: int = 1):
        self.n_trees = n_trees
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.n_jobs = n_jobs

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator):
        forest = RandomForestClassifier(
            n_estimators=self.n_trees,
            criterion="gini",
            max_features=self.max_features,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            bootstrap=True,
            random_state=_seed32(rng),
            n_jobs=self.n_jobs,
        )
        forest.fit(np.asarray(X, dtype=np.float32), y)
        self.nodes = NodeArrays.from_sklearn([e.tree_ for e in forest.estimators_], _vote_leaf)
        n = X.shape[0]
        self.inbag = np.zeros((n, self.n_trees), dtype=np.int32)
        for t, sample in enumerate(forest.estimators_samples_):
            np.add.at(self.inbag[:, t], sample, 1)
        self.oob_error = self._oob_error(X, y)
        return self

    def _oob_error(self, X, y) -> float:
        votes = self.nodes.leaf_values(X)
        oob = self.inbag == 0
        covered = oob.any(axis=1)
        tally = np.sum(votes * oob, axis=1)
        pred = np.where(tally >= 0, 1, -1)
        return float(np.mean(pred[covered] != y[covered]))

    def decision_score(self, X: np.ndarray) -> np.ndarray:
        """(votes for +1 - votes for -1) / trees, in [-1, 1]."""
        return self.nodes.leaf_values(X).mean(axis=1)

    def state(self) -> dict:
        return self.nodes.state("tree_")

    def load_state(self, state: dict):
        self.nodes = NodeArrays.from_state(state, "tree_")
        self.inbag = None
        return self


def _regression_leaf(tree) -> np.ndarray:
    return tree.value[:, 0, 0]


class GradientBoosting:
    """Logistic-loss boosting of shallow regression trees."""

    family = "gradient_boosting"

    def __init__(self, n_rounds: int = 100, max_depth: int = 3, learning_rate: float = 0.1):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator):
        gb = GradientBoostingClassifier(
            loss="log_loss",
            n_estimators=self.n_rounds,
            max_depth=self.max_depth,
            learning_rate=self.learning_rate,
            subsample=1.0,
            random_state=_seed32(rng),
        )
        gb.fit(np.asarray(X, dtype=np.float32), y)
        p = np.mean(y == 1)
        self.init_score = float(np.log(p / (1.0 - p)))
        self.nodes = NodeArrays.from_sklearn([e[0].tree_ for e in gb.estimators_], _regression_leaf)
        return self

    def staged_scores(self, X: np.ndarray) -> np.ndarray:
        """Raw log-odds after each round, shape (rounds, rows)."""
        contrib = self.learning_rate * self.nodes.leaf_values(X)
        return self.init_score + np.cumsum(contrib, axis=1).T

    def decision_score(self, X: np.ndarray) -> np.ndarray:
        return self.init_score + self.learning_rate * self.nodes.leaf_values(X).sum(axis=1)

    def state(self) -> dict:
        return {**self.nodes.state("tree_"), "init_score": np.array([self.init_score])}

    def load_state(self, state: dict):
        self.nodes = NodeArrays.from_state(state, "tree_")
        self.init_score = float(state["init_score"][0])
        return self
