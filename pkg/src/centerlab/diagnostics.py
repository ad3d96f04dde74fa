"""Measurement apparatus: center estimation, residuals, collapse verdicts, kNN.

All functions are read-only over plain numpy embeddings; nothing here joins
the autodiff graph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ParameterError

__all__ = [
    "CenterEstimate",
    "EmaCenterTracker",
    "CollapseReport",
    "KnnResult",
    "estimate_center",
    "residual_stats",
    "second_moment_gap",
    "delta_dist",
    "angle_to_direction",
    "knn_eval",
    "collapse_verdict",
]


@dataclass
class CenterEstimate:
    """The batch/dataset center s_hat with its estimation strategy."""
    s_hat: np.ndarray
    strategy: str
    norm: float
    sample_count: int


@dataclass
class EmaCenterTracker:
    """Folds batch centers with momentum for small-batch center estimation."""
    momentum: float = 0.9
    center: np.ndarray | None = None
    count: int = 0

    def update(self, embeddings: np.ndarray) -> CenterEstimate:
        batch_mean = np.asarray(embeddings, dtype=np.float64).mean(axis=0)
        if self.center is None:
            self.center = batch_mean
        else:
            self.center = self.momentum * self.center + (1.0 - self.momentum) * batch_mean
        self.count += embeddings.shape[0]
        return CenterEstimate(self.center.copy(), "ema-of-batches",
                              float(np.linalg.norm(self.center)), self.count)


def estimate_center(embeddings: np.ndarray, strategy: str = "batch") -> CenterEstimate:
    """Mean of embedding rows (use EmaCenterTracker for the streaming strategy)."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    if embeddings.shape[0] < 1:
        raise ParameterError("estimate_center needs at least one embedding")
    if strategy not in ("batch", "full-dataset-pass"):
        raise ParameterError(f"unknown strategy {strategy!r}")
    s_hat = embeddings.mean(axis=0)
    return CenterEstimate(s_hat, strategy, float(np.linalg.norm(s_hat)),
                          embeddings.shape[0])


def residual_stats(embeddings: np.ndarray,
                   center: CenterEstimate) -> tuple[float, np.ndarray]:
    """(mean residual norm, per-dimension std) of r = z - s_hat."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    if embeddings.shape[1] != center.s_hat.shape[0]:
        raise ParameterError("embedding and center dimensions disagree")
    residuals = embeddings - center.s_hat
    mean_norm = float(np.sqrt((residuals ** 2).sum(axis=1)).mean())
    per_dim_std = residuals.std(axis=0)
    return mean_norm, per_dim_std


def second_moment_gap(embeddings: np.ndarray, center: CenterEstimate) -> float:
    """|mean||z||^2 - ||s_hat||^2 - mean||r||^2|; zero when s_hat is the batch mean."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    mean_sq = float((embeddings ** 2).sum(axis=1).mean())
    residuals = embeddings - center.s_hat
    mean_res_sq = float((residuals ** 2).sum(axis=1).mean())
    return abs(mean_sq - center.norm ** 2 - mean_res_sq)


def delta_dist(mean_t: np.ndarray, mean_prev: np.ndarray) -> float:
    """Squared Euclidean shift of the embedding mean between consecutive steps."""
    mean_t = np.asarray(mean_t, dtype=np.float64).ravel()
    mean_prev = np.asarray(mean_prev, dtype=np.float64).ravel()
    if mean_t.shape != mean_prev.shape:
        raise ParameterError("means must share a dimension")
    diff = mean_t - mean_prev
    return float(diff @ diff)


def angle_to_direction(center: CenterEstimate, direction: np.ndarray) -> float:
    """Cosine similarity between s_hat and a reference direction."""
    direction = np.asarray(direction, dtype=np.float64).ravel()
    dnorm = np.linalg.norm(direction)
    if center.norm == 0.0 or dnorm == 0.0:
        raise ParameterError("angle_to_direction needs nonzero vectors")
    return float(center.s_hat @ direction / (center.norm * dnorm))


@dataclass
class KnnResult:
    k: int
    accuracy: float
    distance: str = "cosine"


def knn_eval(train_emb: np.ndarray, train_labels: np.ndarray,
             eval_emb: np.ndarray, eval_labels: np.ndarray,
             k: int = 5, leave_one_out: bool | None = None) -> KnnResult:
    """Cosine-distance majority vote over the k nearest training embeddings.

    Ties break by smallest summed distance, then lowest label id. With
    ``leave_one_out=None``, leave-one-out kicks in automatically when the
    eval set is the training set.
    """
    train_emb = np.atleast_2d(np.asarray(train_emb, dtype=np.float64))
    eval_emb = np.atleast_2d(np.asarray(eval_emb, dtype=np.float64))
    train_labels = np.asarray(train_labels)
    eval_labels = np.asarray(eval_labels)
    if train_emb.shape[0] == 0 or eval_emb.shape[0] == 0:
        raise ParameterError("knn_eval needs non-empty train and eval sets")
    if leave_one_out is None:
        leave_one_out = (train_emb.shape == eval_emb.shape
                         and np.array_equal(train_emb, eval_emb))
    max_k = train_emb.shape[0] - (1 if leave_one_out else 0)
    if not (1 <= k <= max_k):
        raise ParameterError(f"k={k} out of range (max {max_k})")

    def unit(x):
        return x / np.sqrt((x * x).sum(axis=1, keepdims=True) + 1e-24)

    dists = 1.0 - unit(eval_emb) @ unit(train_emb).T
    if leave_one_out:
        np.fill_diagonal(dists, np.inf)
    correct = 0
    for i in range(eval_emb.shape[0]):
        nearest = np.argsort(dists[i], kind="stable")[:k]
        votes: dict[int, tuple[int, float]] = {}
        for j in nearest:
            label = int(train_labels[j])
            count, total = votes.get(label, (0, 0.0))
            votes[label] = (count + 1, total + dists[i][j])
        # most votes, then smallest summed distance, then lowest label id
        winner = min(votes.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))[0]
        if winner == int(eval_labels[i]):
            correct += 1
    return KnnResult(k=k, accuracy=correct / eval_emb.shape[0])


@dataclass
class CollapseReport:
    center_norm: float
    mean_residual_norm: float
    per_dimension_std: np.ndarray
    std_mean: float
    delta_dist: float
    collapsed: bool


def collapse_verdict(embeddings: np.ndarray, prev_mean: np.ndarray | None = None,
                     thresholds: tuple[float, float] = (0.8, 0.05)) -> CollapseReport:
    """Binarized collapse reading: high center AND low spread.

    ``collapsed = center_norm > thresholds[0] and std_mean < thresholds[1]``.
    """
    center_hi, std_lo = thresholds
    if not (0.0 < center_hi < 1.0 and 0.0 < std_lo < 1.0):
        raise ParameterError("thresholds must lie in (0, 1)")
    center = estimate_center(embeddings)
    mean_res, per_dim_std = residual_stats(embeddings, center)
    std_mean = float(per_dim_std.mean())
    dd = delta_dist(center.s_hat, prev_mean) if prev_mean is not None else 0.0
    return CollapseReport(
        center_norm=center.norm,
        mean_residual_norm=mean_res,
        per_dimension_std=per_dim_std,
        std_mean=std_mean,
        delta_dist=dd,
        collapsed=(center.norm > center_hi and std_mean < std_lo),
    )
