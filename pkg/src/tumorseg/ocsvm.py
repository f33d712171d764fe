"""One-class SVM with an RBF kernel.

Dual problem: minimize 0.5 * a' Q a subject to sum(a) = 1 and
0 <= a_i <= 1/(nu * l), with Q the kernel Gram matrix. Solved by pairwise
coordinate descent: each step moves mass between the two indices with the
largest KKT violation, which preserves the equality constraint exactly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

_DROP_EPS = 1e-12


class TrainingError(RuntimeError):
    """Solver failed to reach the requested KKT tolerance."""


@dataclass(frozen=True)
class TrainConfig:
    nu: float = 0.1
    gamma: Optional[float] = None  # None -> 1 / (feature_dim * feature variance)
    tolerance: float = 1e-6
    max_passes: int = 1_000_000
    seed: int = 0
    max_samples: int = 2000

    def __post_init__(self):
        if not (0.0 < self.nu <= 1.0):
            raise ValueError(f"nu must be in (0, 1], got {self.nu}")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")


@dataclass(frozen=True)
class OcsvmModel:
    support_vectors: np.ndarray  # (m, feature_dim)
    alphas: np.ndarray  # (m,)
    b: float
    gamma: float
    nu: float
    feature_dim: int
    bias_rule: str  # "margin-mean" or "fallback-max"


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = x - y
    return float(np.exp(-gamma * np.dot(d, d)))


def kernel_matrix(x: np.ndarray, y: np.ndarray, gamma: float) -> np.ndarray:
    """Pairwise RBF kernel values between the rows of x and y."""
    sq = (
        np.sum(x * x, axis=1)[:, None]
        + np.sum(y * y, axis=1)[None, :]
        - 2.0 * (x @ y.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


def default_gamma(samples: np.ndarray) -> float:
    var = float(samples.var())
    d = samples.shape[1]
    if var <= 0:
        return 1.0 / d
    return 1.0 / (d * var)


def _solve_dual(q: np.ndarray, c: float, tolerance: float, max_passes: int):
    """Pairwise coordinate descent on the box-constrained simplex."""
    l = q.shape[0]
    alpha = np.full(l, 1.0 / l)
    grad = q @ alpha
    violation = np.inf
    for _ in range(max_passes):
        up = alpha < c - _DROP_EPS  # room to grow
        down = alpha > _DROP_EPS  # room to shrink
        gi = np.where(up, grad, np.inf)
        gj = np.where(down, grad, -np.inf)
        i = int(np.argmin(gi))
        j = int(np.argmax(gj))
        violation = float(gj[j] - gi[i])
        if violation < tolerance:
            return alpha, violation
        denom = q[i, i] + q[j, j] - 2.0 * q[i, j]
        step = violation / denom if denom > _DROP_EPS else np.inf
        step = min(step, c - alpha[i], alpha[j])
        alpha[i] += step
        alpha[j] -= step
        grad += step * (q[:, i] - q[:, j])
    raise TrainingError(
        f"no convergence within {max_passes} pair updates; final KKT violation {violation:.3e}"
    )


def compute_bias(alphas: np.ndarray, kmat: np.ndarray, box: float, tolerance: float):
    """Bias from the decision sums of the support vectors.

    Uses the mean over margin support vectors (alpha strictly inside the box);
    when none exist, falls back to the maximum decision sum, which puts at
    least one support vector exactly on the boundary.
    """
    sums = kmat @ alphas
    margin = (alphas > tolerance) & (alphas < box - tolerance)
    if margin.any():
        return float(sums[margin].mean()), "margin-mean"
    return float(sums.max()), "fallback-max"


def train(samples, config: TrainConfig = TrainConfig()) -> OcsvmModel:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("samples must be a nonempty 2-D array")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    if x.shape[0] > config.max_samples:
        rng = np.random.default_rng(config.seed)
        idx = np.sort(rng.choice(x.shape[0], size=config.max_samples, replace=False))
        x = x[idx]
    l, d = x.shape
    gamma = config.gamma if config.gamma is not None else default_gamma(x)
    box = 1.0 / (config.nu * l)
    q = kernel_matrix(x, x, gamma)
    alpha, _ = _solve_dual(q, box, config.tolerance, config.max_passes)
    b, bias_rule = compute_bias(alpha, q, box, config.tolerance)
    keep = alpha > _DROP_EPS
    return OcsvmModel(
        support_vectors=x[keep].copy(),
        alphas=alpha[keep].copy(),
        b=b,
        gamma=gamma,
        nu=config.nu,
        feature_dim=d,
        bias_rule=bias_rule,
    )


def decision_scores(model: OcsvmModel, x) -> np.ndarray:
    """sum_i alpha_i * k(sv_i, x) - b for each row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != model.feature_dim:
        raise ValueError(f"feature dimension mismatch: {x.shape[1]} vs {model.feature_dim}")
    k = kernel_matrix(x, model.support_vectors, model.gamma)
    return k @ model.alphas - model.b


def decide(model: OcsvmModel, x):
    """(score, label) with label 'tumor' iff score >= 0."""
    score = float(decision_scores(model, np.asarray(x, dtype=np.float64)[None, :])[0])
    return score, ("tumor" if score >= 0.0 else "non-tumor")


def model_to_json(model: OcsvmModel) -> str:
    doc = {
        "feature_dim": model.feature_dim,
        "gamma": model.gamma,
        "nu": model.nu,
        "b": model.b,
        "alphas": model.alphas.tolist(),
        "support_vectors": model.support_vectors.tolist(),
        "bias_rule": model.bias_rule,
    }
    return json.dumps(doc, indent=2)


def model_from_json(text: str) -> OcsvmModel:
    doc = json.loads(text)
    return OcsvmModel(
        support_vectors=np.asarray(doc["support_vectors"], dtype=np.float64).reshape(
            len(doc["alphas"]), doc["feature_dim"]
        ),
        alphas=np.asarray(doc["alphas"], dtype=np.float64),
        b=float(doc["b"]),
        gamma=float(doc["gamma"]),
        nu=float(doc["nu"]),
        feature_dim=int(doc["feature_dim"]),
        bias_rule=str(doc["bias_rule"]),
    )
