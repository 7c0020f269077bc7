"""Kernel SVM trained by kernelized stochastic subgradient descent.

The trainer minimizes the regularized hinge objective ||w||^2 + C * sum of
hinge losses with step size 1/(lambda_eff * t), lambda_eff = 1/(C*n), keeps
the average of all iterates as the final coefficient vector, and then fits
the unregularized bias by an exact 1-D scan of the hinge loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .datakit import Dataset, Scaler, feature_vector, scaler_fit, FEATURE_ARITY
from .errors import DataError, TrainingError

KERNEL_KINDS = ("linear", "poly2", "poly3", "rbf", "sigmoid")
_KERNEL_CODE = {k: i for i, k in enumerate(KERNEL_KINDS)}

DEFAULT_EPOCHS = 50
OBJECTIVE_TOL = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and shape parameters.

    gamma is the RBF width / sigmoid slope (ignored by linear and polynomial
    kinds); coef0 is the sigmoid offset. gamma None means "resolve a default
    from the training data at fit time".
    """

    kind: str
    gamma: float | None = None
    coef0: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise DataError(f"unknown kernel kind {self.kind!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise DataError("gamma must be > 0")


def kernel_eval(k: KernelSpec, x, y) -> float:
    """Evaluate the kernel on two feature vectors."""
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.shape != ya.shape:
        raise DataError(f"arity mismatch: {xa.shape} vs {ya.shape}")
    dot = float(xa @ ya)
    if k.kind == "linear":
        return dot
    if k.kind == "poly2":
        return (dot + 1.0) ** 2
    if k.kind == "poly3":
        return (dot + 1.0) ** 3
    gamma = k.gamma if k.gamma is not None else 1.0 / max(len(xa), 1)
    if k.kind == "rbf":
        diff = xa - ya
        return math.exp(-gamma * float(diff @ diff))
    return math.tanh(gamma * dot + k.coef0)


def kernel_matrix(k: KernelSpec, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise kernel values, shape (len(A), len(B))."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DataError("arity mismatch")
    dots = A @ B.T
    if k.kind == "linear":
        return dots
    if k.kind == "poly2":
        return (dots + 1.0) ** 2
    if k.kind == "poly3":
        return (dots + 1.0) ** 3
    gamma = k.gamma if k.gamma is not None else 1.0 / A.shape[1]
    if k.kind == "rbf":
        sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * dots
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-gamma * sq)
    return np.tanh(gamma * dots + k.coef0)


@njit(cache=True, inline="always")
def _kern_ij(X, i, j, kind, gamma, coef0):
    d = X.shape[1]
    dot = 0.0
    for f in range(d):
        dot += X[i, f] * X[j, f]
    if kind == 0:
        return dot
    if kind == 1:
        v = dot + 1.0
        return v * v
    if kind == 2:
        v = dot + 1.0
        return v * v * v
    if kind == 3:
        sq = 0.0
        for f in range(d):
            diff = X[i, f] - X[j, f]
            sq += diff * diff
        return np.exp(-gamma * sq)
    return np.tanh(gamma * dot + coef0)


@njit(cache=True)
def _pegasos_train(X, y, order, lam, C, kind, gamma, coef0, epochs, tol):
    """Sequential subgradient passes. Returns (avg_coef, epochs_run).

    Bookkeeping: after t steps the current iterate is w = g/(lam*t) in the
    kernel basis and S[i] tracks sum_j g[j]*K(x_j, x_i). The returned model
    is the suffix average of the iterates over the second half of the
    passes (the early iterates have inflated norms and would dominate a
    full-history average); harmonic-number accumulators recover it while
    touching only the violated coordinate per step.
    """
    n = X.shape[0]
    g = np.zeros(n)
    S = np.zeros(n)
    D = np.zeros(n)   # tail deltas per point
    E = np.zeros(n)   # tail delta * H_{u-1} per point
    g0 = np.zeros(n)  # iterate basis at the averaging start
    H = 0.0           # harmonic number of completed steps
    t = 0
    t_start = (epochs // 2) * n  # averaging begins after this many steps
    h_start = 0.0                # H_{t_start - 1}
    started = t_start == 0
    prev_obj = np.inf
    epochs_run = 0
    for ep in range(epochs):
        for step in range(n):
            t += 1
            i = order[ep * n + step]
            f_i = S[i] / (lam * (t - 1)) if t > 1 else 0.0
            if y[i] * f_i < 1.0:
                delta = y[i]
                g[i] += delta
                if started:
                    D[i] += delta
                    E[i] += delta * H  # H == H_{t-1} here
                for jj in range(n):
                    S[jj] += delta * _kern_ij(X, i, jj, kind, gamma, coef0)
            H += 1.0 / t
            if not started and t == t_start:
                started = True
                for jj in range(n):
                    g0[jj] = g[jj]
                h_start = H - 1.0 / t  # H_{t_start - 1}
        # objective of the current iterate: ||w||^2 + C * sum hinge
        scale = 1.0 / (lam * t)
        hinge = 0.0
        wn = 0.0
        for jj in range(n):
            margin = 1.0 - y[jj] * S[jj] * scale
            if margin > 0.0:
                hinge += margin
            wn += g[jj] * S[jj]
        obj = wn * scale * scale + C * hinge
        epochs_run = ep + 1
        decrease = prev_obj - obj
        if ep > 0 and 0.0 <= decrease < tol:
            break  # converged pass; increases are stochastic wobble, keep going
        prev_obj = obj
    T = t
    if not started or T <= t_start:
        # stopped before the averaging window: use the current iterate
        return g / (lam * T), epochs_run
    h_last = H - 1.0 / T  # H_{T-1}
    avg = ((h_last - h_start) * g0 + (h_last * D - E)) / (lam * (T - t_start))
    return avg, epochs_run


def _optimal_bias(F: np.ndarray, y: np.ndarray) -> float:
    """Exact minimizer of sum_i max(0, 1 - y_i (F_i + b)) over b.

    The hinge sum is convex piecewise-linear in b; the minimum sits on a
    breakpoint b = y_i - F_i. Smallest optimal b wins for determinism.
    """
    cand = np.unique(y - F)
    p = np.sort(1.0 - F[y > 0])          # positive-class hinge active while b < p
    q = np.sort(-1.0 - F[y < 0])         # negative-class hinge active while b > q
    p_suffix = np.concatenate([np.cumsum(p[::-1])[::-1], [0.0]])
    q_prefix = np.concatenate([[0.0], np.cumsum(q)])
    ip = np.searchsorted(p, cand, side="right")
    iq = np.searchsorted(q, cand, side="left")
    pos_part = p_suffix[ip] - cand * (len(p) - ip)
    neg_part = cand * iq - q_prefix[iq]
    return float(cand[np.argmin(pos_part + neg_part)])


@dataclass
class SvmModel:
    """Support-vector expansion: decision(x) = sum_i coef_i K(sv_i, x) + b.

    Support vectors live in the scaler's z-scored space; coefficients are the
    averaged subgradient iterates (alpha_i * y_i in dual terms).
    """

    support_vectors: np.ndarray
    coefficients: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    scaler: Scaler

    threshold = 0.0

    def decisions(self, X: np.ndarray) -> np.ndarray:
        Xs = self.scaler.transform(np.atleast_2d(np.asarray(X, dtype=np.float64)))
        if len(self.coefficients) == 0:
            return np.full(Xs.shape[0], self.bias)
        return kernel_matrix(self.kernel, Xs, self.support_vectors) @ self.coefficients + self.bias

    scores = decisions

    def predicts(self, X: np.ndarray) -> np.ndarray:
        return (self.decisions(X) > 0.0).astype(np.uint8)

    def score(self, sample) -> float:
        return float(self.decisions(feature_vector(sample)[None, :])[0])

    def predict(self, sample) -> int:
        return int(self.predicts(feature_vector(sample)[None, :])[0])

    def explicit_weights(self) -> np.ndarray:
        """For the linear kernel: the equivalent primal weight vector."""
        if self.kernel.kind != "linear":
            raise DataError("explicit weights exist only for the linear kernel")
        return self.coefficients @ self.support_vectors

    def describe(self) -> str:
        return f"svm({self.kernel.kind}, C={self.C:g})"

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "family": "svm",
            "kernel": {"kind": self.kernel.kind, "gamma": self.kernel.gamma,
                       "coef0": self.kernel.coef0},
            "C": self.C,
            "bias": self.bias,
            "coefficients": self.coefficients.tolist(),
            "support_vectors": self.support_vectors.tolist(),
            "scaler": self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        return cls(
            support_vectors=np.asarray(d["support_vectors"], np.float64).reshape(
                -1, FEATURE_ARITY),
            coefficients=np.asarray(d["coefficients"], np.float64),
            bias=float(d["bias"]),
            kernel=KernelSpec(**d["kernel"]),
            C=float(d["C"]),
            scaler=Scaler.from_dict(d["scaler"]),
        )


def _resolve_gamma(kernel: KernelSpec, Xs: np.ndarray) -> KernelSpec:
    if kernel.gamma is not None or kernel.kind in ("linear", "poly2", "poly3"):
        return kernel
    d = Xs.shape[1]
    if kernel.kind == "rbf":
        var = float(Xs.var(axis=0).mean())
        gamma = 1.0 / (d * var) if var > 0 else 1.0 / d
    else:
        gamma = 1.0 / d
    return KernelSpec(kind=kernel.kind, gamma=gamma, coef0=kernel.coef0)


def fit_svm(train: Dataset, kernel: KernelSpec, C: float,
            epochs: int = DEFAULT_EPOCHS, seed: int = 0) -> SvmModel:
    """Train on the regularized hinge objective. Deterministic per seed."""
    if not C > 0:
        raise DataError("C must be > 0")
    if epochs < 1:
        raise DataError("epochs must be >= 1")
    n0, n1 = train.class_counts()
    if n0 == 0 or n1 == 0:
        raise TrainingError("single-class training set: margin problem undefined")

    scaler = scaler_fit(train)
    Xs = np.ascontiguousarray(scaler.transform(train.features))
    y = train.labels.astype(np.float64) * 2.0 - 1.0
    n = len(train)
    kernel = _resolve_gamma(kernel, Xs)
    lam = 1.0 / (C * n)

    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    order = rng.integers(0, n, size=epochs * n)

    gamma = kernel.gamma if kernel.gamma is not None else 0.0
    coef, _ = _pegasos_train(Xs, y, order, lam, C, _KERNEL_CODE[kernel.kind],
                             gamma, kernel.coef0, epochs, OBJECTIVE_TOL)

    support = np.flatnonzero(coef != 0.0)
    sv = Xs[support]
    sv_coef = coef[support]
    if len(support) > 0:
        F = kernel_matrix(kernel, Xs, sv) @ sv_coef
    else:
        F = np.zeros(n)
    bias = _optimal_bias(F, y)
    return SvmModel(support_vectors=sv, coefficients=sv_coef, bias=bias,
                    kernel=kernel, C=C, scaler=scaler)


def svm_decision(m: SvmModel, x) -> float:
    """Signed distance-like decision value at one sample."""
    return m.score(x)


def svm_predict(m: SvmModel, x) -> int:
    """Class 1 only for strictly positive decision values."""
    return m.predict(x)


def svm_objective(m: SvmModel, d: Dataset) -> float:
    """Regularized hinge objective ||w||^2 + C * sum hinge on a dataset."""
    Xs = m.scaler.transform(d.features)
    y = d.labels.astype(np.float64) * 2.0 - 1.0
    if len(m.coefficients) > 0:
        K_ss = kernel_matrix(m.kernel, m.support_vectors, m.support_vectors)
        w_norm2 = float(m.coefficients @ K_ss @ m.coefficients)
        f = kernel_matrix(m.kernel, Xs, m.support_vectors) @ m.coefficients + m.bias
    else:
        w_norm2 = 0.0
        f = np.full(len(d), m.bias)
    hinge = np.maximum(0.0, 1.0 - y * f).sum()
    return w_norm2 + m.C * float(hinge)
