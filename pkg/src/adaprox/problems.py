"""Built-in composite test problems and their synthetic data generators.

All randomness flows through a counter-based Philox generator seeded per
experiment; normal variates come from ``Generator.standard_normal``. Factor
pairs (U, V) are flattened row-major as [vec(U); vec(V)].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .core import CompositeProblem, ProxTerm, SmoothOracle, UsageError, Vector, as_point
from .prox import L1, NonnegIndicator, Zero, make_prox_term


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


# ---------------------------------------------------------------------------
# Data containers


@dataclass
class SparseDesign:
    """Row-sparse design matrix with binary labels."""

    m: int
    n: int
    rows: List[Tuple[Tuple[int, float], ...]]
    labels: np.ndarray

    def __post_init__(self):
        if self.m != len(self.rows) or self.m != len(self.labels):
            raise UsageError("row count mismatch")
        for i, row in enumerate(self.rows):
            prev = -1
            for idx, val in row:
                if not 0 <= idx < self.n:
                    raise UsageError(f"row {i}: index {idx} out of range [0, {self.n})")
                if idx <= prev:
                    raise UsageError(f"row {i}: indices must be strictly increasing")
                if not math.isfinite(val):
                    raise UsageError(f"row {i}: non-finite value")
                prev = idx
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if not np.all(np.isin(self.labels, (0.0, 1.0))):
            raise UsageError("labels must be 0/1")

    def matrix(self) -> sp.csr_matrix:
        data, indices, indptr = [], [], [0]
        for row in self.rows:
            for idx, val in row:
                indices.append(idx)
                data.append(val)
            indptr.append(len(indices))
        return sp.csr_matrix((data, indices, indptr), shape=(self.m, self.n))

    @staticmethod
    def from_dense(A: np.ndarray, labels) -> "SparseDesign":
        A = np.asarray(A, dtype=np.float64)
        rows = [tuple((j, float(v)) for j, v in enumerate(row) if v != 0.0) for row in A]
        return SparseDesign(m=A.shape[0], n=A.shape[1], rows=rows, labels=labels)


@dataclass(frozen=True)
class FactorShape:
    """Dimensions of a factor pair (U: p x r, V: q x r) and its flattening."""

    p: int
    q: int
    r: int

    def __post_init__(self):
        if min(self.p, self.q, self.r) < 1:
            raise UsageError("factor dimensions must be positive")

    @property
    def dim(self) -> int:
        return (self.p + self.q) * self.r

    def split(self, z: Vector) -> Tuple[np.ndarray, np.ndarray]:
        if z.shape != (self.dim,):
            raise UsageError(f"expected flattened dimension {self.dim}, got {z.shape}")
        cut = self.p * self.r
        return z[:cut].reshape(self.p, self.r), z[cut:].reshape(self.q, self.r)

    def join(self, U: np.ndarray, V: np.ndarray) -> Vector:
        return np.concatenate([U.reshape(-1), V.reshape(-1)])


@dataclass
class ObservationSet:
    """Observed entries (i, j, s) of a p x q matrix, duplicates forbidden."""

    i: np.ndarray
    j: np.ndarray
    s: np.ndarray
    p: int
    q: int
    ground_truth: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __post_init__(self):
        self.i = np.asarray(self.i, dtype=np.intp)
        self.j = np.asarray(self.j, dtype=np.intp)
        self.s = np.asarray(self.s, dtype=np.float64)
        if not (len(self.i) == len(self.j) == len(self.s)):
            raise UsageError("observation arrays must share a length")
        if len(self.i) < 1:
            raise UsageError("need at least one observation")
        if np.any(self.i < 0) or np.any(self.i >= self.p) or \
                np.any(self.j < 0) or np.any(self.j >= self.q):
            raise UsageError("observation index out of range")
        if len(set(zip(self.i.tolist(), self.j.tolist()))) != len(self.i):
            raise UsageError("duplicate (i, j) observation")

    def __len__(self) -> int:
        return len(self.s)


# ---------------------------------------------------------------------------
# Spectral norm helper

POWER_MAX_ITERS = 1000
POWER_REL_TOL = 1e-10


def lambda_max_ata(A) -> float:
    """Largest eigenvalue of A^T A by power iteration from the all-ones vector
    (deterministic start keeps certified constants reproducible)."""
    n = A.shape[1]
    v = np.ones(n) / math.sqrt(n)
    ev = 0.0
    for _ in range(POWER_MAX_ITERS):
        w = A.T @ (A @ v)
        ev_new = float(np.linalg.norm(w))
        if ev_new == 0.0:
            return 0.0
        v = w / ev_new
        if abs(ev_new - ev) <= POWER_REL_TOL * ev_new:
            return ev_new
        ev = ev_new
    return ev


# ---------------------------------------------------------------------------
# Logistic regression


def logistic_problem(design: SparseDesign, gamma: float,
                     penalty: Optional[ProxTerm] = None) -> CompositeProblem:
    """Mean binary cross-entropy with an L2-squared ridge of weight gamma.

    f(x) = (1/m) sum_i [log(1 + e^{z_i}) - y_i z_i] + (gamma/2) ||x||^2 with
    z = A x; certified smoothness L = lambda_max(A^T A)/(4m) + gamma.
    """
    if gamma < 0.0:
        raise UsageError("gamma must be nonnegative")
    if design.m < 1:
        raise UsageError("design must be nonempty")
    A = design.matrix()
    y = design.labels
    m = design.m

    def value(x: Vector) -> float:
        z = A @ x
        return float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * gamma * float(np.dot(x, x))

    def gradient(x: Vector) -> Vector:
        z = A @ x
        sig = 1.0 / (1.0 + np.exp(-z))
        return A.T @ (sig - y) / m + gamma * x

    def value_and_gradient(x: Vector):
        z = A @ x
        v = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * gamma * float(np.dot(x, x))
        sig = 1.0 / (1.0 + np.exp(-z))
        return v, A.T @ (sig - y) / m + gamma * x

    known_L = lambda_max_ata(A) / (4.0 * m) + gamma
    smooth = SmoothOracle(value=value, gradient=gradient,
                          value_and_gradient=value_and_gradient, known_L=known_L)
    h = penalty if penalty is not None else make_prox_term(Zero())
    return CompositeProblem(smooth=smooth, nonsmooth=h, name="logistic", dim=design.n)


def logistic_gamma(design: SparseDesign, large: bool = False) -> float:
    """Default ridge weight: L_data/m for small datasets, L_data/(10m) for
    large, with L_data the unregularized smoothness constant."""
    l_data = lambda_max_ata(design.matrix()) / (4.0 * design.m)
    return l_data / (10.0 * design.m) if large else l_data / design.m


def logistic_synthetic(m: int, n: int, seed: int) -> SparseDesign:
    """Dense standard-normal design with labels drawn from a planted model."""
    gen = rng(seed)
    A = gen.standard_normal((m, n))
    x_true = gen.standard_normal(n)
    probs = 1.0 / (1.0 + np.exp(-(A @ x_true)))
    labels = (gen.random(m) < probs).astype(np.float64)
    return SparseDesign.from_dense(A, labels)


# ---------------------------------------------------------------------------
# Lasso


def lasso_problem(A: np.ndarray, b: Vector, l1_weight: float) -> CompositeProblem:
    """f = 0.5 ||Ax - b||^2 with an L1 penalty; exercises the soft-threshold path."""
    A = np.asarray(A, dtype=np.float64)
    b = as_point(b)
    if A.ndim != 2 or A.shape[0] != b.size:
        raise UsageError(f"shape mismatch: A {A.shape} vs b {b.shape}")

    def value(x: Vector) -> float:
        r = A @ x - b
        return 0.5 * float(np.dot(r, r))

    def gradient(x: Vector) -> Vector:
        return A.T @ (A @ x - b)

    def value_and_gradient(x: Vector):
        r = A @ x - b
        return 0.5 * float(np.dot(r, r)), A.T @ r

    smooth = SmoothOracle(value=value, gradient=gradient,
                          value_and_gradient=value_and_gradient,
                          known_L=lambda_max_ata(A))
    return CompositeProblem(smooth=smooth, nonsmooth=make_prox_term(L1(l1_weight)),
                            name="lasso", dim=A.shape[1])


def lasso_synthetic(m: int, n: int, seed: int, density: float = 0.1,
                    noise: float = 0.01) -> Tuple[np.ndarray, Vector, float]:
    """Random instance (A, b, l1_weight) with a planted sparse signal."""
    gen = rng(seed)
    A = gen.standard_normal((m, n))
    x_true = np.where(gen.random(n) < density, gen.standard_normal(n), 0.0)
    b = A @ x_true + noise * gen.standard_normal(m)
    weight = 0.1 * float(np.max(np.abs(A.T @ b)))
    return A, b, weight


# ---------------------------------------------------------------------------
# Quadratics


def quadratic_problem(eigenvalues: Sequence[float], seed: int = 0) -> CompositeProblem:
    """f = 0.5 x^T Q x with Q = R diag(e) R^T for a seeded random rotation R."""
    e = np.asarray(eigenvalues, dtype=np.float64)
    if e.ndim != 1 or e.size < 1:
        raise UsageError("eigenvalues must be a nonempty 1-D sequence")
    gen = rng(seed)
    R, _ = np.linalg.qr(gen.standard_normal((e.size, e.size)))
    Q = R @ np.diag(e) @ R.T
    Q = 0.5 * (Q + Q.T)

    def value(x: Vector) -> float:
        return 0.5 * float(x @ Q @ x)

    def gradient(x: Vector) -> Vector:
        return Q @ x

    def value_and_gradient(x: Vector):
        g = Q @ x
        return 0.5 * float(np.dot(x, g)), g

    fstar = 0.0 if np.min(e) >= 0.0 else None
    smooth = SmoothOracle(value=value, gradient=gradient,
                          value_and_gradient=value_and_gradient,
                          known_L=float(np.max(np.abs(e))))
    return CompositeProblem(smooth=smooth, nonsmooth=make_prox_term(Zero()),
                            known_fstar=fstar, name="quadratic", dim=e.size)


# ---------------------------------------------------------------------------
# Nonnegative matrix factorization


def nmf_problem(A: np.ndarray, shape: FactorShape) -> CompositeProblem:
    """f(Z) = 0.5 ||U V^T - A||_F^2 over the nonnegative orthant.

    Not globally L-smooth, so no certified constant is attached.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (shape.p, shape.q):
        raise UsageError(f"A shape {A.shape} does not match factors {(shape.p, shape.q)}")

    def value(z: Vector) -> float:
        U, V = shape.split(z)
        R = U @ V.T - A
        return 0.5 * float(np.sum(R * R))

    def gradient(z: Vector) -> Vector:
        U, V = shape.split(z)
        R = U @ V.T - A
        return shape.join(R @ V, R.T @ U)

    def value_and_gradient(z: Vector):
        U, V = shape.split(z)
        R = U @ V.T - A
        return 0.5 * float(np.sum(R * R)), shape.join(R @ V, R.T @ U)

    smooth = SmoothOracle(value=value, gradient=gradient,
                          value_and_gradient=value_and_gradient)
    return CompositeProblem(smooth=smooth, nonsmooth=make_prox_term(NonnegIndicator()),
                            name="nmf", dim=shape.dim)


def nmf_synthetic(n: int, r: int, m: int, seed: int) -> np.ndarray:
    """n x m nonnegative matrix of rank <= r: product of rectified normal factors."""
    if min(n, r, m) < 1:
        raise UsageError("dimensions must be positive")
    gen = rng(seed)
    B = np.maximum(gen.standard_normal((m, r)), 0.0)
    C = np.maximum(gen.standard_normal((n, r)), 0.0)
    return C @ B.T


# ---------------------------------------------------------------------------
# Matrix completion


def mc_problem(obs: ObservationSet, shape: FactorShape) -> CompositeProblem:
    """Factorized completion with the balance regularizer ||U^T U - V^T V||_F^2.

    f(Z) = (1/2N) sum_obs ((U V^T)_ij - s)^2 + (1/2N) ||U^T U - V^T V||_F^2.
    """
    if obs.p != shape.p or obs.q != shape.q:
        raise UsageError("observation grid does not match factor shape")
    N = len(obs)
    oi, oj, s = obs.i, obs.j, obs.s

    def _residual(U, V):
        return np.einsum("kr,kr->k", U[oi], V[oj]) - s

    def value(z: Vector) -> float:
        U, V = shape.split(z)
        res = _residual(U, V)
        M = U.T @ U - V.T @ V
        return (float(np.dot(res, res)) + float(np.sum(M * M))) / (2.0 * N)

    def gradient(z: Vector) -> Vector:
        U, V = shape.split(z)
        res = _residual(U, V)
        M = U.T @ U - V.T @ V
        gU = np.zeros_like(U)
        gV = np.zeros_like(V)
        np.add.at(gU, oi, res[:, None] * V[oj])
        np.add.at(gV, oj, res[:, None] * U[oi])
        gU = gU / N + (2.0 / N) * (U @ M)
        gV = gV / N - (2.0 / N) * (V @ M)
        return shape.join(gU, gV)

    def value_and_gradient(z: Vector):
        U, V = shape.split(z)
        res = _residual(U, V)
        M = U.T @ U - V.T @ V
        v = (float(np.dot(res, res)) + float(np.sum(M * M))) / (2.0 * N)
        gU = np.zeros_like(U)
        gV = np.zeros_like(V)
        np.add.at(gU, oi, res[:, None] * V[oj])
        np.add.at(gV, oj, res[:, None] * U[oi])
        gU = gU / N + (2.0 / N) * (U @ M)
        gV = gV / N - (2.0 / N) * (V @ M)
        return v, shape.join(gU, gV)

    smooth = SmoothOracle(value=value, gradient=gradient,
                          value_and_gradient=value_and_gradient)
    return CompositeProblem(smooth=smooth, nonsmooth=make_prox_term(Zero()),
                            name="matrix_completion", dim=shape.dim)


def mc_synthetic(p: int, q: int, r: int, N: int, noise: float, seed: int) -> ObservationSet:
    """Observations of a planted rank-r product, sampled without replacement.

    The planted factors ride along in ``ground_truth`` for diagnostics.
    """
    if N > p * q:
        raise UsageError(f"cannot sample {N} distinct entries from a {p}x{q} grid")
    if N < 1:
        raise UsageError("need at least one observation")
    gen = rng(seed)
    Ustar = gen.standard_normal((p, r))
    Vstar = gen.standard_normal((q, r))
    flat = gen.choice(p * q, size=N, replace=False)
    i, j = np.divmod(flat, q)
    s = np.einsum("kr,kr->k", Ustar[i], Vstar[j])
    if noise > 0.0:
        s = s + noise * gen.standard_normal(N)
    return ObservationSet(i=i, j=j, s=s, p=p, q=q, ground_truth=(Ustar, Vstar))
