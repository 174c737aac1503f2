"""Elementary numeric kernels and seeded randomness.

Everything here operates on 64-bit floats and validates that public outputs
stay finite. All stochastic code in the package draws from generators created
by :func:`make_rng` / :func:`child_rng`; there is no global RNG state.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateVectorError, InvalidInputError, ShapeError

# Norms at or below this are treated as zero vectors.
NORM_EPS = 1e-12


def check_finite(arr: np.ndarray, name: str = "input") -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return arr


def _check_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise InvalidInputError(f"{name} is empty")
    return check_finite(arr, name)


def softmax(logits) -> np.ndarray:
    """Stable softmax of a single logit vector (max-subtraction)."""
    z = _check_vector(logits, "logits")
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_rows(logits) -> np.ndarray:
    """Row-wise stable softmax of a 2-D logit matrix."""
    z = check_finite(logits, "logits")
    if z.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got shape {z.shape}")
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logsumexp(logits) -> float:
    """log(sum(exp(x))) with max-subtraction; exact for a single element."""
    z = _check_vector(logits, "logits")
    m = z.max()
    if z.size == 1:
        return float(m)
    return float(m + np.log(np.exp(z - m).sum()))


def logsumexp_rows(logits) -> np.ndarray:
    z = check_finite(logits, "logits")
    if z.ndim != 2:
        raise ShapeError(f"logits must be 2-D, got shape {z.shape}")
    m = z.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(z - m).sum(axis=1, keepdims=True))).ravel()


def l2_normalize(v) -> np.ndarray:
    """Return v / ||v||2. A (near-)zero vector is an error, not a zero output."""
    arr = _check_vector(v, "vector")
    norm = float(np.linalg.norm(arr))
    if norm <= NORM_EPS:
        raise DegenerateVectorError(f"cannot normalize vector with norm {norm!r}")
    return arr / norm


def normalize_rows(m) -> np.ndarray:
    """L2-normalize every row of a matrix; any zero-norm row is an error."""
    arr = check_finite(m, "matrix")
    if arr.ndim != 2:
        raise ShapeError(f"matrix must be 2-D, got shape {arr.shape}")
    norms = np.linalg.norm(arr, axis=1)
    if np.any(norms <= NORM_EPS):
        bad = int(np.argmax(norms <= NORM_EPS))
        raise DegenerateVectorError(f"row {bad} has norm {norms[bad]!r}")
    return arr / norms[:, None]


def matmul(a, b) -> np.ndarray:
    """Shape-checked dense matrix product."""
    a = check_finite(a, "a")
    b = check_finite(b, "b")
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError("matmul expects 2-D operands")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"inner dimensions differ: {a.shape} x {b.shape}")
    return a @ b


def make_rng(seed: int) -> np.random.Generator:
    """Deterministic counter-based generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Derive an independent generator from a root seed and an integer key path.

    Used wherever parallel or per-iteration streams are needed; the derivation
    is stateless, so any (seed, key) stream can be reconstructed at any time.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def child_seed(seed: int, *key: int) -> int:
    """Derive an independent 64-bit child seed from a root seed and key path."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0])
