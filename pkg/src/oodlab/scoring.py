"""Detection scores and training losses for a (K+1)-logit classifier.

Score convention throughout the package: higher = more ID-like. The absent
category is the last logit; its softmax probability is the uncertainty signal
both for detection (inverted) and for picking informative outliers.

Each loss has a companion ``*_grads`` variant returning the gradients of the
total loss w.r.t. the ID and OOD logits, which the training loop feeds into
the model's backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidLabelError, ShapeError
from .numeric import check_finite, logsumexp_rows, softmax_rows


@dataclass
class LossValue:
    total: float
    id_term: float
    ood_term: float


def _check_logits_2d(logits, min_cols: int, name: str) -> np.ndarray:
    arr = check_finite(logits, name)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] < min_cols:
        raise ShapeError(f"{name} must have >= {min_cols} columns, got shape {arr.shape}")
    return arr


def _check_logits_row(logits, k: int, exact: bool) -> np.ndarray:
    arr = check_finite(logits, "logits")
    if arr.ndim != 1:
        raise ShapeError(f"expected a single logit vector, got shape {arr.shape}")
    if exact and arr.size != k + 1:
        raise ShapeError(f"expected {k + 1} logits, got {arr.size}")
    if not exact and arr.size < k:
        raise ShapeError(f"expected >= {k} logits, got {arr.size}")
    return arr


def absent_category_score(logits, k: int) -> float:
    """1 - p(absent | x): inverse absent-category probability in [0, 1]."""
    arr = _check_logits_row(logits, k, exact=True)
    p = softmax_rows(arr[None, :])[0]
    return float(1.0 - p[k])


def absent_category_scores(logits, k: int) -> np.ndarray:
    arr = _check_logits_2d(logits, k + 1, "logits")
    if arr.shape[1] != k + 1:
        raise ShapeError(f"expected {k + 1} logit columns, got {arr.shape[1]}")
    return 1.0 - softmax_rows(arr)[:, k]


def msp_score(logits, k: int) -> float:
    """Maximum softmax probability over the first K classes.

    The softmax runs over all logits present (including the absent head when
    the model has one); only the max is restricted to the K class entries.
    """
    arr = _check_logits_row(logits, k, exact=False)
    p = softmax_rows(arr[None, :])[0]
    return float(p[:k].max())


def msp_scores(logits, k: int) -> np.ndarray:
    arr = _check_logits_2d(logits, k, "logits")
    return softmax_rows(arr)[:, :k].max(axis=1)


def energy_score(logits, k: int) -> float:
    """Negated free energy: logsumexp over the first K class logits."""
    arr = _check_logits_row(logits, k, exact=False)
    return float(logsumexp_rows(arr[None, :k])[0])


def energy_scores(logits, k: int) -> np.ndarray:
    arr = _check_logits_2d(logits, k, "logits")
    return logsumexp_rows(arr[:, :k])


SCORE_FUNCTIONS = {
    "absent": absent_category_scores,
    "msp": msp_scores,
    "energy": energy_scores,
}


def _check_labels(labels, k: int, n: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (n,):
        raise ShapeError(f"labels shape {y.shape} does not match batch size {n}")
    if n and (y.min() < 1 or y.max() > k):
        raise InvalidLabelError(f"labels must lie in 1..{k}")
    return y.astype(np.int64)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def _mean_cross_entropy(id_logits, id_labels, k):
    """Mean -log p(y|x) and its logit gradient (already divided by n)."""
    n = id_logits.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(id_logits)
    logp = _log_softmax(id_logits)
    rows = np.arange(n)
    cols = id_labels - 1
    value = float(-logp[rows, cols].mean())
    grad = np.exp(logp)
    grad[rows, cols] -= 1.0
    return value, grad / n


def absent_category_loss(id_logits, id_labels, ood_logits, k: int,
                         lam: float = 1.0) -> LossValue:
    """Mean ID cross-entropy plus mean -log p(absent|x) on the outliers."""
    return absent_category_loss_grads(id_logits, id_labels, ood_logits, k, lam)[0]


def absent_category_loss_grads(id_logits, id_labels, ood_logits, k: int,
                               lam: float = 1.0):
    idl = _check_logits_2d(id_logits, k + 1, "id_logits")
    oodl = _check_logits_2d(ood_logits, k + 1, "ood_logits") if np.size(ood_logits) else np.zeros((0, k + 1))
    if idl.shape[1] != k + 1 or oodl.shape[1] != k + 1:
        raise ShapeError(f"logits must have {k + 1} columns")
    y = _check_labels(id_labels, k, idl.shape[0])
    id_term, id_grad = _mean_cross_entropy(idl, y, k)
    m = oodl.shape[0]
    if m == 0:
        ood_term, ood_grad = 0.0, np.zeros((0, k + 1))
    else:
        logp = _log_softmax(oodl)
        ood_term = float(-logp[:, k].mean())
        ood_grad = np.exp(logp)
        ood_grad[:, k] -= 1.0
        ood_grad /= m
    total = id_term + lam * ood_term
    return LossValue(total, id_term, ood_term), id_grad, lam * ood_grad


def oe_uniform_loss(id_logits, id_labels, ood_logits, k: int,
                    lam: float = 1.0) -> LossValue:
    """Outlier-exposure loss: cross-entropy of outliers to the uniform
    distribution over the K class heads."""
    return oe_uniform_loss_grads(id_logits, id_labels, ood_logits, k, lam)[0]


def oe_uniform_loss_grads(id_logits, id_labels, ood_logits, k: int, lam: float = 1.0):
    idl = _check_logits_2d(id_logits, k + 1, "id_logits")
    oodl = _check_logits_2d(ood_logits, k + 1, "ood_logits") if np.size(ood_logits) else np.zeros((0, k + 1))
    if idl.shape[1] != k + 1 or oodl.shape[1] != k + 1:
        raise ShapeError(f"logits must have {k + 1} columns")
    y = _check_labels(id_labels, k, idl.shape[0])
    id_term, id_grad = _mean_cross_entropy(idl, y, k)
    m = oodl.shape[0]
    if m == 0:
        ood_term, ood_grad = 0.0, np.zeros((0, k + 1))
    else:
        logp = _log_softmax(oodl)
        ood_term = float(-logp[:, :k].mean(axis=1).sum() / m)
        ood_grad = np.exp(logp)
        ood_grad[:, :k] -= 1.0 / k
        ood_grad /= m
    total = id_term + lam * ood_term
    return LossValue(total, id_term, ood_term), id_grad, lam * ood_grad


def energy_reg_loss(id_logits, id_labels, ood_logits, k: int,
                    m_in: float = -25.0, m_out: float = -7.0,
                    lam: float = 1.0) -> LossValue:
    """Cross-entropy plus squared-hinge energy margins.

    E(x) = -logsumexp over the K class logits; the regularizer penalizes ID
    energies above m_in and outlier energies below m_out.
    """
    return energy_reg_loss_grads(id_logits, id_labels, ood_logits, k, m_in, m_out, lam)[0]


def energy_reg_loss_grads(id_logits, id_labels, ood_logits, k: int,
                          m_in: float = -25.0, m_out: float = -7.0,
                          lam: float = 1.0):
    idl = _check_logits_2d(id_logits, k + 1, "id_logits")
    oodl = _check_logits_2d(ood_logits, k + 1, "ood_logits") if np.size(ood_logits) else np.zeros((0, k + 1))
    if idl.shape[1] != k + 1 or oodl.shape[1] != k + 1:
        raise ShapeError(f"logits must have {k + 1} columns")
    y = _check_labels(id_labels, k, idl.shape[0])
    id_term, id_grad = _mean_cross_entropy(idl, y, k)
    n, m = idl.shape[0], oodl.shape[0]
    ood_term = 0.0
    ood_grad = np.zeros((m, k + 1))
    if n:
        e_id = -logsumexp_rows(idl[:, :k])
        hinge = np.maximum(0.0, e_id - m_in)
        ood_term += float((hinge ** 2).mean())
        # dE/dlogit_j = -softmax_K(logits_1..K)_j on the class heads only
        p_k = softmax_rows(idl[:, :k])
        coeff = (2.0 * hinge / n)[:, None]
        id_grad = id_grad + lam * np.concatenate(
            [coeff * -p_k, np.zeros((n, 1))], axis=1
        )
    if m:
        e_ood = -logsumexp_rows(oodl[:, :k])
        hinge = np.maximum(0.0, m_out - e_ood)
        ood_term += float((hinge ** 2).mean())
        p_k = softmax_rows(oodl[:, :k])
        coeff = (-2.0 * hinge / m)[:, None]
        ood_grad = lam * np.concatenate([coeff * -p_k, np.zeros((m, 1))], axis=1)
    total = id_term + lam * ood_term
    return LossValue(total, id_term, ood_term), id_grad, ood_grad


LOSS_GRAD_FUNCTIONS = {
    "absent_category": absent_category_loss_grads,
    "oe_uniform": oe_uniform_loss_grads,
    "energy": energy_reg_loss_grads,
}
