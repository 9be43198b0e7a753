"""Pointwise p-Laplacian flux algebra and its monotonicity inequalities.

The flux is xi -> |xi|^{p-2} xi, continuously extended by 0 at the origin for
p > 1, with an optional epsilon regularization that removes the singularity
(p < 2) or degeneracy (p > 2) at zero gradient for Newton solves.

The monotonicity facts implemented and tested here:

* pointwise, for vectors A and B,

      (flux(A) - flux(B)) . (A - B) >= |A - B|^p / 2^{p-2}                (p >= 2)
      (flux(A) - flux(B)) . (A - B) >= (p-1)|A - B|^2
                                       / (1 + |A|^2 + |B|^2)^{(2-p)/2}   (1 < p <= 2)

* at the norm level, with C = max{2^{p-2}, (2^{(2-p)/2}/(p-1))^{p/2}},
  alpha = min{p/2, 1} and beta = max{2/(2-p), 0},

      ||u1 - u2||_{W^{1,p}}^p <= C * pairing^alpha
                                 * (1 + ||grad u1||_p^p + ||grad u2||_p^p)^beta

  where pairing is the integrated monotonicity product of the face gradients.

The two pointwise branches coincide at p = 2; the implementation uses the
first for p >= 2 and the second for p < 2.  beta's 2/(2-p) expression is only
evaluated for p < 2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import Field, gradient_at_faces, w1p_seminorm


def _check_p(p: float) -> None:
    if p <= 1.0:
        raise ValueError(f"flux algebra requires p > 1, got p={p}")


def flux(xi: np.ndarray, p: float) -> np.ndarray:
    """Vector flux |xi|^{p-2} xi with flux(0) = 0; vectors along the last axis."""
    _check_p(p)
    xi = np.asarray(xi, dtype=float)
    # scaled norm: plain sum-of-squares underflows for |xi| below ~1e-154
    amax = np.max(np.abs(xi), axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        mag = amax * np.sqrt(np.sum((xi / np.where(amax == 0.0, 1.0, amax)) ** 2,
                                    axis=-1, keepdims=True))
        scale = mag ** (p - 2.0)
        out = np.where(mag == 0.0, 0.0, scale * xi)
    return out


def regularized_flux(xi: np.ndarray, p: float, eps: float) -> np.ndarray:
    """(|xi|^2 + eps^2)^{(p-2)/2} xi; coincides with flux at eps = 0 away from 0."""
    if eps < 0.0:
        raise ValueError(f"regularization must be nonnegative, got {eps}")
    if eps == 0.0:
        return flux(xi, p)
    _check_p(p)
    xi = np.asarray(xi, dtype=float)
    mag2 = np.sum(xi * xi, axis=-1, keepdims=True)
    return (mag2 + eps * eps) ** ((p - 2.0) / 2.0) * xi


@dataclass(frozen=True)
class MonotonicityConstants:
    C: float
    alpha: float
    beta: float
    p: float


def monotonicity_constants(p: float) -> MonotonicityConstants:
    """Constants of the norm-level monotonicity inequality."""
    _check_p(p)
    alpha = min(p / 2.0, 1.0)
    beta = max(2.0 / (2.0 - p), 0.0) if p < 2.0 else 0.0
    C = max(2.0 ** (p - 2.0), (2.0 ** ((2.0 - p) / 2.0) / (p - 1.0)) ** (p / 2.0))
    return MonotonicityConstants(C=C, alpha=alpha, beta=beta, p=p)


def pointwise_monotonicity_gap(A: np.ndarray, B: np.ndarray, p: float) -> np.ndarray:
    """LHS minus RHS of the pointwise monotonicity inequality; >= -tol*scale.

    Negative values beyond roundoff would falsify the inequality; the scale
    for the roundoff allowance is (1 + |A| + |B|)^p because the pairing
    cancels O(|A|^p) terms.
    """
    _check_p(p)
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    diff = A - B
    lhs = np.sum((flux(A, p) - flux(B, p)) * diff, axis=-1)
    dmag = np.linalg.norm(diff, axis=-1)
    if p >= 2.0:
        rhs = dmag**p / 2.0 ** (p - 2.0)
    else:
        a2 = np.sum(A * A, axis=-1)
        b2 = np.sum(B * B, axis=-1)
        rhs = (p - 1.0) * dmag**2 / (1.0 + a2 + b2) ** ((2.0 - p) / 2.0)
    return lhs - rhs


def norm_monotonicity_check(u1: Field, u2: Field, p: float) -> tuple[float, float]:
    """Evaluate both sides of the norm-level inequality on discrete fields.

    Returns (lhs, rhs) with lhs the p-th power of the W^{1,p} seminorm of the
    difference; the contract is lhs <= rhs up to a small relative tolerance.
    For p = 2 the two sides agree to machine precision.
    """
    _check_p(p)
    if u1.grid != u2.grid:
        raise ValueError("fields live on different grids")
    consts = monotonicity_constants(p)
    lhs = w1p_seminorm(Field(u1.grid, u1.values - u2.values), p) ** p

    pairing = 0.0
    for axis, (g1, g2) in enumerate(zip(gradient_at_faces(u1), gradient_at_faces(u2))):
        w = u1.grid.face_weights(axis)
        f1 = flux(g1[..., None], p)[..., 0]
        f2 = flux(g2[..., None], p)[..., 0]
        pairing += float(np.sum(w * (f1 - f2) * (g1 - g2)))
    pairing = max(pairing, 0.0)

    energy = 1.0 + w1p_seminorm(u1, p) ** p + w1p_seminorm(u2, p) ** p
    if p >= 2.0:
        rhs = consts.C * pairing**consts.alpha
    else:
        rhs = consts.C * pairing**consts.alpha * energy**consts.beta
    return lhs, rhs
