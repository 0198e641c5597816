"""Curvature-correction operator pairs (A, A_i) for variance reduction.

Each variant supplies a mean operator ``apply_mean`` and a per-sample
operator ``apply_sample`` with E_i[apply_sample(i, u)] == apply_mean(u):

* ``none``          A = A_i = 0 (plain variance-reduced gradient)
* ``full_hessian``  A = mean hessian at the anchor, A_i = hess f_i (matrix-free)
* ``diag_hessian``  diagonal of the above (mean diagonal cached at build time)
* ``bb_scalar``     the secant ratio s^T y / ||s||^2 as a scalar surrogate,
                    with per-sample scalars from per-sample gradient
                    differences at the two most recent anchor points

The BB scalar is floored at delta > 0 as a non-convexity remedy; the floor
applies to the mean scalar only, never to the per-sample scalars.
"""

from __future__ import annotations

import numpy as np

from .losses import LossModel

VARIANTS = ("none", "full_hessian", "diag_hessian", "bb_scalar")


class DegenerateAnchorError(ValueError):
    """The two anchor points coincide; no secant information exists."""


def default_delta_floor(model: LossModel) -> float:
    """delta = 1e-8 * max(1, L-hat); the remedy needs only delta > 0."""
    return 1e-8 * max(1.0, model.smoothness())


class CorrectionOperator:
    """Immutable (A, A_i) pair anchored at a snapshot point.

    Built via :func:`build_correction`; ``apply_*`` are pure.
    """

    def __init__(self, variant, model, anchor, *, anchor_prev=None,
                 bb_raw=None, bb_scalar=None, s=None, s_sqnorm=None,
                 diag_mean=None, delta_floor=0.0):
        self.variant = variant
        self.model = model
        self.anchor = anchor
        self.anchor_prev = anchor_prev
        self.bb_raw = bb_raw          # unfloored secant ratio
        self.bb_scalar = bb_scalar    # floored; used by apply_mean
        self.delta_floor = delta_floor
        self._s = s
        self._s_sqnorm = s_sqnorm
        self._diag_mean = diag_mean

    def apply_sample(self, i: int, u: np.ndarray) -> np.ndarray:
        """A_i @ u for sample i."""
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.model.d,):
            raise ValueError(f"u has shape {u.shape}, expected ({self.model.d},)")
        if self.variant == "none":
            return np.zeros_like(u)
        if self.variant == "full_hessian":
            return self.model.hess_vec_sample(i, self.anchor, u)
        if self.variant == "diag_hessian":
            return self.model.hess_diag_sample(i, self.anchor) * u
        # bb_scalar: two sparse gradient evaluations, recomputed on demand
        # (memory parity with plain SVRG; the per-sample scalar is not floored)
        diff = self.model.grad_sample_delta(i, self.anchor, self.anchor_prev)
        scalar_i = float(self._s @ diff) / self._s_sqnorm
        return scalar_i * u

    def apply_mean(self, u: np.ndarray) -> np.ndarray:
        """A @ u."""
        u = np.asarray(u, dtype=np.float64)
        if u.shape != (self.model.d,):
            raise ValueError(f"u has shape {u.shape}, expected ({self.model.d},)")
        if self.variant == "none":
            return np.zeros_like(u)
        if self.variant == "full_hessian":
            return self.model.mean_hess_vec(self.anchor, u)
        if self.variant == "diag_hessian":
            return self._diag_mean * u
        return self.bb_scalar * u

    def __repr__(self):
        if self.variant == "bb_scalar":
            return f"CorrectionOperator(bb_scalar={self.bb_scalar:g})"
        return f"CorrectionOperator({self.variant})"


def build_correction(variant: str, model: LossModel, w_curr: np.ndarray,
                     w_prev: np.ndarray | None = None,
                     delta_floor: float | None = None,
                     g_curr: np.ndarray | None = None,
                     g_prev: np.ndarray | None = None) -> CorrectionOperator:
    """Build the epoch's correction operator anchored at ``w_curr``.

    With no previous anchor (``w_prev is None``, the first epoch) every
    variant degrades to the zero operator.  For ``bb_scalar`` the mean
    scalar is s^T y / ||s||^2 with s = w_curr - w_prev and
    y = grad F(w_curr) - grad F(w_prev) (supply ``g_curr``/``g_prev`` to
    reuse cached full gradients), floored at ``delta_floor``.

    Raises
    ------
    DegenerateAnchorError
        bb_scalar with coinciding anchors; callers fall back to ``none``
        for that epoch.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown correction variant {variant!r}")
    w_curr = np.asarray(w_curr, dtype=np.float64)
    if w_prev is None or variant == "none":
        return CorrectionOperator("none", model, w_curr)
    w_prev = np.asarray(w_prev, dtype=np.float64)

    if variant == "full_hessian":
        return CorrectionOperator("full_hessian", model, w_curr)

    if variant == "diag_hessian":
        return CorrectionOperator("diag_hessian", model, w_curr,
                                  diag_mean=model.mean_hess_diag(w_curr))

    s = w_curr - w_prev
    s_sqnorm = float(s @ s)
    if s_sqnorm == 0.0:
        raise DegenerateAnchorError("anchor displacement is zero; no BB scalar")
    if g_curr is None:
        g_curr = model.grad_full(w_curr)
    if g_prev is None:
        g_prev = model.grad_full(w_prev)
    raw = float(s @ (g_curr - g_prev)) / s_sqnorm
    if delta_floor is None:
        delta_floor = default_delta_floor(model)
    return CorrectionOperator("bb_scalar", model, w_curr, anchor_prev=w_prev,
                              bb_raw=raw, bb_scalar=max(raw, delta_floor),
                              s=s, s_sqnorm=s_sqnorm, delta_floor=delta_floor)


def bb_scalar_alternative(s: np.ndarray, y: np.ndarray) -> float:
    """The second secant pairing s^T y / ||y||^2.

    Exposed for completeness; the operators above use the
    s^T y / ||s||^2 form, which pairs with the convergence analysis.
    """
    s = np.asarray(s, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    y_sq = float(y @ y)
    if y_sq == 0.0:
        raise ValueError("y must be nonzero")
    return float(s @ y) / y_sq
