"""The epoch/inner-loop optimizer with variance-corrected search directions.

One run executes K epochs.  Each epoch snapshots the full gradient at the
anchor, builds the method's correction operator from the current and
previous anchors, then takes m stochastic inner steps

    w_t = w_{t-1} - eta * v_t,
    v_t = grad f_i(w_{t-1}) - grad f_i(anchor) + g_anchor
          + (A - A_i)(w_{t-1} - anchor),

and finally promotes either the last inner iterate (option 1) or a
uniformly random one (option 2) to the next anchor.  Method names:

    SVRG          no correction, constant step
    SVRG2         full-Hessian correction (matrix-free), constant step
    SVRG2D        diagonal-Hessian correction, constant step
    SVRG2BB       BB-scalar correction, constant step
    SVRGBB        no correction, per-epoch BB step
    SVRG2BBS-M1/2/3  BB-scalar correction, generalized BB step presets

Reproducibility: the draw order per epoch is (option-2 anchor index if
applicable, then the m sample indices in one block), all from the run's
single seeded generator, so (seed, config, dataset) fully determine the
trajectory.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .correction import DegenerateAnchorError, build_correction
from .losses import LossModel
from .stepsize import CurvatureError, EpochAnchors, StepSizeSchedule
from .stepsize import step as schedule_step

METHODS = ("SVRG", "SVRG2", "SVRG2D", "SVRG2BB", "SVRGBB",
           "SVRG2BBS-M1", "SVRG2BBS-M2", "SVRG2BBS-M3")

_VARIANT_FOR = {
    "SVRG": "none",
    "SVRG2": "full_hessian",
    "SVRG2D": "diag_hessian",
    "SVRG2BB": "bb_scalar",
    "SVRGBB": "none",
    "SVRG2BBS-M1": "bb_scalar",
    "SVRG2BBS-M2": "bb_scalar",
    "SVRG2BBS-M3": "bb_scalar",
}

_SCHEDULE_KIND_FOR = {
    "SVRG": "constant",
    "SVRG2": "constant",
    "SVRG2D": "constant",
    "SVRG2BB": "constant",
    "SVRGBB": "epoch_bb",
    "SVRG2BBS-M1": "generalized_bb",
    "SVRG2BBS-M2": "generalized_bb",
    "SVRG2BBS-M3": "generalized_bb",
}


def correction_variant_for(method: str) -> str:
    return _VARIANT_FOR[method]


class DivergenceError(RuntimeError):
    """An iterate left the divergence guard; carries (epoch, step, records)."""

    def __init__(self, message, epoch, step, records=None):
        super().__init__(message)
        self.epoch = epoch
        self.step = step
        self.records = records or []


@dataclass(frozen=True)
class RunConfig:
    method: str
    schedule: StepSizeSchedule
    epochs: int
    m: int | None = None          # inner length; None resolves to 2n
    anchor_option: int = 1
    seed: int = 0
    delta_floor: float | None = None
    variance_mode: str = "last"   # "last" | "anchor" | "none"
    variance_enum_cap: int = 5000
    variance_samples: int = 1024

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.m is not None and self.m < 1:
            raise ValueError("inner length m must be >= 1")
        if self.anchor_option not in (1, 2):
            raise ValueError("anchor_option must be 1 or 2")
        if self.variance_mode not in ("last", "anchor", "none"):
            raise ValueError(f"unknown variance mode {self.variance_mode!r}")
        want = _SCHEDULE_KIND_FOR[self.method]
        if self.schedule.kind != want:
            raise ValueError(
                f"method {self.method} requires a {want!r} schedule, "
                f"got {self.schedule.kind!r}")

    def resolve_m(self, n: int) -> int:
        return self.m if self.m is not None else 2 * n


@dataclass
class EpochRecord:
    """Telemetry for one completed epoch (1-based epoch index)."""

    epoch: int
    fval: float
    gap: float          # fval - f_star; nan when no reference supplied
    wall_time: float    # cumulative seconds spent in inner loops only
    variance: float     # ||v - grad F||^2 at the measure point; nan when off
    step_size: float    # step used at the final inner iteration
    grad_evals: int     # cumulative per-sample gradient evaluations


@dataclass
class InnerSummary:
    final_iterate: np.ndarray
    next_anchor: np.ndarray
    last_step: float
    grad_evals: int
    curvature_fallbacks: int = 0


def direction(model: LossModel, correction, w_curr: np.ndarray,
              w_anchor: np.ndarray, g_anchor: np.ndarray, i: int) -> np.ndarray:
    """The corrected stochastic direction v_t for sample i.

    With the zero correction this is the plain variance-reduced gradient
    grad f_i(w) - grad f_i(anchor) + g_anchor; the correction adds
    (A - A_i)(w - anchor).  E_i[v_t] = grad F(w_curr) for every variant.
    """
    v = model.grad_sample_delta(i, w_curr, w_anchor)
    v += g_anchor
    if correction is not None and correction.variant != "none":
        u = w_curr - w_anchor
        v += correction.apply_mean(u)
        v -= correction.apply_sample(i, u)
    return v


def _direction_gevals(correction) -> int:
    # grad_sample_delta counts as two per-sample gradient evaluations;
    # the BB per-sample scalar recomputes two more at the anchors.
    if correction is not None and correction.variant == "bb_scalar":
        return 4
    return 2


def run_epoch(model: LossModel, config: RunConfig, correction,
              schedule_anchors: EpochAnchors | None, epoch: int,
              w_anchor: np.ndarray, g_anchor: np.ndarray,
              rng: np.random.Generator, m: int,
              norm_guard: float, last_bb_step: float | None = None) -> InnerSummary:
    """Run the m inner iterations of one (0-based) epoch.

    Raises :class:`DivergenceError` when an iterate exceeds the norm guard
    or turns non-finite.  Curvature failures in BB schedules fall back to
    the last valid BB step, else the schedule's eta0.
    """
    w = w_anchor.copy()
    option2_t = int(rng.integers(m)) if config.anchor_option == 2 else None
    idx = rng.integers(0, model.n, size=m)
    snapshot = None
    gevals = 0
    fallbacks = 0
    eta = float("nan")
    per_direction = _direction_gevals(correction)

    for t in range(m):
        if option2_t is not None and t == option2_t:
            snapshot = w.copy()
        try:
            eta = schedule_step(config.schedule, schedule_anchors, epoch, t, m)
        except CurvatureError:
            fallbacks += 1
            if last_bb_step is not None:
                eta = last_bb_step
            elif config.schedule.eta0 is not None:
                eta = config.schedule.eta0
            else:
                raise
        if config.schedule.kind != "constant":
            last_bb_step = eta
        v = direction(model, correction, w, w_anchor, g_anchor, int(idx[t]))
        gevals += per_direction
        w -= eta * v
        if not np.isfinite(w).all() or float(w @ w) > norm_guard * norm_guard:
            raise DivergenceError(
                f"iterate diverged at epoch {epoch + 1}, inner step {t + 1}",
                epoch + 1, t + 1)

    next_anchor = snapshot if option2_t is not None else w
    return InnerSummary(final_iterate=w, next_anchor=next_anchor.copy(),
                        last_step=eta, grad_evals=gevals,
                        curvature_fallbacks=fallbacks)


def measure_variance(model: LossModel, correction, w_curr: np.ndarray,
                     w_anchor: np.ndarray, g_anchor: np.ndarray, *,
                     enum_cap: int = 5000, n_samples: int = 1024,
                     rng: np.random.Generator | None = None) -> float:
    """(1/n) sum_i ||v_t(i) - grad F(w_curr)||^2.

    Exact enumeration over all samples when n <= enum_cap, otherwise an
    unbiased estimate from ``n_samples`` uniform draws.  The mean-operator
    and full-gradient terms are shared across i, so they are hoisted out of
    the per-sample loop.
    """
    g_full = model.grad_full(w_curr)
    common = g_anchor - g_full
    u = None
    if correction is not None and correction.variant != "none":
        u = w_curr - w_anchor
        common = common + correction.apply_mean(u)

    n = model.n
    if n <= enum_cap:
        indices = range(n)
        count = n
    else:
        if rng is None:
            rng = np.random.default_rng(0)
        indices = rng.integers(0, n, size=n_samples)
        count = n_samples

    acc = 0.0
    for i in indices:
        r = model.grad_sample_delta(int(i), w_curr, w_anchor)
        r += common
        if u is not None:
            r -= correction.apply_sample(int(i), u)
        acc += float(r @ r)
    return acc / count


def optimize(model: LossModel, config: RunConfig, w0: np.ndarray,
             w_star: np.ndarray | None = None) -> tuple[np.ndarray, list[EpochRecord]]:
    """Run K epochs from w0; returns the final anchor and per-epoch telemetry.

    Per epoch: one full-gradient snapshot, the correction build from the
    (current, previous) anchor pair, m inner steps, then the anchor update.
    Wall-time telemetry covers the inner loops only; variance telemetry is
    enumerated outside the timer.  Gradient-evaluation accounting per epoch:
    n + 2m for plain directions, n + 4m when the BB per-sample scalar is
    active (its two extra anchor gradients per step), and the first epoch
    of every correction method runs uncorrected (no previous anchor).
    SVRG2 additionally performs m*(n+1) Hessian-vector sample products per
    corrected epoch (computed as matrix-free matvecs); these are not
    gradient evaluations and are not included in ``grad_evals``.

    Divergence aborts the run with the completed epochs' records attached
    to the raised :class:`DivergenceError`.
    """
    w0 = np.asarray(w0, dtype=np.float64)
    if w0.shape != (model.d,) or not np.isfinite(w0).all():
        raise ValueError("w0 must be a finite vector of length d")
    n = model.n
    m = config.resolve_m(n)
    rng = np.random.default_rng(config.seed)
    f_star = model.value(w_star) if w_star is not None else None
    norm_guard = 1e8 * (1.0 + float(np.linalg.norm(w0)))
    variant = correction_variant_for(config.method)

    records: list[EpochRecord] = []
    anchor = w0.copy()
    anchor_prev = None
    g_prev = None
    cum_time = 0.0
    cum_gevals = 0
    last_bb_step = None

    for epoch in range(config.epochs):
        g_anchor = model.grad_full(anchor)
        cum_gevals += n

        try:
            corr = build_correction(variant, model, anchor, anchor_prev,
                                    delta_floor=config.delta_floor,
                                    g_curr=g_anchor, g_prev=g_prev)
        except DegenerateAnchorError:
            corr = build_correction("none", model, anchor)
        sched_anchors = None
        if anchor_prev is not None:
            sched_anchors = EpochAnchors(anchor_prev, anchor, g_prev, g_anchor)

        tic = time.perf_counter()
        try:
            summary = run_epoch(model, config, corr, sched_anchors, epoch,
                                anchor, g_anchor, rng, m, norm_guard,
                                last_bb_step)
        except DivergenceError as err:
            err.records = records
            raise
        cum_time += time.perf_counter() - tic
        cum_gevals += summary.grad_evals
        if config.schedule.kind != "constant" and np.isfinite(summary.last_step):
            last_bb_step = summary.last_step

        if config.variance_mode == "last":
            var = measure_variance(model, corr, summary.final_iterate, anchor,
                                   g_anchor, enum_cap=config.variance_enum_cap,
                                   n_samples=config.variance_samples,
                                   rng=np.random.default_rng((config.seed, epoch)))
        elif config.variance_mode == "anchor":
            var = measure_variance(model, corr, anchor, anchor, g_anchor,
                                   enum_cap=config.variance_enum_cap,
                                   n_samples=config.variance_samples,
                                   rng=np.random.default_rng((config.seed, epoch)))
        else:
            var = float("nan")

        anchor_prev, g_prev = anchor, g_anchor
        anchor = summary.next_anchor
        fval = model.value(anchor)
        if not np.isfinite(fval):
            raise DivergenceError(f"objective non-finite after epoch {epoch + 1}",
                                  epoch + 1, m, records)
        records.append(EpochRecord(
            epoch=epoch + 1,
            fval=fval,
            gap=(fval - f_star) if f_star is not None else float("nan"),
            wall_time=cum_time,
            variance=var,
            step_size=summary.last_step,
            grad_evals=cum_gevals,
        ))

    return anchor, records


def expected_grad_evals(method: str, n: int, m: int, epochs: int) -> list[int]:
    """Closed-form cumulative gradient-evaluation counts per epoch.

    Every epoch pays the full pass n plus 2m inner gradients; methods with
    the BB per-sample scalar pay 2m more from their second epoch on (the
    first epoch runs uncorrected).
    """
    bb = correction_variant_for(method) == "bb_scalar"
    out, total = [], 0
    for epoch in range(epochs):
        total += n + 2 * m
        if bb and epoch >= 1:
            total += 2 * m
        out.append(total)
    return out
