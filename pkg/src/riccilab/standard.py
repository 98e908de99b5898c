"""Numerical evolution of the reference cap metric: the persistence oracle.

The reference cap extended by an exact cylinder is evolved as a Ball slice
with frozen far field.  The resulting table of checkpoints supplies
R_min(t), the sectional-curvature ceiling on [0, 4/5], and the profile
comparisons used to verify that freshly glued surgery caps evolve like this
model solution for a definite rescaled time.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .config import FlowConfig
from .errors import DomainError, InsufficientHistory
from .flow import EngineCallbacks, FlowState, StopKind, evolve_until
from .geometry import MetricSlice, compute_curvature
from .history import History

SQRT2 = float(np.sqrt(2.0))


@dataclass
class StandardTable:
    """Checkpointed evolution of the reference cap metric on [0, t_max]."""

    times: list[float]
    slices: list[MetricSlice]
    r_min: list[float]            # margin-excluded interior R_min per time
    k_st: float                   # sup |sectional| over t <= 4/5
    const_st_measured: float      # min over table of R_min(t) (1 - t)
    margin: float
    delta: float

    def slice_at(self, t: float) -> tuple[float, MetricSlice]:
        if not self.times:
            raise InsufficientHistory("empty standard table")
        if t < -1e-12 or t > self.times[-1] + 1e-9:
            raise DomainError(f"t={t:g} outside table range")
        i = bisect.bisect_left(self.times, t)
        cands = [j for j in (i - 1, i) if 0 <= j < len(self.times)]
        j = min(cands, key=lambda j: abs(self.times[j] - t))
        return self.times[j], self.slices[j]

    def r_min_at(self, t: float) -> float:
        return float(np.interp(t, self.times, self.r_min))


def build_standard_table(cap, t_max: float = 0.9,
                         config: FlowConfig | None = None,
                         checkpoint_dt: float = 0.01,
                         truncation_factor: float = 3.0) -> StandardTable:
    """Evolve the reference cap to t_max, checkpointing along the way.

    The noncompact end is truncated at truncation_factor * (5 + 1/delta)
    with frozen far field; monitors and the tabulated R_min exclude the
    boundary margin.  Records the sectional ceiling on [0, 4/5] and the
    measured floor of R_min(t)(1 - t).
    """
    if not (0.0 < t_max <= 0.95):
        raise DomainError("t_max must lie in (0, 0.95]")
    cfg = config or FlowConfig()
    margin = max(cfg.boundary_margin, 3.0)
    trunc = truncation_factor * (5.0 + 1.0 / cap.delta)
    slc = cap.to_slice(truncation=trunc)
    # bring the profile grid to the engine's working resolution
    from .geometry import ResamplePolicy, resample
    slc = resample(slc, ResamplePolicy(
        points_per_scale=int(cfg.coarsen_target * cfg.points_per_scale),
        max_nodes=cfg.max_nodes))

    times: list[float] = []
    slices: list[MetricSlice] = []
    r_mins: list[float] = []
    k_st = 0.0

    state = FlowState.from_slices([slc], margin=margin)

    def checkpoint():
        nonlocal k_st
        cur = state.slices[0]
        fld = compute_curvature(cur, check=False)
        m = cur.interior_mask(margin)
        times.append(state.t)
        slices.append(cur)
        r_mins.append(float(np.min(fld.r_scalar[m])))
        if state.t <= 0.8 + 1e-12:
            k_st = max(k_st, float(np.max(fld.rm_norm[m])))

    run_cfg = FlowConfig(**{**cfg.to_dict(),
                            "boundary_margin": margin,
                            "horizon": t_max,
                            "extinction_psi": 0.0,
                            "monitor_rmin_bound": False})
    checkpoint()
    t_next = checkpoint_dt
    while state.t < t_max - 1e-12:
        ev = evolve_until(state, theta=np.inf,
                          horizon=min(t_next, t_max), config=run_cfg)
        if ev.kind is StopKind.MONITOR_VIOLATION:
            raise DomainError(f"standard solution violated a monitor: "
                              f"{ev.payload}")
        checkpoint()
        t_next = min(t_next + checkpoint_dt, t_max)

    const = min(r * (1.0 - t) for r, t in zip(r_mins, times))
    return StandardTable(times=times, slices=slices, r_min=r_mins,
                         k_st=k_st, const_st_measured=const,
                         margin=margin, delta=cap.delta)


# ---------------------------------------------------------------------------
# persistence of freshly glued caps
# ---------------------------------------------------------------------------


@dataclass
class PersistenceReport:
    passed: bool
    closeness: float
    tolerance: float
    n_samples: int
    scathed: bool = False
    disappeared: bool | None = None
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "record": "persistence",
            "passed": self.passed,
            "closeness": self.closeness,
            "tolerance": self.tolerance,
            "n_samples": self.n_samples,
            "scathed": self.scathed,
            "disappeared": self.disappeared,
            "detail": self.detail,
        }


def persistence_check(history: History, component_id: int, tip_x: float,
                      t0: float, h: float, a_radius: float, theta_frac: float,
                      table: StandardTable,
                      t_end: float | None = None) -> PersistenceReport:
    """Compare a glued cap's evolution against the standard table.

    The run's neighbourhood of the cap tip is parabolically rescaled by
    h^-2 and compared, at the stored times in [t0, t0 + theta_frac * h^2],
    with the table profiles over the ball of rescaled radius ``a_radius``
    around the model tip.  Passing means the C^2 profile deviation stays
    at most 1/a_radius.  If the region is scathed before the window ends,
    the check instead verifies that it disappeared (conclusion for scathed
    caps), and reports that path.
    """
    window = theta_frac * h * h
    t1 = t0 + window
    if t_end is not None:
        t1 = min(t1, t_end)
    tol = 1.0 / a_radius

    # locate the spatial window: |x - tip_x| within a_radius * h of the tip
    # (coordinates near the tip are cap-born, in units of h by construction)
    x_lo = tip_x - 1.2 * a_radius * h / SQRT2 - 6.0 * h
    x_hi = tip_x + 1.2 * a_radius * h / SQRT2 + 6.0 * h

    scathed = not history.interval_unscathed(component_id, x_lo, x_hi, t0, t1)
    if scathed:
        rec = history.records.get(component_id)
        disappeared = rec is not None and rec.died_t is not None \
            and rec.died_t <= t1 + 1e-12
        return PersistenceReport(passed=bool(disappeared), closeness=np.inf,
                                 tolerance=tol, n_samples=0, scathed=True,
                                 disappeared=disappeared)

    try:
        profs = history.profile_window(component_id, x_lo, x_hi, t0, t1,
                                       min_samples=2)
    except InsufficientHistory:
        raise

    worst = 0.0
    used = 0
    for (t, x, phi, psi) in profs:
        if x.size < 5:
            continue
        tau = (t - t0) / (h * h)
        if tau > theta_frac + 1e-9:
            continue
        t_model, model = table.slice_at(tau)
        dev = _profile_deviation(x, phi, psi, tip_x, h, model, a_radius)
        if dev is None:
            continue
        worst = max(worst, dev)
        used += 1
    if used == 0:
        raise InsufficientHistory("no usable stored profiles in the window")
    return PersistenceReport(passed=worst <= tol, closeness=worst,
                             tolerance=tol, n_samples=used,
                             detail={"window": (t0, t1), "h": h})


def _profile_deviation(x, phi, psi, tip_x, h, model: MetricSlice,
                       a_radius: float) -> float | None:
    """C^0/C^1 deviation of the rescaled cap profile from the model,
    matched by arclength distance from the respective tips."""
    tip_i = int(np.argmin(np.abs(x - tip_x)))
    if psi[tip_i] > 0.25 * h:
        return None  # the tip is not in the stored window
    seg = np.abs(np.diff(x)) * 0.5 * (phi[:-1] + phi[1:])
    s = np.concatenate(([0.0], np.cumsum(seg)))
    d = np.abs(s - s[tip_i]) / h  # rescaled distance from the tip
    sel = d <= a_radius
    if np.count_nonzero(sel) < 4:
        return None
    psi_resc = psi[sel] / h

    sm = model.arclength()
    psim = np.interp(d[sel], sm, model.psi)
    dev = np.abs(psi_resc - psim) / SQRT2
    # first-derivative comparison on the same matched coordinate
    dd = d[sel]
    if dd.size >= 3:
        g1 = np.gradient(psi_resc, dd)
        g1m = np.gradient(psim, dd)
        dev = np.maximum(dev, np.abs(g1 - g1m))
    return float(np.max(dev))
