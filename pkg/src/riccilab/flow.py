"""Time integration of the rotationally symmetric Ricci flow.

In arclength s the warped-product reduction of dg/dt = -2 Ric is

    d phi / dt = -2 K_rad phi
    d psi / dt = -(K_sph + K_rad) psi

which reproduces the homothetic solutions exactly: the round sphere has
R(t) = 6/(r0^2 - 4t) and the round cylinder R(t) = R0/(1 - R0 t).  Stepping
is explicit Heun (RK2) under dt = cfl * ds_min^2 / max(1, |Rm|_max); pole
values stay pinned (psi = 0) and frozen boundary nodes keep their initial
data.  The engine localizes the surgery trigger R_max = Theta by bisecting
the final step, and runs the scalar-curvature monitors on every accepted
step.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .config import FlowConfig
from .errors import CFLViolation, DomainError, MonitorViolation, NonPositiveWarp
from .geometry import (
    CurvatureField,
    MetricSlice,
    ResamplePolicy,
    compute_curvature,
    needs_regrid,
    resample,
)
from .history import History
from .pinching import is_pinched_toward_positive

# ---------------------------------------------------------------------------
# a priori scalar-curvature bounds
# ---------------------------------------------------------------------------


def rmin_lower_bound(t: float, r_min_0: float, t0: float = 0.0) -> float:
    """Maximum-principle floor R_min(t) >= R_min(t0)/(1 - 2(t-t0) R_min(t0)/3).

    Only meaningful for r_min_0 >= 0; raises DomainError at or beyond the
    bound's blow-up time.
    """
    if r_min_0 < 0:
        raise DomainError("rmin_lower_bound requires r_min_0 >= 0")
    if r_min_0 == 0:
        return 0.0
    denom = 1.0 - 2.0 * (t - t0) * r_min_0 / 3.0
    if denom <= 0.0:
        raise DomainError(
            f"t={t:g} is at or beyond the blow-up time of the bound")
    return r_min_0 / denom


def extinction_deadline(r_min_0: float) -> float:
    """Blow-up time 3/(2 R_min(0)) of the scalar floor: extinction must
    happen by then."""
    if r_min_0 <= 0:
        raise DomainError("extinction_deadline requires r_min_0 > 0")
    return 1.5 / r_min_0


# ---------------------------------------------------------------------------
# single-slice stepping
# ---------------------------------------------------------------------------


def _rhs(slc: MetricSlice, fld: CurvatureField):
    dphi = -2.0 * fld.k_rad * slc.phi
    dpsi = -(fld.k_sph + fld.k_rad) * slc.psi
    n = slc.n
    topo = slc.topology
    if topo.left_pole:
        dpsi[0] = 0.0
    if topo.right_pole:
        dpsi[-1] = 0.0
    if topo.frozen_left:
        dphi[0] = 0.0
        dpsi[0] = 0.0
    if topo.frozen_right:
        dphi[-1] = 0.0
        dpsi[-1] = 0.0
    return dphi, dpsi


def cfl_dt(slc: MetricSlice, fld: CurvatureField, cfl: float) -> float:
    ds_min = float(np.min(slc.cell_lengths()))
    rm_max = float(np.max(fld.rm_norm))
    return cfl * ds_min ** 2 / max(1.0, rm_max)


def step(slc: MetricSlice, dt: float, cfl: float = 0.2,
         fld: CurvatureField | None = None) -> MetricSlice:
    """One Heun step; grid and topology unchanged.

    Raises CFLViolation when dt exceeds the stability bound and
    NonPositiveWarp when psi would cross zero at an interior node.
    """
    if fld is None:
        fld = compute_curvature(slc, check=False)
    limit = cfl_dt(slc, fld, cfl)
    if dt > limit * (1.0 + 1e-9):
        raise CFLViolation(f"dt={dt:g} exceeds CFL limit {limit:g}")
    d1phi, d1psi = _rhs(slc, fld)
    mid = slc.with_fields(phi=slc.phi + dt * d1phi, psi=slc.psi + dt * d1psi,
                          t=slc.t + dt)
    fld_mid = compute_curvature(mid, check=False)
    d2phi, d2psi = _rhs(mid, fld_mid)
    phi_new = slc.phi + 0.5 * dt * (d1phi + d2phi)
    psi_new = slc.psi + 0.5 * dt * (d1psi + d2psi)
    out = slc.with_fields(phi=phi_new, psi=psi_new, t=slc.t + dt)
    # psi crossing zero in the interior means a missed surgery
    interior = np.ones(out.n, dtype=bool)
    if out.topology.left_pole or out.topology.frozen_left:
        interior[0] = False
    if out.topology.right_pole or out.topology.frozen_right:
        interior[-1] = False
    bad = interior & (psi_new <= 0.0)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise NonPositiveWarp(i, psi_new[i], out.t)
    return out


# ---------------------------------------------------------------------------
# state, events, monitors
# ---------------------------------------------------------------------------


class StopKind(enum.Enum):
    THRESHOLD_HIT = "threshold_hit"
    EXTINCT = "extinct"
    HORIZON_REACHED = "horizon_reached"
    MONITOR_VIOLATION = "monitor_violation"


@dataclass
class StopEvent:
    kind: StopKind
    t: float
    payload: dict = field(default_factory=dict)


@dataclass
class FlowState:
    """Live components plus run-level bookkeeping."""

    slices: dict[int, MetricSlice]
    t: float
    r_min_initial: float
    t_initial: float = 0.0
    steps: int = 0
    regrids: int = 0
    dt_last: float = 0.0
    next_component_id: int = 1

    @classmethod
    def from_slices(cls, slices, margin: float = 0.0) -> "FlowState":
        d = {}
        for slc in slices:
            d[slc.component_id] = slc
        t = min((s.t for s in d.values()), default=0.0)
        rmin = np.inf
        for s in d.values():
            fld = compute_curvature(s, check=False)
            rmin = min(rmin, float(np.min(fld.r_scalar[s.interior_mask(margin)])))
        nid = max(d.keys(), default=-1) + 1
        return cls(slices=d, t=t, r_min_initial=float(rmin), t_initial=t,
                   next_component_id=nid)

    def stats(self, margin: float = 0.0):
        """Global (R_min, R_max) over margin-excluded nodes."""
        rmin, rmax = np.inf, -np.inf
        for s in sorted(self.slices):
            fld = compute_curvature(self.slices[s], check=False)
            m = self.slices[s].interior_mask(margin)
            rmin = min(rmin, float(np.min(fld.r_scalar[m])))
            rmax = max(rmax, float(np.max(fld.r_scalar[m])))
        return rmin, rmax


@dataclass
class MonitorRecord:
    monitor: str
    t: float
    component_id: int
    passed: bool
    detail: dict

    def to_json(self) -> dict:
        return {
            "record": "monitor",
            "monitor": self.monitor,
            "t": self.t,
            "component_id": self.component_id,
            "passed": self.passed,
            "detail": self.detail,
        }


def scalar_monitors(prev_fld: CurvatureField, fld: CurvatureField,
                    slc: MetricSlice, dt: float, r: float, c0: float,
                    margin: float = 0.0) -> MonitorRecord:
    """Gradient and time-derivative estimates at hot nodes.

    At every node with R >= r^-2 checks |grad R| < C0 R^{3/2} and
    |dR/dt| < C0 R^2, reporting the smallest margins (diagnostic only).
    """
    rinv2 = r ** -2
    mask = (fld.r_scalar >= rinv2) & slc.interior_mask(margin)
    detail = {"hot_nodes": int(np.count_nonzero(mask))}
    passed = True
    if np.any(mask):
        h = slc.cell_lengths()
        dr, _ = _grad_arclength(fld.r_scalar, h, slc.topology.periodic)
        grad_margin = c0 * fld.r_scalar[mask] ** 1.5 - np.abs(dr[mask])
        detail["grad_margin_min"] = float(np.min(grad_margin))
        passed = passed and detail["grad_margin_min"] >= 0.0
        if prev_fld is not None and prev_fld.r_scalar.size == fld.r_scalar.size \
                and dt > 0:
            drdt = (fld.r_scalar - prev_fld.r_scalar) / dt
            dt_margin = c0 * fld.r_scalar[mask] ** 2 - np.abs(drdt[mask])
            detail["dt_margin_min"] = float(np.min(dt_margin))
            passed = passed and detail["dt_margin_min"] >= 0.0
    return MonitorRecord("scalar_estimates", slc.t, slc.component_id,
                         passed, detail)


def _grad_arclength(vals, h, periodic):
    n = vals.size
    d = np.zeros(n)
    if periodic:
        vm, vp = np.roll(vals, 1), np.roll(vals, -1)
        hm, hp = np.roll(h, 1), h
        d[:] = (vp - vm) / (hm + hp)
        return d, None
    d[1:-1] = (vals[2:] - vals[:-2]) / (h[:-1] + h[1:])
    d[0] = (vals[1] - vals[0]) / h[0]
    d[-1] = (vals[-1] - vals[-2]) / h[-1]
    return d, None


# ---------------------------------------------------------------------------
# evolve loop
# ---------------------------------------------------------------------------


class EngineCallbacks:
    """Hooks the harness plugs in; defaults are no-ops."""

    def on_record(self, record: MonitorRecord):  # pragma: no cover
        pass

    def on_series(self, t, component_id, rmin, rmax, volume, psi_min, nodes):
        pass

    def on_disappear(self, slc: MetricSlice, t: float, classification: dict):
        pass


def evolve_until(state: FlowState, theta: float, horizon: float,
                 config: FlowConfig, history: History | None = None,
                 callbacks: EngineCallbacks | None = None) -> StopEvent:
    """Advance all components until R_max = theta, extinction, the horizon,
    or a monitor violation.

    Mutates ``state`` in place.  The threshold event is localized by
    bisecting the final step so that |R_max - theta|/theta <= event_tol.
    Disappearing-round components (eps0-round, R >= 1, small warp radius)
    are removed on the fly and reported through the callbacks.
    """
    cb = callbacks or EngineCallbacks()
    margin = config.boundary_margin
    prev_fields: dict[int, CurvatureField] = {}
    last_snap = -np.inf

    while True:
        if not state.slices:
            return StopEvent(StopKind.EXTINCT, state.t)

        ids = sorted(state.slices)
        fields = {}
        for cid in ids:
            fields[cid] = compute_curvature(state.slices[cid], check=False)

        # ---- monitors ----------------------------------------------------
        violation = _run_monitors(state, fields, config, margin, cb,
                                  prev_fields)
        if violation is not None:
            if config.abort_on_violation:
                return StopEvent(StopKind.MONITOR_VIOLATION, state.t,
                                 payload=violation)
            # permissive mode downgrades to a warning record (already logged)

        # ---- series + history snapshots ------------------------------------
        rmax = -np.inf
        rm_norm_max = 0.0
        for cid in ids:
            m = state.slices[cid].interior_mask(margin)
            rmax = max(rmax, float(np.max(fields[cid].r_scalar[m])))
            rm_norm_max = max(rm_norm_max,
                              float(np.max(fields[cid].rm_norm)))
        if state.steps % config.series_stride == 0:
            for cid in ids:
                slc, fld = state.slices[cid], fields[cid]
                m = slc.interior_mask(margin)
                cb.on_series(state.t, cid,
                             float(np.min(fld.r_scalar[m])),
                             float(np.max(fld.r_scalar[m])),
                             slc.volume(),
                             float(np.min(slc.psi[m])) if np.any(m) else 0.0,
                             slc.n)
        if history is not None:
            cadence = 1.0 / (config.samples_per_window * max(rm_norm_max, 1.0))
            if state.t - last_snap >= cadence:
                history.add_snapshot(state.t, state.slices)
                last_snap = state.t

        # ---- disappearing-round removal -----------------------------------
        removed = _detect_disappearing(state, fields, config, margin, cb,
                                       history)
        if removed:
            for cid in removed:
                prev_fields.pop(cid, None)
            continue

        # ---- stop conditions ----------------------------------------------
        if rmax >= theta * (1.0 - config.event_tol):
            return StopEvent(StopKind.THRESHOLD_HIT, state.t,
                             payload={"r_max": rmax})
        if state.t >= horizon - 1e-15:
            return StopEvent(StopKind.HORIZON_REACHED, state.t,
                             payload={"r_max": rmax})

        # ---- regrid -------------------------------------------------------
        if state.steps % config.regrid_stride == 0:
            for cid in ids:
                slc, fld = state.slices[cid], fields[cid]
                if needs_regrid(slc, fld, config.points_per_scale,
                                config.coarsen_factor):
                    tgt = ResamplePolicy(
                        points_per_scale=int(config.coarsen_target
                                             * config.points_per_scale),
                        max_nodes=config.max_nodes)
                    state.slices[cid] = resample(slc, tgt)
                    fields[cid] = compute_curvature(state.slices[cid],
                                                    check=False)
                    prev_fields.pop(cid, None)
                    state.regrids += 1

        # ---- step ---------------------------------------------------------
        dt = min(cfl_dt(state.slices[cid], fields[cid], config.cfl)
                 for cid in ids)
        dt = min(dt, horizon - state.t)
        # careful mode only in striking distance of the threshold
        careful = rmax * (1.0 + 8.0 * dt * max(rmax, 1.0)) \
            >= theta * (1.0 - config.event_tol)
        if careful:
            stepped, dt = _try_step(state, fields, dt, theta, config, margin)
        else:
            stepped = {cid: step(state.slices[cid], dt, config.cfl,
                                 fld=fields[cid]) for cid in ids}
        for cid in ids:
            prev_fields[cid] = fields[cid]
        state.slices = stepped
        state.t += dt
        state.dt_last = dt
        state.steps += 1


def _try_step(state: FlowState, fields, dt, theta, config, margin):
    """Step all components by dt, bisecting when R_max overshoots theta."""
    ids = sorted(state.slices)

    def attempt(dt_try):
        out = {}
        rmax = -np.inf
        for cid in ids:
            out[cid] = step(state.slices[cid], dt_try, config.cfl,
                            fld=fields[cid])
            fld = compute_curvature(out[cid], check=False)
            m = out[cid].interior_mask(margin)
            rmax = max(rmax, float(np.max(fld.r_scalar[m])))
        return out, rmax

    stepped, rmax = attempt(dt)
    if rmax <= theta * (1.0 + config.event_tol):
        return stepped, dt
    # bisect the final step onto the threshold
    lo, hi = 0.0, dt
    best = None
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        stepped_mid, rmax_mid = attempt(mid)
        if rmax_mid > theta * (1.0 + config.event_tol):
            hi = mid
        elif rmax_mid < theta * (1.0 - config.event_tol):
            lo = mid
            best = (stepped_mid, mid)
        else:
            return stepped_mid, mid
    if best is None:  # pragma: no cover - landing failed, take tiny step
        stepped_lo, _ = attempt(hi * 0.5)
        return stepped_lo, hi * 0.5
    return best


def _run_monitors(state, fields, config, margin, cb, prev_fields):
    violation = None
    for cid in sorted(state.slices):
        slc, fld = state.slices[cid], fields[cid]
        m = slc.interior_mask(margin)
        if config.monitor_rmin_bound and state.r_min_initial >= 0.0:
            try:
                bound = rmin_lower_bound(state.t, state.r_min_initial,
                                         state.t_initial)
            except DomainError:
                bound = None
            if bound is not None:
                measured = float(np.min(fld.r_scalar[m]))
                ok = measured >= bound - 1e-3 * (1.0 + abs(bound))
                if not ok:
                    rec = MonitorRecord("rmin_bound", state.t, cid, False,
                                        {"bound": bound, "measured": measured})
                    cb.on_record(rec)
                    violation = violation or rec.to_json()
        if config.monitor_pinching:
            rep = is_pinched_toward_positive(fld, state.t, config.tol_pinch)
            ok = bool(np.all(rep.node_passed[m]))
            if not ok:
                rec = MonitorRecord("pinching", state.t, cid, False,
                                    rep.worst())
                cb.on_record(rec)
                violation = violation or rec.to_json()
        if config.monitor_scalar:
            rec = scalar_monitors(prev_fields.get(cid), fld, slc,
                                  state.dt_last, config.r, config.C0, margin)
            if not rec.passed:
                cb.on_record(rec)
    return violation


def _detect_disappearing(state, fields, config, margin, cb, history):
    """Remove components that are eps0-round with R >= 1 and small radius."""
    from .canonical import is_eps_round

    removed = []
    for cid in sorted(state.slices):
        slc = state.slices[cid]
        if not slc.topology.closed or slc.topology.periodic:
            continue
        m = slc.interior_mask(margin)
        psi_max = float(np.max(slc.psi))
        if psi_max >= config.extinction_psi:
            continue
        if float(np.min(fields[cid].r_scalar[m])) < 1.0:
            continue
        verdict = is_eps_round(slc, config.eps0)
        if not verdict.passed:
            continue
        info = {
            "reason": "disappearing_round",
            "classification": "S3",
            "r_min": float(np.min(fields[cid].r_scalar[m])),
            "homothety_scale": verdict.scale,
            "diameter": slc.total_arclength(),
        }
        cb.on_disappear(slc, state.t, info)
        if history is not None:
            history.mark_death(cid, state.t, "disappearing_round")
        del state.slices[cid]
        removed.append(cid)
    return removed
