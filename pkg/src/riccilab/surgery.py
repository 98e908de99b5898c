"""Surgery at the curvature threshold: cutoff parameters, site selection,
the cap-gluing construction, and component removal.

Surgery fires when R_max reaches Theta = 2 D h^-2 and cuts at validated
strong delta-necks of curvature scale h^-2.  On each kept side of a cut the
metric is replaced, in rescaled polar coordinates r in [0, 5 + 1/delta], by

    g_+ = e^{-2f} (chi g_u + (1 - chi) g_bar)

where g_bar is the pulled-back rescaled old metric on the annulus r in
(3, 5], g_u = dr^2 + u(r)^2 dtheta^2 is the reference cap, chi ramps from 1
(pure cap, r <= 3) to 0 (pure old metric, r >= 4).  The kept region r >= 5
is untouched bit-for-bit, and the core r <= 3 equals the reference cap
exactly after rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .config import FlowConfig
from .canonical import (
    CanonicalKind,
    classify_canonical,
    is_eps_round,
    neck_quality_at,
    strong_neck_check,
)
from .errors import (
    InsufficientHistory,
    InvalidParameters,
    NoValidSite,
    PostConditionFailed,
    PreconditionError,
    ProfileVerificationFailed,
    TopologyError,
)
from .flow import FlowState
from .geometry import (
    SQRT2,
    MetricSlice,
    Topology,
    compute_curvature,
    profile_derivatives,
)
from .history import History, SurgeryMark
from .pinching import is_pinched_toward_positive

# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurgeryParams:
    r: float
    delta: float
    h: float
    D: float
    theta: float
    delta_prime: float

    def validate(self, eps0: float, delta0: float, strict: bool):
        if not (0 < self.delta < min(eps0, delta0)):
            raise InvalidParameters(
                f"delta={self.delta} outside (0, min(eps0, delta0))")
        if self.D <= 10.0:
            raise InvalidParameters(f"D={self.D} must be > 10")
        if self.theta != 2.0 * self.D * self.h ** -2:
            raise InvalidParameters("Theta must equal 2*D*h^-2 exactly")
        if strict:
            if not (0 < self.r < 1e-3):
                raise InvalidParameters(f"r={self.r} outside (0, 1e-3)")
            if not (0 < self.h < self.delta * self.r):
                raise InvalidParameters(
                    f"h={self.h} outside (0, delta*r)={self.delta * self.r}")


def cutoff_parameters(r: float, delta: float,
                      config: FlowConfig) -> SurgeryParams:
    """Cutoff parameters h = c_h * delta * r, D from config, Theta = 2D/h^2.

    There is no constructive recipe guaranteeing that scale-h^-2 sites are
    strong delta-necks, so the returned parameters are heuristics: every
    surgery site is validated by strong_neck_check, and validation failure
    is a first-class outcome (NoValidSite).  Desk-scale scenarios may set
    config.h_override instead of the yoked formula; the classical ranges
    are then checked only when config.strict is set.
    """
    if not (r > 0 and delta > 0):
        raise InvalidParameters("r and delta must be positive")
    if delta >= min(config.eps0, config.delta0):
        raise InvalidParameters(
            f"delta={delta} must be < min(eps0, delta0)"
            f"={min(config.eps0, config.delta0)}")
    if config.h_override is not None:
        h = float(config.h_override)
        if not (0 < h):
            raise InvalidParameters("h_override must be positive")
        if config.strict and not h < delta * r:
            raise InvalidParameters(f"h={h} outside (0, delta*r)")
    else:
        if config.c_h >= 1.0:
            raise InvalidParameters(
                f"c_h={config.c_h} >= 1 puts h outside (0, delta*r)")
        h = config.c_h * delta * r
    if config.D <= 10.0:
        raise InvalidParameters(f"D={config.D} must be > 10")
    params = SurgeryParams(
        r=r, delta=delta, h=h, D=config.D,
        theta=2.0 * config.D * h ** -2,
        delta_prime=min(10.0 * delta, config.eps0 / 10.0),
    )
    params.validate(config.eps0, config.delta0, config.strict)
    return params


# ---------------------------------------------------------------------------
# reference cap profile
# ---------------------------------------------------------------------------


def _smoothstep5(y):
    y = np.clip(y, 0.0, 1.0)
    return y ** 3 * (10.0 - 15.0 * y + 6.0 * y * y)


@dataclass
class CapProfile:
    """Samples of the reference cap metric g0 = e^{-2f} g_u on [0, 5+1/delta].

    In the slice convention the warp radius is psi0 = sqrt(2) e^{-f} u and
    the radial coefficient is phi0 = e^{-f} (coordinate r).
    """

    delta: float
    rho: np.ndarray
    u: np.ndarray
    f: np.ndarray
    chi: np.ndarray
    psi0: np.ndarray
    phi0: np.ndarray
    tip_amplitude: float

    def to_slice(self, lam: float = 1.0, truncation: float | None = None,
                 component_id: int = 0, t: float = 0.0) -> MetricSlice:
        """Reference cap as a Ball slice of lam^-1 * g0, optionally extended
        cylindrically to a larger truncation radius."""
        rt = lam ** -0.5
        rho, psi0, phi0 = self.rho, self.psi0, self.phi0
        if truncation is not None and truncation > rho[-1]:
            dr = rho[-1] - rho[-2]
            ext = np.arange(rho[-1] + dr, truncation, dr)
            rho = np.concatenate([rho, ext])
            psi0 = np.concatenate([psi0, np.full(ext.size, SQRT2)])
            phi0 = np.concatenate([phi0, np.ones(ext.size)])
        return MetricSlice(
            x=rho.copy(),
            phi=rt * phi0,
            psi=rt * psi0,
            topology=Topology.BALL,
            t=t,
            component_id=component_id,
        )

    def verify(self) -> dict:
        """Numerically check the profile invariants; raises on failure."""
        checks = {}
        inner = self.rho >= 3.0
        checks["u_one_on_tail"] = bool(np.all(self.u[inner] == 1.0))
        tail = self.rho >= 5.0
        checks["f_zero_beyond_5"] = bool(np.all(self.f[tail] == 0.0))
        core = self.rho <= 3.0
        checks["chi_one_on_core"] = bool(np.all(self.chi[core] == 1.0))
        out = self.rho >= 4.0
        checks["chi_zero_on_tail"] = bool(np.all(self.chi[out] == 0.0))
        mid = (self.rho > 3.0) & (self.rho < 4.0)
        checks["chi_decreasing"] = bool(np.all(np.diff(self.chi[mid]) < 0.0))
        slc = self.to_slice()
        fld = compute_curvature(slc, check=False)
        ball = slc.x < 5.0 - 1e-9
        kmin = float(np.min(np.minimum(fld.k_sph, fld.k_rad)[ball]))
        checks["positive_sectional_min"] = kmin
        checks["positive_sectional"] = bool(kmin > 0.0)
        checks["max_rm"] = float(np.max(fld.rm_norm))
        checks["rm_normalized"] = bool(checks["max_rm"] <= 1.0 + 1e-6)
        a = (slc.psi[1] - slc.psi[0]) / (slc.x[1] * 0.5
                                         * (slc.phi[0] + slc.phi[1]))
        checks["tip_slope"] = float(a)
        checks["tip_smooth"] = bool(abs(a - 1.0) < 5e-3)
        if not all(v for k, v in checks.items() if isinstance(v, bool)):
            raise ProfileVerificationFailed(str(checks))
        return checks


def build_cap_profile(delta: float, config: FlowConfig | None = None,
                      nodes_per_unit: int = 32,
                      tip_amplitude: float = 0.18) -> CapProfile:
    """Construct the reference cap: a round-ish tip closing smoothly, a
    monotone C^2 blend to the unit-scalar-curvature cylinder by radius 3,
    and a conformal factor e^{-2f} giving positive sectional curvature on
    the open ball of radius 5.

    u(rho) = sin(w(rho)/sqrt(2)) with w = rho near the tip, flattened so
    w(3) = pi/sqrt(2) with two vanishing derivatives; f = A (1-(rho/5)^2)^3.
    All invariants are verified numerically at construction.
    """
    if delta <= 0:
        raise InvalidParameters("delta must be positive")
    r_max = 5.0 + 1.0 / delta
    n = int(np.ceil(r_max * nodes_per_unit)) + 1
    rho = np.linspace(0.0, r_max, n)

    # w(rho): identity until rho_a, then C^2 flattening to w(3) = pi/sqrt(2)
    w_target = np.pi / SQRT2
    rho_a = 2.0 * w_target - 3.0
    span = 3.0 - rho_a
    y = (rho - rho_a) / span
    wy = np.where(y <= 0.0, rho,
                  rho_a + span * (y - y ** 6 + 3.0 * y ** 5 - 2.5 * y ** 4))
    w = np.where(rho >= 3.0, w_target, wy)
    u = np.sin(w / SQRT2)
    u[rho >= 3.0] = 1.0

    a_f = float(tip_amplitude)
    f = np.where(rho < 5.0, a_f * (1.0 - (rho / 5.0) ** 2) ** 3, 0.0)
    f[rho >= 5.0] = 0.0

    chi = 1.0 - _smoothstep5(rho - 3.0)
    chi[rho <= 3.0] = 1.0
    chi[rho >= 4.0] = 0.0

    ef = np.exp(-f)
    psi0 = SQRT2 * ef * u
    psi0[0] = 0.0
    prof = CapProfile(delta=delta, rho=rho, u=u, f=f, chi=chi,
                      psi0=psi0, phi0=ef, tip_amplitude=a_f)
    prof.verify()
    return prof


# ---------------------------------------------------------------------------
# site selection
# ---------------------------------------------------------------------------


@dataclass
class RegionPlan:
    """One complementary region of the cutoff-neck family."""

    component_id: int
    node_lo: int
    node_hi: int
    left_end: str      # pole | frozen | cut | wrap
    right_end: str
    left_neck: int | None   # index into the neck list
    right_neck: int | None
    kind: str          # kept | removed
    r_min: float
    r_max: float


@dataclass
class Selection:
    t: float
    necks: list
    regions: list
    diagnostics: dict
    whole_component_removals: list = field(default_factory=list)


def select_cutoff_necks(state: FlowState, params: SurgeryParams,
                        config: FlowConfig, history: History | None,
                        require_threshold: bool = True) -> Selection:
    """Greedy left-to-right sweep for validated cutoff necks.

    Sites are nodes with |R - h^-2| h^2 <= site_tol that centre a strong
    delta-neck; overlapping candidates are skipped (leftmost wins).  The
    returned partition certifies every complementary region as kept
    (R_max < Theta/2: it avoids the super-hot set) or removed (R_min >=
    2 r^-2: it avoids the cool set); a region that fails both certificates
    aborts with NoValidSite.
    """
    margin = config.boundary_margin
    rmin_all, rmax_all = state.stats(margin)
    if require_threshold and abs(rmax_all - params.theta) \
            > 2.0 * config.event_tol * params.theta:
        raise PreconditionError(
            f"R_max={rmax_all:g} is not at Theta={params.theta:g}")

    h2inv = params.h ** -2
    cool_edge = 2.0 / params.r ** 2
    hot_edge = params.theta / 2.0
    diagnostics = {"candidates": 0, "window_fail": 0, "quality_fail": 0,
                   "history_fail": 0, "overlap_skip": 0, "scale_fail": 0}
    necks = []
    regions = []

    for cid in sorted(state.slices):
        slc = state.slices[cid]
        fld = compute_curvature(slc, check=False)
        derivs = profile_derivatives(slc)
        s = slc.arclength()
        site = np.abs(fld.r_scalar - h2inv) * params.h ** 2 <= config.site_tol
        site &= slc.interior_mask(margin)
        accepted = []
        for node in np.nonzero(site)[0]:
            diagnostics["candidates"] += 1
            cand = neck_quality_at(slc, int(node), params.delta,
                                   fld=fld, derivs=derivs, s=s)
            if cand is None:
                diagnostics["quality_fail"] += 1
                continue
            if abs(cand.lam_fit / cand.scale_q - 1.0) > params.delta_prime:
                diagnostics["scale_fail"] += 1
                continue
            if accepted and cand.interval_s[0] <= accepted[-1].interval_s[1]:
                diagnostics["overlap_skip"] += 1
                continue
            if history is not None:
                try:
                    rep = strong_neck_check(history, cand, state.t,
                                            params.delta)
                except InsufficientHistory:
                    diagnostics["history_fail"] += 1
                    continue
                if not rep.passed:
                    diagnostics["quality_fail"] += 1
                    continue
                cand_backward = rep.closeness
            else:
                cand_backward = None
            necks.append((cand, cand_backward))
            accepted.append(cand)

        regs = _partition(slc, fld, s, accepted,
                          [len(necks) - len(accepted) + k
                           for k in range(len(accepted))],
                          cool_edge, hot_edge, config)
        if regs is None:
            raise NoValidSite(cid, diagnostics)
        regions.extend(regs)

    sel = Selection(t=state.t, necks=[n for (n, _) in necks],
                    regions=regions, diagnostics=diagnostics)
    sel.diagnostics["backward_closeness"] = [b for (_, b) in necks]
    return sel


def _partition(slc, fld, s, accepted, neck_ids, cool_edge, hot_edge, config):
    """Complementary regions with their kept/removed certificates."""
    tol = 0.05
    n = slc.n
    topo = slc.topology
    cuts = [c.center_node for c in accepted]
    regions = []

    def end_type(is_left):
        if topo.periodic:
            return "wrap"
        if is_left:
            return "pole" if topo.left_pole else "frozen"
        return "pole" if topo.right_pole else "frozen"

    def mk(lo, hi, le, re, ln, rn):
        inside = slice(lo, hi + 1)
        rvals = fld.r_scalar[inside]
        r_lo, r_hi = float(np.min(rvals)), float(np.max(rvals))
        if r_hi <= hot_edge * (1.0 + tol):
            kind = "kept"
        elif r_lo >= cool_edge * (1.0 - tol):
            kind = "removed"
        else:
            return None
        return RegionPlan(slc.component_id, lo, hi, le, re, ln, rn,
                          kind, r_lo, r_hi)

    if topo.periodic:
        if not cuts:
            rvals = fld.r_scalar
            r_lo, r_hi = float(np.min(rvals)), float(np.max(rvals))
            if r_hi <= hot_edge * (1.0 + tol):
                kind = "kept"
            elif r_lo >= cool_edge * (1.0 - tol):
                kind = "removed"
            else:
                return None
            regions.append(RegionPlan(slc.component_id, 0, n - 1, "wrap",
                                      "wrap", None, None, kind, r_lo, r_hi))
            return regions
        ext = cuts + [cuts[0] + n]
        for k in range(len(cuts)):
            lo, hi = ext[k], ext[k + 1]
            idx = np.arange(lo, hi + 1) % n
            rvals = fld.r_scalar[idx]
            r_lo, r_hi = float(np.min(rvals)), float(np.max(rvals))
            if r_hi <= hot_edge * (1.0 + tol):
                kind = "kept"
            elif r_lo >= cool_edge * (1.0 - tol):
                kind = "removed"
            else:
                return None
            regions.append(RegionPlan(
                slc.component_id, lo % n, hi % n, "cut", "cut",
                neck_ids[k], neck_ids[(k + 1) % len(cuts)], kind,
                r_lo, r_hi))
        return regions

    bounds = [0] + cuts + [n - 1]
    for k in range(len(bounds) - 1):
        lo, hi = bounds[k], bounds[k + 1]
        le = end_type(True) if k == 0 else "cut"
        re = end_type(False) if k == len(bounds) - 2 else "cut"
        ln = neck_ids[k - 1] if k > 0 else None
        rn = neck_ids[k] if k < len(cuts) else None
        reg = mk(lo, hi, le, re, ln, rn)
        if reg is None:
            return None
        regions.append(reg)
    return regions


# ---------------------------------------------------------------------------
# the cut-and-glue operation
# ---------------------------------------------------------------------------


def _flip_slice(x, phi, psi):
    """Reverse orientation: x -> x_max - x reversed, profiles reversed."""
    return (x[-1] - x[::-1], phi[::-1].copy(), psi[::-1].copy())


def _build_cap(parent: MetricSlice, neck, cap: CapProfile, config: FlowConfig,
               side: str):
    """Cap arrays replacing the removed side of a cut.

    ``side`` is the side of the middle sphere that is KEPT ("left" keeps
    x < cut).  Returns (x, phi, psi) of the new cap nodes ordered away from
    the cut (excluding the junction node itself), plus the measured
    closeness of the blended region to the rescaled reference cap and the
    index count of the exact core.
    """
    lam = neck.lam_fit
    rt = lam ** -0.5
    s_all = parent.arclength()
    m = neck.center_node
    s_m = s_all[m]

    dr = 0.5 / config.points_per_scale
    n_cap = int(np.ceil(5.0 / dr))
    r_nodes = np.linspace(5.0, 0.0, n_cap + 1)[1:]  # exclude junction r=5

    u_r = np.interp(r_nodes, cap.rho, cap.u)
    f_r = np.interp(r_nodes, cap.rho, cap.f)
    chi_r = np.interp(r_nodes, cap.rho, cap.chi)
    psi0_r = SQRT2 * np.exp(-f_r) * u_r

    # pull back the removed-side collar at rescaled arclength 5 - r
    sigma = (5.0 - r_nodes) * rt
    if side == "left":
        s_query = s_m + sigma
    else:
        s_query = s_m - sigma
    interp = PchipInterpolator(s_all, parent.psi)
    psi_old = interp(np.clip(s_query, s_all[0], s_all[-1]))

    blend = chi_r * u_r ** 2 + (1.0 - chi_r) * (lam / 2.0) * psi_old ** 2
    psi_cap = rt * SQRT2 * np.exp(-f_r) * np.sqrt(np.maximum(blend, 0.0))
    # core region chi = 1: force bit-exact equality with the reference
    core = chi_r >= 1.0
    psi_cap[core] = rt * psi0_r[core]
    psi_cap[-1] = 0.0
    phi_cap = np.exp(-f_r)

    x_m = parent.x[m]
    if side == "left":
        x_cap = x_m + (5.0 - r_nodes) * rt
    else:
        x_cap = x_m - (5.0 - r_nodes) * rt

    # measured C^2 closeness to the rescaled reference, in rescaled units
    # (the core is exact by construction; the annulus carries the blend)
    dpsi = (psi_cap - rt * psi0_r) * np.sqrt(lam)
    sig = np.concatenate(([0.0], np.cumsum(
        np.abs(np.diff(r_nodes)) * 0.5 * (np.exp(-f_r[:-1])
                                          + np.exp(-f_r[1:])))))
    d1 = np.gradient(dpsi, sig)
    d2 = np.gradient(d1, sig)
    dev = np.abs(dpsi) / SQRT2
    dev = np.maximum(dev, np.abs(d1))
    dev = np.maximum(dev, SQRT2 * np.abs(d2))
    closeness = float(np.max(dev))
    return x_cap, phi_cap, psi_cap, closeness


@dataclass
class SurgeryEvent:
    t: float
    params: dict
    necks: list
    children: list        # per kept piece
    removed: list         # per removed piece
    spheres: list         # per cut: attachment records
    pre: dict
    post: dict
    contracts: dict
    caps_added: int = 0

    def to_json(self) -> dict:
        return {
            "record": "surgery",
            "t": self.t,
            "params": self.params,
            "necks": self.necks,
            "children": self.children,
            "removed": self.removed,
            "spheres": self.spheres,
            "pre": self.pre,
            "post": self.post,
            "contracts": self.contracts,
            "caps_added": self.caps_added,
        }


def perform_surgery(state: FlowState, selection: Selection,
                    params: SurgeryParams, cap: CapProfile,
                    config: FlowConfig,
                    history: History | None = None) -> SurgeryEvent:
    """Cut at the selected middle spheres, glue caps on kept sides, remove
    certified-hot pieces, and check the post-contracts.

    Mutates ``state``: kept pieces become new components (their kept-range
    samples equal the parent's bit-for-bit), removed pieces are recorded
    with their catalogue classification.  Contracts checked: halving
    R_max(post) <= Theta/2, R_min never decreases, pinching is preserved,
    and each cap region is delta'-close to the rescaled reference cap.
    """
    margin = config.boundary_margin
    pre_rmin, pre_rmax = state.stats(margin)
    event = SurgeryEvent(
        t=state.t,
        params={"r": params.r, "delta": params.delta, "h": params.h,
                "D": params.D, "theta": params.theta,
                "delta_prime": params.delta_prime},
        necks=[], children=[], removed=[], spheres=[],
        pre={"r_min": pre_rmin, "r_max": pre_rmax},
        post={}, contracts={},
    )
    sphere_ids = {}
    for k, neck in enumerate(selection.necks):
        sphere_ids[k] = k
        s_all = state.slices[neck.component_id].arclength()
        event.necks.append({
            "sphere": k,
            "component_id": neck.component_id,
            "middle_sphere_x": neck.middle_sphere_x,
            "middle_sphere_s": float(s_all[neck.center_node]),
            "h": params.h,
            "q": neck.scale_q,
            "lam": neck.lam_fit,
            "closeness": neck.closeness,
        })

    by_comp: dict[int, list[RegionPlan]] = {}
    for reg in selection.regions:
        by_comp.setdefault(reg.component_id, []).append(reg)

    worst_cap = 0.0
    new_slices: dict[int, MetricSlice] = {}
    for cid, slc in sorted(state.slices.items()):
        regs = by_comp.get(cid)
        if regs is None or (len(regs) == 1 and regs[0].kind == "kept"
                            and regs[0].left_neck is None
                            and regs[0].right_neck is None):
            new_slices[cid] = slc
            continue
        parent_mark = SurgeryMark(t=state.t, parent_id=cid, cut_x=[],
                                  removed_x=[])
        for reg in regs:
            if reg.kind == "removed":
                piece = _remove_region(state, slc, reg, selection, params,
                                       config, history, event, sphere_ids)
                parent_mark.removed_x.append(piece)
            else:
                child = _keep_region(state, slc, reg, selection, params, cap,
                                     config, history, event, sphere_ids)
                new_slices[child.component_id] = child
                worst_cap = max(worst_cap,
                                event.children[-1]["cap_closeness"])
        for neck in selection.necks:
            if neck.component_id == cid:
                parent_mark.cut_x.append(neck.middle_sphere_x)
        if history is not None:
            history.add_mark(parent_mark)
            history.mark_death(cid, state.t, "split")

    state.slices = new_slices

    # removal rule (a): freshly cut pieces that are already eps0-round
    for cid in sorted(state.slices):
        slc = state.slices[cid]
        if slc.topology is not Topology.SPHERE:
            continue
        fld = compute_curvature(slc, check=False)
        if float(np.min(fld.r_scalar)) < 1.0:
            continue
        rv = is_eps_round(slc, config.eps0)
        if rv.passed:
            event.removed.append({
                "component_id": cid,
                "classification": "S3",
                "reason": "round_removal",
                "r_min": float(np.min(fld.r_scalar)),
                "diameter": slc.total_arclength(),
                "spheres": [],
            })
            if history is not None:
                history.mark_death(cid, state.t, "disappearing_round")
            del state.slices[cid]

    # ---- post-contracts -----------------------------------------------------
    if state.slices:
        post_rmin, post_rmax = state.stats(margin)
    else:
        post_rmin, post_rmax = np.inf, -np.inf
    event.post = {"r_min": post_rmin, "r_max": post_rmax}
    halve_ok = (not state.slices) or \
        post_rmax <= 0.5 * params.theta * (1.0 + config.event_tol)
    rmin_ok = post_rmin >= pre_rmin
    pinch_ok = True
    pinch_worst = None
    for cid in sorted(state.slices):
        fld = compute_curvature(state.slices[cid], check=False)
        rep = is_pinched_toward_positive(fld, state.t, config.tol_pinch)
        m = state.slices[cid].interior_mask(margin)
        if not bool(np.all(rep.node_passed[m])):
            pinch_ok = False
            pinch_worst = rep.worst()
    cap_ok = worst_cap <= params.delta_prime
    event.contracts = {
        "halving": {"passed": bool(halve_ok),
                    "value": post_rmax / params.theta
                    if state.slices else 0.0},
        "rmin_nondecrease": {"passed": bool(rmin_ok),
                             "pre": pre_rmin, "post": post_rmin},
        "pinching": {"passed": bool(pinch_ok), "worst": pinch_worst},
        "cap_closeness": {"passed": bool(cap_ok), "measured": worst_cap,
                          "tolerance": params.delta_prime},
    }
    event.caps_added = 2 * len(selection.necks)
    for name, c in event.contracts.items():
        if not c["passed"]:
            raise PostConditionFailed(name, c)
    return event


def _keep_region(state, slc, reg, selection, params, cap, config, history,
                 event, sphere_ids):
    """Assemble a kept piece: untouched kept samples plus caps at cut ends."""
    cid = state.next_component_id
    state.next_component_id += 1
    lo, hi = reg.node_lo, reg.node_hi

    wrapped = False
    if slc.topology.periodic and reg.left_end == "cut" \
            and reg.right_end == "cut":
        idx = np.arange(lo, hi + 1 + (slc.n if hi < lo else 0)) % slc.n
        xs = slc.x[idx].copy()
        # unwrap coordinates so they increase across the seam
        jumps = np.diff(xs) < 0
        if np.any(jumps):
            j = int(np.argmax(jumps)) + 1
            xs[j:] += slc.period
            wrapped = True
        x_k, phi_k, psi_k = xs, slc.phi[idx].copy(), slc.psi[idx].copy()
    else:
        x_k = slc.x[lo:hi + 1].copy()
        phi_k = slc.phi[lo:hi + 1].copy()
        psi_k = slc.psi[lo:hi + 1].copy()

    cap_ranges = []
    closenesses = [0.0]
    spheres = []

    if reg.right_end == "cut":
        neck = selection.necks[reg.right_neck]
        xc, pc, qc, close = _build_cap(slc, neck, cap, config, side="left")
        x_k = np.concatenate([x_k, xc])
        phi_k = np.concatenate([phi_k, pc])
        psi_k = np.concatenate([psi_k, qc])
        cap_ranges.append((float(xc.min()), float(xc.max())))
        closenesses.append(close)
        spheres.append(("right", reg.right_neck))
    if reg.left_end == "cut":
        neck = selection.necks[reg.left_neck]
        xc, pc, qc, close = _build_cap(slc, neck, cap, config, side="right")
        x_k = np.concatenate([xc[::-1], x_k])
        phi_k = np.concatenate([pc[::-1], phi_k])
        psi_k = np.concatenate([qc[::-1], psi_k])
        cap_ranges.append((float(xc.min()), float(xc.max())))
        closenesses.append(close)
        spheres.append(("left", reg.left_neck))

    tag = _kept_tag(reg)
    if tag is None:
        raise TopologyError(
            f"kept region ends ({reg.left_end},{reg.right_end}) unsupported")
    flipped = False
    if tag is Topology.BALL and reg.right_end == "cut":
        # pole must sit at the left end in the Ball convention: flip.  The
        # flip changes coordinates, so lineage is dropped (fresh history).
        x_k, phi_k, psi_k = _flip_slice(x_k, phi_k, psi_k)
        flipped = True
    child = MetricSlice(x=x_k, phi=phi_k, psi=psi_k, topology=tag,
                        t=slc.t, component_id=cid)
    kept_x = (float(slc.x[reg.node_lo]), float(slc.x[reg.node_hi]))
    if history is not None:
        if flipped or wrapped:
            history.register_root(child)
        else:
            history.register_child(cid, slc.component_id, state.t,
                                   kept_x, cap_ranges)
    event.children.append({
        "component_id": cid,
        "parent": slc.component_id,
        "topology": tag.value,
        "kept_x": list(kept_x),
        "cap_closeness": float(max(closenesses)),
        "spheres": [{"sphere": sphere_ids[nid], "side": side,
                     "attach_x": 0.5 * (kept_x[0] + kept_x[1])}
                    for side, nid in spheres],
    })
    return child


def _kept_tag(reg) -> Topology | None:
    ends = {reg.left_end, reg.right_end}
    if ends == {"cut"} or ends == {"pole", "cut"} or ends == {"pole"}:
        return Topology.SPHERE
    if ends == {"pole", "frozen"} or ends == {"frozen", "cut"}:
        return Topology.BALL
    if ends == {"frozen"}:
        return Topology.CYLINDER
    if ends == {"wrap"}:
        return Topology.CIRCLE_BUNDLE
    return None


def _remove_region(state, slc, reg, selection, params, config, history,
                   event, sphere_ids):
    """Record a removed piece's classification; returns its x-range."""
    lo, hi = reg.node_lo, reg.node_hi
    if slc.topology.periodic and hi < lo:
        idx = np.arange(lo, hi + 1 + slc.n) % slc.n
    else:
        idx = np.arange(lo, hi + 1)
    xs = slc.x[idx]
    x_lo, x_hi = float(np.min(xs)), float(np.max(xs))
    tag = _removed_tag(slc, reg)
    if tag is None:
        raise TopologyError(
            f"removed region ends ({reg.left_end},{reg.right_end})")
    coverage = _coverage_sample(state, slc, idx, config, history)
    fld = compute_curvature(slc, check=False)
    spheres = []
    if reg.left_neck is not None:
        spheres.append({"sphere": sphere_ids[reg.left_neck], "side": "left",
                        "attach_x": x_lo})
    if reg.right_neck is not None:
        spheres.append({"sphere": sphere_ids[reg.right_neck],
                        "side": "right", "attach_x": x_hi})
    cells = slc.cell_lengths()
    diam = float(np.sum(cells[idx[:-1] % cells.size]))
    event.removed.append({
        "component_id": slc.component_id,
        "piece_x": [x_lo, x_hi],
        "classification": tag,
        "reason": "hot_catalogue",
        "r_min": reg.r_min,
        "r_max": reg.r_max,
        "diameter": diam,
        "canonical_coverage": coverage,
        "spheres": spheres,
    })
    return (x_lo, x_hi)


def _removed_tag(slc, reg) -> str | None:
    le, re = reg.left_end, reg.right_end
    if {le, re} == {"cut"}:
        return "S3"
    if {le, re} == {"pole", "cut"}:
        return "S3"
    if {le, re} == {"frozen", "cut"}:
        return "S2xR_truncated"
    if {le, re} == {"wrap"}:
        return "S2xS1"
    if {le, re} == {"pole"}:
        return "S3"
    if {le, re} == {"pole", "frozen"}:
        return "R3_truncated"
    if {le, re} == {"frozen"}:
        return "S2xR_truncated"
    return None


def _coverage_sample(state, slc, idx, config, history, samples: int = 12):
    """Fraction of sampled nodes with a canonical neighbourhood."""
    sel = idx[:: max(1, idx.size // samples)]
    fld = compute_curvature(slc, check=False)
    good = 0
    total = 0
    for node in sel:
        if fld.r_scalar[node] <= 0:
            continue
        total += 1
        v = classify_canonical(history, slc, int(node), state.t, config,
                               fld=fld)
        if v.kind is not CanonicalKind.NONE:
            good += 1
    return good / max(total, 1)
