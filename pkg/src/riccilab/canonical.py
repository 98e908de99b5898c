"""Classifiers for necks, caps, roundness, canonical neighbourhoods, and the
noncollapsing monitor.

Closeness of a profile window to the model cylinder is measured by the
weighted C^2 sup-norm of (psi*sqrt(Q) - sqrt(2), psi_s, sqrt(2)*psi_ss/sqrt(Q))
over a window of rescaled half-length 1/eps around the candidate centre,
with Q = R(centre).  Orders above two are noise-dominated at the working
resolutions; order two controls curvature, which is what every downstream
estimate consumes.  All verdicts are invariant under homothety g -> lam*g.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .config import FlowConfig
from .errors import InsufficientHistory, NonPositiveScalar, WrongTopology
from .geometry import (
    SQRT2,
    CurvatureField,
    MetricSlice,
    Topology,
    compute_curvature,
    profile_derivatives,
)
from .history import History

# ---------------------------------------------------------------------------
# neck detection
# ---------------------------------------------------------------------------


@dataclass
class NeckCandidate:
    component_id: int
    center_node: int
    center_x: float
    scale_q: float                    # R(centre) of the unrescaled metric
    closeness: float
    interval_s: tuple[float, float]   # arclength window
    interval_x: tuple[float, float]   # coordinate window
    half_length_rescaled: float
    middle_sphere_x: float
    lam_fit: float                    # 2/psi(centre)^2, the closeness-fit scale


def _window_indices(s: np.ndarray, center: int, w: float, n: int,
                    periodic: bool, total: float):
    if periodic:
        if 2.0 * w >= total:
            return None
        rel = (s - s[center] + 0.5 * total) % total - 0.5 * total
        return np.nonzero(np.abs(rel) <= w)[0]
    lo = s[center] - w
    hi = s[center] + w
    if lo < -1e-12 or hi > s[-1] + 1e-12:
        return None
    return np.nonzero((s >= lo - 1e-12) & (s <= hi + 1e-12))[0]


def neck_quality_at(slc: MetricSlice, node: int, eps: float,
                    fld: CurvatureField | None = None,
                    derivs=None, s=None) -> NeckCandidate | None:
    """Closeness of the window around one node to the rescaled cylinder.

    Returns a candidate when the window of rescaled half-length 1/eps fits
    inside the slice and the C^2 closeness is at most eps; None otherwise.
    """
    if fld is None:
        fld = compute_curvature(slc, check=False)
    q = float(fld.r_scalar[node])
    if q <= 0.0:
        return None
    if derivs is None:
        derivs = profile_derivatives(slc)
    if s is None:
        s = slc.arclength()
    d1, d2 = derivs
    w = (1.0 / eps) / np.sqrt(q)
    total = slc.total_arclength()
    idx = _window_indices(s, node, w, slc.n, slc.topology.periodic, total)
    if idx is None or idx.size < 5:
        return None
    rq = np.sqrt(q)
    dev = np.abs(slc.psi[idx] * rq - SQRT2)
    dev = np.maximum(dev, np.abs(d1[idx]))
    dev = np.maximum(dev, SQRT2 * np.abs(d2[idx]) / rq)
    closeness = float(np.max(dev))
    if closeness > eps:
        return None
    if slc.topology.periodic:
        rel = (s[idx] - s[node] + 0.5 * total) % total - 0.5 * total
        s_lo, s_hi = s[node] + rel.min(), s[node] + rel.max()
    else:
        s_lo, s_hi = float(s[idx[0]]), float(s[idx[-1]])
    x_lo, x_hi = float(np.min(slc.x[idx])), float(np.max(slc.x[idx]))
    psi_c = float(slc.psi[node])
    return NeckCandidate(
        component_id=slc.component_id,
        center_node=int(node),
        center_x=float(slc.x[node]),
        scale_q=q,
        closeness=closeness,
        interval_s=(s_lo, s_hi),
        interval_x=(x_lo, x_hi),
        half_length_rescaled=(1.0 / eps),
        middle_sphere_x=float(slc.x[node]),
        lam_fit=2.0 / psi_c ** 2,
    )


def detect_necks(slc: MetricSlice, eps: float,
                 all_centers: bool = False) -> list[NeckCandidate]:
    """Scan every node with R > 0 for neck windows of quality eps.

    Returns one representative per maximal run of qualifying centres (the
    best-closeness node, leftmost on ties), or every qualifying centre when
    ``all_centers`` is set.
    """
    fld = compute_curvature(slc, check=False)
    derivs = profile_derivatives(slc)
    s = slc.arclength()
    cands: dict[int, NeckCandidate] = {}
    for node in range(slc.n):
        c = neck_quality_at(slc, node, eps, fld=fld, derivs=derivs, s=s)
        if c is not None:
            cands[node] = c
    if all_centers:
        return [cands[k] for k in sorted(cands)]
    out = []
    run: list[int] = []
    for node in sorted(cands):
        if run and node != run[-1] + 1:
            out.append(_best(run, cands))
            run = []
        run.append(node)
    if run:
        out.append(_best(run, cands))
    return out


def _best(run, cands):
    best = run[0]
    for node in run[1:]:
        if cands[node].closeness < cands[best].closeness:
            best = node
    return cands[best]


# ---------------------------------------------------------------------------
# strong (backward-in-time) neck check
# ---------------------------------------------------------------------------


@dataclass
class StrongNeckReport:
    passed: bool
    closeness: float
    n_samples: int
    detail: dict = field(default_factory=dict)


def strong_neck_check(history: History, candidate: NeckCandidate, t0: float,
                      eps: float, min_samples: int = 4) -> StrongNeckReport:
    """Compare the backward parabolic window against the shrinking cylinder.

    After rescaling by Q = R(centre) at t0 the model over tau in [-1, 0] is
    the cylinder with radius sqrt(2 - 2 tau); closeness is the same weighted
    C^2 sup-norm as the spatial neck metric, evaluated at every stored time
    in [t0 - 1/Q, t0].  Raises InsufficientHistory when the window precedes
    the run start, crosses a surgery in the candidate's region, or has too
    few stored samples.
    """
    q = candidate.scale_q
    t_lo = t0 - 1.0 / q
    x_lo, x_hi = candidate.interval_x
    if not history.interval_unscathed(candidate.component_id, x_lo, x_hi,
                                      t_lo, t0):
        raise InsufficientHistory(
            f"window [{t_lo:g},{t0:g}] x [{x_lo:g},{x_hi:g}] is scathed")
    pad = 0.02 * (x_hi - x_lo)
    profs = history.profile_window(candidate.component_id,
                                   x_lo - pad, x_hi + pad, t_lo, t0,
                                   min_samples=min_samples)
    rq = np.sqrt(q)
    worst = 0.0
    for (t, x, phi, psi) in profs:
        if x.size < 5:
            raise InsufficientHistory("stored window too narrow")
        tau = (t - t0) * q
        model = np.sqrt(max(2.0 - 2.0 * tau, 0.0))
        d1, d2 = _window_derivs(x, phi, psi)
        dev = np.abs(psi * rq - model)
        dev = np.maximum(dev, np.abs(d1))
        dev = np.maximum(dev, SQRT2 * np.abs(d2) / rq)
        worst = max(worst, float(np.max(dev[1:-1])))
    return StrongNeckReport(passed=worst <= eps, closeness=worst,
                            n_samples=len(profs),
                            detail={"q": q, "t_window": (t_lo, t0)})


def _window_derivs(x, phi, psi):
    """Arclength derivatives of a windowed profile (interior entries valid)."""
    h = np.diff(x) * 0.5 * (phi[:-1] + phi[1:])
    n = psi.size
    d1 = np.zeros(n)
    d2 = np.zeros(n)
    hm, hp = h[:-1], h[1:]
    d1[1:-1] = (hm / (hp * (hm + hp))) * psi[2:] \
        + ((hp - hm) / (hp * hm)) * psi[1:-1] \
        - (hp / (hm * (hm + hp))) * psi[:-2]
    d2[1:-1] = 2.0 * (psi[2:] / (hp * (hp + hm)) - psi[1:-1] / (hp * hm)
                      + psi[:-2] / (hm * (hp + hm)))
    return d1, d2


# ---------------------------------------------------------------------------
# roundness
# ---------------------------------------------------------------------------


@dataclass
class RoundVerdict:
    passed: bool
    scale: float        # lam such that lam*g has constant sectional curvature 1
    deviation: float


def is_eps_round(slc: MetricSlice, eps: float) -> RoundVerdict:
    """Fit the best round profile psi = A sin(pi s / L) and measure the
    relative C^2 deviation.

    Model derivatives are evaluated with the same discrete stencils as the
    data, so exact round slices score at round-off level independent of
    resolution.  Only Sphere slices can be round.
    """
    if slc.topology is not Topology.SPHERE:
        raise WrongTopology(f"is_eps_round on {slc.topology}")
    s = slc.arclength()
    total = s[-1]
    shape = np.sin(np.pi * s / total)
    h = slc.cell_lengths()
    wts = np.zeros(slc.n)
    wts[:-1] += 0.5 * h
    wts[1:] += 0.5 * h
    denom = float(np.sum(wts * shape * shape))
    if denom <= 0:
        return RoundVerdict(False, 0.0, np.inf)
    amp = float(np.sum(wts * shape * slc.psi)) / denom
    if amp <= 0:
        return RoundVerdict(False, 0.0, np.inf)
    d1, d2 = profile_derivatives(slc)
    model = slc.with_fields(psi=amp * shape)
    m1, m2 = profile_derivatives(model)
    dev = np.abs(slc.psi - model.psi) / amp
    dev = np.maximum(dev, np.abs(d1 - m1))
    dev = np.maximum(dev, np.abs(d2 - m2) * amp)
    deviation = float(np.max(dev))
    return RoundVerdict(passed=deviation <= eps, scale=1.0 / amp ** 2,
                        deviation=deviation)


# ---------------------------------------------------------------------------
# geodesic-ball volume (orbit-space eikonal)
# ---------------------------------------------------------------------------


def ball_volume(slc: MetricSlice, node: int, radius: float,
                cells: int = 72) -> float:
    """Volume of the metric ball B(node, radius).

    Distances are solved on the totally geodesic orbit surface with metric
    ds^2 + psi(s)^2 d(alpha)^2, alpha in [0, pi] the fibre-sphere angle, by
    second-order fast sweeping with an exact source disk; the volume element
    is 2 pi psi^2 sin(alpha) ds d(alpha).  The flat slice reproduces
    4 pi r^3 / 3 to solver accuracy (well under 1 percent at the defaults).
    """
    s_all = slc.arclength()
    total = s_all[-1]
    s0 = s_all[node]
    if slc.topology.periodic:
        rel = (s_all - s0 + 0.5 * total) % total - 0.5 * total
        sel = np.abs(rel) <= radius * 1.05
        order = np.argsort(rel[sel])
        s = rel[sel][order]
        psi = slc.psi[sel][order]
    else:
        sel = np.abs(s_all - s0) <= radius * 1.05
        s = s_all[sel] - s0
        psi = slc.psi[sel]
    if s.size < 3:
        return 0.0
    # refine the radial grid so the sweep resolution tracks the ball size
    target = radius / cells
    s_grid = [s[0]]
    for a, b in zip(s[:-1], s[1:]):
        k = max(1, int(np.ceil((b - a) / target)))
        s_grid.extend(np.linspace(a, b, k + 1)[1:])
    s_grid = np.asarray(s_grid)
    psi_grid = np.interp(s_grid, s, psi)
    # angular range: only as far as the ball can reach around the fibre
    psi_floor = float(np.min(psi_grid))
    if psi_floor <= 0.05 * radius:
        a_max = np.pi
    else:
        a_max = min(np.pi, 1.3 * radius / psi_floor)
    n_alpha = int(np.clip(np.ceil(a_max * float(np.median(psi_grid))
                                  / target), 48, 384))
    alpha = np.linspace(0.0, a_max, n_alpha)
    u = _eikonal(s_grid, psi_grid, alpha)
    w_s = np.gradient(s_grid)
    w_a = np.gradient(alpha)
    # fractional coverage of boundary cells: the level set of u crosses a
    # cell over roughly its extent along grad u (|grad u| = 1)
    w_loc = np.hypot(w_s[:, None], psi_grid[:, None] * w_a[None, :])
    frac = np.clip((radius - u) / np.maximum(w_loc, 1e-300) + 0.5, 0.0, 1.0)
    integrand = (2.0 * np.pi * psi_grid[:, None] ** 2 * np.sin(alpha)[None, :]
                 * w_s[:, None] * w_a[None, :])
    return float(np.sum(integrand * frac))


_BIG = 1e30


def _shift(u, k, axis):
    """Shift with _BIG fill (no wraparound)."""
    out = np.full_like(u, _BIG)
    if k > 0:
        if axis == 0:
            out[k:, :] = u[:-k, :]
        else:
            out[:, k:] = u[:, :-k]
    else:
        if axis == 0:
            out[:k, :] = u[-k:, :]
        else:
            out[:, :k] = u[:, -k:]
    return out


def _upwind_pair(u1, u2, h):
    """Second-order one-sided (value, spacing) where monotone, else first."""
    second = (u2 < _BIG) & (u2 <= u1) & (u1 < _BIG)
    val = np.where(second, (4.0 * u1 - u2) / 3.0, u1)
    eff = np.where(second, (2.0 / 3.0) * h, h)
    return val, eff


def _eikonal(s, psi, alpha) -> np.ndarray:
    """Vectorized Jacobi solve of |grad u|_g = 1 on ds^2 + psi^2 dalpha^2.

    Source at (s=0, alpha=0), initialized exactly on a small disk (the
    distance function is singular there).  Second-order one-sided upwind
    differences where two monotone neighbours exist, first-order otherwise.
    Rows with psi ~ 0 (poles) collapse to single points.
    """
    n, m = s.size, alpha.size
    hmid = np.empty(n)
    if n > 1:
        hs = np.diff(s)
        hmid[1:-1] = 0.5 * (hs[:-1] + hs[1:])
        hmid[0] = hs[0]
        hmid[-1] = hs[-1]
    else:
        hmid[:] = 1.0
    da = alpha[1] - alpha[0] if m > 1 else 1.0
    u = np.full((n, m), _BIG)
    i0 = int(np.argmin(np.abs(s)))
    pole = psi <= 1e-12 * max(1.0, float(np.max(psi)))

    # exact local initialization around the source
    init_r = 5.0 * hmid[i0]
    psi_bar = 0.5 * (psi + psi[i0])
    chord = 2.0 * psi_bar[:, None] * np.sin(0.5 * alpha)[None, :]
    d0 = np.hypot(s[:, None], chord)
    u = np.where(d0 <= init_r, d0, u)

    ha_col = hmid[:, None]
    hb_col = np.where(pole, 1.0, psi)[:, None] * da
    pole_col = pole[:, None]
    tol = 1e-9 * max(1e-12, float(np.max(np.abs(s))))

    for it in range(2 * (n + m) + 50):
        am1, ae1 = _upwind_pair(_shift(u, 1, 0), _shift(u, 2, 0), ha_col)
        am2, ae2 = _upwind_pair(_shift(u, -1, 0), _shift(u, -2, 0), ha_col)
        pick = (am1 + ae1) <= (am2 + ae2)
        a = np.where(pick, am1, am2)
        ha = np.where(pick, ae1, ae2)
        bm1, be1 = _upwind_pair(_shift(u, 1, 1), _shift(u, 2, 1), hb_col)
        bm2, be2 = _upwind_pair(_shift(u, -1, 1), _shift(u, -2, 1), hb_col)
        pickb = (bm1 + be1) <= (bm2 + be2)
        b = np.where(pickb, bm1, bm2)
        hb = np.where(pickb, be1, be2)
        b = np.where(pole_col, _BIG, b)

        only_a = (b >= _BIG) & (a < _BIG)
        only_b = (a >= _BIG) & (b < _BIG)
        both = (a < _BIG) & (b < _BIG)
        new = np.full_like(u, _BIG)
        new[only_a] = a[only_a] + ha[only_a]
        new[only_b] = b[only_b] + hb[only_b]
        if np.any(both):
            aa, bb = a[both], b[both]
            haa, hbb = ha[both], hb[both]
            wa, wb = 1.0 / haa ** 2, 1.0 / hbb ** 2
            sm = wa + wb
            mu = (wa * aa + wb * bb) / sm
            disc = mu * mu - (wa * aa * aa + wb * bb * bb - 1.0) / sm
            one_sided = np.minimum(aa + haa, bb + hbb)
            quad = np.where(disc > 0, mu + np.sqrt(np.maximum(disc, 0.0)),
                            one_sided)
            # causality: both directions contribute only when the solution
            # exceeds both upwind values
            use_quad = (disc > 0) & (quad >= np.maximum(aa, bb))
            new[both] = np.where(use_quad, quad, one_sided)
        cand = np.minimum(u, new)
        if np.any(pole):
            rows = np.nonzero(pole)[0]
            cand[rows, :] = np.min(cand[rows, :], axis=1)[:, None]
        if it % 8 == 7:
            same = float(np.max(np.where(cand < _BIG, np.abs(u - cand), 0.0)))
            if same <= tol:
                u = cand
                break
        u = cand
    return u


# ---------------------------------------------------------------------------
# canonical neighbourhood classification
# ---------------------------------------------------------------------------


class CanonicalKind(enum.Enum):
    A_STRONG_NECK = "A_strong_neck"
    B_CAP = "B_cap"
    C_POSITIVE_CLOSED = "C_positive_closed"
    D_ROUND = "D_round"
    NONE = "none"


@dataclass
class CanonicalVerdict:
    kind: CanonicalKind
    node: int
    r_witness: float | None
    estimates: dict
    detail: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "node": self.node,
            "r_witness": self.r_witness,
            "estimates": self.estimates,
            "detail": self.detail,
        }


def classify_canonical(history: History | None, slc: MetricSlice, node: int,
                       t0: float, config: FlowConfig,
                       fld: CurvatureField | None = None) -> CanonicalVerdict:
    """Classify the neighbourhood of one node: round, strong neck, cap, or
    positively curved closed; evaluate the quantitative estimates for the
    first three kinds.

    Without a history, neck candidates are accepted on spatial closeness
    alone (used for freshly cut pieces and static fixtures).
    """
    if fld is None:
        fld = compute_curvature(slc, check=False)
    r_x = float(fld.r_scalar[node])
    if r_x <= 0.0:
        raise NonPositiveScalar(f"R={r_x:g} at node {node}")
    eps0, c0 = config.eps0, config.C0

    # D: the whole component is eps0-round
    if slc.topology is Topology.SPHERE:
        rv = is_eps_round(slc, eps0)
        if rv.passed:
            return CanonicalVerdict(CanonicalKind.D_ROUND, node, None,
                                    estimates={},
                                    detail={"deviation": rv.deviation,
                                            "scale": rv.scale})

    s = slc.arclength()
    derivs = profile_derivatives(slc)

    # A: strong eps0-neck centred at the node
    cand = neck_quality_at(slc, node, eps0, fld=fld, derivs=derivs, s=s)
    if cand is not None:
        ok = True
        detail = {"closeness": cand.closeness}
        if history is not None:
            try:
                rep = strong_neck_check(history, cand, t0, eps0)
                ok = rep.passed
                detail["backward_closeness"] = rep.closeness
            except InsufficientHistory as exc:
                ok = False
                detail["history"] = str(exc)
        if ok:
            est = _estimates(slc, fld, node, cand.interval_s, s, config)
            return CanonicalVerdict(CanonicalKind.A_STRONG_NECK, node,
                                    est.pop("r_witness"), est, detail)

    # B: cap = pole-adjacent core whose collar is an eps0-neck
    cap = _cap_at(slc, fld, node, eps0, derivs, s, history, t0)
    if cap is not None:
        interval, detail = cap
        est = _estimates(slc, fld, node, interval, s, config)
        return CanonicalVerdict(CanonicalKind.B_CAP, node,
                                est.pop("r_witness"), est, detail)

    # C: closed with sectional curvature > C0^-1 R(x) everywhere
    if slc.topology.closed:
        nu_min = float(np.min(fld.nu))
        if nu_min > r_x / c0:
            interval = (float(s[0]), float(s[-1]))
            est = _estimates(slc, fld, node, interval, s, config)
            return CanonicalVerdict(CanonicalKind.C_POSITIVE_CLOSED, node,
                                    est.pop("r_witness"), est,
                                    {"nu_min": nu_min})

    return CanonicalVerdict(CanonicalKind.NONE, node, None, {}, {})


def _cap_at(slc, fld, node, eps, derivs, s, history, t0):
    """Pole-containing interval around the node with an eps-neck collar."""
    topo = slc.topology
    poles = []
    if topo.left_pole:
        poles.append(0)
    if topo.right_pole:
        poles.append(slc.n - 1)
    if not poles:
        return None
    pole = min(poles, key=lambda p: abs(s[node] - s[p]))
    span = abs(s[node] - s[pole])
    # collar candidates: nodes beyond the target node, away from the pole
    direction = 1 if pole == 0 else -1
    idx = node
    best = None
    for k in range(slc.n):
        idx2 = node + direction * k
        if idx2 <= 0 or idx2 >= slc.n - 1:
            break
        if abs(s[idx2] - s[pole]) < span:
            continue
        c = neck_quality_at(slc, idx2, eps, fld=fld, derivs=derivs, s=s)
        if c is not None:
            # the core must contain the node strictly inside
            lo, hi = c.interval_s
            inside = (s[node] < lo - 1e-15) if direction == 1 \
                else (s[node] > hi + 1e-15)
            if not inside:
                continue
            best = c
            break
        # give up once the collar search leaves the plausible scale range
        if abs(s[idx2] - s[node]) > 8.0 / (eps * np.sqrt(fld.r_scalar[node])):
            break
    if best is None:
        return None
    detail = {"collar_closeness": best.closeness,
              "collar_x": best.center_x}
    if history is not None:
        try:
            rep = strong_neck_check(history, best, t0, eps)
            detail["collar_backward_closeness"] = rep.closeness
        except InsufficientHistory as exc:
            detail["collar_history"] = str(exc)
    if pole == 0:
        interval = (float(s[0]), best.interval_s[1])
    else:
        interval = (best.interval_s[0], float(s[-1]))
    return interval, detail


def _estimates(slc, fld, node, interval_s, s, config):
    """Quantitative canonical-neighbourhood estimates with signed margins."""
    c0 = config.C0
    r_x = float(fld.r_scalar[node])
    lo, hi = interval_s
    if slc.topology.periodic:
        total = s[-1] + slc.cell_lengths()[-1]
        rel = (s - s[node] + 0.5 * total) % total - 0.5 * total
        inside = (rel >= lo - s[node] - 1e-12) & (rel <= hi - s[node] + 1e-12)
        d_left = s[node] - lo
        d_right = hi - s[node]
    else:
        inside = (s >= lo - 1e-12) & (s <= hi + 1e-12)
        d_left = s[node] - lo
        d_right = hi - s[node]
    est = {}

    # (i) witness radius with closure(B(x,r)) in U in B(x,2r); pole-adjacent
    # intervals count as balls around the pole side
    near_left_pole = slc.topology.left_pole and lo <= s[1]
    near_right_pole = slc.topology.right_pole and hi >= s[-2]
    if near_left_pole:
        eff_left = np.inf
    else:
        eff_left = d_left
    if near_right_pole:
        eff_right = np.inf
    else:
        eff_right = d_right
    reach = min(eff_left, eff_right)
    extent = max(d_left if not near_left_pole else hi - lo,
                 d_right if not near_right_pole else hi - lo)
    r_wit = 0.75 * min(reach, extent)
    if not np.isfinite(r_wit) or r_wit <= 0:
        r_wit = 0.5 * (hi - lo)
    lo_ok = r_wit > r_x ** -0.5 / c0
    hi_ok = r_wit < c0 * r_x ** -0.5
    ball_ok = (r_wit <= reach) and (extent <= 2.0 * r_wit * (1 + 1e-9))
    est["i_witness"] = {
        "passed": bool(lo_ok and hi_ok and ball_ok),
        "margin": float(min(r_wit - r_x ** -0.5 / c0,
                            c0 * r_x ** -0.5 - r_wit)),
    }
    est["r_witness"] = float(r_wit)

    # (ii) scalar curvature range inside U
    rvals = fld.r_scalar[inside]
    r_lo, r_hi = float(np.min(rvals)), float(np.max(rvals))
    est["ii_scalar_range"] = {
        "passed": bool(r_lo > r_x / c0 and r_hi < c0 * r_x),
        "margin": float(min(r_lo - r_x / c0, c0 * r_x - r_hi)),
    }

    # (iii) volume ratio on admissible sub-balls
    rm = fld.rm_norm
    ratios = []
    nodes_in = np.nonzero(inside)[0]
    samples = nodes_in[:: max(1, nodes_in.size // 4)]
    for y in samples:
        ry = min(s[y] - lo, hi - s[y])
        if ry <= 0:
            continue
        win = (s >= s[y] - ry) & (s <= s[y] + ry)
        if float(np.max(rm[win])) > ry ** -2:
            continue
        vol = ball_volume(slc, int(y), ry)
        ratios.append(vol / ry ** 3)
    if ratios:
        worst = float(np.min(ratios))
        est["iii_volume"] = {"passed": bool(worst > 1.0 / c0),
                             "margin": float(worst - 1.0 / c0)}
    else:
        est["iii_volume"] = {"passed": True, "margin": float("inf"),
                             "vacuous": True}

    # (iv) |grad R| < C0 R^{3/2} at the node
    h = slc.cell_lengths()
    gradr = _grad_at(fld.r_scalar, h, node, slc.topology.periodic)
    est["iv_grad_r"] = {
        "passed": bool(abs(gradr) < c0 * r_x ** 1.5),
        "margin": float(c0 * r_x ** 1.5 - abs(gradr)),
    }

    # (v) |Delta R + 2|Ric|^2| < C0 R^2 at the node
    lap = _laplacian_at(fld.r_scalar, slc, h, node)
    ric2 = (2.0 * fld.k_rad[node]) ** 2 \
        + 2.0 * (fld.k_sph[node] + fld.k_rad[node]) ** 2
    val = abs(lap + 2.0 * ric2)
    est["v_laplacian"] = {
        "passed": bool(val < c0 * r_x ** 2),
        "margin": float(c0 * r_x ** 2 - val),
    }

    # (vi) |grad Rm| < C0 |Rm|^{3/2} at the node
    g1 = _grad_at(fld.k_sph, h, node, slc.topology.periodic)
    g2 = _grad_at(fld.k_rad, h, node, slc.topology.periodic)
    grm = max(abs(g1), abs(g2))
    rmx = float(rm[node])
    est["vi_grad_rm"] = {
        "passed": bool(grm < c0 * rmx ** 1.5),
        "margin": float(c0 * rmx ** 1.5 - grm),
    }
    return est


def _grad_at(vals, h, node, periodic):
    n = vals.size
    if periodic:
        hm = h[node - 1] if node > 0 else h[-1]
        hp = h[node]
        vm = vals[node - 1]
        vp = vals[(node + 1) % n]
        return (vp - vm) / (hm + hp)
    if node == 0:
        return (vals[1] - vals[0]) / h[0]
    if node == n - 1:
        return (vals[-1] - vals[-2]) / h[-1]
    return (vals[node + 1] - vals[node - 1]) / (h[node - 1] + h[node])


def _laplacian_at(vals, slc, h, node):
    """Delta f = f_ss + 2 (psi_s/psi) f_s; 3 f_ss at poles."""
    n = vals.size
    periodic = slc.topology.periodic
    if not periodic and (node == 0 or node == n - 1):
        node = min(max(node, 1), n - 2)
    if periodic:
        hm = h[node - 1] if node > 0 else h[-1]
        hp = h[node]
        vm, v0, vp = vals[node - 1], vals[node], vals[(node + 1) % n]
        pm, p0, pp = slc.psi[node - 1], slc.psi[node], slc.psi[(node + 1) % n]
    else:
        hm, hp = h[node - 1], h[node]
        vm, v0, vp = vals[node - 1], vals[node], vals[node + 1]
        pm, p0, pp = slc.psi[node - 1], slc.psi[node], slc.psi[node + 1]
    f_s = (hm / (hp * (hm + hp))) * vp + ((hp - hm) / (hp * hm)) * v0 \
        - (hp / (hm * (hm + hp))) * vm
    f_ss = 2.0 * (vp / (hp * (hp + hm)) - v0 / (hp * hm)
                  + vm / (hm * (hp + hm)))
    psi_s = (hm / (hp * (hm + hp))) * pp + ((hp - hm) / (hp * hm)) * p0 \
        - (hp / (hm * (hm + hp))) * pm
    if p0 <= 1e-12:
        return 3.0 * f_ss
    return f_ss + 2.0 * (psi_s / p0) * f_s


# ---------------------------------------------------------------------------
# run-level monitors
# ---------------------------------------------------------------------------


def cn_monitor(history: History | None, slc: MetricSlice, t: float, r: float,
               config: FlowConfig, stride: int = 1) -> list[dict]:
    """Canonical-neighbourhood coverage at hot nodes.

    Every node with R >= r^-2 must classify as one of the four kinds; a
    record is emitted per failure (diagnostic only).
    """
    fld = compute_curvature(slc, check=False)
    hot = np.nonzero(fld.r_scalar >= r ** -2)[0][::stride]
    records = []
    for node in hot:
        v = classify_canonical(history, slc, int(node), t, config, fld=fld)
        if v.kind is CanonicalKind.NONE:
            records.append({
                "record": "cn_violation",
                "t": t,
                "component_id": slc.component_id,
                "node": int(node),
                "r_scalar": float(fld.r_scalar[node]),
            })
    return records


def noncollapsing_monitor(history: History | None, slc: MetricSlice, t: float,
                          kappa: float, max_scale: float = 1.0,
                          config: FlowConfig | None = None,
                          node_stride: int = 16) -> list[dict]:
    """Volume noncollapsing vol B(x,r) >= kappa r^3 wherever |Rm| <= r^-2 on
    the backward parabolic ball P(x, t, r, -r^2)."""
    fld = compute_curvature(slc, check=False)
    s = slc.arclength()
    records = []
    scales = [max_scale / 2 ** k for k in range(4)]
    for node in range(0, slc.n, node_stride):
        for rho in scales:
            rec = {"record": "noncollapsing", "t": t,
                   "component_id": slc.component_id,
                   "node": int(node), "scale": rho}
            if float(np.max(np.abs(fld.rm_norm[
                    (s >= s[node] - rho) & (s <= s[node] + rho)]))) > rho ** -2:
                continue  # precondition of the definition fails: skipped
            if history is not None:
                try:
                    x_lo = float(np.min(slc.x[(s >= s[node] - rho)
                                              & (s <= s[node] + rho)]))
                    x_hi = float(np.max(slc.x[(s >= s[node] - rho)
                                              & (s <= s[node] + rho)]))
                    if not history.interval_unscathed(
                            slc.component_id, x_lo, x_hi, t - rho ** 2, t):
                        continue
                    profs = history.profile_window(
                        slc.component_id, x_lo, x_hi, t - rho ** 2, t,
                        min_samples=2)
                except InsufficientHistory:
                    rec["skipped"] = "insufficient_history"
                    records.append(rec)
                    continue
                ok = True
                for (_, xw, pw, qw) in profs:
                    if xw.size < 5:
                        continue
                    d1, d2 = _window_derivs(xw, pw, qw)
                    with np.errstate(divide="ignore", invalid="ignore"):
                        ks = (1.0 - d1[1:-1] ** 2) / qw[1:-1] ** 2
                        kr = -d2[1:-1] / qw[1:-1]
                    rm = np.maximum(np.abs(ks), np.abs(kr))
                    if rm.size and float(np.max(rm)) > rho ** -2:
                        ok = False
                        break
                if not ok:
                    continue
            vol = ball_volume(slc, node, rho)
            ratio = vol / rho ** 3
            rec["volume_ratio"] = ratio
            rec["passed"] = bool(ratio >= kappa)
            records.append(rec)
    return records
