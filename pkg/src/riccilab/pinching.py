"""Explicit curvature-pinching machinery.

The time-dependent bound function rm_floor(t, s) is the inverse of

    F_t(sigma) = 2 sigma (ln(sigma) + ln(1+t) - 3),     sigma >= e^2/(1+t),

which maps [e^2/(1+t), +inf) monotonically onto [-2 e^2/(1+t), +inf).
A metric is "pinched toward positive" at time t when, at every point,

    R >= -6/(4t+1)          and          nu >= -rm_floor(t, R),

with nu the smallest curvature-operator eigenvalue.  While R <= r^-2 and
(1+t) r^-2 >= 4 e^5 hold, pinchedness forces |Rm| <= r^-2 — the monitor
rm_scalar_control_check asserts that implication node-wise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PreconditionError
from .geometry import CurvatureField

E2 = float(np.exp(2.0))
E5 = float(np.exp(5.0))
# scale where rm_floor(0, s)/s equals 1/4
RM_FLOOR_QUARTER_SCALE = 4.0 * E5


def pinch_threshold(t: float) -> float:
    """Lower edge e^2/(1+t) of the bound function's range."""
    return E2 / (1.0 + t)


def _forward(sigma, t):
    return 2.0 * sigma * (np.log(sigma) + np.log1p(t) - 3.0)


def rm_floor(t: float, s) -> float | np.ndarray:
    """Invert F_t(sigma) = s for sigma >= e^2/(1+t).

    Vectorized safeguarded Newton; converges to relative tolerance 1e-13.
    Raises DomainError when s < -2 e^2/(1+t) (below the range of F_t).
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    st = pinch_threshold(t)
    if np.any(s_arr < -2.0 * st * (1.0 + 1e-12)):
        raise DomainError(
            f"rm_floor: s below domain edge -2*e^2/(1+t) = {-2.0 * st:g}")
    s_arr = np.maximum(s_arr, -2.0 * st)

    lo = np.full_like(s_arr, st)
    hi = np.maximum(st * 2.0, np.abs(s_arr))
    grow = _forward(hi, t) < s_arr
    while np.any(grow):
        hi[grow] *= 2.0
        grow = _forward(hi, t) < s_arr

    # asymptotic seed sigma ~ s / (2 (ln(s (1+t)) - 3)) for large s
    denom = 2.0 * np.maximum(np.log(np.maximum(s_arr, st) * (1.0 + t)) - 3.0,
                             0.25)
    sigma = np.clip(s_arr / denom, lo * (1.0 + 1e-12), hi)
    for _ in range(200):
        f = _forward(sigma, t) - s_arr
        too_high = f > 0
        hi = np.where(too_high, sigma, hi)
        lo = np.where(too_high, lo, sigma)
        # F'(sigma) = 2(ln(sigma(1+t)) - 2); positive on the open domain
        deriv = 2.0 * (np.log(sigma) + np.log1p(t) - 2.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(deriv > 0, f / deriv, 0.0)
        nxt = sigma - step
        bad = ~((nxt > lo) & (nxt < hi)) | (deriv <= 0)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = np.abs(nxt - sigma) <= 1e-14 * np.abs(nxt)
        sigma = nxt
        if np.all(done):
            break
    if np.isscalar(s) or np.ndim(s) == 0:
        return float(sigma[0])
    return sigma


@dataclass
class PinchingReport:
    """Node-wise verdicts and signed margins for the two pinching bounds."""

    t: float
    scalar_margin: np.ndarray     # R + 6/(4t+1); negative = violation
    rm_margin: np.ndarray         # nu + rm_floor(t, R); negative = violation
    domain_violation: np.ndarray  # R below the bound function's domain
    tol: np.ndarray               # per-node tolerance used for the verdict

    @property
    def node_passed(self) -> np.ndarray:
        ok = (self.scalar_margin >= -self.tol) & ~self.domain_violation
        return ok & (self.rm_margin >= -self.tol)

    @property
    def passed(self) -> bool:
        return bool(np.all(self.node_passed))

    def worst(self) -> dict:
        m = np.minimum(self.scalar_margin, self.rm_margin)
        i = int(np.argmin(m))
        return {
            "node": i,
            "scalar_margin": float(self.scalar_margin[i]),
            "rm_margin": float(self.rm_margin[i]),
        }


def is_pinched_toward_positive(field: CurvatureField, t: float,
                               tol_pinch: float = 1e-6) -> PinchingReport:
    """Check R >= -6/(4t+1) and nu >= -rm_floor(t, R) at every node.

    Margins are signed; the verdict allows numerical drift of size
    tol_pinch * (1 + |R|) per node.  Nodes with R below the bound function's
    domain are reported as violations rather than raising.
    """
    r = field.r_scalar
    nu = field.nu
    scalar_margin = r + 6.0 / (4.0 * t + 1.0)
    tol = tol_pinch * (1.0 + np.abs(r))

    st = pinch_threshold(t)
    dom_bad = r < -2.0 * st - tol
    rm_margin = np.empty_like(r)
    # nodes with nu >= -tol pass outright (the floor is at least e^2/(1+t));
    # the reported margin nu + st is then a conservative lower bound
    need = (nu < -tol) & ~dom_bad
    rm_margin[~need] = nu[~need] + st
    if np.any(need):
        floor = rm_floor(t, np.clip(r[need], -2.0 * st, None))
        rm_margin[need] = nu[need] + floor
    rm_margin[dom_bad] = -np.inf
    return PinchingReport(
        t=t,
        scalar_margin=scalar_margin,
        rm_margin=rm_margin,
        domain_violation=dom_bad,
        tol=tol,
    )


def rm_scalar_control_check(field: CurvatureField, t: float, r: float,
                            tol: float = 1e-9) -> list[int]:
    """Assert node-wise: R <= r^-2 implies |Rm| <= r^-2.

    Requires (1+t) r^-2 >= 4 e^5 and a pinched field; any returned
    counterexample node indicates a discretization or monitor bug, since the
    implication is a theorem under those preconditions.
    """
    rinv2 = r ** -2
    if (1.0 + t) * rinv2 < RM_FLOOR_QUARTER_SCALE:
        raise PreconditionError(
            f"(1+t) r^-2 = {(1.0 + t) * rinv2:g} < 4e^5")
    mask = field.r_scalar <= rinv2 * (1.0 + tol)
    rm = field.rm_norm
    bad = mask & (rm > rinv2 * (1.0 + tol))
    return [int(i) for i in np.nonzero(bad)[0]]
