"""Run configuration: surgery parameters, classifier constants, discretization knobs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

from .errors import InvalidParameters


@dataclass
class FlowConfig:
    """All tunable constants for a run.

    Surgery parameters (r, delta) and cutoff parameters (h, D, Theta) follow
    the threshold scheme Theta = 2*D*h**-2: surgery fires when R_max reaches
    Theta and cuts at strong delta-necks of curvature scale h**-2.  In strict
    mode the classical ranges (r < 1e-3, h < delta*r) are enforced; desk-scale
    scenarios run with strict=False and validated sites instead (every cut
    site must pass the strong-neck check regardless).
    """

    # surgery parameters
    r: float = 5e-4                 # canonical-neighbourhood scale (length)
    delta: float = 1e-2             # neck quality for cutoff necks
    c_h: float = 0.5                # h = c_h * delta * r when h_override unset
    D: float = 50.0                 # threshold ratio, > 10
    h_override: float | None = None  # desk-scale direct cutoff scale
    delta0: float = 0.5             # admissible upper bound for delta
    strict: bool = False            # enforce classical parameter ranges

    # canonical-neighbourhood / noncollapsing constants
    eps0: float = 1e-2              # closeness quality for canonical classifiers
    C0: float = 100.0               # canonical estimate constant
    kappa: float = 1.0              # noncollapsing volume ratio
    beta0: float = 0.1              # neck-strengthening margin (convention)
    kappa_st: float = 1.0           # noncollapsing constant for the standard solution
    const_st: float | None = None   # R_min(t)(1-t) floor; measured when None

    # discretization
    points_per_scale: int = 16      # min nodes per |Rm|^{-1/2}
    coarsen_factor: float = 4.0     # coarsen when over-resolved by this factor
    coarsen_target: float = 2.0     # coarsen down to target*points_per_scale
    max_nodes: int = 40000
    cfl: float = 0.2                # dt = cfl * ds_min^2 / max(1, |Rm|_max)
    event_tol: float = 1e-3         # relative localization of R_max = Theta
    tol_pinch: float = 1e-6         # pinching margin tolerance (x local |R|)
    site_tol: float = 0.05          # relative tolerance for R = h^-2 sites
    interval_tol: float = 0.05      # slack on neck half-length in rescaled units
    boundary_margin: float = 0.0    # arclength excluded near frozen ends
    extinction_psi: float = 0.1     # max warp radius for disappearing-round removal
    samples_per_window: int = 8     # history samples per backward neck window
    history_max_slices: int = 4096
    regrid_stride: int = 8          # steps between resolution checks
    series_stride: int = 1          # steps between CSV rows

    # run orchestration
    horizon: float = 1.0
    component_cap: int = 64
    seed: int = 0

    # monitor toggles
    monitor_rmin_bound: bool = True
    monitor_pinching: bool = True
    monitor_scalar: bool = True
    monitor_cn: bool = False
    monitor_nc: bool = False
    abort_on_violation: bool = True

    def __post_init__(self):
        self.validate()

    # -- derived cutoff parameters ------------------------------------------

    @property
    def h(self) -> float:
        if self.h_override is not None:
            return float(self.h_override)
        return self.c_h * self.delta * self.r

    @property
    def theta(self) -> float:
        return 2.0 * self.D * self.h ** -2

    def delta_prime(self) -> float:
        """Cap-closeness tolerance delta'(delta) = min(10*delta, eps0/10)."""
        return min(10.0 * self.delta, self.eps0 / 10.0)

    # -- validation ---------------------------------------------------------

    def validate(self):
        if not (self.r > 0 and self.delta > 0):
            raise InvalidParameters("r and delta must be positive")
        if self.delta >= min(self.eps0 * (1 + 1e-12), self.delta0) and self.strict:
            raise InvalidParameters(
                f"delta={self.delta} must be < min(eps0, delta0)"
                f"={min(self.eps0, self.delta0)}"
            )
        if self.D <= 10.0:
            raise InvalidParameters(f"D={self.D} must be > 10")
        if self.h <= 0:
            raise InvalidParameters("cutoff scale h must be positive")
        if self.strict:
            if not self.r < 1e-3:
                raise InvalidParameters(f"r={self.r} must be < 1e-3")
            if not self.h < self.delta * self.r:
                raise InvalidParameters(
                    f"h={self.h} must lie in (0, delta*r)={self.delta * self.r}"
                )
        if not math.isclose(self.theta, 2.0 * self.D / self.h ** 2, rel_tol=1e-15):
            raise InvalidParameters("Theta must equal 2*D*h^-2 exactly")
        if self.cfl <= 0 or self.cfl > 0.5:
            raise InvalidParameters("cfl must lie in (0, 0.5]")
        if self.points_per_scale < 4:
            raise InvalidParameters("points_per_scale must be >= 4")

    # -- (de)serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            out[f.name] = getattr(self, f.name)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FlowConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidParameters(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)
