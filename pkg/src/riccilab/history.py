"""Time-indexed storage of slices with component lineage.

The flow engine appends snapshots at an adaptive cadence (at least
``samples_per_window`` per backward window 1/R_max) and registers surgery
lineage: which coordinate range of a parent each child kept, and which
ranges were removed.  Classifiers query past profiles of a coordinate
interval; a query is *scathed* when the interval meets a removed range or a
cut sphere at an intermediate singular time, and raises InsufficientHistory
when the window precedes the run start or the interval's birth.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientHistory
from .geometry import MetricSlice


@dataclass
class ComponentRecord:
    component_id: int
    born_t: float
    parent_id: int | None = None
    kept_x: tuple[float, float] | None = None   # coordinate range kept from parent
    cap_x: list = field(default_factory=list)   # new coordinate ranges (caps)
    died_t: float | None = None
    death_reason: str | None = None


@dataclass
class SurgeryMark:
    """Coordinate bookkeeping of one singular time, per parent component."""

    t: float
    parent_id: int
    cut_x: list                      # middle-sphere coordinates
    removed_x: list                  # [(x_lo, x_hi)] ranges that disappeared


class History:
    """Append-only snapshot store with single writer, many readers."""

    def __init__(self, max_slices: int = 1024):
        self.max_slices = max_slices
        self.times: list[float] = []
        self.snaps: list[dict[int, MetricSlice]] = []
        self.records: dict[int, ComponentRecord] = {}
        self.marks: list[SurgeryMark] = []
        self.thinned = 0
        self.t_start: float | None = None

    # -- writing ------------------------------------------------------------

    def register_root(self, slc: MetricSlice):
        self.records[slc.component_id] = ComponentRecord(
            component_id=slc.component_id, born_t=slc.t)
        if self.t_start is None or slc.t < self.t_start:
            self.t_start = slc.t

    def register_child(self, child_id: int, parent_id: int, t: float,
                       kept_x: tuple[float, float], cap_x: list):
        self.records[child_id] = ComponentRecord(
            component_id=child_id, born_t=t, parent_id=parent_id,
            kept_x=kept_x, cap_x=list(cap_x))

    def mark_death(self, component_id: int, t: float, reason: str):
        rec = self.records[component_id]
        rec.died_t = t
        rec.death_reason = reason

    def add_mark(self, mark: SurgeryMark):
        self.marks.append(mark)

    def add_snapshot(self, t: float, slices: dict[int, MetricSlice]):
        if self.t_start is None:
            self.t_start = t
        self.times.append(t)
        self.snaps.append(dict(slices))
        if len(self.times) > self.max_slices:
            self._thin()

    def _thin(self):
        """Drop every other snapshot among the oldest half; logged via counter."""
        half = len(self.times) // 2
        keep = [i for i in range(len(self.times)) if i >= half or i % 2 == 0]
        self.thinned += len(self.times) - len(keep)
        self.times = [self.times[i] for i in keep]
        self.snaps = [self.snaps[i] for i in keep]

    # -- lineage ------------------------------------------------------------

    def lineage_at(self, component_id: int, t: float) -> int:
        """Id of the ancestor of ``component_id`` alive at time t."""
        rec = self.records[component_id]
        while rec.born_t > t:
            if rec.parent_id is None:
                raise InsufficientHistory(
                    f"t={t:g} precedes run start of component {component_id}")
            rec = self.records[rec.parent_id]
        return rec.component_id

    def interval_unscathed(self, component_id: int, x_lo: float, x_hi: float,
                           t0: float, t1: float) -> bool:
        """True when the coordinate interval stays regular on [t0, t1).

        The interval is interpreted in the coordinates of ``component_id``
        (children keep parent coordinates on their kept range).  Removal of
        the whole component at a time inside the window counts as scathed.
        """
        rec = self.records[component_id]
        # walk back to the ancestor alive at t0, checking containment
        chain = [rec]
        while chain[-1].born_t > t0:
            parent = chain[-1].parent_id
            if parent is None:
                raise InsufficientHistory(
                    f"window [{t0:g},{t1:g}] precedes run start")
            chain.append(self.records[parent])
        for child in chain[:-1]:
            lo, hi = child.kept_x
            if not (x_lo >= lo - 1e-12 and x_hi <= hi + 1e-12):
                return False  # interval includes cap-born or removed nodes
        # surgeries inside the window on any ancestor must miss the interval
        ids = {r.component_id for r in chain}
        for mark in self.marks:
            if not (t0 <= mark.t < t1) or mark.parent_id not in ids:
                continue
            for cx in mark.cut_x:
                if x_lo - 1e-12 <= cx <= x_hi + 1e-12:
                    return False
            for (rlo, rhi) in mark.removed_x:
                if x_hi > rlo and x_lo < rhi:
                    return False
        for r in chain:
            if r.died_t is not None and t0 <= r.died_t < t1 \
                    and r.death_reason != "split":
                return False
        return True

    # -- reading ------------------------------------------------------------

    def stored_times(self, t0: float, t1: float) -> list[float]:
        i = bisect.bisect_left(self.times, t0 - 1e-15)
        j = bisect.bisect_right(self.times, t1 + 1e-15)
        return self.times[i:j]

    def slice_at(self, component_id: int, t: float) -> MetricSlice:
        """Stored slice of the lineage ancestor at the stored time nearest t."""
        if not self.times:
            raise InsufficientHistory("history is empty")
        if t < self.t_start - 1e-15:
            raise InsufficientHistory(f"t={t:g} precedes run start")
        i = bisect.bisect_left(self.times, t)
        cands = [j for j in (i - 1, i, i + 1) if 0 <= j < len(self.times)]
        j = min(cands, key=lambda j: abs(self.times[j] - t))
        anc = self.lineage_at(component_id, self.times[j])
        snap = self.snaps[j]
        if anc not in snap:
            raise InsufficientHistory(
                f"component {anc} missing from snapshot t={self.times[j]:g}")
        return snap[anc]

    def profile_window(self, component_id: int, x_lo: float, x_hi: float,
                       t0: float, t1: float, min_samples: int = 2):
        """Stored (t, x, phi, psi) restricted to a coordinate interval.

        Raises InsufficientHistory when fewer than ``min_samples`` stored
        times fall in [t0, t1] or the window precedes the run start.
        """
        if self.t_start is None or t0 < self.t_start - 1e-12:
            raise InsufficientHistory(
                f"window [{t0:g},{t1:g}] precedes run start")
        ts = self.stored_times(t0, t1)
        if len(ts) < min_samples:
            raise InsufficientHistory(
                f"only {len(ts)} stored slices in [{t0:g},{t1:g}]")
        out = []
        for t in ts:
            slc = self.slice_at(component_id, t)
            sel = (slc.x >= x_lo - 1e-12) & (slc.x <= x_hi + 1e-12)
            out.append((t, slc.x[sel], slc.phi[sel], slc.psi[sel]))
        return out
