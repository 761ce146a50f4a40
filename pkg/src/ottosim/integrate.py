"""Fixed-step time-grid planning shared by all integration tiers.

The hot-bath gate is a hard square wave, so every integration is split at
the gate edges and each piece gets its own uniform step: the requested dt
is snapped down per piece (nsteps = ceil(length / dt_req)) so that edges
coincide exactly with step boundaries. For the default 50%-duty schedule
all pieces are equal half-periods and the snapped step is globally uniform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .params import DriveSchedule

# A piece shorter than this (relative to dt) is merged into its neighbor
# rather than integrated with a microscopic step.
_EDGE_EPS = 1e-9


@dataclass(frozen=True)
class Segment:
    """One constant-gate piece of the integration interval."""

    t0: float
    t1: float
    gate: float
    nsteps: int
    dt: float


def plan_segments(schedule: DriveSchedule, t0: float, t_end: float,
                  dt_req: float) -> list[Segment]:
    """Split [t0, t_end] at gate edges and snap dt per piece."""
    if t_end <= t0:
        raise DomainError(f"need t_end > t0, got [{t0}, {t_end}]")
    if dt_req <= 0:
        raise DomainError(f"dt must be > 0, got {dt_req}")
    cuts = [t0] + schedule.edges_in(t0, t_end) + [t_end]
    # Drop degenerate pieces created by edges essentially at the endpoints.
    segs = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b - a <= _EDGE_EPS * max(1.0, abs(t_end)):
            continue
        mid = 0.5 * (a + b)
        n = max(1, math.ceil((b - a) / dt_req - 1e-12))
        segs.append(Segment(t0=a, t1=b, gate=schedule.gate(mid), nsteps=n,
                            dt=(b - a) / n))
    if not segs:
        raise DomainError("empty integration interval after edge splitting")
    return segs


@dataclass(frozen=True)
class SamplePlan:
    """Sampling layout over a segment list.

    Samples sit on step boundaries: every `stride` steps within each
    segment, plus every segment end (so gate edges and t_end are always
    sampled). The initial time t0 is sample 0.
    """

    segments: tuple[Segment, ...]
    times: np.ndarray          # (n_samples,) sample times, times[0] = t0
    seg_counts: np.ndarray     # (n_segments,) samples contributed per segment
    stride: int

    @property
    def dt_max(self) -> float:
        return max(s.dt for s in self.segments)


def plan_samples(segments: list[Segment], stride: int) -> SamplePlan:
    """Sample every `stride` steps, always including segment ends."""
    if stride < 1:
        raise ConfigError(f"sample stride must be >= 1, got {stride}",
                          field="sample_every")
    times = [segments[0].t0]
    counts = []
    for seg in segments:
        marks = list(range(stride, seg.nsteps, stride)) + [seg.nsteps]
        counts.append(len(marks))
        times.extend(seg.t0 + k * seg.dt for k in marks)
    # Exact endpoint, avoiding accumulated rounding in the last mark.
    times[-1] = segments[-1].t1
    return SamplePlan(segments=tuple(segments), times=np.asarray(times),
                      seg_counts=np.asarray(counts, dtype=np.int64),
                      stride=stride)


def steps_in(seg: Segment, stride: int) -> list[int]:
    """Step counts between consecutive samples within one segment."""
    marks = list(range(stride, seg.nsteps, stride)) + [seg.nsteps]
    prev = 0
    out = []
    for m in marks:
        out.append(m - prev)
        prev = m
    return out
