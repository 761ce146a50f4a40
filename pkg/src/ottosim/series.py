"""Sampled time-series container shared by all model tiers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

# core moment columns common to every tier, in canonical order
MOMENT_COLUMNS = ("n_a", "q", "p", "var_na", "c_nq", "c_np", "n_b")

# extra columns the master-equation tier always emits
LINDBLAD_EXTRA = ("naq", "nap", "nb2_fact", "trace_defect", "herm_defect")

# statistical-error columns emitted by the classical ensemble tier
SE_COLUMNS = ("se_n_a", "se_q", "se_p", "se_n_b")


@dataclass
class TimeSeries:
    """Uniformly sampled observables.

    t    : (n,) sample times
    data : name -> (n,) float array, aligned with t
    aux  : name -> (n, ...) array-valued diagnostics (e.g. Fock populations)
    meta : run description (params snapshot, grid, tier, ...)
    """

    t: np.ndarray
    data: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        n = self.t.shape[0]
        for name, col in self.data.items():
            col = np.asarray(col)
            if col.shape[0] != n:
                raise DimensionError(
                    f"column {name!r} has {col.shape[0]} rows, expected {n}")
            self.data[name] = col
        for name, arr in self.aux.items():
            arr = np.asarray(arr)
            if arr.shape[0] != n:
                raise DimensionError(
                    f"aux {name!r} has {arr.shape[0]} rows, expected {n}")
            self.aux[name] = arr

    def __len__(self):
        return self.t.shape[0]

    def __contains__(self, name):
        return name in self.data

    def __getitem__(self, name):
        return self.data[name]

    @property
    def columns(self):
        return tuple(self.data.keys())

    def window(self, t0: float, t1: float) -> "TimeSeries":
        """View of the samples with t0 <= t <= t1 (inclusive, tolerant)."""
        eps = 1e-9 * max(1.0, abs(t1))
        m = (self.t >= t0 - eps) & (self.t <= t1 + eps)
        return TimeSeries(
            t=self.t[m],
            data={k: v[m] for k, v in self.data.items()},
            aux={k: v[m] for k, v in self.aux.items()},
            meta=dict(self.meta),
        )

    def last_index_at(self, t: float) -> int:
        """Index of the sample closest to t (grid-aligned lookups)."""
        return int(np.argmin(np.abs(self.t - t)))
