"""Physical parameters, drive schedule, and derived rates.

All frequencies and rates are in units of the HF resonator frequency w_a
(set w_a = 1 for the default engine). The HF mode couples dispersively to
the LF mode with strength g; the HF line sees a static cold bath (kappa_a,
nbar_a) and a switchable hot bath (kappa_h, nbar_h) gated by a square-wave
schedule; the LF mode sees its own cold bath (kappa_b, nbar_b). Optional
static background channels (kappa_0a, kappa_0b) can be switched on; they
default to zero and stay bare (undressed) in both model variants.

Two master-equation variants are supported:

* "local": bare-mode jump operators for both modes.
* "global": jump operators for the LF bath dressed by the HF-conditional
  displacement, parameterized by alpha = g / w_b, plus an extra pure
  dephasing channel on the HF number at rate alpha^2 * kappa_d with
  kappa_d = 4 kappa_b T_b / w_b (T_b the LF bath temperature).

The closed moment system carries alpha as a coefficient, so the same
integrator serves both variants (alpha = 0 recovers "local").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .errors import ConfigError, DomainError

MODELS = ("local", "global")


def planck_occupancy(omega: float, temperature: float) -> float:
    """Bose-Einstein occupancy 1 / (exp(omega/T) - 1), kB = hbar = 1."""
    if omega <= 0:
        raise DomainError(f"omega must be > 0, got {omega}")
    if temperature <= 0:
        raise DomainError(f"temperature must be > 0, got {temperature}")
    x = omega / temperature
    # expm1 keeps precision for small x; for large x the occupancy underflows to 0.
    return 1.0 / math.expm1(x)


def effective_temperature(omega: float, nbar: float) -> float:
    """Inverse of planck_occupancy: T = omega / ln(1 + 1/nbar)."""
    if omega <= 0:
        raise DomainError(f"omega must be > 0, got {omega}")
    if nbar <= 0:
        raise DomainError(f"occupancy must be > 0, got {nbar}")
    return omega / math.log1p(1.0 / nbar)


@dataclass(frozen=True)
class DriveSchedule:
    """Square-wave gate s(t) in {0, 1} for the hot bath.

    The gate is on for duty * period starting at phase * period, i.e.
    s(t) = 1 iff frac(t/period - phase) < duty. A negative period disables
    switching: s(t) = 1 identically ("always on") if duty > 0 else 0.
    """

    period: float
    duty: float = 0.5
    phase: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.duty <= 1.0:
            raise ConfigError(f"must be in [0, 1], got {self.duty}", field="duty")
        if self.period == 0.0:
            raise ConfigError("must be nonzero (negative = constant drive)",
                              field="period")

    @property
    def constant(self) -> bool:
        return self.period < 0 or self.duty in (0.0, 1.0)

    def gate(self, t: float) -> float:
        """s(t): 1.0 when the hot bath is connected, else 0.0."""
        if self.period < 0:
            return 1.0 if self.duty > 0 else 0.0
        if self.duty == 0.0:
            return 0.0
        if self.duty == 1.0:
            return 1.0
        frac = (t / self.period - self.phase) % 1.0
        return 1.0 if frac < self.duty else 0.0

    def edges_in(self, t0: float, t1: float) -> list[float]:
        """Gate switching times strictly inside (t0, t1), sorted."""
        if self.constant:
            return []
        out = []
        k0 = math.floor(t0 / self.period - self.phase) - 1
        k1 = math.ceil(t1 / self.period - self.phase) + 1
        for k in range(k0, k1 + 1):
            for off in (0.0, self.duty):
                te = (k + self.phase + off) * self.period
                if t0 < te < t1:
                    out.append(te)
        return sorted(out)


class BathRates(NamedTuple):
    """Aggregated dissipation rates at a fixed gate value s.

    up/down are total upward/downward jump rates per channel group; the
    dressed LF channel carries the alpha displacement in the global model
    while the background LF channel always stays bare.
    """

    up_a: float
    down_a: float
    up_b: float        # dressed LF channel, kappa_b * nbar_b
    down_b: float      # dressed LF channel, kappa_b * (nbar_b + 1)
    up_b0: float       # background LF channel
    down_b0: float
    A: float           # total HF injection rate
    B: float           # total HF linewidth
    C: float           # correlation decay rate B + kb_tot / 2
    kb_tot: float      # total LF linewidth kappa_b + kappa_0b
    kb_src: float      # total LF injection kappa_b nbar_b + kappa_0b nbar_0b
    deph: float        # HF number-dephasing rate alpha^2 kappa_d


@dataclass(frozen=True)
class EngineParams:
    """Full parameter set of the two-resonator engine.

    Defaults reproduce the reference operating point: w_b = g = 0.05,
    kappa_a = kappa_h = 0.2, kappa_b = 0.005, static baths at occupancy
    0.01, hot bath at 0.125, gate period 2*pi/w_b with 50% duty (each
    half-stroke lasts pi/w_b, i.e. the cycle spans (2*pi)*20 scaled units).
    """

    omega_a: float = 1.0
    omega_b: float = 0.05
    g: float = 0.05
    kappa_a: float = 0.2
    kappa_h: float = 0.2
    kappa_b: float = 0.005
    nbar_a: float = 0.01
    nbar_b: float = 0.01
    nbar_h: float = 0.125
    nbar_init: float = 0.01
    model: str = "local"
    include_background: bool = False
    kappa_0a: float = 0.0
    kappa_0b: float = 0.0
    nbar_0a: float = 0.0
    nbar_0b: float = 0.0
    schedule: DriveSchedule = field(
        default_factory=lambda: DriveSchedule(period=2.0 * math.pi / 0.05)
    )

    def __post_init__(self):
        if self.omega_a <= 0:
            raise ConfigError(f"must be > 0, got {self.omega_a}", field="omega_a")
        if not 0 < self.omega_b < self.omega_a:
            raise ConfigError(
                f"need 0 < omega_b < omega_a, got omega_b={self.omega_b}", field="omega_b"
            )
        for name in ("g", "kappa_a", "kappa_h", "kappa_b",
                     "nbar_a", "nbar_b", "nbar_h", "nbar_init",
                     "kappa_0a", "kappa_0b", "nbar_0a", "nbar_0b"):
            if getattr(self, name) < 0:
                raise ConfigError(f"must be >= 0, got {getattr(self, name)}",
                                  field=name)
        if self.model not in MODELS:
            raise ConfigError(f"must be one of {MODELS}, got {self.model!r}",
                              field="model")

    @property
    def alpha(self) -> float:
        """Dressing strength g / w_b for the global model, 0 for local."""
        return self.g / self.omega_b if self.model == "global" else 0.0

    @property
    def temperature_b(self) -> float:
        return effective_temperature(self.omega_b, self.nbar_b)

    @property
    def kappa_d(self) -> float:
        """Dephasing rate 4 kappa_b T_b / w_b of the dressed HF channel."""
        if self.nbar_b == 0.0:
            return 0.0
        return 4.0 * self.kappa_b * self.temperature_b / self.omega_b

    @property
    def cycle_period(self) -> float:
        return abs(self.schedule.period)

    def with_model(self, model: str) -> "EngineParams":
        return replace(self, model=model)

    def with_drive(self, schedule: DriveSchedule) -> "EngineParams":
        return replace(self, schedule=schedule)

    def constant_drive(self, on: bool = True) -> "EngineParams":
        """Copy with the hot bath pinned on (or off) for steady-state work."""
        return replace(self, schedule=DriveSchedule(period=-1.0, duty=1.0 if on else 0.0))

    def kappa_h_at(self, t: float) -> float:
        return self.kappa_h * self.schedule.gate(t)

    def bath_rates(self, s: float) -> BathRates:
        """All aggregated rates at gate value s (see BathRates)."""
        k0a = self.kappa_0a if self.include_background else 0.0
        k0b = self.kappa_0b if self.include_background else 0.0
        n0a = self.nbar_0a if self.include_background else 0.0
        n0b = self.nbar_0b if self.include_background else 0.0
        kh = self.kappa_h * s
        up_a = self.kappa_a * self.nbar_a + kh * self.nbar_h + k0a * n0a
        down_a = (self.kappa_a * (self.nbar_a + 1.0)
                  + kh * (self.nbar_h + 1.0)
                  + k0a * (n0a + 1.0))
        up_b = self.kappa_b * self.nbar_b
        down_b = self.kappa_b * (self.nbar_b + 1.0)
        up_b0 = k0b * n0b
        down_b0 = k0b * (n0b + 1.0)
        A = up_a
        B = down_a - up_a
        kb_tot = self.kappa_b + k0b
        return BathRates(
            up_a=up_a, down_a=down_a,
            up_b=up_b, down_b=down_b, up_b0=up_b0, down_b0=down_b0,
            A=A, B=B, C=B + 0.5 * kb_tot,
            kb_tot=kb_tot, kb_src=up_b + up_b0,
            deph=self.alpha ** 2 * self.kappa_d,
        )

    # Shorthands for the closed moment system at gate value s.
    def rate_A(self, s: float) -> float:
        return self.bath_rates(s).A

    def rate_B(self, s: float) -> float:
        return self.bath_rates(s).B

    def rate_C(self, s: float) -> float:
        return self.bath_rates(s).C
