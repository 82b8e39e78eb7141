"""
CNTFET device model
-------------------

Chirality to geometry to threshold, plus the drain-current law used by the
circuit engine.

Geometry::

    d   = a * sqrt(n^2 + m^2) / pi          (formula="paper", the default, no cross term)
    d   = a * sqrt(n^2 + n*m + m^2) / pi    (formula="standard")
    Vth = vth_numerator / d

Drain current of an N device with ``u = Vgs - Vth`` and ``v = Vds >= 0``::

    I = kT * (F(u) - F(u - v)) * (1 + lambda*v)
      + tubes * i_off * g(u) * (1 - exp(-v/vt))

``F(x) = max(x, 0)^2 / 2`` gives the square law: triode when ``v < u``,
saturation ``kT/2 * u^2`` when ``v >= u``, zero below threshold. ``g(u)`` is
``10^(u/S)`` below threshold and saturates above it. Both kinks are rounded
over a 10 mV window by integrating a cubic Hermite segment, so the law is C2
and the analytic conductances match finite differences everywhere.

Negative ``Vds`` is handled by swapping drain and source; P devices mirror all
voltages and negate the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

BOLTZMANN_EV = 8.617333262e-5  # eV/K
SMOOTHING_WINDOW = 0.010  # V
T_NOMINAL = 300.0


class DomainError(ValueError):
    """Raised for inputs outside a model function's domain."""


class Polarity(str, Enum):
    N = "N"
    P = "P"

    @property
    def sign(self) -> int:
        return 1 if self is Polarity.N else -1


@dataclass(frozen=True)
class Chirality:
    n: int
    m: int

    def __post_init__(self):
        if not (isinstance(self.n, int) and isinstance(self.m, int)):
            raise DomainError(f"chirality indices must be integers, got ({self.n!r}, {self.m!r})")
        if not self.n >= self.m >= 0:
            raise DomainError(f"chirality requires n >= m >= 0, got ({self.n}, {self.m})")
        if self.n == 0:
            raise DomainError("chirality (0, 0) is not a tube")


@dataclass(frozen=True)
class ModelConfig:
    """Global device-model constants. Everything except ``vth_numerator`` is a
    calibration knob, not a measured value."""

    lattice_const_a: float = 0.249  # nm
    vth_numerator: float = 0.42  # V*nm
    k_per_tube: float = 40e-6  # A/V^2
    lambda_: float = 0.05  # 1/V
    i_off_300K: float = 1e-12  # A per tube
    subthreshold_swing_300K: float = 0.075  # V/decade
    mobility_temp_exponent: float = 1.5
    cap_per_tube: float = 4e-18  # F
    diameter_formula: str = "paper"

    def __post_init__(self):
        positive = ("lattice_const_a", "vth_numerator", "k_per_tube", "i_off_300K",
                    "subthreshold_swing_300K", "mobility_temp_exponent", "cap_per_tube")
        for name in positive:
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        if not (math.isfinite(self.lambda_) and self.lambda_ >= 0):
            raise DomainError(f"lambda must be >= 0, got {self.lambda_!r}")
        if self.diameter_formula not in ("paper", "standard"):
            raise DomainError(f"diameter_formula must be 'paper' or 'standard', got {self.diameter_formula!r}")

    @classmethod
    def from_mapping(cls, values: dict) -> "ModelConfig":
        """Build from string key/value pairs, e.g. the lines of a config file.

        ``lambda`` is accepted as an alias of ``lambda_``.
        """
        kwargs = {}
        known = {f for f in cls.__dataclass_fields__}
        for key, raw in values.items():
            key = key.strip()
            if key == "lambda":
                key = "lambda_"
            if key not in known:
                raise DomainError(f"unknown model parameter {key!r}")
            kwargs[key] = raw.strip() if key == "diameter_formula" else float(raw)
        return cls(**kwargs)


def diameter(c: Chirality, cfg: ModelConfig = ModelConfig()) -> float:
    """Tube diameter in nm."""
    if cfg.diameter_formula == "standard":
        root = math.sqrt(c.n * c.n + c.n * c.m + c.m * c.m)
    else:
        root = math.sqrt(c.n * c.n + c.m * c.m)
    return cfg.lattice_const_a * root / math.pi


def threshold_voltage(d: float, cfg: ModelConfig = ModelConfig()) -> float:
    """Threshold magnitude in volts for a tube of diameter ``d`` nm."""
    if not (math.isfinite(d) and d > 0):
        raise DomainError(f"diameter must be > 0, got {d!r}")
    return cfg.vth_numerator / d


def is_semiconducting(c: Chirality) -> bool:
    return (c.n - c.m) % 3 != 0


@dataclass(frozen=True)
class CntfetParams:
    """Electrical parameters of one device instance.

    Use :meth:`from_chirality` for the normal path; direct construction lets
    tests pin ``vth`` to round numbers.
    """

    polarity: Polarity
    chirality: Chirality
    tubes: int
    diameter_nm: float
    vth: float  # signed, negative for P
    k_eff: float
    gate_cap: float
    model: ModelConfig = field(default_factory=ModelConfig)

    @classmethod
    def from_chirality(cls, polarity, chirality: Chirality, tubes: int = 1,
                       cfg: ModelConfig = ModelConfig()) -> "CntfetParams":
        polarity = Polarity(polarity)
        if not (isinstance(tubes, int) and tubes >= 1):
            raise DomainError(f"tube count must be a positive integer, got {tubes!r}")
        d = diameter(chirality, cfg)
        vth = polarity.sign * threshold_voltage(d, cfg)
        return cls(polarity, chirality, tubes, d, vth,
                   tubes * cfg.k_per_tube, tubes * cfg.cap_per_tube, cfg)


# -- smoothing primitives -----------------------------------------------------

def _soft_square(x):
    """C2 rounding of ``max(x, 0)**2 / 2``; returns (F, F', F'').

    F'' is a cubic smoothstep over [-w/2, w/2]. Beyond the window F carries a
    constant offset of 0.025*w^2 (2.5e-6 V^2), the minimum lift any convex
    rounding of the kink needs.
    """
    w = SMOOTHING_WINDOW
    x = np.asarray(x, dtype=float)
    s = np.clip((x + 0.5 * w) / w, 0.0, 1.0)
    inside = w * w * (s**4 / 4 - s**5 / 10)
    inside_d = w * (s**3 - s**4 / 2)
    inside_dd = 3 * s**2 - 2 * s**3
    above = x >= 0.5 * w
    f = np.where(above, 0.5 * x * x + 0.025 * w * w, inside)
    fd = np.where(above, x, inside_d)
    fdd = np.where(above, 1.0, inside_dd)
    return f, fd, fdd


def _leak_gate_factor(u, swing):
    """Subthreshold gate factor ``10^(u/S)`` for u <= 0, rounded to a constant
    over [0, w]. Returns (g, dg/du)."""
    w = SMOOTHING_WINDOW
    a = math.log(10.0) / swing
    u = np.asarray(u, dtype=float)
    a = np.broadcast_to(a, u.shape) if np.ndim(a) else a
    m0 = a * w  # normalized slope of g' at the left edge (continuity of g'')
    s = np.clip(u / w, 0.0, 1.0)
    # g'(u) = a * P(s), P = h00(s) + m0*h10(s)
    p = (2 * s**3 - 3 * s**2 + 1) + m0 * (s**3 - 2 * s**2 + s)
    int_h00 = s - s**3 + s**4 / 2
    int_h10 = s**2 / 2 - 2 * s**3 / 3 + s**4 / 4
    g_in = 1.0 + a * w * (int_h00 + m0 * int_h10)
    below = u <= 0
    expo = np.exp(np.minimum(u, 0.0) * a)
    g = np.where(below, expo, g_in)
    dg = np.where(below, a * expo, a * p)
    return g, dg


def _n_core(u, v, kT, tubes, i_off, swing, lam, vt):
    """Forward-mode N law for v >= 0. Returns (I, dI/du, dI/dv)."""
    fu, fdu, _ = _soft_square(u)
    fuv, fduv, _ = _soft_square(u - v)
    clm = 1.0 + lam * v
    strong = kT * (fu - fuv)
    i_strong = strong * clm
    di_du = kT * (fdu - fduv) * clm
    di_dv = kT * fduv * clm + strong * lam

    g, dg = _leak_gate_factor(u, swing)
    ev = np.exp(-v / vt)
    leak0 = tubes * i_off
    i_leak = leak0 * g * (1.0 - ev)
    di_du = di_du + leak0 * dg * (1.0 - ev)
    di_dv = di_dv + leak0 * g * ev / vt
    return i_strong + i_leak, di_du, di_dv


def ids_vectorized(sign, vth_abs, k_eff, tubes, cfg: ModelConfig, v_gs, v_ds, temp_K):
    """Drain current and conductances for arrays of devices.

    ``sign`` is +1 for N and -1 for P. Returns ``(I, g_m, g_ds)`` where ``I`` is
    the current into the drain terminal and ``g_m``, ``g_ds`` are its partial
    derivatives with respect to ``v_gs`` and ``v_ds``.
    """
    sign = np.asarray(sign, dtype=float)
    vgs = sign * np.asarray(v_gs, dtype=float)
    vds = sign * np.asarray(v_ds, dtype=float)
    kT = np.asarray(k_eff, dtype=float) * (T_NOMINAL / temp_K) ** cfg.mobility_temp_exponent
    swing = cfg.subthreshold_swing_300K * (temp_K / T_NOMINAL)
    vt = BOLTZMANN_EV * temp_K
    lam = cfg.lambda_

    forward = vds >= 0
    # reverse mode: drain and source swap roles
    u = np.where(forward, vgs - vth_abs, vgs - vds - vth_abs)
    v = np.abs(vds)
    i, di_du, di_dv = _n_core(u, v, kT, tubes, cfg.i_off_300K, swing, lam, vt)
    gm = np.where(forward, di_du, -di_du)
    gds = np.where(forward, di_dv, di_du + di_dv)
    i = np.where(forward, i, -i)
    # mirror back for P: I_P = -I_N(-vgs, -vds); derivatives keep their sign
    return sign * i, gm, gds


def _check_inputs(v_gs, v_ds, temp_K):
    for name, val in (("v_gs", v_gs), ("v_ds", v_ds), ("temp_K", temp_K)):
        if not math.isfinite(val):
            raise DomainError(f"{name} must be finite, got {val!r}")
    if temp_K <= 0:
        raise DomainError(f"temperature must be > 0 K, got {temp_K!r}")


def _eval(p: CntfetParams, v_gs, v_ds, temp_K):
    _check_inputs(v_gs, v_ds, temp_K)
    i, gm, gds = ids_vectorized(p.polarity.sign, abs(p.vth), p.k_eff, p.tubes,
                                p.model, v_gs, v_ds, temp_K)
    return float(i), float(gm), float(gds)


def drain_current(p: CntfetParams, v_gs: float, v_ds: float, temp_K: float = 300.0) -> float:
    """Current into the drain terminal, in amperes."""
    return _eval(p, v_gs, v_ds, temp_K)[0]


def conductances(p: CntfetParams, v_gs: float, v_ds: float, temp_K: float = 300.0):
    """Analytic ``(g_m, g_ds)`` of :func:`drain_current`."""
    _, gm, gds = _eval(p, v_gs, v_ds, temp_K)
    return gm, gds
