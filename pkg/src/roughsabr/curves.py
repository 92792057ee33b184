"""Model parameters, forward-variance curves, and power-kernel quantities.

The model is parameterized by a Hurst exponent H in (0, 1/2], a vol-of-vol
eta > 0, a spot/vol correlation rho in [-1, 1], and a backbone function
beta(s) > 0.  The volatility kernel is

    kappa(t) = eta * sqrt(2 H) * t**(H - 1/2),

so that the classical (Markovian) case H = 1/2 gives kappa = eta.  Forward
variance xi0(s) enters through two integral quantities used everywhere else:

    U_t(tau)  = sqrt( (1/tau) * int_t^{t+tau} xi_t(s) ds )        average vol
    R_t(tau)  = int_0^1 theta**(H-1/2) xi(t+tau*theta) dtheta
                / int_0^1 xi(t+tau*theta) dtheta                  kernel ratio

For a flat curve R is exactly 1/(H + 1/2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import DomainError

_QUAD_RTOL = 1e-10


@dataclass(frozen=True)
class BetaSpec:
    """Backbone function beta(s) of the spot dynamics dS = beta(S) alpha dZ.

    kind is one of 'lognormal' (beta(s) = s), 'normal' (beta(s) = 1),
    'power' (beta(s) = s**p, 0 < p < 1) or 'custom' (positive callable).
    """

    kind: str
    p: float | None = None
    func: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("lognormal", "normal", "power", "custom"):
            raise DomainError(f"unknown beta kind {self.kind!r}")
        if self.kind == "power":
            if self.p is None or not 0.0 < self.p < 1.0:
                raise DomainError(f"power beta requires 0 < p < 1, got {self.p!r}")
        if self.kind == "custom" and not callable(self.func):
            raise DomainError("custom beta requires a callable")

    @classmethod
    def lognormal(cls) -> "BetaSpec":
        return cls("lognormal")

    @classmethod
    def normal(cls) -> "BetaSpec":
        return cls("normal")

    @classmethod
    def power(cls, p: float) -> "BetaSpec":
        return cls("power", p=float(p))

    @classmethod
    def custom(cls, func: Callable) -> "BetaSpec":
        return cls("custom", func=func)

    def __call__(self, s):
        """Evaluate beta at s (scalar or ndarray)."""
        if self.kind == "lognormal":
            return np.asarray(s, dtype=float) if np.ndim(s) else float(s)
        if self.kind == "normal":
            return np.ones_like(np.asarray(s, dtype=float)) if np.ndim(s) else 1.0
        if self.kind == "power":
            return np.power(s, self.p) if np.ndim(s) else float(s) ** self.p
        out = self.func(s)
        return np.asarray(out, dtype=float) if np.ndim(s) else float(out)

    def describe(self) -> dict:
        if self.kind == "power":
            return {"kind": self.kind, "p": self.p}
        return {"kind": self.kind}


@dataclass(frozen=True)
class ModelParams:
    """Rough SABR parameter set.

    H in (0, 1/2]; eta > 0; rho in [-1, 1].  rho = +/-1 is a legal parameter
    value but is rejected by the smile-ODE operations, which need |rho| < 1.
    """

    H: float
    eta: float
    rho: float
    beta: BetaSpec = field(default_factory=BetaSpec.lognormal)

    def __post_init__(self):
        if not 0.0 < self.H <= 0.5:
            raise DomainError(f"H must lie in (0, 1/2], got {self.H}")
        if not self.eta > 0.0:
            raise DomainError(f"eta must be positive, got {self.eta}")
        if not -1.0 <= self.rho <= 1.0:
            raise DomainError(f"rho must lie in [-1, 1], got {self.rho}")

    def describe(self) -> dict:
        return {"H": self.H, "eta": self.eta, "rho": self.rho,
                "beta": self.beta.describe()}


@dataclass(frozen=True)
class ForwardVarianceCurve:
    """Static forward-variance curve xi0(s), s >= 0.

    kind 'flat': constant xi0.
    kind 'piecewise': right-continuous step function on knot times; values
        extrapolate flat beyond the last knot; queries below the first knot
        are a domain error.
    kind 'sampled': arbitrary positive callable, assumed continuous; integrals
        fall back to adaptive quadrature.
    """

    kind: str
    xi0: float | None = None
    knots: tuple = ()
    values: tuple = ()
    func: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("flat", "piecewise", "sampled"):
            raise DomainError(f"unknown curve kind {self.kind!r}")
        if self.kind == "flat":
            if self.xi0 is None or not self.xi0 > 0.0:
                raise DomainError(f"flat curve needs xi0 > 0, got {self.xi0!r}")
        if self.kind == "piecewise":
            k = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if k.size == 0 or k.size != v.size:
                raise DomainError("piecewise curve needs equal-length knots and values")
            if np.any(np.diff(k) <= 0.0):
                raise DomainError("piecewise knots must be strictly increasing")
            if np.any(v <= 0.0):
                raise DomainError("forward variance values must be positive")
        if self.kind == "sampled" and not callable(self.func):
            raise DomainError("sampled curve requires a callable")

    @classmethod
    def flat(cls, xi0: float) -> "ForwardVarianceCurve":
        return cls("flat", xi0=float(xi0))

    @classmethod
    def piecewise(cls, knots: Sequence[float], values: Sequence[float]) -> "ForwardVarianceCurve":
        return cls("piecewise", knots=tuple(float(t) for t in knots),
                   values=tuple(float(v) for v in values))

    @classmethod
    def sampled(cls, func: Callable) -> "ForwardVarianceCurve":
        return cls("sampled", func=func)

    @classmethod
    def from_csv(cls, path) -> "ForwardVarianceCurve":
        """Load a piecewise-constant curve from a two-column CSV with header t,xi."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [c.strip() for c in header] != ["t", "xi"]:
                raise DomainError(f"curve CSV must have header 't,xi', got {header!r}")
            rows = [(float(r[0]), float(r[1])) for r in reader if r]
        if not rows:
            raise DomainError("curve CSV has no data rows")
        knots = [r[0] for r in rows]
        values = [r[1] for r in rows]
        if knots[0] != 0.0:
            raise DomainError(f"curve CSV must start at t=0, got t={knots[0]}")
        return cls.piecewise(knots, values)

    def value(self, s: float) -> float:
        """xi0(s) at a single time."""
        if self.kind == "flat":
            return self.xi0
        if self.kind == "sampled":
            v = float(self.func(s))
            if not v > 0.0:
                raise DomainError(f"sampled curve nonpositive at s={s}: {v}")
            return v
        k = np.asarray(self.knots)
        if s < k[0]:
            raise DomainError(f"curve undefined for s={s} < first knot {k[0]}")
        idx = int(np.searchsorted(k, s, side="right")) - 1
        return self.values[idx]

    def values_at(self, s: np.ndarray) -> np.ndarray:
        """Vectorized xi0(s)."""
        s = np.asarray(s, dtype=float)
        if self.kind == "flat":
            return np.full(s.shape, self.xi0)
        if self.kind == "sampled":
            v = np.asarray(self.func(s), dtype=float)
            if v.shape != s.shape:
                v = np.broadcast_to(v, s.shape).astype(float)
            if np.any(v <= 0.0):
                raise DomainError("sampled curve nonpositive on the requested times")
            return v
        k = np.asarray(self.knots)
        if np.any(s < k[0]):
            raise DomainError("curve undefined below the first knot")
        idx = np.searchsorted(k, s, side="right") - 1
        return np.asarray(self.values)[idx]

    def integral(self, a: float, b: float) -> float:
        """int_a^b xi0(s) ds with flat extrapolation beyond the last knot."""
        if b < a:
            raise DomainError(f"integral needs a <= b, got [{a}, {b}]")
        if self.kind == "flat":
            return self.xi0 * (b - a)
        if self.kind == "sampled":
            val, _ = quad(lambda s: self.value(s), a, b, epsrel=_QUAD_RTOL, limit=200)
            return val
        knots = np.asarray(self.knots)
        if a < knots[0]:
            raise DomainError(f"curve undefined for s={a} < first knot {knots[0]}")
        edges = [a] + [float(t) for t in knots if a < t < b] + [b]
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            total += self.value(0.5 * (lo + hi)) * (hi - lo)
        return total

    def describe(self) -> dict:
        if self.kind == "flat":
            return {"kind": "flat", "xi0": self.xi0}
        if self.kind == "piecewise":
            return {"kind": "piecewise", "knots": list(self.knots),
                    "values": list(self.values)}
        return {"kind": "sampled"}


def kernel_kappa(params: ModelParams, t: float) -> float:
    """Volatility kernel kappa(t) = eta sqrt(2H) t**(H - 1/2); requires t > 0."""
    if not t > 0.0:
        raise DomainError(f"kernel kappa requires t > 0, got {t}")
    if params.H == 0.5:
        return params.eta
    return params.eta * math.sqrt(2.0 * params.H) * t ** (params.H - 0.5)


def average_vol_U(curve: ForwardVarianceCurve, t: float, tau: float) -> float:
    """Average volatility U_t(tau); exactly sqrt(xi0) for a flat curve."""
    if not tau > 0.0:
        raise DomainError(f"average_vol_U requires tau > 0, got {tau}")
    if curve.kind == "flat":
        return math.sqrt(curve.xi0)
    return math.sqrt(curve.integral(t, t + tau) / tau)


def kernel_ratio_R(curve: ForwardVarianceCurve, params: ModelParams,
                   t: float, tau: float) -> float:
    """Kernel-weighted forward-variance ratio R_t(tau).

    R = int_0^1 theta**(H-1/2) xi(t+tau theta) dtheta / int_0^1 xi(t+tau theta) dtheta.
    The kernel singularity at theta=0 is removed analytically: flat and
    piecewise curves integrate theta**(gamma-1) in closed form per segment,
    and sampled curves use the substitution u = theta**gamma, under which the
    numerator becomes (1/gamma) int_0^1 xi(t + tau u**(1/gamma)) du, evaluated
    by adaptive quadrature at relative tolerance 1e-10.
    """
    if not tau > 0.0:
        raise DomainError(f"kernel_ratio_R requires tau > 0, got {tau}")
    gamma = params.H + 0.5
    if curve.kind == "flat":
        return 1.0 / gamma
    if curve.kind == "piecewise":
        knots = np.asarray(curve.knots)
        if t < knots[0]:
            raise DomainError(f"curve undefined for s={t} < first knot {knots[0]}")
        edges = [t] + [float(s) for s in knots if t < s < t + tau] + [t + tau]
        num = 0.0
        den = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            v = curve.value(0.5 * (lo + hi))
            th_lo = (lo - t) / tau
            th_hi = (hi - t) / tau
            num += v * (th_hi ** gamma - th_lo ** gamma) / gamma
            den += v * (th_hi - th_lo)
        return num / den
    inv_gamma = 1.0 / gamma
    num, _ = quad(lambda u: curve.value(t + tau * u ** inv_gamma), 0.0, 1.0,
                  epsrel=_QUAD_RTOL, limit=200)
    num /= gamma
    den = curve.integral(t, t + tau) / tau
    return num / den
