"""Implied-volatility smile assembly from the ODE solution or its approximation.

The smile at log-strike k = log(K/S) and expiry tau is

    Sigma(k, tau) = Sigma(0, tau) * |y(k, tau)| / sqrt( G( y(k_beta, tau) ) )

with scaled moneyness y(x, tau) = kappa(tau) x / U(tau), the backbone-adjusted
strike transform k_beta = int_S^K ds / beta(s), and G either the tabulated ODE
solution or the closed-form G_A.  The short-maturity expansion behind the
formula degrades once eta * tau**H approaches 1; tables carry a warning flag
when eta * tau**H >= 1.

Sigma(0, tau) defaults to the model-consistent ATM level U(tau) * beta(S) / S
(which reduces to U for the lognormal backbone) and can be overridden with a
market-observed ATM volatility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import quad

from .curves import BetaSpec, ForwardVarianceCurve, ModelParams, average_vol_U, kernel_kappa
from .errors import DomainError
from .smile_ode import DEFAULT_Y_MAX, approx_f, solved
from .tableio import write_csv, write_json, write_json_table

SOURCE_ODE = "ode"
SOURCE_APPROX = "approx"


def strike_transform_kbeta(beta: BetaSpec, S: float, K: float) -> float:
    """Backbone-adjusted moneyness k_beta = int_S^K ds / beta(s) (signed)."""
    if beta.kind == "normal":
        return K - S
    if beta.kind == "lognormal":
        if not (S > 0.0 and K > 0.0):
            raise DomainError(f"lognormal transform needs S, K > 0, got S={S}, K={K}")
        return math.log(K / S)
    if beta.kind == "power":
        if not (S > 0.0 and K > 0.0):
            raise DomainError(f"power transform needs S, K > 0, got S={S}, K={K}")
        one_m_p = 1.0 - beta.p
        return (K ** one_m_p - S ** one_m_p) / one_m_p
    lo, hi = (S, K) if S <= K else (K, S)
    if lo < hi:
        samples = beta(np.linspace(lo, hi, 101))
        if np.any(~np.isfinite(samples)) or np.any(samples <= 0.0):
            raise DomainError("custom beta must be positive on the strike interval")
    val, _ = quad(lambda s: 1.0 / beta(s), S, K, epsrel=1e-12, limit=200)
    return val


def scaled_moneyness_y(params: ModelParams, curve: ForwardVarianceCurve,
                       t: float, tau: float, x: float) -> float:
    """Dimensionless moneyness y = kappa(tau) x / U_t(tau)."""
    return kernel_kappa(params, tau) * x / average_vol_U(curve, t, tau)


def bachelier_to_bs_vol(S: float, K: float, sigma_b: float) -> float:
    """Short-maturity normal-to-lognormal vol conversion sigma_b log(K/S)/(K-S)."""
    if not (S > 0.0 and K > 0.0):
        raise DomainError(f"vol conversion needs S, K > 0, got S={S}, K={K}")
    if not sigma_b > 0.0:
        raise DomainError(f"sigma_b must be positive, got {sigma_b}")
    d = K - S
    if d == 0.0:
        return sigma_b / S
    return sigma_b * math.log1p(d / S) / d


@dataclass(frozen=True)
class SmileRequest:
    """A single-expiry smile request.

    strikes are prices; use from_log_strikes for log-moneyness input.  The
    smile source is 'approx' (closed-form G_A, the default) or 'ode'
    (numerically solved G).
    """

    params: ModelParams
    curve: ForwardVarianceCurve
    spot: float
    tau: float
    strikes: tuple
    source: str = SOURCE_APPROX
    atm_vol_override: Optional[float] = None
    y_max: float = DEFAULT_Y_MAX

    def __post_init__(self):
        if not self.tau > 0.0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if not self.spot > 0.0:
            raise DomainError(f"spot must be positive, got {self.spot}")
        if self.source not in (SOURCE_ODE, SOURCE_APPROX):
            raise DomainError(f"unknown smile source {self.source!r}")
        if len(self.strikes) == 0:
            raise DomainError("at least one strike is required")
        if self.atm_vol_override is not None and not self.atm_vol_override > 0.0:
            raise DomainError("atm_vol_override must be positive")

    @classmethod
    def from_log_strikes(cls, params, curve, spot, tau, log_strikes, **kw) -> "SmileRequest":
        strikes = tuple(float(spot) * math.exp(float(k)) for k in log_strikes)
        return cls(params=params, curve=curve, spot=float(spot), tau=float(tau),
                   strikes=strikes, **kw)


CSV_HEADER = ["strike", "k", "k_beta", "y_k", "y_kbeta", "iv", "iv_normalized"]


@dataclass(frozen=True)
class SmileTable:
    """Smile output table plus run metadata (params, tau, source, warning flag)."""

    strike: np.ndarray
    k: np.ndarray
    k_beta: np.ndarray
    y_k: np.ndarray
    y_kbeta: np.ndarray
    iv: np.ndarray
    iv_normalized: np.ndarray
    metadata: dict = field(repr=False)

    def rows(self):
        for i in range(self.strike.size):
            yield (float(self.strike[i]), float(self.k[i]), float(self.k_beta[i]),
                   float(self.y_k[i]), float(self.y_kbeta[i]), float(self.iv[i]),
                   float(self.iv_normalized[i]))

    def write_csv(self, path) -> None:
        write_csv(path, CSV_HEADER, self.rows())

    def write_metadata(self, path) -> None:
        write_json(path, self.metadata)

    def write_json(self, path) -> None:
        write_json_table(path, CSV_HEADER, list(self.rows()), self.metadata)


def rough_sabr_smile(request: SmileRequest) -> SmileTable:
    """Evaluate the rough SABR smile for a single expiry.

    The ATM row of iv_normalized is exactly 1 and the ATM implied vol equals
    sigma0 (the override if given, else U * beta(S)/S).
    """
    params, curve = request.params, request.curve
    if not -1.0 < params.rho < 1.0:
        raise DomainError(f"smile assembly requires |rho| < 1, got {params.rho}")
    S, tau = request.spot, request.tau
    strikes = np.asarray(request.strikes, dtype=float)
    if np.any(strikes <= 0.0):
        raise DomainError("implied-vol output needs positive strikes; "
                          "use bachelier_smile for arbitrary-strike normal vols")
    U = average_vol_U(curve, 0.0, tau)
    kap = kernel_kappa(params, tau)
    beta_atm_ratio = float(params.beta(S)) / S

    k = np.log(strikes / S)
    k_beta = np.array([strike_transform_kbeta(params.beta, S, float(K)) for K in strikes])
    y_k = kap * k / U
    y_kb = kap * k_beta / U
    ratio = _smile_ratio(params, request.source, request.y_max, k, k_beta, y_k, y_kb,
                         beta_atm_ratio)

    sigma0 = request.atm_vol_override if request.atm_vol_override is not None \
        else U * beta_atm_ratio
    # ratio tends to beta(S)/S at the money (k/k_beta -> beta(S)/S), so it is
    # rescaled before applying the ATM level: iv(ATM) == sigma0 exactly
    iv_normalized = ratio / beta_atm_ratio
    iv = sigma0 * iv_normalized
    iv_atm = sigma0

    eta_tau_h = params.eta * tau ** params.H
    metadata = {
        "params": params.describe(),
        "curve": curve.describe(),
        "spot": S,
        "tau": tau,
        "source": request.source,
        "sigma0": sigma0,
        "atm_vol": iv_atm,
        "atm_vol_overridden": request.atm_vol_override is not None,
        "eta_tau_h": eta_tau_h,
        "eta_tauH_warning": bool(eta_tau_h >= 1.0),
        "U": U,
        "kappa_tau": kap,
    }
    return SmileTable(strike=strikes, k=k, k_beta=k_beta, y_k=y_k, y_kbeta=y_kb,
                      iv=iv, iv_normalized=iv_normalized, metadata=metadata)


def _smile_ratio(params, source, y_max, k, k_beta, y_k, y_kb, beta_atm_ratio):
    """|y(k)| / sqrt(G(y(k_beta))), factored as |k / k_beta| * f(y(k_beta)).

    The factored form stays accurate near the money, where G ~ y^2 is below
    relative double precision; both f implementations carry their own series
    branch there.  |k / k_beta| takes its k -> 0 limit beta(S)/S at the exact
    ATM strike.
    """
    if source == SOURCE_APPROX:
        f = approx_f(params.H, params.rho, y_kb)
    else:
        f = solved(params.H, params.rho, y_max=y_max).f_at(y_kb)
    with np.errstate(invalid="ignore"):
        slope = np.where(k_beta != 0.0,
                         np.abs(k / np.where(k_beta != 0.0, k_beta, 1.0)),
                         beta_atm_ratio)
    return slope * np.asarray(f, dtype=float)


def bachelier_smile(params: ModelParams, curve: ForwardVarianceCurve,
                    spot: float, tau: float, strikes, source: str = SOURCE_APPROX,
                    y_max: float = DEFAULT_Y_MAX):
    """Normal-vol smile Sigma_B = U f(y(K - S)) for the normal backbone.

    Returns (normal_vols, bs_vols); the Black-Scholes conversion entries are
    NaN wherever the strike is nonpositive.  Intended for beta = Normal, where
    strikes may be any real number.
    """
    if params.beta.kind != "normal":
        raise DomainError("bachelier_smile requires the normal backbone")
    if not -1.0 < params.rho < 1.0:
        raise DomainError(f"smile assembly requires |rho| < 1, got {params.rho}")
    if not tau > 0.0:
        raise DomainError(f"tau must be positive, got {tau}")
    strikes = np.asarray(strikes, dtype=float)
    U = average_vol_U(curve, 0.0, tau)
    kap = kernel_kappa(params, tau)
    y = kap * (strikes - spot) / U
    if source == SOURCE_APPROX:
        f = approx_f(params.H, params.rho, y)
    else:
        f = solved(params.H, params.rho, y_max=y_max).f_at(y)
    normal_vols = U * f
    bs_vols = np.array([bachelier_to_bs_vol(spot, float(K), float(v)) if K > 0.0 else math.nan
                        for K, v in zip(strikes, normal_vols)])
    return normal_vols, bs_vols
