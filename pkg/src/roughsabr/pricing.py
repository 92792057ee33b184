"""Zero-rate call pricing, greeks, and implied-vol inversion.

All prices are undiscounted forward prices of calls:

    Black-Scholes:  P = S Phi(d+) - K Phi(d-),  d+- = log(S/K)/(s rt) +- s rt / 2
    Bachelier:      P = s rt phi(d) - (K - S) Phi(-d),  d = (K - S)/(s rt)

with s rt = sigma sqrt(tau).  The normal CDF goes through scipy's
erfc-based ndtr so the deep tails keep relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtr

from .errors import DomainError, NoSolutionError

_SQRT_2PI = math.sqrt(2.0 * math.pi)

BLACK_SCHOLES = "black_scholes"
BACHELIER = "bachelier"


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT_2PI


def _check_common(tau: float, sigma: float):
    if not tau > 0.0:
        raise DomainError(f"tau must be positive, got {tau}")
    if not sigma > 0.0:
        raise DomainError(f"sigma must be positive, got {sigma}")


def bs_price(S: float, K: float, tau: float, sigma: float) -> float:
    """Black-Scholes call price at zero rates."""
    _check_common(tau, sigma)
    if not (S > 0.0 and K > 0.0):
        raise DomainError(f"Black-Scholes needs S, K > 0, got S={S}, K={K}")
    srt = sigma * math.sqrt(tau)
    d_plus = math.log(S / K) / srt + 0.5 * srt
    d_minus = d_plus - srt
    return S * ndtr(d_plus) - K * ndtr(d_minus)


def bachelier_price(S: float, K: float, tau: float, sigma: float) -> float:
    """Bachelier call price at zero rates; sigma is in price units."""
    _check_common(tau, sigma)
    srt = sigma * math.sqrt(tau)
    d = (K - S) / srt
    return srt * _phi(d) - (K - S) * ndtr(-d)


@dataclass(frozen=True)
class GreekSet:
    """First and second derivatives of the call price.

    p_s, p_tau, p_sigma are dP/dS, dP/dtau, dP/dsigma; p_ss, p_s_sigma,
    p_sigma_sigma the second derivatives in (S, sigma).
    """

    p_s: float
    p_tau: float
    p_sigma: float
    p_ss: float
    p_s_sigma: float
    p_sigma_sigma: float

    def as_dict(self) -> dict:
        return {"P_S": self.p_s, "P_tau": self.p_tau, "P_sigma": self.p_sigma,
                "P_SS": self.p_ss, "P_Ssigma": self.p_s_sigma,
                "P_sigmasigma": self.p_sigma_sigma}


def bs_greeks(S: float, K: float, tau: float, sigma: float) -> GreekSet:
    """Black-Scholes greeks."""
    _check_common(tau, sigma)
    if not (S > 0.0 and K > 0.0):
        raise DomainError(f"Black-Scholes needs S, K > 0, got S={S}, K={K}")
    rt = math.sqrt(tau)
    srt = sigma * rt
    d_plus = math.log(S / K) / srt + 0.5 * srt
    d_minus = d_plus - srt
    pdf = _phi(d_plus)
    return GreekSet(
        p_s=ndtr(d_plus),
        p_tau=S * pdf * sigma / (2.0 * rt),
        p_sigma=S * pdf * rt,
        p_ss=pdf / (S * srt),
        p_s_sigma=-pdf * d_minus / sigma,
        p_sigma_sigma=S * rt * d_plus * d_minus * pdf / sigma,
    )


def bachelier_greeks(S: float, K: float, tau: float, sigma: float) -> GreekSet:
    """Bachelier greeks; k = K - S."""
    _check_common(tau, sigma)
    rt = math.sqrt(tau)
    srt = sigma * rt
    k = K - S
    d = k / srt
    pdf = _phi(d)
    return GreekSet(
        p_s=1.0 - ndtr(d),
        p_tau=sigma * pdf / (2.0 * rt),
        p_sigma=rt * pdf,
        p_ss=pdf / srt,
        p_s_sigma=k * pdf / (sigma * srt),
        p_sigma_sigma=k * k * pdf / (sigma * sigma * srt),
    )


@dataclass(frozen=True)
class OptionQuote:
    """A call quote to invert: spot/forward S, strike K, expiry tau, premium."""

    S: float
    K: float
    tau: float
    price: float
    convention: str = BLACK_SCHOLES

    def __post_init__(self):
        if self.convention not in (BLACK_SCHOLES, BACHELIER):
            raise DomainError(f"unknown convention {self.convention!r}")
        if not self.tau > 0.0:
            raise DomainError(f"tau must be positive, got {self.tau}")
        if self.convention == BLACK_SCHOLES and not (self.S > 0.0 and self.K > 0.0):
            raise DomainError("Black-Scholes quotes need S, K > 0")


def implied_vol(quote: OptionQuote) -> float:
    """Invert a call price to its implied volatility.

    Bracketed bisection down to a 1e-4 bracket, then Newton polished with the
    analytic vega (falling back to bisection whenever the Newton step leaves
    the bracket or vega underflows).  The returned sigma reproduces the quote
    to 1e-12 absolute in price at unit spot scale.
    """
    S, K, tau, target = quote.S, quote.K, quote.tau, quote.price
    intrinsic = max(S - K, 0.0)
    if target <= intrinsic:
        raise NoSolutionError("below_intrinsic",
                              f"price {target} at or below intrinsic {intrinsic}")
    if quote.convention == BLACK_SCHOLES:
        if target >= S:
            raise NoSolutionError("above_upper_bound",
                                  f"price {target} at or above spot {S}")
        price_fn, vega_fn = bs_price, lambda s: bs_greeks(S, K, tau, s).p_sigma
    else:
        price_fn, vega_fn = bachelier_price, lambda s: bachelier_greeks(S, K, tau, s).p_sigma

    lo, hi = 1e-8, 5.0
    while price_fn(S, K, tau, hi) < target:
        hi *= 2.0
        if hi > 1e12:
            raise NoSolutionError("above_upper_bound",
                                  f"price {target} unattainable at sigma {hi}")
    while price_fn(S, K, tau, lo) > target and lo > 1e-300:
        lo *= 0.25

    # bisect the bracket down to 1e-4 before switching to Newton
    while hi - lo > 1e-4 * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if price_fn(S, K, tau, mid) > target:
            hi = mid
        else:
            lo = mid

    sigma = 0.5 * (lo + hi)
    for _ in range(200):
        p = price_fn(S, K, tau, sigma)
        err = p - target
        if err == 0.0:
            return sigma
        if err > 0.0:
            hi = sigma
        else:
            lo = sigma
        vega = vega_fn(sigma)
        if vega > 1e-300 and math.isfinite(vega):
            candidate = sigma - err / vega
        else:
            candidate = 0.5 * (lo + hi)
        if not lo < candidate < hi:
            candidate = 0.5 * (lo + hi)
        # stop on vol-space convergence; price-space tolerances break down
        # when vega underflows (deep OTM short expiry)
        if abs(candidate - sigma) <= 1e-15 * sigma:
            return candidate
        sigma = candidate
    return sigma
