"""Monte Carlo engine for the rough SABR model.

The driver is the Volterra Gaussian V_t = int_0^t (t-u)**(H-1/2) dW_u on a
uniform grid of n_steps over [0, horizon], so that the spot volatility is

    alpha_t**2 = xi0(t) * exp( eta sqrt(2H) V_t - eta**2 t**(2H) / 2 ).

Two path-generation schemes are provided:

* "hybrid": the most recent `exact_block_width` kernel intervals of V are
  drawn exactly from their joint Gaussian law together with the Brownian
  increment (covariance blocks integrate the power kernel analytically, the
  off-diagonal entries through the Gauss hypergeometric function), while
  older intervals use a left-rule Riemann sum with the optimal abscissae
  b_k = ((k**(g+1) - (k-1)**(g+1)) / (g+1))**(1/g), g = H - 1/2, whose kernel
  values reduce to interval averages of the kernel.  The Riemann part is a
  causal convolution over the increment history, evaluated as a direct
  triangular matrix product and switched to FFT batches once
  n_steps >= fft_min_steps (a performance knob, not a semantics change).
* "exact_cholesky": the joint law of (increments, V at all grid times) is
  factorized once and sampled exactly; O(n_steps**2) memory, intended as an
  in-repo oracle for the hybrid scheme (n_steps <= 4096).

Randomness is drawn from counter-based Philox streams keyed by (seed, chunk)
over a fixed partition of paths into chunks, so results are bit-identical for
identical (seed, config, params) regardless of worker count.  With antithetic
sampling (default) path 2j+1 flips the joint draw of path 2j in sign, and
standard errors are computed across independent pair averages.

Spot stepping: log-Euler for the lognormal backbone, exact Gaussian
increments for the normal backbone, and full-truncation Euler with absorption
at zero for power/custom backbones.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import hyp2f1

from .curves import ForwardVarianceCurve, ModelParams, average_vol_U, kernel_kappa
from .errors import DecompositionError, DomainError, NoSolutionError
from .pricing import (BACHELIER, BLACK_SCHOLES, OptionQuote, bachelier_greeks,
                      bs_greeks, implied_vol)
from .tableio import write_csv, write_json, write_json_table

SCHEME_HYBRID = "hybrid"
SCHEME_EXACT = "exact_cholesky"


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo run configuration.

    n_paths must be even when antithetic; horizon is the simulation end time
    in years.  chunk_paths fixes the path partition (and thus the random
    stream layout); it is part of the reproducibility contract, not a tuning
    knob to vary per worker.  refined_tail reserves an extension point for a
    higher-order tail treatment and is not implemented.
    """

    n_paths: int
    n_steps: int
    horizon: float
    seed: int = 0
    exact_block_width: int = 2
    antithetic: bool = True
    scheme: str = SCHEME_HYBRID
    fft_min_steps: int = 1024
    chunk_paths: int = 8192
    refined_tail: bool = False

    def __post_init__(self):
        if self.scheme not in (SCHEME_HYBRID, SCHEME_EXACT):
            raise DomainError(f"unknown scheme {self.scheme!r}")
        if self.n_paths < 2:
            raise DomainError(f"n_paths must be >= 2, got {self.n_paths}")
        if self.antithetic and self.n_paths % 2:
            raise DomainError("n_paths must be even with antithetic sampling")
        if self.exact_block_width < 1:
            raise DomainError("exact_block_width must be >= 1")
        if self.n_steps < self.exact_block_width + 1:
            raise DomainError(
                f"n_steps must exceed exact_block_width, got {self.n_steps}")
        if not self.horizon > 0.0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.scheme == SCHEME_EXACT and self.n_steps > 4096:
            raise DomainError("exact_cholesky is limited to n_steps <= 4096")
        if self.chunk_paths < 2 or self.chunk_paths % 2:
            raise DomainError("chunk_paths must be even and >= 2")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps


# ---------------------------------------------------------------------------
# power-kernel covariance pieces (alpha = H - 1/2 in (-1/2, 0))

def _kernel_cross_moment(alpha: float, k: int, l: int) -> float:
    """int_0^1 (k-u)**alpha (l-u)**alpha du for integers 1 <= k < l."""
    d = float(l - k)
    f_hi = hyp2f1(-alpha, alpha + 1.0, alpha + 2.0, -k / d)
    lo = 0.0
    if k > 1:
        lo = (k - 1.0) ** (alpha + 1.0) * hyp2f1(-alpha, alpha + 1.0, alpha + 2.0,
                                                 -(k - 1.0) / d)
    return d ** alpha * (k ** (alpha + 1.0) * f_hi - lo) / (alpha + 1.0)


def _block_covariance(alpha: float, dt: float, width: int) -> np.ndarray:
    """Joint covariance of (dW_j, I_{j,1}, ..., I_{j,width}) for one interval,
    I_{j,m} = int_{t_j}^{t_{j+1}} (t_{j+m} - s)**alpha dW_s."""
    a1 = alpha + 1.0
    a2 = 2.0 * alpha + 1.0
    cov = np.empty((width + 1, width + 1))
    cov[0, 0] = dt
    for m in range(1, width + 1):
        cov[0, m] = cov[m, 0] = dt ** a1 * (m ** a1 - (m - 1) ** a1) / a1
        cov[m, m] = dt ** a2 * (m ** a2 - (m - 1) ** a2) / a2
        for j in range(1, m):
            val = dt ** a2 * _kernel_cross_moment(alpha, j, m)
            cov[j, m] = cov[m, j] = val
    return cov


@lru_cache(maxsize=32)
def _block_cholesky(alpha: float, dt: float, width: int) -> np.ndarray:
    L = np.linalg.cholesky(_block_covariance(alpha, dt, width))
    L.flags.writeable = False
    return L


def _tail_weights(alpha: float, dt: float, width: int, n_steps: int) -> np.ndarray:
    """Riemann kernel weights c_k = (b_k dt)**alpha = dt**alpha *
    (k**(alpha+1) - (k-1)**(alpha+1)) / (alpha+1) for k > width, else 0."""
    k = np.arange(n_steps + 1, dtype=float)
    a1 = alpha + 1.0
    c = np.zeros(n_steps + 1)
    tail = k[width + 1:]
    c[width + 1:] = dt ** alpha * (tail ** a1 - (tail - 1.0) ** a1) / a1
    return c


def _volterra_cross(alpha: float, i: int, d: int) -> float:
    """int_0^i w**alpha (w + d)**alpha dw (grid units); Cov(V_i, V_{i+d})/dt**(2a+1)."""
    if d == 0:
        return i ** (2.0 * alpha + 1.0) / (2.0 * alpha + 1.0)
    return (d ** alpha * i ** (alpha + 1.0)
            * hyp2f1(-alpha, alpha + 1.0, alpha + 2.0, -i / d) / (alpha + 1.0))


def _joint_covariance(alpha: float, dt: float, n: int) -> np.ndarray:
    """Covariance of (dW_0..dW_{n-1}, V_1..V_n) under the exact law."""
    a1 = alpha + 1.0
    cov = np.zeros((2 * n, 2 * n))
    cov[:n, :n] = dt * np.eye(n)
    i_idx = np.arange(1, n + 1, dtype=float)[:, None]
    j_idx = np.arange(n, dtype=float)[None, :]
    lag = i_idx - j_idx  # V_i vs dW_j needs j <= i-1, i.e. lag >= 1
    with np.errstate(invalid="ignore"):
        bw = dt ** a1 * (lag ** a1 - (lag - 1.0) ** a1) / a1
    bw = np.where(lag >= 1.0, bw, 0.0)
    cov[n:, :n] = bw
    cov[:n, n:] = bw.T
    scale = dt ** (2.0 * alpha + 1.0)
    vv = np.empty((n, n))
    for i in range(1, n + 1):
        for j in range(i, n + 1):
            vv[i - 1, j - 1] = vv[j - 1, i - 1] = scale * _volterra_cross(alpha, i, j - i)
    cov[n:, n:] = vv
    return cov


@lru_cache(maxsize=8)
def _joint_cholesky(alpha: float, dt: float, n: int):
    """Cholesky of the joint law with diagonal-jitter retries; returns (L, jitter)."""
    cov = _joint_covariance(alpha, dt, n)
    base = float(np.mean(np.diag(cov)))
    tried = []
    jitter = 0.0
    for _ in range(8):
        try:
            L = np.linalg.cholesky(cov + jitter * np.eye(2 * n))
            L.flags.writeable = False
            return L, jitter
        except np.linalg.LinAlgError:
            tried.append(jitter)
            jitter = base * 1e-14 if jitter == 0.0 else jitter * 100.0
    raise DecompositionError(
        f"joint covariance not factorizable at n_steps={n}", jitter_tried=tried)


# ---------------------------------------------------------------------------
# chunked, counter-based path generation

def _chunk_layout(cfg: McConfig):
    units_total = cfg.n_paths // 2 if cfg.antithetic else cfg.n_paths
    per_chunk = cfg.chunk_paths // 2 if cfg.antithetic else cfg.chunk_paths
    return [(idx, lo, min(lo + per_chunk, units_total))
            for idx, lo in enumerate(range(0, units_total, per_chunk))]


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chunk_index),))
    return np.random.Generator(np.random.Philox(seed=ss))


def _chunk_base(params: ModelParams, cfg: McConfig, chunk_index: int, units: int):
    """Base (un-flipped) draws for one chunk: dW, dWp, V, jitter used."""
    if cfg.refined_tail:
        raise NotImplementedError(
            "refined_tail reserves a higher-order tail scheme that is not implemented")
    n = cfg.n_steps
    dt = cfg.dt
    alpha = params.H - 0.5
    rng = _chunk_rng(cfg.seed, chunk_index)
    sqrt_dt = math.sqrt(dt)
    jitter = 0.0
    if cfg.scheme == SCHEME_HYBRID:
        w = cfg.exact_block_width
        z = rng.standard_normal((units, n, w + 2))
        if alpha == 0.0:
            dw = z[:, :, 0] * sqrt_dt
            v = np.zeros((units, n + 1))
            np.cumsum(dw, axis=1, out=v[:, 1:])
        else:
            block = np.matmul(z[:, :, :w + 1], _block_cholesky(alpha, dt, w).T)
            dw = block[:, :, 0]
            v = np.zeros((units, n + 1))
            for m in range(1, w + 1):
                v[:, m:] += block[:, :n + 1 - m, m]
            c = _tail_weights(alpha, dt, w, n)
            if n >= cfg.fft_min_steps:
                v += fftconvolve(dw, c[None, :], mode="full", axes=1)[:, :n + 1]
            else:
                lag = np.arange(n + 1)[:, None] - np.arange(n)[None, :]
                tri = np.where((lag >= 0) & (lag <= n), c[np.clip(lag, 0, n)], 0.0)
                v += dw @ tri.T
        dwp = z[:, :, w + 1] * sqrt_dt
    else:
        z = rng.standard_normal((units, 3 * n))
        if alpha == 0.0:
            dw = z[:, :n] * sqrt_dt
            v = np.zeros((units, n + 1))
            np.cumsum(dw, axis=1, out=v[:, 1:])
        else:
            L, jitter = _joint_cholesky(alpha, dt, n)
            joint = z[:, :2 * n] @ L.T
            dw = joint[:, :n]
            v = np.zeros((units, n + 1))
            v[:, 1:] = joint[:, n:]
        dwp = z[:, 2 * n:] * sqrt_dt
    return dw, dwp, v, jitter


def _map_chunks(fn, layout, workers: int):
    """Run fn over chunk specs, reducing in fixed chunk order."""
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, layout))
    return [fn(spec) for spec in layout]


def simulate_volterra(params: ModelParams, cfg: McConfig, workers: int = 1):
    """Correlated increments and Volterra values: arrays (dW, dZ, V).

    dW, dZ have shape (n_paths, n_steps); V has shape (n_paths, n_steps + 1)
    with V[:, 0] = 0.  dZ = rho dW + sqrt(1 - rho^2) dWperp.
    """
    rho = params.rho
    rho_c = math.sqrt(1.0 - rho * rho)
    layout = _chunk_layout(cfg)

    def job(spec):
        idx, lo, hi = spec
        dw, dwp, v, _ = _chunk_base(params, cfg, idx, hi - lo)
        dz = rho * dw + rho_c * dwp
        if cfg.antithetic:
            return (_interleave(dw, -dw), _interleave(dz, -dz), _interleave(v, -v))
        return dw, dz, v

    parts = _map_chunks(job, layout, workers)
    dw = np.concatenate([p[0] for p in parts], axis=0)
    dz = np.concatenate([p[1] for p in parts], axis=0)
    v = np.concatenate([p[2] for p in parts], axis=0)
    return dw, dz, v


def _interleave(plus: np.ndarray, minus: np.ndarray) -> np.ndarray:
    out = np.empty((plus.shape[0] * 2,) + plus.shape[1:])
    out[0::2] = plus
    out[1::2] = minus
    return out


def _alpha_from_v(params: ModelParams, xi_left: np.ndarray, drift: np.ndarray,
                  v_left: np.ndarray) -> np.ndarray:
    """Spot vol on the left grid points given Volterra values there."""
    eta_s = params.eta * math.sqrt(2.0 * params.H)
    return np.sqrt(xi_left * np.exp(eta_s * v_left - drift))


def _grid_quantities(params: ModelParams, curve: ForwardVarianceCurve, cfg: McConfig):
    t = np.arange(cfg.n_steps + 1) * cfg.dt
    xi = curve.values_at(t)
    drift = 0.5 * params.eta ** 2 * t ** (2.0 * params.H)
    return t, xi, drift


def _leg_spot_increments(params, S0, alpha_leg, dz_leg, dt):
    """Per-step spot state for one antithetic leg; returns cumulative arrays."""
    if params.beta.kind == "lognormal":
        inc = alpha_leg * dz_leg - 0.5 * alpha_leg * alpha_leg * dt
        logs = np.cumsum(inc, axis=1)
        return S0 * np.exp(logs), None
    if params.beta.kind == "normal":
        return S0 + np.cumsum(alpha_leg * dz_leg, axis=1), None
    # full-truncation Euler with absorption at zero
    units, n = dz_leg.shape
    spots = np.empty((units, n))
    s = np.full(units, float(S0))
    absorbed = np.zeros(units, dtype=bool)
    for i in range(n):
        bval = params.beta(np.maximum(s, 0.0))
        s = s + bval * alpha_leg[:, i] * dz_leg[:, i]
        hit = s <= 0.0
        s = np.where(hit, 0.0, s)
        absorbed |= hit
        spots[:, i] = s
    return spots, absorbed


@dataclass(frozen=True)
class PathBatch:
    """Fully materialized paths (diagnostic use; memory scales as paths x steps)."""

    time_grid: np.ndarray
    volterra: np.ndarray
    alpha: np.ndarray
    spot: np.ndarray
    absorbed: np.ndarray
    metadata: dict = field(repr=False)


def simulate_paths(params: ModelParams, curve: ForwardVarianceCurve, S0: float,
                   cfg: McConfig, workers: int = 1) -> PathBatch:
    """Simulate full paths of (V, alpha, S) on the grid."""
    if not S0 > 0.0:
        raise DomainError(f"S0 must be positive, got {S0}")
    t, xi, drift = _grid_quantities(params, curve, cfg)
    layout = _chunk_layout(cfg)
    jitters = []

    def job(spec):
        idx, lo, hi = spec
        dw, dwp, v, jitter = _chunk_base(params, cfg, idx, hi - lo)
        rho, rho_c = params.rho, math.sqrt(1.0 - params.rho ** 2)
        dz = rho * dw + rho_c * dwp
        legs = [(v, dz), (-v, -dz)] if cfg.antithetic else [(v, dz)]
        out = []
        for v_leg, dz_leg in legs:
            alpha_leg = _alpha_from_v(params, xi, drift, v_leg)
            spots, absorbed = _leg_spot_increments(params, S0, alpha_leg[:, :-1],
                                                   dz_leg, cfg.dt)
            if absorbed is None:
                absorbed = np.zeros(v_leg.shape[0], dtype=bool)
            full = np.empty((v_leg.shape[0], cfg.n_steps + 1))
            full[:, 0] = S0
            full[:, 1:] = spots
            out.append((v_leg, alpha_leg, full, absorbed))
        if cfg.antithetic:
            return tuple(_interleave(a, b) for a, b in zip(out[0], out[1])), jitter
        return out[0], jitter

    parts = _map_chunks(job, layout, workers)
    jitters = [p[1] for p in parts]
    v = np.concatenate([p[0][0] for p in parts], axis=0)
    alpha = np.concatenate([p[0][1] for p in parts], axis=0)
    spot = np.concatenate([p[0][2] for p in parts], axis=0)
    absorbed = np.concatenate([p[0][3] for p in parts], axis=0)
    metadata = _run_metadata(params, cfg, float(np.mean(absorbed)), max(jitters))
    return PathBatch(time_grid=t, volterra=v, alpha=alpha, spot=spot,
                     absorbed=absorbed, metadata=metadata)


def _run_metadata(params: ModelParams, cfg: McConfig, absorbed_fraction: float,
                  jitter: float) -> dict:
    return {
        "params": params.describe(),
        "scheme": cfg.scheme,
        "seed": cfg.seed,
        "n_paths": cfg.n_paths,
        "n_steps": cfg.n_steps,
        "horizon": cfg.horizon,
        "exact_block_width": cfg.exact_block_width,
        "antithetic": cfg.antithetic,
        "chunk_paths": cfg.chunk_paths,
        "absorbed_fraction": absorbed_fraction,
        "cholesky_jitter": jitter,
    }


MC_CSV_HEADER = ["strike", "k", "y", "iv", "iv_se", "iv_normalized",
                 "price", "price_se", "flag"]


@dataclass(frozen=True)
class McSmileEstimate:
    """Monte Carlo smile with per-strike standard errors and exclusion flags."""

    strike: np.ndarray
    k: np.ndarray
    y: np.ndarray
    iv: np.ndarray
    iv_se: np.ndarray
    iv_normalized: np.ndarray
    price: np.ndarray
    price_se: np.ndarray
    flag: tuple
    atm_vol: float
    atm_vol_se: float
    metadata: dict = field(repr=False)

    def rows(self):
        for i in range(self.strike.size):
            yield (float(self.strike[i]), float(self.k[i]), float(self.y[i]),
                   float(self.iv[i]), float(self.iv_se[i]),
                   float(self.iv_normalized[i]), float(self.price[i]),
                   float(self.price_se[i]), self.flag[i])

    def write_csv(self, path) -> None:
        write_csv(path, MC_CSV_HEADER, self.rows())

    def write_metadata(self, path) -> None:
        write_json(path, self.metadata)

    def write_json(self, path) -> None:
        write_json_table(path, MC_CSV_HEADER, list(self.rows()), self.metadata)


def mc_smile(params: ModelParams, curve: ForwardVarianceCurve, S0: float,
             tau: float, strikes, cfg: McConfig, workers: int = 1,
             quote_convention: str = BLACK_SCHOLES) -> McSmileEstimate:
    """Estimate the implied-vol smile at expiry tau from simulated paths.

    tau must land on the simulation grid (tau <= horizon).  Strikes whose
    Monte Carlo price is outside the arbitrage bounds of the quoting
    convention are flagged and excluded from the vol columns instead of
    failing the whole table.  The normalized column divides by the Monte
    Carlo ATM vol (an internal ATM strike is always estimated).
    """
    if not S0 > 0.0:
        raise DomainError(f"S0 must be positive, got {S0}")
    if not 0.0 < tau <= cfg.horizon * (1.0 + 1e-12):
        raise DomainError(f"tau={tau} outside the simulated horizon {cfg.horizon}")
    idx = int(round(tau / cfg.dt))
    if idx < 1 or abs(idx * cfg.dt - tau) > 1e-9 * max(1.0, tau):
        raise DomainError(f"tau={tau} does not lie on the simulation grid "
                          f"(dt={cfg.dt})")
    strikes = np.asarray(strikes, dtype=float)
    if strikes.size == 0:
        raise DomainError("at least one strike is required")
    all_strikes = np.append(strikes, S0)  # trailing internal ATM anchor
    t, xi, drift = _grid_quantities(params, curve, cfg)
    layout = _chunk_layout(cfg)

    def job(spec):
        chunk_index, lo, hi = spec
        dw, dwp, v, jitter = _chunk_base(params, cfg, chunk_index, hi - lo)
        rho, rho_c = params.rho, math.sqrt(1.0 - params.rho ** 2)
        dz = rho * dw + rho_c * dwp
        legs = [(v, dz), (-v, -dz)] if cfg.antithetic else [(v, dz)]
        payoff = None
        absorbed_paths = 0
        for v_leg, dz_leg in legs:
            alpha_leg = _alpha_from_v(params, xi[:-1], drift[:-1], v_leg[:, :-1])
            st, absorbed = _terminal_spot(params, S0, alpha_leg, dz_leg, cfg.dt, idx)
            if absorbed is not None:
                absorbed_paths += int(absorbed.sum())
            leg_payoff = np.maximum(st[:, None] - all_strikes[None, :], 0.0)
            payoff = leg_payoff if payoff is None else payoff + leg_payoff
        if cfg.antithetic:
            payoff *= 0.5
        return (payoff.shape[0], payoff.sum(axis=0), (payoff * payoff).sum(axis=0),
                absorbed_paths, jitter)

    parts = _map_chunks(job, layout, workers)
    m = sum(p[0] for p in parts)
    total = np.sum([p[1] for p in parts], axis=0)
    total_sq = np.sum([p[2] for p in parts], axis=0)
    absorbed_paths = sum(p[3] for p in parts)
    jitter = max(p[4] for p in parts)

    price = total / m
    var = np.maximum(total_sq / m - price * price, 0.0) * (m / max(m - 1, 1))
    price_se = np.sqrt(var / m)

    atm_price, atm_price_se = float(price[-1]), float(price_se[-1])
    atm_quote = OptionQuote(S=S0, K=S0, tau=tau, price=atm_price,
                            convention=quote_convention)
    atm_vol = implied_vol(atm_quote)
    atm_vega = _vega(quote_convention, S0, S0, tau, atm_vol)
    atm_vol_se = atm_price_se / atm_vega

    n_out = strikes.size
    iv = np.full(n_out, math.nan)
    iv_se = np.full(n_out, math.nan)
    flags = []
    for i in range(n_out):
        try:
            quote = OptionQuote(S=S0, K=float(strikes[i]), tau=tau,
                                price=float(price[i]), convention=quote_convention)
            vol = implied_vol(quote)
        except NoSolutionError as exc:
            flags.append(exc.reason)
            continue
        iv[i] = vol
        iv_se[i] = price_se[i] / _vega(quote_convention, S0, float(strikes[i]), tau, vol)
        flags.append("ok")

    with np.errstate(invalid="ignore"):
        k = np.where(strikes > 0.0, np.log(strikes / S0), math.nan)
    y = kernel_kappa(params, tau) * k / average_vol_U(curve, 0.0, tau)
    metadata = _run_metadata(params, cfg, absorbed_paths / cfg.n_paths, jitter)
    metadata.update({
        "tau": tau,
        "spot": S0,
        "quote_convention": quote_convention,
        "atm_vol": atm_vol,
        "atm_vol_se": atm_vol_se,
        "n_excluded": sum(1 for f in flags if f != "ok"),
    })
    return McSmileEstimate(strike=strikes, k=k, y=y, iv=iv, iv_se=iv_se,
                           iv_normalized=iv / atm_vol, price=price[:n_out],
                           price_se=price_se[:n_out], flag=tuple(flags),
                           atm_vol=atm_vol, atm_vol_se=atm_vol_se, metadata=metadata)


def _terminal_spot(params, S0, alpha_leg, dz_leg, dt, idx):
    """Spot at grid index idx for one leg; avoids materializing full paths."""
    if params.beta.kind == "lognormal":
        a = alpha_leg[:, :idx]
        logs = np.sum(a * dz_leg[:, :idx] - 0.5 * a * a * dt, axis=1)
        return S0 * np.exp(logs), None
    if params.beta.kind == "normal":
        return S0 + np.sum(alpha_leg[:, :idx] * dz_leg[:, :idx], axis=1), None
    units = dz_leg.shape[0]
    s = np.full(units, float(S0))
    absorbed = np.zeros(units, dtype=bool)
    for i in range(idx):
        bval = params.beta(np.maximum(s, 0.0))
        s = s + bval * alpha_leg[:, i] * dz_leg[:, i]
        hit = s <= 0.0
        s = np.where(hit, 0.0, s)
        absorbed |= hit
    return s, absorbed


def _vega(convention: str, S: float, K: float, tau: float, sigma: float) -> float:
    if convention == BLACK_SCHOLES:
        return bs_greeks(S, K, tau, sigma).p_sigma
    return bachelier_greeks(S, K, tau, sigma).p_sigma
