"""The normalized-smile ODE, its closed-form endpoints, and the H-interpolation.

In scaled moneyness y the normalized smile f(y) solves a first-order ODE.
Substituting g = y / f the ODE becomes explicit,

    g'(y) = [ (1-2H) f + sqrt( (1-2H)^2 f^2 + 8 H q(y) ) ] / (2 q(y)),
    q(y)  = 1 + 2 rho y / (2H+1) + (y / (2H+1))^2,     g(0) = 0,

where f = y/g and the "+" branch is fixed by g'(0) = 1.  The endpoints have
closed forms:

    H = 1/2:  g(y) = -2 log[ (sqrt(1 + rho y + y^2/4) - rho - y/2) / (1 - rho) ]
    H = 0:    g(y)^2 = log(1 + 2 rho y + y^2)
                       + (2 rho / sqrt(1-rho^2)) * ( atan(rho / sqrt(1-rho^2))
                       - atan((y + rho) / sqrt(1-rho^2)) ),  sign(g) = sign(y)

G := g^2 satisfies G = y^2 + a y^3 + b y^4 + O(y^5) with, for gamma = H + 1/2,

    a = -rho / (gamma (gamma+1))
    b = (1 / (4 gamma^2 (2 gamma + 1))) * ( 3 rho^2 (4 gamma + 1) / (gamma+1)^2 - 1 )

and the closed-form approximation interpolating the endpoints in H is

    G_A(y) = (2H+1)^2 [ 3(1-2H)/(2H+3) * G_0( y/(2H+1) )
                        + 2H/(2H+3)    * G_{1/2}( 2y/(2H+1) ) ],

which reproduces the endpoints identically and matches the y^2 and y^3
series coefficients for every H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, InvalidSolutionError, SingularityError

GRID_SPACING = 1e-3     # uniform output grid and series handoff point
DEFAULT_Y_MAX = 10.0
DEFAULT_TOLERANCE = 1e-10


def _check_rho_open(rho: float):
    if not -1.0 < rho < 1.0:
        raise DomainError(f"smile ODE requires |rho| < 1, got {rho}")


def _check_h_closed(H: float):
    # H = 0 is outside the model but kept here because G_A needs the endpoint.
    if not 0.0 <= H <= 0.5:
        raise DomainError(f"smile ODE requires 0 <= H <= 1/2, got {H}")


def _g_half_pos(rho: float, y):
    # Stable for y >= 0: rationalized so no cancellation as y grows.
    q = 1.0 + rho * y + 0.25 * y * y
    return 2.0 * np.log((np.sqrt(q) + rho + 0.5 * y) / (1.0 + rho))


def g_closed_form_half(rho: float, y):
    """Closed-form g at H = 1/2 (classical SABR endpoint)."""
    _check_rho_open(rho)
    y = np.asarray(y, dtype=float)
    out = np.where(y >= 0.0, _g_half_pos(rho, np.maximum(y, 0.0)),
                   -_g_half_pos(-rho, np.maximum(-y, 0.0)))
    return float(out) if out.ndim == 0 else out


def G_half(rho: float, y):
    """G = g^2 at H = 1/2."""
    g = g_closed_form_half(rho, y)
    return g * g


def G_zero(rho: float, y):
    """G = g^2 at H = 0."""
    _check_rho_open(rho)
    y = np.asarray(y, dtype=float)
    root = math.sqrt(1.0 - rho * rho)
    val = np.log1p(y * (2.0 * rho + y)) + (2.0 * rho / root) * (
        math.atan(rho / root) - np.arctan((y + rho) / root))
    # val >= 0 in exact arithmetic; clip rounding noise near the origin
    out = np.maximum(val, 0.0)
    return float(out) if out.ndim == 0 else out


def g_closed_form_zero(rho: float, y):
    """Closed-form g at H = 0 (maximally rough endpoint); sign(g) = sign(y)."""
    y = np.asarray(y, dtype=float)
    out = np.sign(y) * np.sqrt(G_zero(rho, y))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SeriesCoefficients:
    """Small-y expansion data: G = y^2 + a y^3 + b y^4, f = 1 + f_skew y + f_curv y^2/2."""

    gamma: float
    a: float
    b: float
    f_skew: float
    f_curv: float


def series_coefficients(H: float, rho: float) -> SeriesCoefficients:
    """Series coefficients of G and f around y = 0."""
    _check_h_closed(H)
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"rho must lie in [-1, 1], got {rho}")
    gamma = H + 0.5
    a = -rho / (gamma * (gamma + 1.0))
    b = (3.0 * rho * rho * (4.0 * gamma + 1.0) / (gamma + 1.0) ** 2 - 1.0) / (
        4.0 * gamma * gamma * (2.0 * gamma + 1.0))
    f_skew = rho / (2.0 * gamma * (gamma + 1.0))
    # equals 3 a^2 / 4 - b; kept in the (2H+...) form it is usually quoted in
    f_curv = ((2.0 * H + 3.0) ** 2 - 12.0 * (2.0 * H + 1.0) * rho * rho) / (
        2.0 * (H + 1.0) * (2.0 * H + 1.0) ** 2 * (2.0 * H + 3.0) ** 2)
    return SeriesCoefficients(gamma=gamma, a=a, b=b, f_skew=f_skew, f_curv=f_curv)


def ode_rhs(H: float, rho: float, y: float, g: float) -> float:
    """Right-hand side g'(y); the "+" branch, valid for both signs of y.

    At H = 1/2 this reduces to 1/sqrt(q); at H = 0 to f/q.
    """
    _check_h_closed(H)
    _check_rho_open(rho)
    s = 2.0 * H + 1.0
    q = 1.0 + 2.0 * rho * y / s + (y / s) ** 2
    if q <= 0.0:
        raise SingularityError(f"q(y) vanished at y={y}")
    f = y / g if y != 0.0 else 1.0
    c = 1.0 - 2.0 * H
    return (c * f + math.sqrt(c * c * f * f + 8.0 * H * q)) / (2.0 * q)


def _series_g(H: float, rho: float, y):
    """Quartic-series g used to step off the origin; g = y sqrt(1 + a y + b y^2)."""
    coeff = series_coefficients(H, rho)
    y = np.asarray(y, dtype=float)
    out = y * np.sqrt(1.0 + coeff.a * y + coeff.b * y * y)
    return float(out) if out.ndim == 0 else out


def integrate_g(H: float, rho: float, y_points, tolerance: float = DEFAULT_TOLERANCE):
    """Integrate the ODE from the series seed at |y| = GRID_SPACING to y_points.

    y_points must be sorted ascending within each sign and satisfy
    |y| >= GRID_SPACING.  Used by solve_ode and by diagnostics that need g at
    off-grid locations without interpolation error.
    """
    _check_h_closed(H)
    _check_rho_open(rho)
    y0 = GRID_SPACING
    pts = np.asarray(y_points, dtype=float)
    if np.any(np.abs(pts) < y0):
        raise DomainError(f"integrate_g needs |y| >= {y0}")
    out = np.empty(pts.shape)
    rtol = tolerance
    atol = tolerance * 1e-2

    def rhs(y, g):
        return [ode_rhs(H, rho, y, g[0])]

    for sign in (1.0, -1.0):
        mask = (pts * sign) > 0.0
        if not np.any(mask):
            continue
        targets = np.sort(pts[mask] * sign)
        span_end = targets[-1]
        t_eval = targets
        start = sign * y0
        if span_end * 1.0 == y0:
            # nothing to integrate; the seed itself
            out[mask] = _series_g(H, rho, pts[mask])
            continue
        sol = solve_ivp(rhs, (start, sign * span_end), [_series_g(H, rho, start)],
                        method="RK45", rtol=rtol, atol=atol,
                        t_eval=sign * t_eval, dense_output=False)
        if not sol.success:
            raise SingularityError(f"ODE integration failed: {sol.message}")
        vals = dict(zip(sol.t, sol.y[0]))
        out[mask] = [vals[v] for v in pts[mask]]
    return out


@dataclass(frozen=True)
class OdeSolution:
    """Tabulated ODE solution on a uniform, symmetric y-grid.

    Evaluation outside [-y_max, y_max] is a hard error; interpolation between
    nodes uses a monotone cubic (PCHIP) on g.
    """

    H: float
    rho: float
    y_grid: np.ndarray
    g_values: np.ndarray
    G_values: np.ndarray
    f_values: np.ndarray
    y_max: float

    @cached_property
    def _interp(self) -> PchipInterpolator:
        return PchipInterpolator(self.y_grid, self.g_values, extrapolate=False)

    @cached_property
    def _series(self) -> SeriesCoefficients:
        return series_coefficients(self.H, self.rho)

    def _check_domain(self, y: np.ndarray):
        if np.any(np.abs(y) > self.y_max * (1.0 + 1e-12)):
            bad = float(np.max(np.abs(y)))
            raise DomainError(f"|y| = {bad} outside tabulated domain [-{self.y_max}, {self.y_max}]")

    def g_at(self, y):
        y_arr = np.asarray(y, dtype=float)
        self._check_domain(y_arr)
        out = self._interp(np.clip(y_arr, -self.y_max, self.y_max))
        return float(out) if out.ndim == 0 else out

    def G_at(self, y):
        g = self.g_at(y)
        return g * g

    def f_at(self, y):
        """f = y/g, with the series branch below the grid spacing to avoid 0/0."""
        y_arr = np.asarray(y, dtype=float)
        self._check_domain(y_arr)
        c = self._series
        small = np.abs(y_arr) < GRID_SPACING
        g = self._interp(np.clip(np.where(small, GRID_SPACING, y_arr), -self.y_max, self.y_max))
        with np.errstate(invalid="ignore"):
            out = np.where(small,
                           1.0 / np.sqrt(1.0 + c.a * y_arr + c.b * y_arr * y_arr),
                           y_arr / g)
        return float(out) if out.ndim == 0 else out

    def atm_skew(self) -> float:
        """Central-difference f'(0) on the grid."""
        c = self.y_grid.size // 2
        h = self.y_grid[c + 1] - self.y_grid[c]
        return float((self.f_values[c + 1] - self.f_values[c - 1]) / (2.0 * h))

    def max_closed_form_deviation(self) -> float | None:
        """Max |g - closed form| over the grid when H is an endpoint, else None."""
        if self.H == 0.5:
            ref = g_closed_form_half(self.rho, self.y_grid)
        elif self.H == 0.0:
            ref = g_closed_form_zero(self.rho, self.y_grid)
        else:
            return None
        return float(np.max(np.abs(self.g_values - ref)))

    def rows(self):
        """Iterate (y, g, G, f) table rows."""
        for i in range(self.y_grid.size):
            yield (float(self.y_grid[i]), float(self.g_values[i]),
                   float(self.G_values[i]), float(self.f_values[i]))


def solve_ode(H: float, rho: float, y_max: float = DEFAULT_Y_MAX,
              tolerance: float = DEFAULT_TOLERANCE) -> OdeSolution:
    """Solve the smile ODE and tabulate g, G, f on a uniform symmetric grid.

    Starts from the quartic series at |y| = 1e-3, integrates each branch with
    an adaptive RK45 at relative tolerance `tolerance`, and samples the
    solution on a grid of spacing 1e-3 out to y_max (rounded to the grid).
    H = 0 is accepted and dispatched to the closed form.
    """
    _check_h_closed(H)
    _check_rho_open(rho)
    if not y_max > GRID_SPACING:
        raise DomainError(f"y_max must exceed the grid spacing, got {y_max}")
    n = int(round(y_max / GRID_SPACING))
    grid = np.arange(-n, n + 1, dtype=float) * GRID_SPACING
    if H == 0.0:
        g = g_closed_form_zero(rho, grid)
    else:
        g = np.empty(grid.size)
        g[n] = 0.0
        pos = grid[n + 1:]
        g[n + 1:] = _integrate_branch(H, rho, pos, tolerance)
        g[:n] = -_integrate_branch(H, -rho, pos, tolerance)[::-1]
    G = g * g
    f = np.empty_like(g)
    f[n] = 1.0
    nz = grid != 0.0
    f[nz] = grid[nz] / g[nz]
    return OdeSolution(H=H, rho=rho, y_grid=grid, g_values=g, G_values=G,
                       f_values=f, y_max=float(grid[-1]))


def _integrate_branch(H: float, rho: float, targets: np.ndarray, tolerance: float):
    """g on the positive branch at ascending targets[0] = GRID_SPACING, ..."""
    def rhs(y, g):
        return [ode_rhs(H, rho, y, g[0])]

    seed = _series_g(H, rho, targets[0])
    if targets.size == 1:
        return np.array([seed])
    sol = solve_ivp(rhs, (targets[0], targets[-1]), [seed], method="RK45",
                    rtol=tolerance, atol=tolerance * 1e-2, t_eval=targets)
    if not sol.success:
        raise SingularityError(f"ODE integration failed: {sol.message}")
    return sol.y[0]


@lru_cache(maxsize=64)
def solved(H: float, rho: float, y_max: float = DEFAULT_Y_MAX,
           tolerance: float = DEFAULT_TOLERANCE) -> OdeSolution:
    """Cached solve_ode for repeated smile assembly with identical parameters."""
    return solve_ode(H, rho, y_max=y_max, tolerance=tolerance)


def G_approx(H: float, rho: float, y):
    """Closed-form approximation G_A(y) interpolating the H-endpoints."""
    _check_h_closed(H)
    _check_rho_open(rho)
    y = np.asarray(y, dtype=float)
    s = 2.0 * H + 1.0
    w0 = 3.0 * (1.0 - 2.0 * H) / (2.0 * H + 3.0)
    w1 = 2.0 * H / (2.0 * H + 3.0)
    g0 = np.asarray(G_zero(rho, y / s), dtype=float)
    gh = np.asarray(G_half(rho, 2.0 * y / s), dtype=float)
    out = s * s * (w0 * g0 + w1 * gh)
    return float(out) if out.ndim == 0 else out


def f_from_G(y, G):
    """Normalized smile f = |y| / sqrt(G); f(0) = 1 by the ATM limit."""
    y_arr = np.asarray(y, dtype=float)
    G_arr = np.asarray(G, dtype=float)
    if np.any((G_arr <= 0.0) & (y_arr != 0.0)):
        raise InvalidSolutionError("G must be positive away from the origin")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(y_arr == 0.0, 1.0, np.abs(y_arr) / np.sqrt(np.where(G_arr > 0, G_arr, 1.0)))
    return float(out) if out.ndim == 0 else out


def _approx_quartic_coeff(H: float, rho: float) -> float:
    """y^4 coefficient of G_A, assembled from the endpoint expansions.

    G_A matches the true y^2 and y^3 coefficients but carries its own quartic
    term; the series branch of approx_f must use this one, not the exact b,
    or the handoff would jump by O((b - b_A) y^2).
    """
    s = 2.0 * H + 1.0
    w0 = 3.0 * (1.0 - 2.0 * H) / (2.0 * H + 3.0)
    w1 = 2.0 * H / (2.0 * H + 3.0)
    b0 = series_coefficients(0.0, rho).b
    bh = series_coefficients(0.5, rho).b
    return (w0 * b0 + 16.0 * w1 * bh) / (s * s)


def approx_f(H: float, rho: float, y):
    """f_A = |y|/sqrt(G_A(y)) with a series branch near the origin.

    Below |y| = 1e-3 the direct ratio loses ~6 digits to cancellation inside
    G_A, so f is evaluated from the quartic expansion of G_A itself.
    """
    y_arr = np.asarray(y, dtype=float)
    coeff = series_coefficients(H, rho)
    b4 = _approx_quartic_coeff(H, rho)
    small = np.abs(y_arr) < 1e-3
    G = G_approx(H, rho, np.where(small, 1.0, y_arr))
    with np.errstate(invalid="ignore"):
        out = np.where(small,
                       1.0 / np.sqrt(1.0 + coeff.a * y_arr + b4 * y_arr * y_arr),
                       np.abs(y_arr) / np.sqrt(G))
    return float(out) if out.ndim == 0 else out
