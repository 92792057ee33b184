"""Command-line interface.

Subcommands: ode-solve, smile, mc, validate, greeks.  Outputs are written
into --out DIR under fixed names (ode/smile/mc/validate/greeks); csv format
adds a .meta.json sidecar, json format emits one file with table + metadata.
All parameters can also come from a JSON --config file (keys = flag names
with dashes replaced by underscores); explicit flags take precedence.

Exit codes: 0 success, 2 invalid arguments, 3 numerical failure, 4 I/O
failure.  Every failure prints a single line `error_code: message` to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .curves import (BetaSpec, ForwardVarianceCurve, ModelParams,
                     average_vol_U, kernel_kappa)
from .errors import (DecompositionError, DomainError, InvalidSolutionError,
                     NoSolutionError, SingularityError)
from .formula import (CSV_HEADER, SOURCE_APPROX, SOURCE_ODE, SmileRequest,
                      rough_sabr_smile)
from .mc import MC_CSV_HEADER, McConfig, mc_smile
from .pricing import (BACHELIER, BLACK_SCHOLES, bachelier_greeks,
                      bachelier_price, bs_greeks, bs_price)
from .smile_ode import (DEFAULT_TOLERANCE, DEFAULT_Y_MAX, GRID_SPACING,
                        G_approx, G_half, G_zero, approx_f, solve_ode)
from .tableio import write_csv, write_json, write_json_table

ODE_HEADER = ["y", "g", "G", "f"]
VALIDATE_HEADER = ["tau", "strike", "k", "y", "formula_iv", "mc_iv", "mc_iv_se",
                   "formula_iv_normalized", "mc_iv_normalized", "norm_se", "z",
                   "flag"]


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that fails with the one-line diagnostic contract."""

    def error(self, message):
        print(f"usage_error: {message}", file=sys.stderr)
        raise SystemExit(2)


def _fail(code: str, message: str, status: int) -> int:
    print(f"{code}: {message}", file=sys.stderr)
    return status


# ---------------------------------------------------------------------------
# flag/config plumbing

def _collect(ns: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
    """Merge parsed flags over the optional JSON config (flags win)."""
    config = {}
    if getattr(ns, "config", None):
        with open(ns.config, "r", encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise DomainError("config file must contain a JSON object")
    valid = {a.dest for a in parser._actions if a.dest != "help"}
    for key in config:
        if key not in valid:
            raise DomainError(f"unknown config key {key!r}")
    vals = dict(config)
    for key in valid:
        flag_value = getattr(ns, key, None)
        if flag_value is not None:
            vals[key] = flag_value
    return vals


def _req(vals: dict, key: str, cast):
    if vals.get(key) is None:
        raise DomainError(f"missing required parameter: --{key.replace('_', '-')}")
    return _cast(vals, key, cast)


def _get(vals: dict, key: str, cast, default):
    if vals.get(key) is None:
        return default
    return _cast(vals, key, cast)


def _cast(vals: dict, key: str, cast):
    try:
        return cast(vals[key])
    except (TypeError, ValueError) as exc:
        raise DomainError(f"--{key.replace('_', '-')}: {exc}") from exc


def _parse_beta(text) -> BetaSpec:
    t = str(text).strip()
    if t == "lognormal":
        return BetaSpec.lognormal()
    if t == "normal":
        return BetaSpec.normal()
    if t.startswith("power:"):
        try:
            p = float(t[len("power:"):])
        except ValueError as exc:
            raise DomainError(f"bad power exponent in beta spec {text!r}") from exc
        return BetaSpec.power(p)
    raise DomainError(
        f"unknown beta spec {text!r}; expected lognormal, normal, or power:<p>")


def _build_params(vals: dict) -> ModelParams:
    return ModelParams(H=_req(vals, "H", float), eta=_req(vals, "eta", float),
                       rho=_req(vals, "rho", float),
                       beta=_parse_beta(_get(vals, "beta", str, "lognormal")))


def _build_curve(vals: dict) -> ForwardVarianceCurve:
    curve_file = vals.get("curve")
    xi0 = vals.get("xi0")
    if curve_file is not None and xi0 is not None:
        raise DomainError("--xi0 and --curve are mutually exclusive")
    if curve_file is not None:
        return ForwardVarianceCurve.from_csv(str(curve_file))
    return ForwardVarianceCurve.flat(_get(vals, "xi0", float, 0.04))


def _parse_float_list(text, flag: str) -> list:
    try:
        out = [float(tok) for tok in str(text).split(",") if tok.strip()]
    except ValueError as exc:
        raise DomainError(f"{flag} expects comma-separated numbers, got {text!r}") from exc
    if not out:
        raise DomainError(f"{flag} is empty")
    return out


def _parse_grid(text, flag: str) -> np.ndarray:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise DomainError(f"{flag} expects lo:hi:n, got {text!r}")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise DomainError(f"{flag} expects lo:hi:n numbers, got {text!r}") from exc
    if n < 1 or hi < lo:
        raise DomainError(f"{flag} needs hi >= lo and n >= 1, got {text!r}")
    return np.linspace(lo, hi, n)


def _resolve_strikes(vals: dict, params: ModelParams, curve: ForwardVarianceCurve,
                     spot: float, tau: float) -> np.ndarray:
    given = [key for key in ("strikes", "logstrikes", "yrange")
             if vals.get(key) is not None]
    if len(given) != 1:
        raise DomainError(
            "exactly one of --strikes, --logstrikes, --yrange is required")
    key = given[0]
    if key == "strikes":
        return np.asarray(_parse_float_list(vals[key], "--strikes"))
    if key == "logstrikes":
        k = np.asarray(_parse_float_list(vals[key], "--logstrikes"))
        return spot * np.exp(k)
    y = _parse_grid(vals[key], "--yrange")
    k = y * average_vol_U(curve, 0.0, tau) / kernel_kappa(params, tau)
    return spot * np.exp(k)


def _write_table(out_dir: str, stem: str, fmt: str, header, rows, metadata) -> list:
    if fmt not in ("csv", "json"):
        raise DomainError(f"--format must be csv or json, got {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    rows = list(rows)
    if fmt == "json":
        path = os.path.join(out_dir, stem + ".json")
        write_json_table(path, header, rows, metadata)
        return [path]
    csv_path = os.path.join(out_dir, stem + ".csv")
    meta_path = os.path.join(out_dir, stem + ".meta.json")
    write_csv(csv_path, header, rows)
    write_json(meta_path, metadata)
    return [csv_path, meta_path]


def _warn_expansion(metadata: dict) -> None:
    if metadata.get("eta_tauH_warning"):
        print(f"warning: eta*tau^H = {metadata['eta_tau_h']!r} >= 1; "
              "the short-maturity expansion degrades in this regime",
              file=sys.stderr)


# ---------------------------------------------------------------------------
# subcommands

def cmd_ode_solve(vals: dict) -> int:
    H = _req(vals, "H", float)
    rho = _req(vals, "rho", float)
    y_max = _get(vals, "ymax", float, DEFAULT_Y_MAX)
    tolerance = _get(vals, "tolerance", float, DEFAULT_TOLERANCE)
    use_approx = bool(_get(vals, "approx", bool, False))
    if use_approx:
        n = int(round(y_max / GRID_SPACING))
        y = np.arange(-n, n + 1) * GRID_SPACING
        G = G_approx(H, rho, y)
        g = np.sign(y) * np.sqrt(G)
        f = approx_f(H, rho, y)
        deviation = None
        if H == 0.5:
            deviation = float(np.max(np.abs(G - G_half(rho, y))))
        elif H == 0.0:
            deviation = float(np.max(np.abs(G - G_zero(rho, y))))
        rows = list(zip(y.tolist(), g.tolist(), G.tolist(), f.tolist()))
        source = SOURCE_APPROX
    else:
        sol = solve_ode(H, rho, y_max=y_max, tolerance=tolerance)
        rows = list(sol.rows())
        deviation = sol.max_closed_form_deviation()
        source = SOURCE_ODE
    metadata = {"H": H, "rho": rho, "y_max": y_max, "tolerance": tolerance,
                "source": source, "grid_points": len(rows),
                "max_closed_form_deviation": deviation}
    paths = _write_table(_get(vals, "out", str, "."), "ode", _get(vals, "format", str, "csv"), ODE_HEADER, rows,
                         metadata)
    print(f"grid_points={len(rows)} y_max={y_max!r} source={source}")
    if deviation is not None:
        print(f"max_closed_form_deviation={deviation!r}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_smile(vals: dict) -> int:
    params = _build_params(vals)
    curve = _build_curve(vals)
    spot = _req(vals, "spot", float)
    tau = _req(vals, "tau", float)
    strikes = _resolve_strikes(vals, params, curve, spot, tau)
    request = SmileRequest(
        params=params, curve=curve, spot=spot, tau=tau,
        strikes=tuple(float(s) for s in strikes),
        source=_get(vals, "source", str, SOURCE_APPROX),
        atm_vol_override=_get(vals, "atm_vol", float, None),
        y_max=_get(vals, "ymax", float, DEFAULT_Y_MAX))
    table = rough_sabr_smile(request)
    paths = _write_table(_get(vals, "out", str, "."), "smile", _get(vals, "format", str, "csv"), CSV_HEADER,
                         table.rows(), table.metadata)
    _warn_expansion(table.metadata)
    print(f"strikes={strikes.size} atm_vol={table.metadata['atm_vol']!r} "
          f"source={request.source}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _mc_config(vals: dict, horizon: float) -> McConfig:
    return McConfig(
        n_paths=_req(vals, "paths", int),
        n_steps=_req(vals, "steps", int),
        horizon=horizon,
        seed=_get(vals, "seed", int, 0),
        exact_block_width=_get(vals, "block_width", int, 2),
        antithetic=bool(_get(vals, "antithetic", bool, True)),
        scheme=_get(vals, "scheme", str, "hybrid"))


def cmd_mc(vals: dict) -> int:
    params = _build_params(vals)
    curve = _build_curve(vals)
    spot = _req(vals, "spot", float)
    tau = _req(vals, "tau", float)
    strikes = _resolve_strikes(vals, params, curve, spot, tau)
    horizon = _get(vals, "horizon", float, tau)
    cfg = _mc_config(vals, horizon)
    workers = _get(vals, "threads", int, 1)
    convention = _get(vals, "convention", str, BLACK_SCHOLES)
    if convention not in (BLACK_SCHOLES, BACHELIER):
        raise DomainError(f"--convention must be {BLACK_SCHOLES} or {BACHELIER}")
    est = mc_smile(params, curve, spot, tau, strikes, cfg, workers=workers,
                   quote_convention=convention)
    paths = _write_table(_get(vals, "out", str, "."), "mc", _get(vals, "format", str, "csv"), MC_CSV_HEADER,
                         est.rows(), est.metadata)
    print(f"paths={cfg.n_paths} steps={cfg.n_steps} scheme={cfg.scheme} "
          f"atm_vol={est.atm_vol!r} atm_vol_se={est.atm_vol_se!r} "
          f"excluded={est.metadata['n_excluded']} "
          f"absorbed_fraction={est.metadata['absorbed_fraction']!r}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_validate(vals: dict) -> int:
    params = _build_params(vals)
    curve = _build_curve(vals)
    spot = _req(vals, "spot", float)
    taus = _parse_float_list(_req(vals, "taus", str), "--taus")
    if any(t <= 0 for t in taus):
        raise DomainError("--taus must be positive")
    horizon = _get(vals, "horizon", float, max(taus))
    cfg = _mc_config(vals, horizon)
    workers = _get(vals, "threads", int, 1)
    source = _get(vals, "source", str, SOURCE_ODE)
    rows = []
    per_tau = []
    warned = False
    for tau in taus:
        strikes = _resolve_strikes(vals, params, curve, spot, tau)
        request = SmileRequest(params=params, curve=curve, spot=spot, tau=tau,
                               strikes=tuple(float(s) for s in strikes),
                               source=source,
                               y_max=_get(vals, "ymax", float, DEFAULT_Y_MAX))
        formula = rough_sabr_smile(request)
        est = mc_smile(params, curve, spot, tau, strikes, cfg, workers=workers)
        n_pass = 0
        n_ok = 0
        max_norm_diff = 0.0
        for i in range(strikes.size):
            flag = est.flag[i]
            if flag == "ok":
                norm_se = est.iv_se[i] / est.atm_vol
                z = (formula.iv_normalized[i] - est.iv_normalized[i]) / norm_se
                n_ok += 1
                n_pass += bool(abs(z) <= 2.0)
                max_norm_diff = max(
                    max_norm_diff,
                    float(abs(formula.iv_normalized[i] - est.iv_normalized[i])))
            else:
                norm_se = math.nan
                z = math.nan
            rows.append((tau, float(strikes[i]), float(formula.k[i]),
                         float(formula.y_k[i]), float(formula.iv[i]),
                         float(est.iv[i]), float(est.iv_se[i]),
                         float(formula.iv_normalized[i]),
                         float(est.iv_normalized[i]), float(norm_se), float(z),
                         flag))
        pass_fraction = n_pass / n_ok if n_ok else math.nan
        summary = {"tau": tau, "n_strikes": int(strikes.size),
                   "n_excluded": int(strikes.size - n_ok),
                   "pass_fraction": pass_fraction,
                   "max_norm_diff": max_norm_diff,
                   "formula_atm_vol": formula.metadata["atm_vol"],
                   "mc_atm_vol": est.atm_vol, "mc_atm_vol_se": est.atm_vol_se,
                   "eta_tau_h": formula.metadata["eta_tau_h"],
                   "eta_tauH_warning": formula.metadata["eta_tauH_warning"]}
        per_tau.append(summary)
        if formula.metadata["eta_tauH_warning"] and not warned:
            _warn_expansion(formula.metadata)
            warned = True
        print(f"tau={tau!r}: pass_fraction={pass_fraction!r} "
              f"max_norm_diff={max_norm_diff!r} strikes={strikes.size} "
              f"excluded={strikes.size - n_ok}")
    metadata = {"params": params.describe(), "curve": curve.describe(),
                "spot": spot, "taus": taus, "source": source,
                "mc": {"scheme": cfg.scheme, "seed": cfg.seed,
                       "n_paths": cfg.n_paths, "n_steps": cfg.n_steps,
                       "horizon": cfg.horizon, "antithetic": cfg.antithetic,
                       "exact_block_width": cfg.exact_block_width},
                "per_tau": per_tau}
    paths = _write_table(_get(vals, "out", str, "."), "validate", _get(vals, "format", str, "csv"),
                         VALIDATE_HEADER, rows, metadata)
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_greeks(vals: dict) -> int:
    convention = _get(vals, "convention", str, BLACK_SCHOLES)
    spot = _req(vals, "spot", float)
    strike = _req(vals, "strike", float)
    tau = _req(vals, "tau", float)
    sigma = _req(vals, "sigma", float)
    if convention == BLACK_SCHOLES:
        price = bs_price(spot, strike, tau, sigma)
        greeks = bs_greeks(spot, strike, tau, sigma)
    elif convention == BACHELIER:
        price = bachelier_price(spot, strike, tau, sigma)
        greeks = bachelier_greeks(spot, strike, tau, sigma)
    else:
        raise DomainError(f"--convention must be {BLACK_SCHOLES} or {BACHELIER}")
    obj = {"convention": convention, "spot": spot, "strike": strike, "tau": tau,
           "sigma": sigma, "price": price}
    obj.update(greeks.as_dict())
    print(json.dumps(obj, indent=2, sort_keys=True))
    if vals.get("out") is not None:
        out_dir = str(vals["out"])
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, "greeks.json")
        write_json(path, obj)
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# parser assembly

def _common_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--out",
                        help="output directory (default: current directory)")
    parent.add_argument("--format", choices=["csv", "json"],
                        help="table format; csv adds a .meta.json sidecar (default csv)")
    parent.add_argument("--config",
                        help="JSON file mirroring the flags; flags take precedence")
    parent.add_argument("--seed", type=int, help="RNG seed, integer (mc/validate)")
    parent.add_argument("--threads", type=int,
                        help="worker threads for path generation (mc/validate)")
    return parent


def _add_model_flags(sub) -> None:
    sub.add_argument("--H", type=float, help="Hurst exponent, dimensionless in (0, 1/2]")
    sub.add_argument("--eta", type=float, help="vol-of-vol, units year^-H")
    sub.add_argument("--rho", type=float, help="spot-vol correlation in [-1, 1]")
    sub.add_argument("--beta", help="backbone: lognormal | normal | power:<p> (default lognormal)")
    sub.add_argument("--xi0", type=float,
                     help="flat forward variance, units 1/year (default 0.04)")
    sub.add_argument("--curve", help="forward-variance CSV with header t,xi (years, 1/year)")


def _add_strike_flags(sub) -> None:
    sub.add_argument("--spot", type=float, help="spot price, currency units")
    sub.add_argument("--strikes", help="comma-separated absolute strikes, currency units")
    sub.add_argument("--logstrikes", help="comma-separated log-moneyness values log(K/S)")
    sub.add_argument("--yrange",
                     help="lo:hi:n grid in scaled moneyness y, inverted via k = y U(tau)/kappa(tau)")


def build_parser() -> _Parser:
    parser = _Parser(prog="roughsabr",
                     description="Short-maturity rough SABR smiles: ODE tables, "
                                 "closed-form smiles, Monte Carlo validation.")
    subs = parser.add_subparsers(dest="command", required=True)
    parent = _common_parent()

    ode = subs.add_parser("ode-solve", parents=[parent],
                          help="solve the smile ODE and dump the y,g,G,f table")
    ode.add_argument("--H", type=float, help="Hurst exponent, dimensionless in [0, 1/2]")
    ode.add_argument("--rho", type=float, help="spot-vol correlation, |rho| < 1")
    ode.add_argument("--ymax", "--y-max", dest="ymax", type=float,
                     help="half-width of the y grid, dimensionless (default 10)")
    ode.add_argument("--tolerance", type=float,
                     help="integrator relative tolerance, dimensionless (default 1e-10)")
    ode.add_argument("--approx", action=argparse.BooleanOptionalAction,
                     help="tabulate the closed-form interpolation instead of integrating")
    ode.set_defaults(func=cmd_ode_solve, _sub=ode)

    smile = subs.add_parser("smile", parents=[parent],
                            help="closed-form or ODE-backed implied-vol smile")
    _add_model_flags(smile)
    _add_strike_flags(smile)
    smile.add_argument("--tau", type=float, help="time to expiry, years")
    smile.add_argument("--source", choices=[SOURCE_ODE, SOURCE_APPROX],
                       help="smile function source (default approx)")
    smile.add_argument("--atm-vol", dest="atm_vol", type=float,
                       help="override the ATM vol anchor, annualized vol units")
    smile.add_argument("--ymax", "--y-max", dest="ymax", type=float,
                       help="ODE grid half-width in y (default 10)")
    smile.set_defaults(func=cmd_smile, _sub=smile)

    mc = subs.add_parser("mc", parents=[parent],
                         help="Monte Carlo smile with standard errors")
    _add_model_flags(mc)
    _add_strike_flags(mc)
    mc.add_argument("--tau", type=float, help="option expiry, years")
    mc.add_argument("--horizon", type=float,
                    help="simulation horizon, years (default: tau)")
    mc.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    mc.add_argument("--steps", type=int, help="time steps over the horizon")
    mc.add_argument("--scheme", choices=["hybrid", "exact_cholesky"],
                    help="path-generation scheme (default hybrid)")
    mc.add_argument("--block-width", dest="block_width", type=int,
                    help="exact kernel intervals per step in the hybrid scheme (default 2)")
    mc.add_argument("--antithetic", action=argparse.BooleanOptionalAction,
                    help="antithetic pairing (default on)")
    mc.add_argument("--convention", choices=[BLACK_SCHOLES, BACHELIER],
                    help="implied-vol quoting convention (default black_scholes)")
    mc.set_defaults(func=cmd_mc, _sub=mc)

    val = subs.add_parser("validate", parents=[parent],
                          help="formula-vs-Monte-Carlo comparison report")
    _add_model_flags(val)
    _add_strike_flags(val)
    val.add_argument("--taus", help="comma-separated expiries, years")
    val.add_argument("--horizon", type=float,
                     help="simulation horizon, years (default: max of --taus)")
    val.add_argument("--paths", type=int, help="number of Monte Carlo paths")
    val.add_argument("--steps", type=int, help="time steps over the horizon")
    val.add_argument("--scheme", choices=["hybrid", "exact_cholesky"],
                     help="path-generation scheme (default hybrid)")
    val.add_argument("--block-width", dest="block_width", type=int,
                     help="exact kernel intervals per step (default 2)")
    val.add_argument("--antithetic", action=argparse.BooleanOptionalAction,
                     help="antithetic pairing (default on)")
    val.add_argument("--source", choices=[SOURCE_ODE, SOURCE_APPROX],
                     help="formula source to compare against (default ode)")
    val.add_argument("--ymax", "--y-max", dest="ymax", type=float,
                     help="ODE grid half-width in y (default 10)")
    val.set_defaults(func=cmd_validate, _sub=val)

    greeks = subs.add_parser("greeks", parents=[parent],
                             help="price and the six displayed greeks as JSON")
    greeks.add_argument("--convention", choices=[BLACK_SCHOLES, BACHELIER],
                        help="pricing convention (default black_scholes)")
    greeks.add_argument("--spot", type=float, help="spot price, currency units")
    greeks.add_argument("--strike", type=float, help="strike, currency units")
    greeks.add_argument("--tau", type=float, help="time to expiry, years")
    greeks.add_argument("--sigma", type=float,
                        help="volatility (annualized; price units for bachelier)")
    greeks.set_defaults(func=cmd_greeks, _sub=greeks)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        vals = _collect(ns, ns._sub)
        return ns.func(vals)
    except (NoSolutionError, InvalidSolutionError, SingularityError,
            DecompositionError, NotImplementedError) as exc:
        return _fail("numerical_error", str(exc), 3)
    except ValueError as exc:  # DomainError and other validation failures
        return _fail("invalid_argument", str(exc), 2)
    except OSError as exc:
        return _fail("io_error", str(exc), 4)


def entrypoint() -> None:
    raise SystemExit(main())
