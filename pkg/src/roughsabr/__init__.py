"""Short-maturity implied-volatility smiles under the rough SABR model.

The model: dS = beta(S) alpha_t dZ with alpha_t^2 = xi_t(t), forward variance
driven lognormally by the power kernel kappa(t) = eta sqrt(2H) t^(H-1/2).
The package solves the short-maturity smile ODE numerically, evaluates the
closed-form smile interpolation, and validates both against a hybrid-scheme
Monte Carlo engine.
"""

from .curves import (BetaSpec, ForwardVarianceCurve, ModelParams,
                     average_vol_U, kernel_kappa, kernel_ratio_R)
from .errors import (DecompositionError, DomainError, InvalidSolutionError,
                     NoSolutionError, SingularityError)
from .formula import (SOURCE_APPROX, SOURCE_ODE, SmileRequest, SmileTable,
                      bachelier_smile, bachelier_to_bs_vol, rough_sabr_smile,
                      scaled_moneyness_y, strike_transform_kbeta)
from .mc import (McConfig, McSmileEstimate, PathBatch, SCHEME_EXACT,
                 SCHEME_HYBRID, mc_smile, simulate_paths, simulate_volterra)
from .pricing import (BACHELIER, BLACK_SCHOLES, GreekSet, OptionQuote,
                      bachelier_greeks, bachelier_price, bs_greeks, bs_price,
                      implied_vol)
from .smile_ode import (G_approx, G_half, G_zero, OdeSolution,
                        SeriesCoefficients, approx_f, f_from_G,
                        g_closed_form_half, g_closed_form_zero, integrate_g,
                        ode_rhs, series_coefficients, solve_ode, solved)

__version__ = "0.1.0"

__all__ = [
    "BACHELIER", "BLACK_SCHOLES", "BetaSpec", "DecompositionError",
    "DomainError", "ForwardVarianceCurve", "G_approx", "G_half", "G_zero",
    "GreekSet", "InvalidSolutionError", "McConfig", "McSmileEstimate",
    "ModelParams", "NoSolutionError", "OdeSolution", "OptionQuote",
    "PathBatch", "SCHEME_EXACT", "SCHEME_HYBRID", "SOURCE_APPROX",
    "SOURCE_ODE", "SeriesCoefficients",
    "SingularityError", "SmileRequest", "SmileTable", "approx_f",
    "average_vol_U", "bachelier_greeks", "bachelier_price", "bachelier_smile",
    "bachelier_to_bs_vol", "bs_greeks", "bs_price", "f_from_G",
    "g_closed_form_half", "g_closed_form_zero", "implied_vol", "integrate_g",
    "kernel_kappa", "kernel_ratio_R", "mc_smile", "ode_rhs",
    "rough_sabr_smile", "scaled_moneyness_y", "series_coefficients",
    "simulate_paths", "simulate_volterra", "solve_ode", "solved",
    "strike_transform_kbeta", "__version__",
]
