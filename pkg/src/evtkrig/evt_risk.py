"""Tail-risk estimation: empirical CVaR, generalized Pareto peaks-over-
threshold fits, and delta-method variances.

The estimators operate on a single loss sample (1-D array of finite
reals). Two routes are provided for CVaR at level ``alpha``:

* empirical: tail average beyond the empirical quantile, with the
  tail-average-transform variance estimator; and
* peaks over threshold (POT): a generalized Pareto distribution (GPD) is
  fit by maximum likelihood to the exceedances over a high threshold, the
  quantile and tail mean are extrapolated from the fitted tail, and the
  estimator variance follows from the delta method through the empirical
  Fisher information of the GPD log-likelihood.

A generic spectral estimator integrates the POT quantile curve against an
admissible risk spectrum, covering every coherent, law-invariant,
comonotone-additive risk measure; CVaR is the constant-spectrum special
case.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "RiskEstimate",
    "TailTransform",
    "GpdFit",
    "SpectralMeasure",
    "RiskError",
    "InsufficientDataError",
    "InsufficientTailError",
    "ConvergenceError",
    "SingularInformationError",
    "HeavyTailError",
    "TailOrderError",
    "HeavyTailWarning",
    "as_sample",
    "empirical_var",
    "tail_transform",
    "empirical_cvar",
    "gpd_cdf",
    "gpd_logpdf",
    "gpd_score",
    "gpd_hessian",
    "fit_gpd",
    "fit_gpd_exceedances",
    "pot_var",
    "pot_cvar",
    "pot_cvar_value",
    "cvar_sensitivity",
    "delta_variance",
    "spectral_pot",
]

# Shape values this close to zero take the exponential (xi = 0) branch.
XI_ZERO_EPS = 1e-9
# The xi-partials lose ~xi^-2 digits to cancellation near zero; below this
# threshold they switch to series expansions in xi.
XI_SERIES_EPS = 1e-5
# Maximum-likelihood search box for the GPD shape.
XI_BOUNDS = (-0.49, 0.99)
# Scale search box spans log(beta0) +- LOG_BETA_SPAN around the mean exceedance.
LOG_BETA_SPAN = math.log(1e3)
MIN_EXCEEDANCES = 30
INFO_MAX_CONDITION = 1e12


class RiskError(RuntimeError):
    """Numerical or data-driven estimation failure (as opposed to bad input)."""


class InsufficientDataError(RiskError):
    """Sample too small to support the requested tail fit."""


class InsufficientTailError(RiskError):
    """Too few observations beyond the quantile/threshold."""


class ConvergenceError(RiskError):
    """Optimizer failed to reach a stationary point."""


class SingularInformationError(RiskError):
    """Empirical Fisher information is singular or not positive definite."""


class HeavyTailError(RiskError):
    """Fitted shape >= 1: the tail mean (and hence CVaR) is infinite."""


class TailOrderError(ValueError):
    """Requested level lies below the threshold level of the fit."""


class HeavyTailWarning(UserWarning):
    """Shape estimate >= 1/2: asymptotic variance theory is shaky."""


@dataclass(frozen=True)
class RiskEstimate:
    """Point estimate and estimator variance for one tail level."""

    value: float
    variance: float
    alpha: float
    method: str  # "empirical" | "pot" | "spectral"


@dataclass(frozen=True)
class TailTransform:
    """The tail-average transform W_i = q + (x_i - q)+ / (1 - alpha_eff).

    ``alpha_eff`` is the realized non-exceedance fraction 1 - m/n (m = tail
    count), which makes mean(w) reproduce the tail average exactly.
    """

    w: np.ndarray
    w_bar: float


@dataclass(frozen=True)
class GpdFit:
    """A fitted GPD tail model over exceedances of threshold ``u``.

    ``info`` is the empirical Fisher information: the negated average
    Hessian of the exceedance log-density at (xi, beta).  ``zeta`` is the
    exceedance fraction n_exceed / n_total.
    """

    u: float
    n_total: int
    n_exceed: int
    zeta: float
    xi: float
    beta: float
    info: np.ndarray
    loglik: float
    boundary: bool = False
    threshold_quantile: float | None = None


def as_sample(values) -> np.ndarray:
    """Validate and return a 1-D float sample (finite, length >= 1)."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        x = x.reshape(-1)
    if x.size < 1:
        raise ValueError("sample must contain at least one observation")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return alpha


def empirical_var(sample, alpha: float) -> float:
    """Smallest order statistic at which the empirical CDF reaches alpha.

    This is the ceil(alpha * n)-th order statistic; a 1e-9 slack guards the
    ceiling against float representation of alpha at exact multiples.
    """
    x = as_sample(sample)
    alpha = _check_alpha(alpha)
    n = x.size
    if n < 2:
        raise ValueError("empirical quantile needs at least 2 observations")
    k = int(math.ceil(alpha * n - 1e-9))
    k = min(max(k, 1), n)
    return float(np.partition(x, k - 1)[k - 1])


def tail_transform(sample, alpha: float) -> TailTransform:
    """Tail-average transform of the sample at level alpha."""
    x = as_sample(sample)
    alpha = _check_alpha(alpha)
    q = empirical_var(x, alpha)
    m = int(np.count_nonzero(x >= q))
    if m < 2:
        raise InsufficientTailError(
            f"only {m} observation(s) at or beyond the {alpha} quantile; need >= 2")
    w = q + np.maximum(x - q, 0.0) * (x.size / m)
    return TailTransform(w=w, w_bar=float(w.mean()))


def empirical_cvar(sample, alpha: float) -> RiskEstimate:
    """Empirical CVaR (tail average) with its transform-based variance.

    The value is the mean of observations at or beyond the empirical
    quantile; the variance is sum((W_i - W_bar)^2) / (n (n - 1)) over the
    tail-average transform.
    """
    tt = tail_transform(sample, alpha)
    n = tt.w.size
    dev = tt.w - tt.w_bar
    variance = float(dev @ dev) / (n * (n - 1))
    return RiskEstimate(value=tt.w_bar, variance=variance, alpha=float(alpha),
                        method="empirical")


# ---------------------------------------------------------------------------
# Generalized Pareto distribution
# ---------------------------------------------------------------------------

def _check_gpd_args(xi: float, beta: float, z) -> np.ndarray:
    if beta <= 0.0:
        raise ValueError(f"scale must be positive, got {beta}")
    z = np.asarray(z, dtype=float)
    if np.any(z < 0.0):
        raise ValueError("GPD argument below the lower support endpoint 0")
    if xi < 0.0 and np.any(z > -beta / xi):
        raise ValueError(
            f"GPD argument beyond the upper support endpoint {-beta / xi:.6g} for xi={xi}")
    return z


def gpd_cdf(xi: float, beta: float, z):
    """GPD CDF: 1 - (1 + xi z / beta)^(-1/xi), exponential branch at xi = 0."""
    xi, beta = float(xi), float(beta)
    zz = _check_gpd_args(xi, beta, z)
    if abs(xi) < XI_ZERO_EPS:
        out = -np.expm1(-zz / beta)
    else:
        with np.errstate(divide="ignore"):
            out = -np.expm1(-np.log1p(xi * zz / beta) / xi)
    return float(out) if np.isscalar(z) or np.ndim(z) == 0 else out


def gpd_logpdf(xi: float, beta: float, z):
    """GPD log-density matching :func:`gpd_cdf` (−inf at a finite endpoint)."""
    xi, beta = float(xi), float(beta)
    zz = _check_gpd_args(xi, beta, z)
    if abs(xi) < XI_ZERO_EPS:
        out = -math.log(beta) - zz / beta
    else:
        with np.errstate(divide="ignore"):
            out = -math.log(beta) - (1.0 + 1.0 / xi) * np.log1p(xi * zz / beta)
    return float(out) if np.isscalar(z) or np.ndim(z) == 0 else out


def gpd_score(xi: float, beta: float, z):
    """First partials (d/dxi, d/dbeta) of the GPD log-density at each z."""
    xi, beta = float(xi), float(beta)
    zz = _check_gpd_args(xi, beta, z)
    t = zz / beta
    if abs(xi) < XI_SERIES_EPS:
        d_xi = (t * t / 2.0 - t) + xi * (t**2 - 2.0 * t**3 / 3.0) \
            + xi**2 * (0.75 * t**4 - t**3)
        d_beta = (t - 1.0) / beta
    else:
        denom = beta + xi * zz
        d_xi = np.log1p(xi * t) / xi**2 - (1.0 / xi + 1.0) * zz / denom
        d_beta = (zz * (xi + 1.0) / denom - 1.0) / beta
    return d_xi, d_beta


def gpd_hessian(xi: float, beta: float, z):
    """Second partials (d2/dxi2, d2/dxidbeta, d2/dbeta2) of the log-density."""
    xi, beta = float(xi), float(beta)
    zz = _check_gpd_args(xi, beta, z)
    t = zz / beta
    if abs(xi) < XI_SERIES_EPS:
        d_xx = t**2 - 2.0 * t**3 / 3.0 + xi * (1.5 * t**4 - 2.0 * t**3)
        denom = beta + xi * zz
        d_xb = (zz / denom - zz**2 * (xi + 1.0) / denom**2) / beta
        d_bb = (-(zz * (xi + 1.0) / denom - 1.0) / beta**2
                - zz * (xi + 1.0) / (beta * denom**2))
    else:
        denom = beta + xi * zz
        d_xx = (-2.0 / xi**3 * np.log1p(xi * t)
                + 2.0 / xi**2 * zz / denom
                + (1.0 / xi + 1.0) * zz**2 / denom**2)
        d_xb = (zz / denom - zz**2 * (xi + 1.0) / denom**2) / beta
        d_bb = (-(zz * (xi + 1.0) / denom - 1.0) / beta**2
                - zz * (xi + 1.0) / (beta * denom**2))
    return d_xx, d_xb, d_bb


def _negloglik(xi: float, beta: float, z: np.ndarray, z_max: float) -> float:
    """Negative GPD log-likelihood; +inf outside the support constraint."""
    if beta <= 0.0:
        return math.inf
    if xi < 0.0 and 1.0 + xi * z_max / beta <= 0.0:
        return math.inf
    n = z.size
    if abs(xi) < XI_ZERO_EPS:
        return n * math.log(beta) + float(z.sum()) / beta
    return n * math.log(beta) + (1.0 + 1.0 / xi) * float(np.log1p(xi * z / beta).sum())


def _pwm_start(z: np.ndarray) -> tuple[float, float]:
    """Probability-weighted-moment seed for the GPD parameters."""
    n = z.size
    zs = np.sort(z)
    b0 = float(zs.mean())
    b1 = float((zs * (n - 1.0 - np.arange(n)) / (n - 1.0)).mean())
    denom = b0 - 2.0 * b1
    if denom <= 0.0 or b0 <= 0.0:
        return 0.1, b0 if b0 > 0 else 1.0
    return 2.0 - b0 / denom, 2.0 * b0 * b1 / denom


def _newton_polish(xi: float, beta: float, z: np.ndarray, z_max: float,
                   lbeta_lo: float, lbeta_hi: float) -> tuple[float, float]:
    """Newton refinement of the MLE using the analytic score and Hessian."""
    grad_tol = 1e-8 * z.size
    cur = _negloglik(xi, beta, z, z_max)
    for _ in range(60):
        s_xi, s_beta = gpd_score(xi, beta, z)
        g = -np.array([s_xi.sum(), s_beta.sum()])
        if float(np.hypot(*g)) < grad_tol:
            break
        h_xx, h_xb, h_bb = gpd_hessian(xi, beta, z)
        hess = -np.array([[h_xx.sum(), h_xb.sum()], [h_xb.sum(), h_bb.sum()]])
        try:
            step = -np.linalg.solve(hess, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        # Regularize uphill Newton directions toward steepest descent.
        if float(g @ step) > 0.0:
            step = -g / max(float(np.hypot(*g)), 1e-300)
        t = 1.0
        accepted = False
        for _ in range(40):
            xi_n = xi + t * step[0]
            beta_n = beta + t * step[1]
            inside = (XI_BOUNDS[0] <= xi_n <= XI_BOUNDS[1]
                      and lbeta_lo <= math.log(beta_n) <= lbeta_hi) if beta_n > 0 else False
            if inside:
                cand = _negloglik(xi_n, beta_n, z, z_max)
                if cand <= cur + 1e-12 * abs(cur):
                    xi, beta, cur = xi_n, beta_n, cand
                    accepted = True
                    break
            t *= 0.5
        if not accepted or t * float(np.hypot(*step)) < 1e-10:
            break
    return xi, beta


def fit_gpd_exceedances(z, n_total: int | None = None, u: float = 0.0,
                        threshold_quantile: float | None = None) -> GpdFit:
    """Maximum-likelihood GPD fit to raw exceedances (threshold already removed).

    Multi-start Nelder-Mead over (xi, log beta) inside the search box,
    followed by a Newton polish on the analytic score. Candidates violating
    the support constraint 1 + xi * z_max / beta > 0 are rejected outright.
    """
    z = as_sample(z)
    if np.any(z < 0.0):
        raise ValueError("exceedances must be nonnegative")
    if z.size < MIN_EXCEEDANCES:
        raise InsufficientTailError(
            f"{z.size} exceedances below the floor of {MIN_EXCEEDANCES}")
    if n_total is None:
        n_total = z.size
    n_u = z.size
    z_max = float(z.max())
    beta0 = float(z.mean())
    if beta0 <= 0.0:
        raise InsufficientTailError("exceedances are all zero; no tail to fit")
    lbeta_lo, lbeta_hi = math.log(beta0) - LOG_BETA_SPAN, math.log(beta0) + LOG_BETA_SPAN

    def objective(p) -> float:
        xi_c, lb = p
        if not XI_BOUNDS[0] <= xi_c <= XI_BOUNDS[1] or not lbeta_lo <= lb <= lbeta_hi:
            return 1e300
        val = _negloglik(xi_c, math.exp(lb), z, z_max)
        return 1e300 if not math.isfinite(val) else val

    xi_pwm, beta_pwm = _pwm_start(z)
    starts = [
        (xi_pwm, beta_pwm),
        (0.1, beta0),
        (-0.2, beta0),
        (0.5, beta0 / 2.0),
        (0.9, beta0 / 4.0),
    ]
    best = None
    for xi_s, beta_s in starts:
        xi_s = min(max(xi_s, XI_BOUNDS[0] + 1e-6), XI_BOUNDS[1] - 1e-6)
        lb_s = min(max(math.log(max(beta_s, 1e-300)), lbeta_lo + 1e-9), lbeta_hi - 1e-9)
        res = optimize.minimize(objective, [xi_s, lb_s], method="Nelder-Mead",
                                options={"xatol": 1e-8, "fatol": 1e-10, "maxiter": 600})
        if best is None or res.fun < best.fun:
            best = res
    if best is None or best.fun >= 1e300:
        raise ConvergenceError("all GPD likelihood starts failed")

    xi_hat, beta_hat = float(best.x[0]), math.exp(float(best.x[1]))
    xi_hat, beta_hat = _newton_polish(xi_hat, beta_hat, z, z_max, lbeta_lo, lbeta_hi)

    boundary = (xi_hat - XI_BOUNDS[0] < 1e-6 or XI_BOUNDS[1] - xi_hat < 1e-6
                or math.log(beta_hat) - lbeta_lo < 1e-6 or lbeta_hi - math.log(beta_hat) < 1e-6)
    s_xi, s_beta = gpd_score(xi_hat, beta_hat, z)
    grad_norm = math.hypot(float(s_xi.sum()), float(s_beta.sum()))
    if not boundary and grad_norm > 1e-6 * n_u:
        raise ConvergenceError(
            f"GPD likelihood gradient norm {grad_norm:.3g} exceeds tolerance "
            f"{1e-6 * n_u:.3g} at an interior point")

    h_xx, h_xb, h_bb = gpd_hessian(xi_hat, beta_hat, z)
    info = -np.array([[h_xx.mean(), h_xb.mean()], [h_xb.mean(), h_bb.mean()]])
    if not np.all(np.isfinite(info)) or np.linalg.cond(info) > INFO_MAX_CONDITION:
        raise SingularInformationError(
            "empirical Fisher information is numerically singular "
            f"(condition number > {INFO_MAX_CONDITION:.0e})")

    return GpdFit(u=float(u), n_total=int(n_total), n_exceed=n_u,
                  zeta=n_u / float(n_total), xi=xi_hat, beta=beta_hat, info=info,
                  loglik=-_negloglik(xi_hat, beta_hat, z, z_max), boundary=boundary,
                  threshold_quantile=threshold_quantile)


def fit_gpd(sample, threshold_quantile: float = 0.9) -> GpdFit:
    """Threshold a sample at an empirical quantile and fit the GPD tail.

    The threshold defaults to the 0.9 quantile. At least 30 exceedances are
    required; if the quantile leaves fewer, the threshold is lowered to the
    order statistic giving exactly 30, and samples under 60 observations
    are rejected outright.
    """
    x = as_sample(sample)
    threshold_quantile = _check_alpha(threshold_quantile)
    n = x.size
    if n < 2 * MIN_EXCEEDANCES:
        raise InsufficientDataError(
            f"need at least {2 * MIN_EXCEEDANCES} observations for a tail fit, got {n}")
    u = empirical_var(x, threshold_quantile)
    z = x[x > u] - u
    if z.size < MIN_EXCEEDANCES:
        xs = np.sort(x)
        u = float(xs[n - MIN_EXCEEDANCES - 1])
        z = x[x > u] - u
        if z.size < MIN_EXCEEDANCES:
            raise InsufficientTailError(
                f"only {z.size} strict exceedances available after lowering the "
                f"threshold (ties at the threshold?)")
    return fit_gpd_exceedances(z, n_total=n, u=u, threshold_quantile=threshold_quantile)


# ---------------------------------------------------------------------------
# POT quantile / CVaR and the delta-method variance
# ---------------------------------------------------------------------------

def _log_ratio(fit: GpdFit, alpha: float) -> float:
    """log(zeta / (1 - alpha)); nonnegative iff alpha covers the threshold."""
    alpha = _check_alpha(alpha)
    big_l = math.log(fit.zeta / (1.0 - alpha))
    if big_l < -1e-12:
        raise TailOrderError(
            f"alpha={alpha} lies below the threshold level {1.0 - fit.zeta:.6g}")
    return max(big_l, 0.0)


def pot_var(fit: GpdFit, alpha: float) -> float:
    """Tail-extrapolated quantile u + (beta/xi) [ (zeta/(1-alpha))^xi - 1 ]."""
    big_l = _log_ratio(fit, alpha)
    if abs(fit.xi) < XI_ZERO_EPS:
        return fit.u + fit.beta * big_l
    return fit.u + fit.beta * math.expm1(fit.xi * big_l) / fit.xi


def _excess_factor(xi: float, big_l: float) -> float:
    """(CVaR - u) / beta as a function of the shape; stable near xi = 0.

    Equals (e^(xi L) / (1 - xi) - 1) / xi, rewritten as
    expm1(xi L) / (xi (1 - xi)) + 1 / (1 - xi).
    """
    if abs(xi) < XI_ZERO_EPS:
        return 1.0 + big_l
    return math.expm1(xi * big_l) / (xi * (1.0 - xi)) + 1.0 / (1.0 - xi)


def _excess_factor_dxi(xi: float, big_l: float) -> float:
    """d/dxi of :func:`_excess_factor`; series below |xi| = 1e-4."""
    if abs(xi) < 1e-4:
        # Partial exponential sums e_k = sum_{j<=k} L^j / j!.
        e2 = 1.0 + big_l + big_l**2 / 2.0
        e3 = e2 + big_l**3 / 6.0
        e4 = e3 + big_l**4 / 24.0
        e5 = e4 + big_l**5 / 120.0
        return e2 + 2.0 * xi * e3 + 3.0 * xi**2 * e4 + 4.0 * xi**3 * e5
    a = math.exp(xi * big_l)
    one = 1.0 - xi
    return (big_l * a / (xi * one)
            - math.expm1(xi * big_l) * (1.0 - 2.0 * xi) / (xi * one) ** 2
            + 1.0 / one**2)


def pot_cvar_value(fit: GpdFit, alpha: float) -> float:
    """POT CVaR point estimate: the extrapolated quantile plus the GPD mean
    excess above it, q + (beta + xi (q - u)) / (1 - xi). Requires xi < 1
    for a finite tail mean."""
    if fit.xi >= 1.0:
        raise HeavyTailError(f"xi={fit.xi} >= 1: CVaR is infinite")
    big_l = _log_ratio(fit, alpha)
    return fit.u + fit.beta * _excess_factor(fit.xi, big_l)


def pot_cvar(fit: GpdFit, alpha: float) -> RiskEstimate:
    """POT CVaR with its delta-method variance (see :func:`delta_variance`)."""
    value = pot_cvar_value(fit, alpha)
    variance = delta_variance(fit, alpha)
    return RiskEstimate(value=value, variance=variance, alpha=float(alpha), method="pot")


def cvar_sensitivity(xi: float, beta: float, u: float, zeta: float,
                     alpha: float) -> tuple[float, float]:
    """Gradient (d/dxi, d/dbeta) of the POT CVaR in the GPD parameters.

    The extrapolated quantile is itself a function of (xi, beta), so the
    gradient carries both the quantile and the mean-excess dependence:
    with B(xi) = (e^(xi L)/(1-xi) - 1)/xi and L = log(zeta/(1-alpha)),
    CVaR = u + beta B(xi), d/dbeta = B, d/dxi = beta B'(xi).
    """
    if xi >= 1.0:
        raise HeavyTailError(f"xi={xi} >= 1: CVaR is infinite")
    big_l = math.log(zeta / (1.0 - _check_alpha(alpha)))
    if big_l < 0.0:
        raise TailOrderError(f"alpha={alpha} lies below the threshold level {1 - zeta:.6g}")
    return beta * _excess_factor_dxi(xi, big_l), _excess_factor(xi, big_l)


def _quad_form_variance(grad: np.ndarray, fit: GpdFit) -> float:
    """grad' info^-1 grad / n_exceed with positive-definiteness checks."""
    info = np.asarray(fit.info, dtype=float)
    if info.shape != (2, 2) or not np.all(np.isfinite(info)):
        raise SingularInformationError("information matrix is not a finite 2x2 matrix")
    if abs(info[0, 1] - info[1, 0]) > 1e-8 * (1.0 + abs(info[0, 1])):
        raise SingularInformationError("information matrix is not symmetric")
    if np.linalg.cond(info) > INFO_MAX_CONDITION:
        raise SingularInformationError(
            f"information matrix condition number exceeds {INFO_MAX_CONDITION:.0e}")
    try:
        chol = np.linalg.cholesky(info)
    except np.linalg.LinAlgError:
        raise SingularInformationError("information matrix is not positive definite")
    # Solving through the Cholesky factor writes the quadratic form as a sum
    # of squares, so round-off cannot drive it negative.
    half = np.linalg.solve(chol, grad)
    return float(half @ half) / fit.n_exceed


def delta_variance(fit: GpdFit, alpha: float) -> float:
    """Asymptotic CVaR variance: grad' I^-1 grad / n_exceed.

    ``I`` is the empirical Fisher information of the fitted tail and the
    gradient is :func:`cvar_sensitivity`. Warns when xi >= 1/2, where the
    asymptotic normality of the MLE becomes unreliable.
    """
    if fit.xi >= 0.5:
        warnings.warn(
            f"delta-method variance with xi={fit.xi:.3f} >= 0.5 is unreliable",
            HeavyTailWarning, stacklevel=2)
    g_xi, g_beta = cvar_sensitivity(fit.xi, fit.beta, fit.u, fit.zeta, alpha)
    return _quad_form_variance(np.array([g_xi, g_beta]), fit)


# ---------------------------------------------------------------------------
# Spectral (coherent) risk measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralMeasure:
    """An admissible risk spectrum phi on (0, 1): nonnegative, nondecreasing,
    integrating to one. The risk value is int VaR_lambda phi(lambda) dlambda.
    """

    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    support_lower: float
    label: str
    cvar_alpha: float | None = None

    @classmethod
    def cvar(cls, alpha: float) -> "SpectralMeasure":
        """The CVaR spectrum: constant 1/(1-alpha) on [alpha, 1)."""
        alpha = _check_alpha(alpha)
        h = 1.0 / (1.0 - alpha)
        return cls(grid=np.array([alpha, 1.0]), values=np.array([h, h]),
                   support_lower=alpha, label=f"cvar({alpha})", cvar_alpha=alpha)

    @classmethod
    def from_table(cls, grid, values, check_admissible: bool = True) -> "SpectralMeasure":
        """Piecewise-linear spectrum from tabulated weights on a grid in (0, 1)."""
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise ValueError("grid and values must be equal-length 1-D arrays (>= 2 points)")
        if np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must be strictly increasing")
        if grid[0] <= 0.0 or grid[-1] > 1.0:
            raise ValueError("grid must lie inside (0, 1]")
        if np.any(values < 0.0):
            raise ValueError("spectrum weights must be nonnegative")
        if check_admissible:
            if np.any(np.diff(values) < -1e-12):
                raise ValueError("admissible spectra are nondecreasing")
            total = float(np.trapezoid(values, grid))
            if abs(total - 1.0) > 1e-8:
                raise ValueError(f"spectrum must integrate to 1, got {total:.10g}")
        return cls(grid=grid, values=values, support_lower=float(grid[0]),
                   label="tabulated")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.interp(lam, self.grid, self.values, left=0.0, right=0.0)
        return float(out) if lam.ndim == 0 else out

    def breakpoints(self) -> np.ndarray:
        return self.grid[(self.grid > self.support_lower) & (self.grid < 1.0)]


def _spectral_value(xi: float, beta: float, u: float, zeta: float,
                    phi: SpectralMeasure) -> float:
    """int_{lam0}^1 VaR_lambda phi(lambda) dlambda for the fitted tail."""
    lam0 = phi.support_lower
    quad_opts = {"epsabs": 1e-12, "epsrel": 1e-8, "limit": 400}
    if abs(xi) < XI_ZERO_EPS:
        # lambda = 1 - e^-t turns the log endpoint into exponential decay.
        t0 = -math.log1p(-lam0)

        def integrand(t: float) -> float:
            lam = -math.expm1(-t)
            q = u + beta * (math.log(zeta) + t)
            return q * phi(lam) * math.exp(-t)

        pts = [-math.log1p(-b) for b in phi.breakpoints()]
        hi = t0 + 45.0
        val, _ = integrate.quad(integrand, t0, hi,
                                points=[p for p in pts if t0 < p < hi] or None, **quad_opts)
        return val
    if xi > 0.0:
        # t = (1 - lambda)^(1 - xi) cancels the (1 - lambda)^-xi endpoint
        # singularity against the Jacobian: the transformed integrand is
        # phi(lambda) * [(u - beta/xi) t^(xi/(1-xi)) + (beta/xi) zeta^xi] / (1-xi).
        one = 1.0 - xi
        t0 = (1.0 - lam0) ** one
        sing = beta / xi * zeta**xi

        def integrand(t: float) -> float:
            lam = 1.0 - t ** (1.0 / one)
            return phi(lam) * ((u - beta / xi) * t ** (xi / one) + sing) / one

        pts = [(1.0 - b) ** one for b in phi.breakpoints()]
        val, _ = integrate.quad(integrand, 0.0, t0,
                                points=[p for p in pts if 0.0 < p < t0] or None, **quad_opts)
        return val

    def integrand(lam: float) -> float:
        q = u + beta / xi * (((1.0 - lam) / zeta) ** (-xi) - 1.0)
        return q * phi(lam)

    pts = [b for b in phi.breakpoints() if lam0 < b < 1.0]
    val, _ = integrate.quad(integrand, lam0, 1.0, points=pts or None, **quad_opts)
    return val


def spectral_pot(fit: GpdFit, phi: SpectralMeasure) -> RiskEstimate:
    """POT estimate of a spectral risk measure with a delta-method variance.

    The value integrates the extrapolated quantile curve against the
    spectrum (adaptive quadrature with an endpoint substitution for
    0 < xi < 1); the parameter gradient for the variance is taken by
    central finite differences of that quadrature value.
    """
    if fit.xi >= 1.0:
        raise HeavyTailError(f"xi={fit.xi} >= 1: the spectral integral diverges")
    if phi.support_lower < 1.0 - fit.zeta - 1e-12:
        raise TailOrderError(
            f"spectrum weight below the threshold level {1.0 - fit.zeta:.6g}")
    value = _spectral_value(fit.xi, fit.beta, fit.u, fit.zeta, phi)

    h_xi = 1e-5 * max(1.0, abs(fit.xi))
    h_beta = 1e-5 * max(1.0, abs(fit.beta))
    g_xi = (_spectral_value(fit.xi + h_xi, fit.beta, fit.u, fit.zeta, phi)
            - _spectral_value(fit.xi - h_xi, fit.beta, fit.u, fit.zeta, phi)) / (2.0 * h_xi)
    g_beta = (_spectral_value(fit.xi, fit.beta + h_beta, fit.u, fit.zeta, phi)
              - _spectral_value(fit.xi, fit.beta - h_beta, fit.u, fit.zeta, phi)) / (2.0 * h_beta)
    variance = _quad_form_variance(np.array([g_xi, g_beta]), fit)
    alpha = phi.cvar_alpha if phi.cvar_alpha is not None else phi.support_lower
    return RiskEstimate(value=value, variance=variance, alpha=alpha, method="spectral")
