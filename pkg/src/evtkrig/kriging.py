"""Stochastic kriging with a constant trend, Gaussian kernel, and known
heterogeneous intrinsic noise.

The surface model is a constant trend beta0 plus a stationary Gaussian
random field with covariance tau^2 * R(theta), observed at each design
site with independent noise of known variance (the site's
``intrinsic_variance``). Hyperparameters (tau^2, theta) are chosen by
maximizing the Gaussian log-likelihood with beta0 profiled out in closed
form; predictions use the cached Cholesky factorization of

    Sigma = tau^2 (R(theta) + nugget * I) + diag(intrinsic variances).

With all intrinsic variances and nugget zero this reduces to an ordinary
interpolating kriging model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

__all__ = [
    "DesignSite",
    "FitOptions",
    "KrigingModel",
    "SingularDesignError",
    "KrigingFitError",
    "kernel",
    "assemble",
    "log_likelihood",
    "fit",
]

MODEL_FORMAT_VERSION = 1
# Nugget escalation ladder used when a zero-noise covariance fails to factor.
NUGGET_LADDER = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
# Jitter used for the alternative candidate fitted on all-zero-noise designs
# whose likelihood optimum may be unreachable at nugget 0 (see fit()).
NUGGET_FLOOR = 1e-8


class SingularDesignError(RuntimeError):
    """Covariance cannot be made positive definite (e.g. duplicate sites)."""


class KrigingFitError(RuntimeError):
    """Hyperparameter search failed to produce a usable model."""


@dataclass(frozen=True)
class DesignSite:
    """One aggregated observation: location, response, and its estimator variance."""

    location: tuple[float, ...]
    response: float
    intrinsic_variance: float = 0.0

    def __post_init__(self):
        if self.intrinsic_variance < 0.0:
            raise ValueError("intrinsic variance must be nonnegative")


@dataclass(frozen=True)
class FitOptions:
    nugget: float = 0.0
    n_starts: int = 10
    start_seed: int = 0
    max_iter: int = 200
    theta_bounds: tuple[float, float] | None = None  # common to all dimensions
    tau2_bounds: tuple[float, float] | None = None

    def __post_init__(self):
        if self.nugget < 0.0:
            raise ValueError("nugget must be nonnegative")


def kernel(a, b, theta) -> float:
    """Gaussian correlation exp(-sum_i theta_i (a_i - b_i)^2)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if a.shape != b.shape or a.shape != theta.shape:
        raise ValueError("location/theta dimensions disagree")
    if np.any(theta <= 0.0):
        raise ValueError("kernel rates must be positive")
    d = a - b
    return float(np.exp(-np.sum(theta * d * d)))


def _correlation_matrix(locs: np.ndarray, theta: np.ndarray) -> np.ndarray:
    diff = locs[:, None, :] - locs[None, :, :]
    return np.exp(-np.einsum("ijk,k->ij", diff * diff, theta))


def _cross_correlation(locs: np.ndarray, x: np.ndarray, theta: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - locs[None, :, :]
    return np.exp(-np.einsum("ijk,k->ij", diff * diff, theta))


def _site_arrays(sites) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    locs = np.array([np.atleast_1d(np.asarray(s.location, dtype=float)) for s in sites])
    if locs.ndim != 2:
        raise ValueError("sites must share a common location dimension")
    resp = np.array([float(s.response) for s in sites])
    intr = np.array([float(s.intrinsic_variance) for s in sites])
    if np.any(intr < 0.0):
        raise ValueError("intrinsic variances must be nonnegative")
    return locs, resp, intr


@dataclass
class KrigingModel:
    """A fitted stochastic-kriging surface (immutable once built)."""

    beta0: float
    tau2: float
    theta: np.ndarray
    locations: np.ndarray
    responses: np.ndarray
    intrinsic: np.ndarray
    nugget: float
    loglik: float
    _chol: tuple = field(repr=False)
    _weights: np.ndarray = field(repr=False)  # Sigma^-1 (Y - beta0)

    @property
    def k(self) -> int:
        return self.locations.shape[0]

    @property
    def dim(self) -> int:
        return self.locations.shape[1]

    def predict_many(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Means and extrinsic standard deviations at query locations (m, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.dim:
            raise ValueError(f"query dimension {x.shape[1]} != design dimension {self.dim}")
        cross = self.tau2 * _cross_correlation(self.locations, x, self.theta)
        mean = self.beta0 + cross @ self._weights
        solved = linalg.cho_solve(self._chol, cross.T, check_finite=False)
        var = self.tau2 - np.einsum("ij,ji->i", cross, solved)
        return mean, np.sqrt(np.maximum(var, 0.0))

    def predict(self, x0) -> tuple[float, float]:
        mean, sd = self.predict_many(np.atleast_2d(np.asarray(x0, dtype=float)))
        return float(mean[0]), float(sd[0])

    def to_json(self) -> str:
        payload = {
            "format_version": MODEL_FORMAT_VERSION,
            "beta0": self.beta0,
            "tau2": self.tau2,
            "theta": list(map(float, self.theta)),
            "nugget": self.nugget,
            "sites": [
                {"location": list(map(float, loc)), "response": float(r),
                 "intrinsic_variance": float(v)}
                for loc, r, v in zip(self.locations, self.responses, self.intrinsic)
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "KrigingModel":
        payload = json.loads(text)
        version = payload.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version!r}")
        sites = [DesignSite(tuple(s["location"]), s["response"],
                            s.get("intrinsic_variance", 0.0))
                 for s in payload["sites"]]
        return assemble(sites, tau2=payload["tau2"], theta=payload["theta"],
                        beta0=payload["beta0"], nugget=payload.get("nugget", 0.0))


def _factorize(locs, intr, tau2, theta, nugget):
    sigma = tau2 * (_correlation_matrix(locs, theta) + nugget * np.eye(len(locs)))
    sigma[np.diag_indices_from(sigma)] += intr
    return linalg.cho_factor(sigma, lower=True, check_finite=False)


def _profile_pieces(chol, resp, beta0=None):
    ones = np.ones_like(resp)
    s_ones = linalg.cho_solve(chol, ones, check_finite=False)
    if beta0 is None:
        s_resp = linalg.cho_solve(chol, resp, check_finite=False)
        beta0 = float(ones @ s_resp) / float(ones @ s_ones)
    resid = resp - beta0
    weights = linalg.cho_solve(chol, resid, check_finite=False)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    ll = (-0.5 * len(resp) * math.log(2.0 * math.pi) - 0.5 * logdet
          - 0.5 * float(resid @ weights))
    return beta0, weights, ll


def log_likelihood(sites, tau2: float, theta, nugget: float = 0.0,
                   beta0: float | None = None) -> float:
    """Gaussian log-likelihood of the site responses for given hyperparameters.

    With ``beta0=None`` the trend constant is profiled out in closed form:
    beta0 = (1' Sigma^-1 Y) / (1' Sigma^-1 1).
    """
    locs, resp, intr = _site_arrays(sites)
    theta = np.asarray(theta, dtype=float)
    try:
        chol = _factorize(locs, intr, float(tau2), theta, float(nugget))
    except linalg.LinAlgError as exc:
        raise SingularDesignError(f"covariance not positive definite: {exc}")
    return _profile_pieces(chol, resp, beta0)[2]


def assemble(sites, tau2: float, theta, beta0: float | None = None,
             nugget: float = 0.0) -> KrigingModel:
    """Build a model at fixed hyperparameters (profiling beta0 if omitted)."""
    locs, resp, intr = _site_arrays(sites)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.shape != (locs.shape[1],):
        raise ValueError("theta dimension must match the location dimension")
    if np.any(theta <= 0.0) or tau2 <= 0.0:
        raise ValueError("tau2 and every theta must be positive")
    try:
        chol = _factorize(locs, intr, float(tau2), theta, float(nugget))
    except linalg.LinAlgError as exc:
        raise SingularDesignError(f"covariance not positive definite: {exc}")
    beta0, weights, ll = _profile_pieces(chol, resp, beta0)
    return KrigingModel(beta0=beta0, tau2=float(tau2), theta=theta,
                        locations=locs, responses=resp, intrinsic=intr,
                        nugget=float(nugget), loglik=ll, _chol=chol, _weights=weights)


def _search_box(locs: np.ndarray, resp: np.ndarray,
                opts: FitOptions) -> tuple[np.ndarray, np.ndarray]:
    widths = locs.max(axis=0) - locs.min(axis=0)
    widths = np.where(widths > 0.0, widths, 1.0)
    if opts.theta_bounds is not None:
        th_lo = np.full(locs.shape[1], opts.theta_bounds[0])
        th_hi = np.full(locs.shape[1], opts.theta_bounds[1])
    else:
        th_lo, th_hi = 1e-3 / widths**2, 1e3 / widths**2
    scale = max(float(np.var(resp)), 1e-12)
    if opts.tau2_bounds is not None:
        t2_lo, t2_hi = opts.tau2_bounds
    else:
        t2_lo, t2_hi = 1e-6 * scale, 1e3 * scale
    lo = np.log(np.concatenate(([t2_lo], th_lo)))
    hi = np.log(np.concatenate(([t2_hi], th_hi)))
    return lo, hi


def _lhs_unit(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    out = np.empty((n, d))
    for j in range(d):
        out[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return out


def fit(sites, opts: FitOptions | None = None) -> KrigingModel:
    """Fit hyperparameters by profile-likelihood maximization.

    The search runs L-BFGS-B over (log tau^2, log theta) from ``n_starts``
    Latin-hypercube start points in the bound box, at the requested nugget
    (default 0). All-zero-noise designs additionally fit a jittered
    candidate (nugget 1e-8) because their likelihood optimum may be
    unreachable at nugget 0; the higher-likelihood candidate wins, with
    ties going to the exact-interpolation model. If neither search yields
    a usable covariance, the nugget escalates through 1e-12 .. 1e-6. The
    nugget actually used is recorded on the model.
    """
    opts = opts or FitOptions()
    sites = list(sites)
    locs, resp, intr = _site_arrays(sites)
    k = locs.shape[0]
    if k < 2:
        raise ValueError("need at least 2 design sites")
    # Exact duplicates with no intrinsic noise make Sigma singular at nugget 0
    # and non-informative at any nugget; reject explicitly.
    order = np.lexsort(locs.T)
    for a, b in zip(order[:-1], order[1:]):
        if np.array_equal(locs[a], locs[b]) and intr[a] == 0.0 and intr[b] == 0.0:
            raise SingularDesignError(
                f"duplicate design sites {tuple(locs[a])} with zero intrinsic variance")

    lo, hi = _search_box(locs, resp, opts)
    rng = np.random.default_rng(opts.start_seed)
    starts = lo + _lhs_unit(opts.n_starts, lo.size, rng) * (hi - lo)

    def search(nugget: float):
        def negll(params: np.ndarray) -> float:
            try:
                chol = _factorize(locs, intr, math.exp(params[0]),
                                  np.exp(params[1:]), nugget)
            except linalg.LinAlgError:
                return 1e300
            return -_profile_pieces(chol, resp)[2]

        best_x, best_f = None, math.inf
        for x0 in starts:
            res = optimize.minimize(negll, x0, method="L-BFGS-B",
                                    bounds=list(zip(lo, hi)),
                                    options={"maxiter": opts.max_iter})
            if res.fun < best_f:
                best_x, best_f = res.x, float(res.fun)
        return best_x if (best_x is not None and best_f < 1e299) else None

    def searched_model(nugget: float) -> KrigingModel | None:
        best = search(nugget)
        if best is None:
            return None
        try:
            return assemble(sites, tau2=math.exp(best[0]), theta=np.exp(best[1:]),
                            nugget=nugget)
        except SingularDesignError:
            return None

    candidates = []
    base = searched_model(opts.nugget)
    if base is not None:
        candidates.append(base)
    if opts.nugget == 0.0 and not np.any(intr > 0.0):
        # With no noise diagonal the likelihood optimum can sit where the bare
        # correlation matrix is numerically singular (e.g. nearly coincident
        # sites), leaving the nugget-0 search stuck on a degenerate ridge. Fit
        # a second candidate at a fixed small jitter and keep the one with the
        # higher likelihood; exact ties go to the exact-interpolation model.
        jittered = searched_model(NUGGET_FLOOR)
        if jittered is not None:
            candidates.append(jittered)
    if candidates:
        return max(candidates, key=lambda m: m.loglik)

    last_error: Exception | None = None
    for nugget in (NUGGET_LADDER if opts.nugget == 0.0 else ()):
        model = searched_model(nugget)
        if model is not None:
            return model
        last_error = KrigingFitError(
            f"likelihood search failed at every start (nugget {nugget:g})")
    raise SingularDesignError(
        f"no usable covariance after nugget escalation: {last_error}")
