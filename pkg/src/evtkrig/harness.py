"""Two-phase experiment pipeline: simulate at designed points, estimate the
tail risk and its estimator variance per site, fit a kriging surface per
method, and score global predictions against the exact oracles.

Four estimation methods are compared on shared simulated data:

* ``ORD-KRG``  ordinary kriging; empirical CVaR responses, intrinsic
  variance ignored (set to zero);
* ``POT-EMP``  POT CVaR responses with the across-replication
  squared-deviation variance (needs n >= 2 replications);
* ``EMP-EMP``  empirical CVaR responses with the tail-average-transform
  variance; and
* ``POT-EVT``  POT CVaR responses with the delta-method asymptotic
  variance, which is well-defined from a single replication.

With n replications per design point, per-replication estimates are
averaged and their variances combined as Var(mean) = sum(V_j) / n^2.
Performance is the mean absolute percentage error (MAPE) of the fitted
surface over a fixed test set against the analytic (benchmark) or numeric
(activity network) true CVaR.
"""

from __future__ import annotations

import csv
import math
import warnings
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, rankdata

from . import evt_risk, kriging, models
from .design import BudgetAllocation, Domain, equally_spaced, lhs
from .rng import RngStream

__all__ = [
    "ORD_KRG",
    "POT_EMP",
    "EMP_EMP",
    "POT_EVT",
    "METHODS",
    "SiteEstimate",
    "ExperimentConfig",
    "ResultRecord",
    "estimate_site",
    "run_experiment",
    "wilcoxon_signed_rank",
    "compare_methods",
    "write_results_csv",
    "write_summary_csv",
    "write_boxplot_csv",
]

ORD_KRG = "ORD-KRG"
POT_EMP = "POT-EMP"
EMP_EMP = "EMP-EMP"
POT_EVT = "POT-EVT"
METHODS = (ORD_KRG, POT_EMP, EMP_EMP, POT_EVT)

SAN_DESIGN_POINTS = 7
SAN_BUDGETS = (1_000, 10_000, 100_000)
MAPE_TRUTH_FLOOR = 1e-9

# Stream key prefixes; the simulation stream is shared by every method, so
# all methods at a given (macro-rep, site, replication) see identical data.
_KEY_TEST = 0
_KEY_DESIGN = 1
_KEY_SIM = 2


@dataclass(frozen=True)
class SiteEstimate:
    """Aggregated response/variance for one design point, plus diagnostics."""

    response: float
    variance: float
    fallbacks: int = 0
    heavy_tails: int = 0
    boundary_fits: int = 0


def _aggregate(values, variances) -> tuple[float, float]:
    n = len(values)
    return float(np.mean(values)), float(np.sum(variances)) / n**2


def _squared_deviation_variance(values) -> float:
    """Across-replication squared-deviation estimate of Var(mean)."""
    v = np.asarray(values, dtype=float)
    return float(v.var(ddof=1)) / v.size


def estimate_site(method: str, samples, alpha: float,
                  threshold_quantile: float = 0.9,
                  gpd_fits=None) -> SiteEstimate:
    """Estimate (response, variance) at one design point from n replications.

    ``samples`` is a sequence of n loss samples (one per replication).
    ``gpd_fits`` optionally supplies pre-fitted tail models for the POT
    methods so a fit can be shared across tail levels.

    When the delta-method variance is unavailable at a site (singular
    information), POT-EVT falls back to the squared-deviation variance for
    n >= 2 and to the tail-average-transform variance of the single
    replication for n = 1; fallbacks are counted in the result.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    samples = [evt_risk.as_sample(s) for s in samples]
    n = len(samples)
    if n < 1:
        raise ValueError("need at least one replication")
    if method == POT_EMP and n < 2:
        raise ValueError("POT-EMP needs n >= 2 replications to estimate a variance")

    if method in (ORD_KRG, EMP_EMP):
        ests = [evt_risk.empirical_cvar(s, alpha) for s in samples]
        resp, var = _aggregate([e.value for e in ests], [e.variance for e in ests])
        if method == ORD_KRG:
            return SiteEstimate(response=resp, variance=0.0)
        return SiteEstimate(response=resp, variance=var)

    if gpd_fits is None:
        gpd_fits = [evt_risk.fit_gpd(s, threshold_quantile) for s in samples]
    if len(gpd_fits) != n:
        raise ValueError("gpd_fits length must match the number of replications")
    values = [evt_risk.pot_cvar_value(f, alpha) for f in gpd_fits]
    heavy = sum(1 for f in gpd_fits if f.xi >= 0.5)
    boundary = sum(1 for f in gpd_fits if f.boundary)

    if method == POT_EMP:
        return SiteEstimate(response=float(np.mean(values)),
                            variance=_squared_deviation_variance(values),
                            heavy_tails=heavy, boundary_fits=boundary)

    variances, fallbacks = [], 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", evt_risk.HeavyTailWarning)
        for fit in gpd_fits:
            try:
                variances.append(evt_risk.delta_variance(fit, alpha))
            except evt_risk.SingularInformationError:
                fallbacks += 1
                variances.append(None)
    if fallbacks:
        if n >= 2:
            resp = float(np.mean(values))
            return SiteEstimate(response=resp,
                                variance=_squared_deviation_variance(values),
                                fallbacks=fallbacks, heavy_tails=heavy,
                                boundary_fits=boundary)
        variance = evt_risk.empirical_cvar(samples[0], alpha).variance
        return SiteEstimate(response=values[0], variance=variance,
                            fallbacks=fallbacks, heavy_tails=heavy,
                            boundary_fits=boundary)
    resp, var = _aggregate(values, variances)
    return SiteEstimate(response=resp, variance=var,
                        heavy_tails=heavy, boundary_fits=boundary)


# ---------------------------------------------------------------------------
# Experiment configuration and records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment cell grid: a scenario at one budget allocation."""

    scenario: str  # "normal" | "triangular" | "pareto" | "san"
    allocation: BudgetAllocation | None = None
    san_budget: int | None = None
    alphas: tuple[float, ...] = (0.95, 0.99, 0.995)
    macro_replications: int = 10
    seed: int = 42
    methods: tuple[str, ...] | None = None
    n_test: int = 200
    threshold_quantile: float = 0.9

    def validate(self) -> None:
        if self.scenario not in models.NOISE_SCENARIOS + ("san",):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.scenario == "san":
            if self.san_budget is None or self.san_budget < 100:
                raise ValueError("SAN experiments need san_budget >= 100 observations")
        else:
            if self.allocation is None:
                raise ValueError("benchmark experiments need a budget allocation")
        for a in self.alphas:
            if not 0.0 < a < 1.0:
                raise ValueError(f"alpha {a} outside (0, 1)")
        if not self.alphas:
            raise ValueError("need at least one alpha")
        if self.macro_replications < 1:
            raise ValueError("macro_replications must be >= 1")
        if not 0.0 < self.threshold_quantile < 1.0:
            raise ValueError("threshold_quantile must lie in (0, 1)")
        if self.n_test < 2:
            raise ValueError("n_test must be >= 2")
        for m in self.methods or ():
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")

    @property
    def n_reps(self) -> int:
        return 1 if self.scenario == "san" else self.allocation.n

    @property
    def n_obs(self) -> int:
        return self.san_budget if self.scenario == "san" else self.allocation.n_obs

    @property
    def n_sites(self) -> int:
        return SAN_DESIGN_POINTS if self.scenario == "san" else self.allocation.k

    @property
    def allocation_id(self) -> int:
        return self.san_budget if self.scenario == "san" else self.allocation.id

    @property
    def allocation_label(self) -> str:
        if self.scenario == "san":
            return f"7-1-{self.san_budget}"
        return self.allocation.label

    def resolved_methods(self) -> tuple[str, ...]:
        if self.methods is not None:
            roster = self.methods
        elif self.scenario == "san":
            roster = (ORD_KRG, EMP_EMP, POT_EVT)
        else:
            roster = METHODS
        # POT-EMP has no variance estimate from a single replication.
        return tuple(m for m in roster if not (m == POT_EMP and self.n_reps < 2))


@dataclass(frozen=True)
class ResultRecord:
    scenario: str
    allocation: str
    allocation_id: int
    method: str
    alpha: float
    macro_rep: int
    mape: float | None
    diagnostics: str

    def sort_key(self):
        return (self.scenario, self.allocation_id, self.method, self.alpha, self.macro_rep)


def _benchmark_domain() -> Domain:
    return Domain(models.BENCHMARK_LOWER, models.BENCHMARK_UPPER)


def _san_test_points(design: np.ndarray, total: int = 200) -> np.ndarray:
    """Equally spaced grid with the point nearest each design site removed."""
    grid = np.linspace(models.SAN_LOWER, models.SAN_UPPER, total)
    keep = np.ones(total, dtype=bool)
    for x in design[:, 0]:
        keep[np.argmin(np.abs(grid - x))] = False
    return grid[keep].reshape(-1, 1)


def _test_set(config: ExperimentConfig, design: np.ndarray) -> np.ndarray:
    if config.scenario == "san":
        return _san_test_points(design)
    return lhs(_benchmark_domain(), config.n_test,
               RngStream(config.seed, (_KEY_TEST,)))


def _truth(config: ExperimentConfig, points: np.ndarray, alpha: float) -> np.ndarray:
    if config.scenario == "san":
        return np.array([models.san_true_cvar(float(x[0]), alpha) for x in points])
    return np.array([models.true_cvar_benchmark(config.scenario, p, alpha)
                     for p in points])


def _simulate_site(config: ExperimentConfig, location: np.ndarray, macro_rep: int,
                   site_index: int) -> list[np.ndarray]:
    out = []
    for j in range(config.n_reps):
        stream = RngStream(config.seed, (_KEY_SIM, macro_rep, site_index, j))
        if config.scenario == "san":
            out.append(models.san_simulate(float(location[0]), config.n_obs, stream))
        else:
            out.append(models.benchmark_simulate(config.scenario, location,
                                                 config.n_obs, stream))
    return out


def _mape(predictions: np.ndarray, truth: np.ndarray) -> float:
    mask = np.abs(truth) >= MAPE_TRUTH_FLOOR
    if not np.any(mask):
        raise ValueError("every test point has a near-zero true value; MAPE undefined")
    rel = np.abs(predictions[mask] - truth[mask]) / np.abs(truth[mask])
    return float(100.0 * rel.mean())


def _design_points(config: ExperimentConfig, macro_rep: int) -> np.ndarray:
    if config.scenario == "san":
        return equally_spaced(Domain((models.SAN_LOWER,), (models.SAN_UPPER,)),
                              SAN_DESIGN_POINTS)
    return lhs(_benchmark_domain(), config.allocation.k,
               RngStream(config.seed, (_KEY_DESIGN, macro_rep)))


def _run_macro_rep(config: ExperimentConfig, macro_rep: int, test_points: np.ndarray,
                   truths: dict[float, np.ndarray]) -> list[ResultRecord]:
    design = _design_points(config, macro_rep)
    roster = config.resolved_methods()

    data: list[list[np.ndarray]] = []
    digest = 0
    for i in range(len(design)):
        site_samples = _simulate_site(config, design[i], macro_rep, i)
        for arr in site_samples:
            digest = zlib.crc32(arr.tobytes(), digest)
        data.append(site_samples)

    needs_pot = any(m in (POT_EVT, POT_EMP) for m in roster)
    fits: list = []
    fit_error: str | None = None
    if needs_pot:
        try:
            fits = [[evt_risk.fit_gpd(s, config.threshold_quantile) for s in site]
                    for site in data]
        except evt_risk.RiskError as exc:
            fit_error = f"{type(exc).__name__}: {exc}"

    records = []
    for method in roster:
        for alpha in config.alphas:
            base_diag = f"data={digest:08x}"
            if method in (POT_EVT, POT_EMP) and fit_error is not None:
                records.append(ResultRecord(
                    config.scenario, config.allocation_label, config.allocation_id,
                    method, alpha, macro_rep, None,
                    base_diag + ";error=" + fit_error.replace(";", ",")))
                continue
            try:
                sites = []
                fallbacks = heavy = boundary = 0
                for i in range(len(design)):
                    est = estimate_site(
                        method, data[i], alpha,
                        threshold_quantile=config.threshold_quantile,
                        gpd_fits=fits[i] if method in (POT_EVT, POT_EMP) else None)
                    fallbacks += est.fallbacks
                    heavy += est.heavy_tails
                    boundary += est.boundary_fits
                    sites.append(kriging.DesignSite(tuple(design[i]), est.response,
                                                    est.variance))
                model = kriging.fit(sites)
                preds, _ = model.predict_many(test_points)
                mape = _mape(preds, truths[alpha])
                diag = (f"{base_diag};nugget={model.nugget:.3g}"
                        f";fallbacks={fallbacks};heavy={heavy};boundary={boundary}")
                records.append(ResultRecord(
                    config.scenario, config.allocation_label, config.allocation_id,
                    method, alpha, macro_rep, mape, diag))
            except (evt_risk.RiskError, kriging.SingularDesignError,
                    kriging.KrigingFitError, ValueError) as exc:
                msg = f"{type(exc).__name__}: {exc}".replace(";", ",")
                records.append(ResultRecord(
                    config.scenario, config.allocation_label, config.allocation_id,
                    method, alpha, macro_rep, None, base_diag + ";error=" + msg))
    return records


def run_experiment(config: ExperimentConfig, threads: int = 1) -> list[ResultRecord]:
    """Run every (method, alpha, macro-rep) cell of one experiment.

    All methods consume the same simulated observations within a
    macro-replication, so method comparisons are paired. A failed fit
    aborts only its own cell; the failure is recorded in the record's
    diagnostics with ``mape`` left empty. Records come back sorted, so a
    fixed seed yields identical output regardless of ``threads``.
    """
    config.validate()
    probe = _design_points(config, 0)
    test_points = _test_set(config, probe)
    truths = {alpha: _truth(config, test_points, alpha) for alpha in config.alphas}

    reps = range(config.macro_replications)
    if threads > 1 and config.macro_replications > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_macro_rep, [config] * len(reps), reps,
                                   [test_points] * len(reps), [truths] * len(reps)))
    else:
        chunks = [_run_macro_rep(config, m, test_points, truths) for m in reps]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=ResultRecord.sort_key)
    return records


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank comparison
# ---------------------------------------------------------------------------

def wilcoxon_signed_rank(paired_a, paired_b, side: str = "greater") -> float:
    """One-sample signed-rank p-value for paired observations.

    ``side='greater'`` tests H1: a tends to exceed b (median difference
    > 0); ``side='less'`` the reverse; ``side='two-sided'`` doubles the
    smaller tail. Zero differences are dropped before ranking; tied
    absolute differences get average ranks. The null distribution is exact
    (all 2^n sign assignments) up to n = 20 paired differences and a
    tie-corrected normal approximation with continuity correction beyond.
    """
    a = np.asarray(paired_a, dtype=float)
    b = np.asarray(paired_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be equal-length 1-D sequences")
    if a.size < 5:
        raise ValueError("need at least 5 pairs")
    if side not in ("greater", "less", "two-sided"):
        raise ValueError(f"unknown side {side!r}")
    d = a - b
    d = d[d != 0.0]
    if d.size == 0:
        raise ValueError("all differences are zero; the test is degenerate")
    n = d.size
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())

    if n <= 20:
        # Average ranks are half-integers; doubling makes the walk integral.
        r2 = np.rint(2.0 * ranks).astype(int)
        counts = np.zeros(int(r2.sum()) + 1)
        counts[0] = 1.0
        for r in r2:
            shifted = np.zeros_like(counts)
            shifted[r:] = counts[:counts.size - r]
            counts += shifted
        total = 2.0**n
        w2 = int(round(2.0 * w_plus))
        p_ge = float(counts[w2:].sum()) / total
        p_le = float(counts[:w2 + 1].sum()) / total
    else:
        mu = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, tie_counts = np.unique(np.abs(d), return_counts=True)
        var -= float(np.sum(tie_counts**3 - tie_counts)) / 48.0
        sd = math.sqrt(var)
        p_ge = float(norm.sf((w_plus - mu - 0.5) / sd))
        p_le = float(norm.cdf((w_plus - mu + 0.5) / sd))

    if side == "greater":
        return p_ge
    if side == "less":
        return p_le
    return min(1.0, 2.0 * min(p_ge, p_le))


def compare_methods(records, method_a: str = POT_EVT,
                    method_b: str = EMP_EMP) -> list[dict]:
    """Paired one-sided signed-rank comparisons of MAPE per experiment cell.

    Returns one row per (scenario, allocation, alpha) with p-values for
    "a <= b" (a has lower error) and "a >= b".
    """
    by_cell: dict[tuple, dict[str, dict[int, float]]] = {}
    for rec in records:
        if rec.mape is None or rec.method not in (method_a, method_b):
            continue
        cell = by_cell.setdefault((rec.scenario, rec.allocation, rec.allocation_id,
                                   rec.alpha), {method_a: {}, method_b: {}})
        cell[rec.method][rec.macro_rep] = rec.mape
    rows = []
    for (scenario, allocation, alloc_id, alpha), cell in sorted(by_cell.items()):
        shared = sorted(set(cell[method_a]) & set(cell[method_b]))
        if len(shared) < 5:
            continue
        a = [cell[method_a][m] for m in shared]
        b = [cell[method_b][m] for m in shared]
        try:
            p_le = wilcoxon_signed_rank(a, b, side="less")
            p_ge = wilcoxon_signed_rank(a, b, side="greater")
        except ValueError:
            continue
        rows.append({"scenario": scenario, "allocation": allocation,
                     "allocation_id": alloc_id, "alpha": alpha,
                     "n_pairs": len(shared), "p_le": p_le, "p_ge": p_ge})
    return rows


# ---------------------------------------------------------------------------
# CSV emission
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    return format(float(x), ".17g")


def write_results_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["scenario", "allocation", "allocation_id", "method", "alpha",
                      "macro_rep", "mape", "diagnostics"])
        for r in sorted(records, key=ResultRecord.sort_key):
            out.writerow([r.scenario, r.allocation, r.allocation_id, r.method,
                          _fmt(r.alpha), r.macro_rep, _fmt(r.mape), r.diagnostics])


def write_boxplot_csv(records, path) -> None:
    """Long-format rows (one per macro replication) for box plots."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["scenario", "allocation", "method", "alpha", "macro_rep", "mape"])
        for r in sorted(records, key=ResultRecord.sort_key):
            if r.mape is None:
                continue
            out.writerow([r.scenario, r.allocation, r.method, _fmt(r.alpha),
                          r.macro_rep, _fmt(r.mape)])


def write_summary_csv(records, path) -> None:
    """Median MAPE per (scenario, allocation, method), one column per alpha."""
    alphas = sorted({r.alpha for r in records})
    groups: dict[tuple, dict[float, list[float]]] = {}
    for r in records:
        key = (r.scenario, r.allocation_id, r.allocation, r.method)
        groups.setdefault(key, {})
        if r.mape is not None:
            groups[key].setdefault(r.alpha, []).append(r.mape)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["scenario", "allocation", "method"]
                     + [f"median_mape_{a}" for a in alphas])
        for (scenario, _alloc_id, allocation, method) in sorted(groups):
            cells = groups[(scenario, _alloc_id, allocation, method)]
            meds = [(_fmt(float(np.median(cells[a]))) if cells.get(a) else "")
                    for a in alphas]
            out.writerow([scenario, allocation, method] + meds)
