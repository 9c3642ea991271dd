"""Time-to-event tools: weighted Cox partial likelihood, CoxPH baselines,
propensity weights, proxy bucketing, concordance and Kaplan-Meier.

Risk sets use ``y_j >= y_i`` and tied event times share one risk set
(Breslow). All weights enter multiplicatively: each event contributes
``w_i * (rho_i - log sum_{j in R_i} w_j exp(rho_j))``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .autodiff import Tensor, custom_op
from .errors import ConfigError, ContractError, DegenerateError, NumericalError

Z95 = 1.959963984540054


def _check(times, events, weights, n):
    times = np.asarray(times, dtype=float).ravel()
    events = np.asarray(events, dtype=float).ravel()
    weights = np.ones(n) if weights is None else np.asarray(weights, dtype=float).ravel()
    if not (times.size == events.size == weights.size == n):
        raise ConfigError("rho, times, events and weights must have equal length")
    if np.any(times <= 0):
        raise ConfigError("times must be positive")
    if np.any(weights < 0):
        raise ConfigError("weights must be nonnegative")
    if not np.any(events > 0):
        raise DegenerateError("no events: partial likelihood undefined")
    return times, events, weights


class _RiskSets:
    """Sorted-time bookkeeping shared by value and gradient evaluations."""

    def __init__(self, times):
        self.order = np.argsort(times, kind="stable")
        ts = times[self.order]
        self.first = np.searchsorted(ts, ts, side="left")   # start of each tie block
        self.last = np.searchsorted(ts, ts, side="right") - 1
        self.inv = np.empty_like(self.order)
        self.inv[self.order] = np.arange(times.size)

    def log_denominators(self, rho, weights):
        """``log sum_{j: y_j >= y_i} w_j exp(rho_j)`` for each record, original order."""
        r, w = rho[self.order], weights[self.order]
        with np.errstate(divide="ignore"):
            lw = np.log(w)
        a = lw + r
        # reverse cumulative log-sum-exp, then read it at the start of each tie block
        rev = np.logaddexp.accumulate(a[::-1])[::-1]
        return rev[self.first][self.inv]


_RS_CACHE = [None, None]   # last (times, _RiskSets); optimizers reuse one time vector


def _risk_sets(times):
    t, rs = _RS_CACHE
    if t is None or t.shape != times.shape or not np.array_equal(t, times):
        rs = _RiskSets(times)
        _RS_CACHE[:] = [times.copy(), rs]
    return rs


def _loglik_and_grad(rho, times, events, weights):
    rs = _risk_sets(times)
    log_s = rs.log_denominators(rho, weights)
    we = weights * events
    mask = we > 0
    ll = float(np.sum(we[mask] * (rho[mask] - log_s[mask])))
    # d ll / d rho_k = we_k - w_k exp(rho_k) * sum_{i event, y_i <= y_k} we_i / S_i
    c = np.zeros_like(rho)
    c[mask] = we[mask] * np.exp(-log_s[mask])
    cum = np.cumsum(c[rs.order])[rs.last][rs.inv]
    grad = we - weights * np.exp(rho) * cum
    return ll, grad


def cox_partial_loglik(rho, times, events, weights=None):
    rho = np.asarray(rho, dtype=float).ravel()
    times, events, weights = _check(times, events, weights, rho.size)
    if not np.all(np.isfinite(rho)):
        raise NumericalError("risk scores must be finite")
    return _loglik_and_grad(rho, times, events, weights)[0]


def cox_loss(rho: Tensor, times, events, weights=None, normalize=None) -> Tensor:
    """Negative partial log-likelihood of the column ``rho`` as a graph node.

    Divided by ``normalize`` (default: number of records).
    """
    r = rho.value.ravel()
    times, events, weights = _check(times, events, weights, r.size)
    if not np.all(np.isfinite(r)):
        raise NumericalError("risk scores must be finite")
    ll, g = _loglik_and_grad(r, times, events, weights)
    k = float(r.size if normalize is None else normalize)
    shape = rho.value.shape
    return custom_op([rho], np.array(-ll / k), lambda up: ((-up / k) * g.reshape(shape),))


# -- CoxPH with covariates -----------------------------------------------------------

@dataclass(frozen=True)
class CoxFit:
    beta: np.ndarray
    se: np.ndarray
    se_model: np.ndarray
    se_robust: np.ndarray
    loglik: float
    iterations: int

    @property
    def hr(self):
        return float(np.exp(self.beta[0]))

    def ci(self, j=0):
        return (float(np.exp(self.beta[j] - Z95 * self.se[j])),
                float(np.exp(self.beta[j] + Z95 * self.se[j])))


def _cox_derivatives(beta, X, times, events, weights, rs):
    """Log-likelihood, score, observed information and per-record score residuals."""
    eta = X @ beta
    eta = eta - eta.max()
    o = rs.order
    w, e = weights[o], events[o]
    Xs = X[o]
    r = w * np.exp(eta[o])
    first = rs.first
    rcs = lambda a: np.cumsum(a[::-1], axis=0)[::-1]
    s0 = rcs(r)[first]
    s1 = rcs(r[:, None] * Xs)[first]
    s2 = rcs(r[:, None, None] * Xs[:, :, None] * Xs[:, None, :])[first]
    we = w * e
    m = we > 0
    xbar = s1 / s0[:, None]
    ll = float(np.sum(we[m] * (eta[o][m] - np.log(s0[m]))))
    score = np.sum(we[m, None] * (Xs[m] - xbar[m]), axis=0)
    v = s2 / s0[:, None, None] - xbar[:, :, None] * xbar[:, None, :]
    info = np.einsum("i,ijk->jk", we[m], v[m])
    # Lin-Wei score residuals: event term minus the compensator over risk sets
    c0 = np.where(m, we / s0, 0.0)
    c1 = c0[:, None] * xbar
    cum0 = np.cumsum(c0)[rs.last]
    cum1 = np.cumsum(c1, axis=0)[rs.last]
    ex = np.exp(eta[o])
    resid_sorted = e[:, None] * (Xs - xbar) - ex[:, None] * (Xs * cum0[:, None] - cum1)
    resid = np.empty_like(resid_sorted)
    resid[o] = resid_sorted
    return ll, score, info, resid


def fit_coxph(X, times, events, weights=None, max_iter=100, tol=1e-9):
    """Weighted CoxPH by Newton-Raphson with step halving.

    ``se_model`` is the inverse observed information. ``se`` equals it for
    uniform weights and is the robust sandwich otherwise, which remains
    valid when the weights are estimated propensity weights.
    """
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    n, p = X.shape
    times, events, weights = _check(times, events, weights, n)
    rs = _RiskSets(times)
    beta = np.zeros(p)
    ll, score, info, _ = _cox_derivatives(beta, X, times, events, weights, rs)
    trace = []
    for it in range(1, max_iter + 1):
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular information matrix at iteration {it}") from exc
        t = 1.0
        while True:
            nb = beta + t * step
            nll, nscore, ninfo, _ = _cox_derivatives(nb, X, times, events, weights, rs)
            if nll >= ll - 1e-12 or t < 1e-8:
                break
            t *= 0.5
        trace.append((it, nll, float(np.abs(nb - beta).max())))
        done = abs(nll - ll) < tol * (1.0 + abs(ll)) and np.abs(nb - beta).max() < 1e-7
        beta, ll, score, info = nb, nll, nscore, ninfo
        if done:
            break
    else:
        raise NumericalError(f"CoxPH did not converge in {max_iter} iterations; trace {trace[-3:]}")
    _, _, info, resid = _cox_derivatives(beta, X, times, events, weights, rs)
    cov = np.linalg.inv(info)
    se_model = np.sqrt(np.diag(cov))
    u = resid * weights[:, None]
    se_robust = np.sqrt(np.diag(cov @ (u.T @ u) @ cov))
    se = se_model if np.allclose(weights, weights[0]) else se_robust
    return CoxFit(beta, se, se_model, se_robust, ll, it)


def fit_coxph_treatment_only(times, events, x, weights=None):
    x = np.asarray(x, dtype=float).ravel()
    e = np.asarray(events, dtype=float).ravel()
    if not (np.any(e[x == 1] > 0) and np.any(e[x == 0] > 0)):
        raise DegenerateError("both treatment arms need events")
    return fit_coxph(x, times, events, weights)


# -- propensity weights -----------------------------------------------------------------

WEIGHT_SCHEMES = ("uniform", "ipw", "ow")
PROPENSITY_CLIP = 1e-3


@dataclass(frozen=True)
class PropensityModel:
    """Linear logistic model for ``P(X = 1 | w, z)``."""

    coef: np.ndarray
    intercept: float

    def predict(self, covariates):
        eta = np.asarray(covariates, dtype=float) @ self.coef + self.intercept
        s = 0.5 * (1.0 + np.tanh(0.5 * eta))
        return np.clip(s, PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)


def fit_propensity(covariates, x):
    from sklearn.linear_model import LogisticRegression

    c = np.asarray(covariates, dtype=float)
    c = c[:, None] if c.ndim == 1 else c
    x = np.asarray(x, dtype=float).ravel()
    if np.unique(x).size != 2:
        raise DegenerateError("propensity model needs both treatment classes")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        try:
            lr = LogisticRegression(penalty=None, max_iter=1000, tol=1e-10).fit(c, x)
        except Warning as exc:   # sklearn signals non-convergence by a warning
            raise NumericalError(f"propensity fit did not converge: {exc}") from exc
    return PropensityModel(lr.coef_[0].copy(), float(lr.intercept_[0]))


def scheme_weights(x, s, scheme):
    x = np.asarray(x, dtype=float).ravel()
    if scheme == "uniform":
        return np.ones_like(x)
    s = np.clip(np.asarray(s, dtype=float).ravel(), PROPENSITY_CLIP, 1.0 - PROPENSITY_CLIP)
    if scheme == "ipw":
        return x / s + (1.0 - x) / (1.0 - s)
    if scheme == "ow":
        return x * (1.0 - s) + (1.0 - x) * s
    raise ConfigError(f"unknown weight scheme {scheme!r}; expected one of {WEIGHT_SCHEMES}")


def propensity_and_weights(ds, scheme):
    """Per-record weights for ``ds`` under ``scheme``; propensity uses ``(w, z)``."""
    if scheme not in WEIGHT_SCHEMES:
        raise ConfigError(f"unknown weight scheme {scheme!r}; expected one of {WEIGHT_SCHEMES}")
    if scheme == "uniform":
        return np.ones(ds.n)
    cov = np.hstack([ds.w, ds.z])
    model = fit_propensity(cov, ds.x)
    return scheme_weights(ds.x, model.predict(cov), scheme)


# -- bridge on survival data --------------------------------------------------------------

def train_survival_bridge(ds, sampler, cfg, weights=None, init=None):
    """Fit a bridge whose MC-averaged score is the Cox log-relative hazard.

    ``init`` is a fitted model of the same shape to start the optimizer from.
    """
    from .bridge import BridgeModel, train

    if not ds.survival:
        raise ConfigError("train_survival_bridge needs survival records")
    cfg = replace(cfg, outcome="cox", binary_x=True, debias=False)
    model = BridgeModel(ds.z.shape[1], ds.w.shape[1], cfg)
    if init is not None:
        model.load_state(init.state())
    return train(model, ds, sampler, weights=weights)


@dataclass(frozen=True)
class HazardRatio:
    hr: float
    ci_lo: float | None
    ci_hi: float | None
    log_hr_runs: np.ndarray

    @property
    def has_ci(self):
        return self.ci_lo is not None


MIN_CI_RUNS = 10


def log_hr_contrast(model, w_pool, k_w=None, k_eps=None, seed=0):
    """Mean of ``b(W, 1) - b(W, 0)`` over ``W`` resampled from ``w_pool``."""
    pool = np.asarray(model.w_pool if w_pool is None else w_pool, dtype=float)
    rng = np.random.default_rng(seed)
    if k_w is not None:
        pool = pool[rng.integers(0, pool.shape[0], k_w)]
    s = int(rng.integers(2 ** 32))
    # same eps stream for both arms
    b1 = model.bridge_value(pool, np.ones(pool.shape[0]), k_eps, seed=s)
    b0 = model.bridge_value(pool, np.zeros(pool.shape[0]), k_eps, seed=s)
    return float(np.mean(b1 - b0))


def risk_scores(model, sampler, x, z, k_w=100, seed=0):
    """``rho_i``: mean of ``b(W, x_i)`` over ``W ~ p(W | x_i, z_i)``."""
    rng = np.random.default_rng(seed)
    w = sampler.sample(x, z, k_w, rng)
    n, k, dw = w.shape
    xs = np.repeat(np.asarray(x, dtype=float).ravel(), k)
    vals = model.bridge_value(w.reshape(n * k, dw), xs, seed=int(rng.integers(2 ** 32)))
    return vals.reshape(n, k).mean(axis=1)


def quantile_ci(log_hr_runs, level=0.95):
    a = np.sort(np.asarray(log_hr_runs, dtype=float))
    if a.size < MIN_CI_RUNS:
        return None, None
    q = np.quantile(a, [(1 - level) / 2, (1 + level) / 2])
    return float(np.exp(q[0])), float(np.exp(q[1]))


def hazard_ratio(models, w_pool=None, k_w=None, k_eps=None, seeds=(0,)):
    """HR from one or more trained bridges.

    Run ``r`` pairs ``models[r % len(models)]`` with ``seeds[r]``. The point
    estimate is ``exp`` of the mean log contrast; the 95% interval is the
    2.5/97.5% quantiles over runs and is withheld below ten runs.
    """
    models = list(models) if isinstance(models, (list, tuple)) else [models]
    seeds = list(seeds)
    if not models or not seeds:
        raise ContractError("need at least one model and one seed")
    runs = np.array([log_hr_contrast(models[r % len(models)], w_pool, k_w, k_eps, s)
                     for r, s in enumerate(seeds)])
    lo, hi = quantile_ci(runs)
    if lo is None:
        warnings.warn(f"{runs.size} runs is too few for a quantile CI; reporting the point only")
    return HazardRatio(float(np.exp(runs.mean())), lo, hi, runs)


# -- proxy bucketing ----------------------------------------------------------------------

def _standardize(c):
    s = c.std(axis=0)
    if np.any(s == 0):
        raise DegenerateError("a covariate is constant")
    return (c - c.mean(axis=0)) / s


def bucket_proxies(covariates, x, times, events):
    """Split covariates into outcome proxies ``W`` and treatment proxies ``Z``.

    Outcome strength is ``|beta_j|`` of a CoxPH fit on ``(x, C)``; treatment
    strength is ``|coef_j|`` of a logistic fit of ``x`` on ``C``, both with
    standardized ``C``. ``W`` and ``Z`` take turns picking the strongest
    remaining covariate on their own ranking, ``W`` first.
    """
    c = np.asarray(covariates, dtype=float)
    x = np.asarray(x, dtype=float).ravel()
    if c.ndim != 2 or c.shape[1] < 2:
        raise ConfigError("bucketing needs at least two covariates")
    cs = _standardize(c)
    try:
        out = np.abs(fit_coxph(np.hstack([x[:, None], cs]), times, events).beta[1:])
        trt = np.abs(fit_propensity(cs, x).coef)
    except (NumericalError, np.linalg.LinAlgError) as exc:
        warnings.warn(f"bucketing fits failed ({exc}); ranking by absolute correlation")
        logt = np.log(np.asarray(times, dtype=float))
        out = np.abs([np.corrcoef(cs[:, j], logt)[0, 1] for j in range(cs.shape[1])])
        trt = np.abs([np.corrcoef(cs[:, j], x)[0, 1] for j in range(cs.shape[1])])
    ranks = {"W": list(np.argsort(-out, kind="stable")), "Z": list(np.argsort(-trt, kind="stable"))}
    taken, buckets = set(), {"W": [], "Z": []}
    turn = "W"
    while len(taken) < c.shape[1]:
        j = next(j for j in ranks[turn] if j not in taken)
        buckets[turn].append(int(j))
        taken.add(j)
        turn = "Z" if turn == "W" else "W"
    return sorted(buckets["W"]), sorted(buckets["Z"])


# -- evaluation ------------------------------------------------------------------------------

def concordance_index(rho, times, events, chunk=2048):
    """Harrell's C: pairs with ``e_i = 1`` and ``y_i < y_j`` are comparable and
    concordant when ``rho_i > rho_j``; ties in ``rho`` count one half."""
    rho = np.asarray(rho, dtype=float).ravel()
    t = np.asarray(times, dtype=float).ravel()
    e = np.asarray(events, dtype=float).ravel()
    if not (rho.size == t.size == e.size):
        raise ConfigError("rho, times and events must have equal length")
    ev = np.flatnonzero(e > 0)
    num = den = 0.0
    for s in range(0, ev.size, chunk):
        i = ev[s:s + chunk]
        comp = t[i, None] < t[None, :]
        d = rho[i, None] - rho[None, :]
        num += np.sum(comp & (d > 0)) + 0.5 * np.sum(comp & (d == 0))
        den += np.sum(comp)
    if den == 0:
        raise DegenerateError("no comparable pairs; concordance is undefined")
    return float(num / den)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function: ``value[k]`` holds on ``[time[k], time[k+1])``."""

    time: np.ndarray
    value: np.ndarray

    def __call__(self, t):
        k = np.searchsorted(self.time, np.asarray(t, dtype=float), side="right") - 1
        return np.where(k >= 0, self.value[np.maximum(k, 0)], 1.0)


def _product_limit(t, e):
    ut = np.unique(t[e > 0])
    at_risk = np.array([np.sum(t >= u) for u in ut], dtype=float)
    deaths = np.array([np.sum((t == u) & (e > 0)) for u in ut], dtype=float)
    surv = np.cumprod(1.0 - deaths / at_risk)
    return StepFunction(np.concatenate([[0.0], ut]), np.concatenate([[1.0], surv]))


def kaplan_meier(times, events, group=None):
    """Product-limit survival curve for each group label (one curve if ``group`` is None)."""
    t = np.asarray(times, dtype=float).ravel()
    e = np.asarray(events, dtype=float).ravel()
    g = np.zeros(t.size) if group is None else np.asarray(group).ravel()
    if not (t.size == e.size == g.size) or t.size == 0:
        raise ConfigError("times, events and group must be nonempty and of equal length")
    return {k.item() if hasattr(k, "item") else k: _product_limit(t[g == k], e[g == k])
            for k in np.unique(g)}
