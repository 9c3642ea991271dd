"""Closed-form analysis of the linear-Gaussian structural equation model.

The model is::

    U ~ N(0, sigma_u^2)
    W = a_wu U + e_w
    Z = a_zu U + e_z
    X = a_xz Z + a_xu U + e_x
    Y = a_yx X + a_yw W + a_yu U + e_y

with independent zero-mean Gaussian noises. ``(U, W, Z, X)`` are jointly
Gaussian, so every conditional needed by the bridge analysis has a closed
form. This module computes the joint covariance, Gaussian conditionals, the
pointwise relative bridge error, the conditional mutual information
``I(U; Z | W, X)``, the error bound check on a truncated-confounder variant
and the sigma sweeps behind the error-vs-information plots.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from .errors import ConfigError, DegenerateError, NumericalError, ParameterError, SampleSizeError

ORDER = ("U", "W", "Z", "X")
DENOM_FLOOR = 1e-8
ZERO_TOL = 1e-9


@dataclass(frozen=True)
class SemParams:
    """Coefficients and noise standard deviations of the SEM."""

    alpha_yx: float = 1.0
    alpha_yw: float = 1.0
    alpha_yu: float = 1.0
    alpha_wu: float = 1.0
    alpha_zu: float = 1.0
    alpha_xz: float = 1.0
    alpha_xu: float = 1.0
    sigma_u: float = 1.0
    sigma_w: float = 1.0
    sigma_z: float = 1.0
    sigma_x: float = 1.0
    sigma_y: float = 1.0

    def __post_init__(self):
        for name in ("sigma_u", "sigma_w", "sigma_z", "sigma_x", "sigma_y"):
            s = getattr(self, name)
            if not (np.isfinite(s) and s > 0):
                raise ParameterError(f"{name} must be positive, got {s}")

    def check_nonzero(self):
        """Raise unless the coefficients the identification argument needs are nonzero."""
        for name in ("alpha_yx", "alpha_yw", "alpha_yu", "alpha_zu"):
            if getattr(self, name) == 0:
                raise ParameterError(f"{name} must be nonzero")
        return self

    def replace(self, **kw) -> "SemParams":
        return replace(self, **kw)

    def lemma1_sigma_x(self) -> float:
        """sigma_x that makes ``U`` independent of ``Z`` given ``(W, X)``."""
        ratio = self.alpha_xu * self.alpha_xz / self.alpha_zu
        if ratio <= 0:
            raise ParameterError("independence condition needs a_xu * a_xz / a_zu > 0")
        return float(self.sigma_z * np.sqrt(ratio))

    @property
    def a_x(self) -> float:
        """Total coefficient of U in X."""
        return self.alpha_xz * self.alpha_zu + self.alpha_xu

    def simulate(self, n, rng, include_y=True):
        """Draw ``n`` samples; returns a dict of 1-d arrays keyed by variable name."""
        u = self.sigma_u * rng.standard_normal(n)
        w = self.alpha_wu * u + self.sigma_w * rng.standard_normal(n)
        z = self.alpha_zu * u + self.sigma_z * rng.standard_normal(n)
        x = self.alpha_xz * z + self.alpha_xu * u + self.sigma_x * rng.standard_normal(n)
        out = {"U": u, "W": w, "Z": z, "X": x}
        if include_y:
            out["Y"] = (self.alpha_yx * x + self.alpha_yw * w + self.alpha_yu * u
                        + self.sigma_y * rng.standard_normal(n))
        return out


@dataclass(frozen=True)
class GaussianJoint:
    order: tuple
    mean: np.ndarray
    cov: np.ndarray

    def index(self, names):
        return [self.order.index(n) for n in names]

    def block(self, rows, cols):
        return self.cov[np.ix_(self.index(rows), self.index(cols))]


@dataclass(frozen=True)
class ConditionalGaussian:
    """``A | B = b  ~  N(coef @ b, cov)`` for a zero-mean joint."""

    targets: tuple
    givens: tuple
    coef: np.ndarray
    cov: np.ndarray
    mean: np.ndarray | None = None

    def mean_at(self, b):
        b = np.asarray(b, dtype=float)
        return b @ self.coef.T


def sem_covariance(p: SemParams) -> GaussianJoint:
    su2 = p.sigma_u ** 2
    ax = p.a_x
    c = {
        ("U", "U"): su2,
        ("W", "W"): p.alpha_wu ** 2 * su2 + p.sigma_w ** 2,
        ("Z", "Z"): p.alpha_zu ** 2 * su2 + p.sigma_z ** 2,
        ("X", "X"): ax ** 2 * su2 + p.alpha_xz ** 2 * p.sigma_z ** 2 + p.sigma_x ** 2,
        ("W", "U"): p.alpha_wu * su2,
        ("Z", "U"): p.alpha_zu * su2,
        ("X", "U"): ax * su2,
        ("W", "Z"): p.alpha_wu * p.alpha_zu * su2,
        ("W", "X"): p.alpha_wu * ax * su2,
        ("Z", "X"): p.alpha_zu * ax * su2 + p.alpha_xz * p.sigma_z ** 2,
    }
    cov = np.empty((4, 4))
    for (a, b), v in c.items():
        i, j = ORDER.index(a), ORDER.index(b)
        cov[i, j] = cov[j, i] = v
    eig = np.linalg.eigvalsh(cov)
    if eig.min() <= 0:
        raise ParameterError(f"covariance not positive definite (min eigenvalue {eig.min():.3g})")
    return GaussianJoint(ORDER, np.zeros(4), cov)


def condition(j: GaussianJoint, targets, givens, given_values=None) -> ConditionalGaussian:
    targets, givens = tuple(targets), tuple(givens)
    if set(targets) & set(givens):
        raise ConfigError("targets and givens overlap")
    s_ab = j.block(targets, givens)
    s_bb = j.block(givens, givens)
    cond = np.linalg.cond(s_bb)
    if not np.isfinite(cond) or cond > 1e14:
        raise NumericalError(f"conditioning block is singular (condition number {cond:.3g})")
    coef = np.linalg.solve(s_bb, s_ab.T).T
    cov = j.block(targets, targets) - coef @ s_ab.T
    cov = 0.5 * (cov + cov.T)
    mean = None
    if given_values is not None:
        mean = np.asarray(given_values, dtype=float) @ coef.T
    return ConditionalGaussian(targets, givens, coef, cov, mean)


# -- relative bridge error ------------------------------------------------------

@dataclass(frozen=True)
class _Coefs:
    w_xz: np.ndarray    # E[W | x, z] coefficients on (x, z)
    u_wxz: np.ndarray   # E[U | w, x, z] on (w, x, z)
    u_wx: np.ndarray    # E[U | w, x] on (w, x)
    z_x: float          # E[Z | x] coefficient
    var_z_x: float
    var_x: float


def _coefs(p: SemParams) -> _Coefs:
    j = sem_covariance(p)
    cz = condition(j, ["Z"], ["X"])
    return _Coefs(
        condition(j, ["W"], ["X", "Z"]).coef[0],
        condition(j, ["U"], ["W", "X", "Z"]).coef[0],
        condition(j, ["U"], ["W", "X"]).coef[0],
        float(cz.coef[0, 0]),
        float(cz.cov[0, 0]),
        float(j.block(["X"], ["X"])[0, 0]),
    )


def bridge_error_pointwise(p: SemParams, x, z, denom_floor=DENOM_FLOOR, _c=None):
    """Relative error of the bridge ``E[E[Y|x,W,U] | W, x]`` at ``(x, z)``.

    Returns ``|E[Y|x,z] - E[b(W,x)|x,z]| / |E[Y|x,z]|`` elementwise. Points
    whose denominator is at or below ``denom_floor`` are marked ``nan`` so
    that trimming can discard them.
    """
    c = _coefs(p) if _c is None else _c
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    w_star = c.w_xz[0] * x + c.w_xz[1] * z
    mu_full = c.u_wxz[0] * w_star + c.u_wxz[1] * x + c.u_wxz[2] * z
    mu_wx = c.u_wx[0] * w_star + c.u_wx[1] * x
    num = np.abs(p.alpha_yu * (mu_full - mu_wx))
    den = np.abs(p.alpha_yx * x + p.alpha_yw * w_star + p.alpha_yu * mu_full)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    return np.where(den > denom_floor, r, np.nan)


def trimmed_stats(values, trim_frac):
    """Mean and std after dropping the ``trim_frac`` largest values.

    ``nan`` entries count as the largest values. Returns ``(mean, std, n_kept)``.
    """
    if not 0 <= trim_frac < 0.5:
        raise ConfigError("trim_frac must lie in [0, 0.5)")
    v = np.asarray(values, dtype=float).ravel()
    v = np.sort(np.where(np.isnan(v), np.inf, v))
    n_drop = int(np.floor(trim_frac * v.size))
    kept = v[: v.size - n_drop]
    kept = kept[np.isfinite(kept)]
    if kept.size == 0:
        raise DegenerateError("every point was excluded or trimmed")
    return float(kept.mean()), float(kept.std()), int(kept.size)


def sample_xz(p: SemParams, n_x, n_z, seed, _c=None):
    """``n_x`` treatments from the marginal, ``n_z`` proxies from ``p(Z|x)`` for each."""
    c = _coefs(p) if _c is None else _c
    rng = np.random.default_rng(seed)
    x = np.sqrt(c.var_x) * rng.standard_normal(n_x)
    z = c.z_x * x[:, None] + np.sqrt(c.var_z_x) * rng.standard_normal((n_x, n_z))
    return np.broadcast_to(x[:, None], z.shape), z


def mean_relative_error(p: SemParams, n_points=40_000, trim_frac=0.1, seed=0, n_x=200):
    """Trimmed mean and std of the pointwise relative error over the joint of ``(X, Z)``.

    ``n_x`` treatments are drawn from their marginal and ``n_points // n_x``
    proxies from ``p(Z | x)`` for each. Returns ``(mean, std, n_kept)``.
    """
    if n_points < 100:
        raise ConfigError("n_points must be at least 100")
    c = _coefs(p)
    x, z = sample_xz(p, n_x, max(1, n_points // n_x), seed, _c=c)
    return trimmed_stats(bridge_error_pointwise(p, x, z, _c=c), trim_frac)


def conditional_mi(p: SemParams) -> float:
    """``I(U; Z | W, X)`` in nats."""
    j = sem_covariance(p)
    v_wx = condition(j, ["U"], ["W", "X"]).cov[0, 0]
    v_wxz = condition(j, ["U"], ["W", "X", "Z"]).cov[0, 0]
    return max(0.0, 0.5 * float(np.log(v_wx / v_wxz)))


def cov_uz_given_wx(p: SemParams) -> float:
    """Closed-form ``Cov(U, Z | W, X)``; zero exactly when a_zu sx^2 = a_xu a_xz sz^2."""
    su2, sw2, sz2, sx2 = p.sigma_u ** 2, p.sigma_w ** 2, p.sigma_z ** 2, p.sigma_x ** 2
    awu, axz, axu, azu = p.alpha_wu, p.alpha_xz, p.alpha_xu, p.alpha_zu
    num = su2 * sw2 * (-axu * axz * sz2 + azu * sx2)
    den = (awu ** 2 * axz ** 2 * su2 * sz2 + awu ** 2 * su2 * sx2 + axu ** 2 * su2 * sw2
           + 2 * axu * axz * azu * su2 * sw2 + axz ** 2 * azu ** 2 * su2 * sw2
           + axz ** 2 * sw2 * sz2 + sw2 * sx2)
    return float(num / den)


# -- bound check on the truncated-confounder model --------------------------------

def _tn_standard(m, s, r):
    """Standardized bounds, flipped so the interval never sits in the upper tail."""
    a, b = (-r - m) / s, (r - m) / s
    flip = (a + b) > 0
    a, b = np.where(flip, -b, a), np.where(flip, -a, b)
    log_z = special.log_ndtr(b) + np.log1p(-np.exp(special.log_ndtr(a) - special.log_ndtr(b)))
    return a, b, np.where(flip, -1.0, 1.0), log_z


def _log_phi(t):
    return -0.5 * t * t - 0.5 * np.log(2 * np.pi)


def _tn_mean(m, s, r):
    a, b, sign, log_z = _tn_standard(m, s, r)
    k = np.exp(_log_phi(a) - log_z) - np.exp(_log_phi(b) - log_z)
    return m + s * sign * k


def _tn_logpdf(u, m, s, r):
    _, _, _, log_z = _tn_standard(m, s, r)
    t = (u - m) / s
    out = _log_phi(t) - np.log(s) - log_z
    return np.where(np.abs(u) <= r, out, -np.inf)


def _tn_draw(m, s, r, rng):
    a, b, sign, _ = _tn_standard(m, s, r)
    lo, hi = special.ndtr(a), special.ndtr(b)
    t = special.ndtri(lo + rng.random(np.shape(m)) * (hi - lo))
    return np.clip(m + s * sign * np.clip(t, a, b), -r, r)


class TruncatedSem:
    """The SEM with ``U`` restricted to ``|U| <= R``.

    Every posterior of ``U`` given linear-Gaussian observations is a Gaussian
    truncated to ``[-R, R]``; the helpers return its untruncated location and
    scale, ``(m, s)``.
    """

    def __init__(self, p: SemParams, radius):
        self.p, self.r = p, float(radius)

    def _post(self, prec, lin):
        prec = prec + 1.0 / self.p.sigma_u ** 2
        return lin / prec, np.sqrt(1.0 / prec) * np.ones_like(lin)

    def u_given_x(self, x):
        p = self.p
        vx = p.alpha_xz ** 2 * p.sigma_z ** 2 + p.sigma_x ** 2
        return self._post(p.a_x ** 2 / vx, p.a_x * x / vx)

    def u_given_xz(self, x, z, w=None):
        p = self.p
        prec = p.alpha_zu ** 2 / p.sigma_z ** 2 + p.alpha_xu ** 2 / p.sigma_x ** 2
        lin = p.alpha_zu * z / p.sigma_z ** 2 + p.alpha_xu * (x - p.alpha_xz * z) / p.sigma_x ** 2
        if w is not None:
            prec = prec + p.alpha_wu ** 2 / p.sigma_w ** 2
            lin = lin + p.alpha_wu * w / p.sigma_w ** 2
        return self._post(prec, lin)

    def u_given_wx(self, w, x):
        p = self.p
        vx = p.alpha_xz ** 2 * p.sigma_z ** 2 + p.sigma_x ** 2
        prec = p.alpha_wu ** 2 / p.sigma_w ** 2 + p.a_x ** 2 / vx
        lin = p.alpha_wu * w / p.sigma_w ** 2 + p.a_x * x / vx
        return self._post(prec, lin)

    def z_given_ux(self, u, x):
        p = self.p
        prec = 1.0 / p.sigma_z ** 2 + p.alpha_xz ** 2 / p.sigma_x ** 2
        lin = p.alpha_zu * u / p.sigma_z ** 2 + p.alpha_xz * (x - p.alpha_xu * u) / p.sigma_x ** 2
        return lin / prec, np.sqrt(1.0 / prec)

    def simulate(self, n, rng):
        p = self.p
        u = _tn_draw(np.zeros(n), p.sigma_u * np.ones(n), self.r, rng)
        w = p.alpha_wu * u + p.sigma_w * rng.standard_normal(n)
        z = p.alpha_zu * u + p.sigma_z * rng.standard_normal(n)
        x = p.alpha_xz * z + p.alpha_xu * u + p.sigma_x * rng.standard_normal(n)
        return u, w, z, x

    def conditional_mi(self, n, rng):
        """Monte Carlo ``I(U; Z | W, X)`` and its standard error."""
        u, w, z, x = self.simulate(n, rng)
        lp_full = _tn_logpdf(u, *self.u_given_xz(x, z, w), self.r)
        lp_wx = _tn_logpdf(u, *self.u_given_wx(w, x), self.r)
        d = lp_full - lp_wx
        if np.abs(d).max() < ZERO_TOL:
            # posteriors coincide up to rounding
            return 0.0, 0.0
        return float(max(d.mean(), 0.0)), float(d.std() / np.sqrt(n))


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    satisfied: bool
    mi: float
    lhs_se: float
    radius: float


def theorem3_bound_check(p: SemParams, truncation_R=None, n_x=40, n_z=40, n_w=50,
                         n_mi=100_000, seed=0) -> BoundCheck:
    """Compare the average bridge error with ``C R sqrt(2 I(U;Z|W,X))``.

    Works on the model with ``U`` truncated to ``|U| <= R`` (default
    ``3 sigma_u``) so that the bounded-support hypothesis holds, and with
    ``C = |a_yu|``, the Lipschitz constant of ``E[Y | x, W, U]`` in ``U``.
    The left side is a nested Monte Carlo average over ``x ~ p(X)``,
    ``z ~ p(Z | x)`` and ``W ~ p(W | x, z)`` of
    ``|a_yu (E[U | W, x, z] - E[U | W, x])|``; inner posterior means are exact.
    Averaging the per-``x`` bound over ``x`` keeps it valid by Jensen.
    """
    r = 3.0 * p.sigma_u if truncation_R is None else float(truncation_R)
    m = TruncatedSem(p, r)
    rng = np.random.default_rng(seed)
    _, _, _, x = m.simulate(n_x, rng)
    xx = np.repeat(x, n_z)
    uu = _tn_draw(*m.u_given_x(xx), r, rng)
    mz, sz = m.z_given_ux(uu, xx)
    zz = mz + sz * rng.standard_normal(xx.size)
    x3 = np.repeat(xx, n_w)
    z3 = np.repeat(zz, n_w)
    u3 = _tn_draw(*m.u_given_xz(x3, z3), r, rng)
    w3 = p.alpha_wu * u3 + p.sigma_w * rng.standard_normal(x3.size)
    delta = _tn_mean(*m.u_given_xz(x3, z3, w3), r) - _tn_mean(*m.u_given_wx(w3, x3), r)
    eta = np.abs(p.alpha_yu * delta.reshape(-1, n_w).mean(axis=1))
    lhs = float(eta.mean())
    lhs_se = float(eta.reshape(n_x, n_z).mean(axis=1).std() / np.sqrt(n_x))
    mi, mi_se = m.conditional_mi(n_mi, rng)
    c = abs(p.alpha_yu)
    rhs = c * r * np.sqrt(2.0 * mi)
    rhs_se = c * r * mi_se / np.sqrt(2.0 * mi) if mi > 0 else 0.0
    se = np.hypot(lhs_se, rhs_se)
    atol = ZERO_TOL * max(c * r, 1.0)
    if se > atol and abs(rhs - lhs) < 3.0 * se:
        raise SampleSizeError(f"bound margin {rhs - lhs:.3g} within 3 standard errors ({se:.3g})")
    return BoundCheck(lhs, float(rhs), bool(lhs <= rhs + atol), mi, lhs_se, r)


# -- sweeps -------------------------------------------------------------------------

FIG2_SIGMAS = (0.1, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class SweepCell:
    sigma_w: float
    sigma_z: float
    sigma_x: float
    mean_r: float
    std_r: float
    mi: float
    n_kept: int
    seed: int


@dataclass
class SweepConfig:
    sigma_w: tuple = FIG2_SIGMAS
    sigma_z: tuple = FIG2_SIGMAS
    sigma_x: tuple = (0.1,)
    base: SemParams = field(default_factory=lambda: SemParams(sigma_u=10.0))
    n_x: int = 200
    n_z: int = 200
    trim_frac: float = 0.1
    seed: int = 0
    common_random_numbers: bool = True


def cell_seed(base_seed, index, common=True):
    if common:
        return int(base_seed)
    return int(np.random.SeedSequence(base_seed, spawn_key=(index,)).generate_state(1)[0])


def sweep(cfg: SweepConfig) -> list:
    """One :class:`SweepCell` per ``(sigma_x, sigma_z, sigma_w)`` combination.

    With ``common_random_numbers`` every cell reuses the base seed, so cells
    differ only through their parameters.
    """
    if not (cfg.sigma_w and cfg.sigma_z and cfg.sigma_x):
        raise ConfigError("sweep grids must be nonempty")
    cells = []
    combos = itertools.product(cfg.sigma_x, cfg.sigma_z, cfg.sigma_w)
    for idx, (sx, sz, sw) in enumerate(combos):
        p = cfg.base.replace(sigma_w=sw, sigma_z=sz, sigma_x=sx)
        seed = cell_seed(cfg.seed, idx, cfg.common_random_numbers)
        try:
            mean, std, kept = mean_relative_error(p, cfg.n_x * cfg.n_z, cfg.trim_frac,
                                                  seed=seed, n_x=cfg.n_x)
            mi = conditional_mi(p)
        except NumericalError as exc:
            raise type(exc)(f"cell sigma_w={sw}, sigma_z={sz}, sigma_x={sx}: {exc}") from exc
        cells.append(SweepCell(sw, sz, sx, mean, std, mi, kept, seed))
    return cells


SWEEP_COLUMNS = ("sigma_w", "sigma_z", "sigma_x", "mean_r", "std_r", "mi_nats", "n_kept", "seed")


def sweep_to_csv(cells, fh=None) -> str:
    buf = io.StringIO() if fh is None else fh
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(SWEEP_COLUMNS)
    for c in cells:
        wr.writerow([repr(c.sigma_w), repr(c.sigma_z), repr(c.sigma_x), repr(c.mean_r),
                     repr(c.std_r), repr(c.mi), c.n_kept, c.seed])
    return buf.getvalue() if fh is None else ""
