"""Conditional samplers for ``p(W | x, z)``.

:class:`GaussianSampler` is a diagonal Gaussian whose mean and standard
deviation come from a shared ReLU trunk with two heads; it is fitted by
maximum likelihood on stage-1 data. :class:`ExactSemSampler` exposes the
closed-form conditional of the linear SEM behind the same interface.

Both return moments and draws in the original (unstandardized) units.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .autodiff import AdamW, Mlp, MlpSpec, Tensor, backward
from .errors import ConfigError, StateError, TrainingDivergence
from .sem import SemParams, condition, sem_covariance

STD_FLOOR = 1e-4


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, a):
        a = np.asarray(a, dtype=float)
        a = a[:, None] if a.ndim == 1 else a
        s = a.std(axis=0)
        return cls(a.mean(axis=0), np.where(s > 0, s, 1.0))

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        a = a[:, None] if a.ndim == 1 else a
        return (a - self.mean) / self.scale

    def invert(self, a):
        return np.asarray(a) * self.scale + self.mean


def _xz(x, z):
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    z = np.asarray(z, dtype=float)
    z = z.reshape(x.shape[0], -1)
    return np.hstack([x, z])


def gaussian_kl(m1, s1, m2, s2):
    """``KL(N(m1, s1^2) || N(m2, s2^2))`` elementwise."""
    return np.log(s2 / s1) + (s1 ** 2 + (m1 - m2) ** 2) / (2.0 * s2 ** 2) - 0.5


class _SamplerBase:
    def moments(self, x, z):
        raise NotImplementedError

    def sample(self, x, z, k, rng):
        """Draws of shape ``(n, k, dim_w)``."""
        mean, std = self.moments(x, z)
        xi = rng.standard_normal((mean.shape[0], k, mean.shape[1]))
        return mean[:, None, :] + std[:, None, :] * xi


def sample_w(model, x, z, k=100, seed=0):
    if k < 1:
        raise ConfigError("k must be at least 1")
    return model.sample(x, z, k, np.random.default_rng(seed))


@dataclass(frozen=True)
class SamplerConfig:
    hidden: tuple = (32, 64, 16)
    lr: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 256
    max_epochs: int = 400
    patience: int = 30
    lr_halvings: int = 3
    val_frac: float = 0.1
    seed: int = 0


class GaussianSampler(_SamplerBase):
    """Diagonal Gaussian ``p(W | x, z)`` with network mean and softplus std."""

    def __init__(self, dim_in, dim_w, cfg: SamplerConfig = SamplerConfig()):
        self.cfg = cfg
        self.dim_in, self.dim_w = dim_in, dim_w
        widths = (dim_in,) + tuple(cfg.hidden)
        self.trunk = Mlp(MlpSpec(widths, ("relu",) * len(cfg.hidden), cfg.seed))
        self.mean_head = Mlp(MlpSpec((widths[-1], dim_w), ("linear",), cfg.seed + 1))
        self.std_head = Mlp(MlpSpec((widths[-1], dim_w), ("softplus",), cfg.seed + 2))
        self.in_scale = None
        self.out_scale = None
        self.history = []

    @property
    def params(self):
        return self.trunk.params + self.mean_head.params + self.std_head.params

    @property
    def fitted(self):
        return self.in_scale is not None

    def _forward(self, h):
        t = self.trunk(h)
        return self.mean_head(t), self.std_head(t) + STD_FLOOR

    def _nll(self, h, w):
        mu, sd = self._forward(h)
        r = (Tensor(w) - mu) / sd
        return (sd.log() + 0.5 * r.square()).mean()

    def _nll_value(self, h, w):
        mu, sd = self._std_moments(h)
        return float(np.mean(np.log(sd) + 0.5 * ((w - mu) / sd) ** 2))

    def _std_moments(self, h):
        t = self.trunk.predict(h)
        return self.mean_head.predict(t), self.std_head.predict(t) + STD_FLOOR

    def fit(self, x, z, w):
        cfg = self.cfg
        h_raw = _xz(x, z)
        w = np.asarray(w, dtype=float).reshape(h_raw.shape[0], -1)
        if h_raw.shape[0] < 100:
            raise ConfigError("sampler fit needs at least 100 stage-1 records")
        if h_raw.shape[1] != self.dim_in or w.shape[1] != self.dim_w:
            raise ConfigError("sampler dimensions do not match the data")
        self.in_scale = Standardizer.fit(h_raw)
        self.out_scale = Standardizer.fit(w)
        h, ws = self.in_scale(h_raw), self.out_scale(w)
        rng = np.random.default_rng(cfg.seed)
        perm = rng.permutation(h.shape[0])
        n_val = max(1, int(round(cfg.val_frac * h.shape[0])))
        vi, ti = perm[:n_val], perm[n_val:]
        opt = AdamW(self.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
        best = (self._nll_value(h[vi], ws[vi]), [p.value.copy() for p in self.params])
        self.history = [(0, float("nan"), best[0])]
        stale, halvings = 0, 0
        for epoch in range(1, cfg.max_epochs + 1):
            order = rng.permutation(ti)
            tot = 0.0
            for s in range(0, order.size, cfg.batch_size):
                b = order[s:s + cfg.batch_size]
                opt.zero_grad()
                loss = self._nll(h[b], ws[b])
                if not np.isfinite(loss.value):
                    raise TrainingDivergence("sampler loss is not finite", checkpoint=best[1])
                backward(loss)
                opt.step()
                tot += float(loss.value) * b.size
            val = self._nll_value(h[vi], ws[vi])
            self.history.append((epoch, tot / ti.size, val))
            if val < best[0]:
                best, stale = (val, [p.value.copy() for p in self.params]), 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    if halvings >= cfg.lr_halvings:
                        break
                    # plateau: restart from the best point with half the step
                    halvings, stale = halvings + 1, 0
                    opt.lr *= 0.5
                    for p, a in zip(self.params, best[1]):
                        p.value = a.copy()
        for p, a in zip(self.params, best[1]):
            p.value = a
        return self

    def moments(self, x, z):
        if not self.fitted:
            raise StateError("sampler is not fitted")
        mu, sd = self._std_moments(self.in_scale(_xz(x, z)))
        return self.out_scale.invert(mu), sd * self.out_scale.scale

    # -- checkpoint ------------------------------------------------------------

    def save(self, path):
        if not self.fitted:
            raise StateError("sampler is not fitted")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        arrays = {f"p{i}": p.value for i, p in enumerate(self.params)}
        arrays.update(in_mean=self.in_scale.mean, in_scale=self.in_scale.scale,
                      out_mean=self.out_scale.mean, out_scale=self.out_scale.scale)
        np.savez(path.with_suffix(".npz"), **arrays)
        manifest = {"kind": "gaussian_sampler", "dim_in": self.dim_in, "dim_w": self.dim_w,
                    "config": asdict(self.cfg),
                    "shapes": [list(p.value.shape) for p in self.params]}
        path.with_suffix(".json").write_text(json.dumps(manifest, indent=1) + "\n")
        return path.with_suffix(".npz")

    @classmethod
    def load(cls, path):
        path = Path(path)
        manifest = json.loads(path.with_suffix(".json").read_text())
        cfg = manifest["config"]
        cfg["hidden"] = tuple(cfg["hidden"])
        model = cls(manifest["dim_in"], manifest["dim_w"], SamplerConfig(**cfg))
        with np.load(path.with_suffix(".npz")) as f:
            for i, p in enumerate(model.params):
                p.value = f[f"p{i}"].copy()
            model.in_scale = Standardizer(f["in_mean"], f["in_scale"])
            model.out_scale = Standardizer(f["out_mean"], f["out_scale"])
        return model


def fit_sampler(x, z, w, cfg: SamplerConfig = SamplerConfig()):
    h = _xz(x, z)
    w = np.asarray(w, dtype=float).reshape(h.shape[0], -1)
    return GaussianSampler(h.shape[1], w.shape[1], cfg).fit(x, z, w)


class ExactSemSampler(_SamplerBase):
    """Closed-form ``p(W | x, z)`` for the linear SEM (scalar x and z)."""

    def __init__(self, p: SemParams):
        self.p = p
        c = condition(sem_covariance(p), ["W"], ["X", "Z"])
        self.coef = c.coef[0]
        self.std = float(np.sqrt(c.cov[0, 0]))

    def moments(self, x, z):
        h = _xz(x, z)
        if h.shape[1] != 2:
            raise ConfigError("exact SEM sampler takes scalar x and z")
        mean = (h @ self.coef)[:, None]
        return mean, np.full_like(mean, self.std)


def exact_sem_sampler(p: SemParams) -> ExactSemSampler:
    return ExactSemSampler(p)


def sampler_kl_grid(fitted, exact: ExactSemSampler, n_grid=10):
    """Mean ``KL(exact || fitted)`` over an ``n_grid x n_grid`` quantile grid of ``(x, z)``.

    ``x`` runs over marginal quantiles 5%..95%; for each ``x``, ``z`` runs
    over the same quantiles of ``p(Z | x)``.
    """
    from scipy.stats import norm

    j = sem_covariance(exact.p)
    q = norm.ppf(np.linspace(0.05, 0.95, n_grid))
    var_x = j.block(["X"], ["X"])[0, 0]
    cz = condition(j, ["Z"], ["X"])
    x = np.repeat(np.sqrt(var_x) * q, n_grid)
    z = cz.coef[0, 0] * x + np.sqrt(cz.cov[0, 0]) * np.tile(q, n_grid)
    m1, s1 = exact.moments(x, z)
    m2, s2 = fitted.moments(x, z)
    return float(gaussian_kl(m1, s1, m2, s2).mean())
