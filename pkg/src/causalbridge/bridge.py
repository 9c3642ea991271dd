"""Causal bridge learner.

Three model variants share one training loop:

``cb`` (direct)
    a network ``b(w, x)``; the bridge loss compares ``y_i`` with the mean of
    ``b(W, x_i)`` over ``W ~ p(W | x_i, z_i)``.
``cb`` (latent)
    ``b(w, x) = E_eps g_Y(x, w, h_U(w, x, eps))`` with a learned confounder
    encoder ``h_U``.
``cb+ae``
    the latent variant plus decoders ``g_X(u, z)`` and ``g_Z(u)``; their
    reconstruction losses share the encoder.

The outcome loss is squared error for continuous outcomes and the negative
Cox partial likelihood of the bridge risk score for survival data. Inputs
are standardized with statistics frozen at fit time; dose-response values are
returned in outcome units.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy import optimize

from .autodiff import AdamW, Mlp, MlpSpec, Tensor, backward, concat
from .errors import ConfigError, ContractError, StateError, TrainingDivergence
from .sampler import Standardizer
from .survival import cox_loss

MODES = ("cb", "cb+ae")
VARIANTS = ("direct", "latent")
OUTCOMES = ("mse", "cox")


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "cb"
    variant: str = "direct"       # cb only; cb+ae is always latent
    outcome: str = "mse"
    hidden: tuple = (32, 64, 16)  # () gives linear maps
    dim_u: int = 1
    dim_eps: int = 1
    k_w: int = 100
    k_eps: int = 5
    w_x: float = 1.0
    w_z: float = 1.0
    lr: float = 1e-4
    weight_decay: float = 1e-5
    batch_size: int = 0           # 0: full batch up to 1000 records, else 256
    max_epochs: int = 2000
    patience: int = 100
    optimizer: str = "adamw"      # or "lbfgs" (frozen draws, full batch)
    frozen_draws: bool = False
    binary_x: bool = False
    debias: bool = False          # unbiased pairwise estimate of the squared bridge loss
    seed: int = 0

    def __post_init__(self):
        if self.debias and self.outcome != "mse":
            raise ConfigError("debias applies to the squared-error outcome loss only")
        if self.mode not in MODES or self.variant not in VARIANTS or self.outcome not in OUTCOMES:
            raise ConfigError(f"unknown mode/variant/outcome {self.mode}/{self.variant}/{self.outcome}")
        if self.k_w < 1 or self.k_eps < 1 or self.dim_u < 1 or self.dim_eps < 1:
            raise ConfigError("k_w, k_eps, dim_u and dim_eps must be at least 1")
        if self.w_x < 0 or self.w_z < 0:
            raise ConfigError("loss weights must be nonnegative")
        if self.optimizer not in ("adamw", "lbfgs"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")

    @property
    def latent(self):
        return self.mode == "cb+ae" or self.variant == "latent"

    def batch_for(self, n):
        if self.batch_size:
            return self.batch_size
        return n if n <= 1000 else 256


def _net(widths, seed, out="linear"):
    return Mlp(MlpSpec.relu_net(widths, seed, out))


class BridgeModel:
    def __init__(self, dim_z, dim_w, cfg: TrainConfig):
        self.cfg, self.dim_z, self.dim_w = cfg, dim_z, dim_w
        hid, s = tuple(cfg.hidden), cfg.seed
        du = cfg.dim_u
        self.nets = {}
        if cfg.latent:
            self.nets["h_u"] = _net((dim_w + 1 + cfg.dim_eps,) + hid + (du,), s + 11)
            self.nets["g_y"] = _net((1 + du + dim_w,) + hid + (1,), s + 12)
        else:
            self.nets["b"] = _net((dim_w + 1,) + hid + (1,), s + 13)
        if cfg.mode == "cb+ae":
            self.nets["g_x"] = _net((dim_z + du,) + hid + (1,), s + 14)
            self.nets["g_z"] = _net((du,) + hid + (dim_z,), s + 15)
        self.scales = None
        self.log = []

    @property
    def params(self):
        return [p for k in sorted(self.nets) for p in self.nets[k].params]

    @property
    def linear(self):
        return len(self.cfg.hidden) == 0

    def state(self):
        return [p.value.copy() for p in self.params]

    def load_state(self, arrays):
        for p, a in zip(self.params, arrays):
            p.value = np.array(a, dtype=float)

    # -- scaling -----------------------------------------------------------------

    def fit_scales(self, x, z, w_pool, y=None):
        sc = {"z": Standardizer.fit(z), "w": Standardizer.fit(w_pool)}
        if not self.cfg.binary_x:
            sc["x"] = Standardizer.fit(x)
        if y is not None and self.cfg.outcome == "mse":
            sc["y"] = Standardizer.fit(y)
        self.scales = sc
        return self

    def sx(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 1)
        return x if self.cfg.binary_x else self.scales["x"](x)

    # -- forward -----------------------------------------------------------------

    def _rows(self, ws, xs, eps):
        """Evaluate heads on ``(B, K, .)`` draws; returns per-row tensors.

        ``ws``: standardized w draws (B, K, dw); ``xs``: (B, 1);
        ``eps``: (B, K, de) or None.
        """
        b, k, dw = ws.shape
        w_flat = ws.reshape(b * k, dw)
        x_flat = np.repeat(xs, k, axis=0)
        if not self.cfg.latent:
            return self.nets["b"](np.hstack([w_flat, x_flat])), None
        e_flat = eps.reshape(b * k, -1)
        u = self.nets["h_u"](np.hstack([w_flat, x_flat, e_flat]))
        gy = self.nets["g_y"](concat([x_flat, u, w_flat]))
        return gy, u

    def _expand(self, ws, eps_k, rng):
        """Repeat each W draw ``eps_k`` times and attach eps draws."""
        if not self.cfg.latent:
            return ws, None
        b, k, dw = ws.shape
        ws = np.repeat(ws, eps_k, axis=1)
        eps = rng.standard_normal((b, k * eps_k, self.cfg.dim_eps))
        return ws, eps

    def bridge_value(self, w, x, k_eps=None, seed=0):
        """``b(w, x)`` in the outcome's (standardized for mse) score units.

        ``w`` has shape (n, dw) and ``x`` shape (n,); averages over
        ``k_eps`` eps draws in the latent variants.
        """
        self._need_scales()
        k_eps = self.cfg.k_eps if k_eps is None else k_eps
        rng = np.random.default_rng(seed)
        ws = self.scales["w"](w)[:, None, :]
        ws, eps = self._expand(ws, k_eps, rng)
        vals = self._predict_rows(ws, self.sx(x), eps)
        return vals.reshape(ws.shape[0], -1).mean(axis=1)

    def _predict_rows(self, ws, xs, eps, chunk=200_000):
        b, k, dw = ws.shape
        out = np.empty(b * k)
        per = max(1, chunk // k)
        for s in range(0, b, per):
            e = min(b, s + per)
            gy, _ = self._rows(ws[s:e], xs[s:e], None if eps is None else eps[s:e])
            out[s * k:e * k] = gy.value.ravel()
        return out

    def _need_scales(self):
        if self.scales is None:
            raise StateError("bridge model has no fitted scales; train it first")


# -- losses ----------------------------------------------------------------------------

@dataclass
class Batch:
    """Standardized stage-2 records plus their W draws."""

    xs: np.ndarray
    zs: np.ndarray
    ws: np.ndarray           # (B, K, dw)
    eps: np.ndarray | None   # (B, K, de)
    target: np.ndarray       # ys (mse) or raw x for the binary x loss
    x_raw: np.ndarray
    time: np.ndarray | None = None
    event: np.ndarray | None = None
    weight: np.ndarray | None = None
    k_w: int = 1


def make_batch(model, records, idx, sampler, k_w, k_eps, rng):
    x, z = records["x"][idx], records["z"][idx]
    w = sampler.sample(x, z, k_w, rng)
    b, k, dw = w.shape
    ws = model.scales["w"](w.reshape(b * k, dw)).reshape(b, k, dw)
    ws, eps = model._expand(ws, k_eps, rng)
    if model.linear and not model.cfg.debias:
        # every head is affine, so averaging the draws first gives identical losses
        ws = ws.mean(axis=1, keepdims=True)
        eps = None if eps is None else eps.mean(axis=1, keepdims=True)
        k = 1
    y = records.get("y")
    ys = model.scales["y"](y[idx]).ravel() if "y" in model.scales and y is not None else None
    get = lambda key: None if records.get(key) is None else records[key][idx]
    return Batch(model.sx(x), model.scales["z"](z), ws, eps, ys, x, get("time"), get("event"),
                 get("weight"), k)


def _per_record_mean(t: Tensor, b, cols=1):
    return t.reshape(b, -1, cols).mean(axis=1)


def loss_bridge(model, batch: Batch) -> Tensor:
    gy, _ = model._rows(batch.ws, batch.xs, batch.eps)
    return _outcome_loss(model, batch, gy)


def _outcome_loss(model, batch, gy):
    b = batch.xs.shape[0]
    if model.cfg.outcome == "cox":
        return cox_loss(_per_record_mean(gy, b), batch.time, batch.event, batch.weight)
    k = batch.k_w
    per_w = gy.reshape(b, k, -1).mean(axis=2)          # average over eps for each W draw
    rho = per_w.mean(axis=1, keepdims=True)
    sq = (Tensor(batch.target.reshape(-1, 1)) - rho).square()
    if model.cfg.debias and k > 1:
        # subtract the Monte Carlo variance of rho so the estimate is unbiased
        sq = sq - (per_w - rho).square().sum(axis=1, keepdims=True) / (k * (k - 1))
    return sq.mean()


def loss_autoencoder(model, batch: Batch, u=None):
    """``(L_X, L_Z)`` from the shared encoder; cross-entropy for binary x."""
    if model.cfg.mode != "cb+ae":
        raise ContractError("autoencoder losses need mode cb+ae")
    b, k, _ = batch.ws.shape
    if u is None:
        _, u = model._rows(batch.ws, batch.xs, batch.eps)
    z_rows = np.repeat(batch.zs, k, axis=0)
    gx = model.nets["g_x"](concat([z_rows, u]))
    gz = _per_record_mean(model.nets["g_z"](u), b, model.dim_z)
    if model.cfg.binary_x:
        # cross-entropy on the MC-mean logit, the counterpart of squaring x - E[g_X]
        x = batch.x_raw.reshape(-1, 1)
        logit = _per_record_mean(gx, b)
        lx = -(Tensor(x) * logit.log_sigmoid() + Tensor(1.0 - x) * (-logit).log_sigmoid()).mean()
    else:
        lx = (Tensor(batch.xs) - _per_record_mean(gx, b)).square().mean()
    lz = (Tensor(batch.zs) - gz).square().sum(axis=1).mean()
    return lx, lz


def total_loss(model, batch: Batch):
    """Weighted objective and its parts ``(total, L_Y, L_X, L_Z)``."""
    b = batch.xs.shape[0]
    gy, u = model._rows(batch.ws, batch.xs, batch.eps)
    ly = _outcome_loss(model, batch, gy)
    if model.cfg.mode != "cb+ae":
        return ly, ly, None, None
    lx, lz = loss_autoencoder(model, batch, u)
    tot = ly
    if model.cfg.w_x:
        tot = tot + model.cfg.w_x * lx
    if model.cfg.w_z:
        tot = tot + model.cfg.w_z * lz
    return tot, ly, lx, lz


# -- training --------------------------------------------------------------------------------

LOG_COLUMNS = ("epoch", "train_L_Y", "val_L_Y", "L_X", "L_Z")


def _records(ds, mask):
    rec = {"x": ds.x[mask], "z": ds.z[mask]}
    if ds.y is not None:
        rec["y"] = ds.y[mask]
    if ds.time is not None:
        rec["time"], rec["event"] = ds.time[mask], ds.event[mask]
    return rec


def train(model: BridgeModel, ds, sampler, w_pool=None, weights=None):
    """Fit ``model`` on the stage-2 train split; early stop on validation ``L_Y``.

    ``w_pool`` (default: stage-1 ``w``) fixes the w standardization and is the
    marginal used for dose-response. ``weights`` are optional per-record Cox
    weights aligned with ``ds``.
    """
    cfg = model.cfg
    if ds.split is None:
        raise ConfigError("dataset needs train/val split labels")
    tr = ds.mask("train", stage=2)
    va = ds.mask("val", stage=2)
    if not tr.any() or not va.any():
        raise ConfigError("train and val splits must be nonempty")
    if cfg.outcome == "cox" and not ds.survival:
        raise ConfigError("cox outcome needs survival data")
    w_pool = ds.w[ds.stage1()] if w_pool is None else w_pool
    model.fit_scales(ds.x[tr], ds.z[tr], w_pool, None if ds.y is None else ds.y[tr])
    model.w_pool = np.asarray(w_pool, dtype=float)
    rec_tr, rec_va = _records(ds, tr), _records(ds, va)
    if weights is not None:
        rec_tr["weight"], rec_va["weight"] = weights[tr], weights[va]
    rng = np.random.default_rng(cfg.seed)
    val_batch = make_batch(model, rec_va, np.arange(va.sum()), sampler, cfg.k_w, cfg.k_eps,
                           np.random.default_rng([cfg.seed, 1]))
    if cfg.optimizer == "lbfgs":
        return _train_lbfgs(model, rec_tr, val_batch, sampler, rng)
    return _train_adamw(model, rec_tr, val_batch, sampler, rng)


def _val_loss(model, val_batch):
    return float(loss_bridge(model, val_batch).value)


def _train_adamw(model, rec, val_batch, sampler, rng):
    cfg = model.cfg
    n = rec["x"].shape[0]
    bs = n if cfg.outcome == "cox" else min(cfg.batch_for(n), n)
    opt = AdamW(model.params, lr=cfg.lr, weight_decay=cfg.weight_decay)
    frozen = None
    if cfg.frozen_draws:
        frozen = make_batch(model, rec, np.arange(n), sampler, cfg.k_w, cfg.k_eps, rng)
    best_val, best_state = _val_loss(model, val_batch), model.state()
    model.log = [(0, float("nan"), best_val, float("nan"), float("nan"))]
    stale = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        sums = np.zeros(3)
        for s in range(0, n, bs):
            idx = np.sort(order[s:s + bs]) if frozen is None else order[s:s + bs]
            batch = (make_batch(model, rec, idx, sampler, cfg.k_w, cfg.k_eps, rng)
                     if frozen is None else _slice_batch(frozen, idx))
            opt.zero_grad()
            tot, ly, lx, lz = total_loss(model, batch)
            if not np.isfinite(tot.value):
                raise TrainingDivergence(f"loss is not finite at epoch {epoch}", checkpoint=best_state)
            backward(tot)
            opt.step()
            sums += idx.size * np.array([ly.value, np.nan if lx is None else lx.value,
                                         np.nan if lz is None else lz.value])
        val = _val_loss(model, val_batch)
        if not np.isfinite(val):
            raise TrainingDivergence(f"validation loss is not finite at epoch {epoch}",
                                     checkpoint=best_state)
        model.log.append((epoch, float(sums[0] / n), val, float(sums[1] / n), float(sums[2] / n)))
        if val < best_val:
            best_val, best_state, stale = val, model.state(), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    model.load_state(best_state)
    model.best_val = best_val
    return model


def _slice_batch(b: Batch, idx):
    take = lambda a: None if a is None else a[idx]
    return Batch(b.xs[idx], b.zs[idx], b.ws[idx], take(b.eps), take(b.target), b.x_raw[idx],
                 take(b.time), take(b.event), take(b.weight), b.k_w)


def _train_lbfgs(model, rec, val_batch, sampler, rng):
    """Full-batch L-BFGS on frozen draws; decay enters as ``wd/2 ||theta||^2``."""
    cfg = model.cfg
    n = rec["x"].shape[0]
    batch = make_batch(model, rec, np.arange(n), sampler, cfg.k_w, cfg.k_eps, rng)
    params = model.params
    shapes = [p.value.shape for p in params]
    cuts = np.cumsum([int(np.prod(s)) for s in shapes])[:-1]

    def unpack(theta):
        for p, a, s in zip(params, np.split(theta, cuts), shapes):
            p.value = a.reshape(s).copy()

    def fun(theta):
        unpack(theta)
        for p in params:
            p.grad = None
        tot, *_ = total_loss(model, batch)
        backward(tot)
        g = np.concatenate([(np.zeros(s) if p.grad is None else p.grad).ravel()
                            for p, s in zip(params, shapes)])
        f = float(tot.value) + 0.5 * cfg.weight_decay * float(theta @ theta)
        if not np.isfinite(f):
            raise TrainingDivergence("loss is not finite during L-BFGS")
        return f, g + cfg.weight_decay * theta

    theta0 = np.concatenate([p.value.ravel() for p in params])
    res = optimize.minimize(fun, theta0, jac=True, method="L-BFGS-B",
                            options={"maxiter": cfg.max_epochs, "gtol": 1e-8})
    unpack(res.x)
    tot, ly, lx, lz = total_loss(model, batch)
    val = _val_loss(model, val_batch)
    model.log = [(int(res.nit), float(ly.value), val,
                  float("nan") if lx is None else float(lx.value),
                  float("nan") if lz is None else float(lz.value))]
    model.best_val = val
    return model


def log_to_csv(log, fh=None):
    buf = io.StringIO() if fh is None else fh
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(LOG_COLUMNS)
    for row in log:
        wr.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    return buf.getvalue() if fh is None else ""


# -- causal estimates ---------------------------------------------------------------------------

def dose_response(model: BridgeModel, x_grid, w_pool=None, k_w=None, k_eps=None, seed=0):
    """``E[Y | do(X = x)]`` for each grid point, averaging over ``W ~ p(W)``.

    ``p(W)`` is the empirical stage-1 ``w`` (``w_pool``); ``k_w`` subsamples
    it with replacement when given.
    """
    model._need_scales()
    grid = np.atleast_1d(np.asarray(x_grid, dtype=float))
    if grid.size == 0:
        raise ContractError("x_grid is empty")
    pool = model.w_pool if w_pool is None else np.asarray(w_pool, dtype=float)
    rng = np.random.default_rng(seed)
    if k_w is not None:
        pool = pool[rng.integers(0, pool.shape[0], k_w)]
    out = np.empty(grid.size)
    for i, xv in enumerate(grid):
        vals = model.bridge_value(pool, np.full(pool.shape[0], xv), k_eps,
                                  seed=int(rng.integers(2 ** 32)))
        out[i] = vals.mean()
    if "y" in model.scales:
        out = model.scales["y"].invert(out).ravel()
    return out


LR_GRID = (1e-3, 1e-4, 1e-5)


def select_learning_rate(ds, sampler, cfg: TrainConfig, grid=LR_GRID, folds=5):
    """k-fold choice of ``lr`` by held-out ``L_Y`` over the train+val stage-2 records.

    Returns ``(best_lr, {lr: mean held-out L_Y})``; ties go to the earlier grid entry.
    """
    if ds.split is None:
        raise ConfigError("dataset needs train/val split labels")
    if folds < 2 or not grid:
        raise ConfigError("need at least two folds and a nonempty grid")
    pool = np.flatnonzero(np.isin(ds.split, ("train", "val")) & ds.stage2())
    if pool.size < 2 * folds:
        raise ConfigError(f"{pool.size} records are too few for {folds} folds")
    parts = np.array_split(np.random.default_rng(cfg.seed).permutation(pool), folds)
    scores = {}
    for lr in grid:
        held = []
        for f, part in enumerate(parts):
            labels = np.where(np.isin(np.arange(ds.n), pool), "train", "test").astype(object)
            labels[part] = "val"
            fold = replace(ds, split=labels.astype(str))
            m = BridgeModel(ds.z.shape[1], ds.w.shape[1], replace(cfg, lr=lr, seed=cfg.seed + f))
            held.append(train(m, fold, sampler).best_val)
        scores[lr] = float(np.mean(held))
    best = min(grid, key=lambda lr: scores[lr])
    return best, scores


def oos_mse(estimates, truth):
    e, t = np.asarray(estimates, dtype=float), np.asarray(truth, dtype=float)
    if e.shape != t.shape:
        raise ContractError(f"estimates {e.shape} and truth {t.shape} differ in shape")
    return float(np.mean((e - t) ** 2))


# -- naive baseline ---------------------------------------------------------------------------------

class NaiveRegression:
    """Regression of ``y`` on ``x`` alone with the bridge's network widths."""

    def __init__(self, hidden=(32, 64, 16), lr=1e-3, weight_decay=1e-5, max_epochs=3000,
                 patience=100, seed=0):
        self.net = _net((1,) + tuple(hidden) + (1,), seed + 21)
        self.lr, self.wd, self.max_epochs, self.patience, self.seed = lr, weight_decay, max_epochs, patience, seed

    def fit(self, x, y, x_val, y_val):
        self.xs, self.ys = Standardizer.fit(x), Standardizer.fit(y)
        xt, yt = self.xs(x), self.ys(y)
        xv, yv = self.xs(x_val), self.ys(y_val)
        opt = AdamW(self.net.params, lr=self.lr, weight_decay=self.wd)
        best, state, stale = np.inf, self.net.state(), 0
        for _ in range(self.max_epochs):
            opt.zero_grad()
            loss = (Tensor(yt) - self.net(xt)).square().mean()
            backward(loss)
            opt.step()
            val = float(np.mean((yv - self.net.predict(xv)) ** 2))
            if val < best:
                best, state, stale = val, self.net.state(), 0
            else:
                stale += 1
                if stale >= self.patience:
                    break
        self.net.load(state)
        return self

    def predict(self, x):
        return self.ys.invert(self.net.predict(self.xs(x))).ravel()


# -- checkpoints ------------------------------------------------------------------------------------

def save_bridge(model: BridgeModel, path):
    model._need_scales()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays = {f"p{i}": a for i, a in enumerate(model.state())}
    for k, s in model.scales.items():
        arrays[f"scale_{k}_mean"], arrays[f"scale_{k}_scale"] = s.mean, s.scale
    arrays["w_pool"] = model.w_pool
    np.savez(path.with_suffix(".npz"), **arrays)
    cfg = asdict(model.cfg)
    manifest = {"kind": "bridge", "dim_z": model.dim_z, "dim_w": model.dim_w, "config": cfg,
                "scales": sorted(model.scales), "shapes": [list(p.value.shape) for p in model.params]}
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=1) + "\n")
    return path.with_suffix(".npz")


def load_bridge(path) -> BridgeModel:
    path = Path(path)
    manifest = json.loads(path.with_suffix(".json").read_text())
    cfg = manifest["config"]
    cfg["hidden"] = tuple(cfg["hidden"])
    model = BridgeModel(manifest["dim_z"], manifest["dim_w"], TrainConfig(**cfg))
    with np.load(path.with_suffix(".npz")) as f:
        model.load_state([f[f"p{i}"] for i in range(len(model.params))])
        model.scales = {k: Standardizer(f[f"scale_{k}_mean"], f[f"scale_{k}_scale"])
                        for k in manifest["scales"]}
        model.w_pool = f["w_pool"].copy()
    return model
