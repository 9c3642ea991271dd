"""Seeded dataset generators and ground-truth oracles.

Three generators share one container, :class:`ProximalDataset`:

* ``demand``: the price/sales benchmark with latent demand ``D``, cost
  shifters ``C1, C2`` as treatment proxies, views ``V`` as outcome proxy,
  price ``P`` as treatment and sales ``Y`` as outcome.
* ``sem``: draws from the linear-Gaussian SEM in :mod:`causalbridge.sem`.
* ``survival``: a confounded time-to-event dataset with binary treatment
  and vector proxies.

Each generator is a pure function of ``(n, seed, config)``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DegenerateError
from .sem import SemParams

STAGE1, STAGE2, BOTH = 1, 2, 3
DEMAND_GRID = np.linspace(10.0, 30.0, 10)
TRUTH_FILE = Path(__file__).parent / "data" / "demand_truth.json"


def config_hash(cfg) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class ProximalDataset:
    """Rows of ``(x, z, w)`` plus an outcome, tagged by stage and split.

    ``stage`` holds 1 (stage-1 only), 2 (stage-2 only) or 3 (both) per row.
    ``latent`` keeps the unobserved confounder for diagnostics; it is never
    consumed by estimators.
    """

    kind: str
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    y: np.ndarray | None = None
    time: np.ndarray | None = None
    event: np.ndarray | None = None
    latent: np.ndarray | None = None
    stage: np.ndarray | None = None
    split: np.ndarray | None = None
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.z = _as_2d(self.z)
        self.w = _as_2d(self.w)
        n = self.x.shape[0]
        if self.stage is None:
            self.stage = np.full(n, BOTH, dtype=np.int8)
        for a in (self.z, self.w, self.y, self.time, self.event, self.latent, self.stage, self.split):
            if a is not None and len(a) != n:
                raise ConfigError("dataset columns differ in length")

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def survival(self):
        return self.time is not None

    def stage1(self):
        return (self.stage & STAGE1).astype(bool)

    def stage2(self):
        return (self.stage & STAGE2).astype(bool)

    def mask(self, split=None, stage=None):
        m = np.ones(self.n, dtype=bool)
        if split is not None:
            if self.split is None:
                raise ConfigError("dataset has no split labels")
            m &= self.split == split
        if stage == 1:
            m &= self.stage1()
        elif stage == 2:
            m &= self.stage2()
        return m

    def subset(self, m):
        def take(a):
            return None if a is None else a[m]
        return replace(self, x=self.x[m], z=self.z[m], w=self.w[m], y=take(self.y),
                       time=take(self.time), event=take(self.event), latent=take(self.latent),
                       stage=self.stage[m], split=take(self.split))

    def config_hash(self):
        return config_hash({"kind": self.kind, "seed": self.seed, **self.meta})


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


# -- demand ------------------------------------------------------------------------

def g_demand(d):
    d = np.asarray(d, dtype=float)
    return 2.0 * ((d - 5.0) ** 4 / 600.0 + np.exp(-4.0 * (d - 5.0) ** 2)) + d / 10.0 - 2.0


def demand_equations(d, e1, e2, e3, e4, e):
    """The structural equations given latent demand and the five noises."""
    g = g_demand(d)
    c1 = 2.0 * np.sin(2.0 * np.pi * d / 10.0) + e1
    c2 = 2.0 * np.cos(2.0 * np.pi * d / 10.0) + e2
    v = 7.0 * g + 45.0 + e3
    p = 35.0 + (c1 + 3.0) * g + c2 + e4
    y = p * (np.exp(np.minimum((v - p) / 10.0, 5.0)) - 5.0 * g) + e
    return c1, c2, v, p, y


def generate_demand(n, seed, share=True, debug=False):
    """Demand benchmark; with ``share`` both stages use the same ``n`` rows."""
    if n < 100:
        raise ConfigError("demand needs n >= 100")
    rng = np.random.default_rng(seed)
    rows = n if share else 2 * n
    d = rng.uniform(0.0, 10.0, rows)
    noise = rng.standard_normal((5, rows))
    c1, c2, v, p, y = demand_equations(d, *noise)
    stage = np.full(rows, BOTH, dtype=np.int8)
    if not share:
        stage[:n], stage[n:] = STAGE1, STAGE2
    return ProximalDataset("demand", p, np.column_stack([c1, c2]), v, y=y,
                           latent=d if debug else None, stage=stage, seed=seed,
                           meta={"n": n, "share": bool(share)})


def demand_structural(p, d, e3):
    """Noise-free outcome at price ``p`` for latent demand ``d`` and view noise ``e3``."""
    g = g_demand(d)
    v = 7.0 * g + 45.0 + e3
    return p * (np.exp(np.minimum((v - p) / 10.0, 5.0)) - 5.0 * g)


def demand_ground_truth(p_grid=None, mc_n=10 ** 6, seed=0, chunk=10 ** 6):
    """Monte Carlo ``E[Y | do(P = p)]``; returns ``(values, standard_errors)``."""
    if mc_n < 10 ** 5:
        raise ConfigError("mc_n must be at least 1e5")
    grid = DEMAND_GRID if p_grid is None else np.asarray(p_grid, dtype=float)
    rng = np.random.default_rng(seed)
    s1 = np.zeros(grid.size)
    s2 = np.zeros(grid.size)
    done = 0
    while done < mc_n:
        m = min(chunk, mc_n - done)
        d = rng.uniform(0.0, 10.0, m)
        e3 = rng.standard_normal(m)
        vals = demand_structural(grid[:, None], d[None, :], e3[None, :])
        s1 += vals.sum(axis=1)
        s2 += (vals ** 2).sum(axis=1)
        done += m
    mean = s1 / mc_n
    se = np.sqrt(np.maximum(s2 / mc_n - mean ** 2, 0.0) / mc_n)
    return mean, se


def frozen_demand_truth():
    """Ground truth on the 10-point price grid from the committed oracle file."""
    with open(TRUTH_FILE) as fh:
        blob = json.load(fh)
    return np.array(blob["grid"]), np.array(blob["truth"])


def freeze_demand_truth(mc_n=10 ** 7, seed=20240601, path=TRUTH_FILE):
    mean, se = demand_ground_truth(DEMAND_GRID, mc_n, seed)
    blob = {"grid": DEMAND_GRID.tolist(), "truth": mean.tolist(), "se": se.tolist(),
            "mc_n": mc_n, "seed": seed}
    Path(path).write_text(json.dumps(blob, indent=1) + "\n")
    return blob


# -- linear SEM ------------------------------------------------------------------------

def generate_sem(n, seed, p: SemParams | None = None, share=True):
    p = SemParams() if p is None else p
    if n < 10:
        raise ConfigError("sem needs n >= 10")
    rng = np.random.default_rng(seed)
    rows = n if share else 2 * n
    s = p.simulate(rows, rng)
    stage = np.full(rows, BOTH, dtype=np.int8)
    if not share:
        stage[:n], stage[n:] = STAGE1, STAGE2
    return ProximalDataset("sem", s["X"], s["Z"], s["W"], y=s["Y"], latent=s["U"],
                           stage=stage, seed=seed, meta={"n": n, "share": bool(share), **asdict(p)})


# -- survival ----------------------------------------------------------------------------

@dataclass(frozen=True)
class SurvivalConfig:
    """Confounded survival generator; defaults are the frozen benchmark setting."""

    dim_w: int = 4
    dim_z: int = 4
    sigma_w: float = 2.0
    sigma_z: float = 2.0
    gamma_0: float = 0.0
    gamma_u: float = 2.0
    gamma_z: float = 0.1
    beta_x: float = float(np.log(0.75))
    beta_u: float = 1.0
    beta_w: float = 0.0
    baseline_rate: float = 0.1
    censor_max: float = 10.0
    event_fraction: float = 0.36

    def unconfounded(self):
        """Outcome no longer depends on ``U`` or ``W``; treatment still does."""
        return replace(self, beta_u=0.0, beta_w=0.0)


def generate_survival(n, seed, cfg: SurvivalConfig | None = None):
    cfg = SurvivalConfig() if cfg is None else cfg
    if n < 10:
        raise ConfigError("survival needs n >= 10")
    if cfg.sigma_w <= 0 or cfg.sigma_z <= 0 or cfg.baseline_rate <= 0 or cfg.censor_max <= 0:
        raise ConfigError("scales and rates must be positive")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    w = u[:, None] + cfg.sigma_w * rng.standard_normal((n, cfg.dim_w))
    z = u[:, None] + cfg.sigma_z * rng.standard_normal((n, cfg.dim_z))
    logit = cfg.gamma_0 + cfg.gamma_u * u + cfg.gamma_z * z.sum(axis=1)
    x = (rng.random(n) < expit(logit)).astype(float)
    rate = cfg.baseline_rate * np.exp(cfg.beta_x * x + cfg.beta_u * u + cfg.beta_w * w.sum(axis=1))
    t = rng.exponential(1.0 / rate)
    c = rng.uniform(0.0, cfg.censor_max, n)
    event = (t < c).astype(float)
    time = np.minimum(t, c)
    if event.mean() < 0.05:
        raise DegenerateError(f"event fraction {event.mean():.3f} below 5%")
    return ProximalDataset("survival", x, z, w, time=time, event=event, latent=u,
                           seed=seed, meta={"n": n, **asdict(cfg)})


# -- splitting -----------------------------------------------------------------------------

SPLIT_NAMES = ("train", "val", "test")


def split(ds: ProximalDataset, fractions=(0.9, 0.1), seed=0, names=None):
    fr = np.asarray(fractions, dtype=float)
    names = SPLIT_NAMES[: fr.size] if names is None else tuple(names)
    if fr.size != len(names) or np.any(fr <= 0) or not np.isclose(fr.sum(), 1.0):
        raise ConfigError("fractions must be positive, sum to 1 and match the split names")
    bounds = np.round(np.cumsum(fr) * ds.n).astype(int)
    bounds[-1] = ds.n
    sizes = np.diff(np.concatenate([[0], bounds]))
    if np.any(sizes == 0):
        raise ConfigError(f"split sizes {sizes.tolist()} include an empty part")
    perm = np.random.default_rng(seed).permutation(ds.n)
    labels = np.empty(ds.n, dtype=object)
    start = 0
    for name, size in zip(names, sizes):
        labels[perm[start:start + size]] = name
        start += size
    return replace(ds, split=labels.astype(str))


# -- CSV io ----------------------------------------------------------------------------------

def _columns(ds):
    cols = {"x": ds.x}
    cols.update({f"z{i}": ds.z[:, i] for i in range(ds.z.shape[1])})
    cols.update({f"w{i}": ds.w[:, i] for i in range(ds.w.shape[1])})
    for name in ("y", "time", "event", "latent"):
        a = getattr(ds, name)
        if a is not None:
            cols[name] = a
    cols["stage"] = ds.stage
    return cols


def _fmt(v):
    return repr(float(v))


def write_dataset(ds: ProximalDataset, out_dir, name=None):
    """Write ``<name>.csv`` and ``<name>.json``; returns the CSV path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = name or f"{ds.kind}_n{ds.n}_s{ds.seed}"
    cols = _columns(ds)
    header = list(cols) + (["split"] if ds.split is not None else [])
    path = out / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for i in range(ds.n):
            row = [str(int(v[i])) if k == "stage" else _fmt(v[i]) for k, v in cols.items()]
            if ds.split is not None:
                row.append(ds.split[i])
            wr.writerow(row)
    meta = {"kind": ds.kind, "seed": ds.seed, "n": ds.n, "config": ds.meta,
            "config_hash": ds.config_hash(), "columns": header}
    (out / f"{name}.json").write_text(json.dumps(meta, indent=1, sort_keys=True, default=float) + "\n")
    return path


def read_dataset(path) -> ProximalDataset:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = list(rd)
    table = {h: [r[j] for r in rows] for j, h in enumerate(header)}

    def num(k):
        return np.array(table[k], dtype=float) if k in table else None

    zs = sorted((h for h in header if h[0] == "z" and h[1:].isdigit()), key=lambda h: int(h[1:]))
    ws = sorted((h for h in header if h[0] == "w" and h[1:].isdigit()), key=lambda h: int(h[1:]))
    return ProximalDataset(
        meta["kind"], num("x"), np.column_stack([num(h) for h in zs]),
        np.column_stack([num(h) for h in ws]), y=num("y"), time=num("time"),
        event=num("event"), latent=num("latent"),
        stage=np.array(table["stage"], dtype=np.int8),
        split=np.array(table["split"]) if "split" in table else None,
        seed=meta["seed"], meta=meta["config"])


def output_root(default="runs"):
    return Path(os.environ.get("CAUSALBRIDGE_OUT", default))
