"""Experiment pipelines, configuration files and result persistence.

Configuration files are line-oriented INI::

    # comment
    [experiment]
    kind = demand
    seeds = 0,1,2

    [train]
    lr = 0.001
    hidden = 32,64,16

Every section maps onto one dataclass; keys are its field names. Tuples are
comma-separated (an empty value is the empty tuple), booleans are
``true``/``false`` and floats are written with ``repr`` so a dump reads back
to an equal config. Missing keys take the dataclass default; unknown
sections or keys are errors.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import time
import warnings
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import datagen, sem, survival
from .bridge import BridgeModel, NaiveRegression, TrainConfig, dose_response, oos_mse, train
from .errors import ConfigError
from .sampler import SamplerConfig, fit_sampler

KINDS = ("sem-sweep", "demand", "survival")
SURVIVAL_METHODS = ("coxph-uniform", "coxph-ipw", "coxph-ow", "cb", "cb+ae")
DEMAND_METHODS = ("naive", "cb", "cb+ae")


# -- option blocks ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepOptions:
    """``sem-sweep`` grid; the SEM base parameters live in ``[sem]``."""

    sigma_w: tuple = sem.FIG2_SIGMAS
    sigma_z: tuple = sem.FIG2_SIGMAS
    sigma_x: tuple = (0.1, 0.5, 1.0)
    n_x: int = 200
    n_z: int = 200
    trim_frac: float = 0.1
    common_random_numbers: bool = True
    bound_check: bool = False
    bound_radius: float = 3.0     # truncation radius in units of sigma_U
    bound_n_mi: int = 100_000


@dataclass(frozen=True)
class DemandOptions:
    n_values: tuple = (1000,)
    methods: tuple = DEMAND_METHODS
    eval_k_eps: int = 5
    naive_hidden: tuple = (32, 64, 16)
    naive_lr: float = 1e-3
    naive_max_epochs: int = 3000
    naive_patience: int = 100


@dataclass(frozen=True)
class SurvivalOptions:
    n: int = 10_000
    replications: int = 30
    methods: tuple = SURVIVAL_METHODS
    fractions: tuple = (0.8, 0.1, 0.1)   # train / val / test
    refit_sampler: bool = True
    warm_start: bool = False             # start replicate fits from the full-data fit
    eval_k_w: int = 100
    eval_k_eps: int = 5


DEMAND_TRAIN = TrainConfig(variant="latent", k_w=10, k_eps=1, lr=1e-3, max_epochs=1500,
                           patience=100)
SURVIVAL_TRAIN = TrainConfig(variant="latent", outcome="cox", hidden=(), k_w=100, k_eps=1,
                             w_x=0.5, w_z=0.1, optimizer="lbfgs", max_epochs=1000, binary_x=True)
SURVIVAL_SAMPLER = SamplerConfig(batch_size=512, max_epochs=200, patience=10, lr_halvings=1)

_SECTIONS = {
    "sem-sweep": {"sweep": SweepOptions, "sem": sem.SemParams},
    "demand": {"demand": DemandOptions, "train": TrainConfig, "sampler": SamplerConfig},
    "survival": {"survival": SurvivalOptions, "generator": datagen.SurvivalConfig,
                 "train": TrainConfig, "sampler": SamplerConfig},
}
_DEFAULTS = {
    "sem-sweep": {"sem": sem.SemParams(sigma_u=10.0)},
    "demand": {"train": DEMAND_TRAIN},
    "survival": {"train": SURVIVAL_TRAIN, "sampler": SURVIVAL_SAMPLER},
}
_DEFAULT_SEEDS = {"sem-sweep": (0,), "demand": tuple(range(20)), "survival": (0,)}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seeds: tuple = (0,)
    out_dir: str = ""
    sections: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        known = _SECTIONS[self.kind]
        extra = set(self.sections) - set(known)
        if extra:
            raise ConfigError(f"sections {sorted(extra)} do not apply to {self.kind}")
        filled = {}
        for name, cls in known.items():
            v = self.sections.get(name, _DEFAULTS[self.kind].get(name, cls()))
            if not isinstance(v, cls):
                raise ConfigError(f"section [{name}] must be a {cls.__name__}")
            filled[name] = v
        object.__setattr__(self, "sections", filled)

    @classmethod
    def default(cls, kind, **kw):
        if kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
        kw.setdefault("seeds", _DEFAULT_SEEDS[kind])
        return cls(kind, **kw)

    def __getitem__(self, name):
        return self.sections[name]

    def with_section(self, name, **changes):
        secs = dict(self.sections)
        secs[name] = replace(secs[name], **changes)
        return replace(self, sections=secs)

    def to_dict(self):
        return {"experiment": {"kind": self.kind, "seeds": list(self.seeds), "out_dir": self.out_dir},
                **{k: _plain(asdict(v)) for k, v in sorted(self.sections.items())}}

    @property
    def hash(self):
        d = self.to_dict()
        d["experiment"].pop("out_dir")   # where results go does not change them
        return datagen.config_hash(d)

    def output_dir(self):
        return Path(self.out_dir) if self.out_dir else datagen.output_root() / self.kind

    # -- INI ---------------------------------------------------------------------

    def to_ini(self):
        lines = ["[experiment]", f"kind = {self.kind}", f"seeds = {_encode(self.seeds)}",
                 f"out_dir = {self.out_dir}"]
        for name, obj in sorted(self.sections.items()):
            lines += ["", f"[{name}]"]
            lines += [f"{f.name} = {_encode(getattr(obj, f.name))}" for f in fields(obj)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_ini(cls, text):
        cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=None, default_section="__none__")
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        if "experiment" not in cp:
            raise ConfigError("config needs an [experiment] section")
        ex = dict(cp["experiment"])
        unknown = set(ex) - {"kind", "seeds", "out_dir"}
        if unknown:
            raise ConfigError(f"unknown keys in [experiment]: {sorted(unknown)}")
        kind = ex.get("kind", "").strip()
        if kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
        seeds = _decode(ex["seeds"], (0,), "seeds") if "seeds" in ex else _DEFAULT_SEEDS[kind]
        secs = {}
        for name in cp.sections():
            if name == "experiment":
                continue
            if name not in _SECTIONS[kind]:
                raise ConfigError(f"section [{name}] does not apply to {kind}")
            base = _DEFAULTS[kind].get(name, _SECTIONS[kind][name]())
            secs[name] = _parse_section(name, base, dict(cp[name]))
        return cls(kind, tuple(seeds), ex.get("out_dir", "").strip(), secs)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} does not exist") from exc
        return cls.from_ini(text)


def _plain(d):
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _encode(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ",".join(_encode(a) for a in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _decode(text, default, key):
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() not in ("true", "false"):
                raise ValueError(text)
            return text.lower() == "true"
        if isinstance(default, tuple):
            if not text:
                return ()
            proto = default[0] if default else 0.0
            return tuple(_decode(t, proto, key) for t in text.split(","))
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value {text!r} for {key}") from exc


def _parse_section(name, base, items):
    names = {f.name for f in fields(base)}
    unknown = set(items) - names
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    changes = {k: _decode(v, getattr(base, k), f"{name}.{k}") for k, v in items.items()}
    try:
        return replace(base, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid [{name}]: {exc}") from exc


# -- reports ---------------------------------------------------------------------------------

@dataclass
class Table:
    columns: tuple
    rows: list

    def to_csv(self, config_hash):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(tuple(self.columns) + ("config_hash",))
        for row in self.rows:
            wr.writerow([_cell(v) for v in row] + [config_hash])
        return buf.getvalue()


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return "" if v is None else str(v)


@dataclass
class FigureSpec:
    """Plot description; ``kind`` is one of lines, steps, heatmap, errorbar, box.

    ``series`` entries are dicts with ``label`` plus ``x``/``y`` (lines,
    steps), ``y``/``lo``/``hi`` (errorbar) or ``values`` (box). Heatmaps use
    ``grid`` = (x labels, y labels, values[y][x]).
    """

    name: str
    kind: str
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)
    grid: tuple | None = None
    hlines: tuple = ()
    logx: bool = False
    logy: bool = False


@dataclass
class ExperimentReport:
    kind: str
    config: ExperimentConfig
    tables: dict = field(default_factory=dict)
    figures: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)


def source_revision():
    """Content hash of the package sources, formatted like a short commit id."""
    h = hashlib.sha1()
    root = Path(__file__).parent
    for p in sorted(root.rglob("*.py")):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(p.read_bytes())
    return h.hexdigest()[:12]


def write_report(report: ExperimentReport, out_dir=None):
    """Write every table as CSV plus ``manifest.json`` and the config dump."""
    out = Path(out_dir) if out_dir is not None else report.config.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    h = report.config.hash
    written = {}
    for name, table in sorted(report.tables.items()):
        text = table.to_csv(h)
        (out / f"{name}.csv").write_text(text, encoding="utf-8")
        written[f"{name}.csv"] = hashlib.sha256(text.encode()).hexdigest()
    (out / "config.ini").write_text(report.config.to_ini(), encoding="utf-8")
    (out / "figures.json").write_text(figures_to_json(report.figures), encoding="utf-8")
    manifest = {"kind": report.kind, "config_hash": h, "files": written, **report.provenance}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                       encoding="utf-8")
    return out


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(a) for k, a in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(a) for a in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def figures_to_json(figures):
    return json.dumps([_jsonable(asdict(f)) for f in figures], indent=1, sort_keys=True) + "\n"


def figures_from_json(text):
    out = []
    for d in json.loads(text):
        d["hlines"] = tuple(tuple(h) for h in d["hlines"])
        if d["grid"] is not None:
            d["grid"] = tuple(d["grid"])
        out.append(FigureSpec(**d))
    return out


def _provenance(cfg, t0):
    return {"config_hash": cfg.hash, "revision": source_revision(),
            "wall_time_s": round(time.perf_counter() - t0, 3)}


# -- sem sweep ----------------------------------------------------------------------------------

def run_sem_sweep(cfg: ExperimentConfig) -> ExperimentReport:
    if cfg.kind != "sem-sweep":
        raise ConfigError(f"run_sem_sweep needs a sem-sweep config, got {cfg.kind}")
    t0 = time.perf_counter()
    opt, base = cfg["sweep"], cfg["sem"]
    rows, bound_rows = [], []
    for seed in cfg.seeds:
        sc = sem.SweepConfig(opt.sigma_w, opt.sigma_z, opt.sigma_x, base, opt.n_x, opt.n_z,
                             opt.trim_frac, seed, opt.common_random_numbers)
        cells = sem.sweep(sc)
        rows += [(c.sigma_x, c.sigma_z, c.sigma_w, c.mean_r, c.std_r, c.mi, c.n_kept, c.seed)
                 for c in cells]
        if opt.bound_check:
            for c in cells:
                p = base.replace(sigma_w=c.sigma_w, sigma_z=c.sigma_z, sigma_x=c.sigma_x)
                b = sem.theorem3_bound_check(p, opt.bound_radius * p.sigma_u,
                                             n_mi=opt.bound_n_mi, seed=seed)
                bound_rows.append((c.sigma_x, c.sigma_z, c.sigma_w, b.radius, b.lhs, b.rhs,
                                   b.mi, b.satisfied, seed))
    rep = ExperimentReport("sem-sweep", cfg)
    rep.tables["sweep"] = Table(("sigma_x", "sigma_z", "sigma_w", "mean_r", "std_r", "mi_nats",
                                 "n_kept", "seed"), rows)
    if opt.bound_check:
        rep.tables["bound"] = Table(("sigma_x", "sigma_z", "sigma_w", "radius", "lhs", "rhs",
                                     "mi_nats", "satisfied", "seed"), bound_rows)
    seed0 = cfg.seeds[0]
    for sx in opt.sigma_x:
        cells = [r for r in rows if r[0] == sx and r[7] == seed0]
        lines = []
        for sz in opt.sigma_z:
            line = sorted((r for r in cells if r[1] == sz), key=lambda r: r[2])
            lines.append({"label": f"sigma_Z={sz:g}", "x": [r[5] for r in line],
                          "y": [r[3] for r in line]})
        rep.figures.append(FigureSpec(f"error_vs_mi_sx{sx:g}", "lines",
                                      f"sigma_X={sx:g}", "I(U;Z|W,X) [nats]",
                                      "mean relative error", lines))
        for col, what in ((3, "mean"), (4, "std")):
            vals = [[next(r[col] for r in cells if r[1] == sz and r[2] == sw) for sw in opt.sigma_w]
                    for sz in opt.sigma_z]
            rep.figures.append(FigureSpec(
                f"heatmap_{what}_sx{sx:g}", "heatmap", f"{what} relative error, sigma_X={sx:g}",
                "sigma_W", "sigma_Z",
                grid=([f"{v:g}" for v in opt.sigma_w], [f"{v:g}" for v in opt.sigma_z], vals)))
    rep.provenance = _provenance(cfg, t0)
    return rep


# -- demand ------------------------------------------------------------------------------------------

def run_demand(cfg: ExperimentConfig) -> ExperimentReport:
    """MSE of each method's dose-response against the frozen Demand truth."""
    if cfg.kind != "demand":
        raise ConfigError(f"run_demand needs a demand config, got {cfg.kind}")
    t0 = time.perf_counter()
    opt, tcfg, scfg = cfg["demand"], cfg["train"], cfg["sampler"]
    bad = set(opt.methods) - set(DEMAND_METHODS)
    if bad:
        raise ConfigError(f"unknown demand methods {sorted(bad)}")
    grid, truth = datagen.frozen_demand_truth()
    mse_rows, curve_rows = [], []
    for n in opt.n_values:
        for seed in cfg.seeds:
            ds = datagen.split(datagen.generate_demand(n, seed), (0.9, 0.1), seed)
            tr, va = ds.mask("train", 2), ds.mask("val", 2)
            ests = {}
            if "naive" in opt.methods:
                nr = NaiveRegression(opt.naive_hidden, opt.naive_lr, tcfg.weight_decay,
                                     opt.naive_max_epochs, opt.naive_patience, seed)
                ests["naive"] = nr.fit(ds.x[tr], ds.y[tr], ds.x[va], ds.y[va]).predict(grid)
            bridges = [m for m in opt.methods if m != "naive"]
            if bridges:
                s1 = ds.stage1()
                sam = fit_sampler(ds.x[s1], ds.z[s1], ds.w[s1], replace(scfg, seed=seed))
                for m in bridges:
                    model = BridgeModel(ds.z.shape[1], ds.w.shape[1],
                                        replace(tcfg, mode=m, seed=seed))
                    train(model, ds, sam)
                    ests[m] = dose_response(model, grid, k_eps=opt.eval_k_eps, seed=seed)
            for m in opt.methods:
                mse_rows.append((m, n, seed, oos_mse(ests[m], truth)))
                curve_rows += [(m, n, seed, float(p), float(e), float(t))
                               for p, e, t in zip(grid, ests[m], truth)]
    rep = ExperimentReport("demand", cfg)
    rep.tables["mse"] = Table(("method", "n", "seed", "mse"), mse_rows)
    rep.tables["curves"] = Table(("method", "n", "seed", "price", "estimate", "truth"), curve_rows)
    for n in opt.n_values:
        rep.figures.append(FigureSpec(
            f"mse_box_n{n}", "box", f"Demand, n={n}", "method", "out-of-sample MSE",
            [{"label": m, "values": [r[3] for r in mse_rows if r[0] == m and r[1] == n]}
             for m in opt.methods], logy=True))
        series = [{"label": "truth", "x": grid.tolist(), "y": truth.tolist()}]
        for m in opt.methods:
            med = [float(np.median([r[4] for r in curve_rows if r[0] == m and r[1] == n and r[3] == p]))
                   for p in grid]
            series.append({"label": f"{m} (median)", "x": grid.tolist(), "y": med})
        rep.figures.append(FigureSpec(f"dose_response_n{n}", "lines", f"Demand, n={n}",
                                      "price", "E[Y | do(P = p)]", series))
    rep.provenance = _provenance(cfg, t0)
    return rep


# -- survival -------------------------------------------------------------------------------------------

def _indices(ds, name):
    return np.flatnonzero(ds.split == name)


def _coxph_method(ds, scheme):
    w = survival.propensity_and_weights(ds, scheme)
    return survival.fit_coxph_treatment_only(ds.time, ds.event, ds.x, w)


def run_survival(cfg: ExperimentConfig) -> ExperimentReport:
    """HR table for the CoxPH baselines and the bridges on the synthetic cohort.

    CoxPH rows are fitted on train+val with asymptotic intervals. Bridge rows
    use ``replications`` bootstrap replicates: train and val records are each
    resampled with replacement, the sampler is refitted on the distinct
    resampled records and the bridge is retrained with a fresh seed; the
    interval is the 2.5/97.5% quantile range of the replicate log-HRs.
    ``refit_sampler = false`` reuses one sampler fitted on train+val, and
    ``warm_start`` starts each replicate from the train+val bridge (it also
    implies a single sampler).
    C-index is evaluated on the test split for every method and replicate.
    """
    if cfg.kind != "survival":
        raise ConfigError(f"run_survival needs a survival config, got {cfg.kind}")
    t0 = time.perf_counter()
    opt, gen, tcfg, scfg = cfg["survival"], cfg["generator"], cfg["train"], cfg["sampler"]
    bad = set(opt.methods) - set(SURVIVAL_METHODS)
    if bad:
        raise ConfigError(f"unknown survival methods {sorted(bad)}")
    if len(opt.fractions) != 3:
        raise ConfigError("survival fractions are train,val,test")
    res_rows, rep_rows, km_rows = [], [], []
    for seed in cfg.seeds:
        full = datagen.split(datagen.generate_survival(opt.n, seed, gen), opt.fractions, seed)
        tr, va, te = (_indices(full, s) for s in ("train", "val", "test"))
        fit_part = full.subset(np.concatenate([tr, va]))
        test = full.subset(te)
        logs = {m: [] for m in opt.methods}
        cidx = {m: [] for m in opt.methods}
        sam_full = None
        bridges = [m for m in opt.methods if not m.startswith("coxph")]
        if bridges and (opt.warm_start or not opt.refit_sampler):
            sam_full = fit_sampler(fit_part.x, fit_part.z, fit_part.w, replace(scfg, seed=seed))
        init = {m: survival.train_survival_bridge(fit_part, sam_full, replace(tcfg, mode=m, seed=seed))
                for m in bridges} if opt.warm_start else {}
        for r in range(opt.replications):
            g = np.random.default_rng([seed, r])
            idx = np.concatenate([g.choice(tr, tr.size), g.choice(va, va.size)])
            boot = full.subset(idx)
            for m in opt.methods:
                if m.startswith("coxph"):
                    f = _coxph_method(boot, m.split("-")[1])
                    logs[m].append(float(f.beta[0]))
                    cidx[m].append(survival.concordance_index(f.beta[0] * test.x, test.time,
                                                              test.event))
            if not bridges:
                continue
            if opt.refit_sampler:
                u = np.unique(idx)
                sam = fit_sampler(full.x[u], full.z[u], full.w[u], replace(scfg, seed=1000 * seed + r))
            else:
                sam = sam_full
            for m in bridges:
                model = survival.train_survival_bridge(boot, sam,
                                                       replace(tcfg, mode=m, seed=1000 * seed + r),
                                                       init=init.get(m))
                logs[m].append(survival.log_hr_contrast(model, None, k_eps=opt.eval_k_eps, seed=r))
                rho = survival.risk_scores(model, sam, test.x, test.z, opt.eval_k_w, seed=r)
                cidx[m].append(survival.concordance_index(rho, test.time, test.event))
        for m in opt.methods:
            for r, (lh, c) in enumerate(zip(logs[m], cidx[m])):
                rep_rows.append((m, seed, r, lh, float(np.exp(lh)), c))
            if m.startswith("coxph"):
                f = _coxph_method(fit_part, m.split("-")[1])
                hr, (lo, hi) = f.hr, f.ci()
            else:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    lo, hi = survival.quantile_ci(logs[m])
                hr = float(np.exp(np.mean(logs[m])))
            res_rows.append((m, hr, lo, hi, float(np.median(cidx[m])), seed))
        for grp, sf in survival.kaplan_meier(full.time, full.event, full.x).items():
            km_rows += [(seed, int(grp), float(t), float(v)) for t, v in zip(sf.time, sf.value)]
    rep = ExperimentReport("survival", cfg)
    rep.tables["results"] = Table(("method", "hr", "ci_lo", "ci_hi", "cindex", "seed"), res_rows)
    rep.tables["replicates"] = Table(("method", "seed", "replicate", "log_hr", "hr", "cindex"),
                                     rep_rows)
    rep.tables["km"] = Table(("seed", "group", "time", "survival"), km_rows)
    s0 = cfg.seeds[0]
    first = [r for r in res_rows if r[5] == s0]
    rep.figures.append(FigureSpec(
        "hazard_ratios", "errorbar", "Hazard ratio with 95% CI", "method", "HR",
        [{"label": r[0], "y": r[1], "lo": r[2], "hi": r[3]} for r in first],
        hlines=((1.0, "null HR=1"), (float(np.exp(gen.beta_x)), "planted HR"))))
    rep.figures.append(FigureSpec(
        "cindex_box", "box", "Test C-index over replicates", "method", "C-index",
        [{"label": m, "values": [r[5] for r in rep_rows if r[0] == m and r[1] == s0]}
         for m in opt.methods]))
    rep.figures.append(FigureSpec(
        "kaplan_meier", "steps", "Kaplan-Meier by treatment", "time", "survival",
        [{"label": f"x={g}", "x": [r[2] for r in km_rows if r[0] == s0 and r[1] == g],
          "y": [r[3] for r in km_rows if r[0] == s0 and r[1] == g]} for g in (0, 1)]))
    rep.provenance = _provenance(cfg, t0)
    return rep


RUNNERS = {"sem-sweep": run_sem_sweep, "demand": run_demand, "survival": run_survival}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    return RUNNERS[cfg.kind](cfg)
