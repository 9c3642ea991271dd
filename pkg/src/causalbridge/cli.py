"""``causalbridge`` command line.

Subcommands: ``gen``, ``fit-sampler``, ``fit-bridge``, ``sem-sweep``,
``demand``, ``survival run``, ``plot``. Results go under ``--out`` or
``$CAUSALBRIDGE_OUT/<kind>``. Exit codes: 0 success, 2 configuration error,
3 numerical error, 4 I/O error; on failure ``error.json`` is written to the
output directory.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields, replace
from pathlib import Path

from . import datagen, harness
from .bridge import BridgeModel, TrainConfig, log_to_csv, save_bridge, train
from .errors import CausalBridgeError, NumericalError
from .sampler import GaussianSampler, SamplerConfig, fit_sampler

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


_SHORT = {"w_x": "wx", "w_z": "wz", "k_w": "kw", "k_eps": "keps"}


def _add_dataclass_flags(p, cls, prefix=""):
    """One ``--field-name`` flag per dataclass field, parsed like config values."""
    for f in fields(cls):
        flags = [f"--{prefix}{f.name.replace('_', '-')}"]
        if f.name in _SHORT:
            flags.append(f"--{prefix}{_SHORT[f.name]}")
        p.add_argument(*flags, dest=f"{prefix}{f.name}", default=None, metavar="V")


def _apply_flags(obj, args, prefix=""):
    changes = {}
    for f in fields(obj):
        v = getattr(args, f"{prefix}{f.name}", None)
        if v is not None:
            changes[f.name] = harness._decode(v, getattr(obj, f.name), f.name)
    return replace(obj, **changes) if changes else obj


def _parser():
    ap = argparse.ArgumentParser(prog="causalbridge", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    g = sub.add_parser("gen", help="generate a dataset as CSV + JSON sidecar")
    g.add_argument("kind", choices=("demand", "sem", "survival"))
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--split", default="0.9,0.1", help="split fractions (train,val[,test])")
    g.add_argument("--unconfounded", action="store_true", help="survival: switch confounding off")
    g.add_argument("--out")
    g.add_argument("--name")

    s = sub.add_parser("fit-sampler", help="fit the Gaussian sampler p(W | x, z)")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True, help="checkpoint path (.npz + .json)")
    _add_dataclass_flags(s, SamplerConfig)

    b = sub.add_parser("fit-bridge", help="train a bridge model")
    b.add_argument("--data", required=True)
    b.add_argument("--sampler", required=True)
    b.add_argument("--out", required=True, help="checkpoint path (.npz + .json)")
    _add_dataclass_flags(b, TrainConfig)

    for name, kind in (("sem-sweep", "sem-sweep"), ("demand", "demand")):
        e = sub.add_parser(name, help=f"run the {kind} experiment")
        _experiment_flags(e)
        if kind == "sem-sweep":
            e.add_argument("--bound-check", action="store_true")
        else:
            e.add_argument("--n-values")

    sv = sub.add_parser("survival", help="survival experiment")
    svs = sv.add_subparsers(dest="action", required=True)
    run = svs.add_parser("run")
    _experiment_flags(run)
    run.add_argument("--method", action="append",
                     choices=harness.SURVIVAL_METHODS, help="repeatable; default all five")
    run.add_argument("--replications", type=int)
    run.add_argument("--n", type=int)
    run.add_argument("--unconfounded", action="store_true")

    pl = sub.add_parser("plot", help="render SVGs from an experiment output directory")
    pl.add_argument("dir")
    return ap


def _experiment_flags(p):
    p.add_argument("--config", help="INI config file")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--out", help="output directory")
    p.add_argument("--no-plots", action="store_true")


def _experiment_config(kind, args):
    cfg = (harness.ExperimentConfig.load(args.config) if args.config
           else harness.ExperimentConfig.default(kind))
    if cfg.kind != kind:
        raise harness.ConfigError(f"config is for {cfg.kind}, not {kind}")
    if args.seeds:
        cfg = replace(cfg, seeds=harness._decode(args.seeds, (0,), "seeds"))
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    return cfg


def _run_experiment(cfg, args):
    rep = harness.run_experiment(cfg)
    out = harness.write_report(rep)
    if not args.no_plots:
        from .plots import emit_plots
        emit_plots(rep, out)
    for name, table in sorted(rep.tables.items()):
        print(f"{out / (name + '.csv')}: {len(table.rows)} rows")
    return out


def _cmd_gen(args):
    fr = harness._decode(args.split, (0.9,), "split")
    if args.kind == "demand":
        ds = datagen.generate_demand(args.n, args.seed)
    elif args.kind == "sem":
        ds = datagen.generate_sem(args.n, args.seed)
    else:
        gc = datagen.SurvivalConfig()
        ds = datagen.generate_survival(args.n, args.seed, gc.unconfounded() if args.unconfounded else gc)
    ds = datagen.split(ds, fr, args.seed)
    out = Path(args.out) if args.out else datagen.output_root() / "data"
    print(datagen.write_dataset(ds, out, args.name))


def _cmd_fit_sampler(args):
    ds = datagen.read_dataset(args.data)
    cfg = _apply_flags(SamplerConfig(), args)
    s1 = ds.stage1()
    print(fit_sampler(ds.x[s1], ds.z[s1], ds.w[s1], cfg).save(args.out))


def _cmd_fit_bridge(args):
    ds = datagen.read_dataset(args.data)
    if ds.split is None:
        ds = datagen.split(ds, (0.9, 0.1), ds.seed)
    base = TrainConfig(outcome="cox", binary_x=True) if ds.survival else TrainConfig()
    cfg = _apply_flags(base, args)
    sampler = GaussianSampler.load(args.sampler)
    model = train(BridgeModel(ds.z.shape[1], ds.w.shape[1], cfg), ds, sampler)
    path = save_bridge(model, args.out)
    Path(args.out).with_suffix(".log.csv").write_text(log_to_csv(model.log), encoding="utf-8")
    print(path)


def _cmd_sem_sweep(args):
    cfg = _experiment_config("sem-sweep", args)
    if args.bound_check:
        cfg = cfg.with_section("sweep", bound_check=True)
    return _run_experiment(cfg, args)


def _cmd_demand(args):
    cfg = _experiment_config("demand", args)
    if args.n_values:
        cfg = cfg.with_section("demand", n_values=harness._decode(args.n_values, (0,), "n_values"))
    return _run_experiment(cfg, args)


def _cmd_survival(args):
    cfg = _experiment_config("survival", args)
    changes = {}
    if args.method:
        changes["methods"] = tuple(dict.fromkeys(args.method))
    if args.replications is not None:
        changes["replications"] = args.replications
    if args.n is not None:
        changes["n"] = args.n
    if changes:
        cfg = cfg.with_section("survival", **changes)
    if args.unconfounded:
        cfg = replace(cfg, sections={**cfg.sections, "generator": cfg["generator"].unconfounded()})
    return _run_experiment(cfg, args)


def _cmd_plot(args):
    from .plots import render

    d = Path(args.dir)
    figs = harness.figures_from_json((d / "figures.json").read_text(encoding="utf-8"))
    h = json.loads((d / "manifest.json").read_text(encoding="utf-8"))["config_hash"]
    for spec in figs:
        print(render(spec, d / f"{spec.name}.svg", f"config_hash={h}"))


COMMANDS = {"gen": _cmd_gen, "fit-sampler": _cmd_fit_sampler, "fit-bridge": _cmd_fit_bridge,
            "sem-sweep": _cmd_sem_sweep, "demand": _cmd_demand, "survival": _cmd_survival,
            "plot": _cmd_plot}


def _error_dir(args):
    out = getattr(args, "out", None)
    if out and args.cmd in ("fit-sampler", "fit-bridge"):
        return Path(out).parent
    if args.cmd == "plot":
        return Path(args.dir)
    return Path(out) if out else datagen.output_root()


def _write_error(args, exc, code):
    record = {"command": args.cmd, "error": type(exc).__name__, "message": str(exc),
              "exit_code": code}
    try:
        d = _error_dir(args)
        d.mkdir(parents=True, exist_ok=True)
        (d / "error.json").write_text(json.dumps(record, indent=1) + "\n", encoding="utf-8")
    except OSError:
        pass
    print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        COMMANDS[args.cmd](args)
    except NumericalError as exc:
        _write_error(args, exc, EXIT_NUMERICAL)
        return EXIT_NUMERICAL
    except CausalBridgeError as exc:
        _write_error(args, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except OSError as exc:
        _write_error(args, exc, EXIT_IO)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
