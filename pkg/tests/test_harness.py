import csv
import io
import json
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalbridge.errors import ConfigError
from causalbridge.harness import (ExperimentConfig, FigureSpec, Table, figures_from_json,
                                  figures_to_json, run_demand, run_sem_sweep, run_survival,
                                  write_report)
from causalbridge.plots import emit_plots, render


def tiny_sweep(**kw):
    return (ExperimentConfig.default("sem-sweep", **kw)
            .with_section("sweep", sigma_w=(0.1, 0.5), sigma_z=(0.1, 0.5), sigma_x=(0.1,),
                          n_x=10, n_z=10))


def tiny_demand():
    return (ExperimentConfig.default("demand", seeds=(0, 1))
            .with_section("demand", n_values=(200,), naive_max_epochs=5, naive_hidden=(4,))
            .with_section("train", hidden=(4,), max_epochs=3, k_w=2)
            .with_section("sampler", hidden=(4,), max_epochs=3))


def tiny_survival(**kw):
    return (ExperimentConfig.default("survival")
            .with_section("survival", n=600, replications=10, **kw)
            .with_section("train", k_w=5, max_epochs=30)
            .with_section("sampler", hidden=(4,), max_epochs=3))


@pytest.fixture(scope="module")
def survival_report():
    return run_survival(tiny_survival())


def _read(text):
    return list(csv.DictReader(io.StringIO(text)))


# -- config ------------------------------------------------------------------------

@pytest.mark.parametrize("kind", ["sem-sweep", "demand", "survival"])
def test_default_config_round_trips_through_ini(kind):
    cfg = ExperimentConfig.default(kind)
    back = ExperimentConfig.from_ini(cfg.to_ini())
    assert back == cfg and back.hash == cfg.hash


def test_sparse_ini_fills_defaults():
    cfg = ExperimentConfig.from_ini("# demo\n[experiment]\nkind = demand\n\n[train]\nlr = 0.01\n"
                                    "hidden = \n")
    assert cfg.seeds == tuple(range(20))
    assert cfg["train"].lr == 0.01 and cfg["train"].hidden == ()
    assert cfg["train"].k_w == ExperimentConfig.default("demand")["train"].k_w


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, 1.0), st.lists(st.integers(1, 64), max_size=3),
       st.lists(st.integers(0, 99), min_size=1, max_size=4), st.booleans())
def test_ini_round_trip_property(lr, hidden, seeds, debias):
    cfg = (ExperimentConfig.default("demand", seeds=tuple(seeds))
           .with_section("train", lr=lr, hidden=tuple(hidden), debias=debias))
    assert ExperimentConfig.from_ini(cfg.to_ini()) == cfg


def test_hash_ignores_output_dir_but_not_values():
    a = ExperimentConfig.default("survival")
    assert ExperimentConfig.default("survival", out_dir="/tmp/x").hash == a.hash
    assert a.with_section("survival", n=5000).hash != a.hash


@pytest.mark.parametrize("text", [
    "[train]\nlr = 1\n",
    "[experiment]\nkind = nope\n",
    "[experiment]\nkind = demand\n[survival]\nn = 3\n",
    "[experiment]\nkind = demand\n[train]\nbogus = 1\n",
    "[experiment]\nkind = demand\n[train]\nlr = fast\n",
    "[experiment]\nkind = demand\nseeds = \n",
    "[experiment\nkind = demand\n",
])
def test_bad_ini_is_config_error(text):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_ini(text)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        ExperimentConfig.load(tmp_path / "absent.ini")


# -- tables and reports ----------------------------------------------------------------

def test_table_csv_carries_hash_per_row():
    text = Table(("a", "b"), [(1, 0.1), (np.int64(2), None)]).to_csv("abc")
    assert text.splitlines() == ["a,b,config_hash", "1,0.1,abc", "2,,abc"]


def test_sem_sweep_rows_and_figures():
    rep = run_sem_sweep(tiny_sweep())
    assert len(rep.tables["sweep"].rows) == 4
    lemma = [r for r in rep.tables["sweep"].rows if r[1] == 0.1 and r[2] == 0.1]
    assert lemma[0][5] < 1e-10
    heat = [f for f in rep.figures if f.kind == "heatmap"]
    assert len(heat) == 2
    xl, yl, vals = heat[0].grid
    assert np.asarray(vals).size == len(xl) * len(yl) == 4


def test_sem_sweep_bound_table():
    rep = run_sem_sweep(tiny_sweep().with_section("sweep", bound_check=True, bound_n_mi=5000))
    rows = rep.tables["bound"].rows
    assert len(rows) == 4 and all(r[7] for r in rows)


def test_write_report_is_deterministic(tmp_path):
    cfg = tiny_sweep()
    a = write_report(run_sem_sweep(cfg), tmp_path / "a")
    b = write_report(run_sem_sweep(cfg), tmp_path / "b")
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert man["config_hash"] == cfg.hash and set(man["files"]) == {"sweep.csv"}
    assert {r["config_hash"] for r in _read((a / "sweep.csv").read_text())} == {cfg.hash}
    assert ExperimentConfig.load(a / "config.ini") == cfg


def test_demand_one_row_per_method_and_seed():
    rep = run_demand(tiny_demand())
    rows = rep.tables["mse"].rows
    assert sorted((r[0], r[2]) for r in rows) == sorted(
        (m, s) for m in ("naive", "cb", "cb+ae") for s in (0, 1))
    assert all(r[3] > 0 for r in rows)
    assert len(rep.tables["curves"].rows) == 6 * 10
    assert {f.kind for f in rep.figures} == {"box", "lines"}


def test_wrong_kind_rejected():
    with pytest.raises(ConfigError):
        run_demand(ExperimentConfig.default("survival"))
    with pytest.raises(ConfigError):
        run_survival(tiny_survival(methods=("coxph-uniform", "magic")))


def test_survival_table_has_five_methods(survival_report):
    rows = survival_report.tables["results"].rows
    assert [r[0] for r in rows] == ["coxph-uniform", "coxph-ipw", "coxph-ow", "cb", "cb+ae"]
    assert all(r[2] < r[1] < r[3] for r in rows)
    assert len(survival_report.tables["replicates"].rows) == 50


def test_survival_reference_lines(survival_report):
    fig = next(f for f in survival_report.figures if f.name == "hazard_ratios")
    assert [h[0] for h in fig.hlines] == [1.0, pytest.approx(0.75)]


def test_coxph_rows_asymptotic_bridge_rows_quantile(survival_report):
    from causalbridge.survival import quantile_ci
    res = {r[0]: r for r in survival_report.tables["results"].rows}
    reps = survival_report.tables["replicates"].rows
    for m in ("cb", "cb+ae"):
        logs = [r[3] for r in reps if r[0] == m]
        assert res[m][2:4] == pytest.approx(quantile_ci(logs))
    # a Wald interval is symmetric on the log scale
    lo, hi, hr = res["coxph-ipw"][2], res["coxph-ipw"][3], res["coxph-ipw"][1]
    assert np.log(hr / lo) == pytest.approx(np.log(hi / hr))


def test_survival_km_curves_start_near_one(survival_report):
    km = survival_report.tables["km"].rows
    for g in (0, 1):
        vals = [r[3] for r in km if r[1] == g]
        assert 0.9 < vals[0] <= 1.0 and all(a >= b for a, b in zip(vals, vals[1:]))


# -- figures ----------------------------------------------------------------------------

def test_figures_json_round_trip():
    figs = [FigureSpec("h", "errorbar", series=[{"label": "a", "y": 1.0, "lo": 0.5, "hi": 2.0}],
                       hlines=((1.0, "null"),)),
            FigureSpec("m", "heatmap", grid=(["a"], ["b"], [[0.5]]))]
    assert figures_from_json(figures_to_json(figs)) == figs


def test_empty_series_renders_axes_only(tmp_path):
    p = render(FigureSpec("e", "lines", "empty"), tmp_path / "e.svg")
    assert p.read_text().startswith("<?xml")


def test_heatmap_cell_count(tmp_path):
    vals = np.arange(6.0).reshape(2, 3).tolist()
    p = render(FigureSpec("h", "heatmap", grid=(["1", "2", "3"], ["a", "b"], vals)), tmp_path / "h.svg")
    # one white value label per cell
    styles = re.findall(r'<text style="([^"]*)"', p.read_text())
    assert sum("#ffffff" in s for s in styles) == 6


def test_rendered_svg_is_byte_identical(tmp_path, survival_report):
    a = emit_plots(survival_report, tmp_path / "a")
    b = emit_plots(survival_report, tmp_path / "b")
    assert len(a) == len(survival_report.figures)
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()


def test_bad_figure_kind(tmp_path):
    with pytest.raises(ConfigError):
        render(FigureSpec("x", "pie"), tmp_path / "x.svg")
    with pytest.raises(ConfigError):
        render(FigureSpec("x", "heatmap"), tmp_path / "x.svg")
