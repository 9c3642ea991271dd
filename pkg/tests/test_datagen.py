import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from causalbridge.datagen import (DEMAND_GRID, SurvivalConfig, demand_equations,
                                  demand_ground_truth, frozen_demand_truth, g_demand,
                                  generate_demand, generate_sem, generate_survival, read_dataset,
                                  split, write_dataset)
from causalbridge.errors import ConfigError
from causalbridge.sem import SemParams
from causalbridge.survival import fit_coxph


def test_g_symmetry_centre_and_left_end():
    # oracle: g_demand_values (mpmath, 30 digits)
    assert g_demand(5.0) == 0.5
    assert g_demand(0.0) == pytest.approx(0.08333333333333333, abs=1e-15)
    assert g_demand(2.5) == pytest.approx(-1.6197916666388907, rel=1e-13)


def test_g_is_continuous_on_grid():
    d = np.linspace(0, 10, 1001)
    assert np.max(np.abs(g_demand(d + 1e-9) - g_demand(d))) < 1e-6


def test_noise_free_equations_at_centre():
    c1, c2, v, p, y = demand_equations(np.array([5.0]), *np.zeros((5, 1)))
    # oracle: g_demand_values; cos(pi) = -1 so C2 = -2 and P = 34.5
    assert c1[0] == pytest.approx(0.0, abs=1e-15)
    assert c2[0] == -2.0
    assert v[0] == 48.5
    assert p[0] == 34.5
    assert y[0] == pytest.approx(53.65439885614127, rel=1e-12)


def test_demand_latent_is_uniform_and_seeded():
    a = generate_demand(20_000, 0, debug=True)
    assert abs(a.latent.mean() - 5.0) < 3 * (10 / np.sqrt(12)) / np.sqrt(20_000)
    b = generate_demand(20_000, 0, debug=True)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.z, b.z)
    assert generate_demand(1000, 0).latent is None


def test_demand_cost_shifter_variance():
    z = generate_demand(200_000, 5).z
    # two amplitude-2 sinusoids of uniform phase (variance 2 each) plus unit noise
    total = z[:, 0].var() + z[:, 1].var()
    se = np.sqrt(sum(((c - c.mean()) ** 2).var() for c in z.T) / z.shape[0])
    assert abs(total - 6.0) < 4 * se


@pytest.mark.parametrize("gen", [generate_demand, generate_sem, generate_survival])
def test_generators_are_pure_in_n_and_seed(gen):
    a, b, c = gen(300, 8), gen(300, 8), gen(300, 9)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


def test_demand_unshared_stages():
    ds = generate_demand(500, 1, share=False)
    assert ds.n == 1000 and ds.stage1().sum() == 500 and ds.stage2().sum() == 500
    assert not (ds.stage1() & ds.stage2()).any()


def test_ground_truth_reproducible_and_matches_frozen_file():
    m1, se1 = demand_ground_truth(mc_n=10 ** 6, seed=1)
    m2, se2 = demand_ground_truth(mc_n=10 ** 6, seed=2)
    assert np.all(np.abs(m1 - m2) < 3 * np.hypot(se1, se2))
    grid, truth = frozen_demand_truth()
    np.testing.assert_array_equal(grid, DEMAND_GRID)
    assert np.all(np.abs(m1 - truth) < 4 * se1)


def test_frozen_truth_file_records_oracle_run():
    from causalbridge.datagen import TRUTH_FILE
    blob = json.loads(TRUTH_FILE.read_text())
    assert blob["mc_n"] == 10 ** 7 and len(blob["truth"]) == 10
    # truth(20), the grid point nearest 20, from the committed 10^7 run
    assert blob["truth"][5] == pytest.approx(235.22018236493264)


def test_ground_truth_vanishes_at_zero_price():
    m, _ = demand_ground_truth(np.array([1e-9]), mc_n=10 ** 5)
    assert abs(m[0]) < 1e-6


def test_sem_generator_uses_params():
    ds = generate_sem(50_000, 3, SemParams(alpha_yx=2.0))
    assert ds.kind == "sem" and ds.meta["alpha_yx"] == 2.0
    assert np.var(ds.w) == pytest.approx(2.0, rel=0.03)


def test_small_samples_rejected():
    with pytest.raises(ConfigError):
        generate_demand(10, 0)
    with pytest.raises(ConfigError):
        generate_survival(5, 0)


# -- survival generator --------------------------------------------------------------

@pytest.fixture(scope="module")
def big_survival():
    return generate_survival(100_000, 2024)


def test_naive_cox_is_confounded_upward(big_survival):
    ds = big_survival
    fit = fit_coxph(ds.x[:, None], ds.time, ds.event)
    # oracle: survival_large_sample (statsmodels PHReg) gives 2.368
    assert np.exp(fit.beta[0]) == pytest.approx(2.368186510174305, rel=1e-6)
    assert np.exp(fit.beta[0]) > 1


def test_oracle_adjustment_recovers_planted_effect(big_survival):
    ds = big_survival
    fit = fit_coxph(np.column_stack([ds.x, ds.latent]), ds.time, ds.event)
    assert fit.beta[0] == pytest.approx(-0.2770092354450993, abs=1e-6)
    assert abs(fit.beta[0] - np.log(0.75)) < 2 * fit.se[0]


def test_unconfounded_generator_gives_planted_hr():
    ds = generate_survival(100_000, 2025, SurvivalConfig().unconfounded())
    hr = np.exp(fit_coxph(ds.x[:, None], ds.time, ds.event).beta[0])
    assert 0.70 <= hr <= 0.80
    assert hr == pytest.approx(0.745774888405576, rel=1e-6)


def test_survival_event_fraction_near_config():
    ds = generate_survival(20_000, 7)
    assert abs(ds.event.mean() - SurvivalConfig().event_fraction) < 0.02


# -- splitting and io ---------------------------------------------------------------------

def test_split_sizes_and_partition():
    ds = split(generate_demand(1000, 0), (0.9, 0.1), seed=4)
    assert (ds.split == "train").sum() == 900 and (ds.split == "val").sum() == 100
    again = split(generate_demand(1000, 0), (0.9, 0.1), seed=4)
    np.testing.assert_array_equal(ds.split, again.split)


@settings(max_examples=30, deadline=None)
@given(st.integers(20, 400), st.floats(0.1, 0.8), st.floats(0.05, 0.15), st.integers(0, 99))
def test_split_labels_partition_rows(n, a, b, seed):
    ds = split(generate_sem(n, seed), (a, b, 1 - a - b), seed)
    counts = [(ds.split == k).sum() for k in ("train", "val", "test")]
    assert sum(counts) == n and min(counts) > 0


def test_split_errors():
    ds = generate_sem(20, 0)
    with pytest.raises(ConfigError):
        split(ds, (0.5, 0.4))
    with pytest.raises(ConfigError):
        split(ds, (0.99, 0.01))


def test_dataset_csv_round_trip(tmp_path):
    ds = split(generate_survival(300, 5), (0.8, 0.1, 0.1), 5)
    path = write_dataset(ds, tmp_path, "s")
    back = read_dataset(path)
    for k in ("x", "z", "w", "time", "event", "latent", "stage", "split"):
        np.testing.assert_array_equal(getattr(back, k), getattr(ds, k))
    meta = json.loads(path.with_suffix(".json").read_text())
    assert meta["config_hash"] == ds.config_hash()
    assert path.read_text().splitlines()[0].startswith("x,z0,z1,z2,z3,w0")
