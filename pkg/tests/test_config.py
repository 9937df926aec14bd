import pytest

from churnlag.config import ConfigError, RunConfig


def test_defaults_resolve():
    r = RunConfig().resolved()
    assert r["grid", "lag_range"][:3] == [0, 5, 10] and r["grid", "lag_range"][-1] == 365
    assert r["grid", "resample_range"] == list(range(1, 31))
    assert r["run", "jobs"] >= 1


def test_parse_ranges_and_lists():
    cfg = RunConfig.parse("""
[grid]
resample_range = 1-3, 17
lag_range = 0-20
lag_stride = 10
families = random_forest, svm
""")
    r = cfg.resolved()
    assert r["grid", "resample_range"] == [1, 2, 3, 17]
    assert r["grid", "lag_range"] == [0, 10, 20]
    assert r["grid", "families"] == ["random_forest", "svm"]


@pytest.mark.parametrize("text", [
    "[grid]\nresample_rnage = 1\n",
    "[gird]\nfolds = 5\n",
    "[synth]\nn_customers = many\n",
    "no section header\n",
])
def test_bad_files_rejected(text):
    with pytest.raises(ConfigError):
        RunConfig.parse(text)


def test_echo_round_trip():
    cfg = RunConfig.parse("""
[synth]
n_customers = 50
churn_fraction = 0.3
annual_dip_weeks =
weekly_profile = 1,1,1,1,1,0.25,0.25

[grid]
lag_range = 0-100
lag_stride = 50

[run]
seed = 11
output_dir = somewhere
jobs = 2
""")
    text = cfg.resolved().to_ini()
    again = RunConfig.parse(text)
    assert again == cfg
    assert again.resolved().to_ini() == text
    assert again.synth_config() == cfg.synth_config()
    assert again.synth_config().annual_dip_weeks == ()


def test_grid_needs_seed():
    with pytest.raises(ConfigError, match="seed"):
        RunConfig().grid_spec()
    spec = RunConfig({"run": {"seed": 4}, "grid": {"resample_range": [2], "lag_range": "0"}}).grid_spec()
    assert spec.seed == 4 and spec.lag_range == (0,)


def test_grid_rejects_unknown_family():
    with pytest.raises(ConfigError, match="families"):
        RunConfig({"run": {"seed": 1}, "grid": {"families": ["knn"]}}).grid_spec()


def test_invalid_synth_values():
    with pytest.raises(ConfigError):
        RunConfig({"synth": {"churn_fraction": 1.5}}).synth_config()
