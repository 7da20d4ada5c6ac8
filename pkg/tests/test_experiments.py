import json
import math

import pytest

from lpplab.experiments import (CATALOG, ConfigError, ExperimentConfig, ReproductionError,
                                ResultExistsError, UnknownExperimentError, build_config,
                                default_config, load_config_file, parse_override, run_experiment)
from lpplab.experiments.runner import Check, Verdict, persist

# tiny versions of every catalog entry: enough to exercise the code paths
SMALL = {
    "rains": {"replicas": [2000], "bootstrap_B": 100},
    "stationarity": {"replicas": [200], "size": 10, "probe": 5, "mean_vertex": 5,
                     "mean_replicas": 500, "ne_m": 6, "ne_n": 4, "ne_k": 3, "ne_replicas": 200},
    "variance-identity": {"replicas": [1000]},
    "moment-identity": {"replicas": [1000]},
    "bulk-moments": {"ladder": [8, 16, 32], "replicas": [200]},
    "boundary-kpz": {"ladder": [8, 16, 32], "replicas": [200]},
    "gauss": {"ladder": [8, 16, 32], "replicas": [200]},
    "tails": {"N": 16, "replicas": [200], "ks_samples": 500, "unit_replicas": 1000},
    "exit": {"ladder": [16, 32, 64], "replicas": [200], "decay_N": 32, "decay_replicas": 100},
    "inc-tail": {"N": 16, "replicas": [200]},
    "mean-gap": {"ladder": [8, 16, 32], "replicas": [200]},
    "var-lipschitz": {"ladder": [8, 16], "replicas": [200], "cal_N": 4, "cal_replicas": 1000},
    "sums-tails": {"replicas": [1000], "martingale_replicas": 200},
}


def small(name, **extra):
    return build_config(name, overrides=list({**SMALL[name], **extra}.items()))


def test_catalog_is_complete():
    assert set(CATALOG) == set(SMALL)
    assert set(CATALOG) == {"rains", "stationarity", "variance-identity", "moment-identity",
                            "bulk-moments", "boundary-kpz", "gauss", "tails", "exit", "inc-tail",
                            "mean-gap", "var-lipschitz", "sums-tails"}
    covered = {c for e in CATALOG.values() for c in e.criteria}
    assert {str(i) for i in range(2, 18) if i != 14} <= covered


@pytest.mark.parametrize("name", sorted(SMALL))
def test_every_entry_emits_its_criteria(name):
    res = run_experiment(small(name))
    assert sorted(v.criterion for v in res.verdicts) == sorted(CATALOG[name].criteria)
    for v in res.verdicts:
        assert v.skipped is None
        assert v.line().startswith(f"CRITERION {v.criterion} ")
    json.dumps(res.to_json())


def test_worker_count_does_not_change_results():
    a = run_experiment(small("rains", replicas=[1500], worker_count=1))
    b = run_experiment(small("rains", replicas=[1500], worker_count=2))
    assert json.dumps(a.payload(), sort_keys=True) == json.dumps(b.payload(), sort_keys=True)
    assert a.rows == b.rows


def test_persist_and_resume(tmp_path):
    out = tmp_path / "res"
    cfg = small("variance-identity", output=str(out))
    run_experiment(cfg)
    data = json.loads((out / "variance-identity.json").read_text())
    assert data["schema"] == 1
    assert data["experiment"] == "variance-identity"
    assert "timing" in data
    assert (out / "variance-identity.csv").read_text().startswith("experiment,N,param")
    with pytest.raises(ResultExistsError):
        run_experiment(small("variance-identity", output=str(out)))
    run_experiment(small("variance-identity", output=str(out), on_existing="verify", worker_count=2))
    with pytest.raises(ReproductionError):
        run_experiment(small("variance-identity", output=str(out), on_existing="verify",
                             master_seed=99))


def test_verify_detects_csv_tampering(tmp_path):
    cfg = small("moment-identity", output=str(tmp_path))
    run_experiment(cfg)
    csv_path = tmp_path / "moment-identity.csv"
    csv_path.write_text(csv_path.read_text() + "tampered\n")
    with pytest.raises(ReproductionError):
        run_experiment(small("moment-identity", output=str(tmp_path), on_existing="verify"))


def test_unknown_experiment():
    with pytest.raises(UnknownExperimentError, match="unknown experiment"):
        default_config("bogus")


@pytest.mark.parametrize("key,value,path", [
    ("colour", 1, "colour"),
    ("params.colour", 1, "params.colour"),
    ("replicas", [10], "replicas[0]"),
    ("ladder", [16, 8], "ladder"),
    ("master_seed", -1, "master_seed"),
    ("worker_count", 0, "worker_count"),
    ("on_existing", "overwrite", "on_existing"),
])
def test_config_errors_carry_field_path(key, value, path):
    with pytest.raises(ConfigError) as err:
        build_config("bulk-moments", overrides=[(key, value)])
    assert err.value.path == path


def test_config_file_layering(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("replicas: [3000]\nparams:\n  w: 0.6\n")
    cfg = build_config("rains", load_config_file(f), [("w", 0.58)])
    assert cfg.replicas == [3000]
    assert cfg.params["w"] == 0.58
    f.write_text("params:\n  nonsense: 1\n")
    with pytest.raises(ConfigError):
        build_config("rains", load_config_file(f))
    f.write_text("name: tails\n")
    with pytest.raises(ConfigError):
        build_config("rains", load_config_file(f))
    f.write_text("- a list\n")
    with pytest.raises(ConfigError):
        load_config_file(f)


def test_parse_override():
    assert parse_override("w=0.5") == ("w", 0.5)
    assert parse_override("ladder=[8, 16]") == ("ladder", [8, 16])
    assert parse_override("name=rains") == ("name", "rains")
    with pytest.raises(ConfigError):
        parse_override("novalue")


def test_int_params_become_float():
    cfg = build_config("rains", overrides=[("w", 1)])
    assert isinstance(cfg.params["w"], float)


def test_replicas_per_point():
    cfg = ExperimentConfig("x", ladder=[1, 2, 3], replicas=[100, 200, 300]).validate()
    assert cfg.replicas_at(1) == 200
    assert ExperimentConfig("x", ladder=[1, 2], replicas=[150]).validate().replicas_at(1) == 150
    with pytest.raises(ConfigError):
        ExperimentConfig("x", ladder=[1, 2, 3], replicas=[100, 200]).validate()


def test_check_and_verdict():
    c = Check("x", 1.0, 0.0, 3.0)
    assert c.margin == 1.0 and c.passed
    assert not Check("y", math.nan, 0, 1).passed
    v = Verdict.from_checks("5", [c, Check("z", 5.0, hi=4.0)])
    assert not v.passed and v.margin == -1.0
    assert v.line() == "CRITERION 5 FAIL margin=-1"
    assert Verdict.skip("9", "no data").line() == "CRITERION 9 SKIP skipped: no data"
    with pytest.raises(ValueError):
        Verdict.from_checks("1", [])


def test_persist_requires_clean_target(tmp_path):
    res = run_experiment(small("rains"))
    persist(res, tmp_path)
    with pytest.raises(ResultExistsError):
        persist(res, tmp_path)
    persist(res, tmp_path, on_existing="verify")
