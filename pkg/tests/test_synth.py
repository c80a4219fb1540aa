import pytest

from streamrules import catalog
from streamrules.incremental import run_stream_incremental
from streamrules.synth import SyntheticConfig, generate_synthetic


def test_same_seed_same_stream():
    cfg = SyntheticConfig(seed=5, ticks=80, scenario="metro")
    assert generate_synthetic(cfg) == generate_synthetic(cfg)


def test_different_seed_different_stream():
    a = generate_synthetic(SyntheticConfig(seed=1, ticks=40))
    b = generate_synthetic(SyntheticConfig(seed=2, ticks=40))
    assert a != b


def test_zero_probability_all_negative(programs):
    cfg = SyntheticConfig(seed=9, ticks=300, scenario="metro", anomaly_probability=0.0)
    stream = generate_synthetic(cfg)
    answers = run_stream_incremental(programs["q1"], stream, {"city"})
    assert all(not atoms for _, atoms in answers)


@pytest.mark.slow
def test_half_probability_balanced_labels(programs):
    cfg = SyntheticConfig(seed=29, ticks=5000, scenario="metro", anomaly_probability=0.5)
    stream = generate_synthetic(cfg)
    answers = run_stream_incremental(programs["q1"], stream, {"city"})
    fraction = sum(1 for _, atoms in answers if atoms) / 5000
    assert 0.35 <= fraction <= 0.65, fraction


def test_bench_preset_density():
    stream = generate_synthetic(catalog.bench_config(ticks=20))
    assert {len(stream.at(t)) for t in stream.times()} == {273}


@pytest.mark.parametrize(
    "name,scenario,outputs,sensors",
    [
        ("q1", "metro", {"city"}, 3),
        ("q2", "conflict", {"x"}, 3),
        ("q3", "zones", {"industrial_box", "highway_box", "urban_box"}, 3),
        ("q4", "rural", {"urban_area"}, 3),
        ("q5", "alerts", {"alert"}, 5),
    ],
)
def test_each_scenario_produces_positives(programs, name, scenario, outputs, sensors):
    cfg = SyntheticConfig(
        seed=11, ticks=120, scenario=scenario,
        sensors_per_sector=sensors, anomaly_probability=0.8,
    )
    stream = generate_synthetic(cfg)
    answers = run_stream_incremental(programs[name], stream, outputs)
    assert any(atoms for _, atoms in answers), scenario


def test_alerts_scenario_requires_enough_sectors():
    with pytest.raises(ValueError, match="10 sectors"):
        SyntheticConfig(scenario="alerts", sectors=5)


def test_unknown_scenario_rejected():
    with pytest.raises(ValueError, match="unknown scenario"):
        SyntheticConfig(scenario="wat")


def test_config_json_round_trip(tmp_path):
    cfg = SyntheticConfig(seed=3, ticks=50, scenario="conflict")
    path = tmp_path / "cfg.json"
    import json

    path.write_text(json.dumps(cfg.to_dict()))
    assert SyntheticConfig.from_json(path) == cfg


def test_shipped_query_configs_load():
    for name in catalog.QUERY_NAMES:
        cfg = catalog.load_config(name)
        assert cfg.ticks == 1000
        stream = generate_synthetic(catalog.load_config(name, ticks=12))
        assert stream.num_ticks() == 12
