import json

import pytest

from avcodesign.config import (
    ConfigError,
    RunConfig,
    TaskGrid,
    config_digest,
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
    save_config,
)
from avcodesign.designspace import (
    GRID_FAMILIES,
    NoiseGrid,
    SweepSettings,
    Task,
    controller_grid,
)


class TestDefaults:
    def test_round_trip_identity(self):
        cfg = default_config()
        again = config_from_dict(config_to_dict(cfg))
        assert again == cfg

    def test_digest_is_stable_sha256(self):
        a = config_digest(default_config())
        b = config_digest(default_config())
        assert a == b
        assert len(a) == 64
        int(a, 16)

    def test_default_grids_are_the_shipped_ones(self):
        cfg = default_config()
        for family in GRID_FAMILIES:
            assert cfg.grids[family] == controller_grid(family)

    def test_default_task_grid_covers_both_speeds_and_levels(self):
        tasks = default_config().task_grid.tasks()
        cells = {(t.speed, t.curvature_level) for t in tasks}
        assert cells == {(8.0, "low"), (8.0, "high"),
                         (15.0, "low"), (15.0, "high")}

    def test_grid_records_rebuild_identical_labels(self):
        cfg = default_config()
        again = config_from_dict(config_to_dict(cfg))
        for family in GRID_FAMILIES:
            assert [p.label for p in again.grids[family]] == \
                   [p.label for p in cfg.grids[family]]


class TestOverrides:
    def test_partial_grids_keep_other_family_defaults(self):
        obj = {"grids": {"stanley": [{"g": 0.5}]}}
        cfg = config_from_dict(obj)
        assert len(cfg.grids["stanley"]) == 1
        assert cfg.grids["stanley"][0].label == "stanley g=0.5"
        assert cfg.grids["pid"] == controller_grid("pid")

    def test_environment_and_sweep_sections(self):
        cfg = config_from_dict({
            "environment": {"w_scale": 4, "drop_p": 0.1},
            "sweep": {"runs": 5, "seed": 7},
        })
        assert cfg.w_scale == 4.0
        assert cfg.drop_p == 0.1
        assert cfg.sweep == SweepSettings(runs=5, seed=7)

    def test_task_numbers_coerce_to_float(self):
        a = config_from_dict({"task": {"speed": 8, "length": 60}})
        b = config_from_dict({"task": {"speed": 8.0, "length": 60.0}})
        assert a == b
        assert config_digest(a) == config_digest(b)

    def test_task_chain_and_build_tasks(self):
        cfg = config_from_dict({
            "tasks": [
                {"speed": 8.0, "curvature_level": "low"},
                {"speed": 15.0, "curvature_level": "high"},
            ],
            "task_grid": {"speeds": [8.0], "curvature_levels": ["low"]},
        })
        assert len(cfg.task_chain) == 2
        built = cfg.build_tasks()
        # grid cell plus the chain tasks, deduplicated
        assert Task(speed=8.0, curvature_level="low") in built
        assert Task(speed=15.0, curvature_level="high") in built
        assert len(built) == len(set(built))

    def test_chain_absent_falls_back_to_single_task(self):
        cfg = default_config()
        assert cfg.task_chain == (cfg.task,)

    def test_straight_kind_collapses_curvature_levels(self):
        grid = TaskGrid(kinds=("straight",), speeds=(8.0,),
                        curvature_levels=("low", "high"))
        assert len(grid.tasks()) == 1

    def test_noise_grid_section(self):
        cfg = config_from_dict({"noise_grid": {"v_scales": [1, 4]}})
        assert cfg.noise == NoiseGrid(v_scales=(1.0, 4.0))

    def test_query_point_order(self):
        cfg = config_from_dict({
            "task": {"speed": 8.0, "curvature_level": "high"},
            "environment": {"w_scale": 4.0, "drop_p": 0.1},
        })
        assert cfg.query_point() == (8.0, 0.125, 4.0, 0.1)


class TestValidation:
    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown config sections"):
            config_from_dict({"grdis": {}})

    def test_unknown_task_field_rejected(self):
        with pytest.raises(ConfigError, match="unknown task fields"):
            config_from_dict({"task": {"velocity": 8.0}})

    def test_schema_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="schema"):
            config_from_dict({"schema": 99})

    def test_unknown_family_rejected(self):
        with pytest.raises(ConfigError, match="unknown lateral family"):
            RunConfig(lateral_families=("stanley", "mpc2"))
        with pytest.raises(ConfigError, match="unknown family"):
            config_from_dict({"grids": {"fuzzy": []}})

    def test_duplicate_family_rejected(self):
        with pytest.raises(ConfigError, match="duplicate"):
            RunConfig(lateral_families=("stanley", "stanley"))

    def test_enabled_family_needs_a_grid(self):
        with pytest.raises(ConfigError, match="has no grid"):
            RunConfig(grids={"stanley": ()})
        with pytest.raises(ConfigError, match="has no grid"):
            RunConfig(grids={"pid": ()})

    def test_bad_frequency_mode_rejected(self):
        with pytest.raises(ConfigError, match="frequency_mode"):
            RunConfig(frequency_mode="ignored")

    def test_bad_environment_rejected(self):
        with pytest.raises(ConfigError, match="w_scale"):
            RunConfig(w_scale=0.0)
        with pytest.raises(ConfigError, match="drop_p"):
            RunConfig(drop_p=1.0)

    def test_degenerate_projection_rejected(self):
        with pytest.raises(ConfigError, match="projection"):
            RunConfig(projections=(("error", "error"),))


class TestFiles:
    def test_save_load_round_trip(self, tmp_path):
        cfg = config_from_dict({
            "task": {"speed": 15.0, "curvature_level": "high"},
            "diagram": {"lateral_families": ["stanley", "lqr"],
                        "frequency_mode": "neglected"},
            "sweep": {"runs": 3},
        })
        path = tmp_path / "run.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_saved_document_is_plain_json(self, tmp_path):
        path = tmp_path / "run.json"
        save_config(default_config(), path)
        obj = json.loads(path.read_text())
        assert obj["schema"] == 1
        assert set(obj["grids"]) == set(GRID_FAMILIES)

    def test_malformed_json_reports_the_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="broken.json"):
            load_config(path)
