import json

import pytest

from airfoil_ddpm.config import (
    LARGE_VARIANT,
    ConfigError,
    RunConfig,
    apply_overrides,
    config_keys,
    from_dict,
    load_config,
    save_config,
)


class TestDefaults:
    def test_paper_setup(self):
        c = RunConfig()
        assert c.dataset.n_target == 1000
        assert c.dataset.a0_range == (0.3, 1.0) and c.dataset.coeff_range == (-0.5, 1.5)
        assert (c.dataset.reynolds, c.dataset.alpha_deg) == (1e6, 5.0)
        assert c.dataset.outlier_percentile == 99.5
        assert c.dataset.split_sizes == (600, 200, 200)
        assert (c.schedule.beta_start, c.schedule.beta_end, c.schedule.t_max) == (1e-3, 0.2, 1000)
        assert (c.model.hidden_layers, c.model.hidden_width) == (4, 32)
        assert (c.training.batch_size, c.training.learning_rate) == (64, 1e-4)

    def test_large_variant(self):
        c = apply_overrides(RunConfig(), LARGE_VARIANT)
        assert c.dataset.n_target == 6000 and c.model.hidden_width == 64
        assert c.dataset.split_sizes == (3600, 1200, 1200)

    def test_every_key_listed(self):
        keys = config_keys()
        for sec in ("dataset", "schedule", "model", "training", "sampling", "paths"):
            assert any(k.startswith(sec + ".") for k in keys)
        assert "training.patience" in keys and "paths.checkpoint" in keys


class TestOverrides:
    def test_string_coercion(self):
        c = apply_overrides(RunConfig(), {"dataset.n_target": "50", "split_sizes": "30,10,10",
                                          "learning_rate": "1e-3", "training.max_steps": "7"})
        assert c.dataset.n_target == 50 and c.dataset.split_sizes == (30, 10, 10)
        assert c.training.learning_rate == 1e-3 and c.training.max_steps == 7

    def test_dash_and_bare_keys(self):
        c = apply_overrides(RunConfig(), {"hidden-width": "16", "max_epochs": 3})
        assert c.model.hidden_width == 16 and c.training.max_epochs == 3

    def test_ambiguous_key(self):
        with pytest.raises(ConfigError, match="ambiguous"):
            apply_overrides(RunConfig(), {"seed": "1"})

    @pytest.mark.parametrize(
        "override",
        [
            {"nope": 1},
            {"dataset.n_target": "abc"},
            {"dataset.n_target": "1.5"},
            {"training.batch_size": 0},
            {"dataset.split_sizes": "1,2"},
            {"dataset.solver": "cfd"},
            {"dataset.n_target": 10},
            {"schedule.beta_end": 1.5},
            {"model.hidden_layers": 0},
        ],
    )
    def test_invalid(self, override):
        with pytest.raises(ConfigError):
            apply_overrides(RunConfig(), override)


class TestFiles:
    def test_roundtrip(self, tmp_path):
        c = apply_overrides(RunConfig(), {"n_target": 80, "split_sizes": "40,20,20", "hidden_width": 8})
        save_config(c, tmp_path / "c.json")
        assert load_config(tmp_path / "c.json") == c

    def test_partial_document(self, tmp_path):
        (tmp_path / "c.json").write_text(json.dumps({"training": {"patience": 7}}))
        c = load_config(tmp_path / "c.json")
        assert c.training.patience == 7 and c.dataset == RunConfig().dataset

    def test_bad_documents(self, tmp_path):
        (tmp_path / "a.json").write_text("{not json")
        with pytest.raises(ConfigError):
            load_config(tmp_path / "a.json")
        with pytest.raises(ConfigError):
            from_dict({"dataset": {"bogus": 1}})
        with pytest.raises(ConfigError):
            from_dict({"dataset": 3})
        with pytest.raises(ConfigError):
            from_dict([1, 2])
