"""Run-configuration round trips, profiles, and validation errors."""

import dataclasses
import json

import pytest

from covergen.config import (
    PROFILES,
    ConfigError,
    ModelConfig,
    RunConfig,
    TrainConfig,
    config_from_doc,
    config_hash,
    config_to_doc,
    load_config,
    profile,
    save_config,
)


class TestDefaults:
    def test_full_scale_defaults(self):
        config = RunConfig()
        assert config.model.canvas == 128
        assert config.model.appearance_dim == 64
        assert config.model.cover_blocks == 10
        assert config.train.steps == 100_000
        assert config.train.batch_size == 6
        assert config.train.lr == 0.001
        assert config.train.beta1 == 0.5
        assert config.train.beta2 == 0.999

    @pytest.mark.parametrize("canvas", [32, 96, 256])
    def test_unsupported_canvas_rejected(self, canvas):
        with pytest.raises(ConfigError, match="canvas must be 64 or 128"):
            ModelConfig(canvas=canvas)

    def test_bad_gan_form_rejected(self):
        with pytest.raises(ConfigError, match="mask_gan_form"):
            TrainConfig(mask_gan_form="wasserstein")

    def test_bad_perception_rejected(self):
        with pytest.raises(ConfigError, match="perception"):
            ModelConfig(perception="vgg19")

    @pytest.mark.parametrize("field_name", ["embedding_dim", "appearance_dim", "noise_dim"])
    def test_nonpositive_dims_rejected(self, field_name):
        with pytest.raises(ConfigError, match=field_name):
            ModelConfig(**{field_name: 0})

    def test_nonpositive_steps_rejected(self):
        with pytest.raises(ConfigError, match="positive"):
            TrainConfig(steps=0)


class TestProfiles:
    def test_known_profiles(self):
        for name in PROFILES:
            assert isinstance(profile(name), RunConfig)

    def test_overfit_profile_is_desk_scale(self):
        config = profile("overfit10")
        assert config.model.canvas == 64
        assert config.train.steps == 200
        assert config.train.batch_size == 6
        assert config.train.lr == 0.001
        assert config.data.limit == 10

    def test_full_profile_is_default(self):
        assert config_to_doc(profile("full")) == config_to_doc(RunConfig())

    def test_unknown_profile_rejected(self):
        with pytest.raises(ConfigError, match="unknown profile"):
            profile("gigantic")


class TestDocumentRoundTrip:
    def test_round_trip_identity(self):
        config = profile("smoke500")
        config.weights = dataclasses.replace(config.weights, pixel=2.5)
        doc = config_to_doc(config)
        back = config_from_doc(json.loads(json.dumps(doc)))
        assert config_to_doc(back) == doc

    def test_empty_doc_gives_defaults(self):
        assert config_to_doc(config_from_doc({})) == config_to_doc(RunConfig())

    def test_non_object_root_rejected(self):
        with pytest.raises(ConfigError, match="root must be an object"):
            config_from_doc([1, 2])

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="/optimizer: unknown section"):
            config_from_doc({"optimizer": {}})

    def test_unknown_field_is_path_qualified(self):
        with pytest.raises(ConfigError, match="/train/frobnicate: unknown field"):
            config_from_doc({"train": {"frobnicate": 1}})

    def test_non_object_section_rejected(self):
        with pytest.raises(ConfigError, match="/model: must be an object"):
            config_from_doc({"model": 3})

    def test_invalid_value_reported_with_section(self):
        with pytest.raises(ConfigError, match="canvas"):
            config_from_doc({"model": {"canvas": 100}})

    def test_file_round_trip(self, tmp_path):
        config = profile("overfit10")
        path = tmp_path / "config.json"
        save_config(config, path)
        assert config_to_doc(load_config(path)) == config_to_doc(config)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(tmp_path / "absent.json")

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)


class TestContentHash:
    def test_stable_and_sensitive(self):
        a, b = RunConfig(), RunConfig()
        assert config_hash(a) == config_hash(b)
        b.train.seed = 1
        assert config_hash(a) != config_hash(b)

    def test_hash_covers_every_section(self):
        base = config_hash(RunConfig())
        for mutate in (
            lambda c: setattr(c.model, "noise_dim", 32),
            lambda c: setattr(c.train, "lr", 0.01),
            lambda c: setattr(c.data, "limit", 3),
            lambda c: setattr(c, "weights", dataclasses.replace(c.weights, box=5.0)),
        ):
            config = RunConfig()
            mutate(config)
            assert config_hash(config) != base
