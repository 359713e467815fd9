import pytest

from coad.config import Config
from coad.errors import ConfigurationError


def test_defaults_follow_training_recipe():
    cfg = Config()
    assert (cfg.epochs, cfg.lr, cfg.batch_size) == (100, 1e-4, 16)
    assert (cfg.input_size, cfg.patch_size, cfg.concept_dim, cfg.heads, cfg.ff_width) == (224, 16, 64, 4, 2048)
    assert cfg.num_patches == 196
    assert Config(input_size=64).num_patches == 16


def test_unknown_key_rejected():
    with pytest.raises(ConfigurationError, match="unknown config key"):
        Config.from_mapping({"epochs": 3, "momentum": 0.9})


def test_bad_variant_rejected():
    with pytest.raises(ConfigurationError):
        Config(variant="cnn-cm-dwt")


def test_indivisible_input_rejected():
    with pytest.raises(ConfigurationError):
        Config(input_size=70)


def test_key_value_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# desk run\nvariant = vit-cm\nepochs=3\nlr = 1e-3\nM = 32\ninput_size = 64  # N=16\n")
    cfg = Config.from_file(path)
    assert (cfg.variant, cfg.epochs, cfg.lr, cfg.concept_dim, cfg.input_size) == ("vit-cm", 3, 1e-3, 32, 64)


def test_json_file_must_be_flat(tmp_path):
    path = tmp_path / "run.json"
    path.write_text('{"epochs": 2, "seed": 7}')
    assert Config.from_file(path).seed == 7
    path.write_text('{"epochs": {"n": 2}}')
    with pytest.raises(ConfigurationError):
        Config.from_file(path)


def test_unparseable_value(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("epochs = many\n")
    with pytest.raises(ConfigurationError, match="epochs"):
        Config.from_file(path)


def test_replace_round_trips():
    cfg = Config(seed=3)
    assert Config.from_mapping(cfg.to_dict()) == cfg
    assert cfg.replace(epochs=5).epochs == 5
