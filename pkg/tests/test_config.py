import pytest

from polarkit import config as C
from polarkit.trainer import TrainConfig


def test_defaults_validate_and_build_objects():
    cfg = C.load_config(env={})
    assert C.split_spec(cfg).ratios == (0.85, 0.15)
    assert isinstance(C.train_config(cfg), TrainConfig)
    assert list(C.feature_spaces(cfg)) == ["a", "b"]
    assert C.grid(cfg)[0] == 0.0 and C.grid(cfg)[-1] == 1.0


def test_file_then_overrides(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("seed: 7\ntrain:\n  epochs: 3\n  loss: focal\nensemble: {alpha: 0.4}\n")
    cfg = C.load_config(path, {"train.epochs": 5}, env={})
    assert cfg["seed"] == 7 and cfg["train"]["loss"] == "focal"
    assert cfg["train"]["epochs"] == 5
    assert cfg["ensemble"]["alpha"] == 0.4
    # untouched defaults survive
    assert cfg["train"]["batch_size"] == 32


def test_env_var_names_default_file(tmp_path):
    path = tmp_path / "env.yaml"
    path.write_text("seed: 11\n")
    assert C.load_config(env={C.ENV_VAR: str(path)})["seed"] == 11
    # an explicit path wins over the environment
    other = tmp_path / "explicit.yaml"
    other.write_text("seed: 12\n")
    assert C.load_config(other, env={C.ENV_VAR: str(path)})["seed"] == 12


def test_int_promoted_to_float():
    cfg = C.load_config(overrides={"train.gamma": 1}, env={})
    assert cfg["train"]["gamma"] == 1.0 and isinstance(cfg["train"]["gamma"], float)


@pytest.mark.parametrize("key,value", [
    ("train.nonsense", 1), ("nope", 1), ("train", 3), ("train.epochs", "five"),
    ("train.epochs", 2.5), ("train.shuffle", "yes"), ("split.ratios", 0.5),
    ("train.loss", "hinge"), ("ensemble.alpha", 1.5), ("ensemble.threshold", 1.0),
    ("split.ratios", [0.5, 0.4]), ("format", "xml"), ("subtask", "subtask9"),
    ("ensemble.grid", [0.1, 2.0]), ("ablate.losses", ["mse"]),
    ("features.a.n_features", 1000), ("train.mode", "parallel"),
])
def test_bad_values_rejected(key, value):
    with pytest.raises(C.ConfigError):
        C.load_config(overrides={key: value}, env={})


def test_bad_files(tmp_path):
    with pytest.raises(C.ConfigError):
        C.load_config(tmp_path / "missing.yaml", env={})
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(C.ConfigError):
        C.load_config(tmp_path / "list.yaml", env={})
    (tmp_path / "broken.yaml").write_text("a: [1, 2\n")
    with pytest.raises(C.ConfigError):
        C.load_config(tmp_path / "broken.yaml", env={})


def test_parse_value_is_yaml():
    assert C.parse_value("[2, 5]") == [2, 5]
    assert C.parse_value("true") is True
    assert C.parse_value("0.25") == 0.25
    assert C.parse_value("wbce") == "wbce"
    assert C.parse_value("null") is None


def test_dump_round_trip(tmp_path):
    cfg = C.load_config(overrides={"seed": 3, "features.a.ngram_range": [2, 3]}, env={})
    path = tmp_path / "dumped.yaml"
    path.write_text(C.dump(cfg))
    assert C.load_config(path, env={}) == cfg


def test_flatten_lists_every_leaf():
    keys = [k for k, _ in C.flatten(C.DEFAULTS)]
    assert "train.epochs" in keys and "features.b.signed" in keys and "seed" in keys
    assert len(keys) == len(set(keys))
