import pytest

from fedhar.config import parse_config
from fedhar.errors import ConfigError
from fedhar.model import ConvStage


def write_config(tmp_path, text):
    path = tmp_path / "exp.ini"
    path.write_text(text)
    return path


class TestDefaults:
    def test_empty_file_yields_documented_defaults(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, ""))
        fed = cfg.federation
        assert fed.rounds == 100
        assert fed.local_epochs == 1
        assert fed.batch_size == 32
        assert fed.learning_rate == 0.001
        assert fed.patience == 5
        assert fed.threshold == 0.01
        assert cfg.data.window == 100
        assert cfg.data.train_stride == 50
        assert cfg.data.test_fraction == 0.2
        assert cfg.data.source == "synthetic"
        assert cfg.model.conv_stages == (ConvStage(8, 9, 2), ConvStage(16, 9, 2))

    def test_missing_file_is_config_error(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            parse_config(tmp_path / "nope.ini")


class TestStrictness:
    def test_unknown_section_rejected(self, tmp_path):
        path = write_config(tmp_path, "[federaton]\nrounds = 5\n")
        with pytest.raises(ConfigError, match=r"\[federaton\]"):
            parse_config(path)

    def test_unknown_key_rejected_with_section_name(self, tmp_path):
        path = write_config(tmp_path, "[federation]\nround = 5\n")
        with pytest.raises(ConfigError, match=r"\[federation\] round"):
            parse_config(path)

    def test_keys_are_case_sensitive(self, tmp_path):
        path = write_config(tmp_path, "[federation]\nRounds = 5\n")
        with pytest.raises(ConfigError, match="Rounds"):
            parse_config(path)


class TestValidation:
    @pytest.mark.parametrize(
        "body,needle",
        [
            ("[federation]\nrounds = 0\n", "rounds"),
            ("[federation]\nlocal_epochs = 0\n", "local_epochs"),
            ("[federation]\nbatch_size = -3\n", "batch_size"),
            ("[federation]\nlearning_rate = 0\n", "learning_rate"),
            ("[early_stopping]\npatience = 0\n", "patience"),
            ("[early_stopping]\nthreshold = -0.1\n", "threshold"),
            ("[early_stopping]\nrule = sometimes\n", "rule"),
            ("[data]\ntest_fraction = 1.0\n", "test_fraction"),
            ("[data]\ntest_fraction = 0\n", "test_fraction"),
            ("[data]\nwindow = 0\n", "window"),
            ("[federation]\nrounds = five\n", "integer"),
            ("[federation]\nlearning_rate = fast\n", "number"),
            ("[data]\nnormalize = perhaps\n", "boolean"),
            ("[model]\nconv_stages = 8y9/2\n", "conv_stages"),
            ("[synthetic]\nclass_freqs_hz = 1.0, abc\n", "class_freqs_hz"),
        ],
    )
    def test_bad_values_name_the_key(self, tmp_path, body, needle):
        with pytest.raises(ConfigError, match=needle):
            parse_config(write_config(tmp_path, body))

    def test_csv_source_requires_files_and_channels(self, tmp_path):
        path = write_config(tmp_path, "[data]\nsource = csv\n")
        with pytest.raises(ConfigError, match=r"\[csv\]"):
            parse_config(path)

    def test_window_larger_than_duration_rejected(self, tmp_path):
        path = write_config(
            tmp_path, "[data]\nwindow = 500\n\n[synthetic]\nduration = 400\n"
        )
        with pytest.raises(ConfigError, match="window"):
            parse_config(path)


class TestParsing:
    def test_round_trip_of_explicit_values(self, tmp_path):
        path = write_config(
            tmp_path,
            """
[federation]
rounds = 12
batch_size = 16
seed = 42

[early_stopping]
enabled = false
patience = 3
threshold = 0.05
rule = window_range

[data]
source = synthetic
window = 60
train_stride = 30
eval_stride = 60

[model]
conv_stages = 4x5/1, 8x3/2
fusion_width = 32

[synthetic]
num_clients = 4
num_classes = 3
channels = 6
duration = 5000
alpha = inf
""",
        )
        cfg = parse_config(path)
        assert cfg.federation.rounds == 12
        assert cfg.federation.seed == 42
        assert cfg.federation.early_stopping_enabled is False
        assert cfg.federation.stop_rule == "window_range"
        assert cfg.data.eval_stride == 60
        assert cfg.model.conv_stages == (ConvStage(4, 5, 1), ConvStage(8, 3, 2))
        assert cfg.model.fusion_width == 32
        assert cfg.synthetic.num_clients == 4
        assert cfg.synthetic.alpha == float("inf")
        assert cfg.synthetic.seed == 42  # follows the federation seed

    def test_stage_without_stride_defaults_to_one(self, tmp_path):
        path = write_config(tmp_path, "[model]\nconv_stages = 4x5\n")
        assert parse_config(path).model.conv_stages == (ConvStage(4, 5, 1),)

    def test_csv_settings_parsed(self, tmp_path):
        path = write_config(
            tmp_path,
            """
[data]
source = csv

[csv]
files = a.csv, b.csv
channels = ax, ay, az
labels = NULL, walk, run
sample_rate_hz = 25
""",
        )
        cfg = parse_config(path)
        assert cfg.csv.files == ("a.csv", "b.csv")
        assert cfg.csv.channels == ("ax", "ay", "az")
        assert cfg.csv.labels == ("NULL", "walk", "run")
        assert cfg.csv.sample_rate_hz == 25.0

    def test_snapshot_reflects_source(self, tmp_path):
        cfg = parse_config(write_config(tmp_path, ""))
        snap = cfg.snapshot()
        assert snap["csv"] is None
        assert snap["synthetic"]["num_clients"] == 6
        assert snap["federation"]["rounds"] == 100
        assert len(snap["synthetic"]["class_freqs_hz"]) == 5
