"""INI experiment configuration: strict keys, explicit defaults.

Every knob has a default, so an empty file is a valid experiment; any key
or section the schema does not know is an error, so typos fail loudly
instead of silently running the default. Option names are case-sensitive.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .federation import STOP_RULES, FederationSettings
from .model import ConvStage, ModelConfig
from .synth import SyntheticSpec

_KNOWN_KEYS: dict[str, tuple[str, ...]] = {
    "federation": ("rounds", "local_epochs", "batch_size", "learning_rate", "seed"),
    "early_stopping": ("enabled", "patience", "threshold", "rule"),
    "data": (
        "source",
        "window",
        "train_stride",
        "eval_stride",
        "test_fraction",
        "normalize",
    ),
    "model": ("conv_stages", "fusion_width", "init_scale"),
    "synthetic": (
        "num_clients",
        "num_classes",
        "channels",
        "duration",
        "sample_rate_hz",
        "amplitude_jitter",
        "noise_sigma",
        "alpha",
        "segment_min",
        "segment_max",
        "class_freqs_hz",
    ),
    "csv": (
        "files",
        "label_column",
        "channels",
        "delimiter",
        "sample_rate_hz",
        "labels",
    ),
}


@dataclass
class DataSettings:
    source: str = "synthetic"
    window: int = 100
    train_stride: int = 50
    eval_stride: int | None = None
    test_fraction: float = 0.2
    normalize: bool = True


@dataclass
class ModelSettings:
    conv_stages: tuple[ConvStage, ...] = (ConvStage(8, 9, 2), ConvStage(16, 9, 2))
    fusion_width: int = 64
    init_scale: float = 1.0

    def model_config(self, *, channels: int, window: int, classes: int, seed: int) -> ModelConfig:
        return ModelConfig(
            channels=channels,
            window=window,
            conv_stages=self.conv_stages,
            fusion_width=self.fusion_width,
            classes=classes,
            init_scale=self.init_scale,
            seed=seed,
        )


@dataclass
class CsvSettings:
    files: tuple[str, ...] = ()
    label_column: str = "label"
    channels: tuple[str, ...] = ()
    delimiter: str = ","
    sample_rate_hz: float = 50.0
    labels: tuple[str, ...] | str = "wear"


@dataclass
class ExperimentConfig:
    federation: FederationSettings = field(default_factory=FederationSettings)
    data: DataSettings = field(default_factory=DataSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    csv: CsvSettings = field(default_factory=CsvSettings)

    def snapshot(self) -> dict:
        """JSON-ready echo of every effective setting."""
        return {
            "federation": {
                "rounds": self.federation.rounds,
                "local_epochs": self.federation.local_epochs,
                "batch_size": self.federation.batch_size,
                "learning_rate": self.federation.learning_rate,
                "seed": self.federation.seed,
            },
            "early_stopping": {
                "enabled": self.federation.early_stopping_enabled,
                "patience": self.federation.patience,
                "threshold": self.federation.threshold,
                "rule": self.federation.stop_rule,
            },
            "data": {
                "source": self.data.source,
                "window": self.data.window,
                "train_stride": self.data.train_stride,
                "eval_stride": self.data.eval_stride,
                "test_fraction": self.data.test_fraction,
                "normalize": self.data.normalize,
            },
            "model": {
                "conv_stages": [
                    [s.filters, s.kernel, s.stride] for s in self.model.conv_stages
                ],
                "fusion_width": self.model.fusion_width,
                "init_scale": self.model.init_scale,
            },
            "synthetic": {
                "num_clients": self.synthetic.num_clients,
                "num_classes": self.synthetic.num_classes,
                "channels": self.synthetic.channels,
                "duration": self.synthetic.duration,
                "sample_rate_hz": self.synthetic.sample_rate_hz,
                "amplitude_jitter": self.synthetic.amplitude_jitter,
                "noise_sigma": self.synthetic.noise_sigma,
                "alpha": self.synthetic.alpha,
                "segment_min": self.synthetic.segment_min,
                "segment_max": self.synthetic.segment_max,
                "class_freqs_hz": list(self.synthetic.frequencies()),
            }
            if self.data.source == "synthetic"
            else None,
            "csv": {
                "files": list(self.csv.files),
                "label_column": self.csv.label_column,
                "channels": list(self.csv.channels),
                "delimiter": self.csv.delimiter,
                "sample_rate_hz": self.csv.sample_rate_hz,
                "labels": self.csv.labels
                if isinstance(self.csv.labels, str)
                else list(self.csv.labels),
            }
            if self.data.source == "csv"
            else None,
        }


class _Section:
    """Typed, error-tagged access to one INI section."""

    def __init__(self, name: str, raw: dict[str, str]):
        self.name = name
        self.raw = raw

    def _fail(self, key: str, detail: str) -> ConfigError:
        return ConfigError(f"[{self.name}] {key}: {detail}")

    def get_int(self, key: str, default: int, minimum: int | None = None) -> int:
        text = self.raw.get(key)
        if text is None:
            return default
        try:
            value = int(text)
        except ValueError:
            raise self._fail(key, f"expected an integer, got {text!r}") from None
        if minimum is not None and value < minimum:
            raise self._fail(key, f"must be >= {minimum}, got {value}")
        return value

    def get_float(
        self,
        key: str,
        default: float,
        minimum: float | None = None,
        exclusive_min: bool = False,
    ) -> float:
        text = self.raw.get(key)
        if text is None:
            return default
        try:
            value = float(text)
        except ValueError:
            raise self._fail(key, f"expected a number, got {text!r}") from None
        if minimum is not None:
            if exclusive_min and value <= minimum:
                raise self._fail(key, f"must be > {minimum}, got {value}")
            if not exclusive_min and value < minimum:
                raise self._fail(key, f"must be >= {minimum}, got {value}")
        return value

    def get_bool(self, key: str, default: bool) -> bool:
        text = self.raw.get(key)
        if text is None:
            return default
        lowered = text.strip().lower()
        if lowered in ("true", "yes", "on", "1"):
            return True
        if lowered in ("false", "no", "off", "0"):
            return False
        raise self._fail(key, f"expected a boolean, got {text!r}")

    def get_choice(self, key: str, default: str, choices: tuple[str, ...]) -> str:
        text = self.raw.get(key, default).strip()
        if text not in choices:
            raise self._fail(key, f"must be one of {', '.join(choices)}; got {text!r}")
        return text

    def get_str(self, key: str, default: str) -> str:
        return self.raw.get(key, default)

    def get_list(self, key: str) -> tuple[str, ...]:
        text = self.raw.get(key)
        if text is None:
            return ()
        parts = [p.strip() for chunk in text.splitlines() for p in chunk.split(",")]
        return tuple(p for p in parts if p)


def _parse_conv_stages(section: _Section) -> tuple[ConvStage, ...]:
    """Parse stage specs like "8x9/2, 16x9/2" (filters x kernel / stride)."""
    text = section.raw.get("conv_stages")
    if text is None:
        return ModelSettings().conv_stages
    stages = []
    for token in section.get_list("conv_stages"):
        try:
            fk, stride_text = token.split("/") if "/" in token else (token, "1")
            filters_text, kernel_text = fk.split("x")
            stage = ConvStage(int(filters_text), int(kernel_text), int(stride_text))
        except (ValueError, TypeError):
            raise ConfigError(
                f"[model] conv_stages: bad stage {token!r}, "
                "expected FILTERSxKERNEL/STRIDE like 8x9/2"
            ) from None
        stages.append(stage)
    if not stages:
        raise ConfigError("[model] conv_stages: at least one stage is required")
    return tuple(stages)


def parse_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # keep option names case-sensitive
    try:
        with path.open() as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None

    for section_name in parser.sections():
        if section_name not in _KNOWN_KEYS:
            raise ConfigError(f"unknown section [{section_name}]")
        for key in parser[section_name]:
            if key not in _KNOWN_KEYS[section_name]:
                raise ConfigError(f"unknown key [{section_name}] {key}")

    def section(name: str) -> _Section:
        return _Section(name, dict(parser[name]) if parser.has_section(name) else {})

    fed = section("federation")
    stop = section("early_stopping")
    data = section("data")
    model = section("model")

    federation = FederationSettings(
        rounds=fed.get_int("rounds", 100, minimum=1),
        local_epochs=fed.get_int("local_epochs", 1, minimum=1),
        batch_size=fed.get_int("batch_size", 32, minimum=1),
        learning_rate=fed.get_float("learning_rate", 0.001, minimum=0.0, exclusive_min=True),
        seed=fed.get_int("seed", 0),
        early_stopping_enabled=stop.get_bool("enabled", True),
        patience=stop.get_int("patience", 5, minimum=1),
        threshold=stop.get_float("threshold", 0.01, minimum=0.0),
        stop_rule=stop.get_choice("rule", "best_so_far", STOP_RULES),
    )

    window = data.get_int("window", 100, minimum=1)
    eval_stride_text = data.raw.get("eval_stride")
    data_settings = DataSettings(
        source=data.get_choice("source", "synthetic", ("synthetic", "csv")),
        window=window,
        train_stride=data.get_int("train_stride", 50, minimum=1),
        eval_stride=None if eval_stride_text is None else data.get_int("eval_stride", 50, minimum=1),
        test_fraction=data.get_float("test_fraction", 0.2),
        normalize=data.get_bool("normalize", True),
    )
    if not 0.0 < data_settings.test_fraction < 1.0:
        raise ConfigError(
            f"[data] test_fraction: must be strictly between 0 and 1, "
            f"got {data_settings.test_fraction}"
        )

    model_settings = ModelSettings(
        conv_stages=_parse_conv_stages(model),
        fusion_width=model.get_int("fusion_width", 64, minimum=1),
        init_scale=model.get_float("init_scale", 1.0, minimum=0.0, exclusive_min=True),
    )

    synth = section("synthetic")
    freq_tokens = synth.get_list("class_freqs_hz")
    freqs: tuple[float, ...] | None = None
    if freq_tokens:
        try:
            freqs = tuple(float(t) for t in freq_tokens)
        except ValueError:
            raise ConfigError(
                "[synthetic] class_freqs_hz: expected comma-separated numbers"
            ) from None
    try:
        synthetic = SyntheticSpec(
            num_clients=synth.get_int("num_clients", 6, minimum=1),
            num_classes=synth.get_int("num_classes", 6, minimum=2),
            channels=synth.get_int("channels", 12, minimum=1),
            duration=synth.get_int("duration", 30000, minimum=1),
            sample_rate_hz=synth.get_float("sample_rate_hz", 50.0, minimum=0.0, exclusive_min=True),
            class_freqs_hz=freqs,
            amplitude_jitter=synth.get_float("amplitude_jitter", 0.3, minimum=0.0),
            noise_sigma=synth.get_float("noise_sigma", 0.25, minimum=0.0),
            alpha=synth.get_float("alpha", 0.5),
            segment_min=synth.get_int("segment_min", 150, minimum=1),
            segment_max=synth.get_int("segment_max", 600, minimum=1),
            seed=federation.seed,
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"[synthetic] {exc}") from None

    csv_sec = section("csv")
    labels_text = csv_sec.get_str("labels", "wear").strip()
    labels: tuple[str, ...] | str
    if labels_text == "wear":
        labels = "wear"
    else:
        labels = csv_sec.get_list("labels")
        if not labels:
            raise ConfigError("[csv] labels: expected 'wear' or a comma-separated list")
    csv_settings = CsvSettings(
        files=csv_sec.get_list("files"),
        label_column=csv_sec.get_str("label_column", "label"),
        channels=csv_sec.get_list("channels"),
        delimiter=csv_sec.get_str("delimiter", ","),
        sample_rate_hz=csv_sec.get_float("sample_rate_hz", 50.0, minimum=0.0, exclusive_min=True),
        labels=labels,
    )
    if data_settings.source == "csv":
        if not csv_settings.files:
            raise ConfigError("[csv] files: required when [data] source = csv")
        if not csv_settings.channels:
            raise ConfigError("[csv] channels: required when [data] source = csv")

    if window > synthetic.duration and data_settings.source == "synthetic":
        raise ConfigError(
            f"[data] window: {window} exceeds the synthetic duration {synthetic.duration}"
        )

    return ExperimentConfig(
        federation=federation,
        data=data_settings,
        model=model_settings,
        synthetic=synthetic,
        csv=csv_settings,
    )
