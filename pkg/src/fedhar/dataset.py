"""Client time series: CSV ingestion, chronological splitting, windowing.

The split rule is strictly chronological per label: for every label the
earliest floor(test_fraction * n) samples go to the test split and the
rest to train. Windows are then cut inside contiguous runs of one split
only, so no window ever straddles the train/test boundary.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError, LabelError, ParseError, SchemaError

log = logging.getLogger(__name__)

# Outdoor fitness activity catalogue used by WEAR-style recordings; class 0
# is the NULL (no annotated activity) label. Letter codes A.. map to ids 0..
WEAR_LABELS = (
    "NULL",
    "jogging",
    "jogging (rotating arms)",
    "jogging (skipping)",
    "jogging (sidesteps)",
    "jogging (butt-kicks)",
    "stretching (triceps)",
    "stretching (lunging)",
    "stretching (shoulders)",
    "stretching (hamstrings)",
    "stretching (lumbar rotation)",
    "push-ups",
    "push-ups (complex)",
    "sit-ups",
    "sit-ups (complex)",
    "burpees",
    "lunges",
    "lunges (complex)",
    "bench-dips",
)


def letter_code(class_id: int) -> str:
    """Spreadsheet-style letter code for a class id: A..Z, AA.. beyond."""
    if class_id < 0:
        raise ContractError(f"class id must be >= 0, got {class_id}")
    letters = ""
    n = class_id
    while True:
        letters = chr(ord("A") + n % 26) + letters
        n = n // 26 - 1
        if n < 0:
            return letters


@dataclass(frozen=True)
class LabelMap:
    """Ordered label names with contiguous 0-based ids."""

    names: tuple[str, ...]
    index: dict[str, int] = field(repr=False)

    @classmethod
    def from_names(cls, names) -> "LabelMap":
        names = tuple(names)
        if not names:
            raise ConfigError("label map needs at least one name")
        if len(set(names)) != len(names):
            raise ConfigError("label names must be unique")
        return cls(names=names, index={name: i for i, name in enumerate(names)})

    @classmethod
    def wear(cls) -> "LabelMap":
        return cls.from_names(WEAR_LABELS)

    @classmethod
    def synthetic(cls, num_classes: int) -> "LabelMap":
        if num_classes < 2:
            raise ConfigError("synthetic label map needs >= 2 classes")
        names = ["NULL"] + [f"activity_{i:02d}" for i in range(1, num_classes)]
        return cls.from_names(names)

    def __len__(self) -> int:
        return len(self.names)

    def lookup(self, name: str) -> int:
        try:
            return self.index[name]
        except KeyError:
            raise LabelError(f"unknown label {name!r}") from None

    def letters(self) -> list[str]:
        return [letter_code(i) for i in range(len(self.names))]


@dataclass
class LabeledSeries:
    """One client's raw multichannel recording with per-sample labels."""

    client_id: int
    sample_rate_hz: float
    channel_names: tuple[str, ...]
    values: np.ndarray  # (C_ch, L) float64
    labels: np.ndarray  # (L,) int64
    label_map: LabelMap

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.sample_rate_hz <= 0:
            raise ContractError("sample_rate_hz must be positive")
        if self.values.ndim != 2:
            raise ContractError("values must be a (channels, length) array")
        if len(self.channel_names) != self.values.shape[0]:
            raise ContractError("channel_names does not match values rows")
        if self.values.shape[1] < 1:
            raise ContractError("series must contain at least one sample")
        if self.labels.shape != (self.values.shape[1],):
            raise ContractError("labels length does not match series length")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.label_map)
        ):
            raise ContractError("label id outside the label map range")

    @property
    def num_channels(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]


@dataclass
class SensorWindow:
    """Fixed-length slice of a series used as one classification sample."""

    values: np.ndarray  # (C_ch, W) float64
    label: int
    origin: tuple[int, int]  # (client_id, start sample index)


@dataclass
class ClientDataset:
    """Windowed train/test material for one client."""

    client_id: int
    train: list[SensorWindow]
    test: list[SensorWindow]
    label_map: LabelMap
    _train_tensors: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)
    _test_tensors: tuple[np.ndarray, np.ndarray] | None = field(default=None, repr=False)

    def train_tensors(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked (inputs, targets) over the train windows, cached."""
        if self._train_tensors is None:
            self._train_tensors = _stack_windows(self.train)
        return self._train_tensors

    def test_tensors(self) -> tuple[np.ndarray, np.ndarray]:
        if self._test_tensors is None:
            self._test_tensors = _stack_windows(self.test)
        return self._test_tensors


def _stack_windows(windows: list[SensorWindow]) -> tuple[np.ndarray, np.ndarray]:
    if not windows:
        raise ContractError("cannot stack an empty window list")
    inputs = np.stack([w.values for w in windows]).astype(np.float64)
    targets = np.array([w.label for w in windows], dtype=np.int64)
    return inputs, targets


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for one client CSV export."""

    label_column: str
    channel_columns: tuple[str, ...]
    delimiter: str = ","
    sample_rate_hz: float = 50.0

    def __post_init__(self) -> None:
        if not self.channel_columns:
            raise ConfigError("schema needs at least one channel column")
        if self.label_column in self.channel_columns:
            raise ConfigError("label column cannot double as a channel column")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")


def load_csv(
    path: str | Path,
    schema: CsvSchema,
    label_map: LabelMap,
    client_id: int = 0,
) -> LabeledSeries:
    """Read one client's CSV into a LabeledSeries, preserving row order.

    Unknown label strings are rejected rather than silently remapped.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        positions = {name: i for i, name in enumerate(header)}
        missing = [
            col
            for col in (schema.label_column, *schema.channel_columns)
            if col not in positions
        ]
        if missing:
            raise SchemaError(f"{path}: header lacks column(s) {missing}")
        label_pos = positions[schema.label_column]
        channel_pos = [positions[c] for c in schema.channel_columns]

        channels: list[list[float]] = [[] for _ in schema.channel_columns]
        labels: list[int] = []
        for row_num, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) <= max(label_pos, *channel_pos):
                raise ParseError(f"{path}: row {row_num} has too few columns")
            raw_label = row[label_pos].strip()
            if raw_label not in label_map.index:
                raise LabelError(
                    f"{path}: row {row_num}: unknown label {raw_label!r}"
                )
            labels.append(label_map.index[raw_label])
            for chan, pos in enumerate(channel_pos):
                cell = row[pos].strip()
                try:
                    channels[chan].append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_num}: non-numeric value {cell!r} "
                        f"in column {schema.channel_columns[chan]!r}"
                    ) from None

    if not labels:
        raise ParseError(f"{path}: no data rows")
    return LabeledSeries(
        client_id=client_id,
        sample_rate_hz=schema.sample_rate_hz,
        channel_names=schema.channel_columns,
        values=np.array(channels, dtype=np.float64),
        labels=np.array(labels, dtype=np.int64),
        label_map=label_map,
    )


def split_by_label_prefix(
    series: LabeledSeries, test_fraction: float = 0.2
) -> tuple[np.ndarray, np.ndarray]:
    """Chronological per-label split into (train_mask, test_mask).

    For each label with n samples, the earliest floor(test_fraction * n)
    samples of that label are marked test; everything else is train. A
    label too rare to contribute any test sample is kept entirely in
    train and logged as a warning.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError("test_fraction must lie in (0, 1)")
    test_mask = np.zeros(series.length, dtype=bool)
    for label in np.unique(series.labels):
        positions = np.flatnonzero(series.labels == label)
        take = math.floor(test_fraction * positions.size)
        if take == 0:
            log.warning(
                "client %d: label %r has only %d sample(s); no test samples",
                series.client_id,
                series.label_map.names[int(label)],
                positions.size,
            )
            continue
        test_mask[positions[:take]] = True
    return ~test_mask, test_mask


def _contiguous_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Maximal [start, end) runs of True in a boolean mask."""
    padded = np.concatenate(([False], mask, [False]))
    edges = np.flatnonzero(padded[1:] != padded[:-1])
    return [(int(edges[i]), int(edges[i + 1])) for i in range(0, len(edges), 2)]


def _window_label(window_labels: np.ndarray, num_classes: int) -> int:
    counts = np.bincount(window_labels, minlength=num_classes)
    top = counts.max()
    candidates = np.flatnonzero(counts == top)
    if candidates.size == 1:
        return int(candidates[0])
    center = int(window_labels[len(window_labels) // 2])
    if center in candidates:
        return center
    return int(candidates.min())


def make_windows(
    series: LabeledSeries,
    mask: np.ndarray,
    window: int,
    stride: int,
) -> list[SensorWindow]:
    """Cut fixed-size windows from the masked portion of a series.

    Windows come only from maximal contiguous runs of the mask, so a run
    of length L yields (L - window) // stride + 1 windows when L >= window
    and none otherwise. The window label is the majority label over its
    samples; ties go to the center sample's label when it is among the
    tied candidates, else to the lowest tied id.
    """
    if window < 1 or stride < 1:
        raise ConfigError("window and stride must be >= 1")
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (series.length,):
        raise ContractError("mask length does not match series length")
    num_classes = len(series.label_map)
    out: list[SensorWindow] = []
    for run_start, run_end in _contiguous_runs(mask):
        run_len = run_end - run_start
        if run_len < window:
            continue
        for start in range(run_start, run_end - window + 1, stride):
            labels = series.labels[start : start + window]
            out.append(
                SensorWindow(
                    values=series.values[:, start : start + window].copy(),
                    label=_window_label(labels, num_classes),
                    origin=(series.client_id, start),
                )
            )
    return out


def normalize_per_channel(
    series: LabeledSeries, train_mask: np.ndarray
) -> LabeledSeries:
    """Z-score each channel using train-split statistics only.

    Both splits are normalized with the same train-derived mean and
    standard deviation, so no test information leaks into scaling. A
    constant channel is centered and left at unit scale.
    """
    train_mask = np.asarray(train_mask, dtype=bool)
    if not train_mask.any():
        raise ConfigError(f"client {series.client_id}: train split is empty")
    train_vals = series.values[:, train_mask]
    mean = train_vals.mean(axis=1, keepdims=True)
    std = train_vals.std(axis=1, keepdims=True)
    std = np.where(std > 0.0, std, 1.0)
    return LabeledSeries(
        client_id=series.client_id,
        sample_rate_hz=series.sample_rate_hz,
        channel_names=series.channel_names,
        values=(series.values - mean) / std,
        labels=series.labels.copy(),
        label_map=series.label_map,
    )


def build_client_datasets(
    sources: list[LabeledSeries],
    *,
    window: int,
    train_stride: int,
    eval_stride: int | None = None,
    test_fraction: float = 0.2,
    normalize: bool = True,
) -> list[ClientDataset]:
    """Split, normalize, and window every client series.

    A client that ends up with zero train windows is a configuration
    error: the window/stride/test-fraction combination cannot be trained.
    """
    if not sources:
        raise ConfigError("no client series supplied")
    if eval_stride is None:
        eval_stride = train_stride
    datasets: list[ClientDataset] = []
    for series in sources:
        train_mask, test_mask = split_by_label_prefix(series, test_fraction)
        if normalize:
            series = normalize_per_channel(series, train_mask)
        train = make_windows(series, train_mask, window, train_stride)
        test = make_windows(series, test_mask, window, eval_stride)
        if not train:
            raise ConfigError(
                f"client {series.client_id}: no train windows "
                f"(window={window}, stride={train_stride})"
            )
        datasets.append(
            ClientDataset(
                client_id=series.client_id,
                train=train,
                test=test,
                label_map=series.label_map,
            )
        )
    return datasets
