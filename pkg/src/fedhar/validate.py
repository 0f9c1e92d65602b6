"""Built-in verification suite runnable from the CLI.

Every check recomputes its expected answer independently of the code
under test (closed forms, finite differences, brute-force counting), and
looks the tested functions up through their modules at call time, so a
regression anywhere in the import chain is caught here.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import dataset as dataset_mod
from . import federation as federation_mod
from . import model as model_mod

log = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_fedavg_oracle(instances: int = 100, seed: int = 0) -> CheckResult:
    """Weighted-mean aggregation against np.average, 1e-12 per coordinate."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        k = int(rng.integers(2, 9))
        p = int(rng.integers(10, 1001))
        weights = rng.integers(1, 501, size=k)
        vectors = rng.standard_normal((k, p))
        shapes = (("w", (p,)),)
        inputs = [
            federation_mod.AggregationInput(
                client_id=cid,
                params=model_mod.ModelParams(vectors[cid].copy(), shapes, "oracle"),
                n_examples=int(weights[cid]),
            )
            for cid in range(k)
        ]
        got = federation_mod.aggregate_fedavg(inputs).flat
        expected = np.average(vectors, axis=0, weights=weights)
        worst = max(worst, float(np.abs(got - expected).max()))
        if worst > 1e-12:
            return CheckResult(
                "fedavg_oracle", False,
                f"coordinate deviation {worst:.3e} exceeds 1e-12",
            )
    return CheckResult(
        "fedavg_oracle", True,
        f"{instances} instances, worst coordinate deviation {worst:.3e}",
    )


def _random_model_config(rng: np.random.Generator) -> "model_mod.ModelConfig":
    stages = []
    for _ in range(int(rng.integers(1, 3))):
        stages.append(
            model_mod.ConvStage(
                filters=int(rng.integers(2, 7)),
                kernel=int(rng.choice([3, 5, 7])),
                stride=int(rng.choice([1, 2])),
            )
        )
    return model_mod.ModelConfig(
        channels=int(rng.integers(1, 4)),
        window=int(rng.integers(24, 49)),
        conv_stages=tuple(stages),
        fusion_width=int(rng.integers(8, 25)),
        classes=int(rng.integers(3, 7)),
        seed=int(rng.integers(0, 2**31)),
    )


def check_gradients(
    configs: int = 10,
    coords_per_config: int = 12,
    step: float = 1e-5,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> CheckResult:
    """Analytic gradients against central finite differences.

    Initialized parameters are jittered first: with zero biases, a
    post-ReLU feature row of exact zeros parks a pre-activation exactly
    on the ReLU kink, where no classical derivative exists and the
    comparison is meaningless. Off the kink, both sides must agree.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = 0
    for _ in range(configs):
        config = _random_model_config(rng)
        params = model_mod.init_params(config)
        params = model_mod.ModelParams(
            params.flat + rng.normal(0.0, 0.05, params.flat.size),
            params.shapes,
            params.fingerprint,
        )
        batch_size = int(rng.integers(2, 6))
        batch = model_mod.Batch(
            inputs=rng.standard_normal((batch_size, config.channels, config.window)),
            targets=rng.integers(0, config.classes, size=batch_size),
        )
        _, grad = model_mod.loss_and_grad(config, params, batch)
        coords = rng.choice(
            params.flat.size, size=min(coords_per_config, params.flat.size), replace=False
        )
        for coord in coords:
            base = params.flat[coord]
            for sign, store in ((+1, "hi"), (-1, "lo")):
                shifted = params.copy()
                shifted.flat[coord] = base + sign * step
                loss, _ = model_mod.loss_and_grad(config, shifted, batch)
                if store == "hi":
                    hi = loss
                else:
                    lo = loss
            fd = (hi - lo) / (2 * step)
            analytic = float(grad[coord])
            scale = max(abs(analytic), abs(fd))
            if scale < 1e-4:
                # Both effectively zero: compare absolutely to dodge
                # noise amplification in the quotient.
                rel = 0.0 if abs(analytic - fd) < 1e-8 else 1.0
            else:
                rel = abs(analytic - fd) / scale
            worst = max(worst, rel)
            checked += 1
            if rel >= tolerance:
                return CheckResult(
                    "gradient_fd", False,
                    f"coordinate {coord}: relative error {rel:.3e} >= {tolerance}",
                )
    return CheckResult(
        "gradient_fd", True,
        f"{checked} coordinates over {configs} configs, worst {worst:.3e}",
    )


# Trajectory table: stop rounds hand-traced from the update rule under
# (patience=5, threshold=0.01) and (patience=1, threshold=0.0).
EARLY_STOP_TABLE: tuple[tuple[tuple[float, ...], int | None, int | None], ...] = (
    ((0.5, 0.505, 0.507, 0.509, 0.508, 0.509), 6, 5),
    (tuple(0.10 + 0.03 * i for i in range(10)), None, None),
    ((0.3, 0.3, 0.3, 0.3, 0.3, 0.3), 6, 2),
    ((0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0), 5, 1),
    ((0.2, 0.4, 0.405, 0.42, 0.425, 0.44, 0.445, 0.46), None, None),
    ((0.9, 0.8, 0.7, 0.6, 0.5, 0.4), 6, 2),
    ((0.3, 0.3, 0.3, 0.3, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5), 10, 2),
    ((0.6, 0.9, 0.3, 0.3, 0.3, 0.3, 0.3, 0.3), 7, 3),
    ((0.50, 0.509, 0.518, 0.527, 0.536, 0.545), None, None),
    ((0.5, 0.5001, 0.5002), None, None),
)


def _trace_stop_round(
    trajectory: tuple[float, ...], patience: int, threshold: float
) -> int | None:
    state = federation_mod.EarlyStopState()
    for f1 in trajectory:
        state = federation_mod.update_early_stop(state, f1, patience, threshold)
        if state.stopped:
            return state.stop_round
    return None


def check_early_stop_table() -> CheckResult:
    for row, (trajectory, expect_a, expect_b) in enumerate(EARLY_STOP_TABLE):
        got_a = _trace_stop_round(trajectory, patience=5, threshold=0.01)
        got_b = _trace_stop_round(trajectory, patience=1, threshold=0.0)
        if got_a != expect_a or got_b != expect_b:
            return CheckResult(
                "early_stop_table", False,
                f"row {row}: got ({got_a}, {got_b}), expected ({expect_a}, {expect_b})",
            )
    return CheckResult(
        "early_stop_table", True, f"{len(EARLY_STOP_TABLE)} trajectories, 2 settings each"
    )


def _series_from_labels(labels: np.ndarray) -> "dataset_mod.LabeledSeries":
    n_classes = int(labels.max()) + 1
    label_map = dataset_mod.LabelMap.from_names(
        ["NULL"] + [f"class-{i}" for i in range(1, n_classes)]
    )
    return dataset_mod.LabeledSeries(
        client_id=0,
        sample_rate_hz=50.0,
        channel_names=("ch0",),
        values=np.zeros((1, labels.size)),
        labels=labels.astype(np.int64),
        label_map=label_map,
    )


def check_split_rule(cases: int = 60, seed: int = 0) -> CheckResult:
    """Earliest floor(0.2 n) samples of every label land in test, rest in train."""
    rng = np.random.default_rng(seed)
    logging.getLogger("fedhar.dataset").setLevel(logging.ERROR)
    try:
        for case in range(cases):
            n = int(rng.integers(10, 400))
            n_labels = int(rng.integers(2, 6))
            labels = rng.integers(0, n_labels, size=n)
            series = _series_from_labels(labels)
            train_mask, test_mask = dataset_mod.split_by_label_prefix(
                series, test_fraction=0.2
            )
            if (train_mask & test_mask).any() or not (train_mask | test_mask).all():
                return CheckResult(
                    "split_rule", False, f"case {case}: masks do not partition"
                )
            for label in range(n_labels):
                positions = np.flatnonzero(labels == label)
                expected_test = int(np.floor(0.2 * positions.size))
                in_test = test_mask[positions]
                if int(in_test.sum()) != expected_test:
                    return CheckResult(
                        "split_rule", False,
                        f"case {case} label {label}: {int(in_test.sum())} test "
                        f"samples, expected {expected_test}",
                    )
                if not in_test[:expected_test].all():
                    return CheckResult(
                        "split_rule", False,
                        f"case {case} label {label}: a later sample entered "
                        "test before an earlier one",
                    )
    finally:
        logging.getLogger("fedhar.dataset").setLevel(logging.NOTSET)
    return CheckResult("split_rule", True, f"{cases} randomized label sequences")


def check_window_invariants(cases: int = 50, seed: int = 0) -> CheckResult:
    """Window counts, starts, and majority labels against brute force."""
    rng = np.random.default_rng(seed)
    window, stride = 20, 8
    for case in range(cases):
        n = int(rng.integers(30, 300))
        labels = rng.integers(0, 4, size=n)
        series = _series_from_labels(labels)
        mask = rng.random(n) < 0.7
        windows = dataset_mod.make_windows(series, mask, window=window, stride=stride)

        expected_starts: list[int] = []
        run_start = None
        for i in range(n + 1):
            inside = i < n and mask[i]
            if inside and run_start is None:
                run_start = i
            elif not inside and run_start is not None:
                run_len = i - run_start
                if run_len >= window:
                    count = (run_len - window) // stride + 1
                    expected_starts.extend(
                        run_start + j * stride for j in range(count)
                    )
                run_start = None
        got_starts = [w.origin[1] for w in windows]
        if got_starts != expected_starts:
            return CheckResult(
                "window_invariants", False,
                f"case {case}: starts {got_starts[:5]}... != expected "
                f"{expected_starts[:5]}...",
            )
        for w in windows:
            start = w.origin[1]
            segment = labels[start : start + window]
            counts = Counter(segment.tolist())
            top = max(counts.values())
            candidates = sorted(c for c, v in counts.items() if v == top)
            center = int(segment[window // 2])
            expected_label = center if center in candidates else candidates[0]
            if w.label != expected_label:
                return CheckResult(
                    "window_invariants", False,
                    f"case {case} start {start}: label {w.label}, "
                    f"expected {expected_label}",
                )
    return CheckResult("window_invariants", True, f"{cases} randomized mask layouts")


def run_all(seed: int = 0) -> list[CheckResult]:
    return [
        check_fedavg_oracle(seed=seed),
        check_gradients(seed=seed),
        check_early_stop_table(),
        check_split_rule(seed=seed),
        check_window_invariants(seed=seed),
    ]
