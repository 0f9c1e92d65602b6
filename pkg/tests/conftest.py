import sys

import numpy as np
import pytest

from fedhar.dataset import ClientDataset, LabelMap, SensorWindow
from fedhar.model import ConvStage, ModelConfig


def pytest_terminal_summary(terminalreporter):
    """Replay the acceptance-gate lines where they are easy to find."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "GATE_LINES", None)
    if lines:
        terminalreporter.section("acceptance gate")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_model_config() -> ModelConfig:
    return ModelConfig(
        channels=2,
        window=20,
        conv_stages=(ConvStage(3, 5, 2),),
        fusion_width=8,
        classes=3,
        seed=0,
    )


def build_client(
    client_id: int,
    *,
    n_train: int = 24,
    n_test: int = 12,
    channels: int = 2,
    window: int = 20,
    classes: int = 3,
    seed: int = 0,
) -> ClientDataset:
    """Random windows straight into a ClientDataset, skipping the pipeline."""
    rng = np.random.default_rng([seed, client_id])
    label_map = LabelMap.from_names(
        ["NULL"] + [f"class-{i}" for i in range(1, classes)]
    )

    def windows(count: int) -> list[SensorWindow]:
        return [
            SensorWindow(
                values=rng.standard_normal((channels, window)),
                label=int(rng.integers(0, classes)),
                origin=(client_id, i),
            )
            for i in range(count)
        ]

    return ClientDataset(
        client_id=client_id,
        train=windows(n_train),
        test=windows(n_test),
        label_map=label_map,
    )


@pytest.fixture
def make_client():
    return build_client
