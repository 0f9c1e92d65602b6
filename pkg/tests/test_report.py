import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fedhar.errors import ContractError
from fedhar.federation import run_experiment, FederationSettings
from fedhar.metrics import communication_summary
from fedhar.report import (
    comparison_payload,
    render_attendance_chart,
    render_comparison_chart,
    render_f1_rounds_chart,
    render_label_heatmap,
    write_report,
)

from conftest import build_client


@pytest.fixture(scope="module")
def runs():
    from fedhar.model import ConvStage, ModelConfig

    config = ModelConfig(
        channels=2, window=20, conv_stages=(ConvStage(3, 5, 2),),
        fusion_width=8, classes=3, seed=0,
    )
    datasets = [build_client(i) for i in range(3)]
    baseline = run_experiment(
        FederationSettings(rounds=5, batch_size=8, learning_rate=0.01, seed=2),
        datasets, config, mode="baseline",
    )
    early = run_experiment(
        FederationSettings(rounds=5, batch_size=8, learning_rate=0.01, seed=2,
                           early_stopping_enabled=True, patience=2, threshold=1.0),
        datasets, config, mode="early_stop",
    )
    return baseline, early


def assert_valid_svg(text: str) -> ET.Element:
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    return root


class TestCharts:
    def test_attendance_chart_is_valid_svg(self, runs):
        _, early = runs
        text = render_attendance_chart(communication_summary(early))
        root = assert_valid_svg(text)
        # One attended bar per client at minimum.
        rects = root.findall(".//{http://www.w3.org/2000/svg}rect")
        assert len(rects) >= 3

    def test_f1_chart_marks_stops(self, runs):
        _, early = runs
        root = assert_valid_svg(render_f1_rounds_chart(early))
        polygons = root.findall(".//{http://www.w3.org/2000/svg}polygon")
        assert len(polygons) == sum(
            1 for stop in early.stop_rounds.values() if stop is not None
        )

    def test_comparison_chart_groups_bars(self, runs):
        root = assert_valid_svg(render_comparison_chart(list(runs)))
        texts = [t.text for t in root.findall(".//{http://www.w3.org/2000/svg}text")]
        assert any("baseline" in (t or "") for t in texts)
        assert any("early_stop" in (t or "") for t in texts)

    def test_heatmap_covers_grid(self, runs):
        baseline, _ = runs
        root = assert_valid_svg(render_label_heatmap(baseline))
        rects = root.findall(".//{http://www.w3.org/2000/svg}rect")
        # Background plus one cell per (client, label).
        assert len(rects) >= 1 + len(baseline.client_ids) * len(baseline.label_map)

    def test_f1_chart_handles_single_round_run(self, tiny_model_config):
        datasets = [build_client(i) for i in range(2)]
        run = run_experiment(
            FederationSettings(rounds=1, batch_size=8, seed=0),
            datasets, tiny_model_config,
        )
        assert_valid_svg(render_f1_rounds_chart(run))


class TestComparisonPayload:
    def test_delta_math(self, runs):
        payload = comparison_payload(list(runs))
        baseline, early = runs
        expected = early.mean_final_f1() - baseline.mean_final_f1()
        assert payload["delta"]["mean_macro_f1"] == pytest.approx(expected)
        assert payload["runs"]["baseline"]["communication_reduction"] == 0.0

    def test_mismatched_clients_rejected(self, runs, tiny_model_config):
        baseline, _ = runs
        other = run_experiment(
            FederationSettings(rounds=2, batch_size=8, seed=0),
            [build_client(i) for i in range(2)],
            tiny_model_config,
        )
        with pytest.raises(ContractError, match="client"):
            comparison_payload([baseline, other])

    def test_mismatched_label_maps_rejected(self, runs, tiny_model_config):
        from fedhar.model import ModelConfig

        baseline, _ = runs
        two_class_config = ModelConfig(
            channels=2, window=20, conv_stages=tiny_model_config.conv_stages,
            fusion_width=8, classes=2, seed=0,
        )
        other = run_experiment(
            FederationSettings(rounds=2, batch_size=8, seed=0),
            [build_client(i, classes=2) for i in range(3)],
            two_class_config,
        )
        with pytest.raises(ContractError, match="label"):
            comparison_payload([baseline, other])


class TestWriteReport:
    def test_emits_tables_charts_and_comparison(self, runs, tmp_path):
        outputs = write_report(list(runs), tmp_path)
        names = set(outputs)
        assert "baseline_attendance.svg" in names
        assert "early_stop_f1_per_round.csv" in names
        assert "comparison.json" in names
        assert "comparison.svg" in names
        for name, path in outputs.items():
            assert path.exists(), name
            if name.endswith(".svg"):
                assert_valid_svg(path.read_text())
        doc = json.loads((tmp_path / "comparison.json").read_text())
        assert set(doc["runs"]) == {"baseline", "early_stop"}

    def test_single_run_has_no_comparison(self, runs, tmp_path):
        baseline, _ = runs
        outputs = write_report([baseline], tmp_path)
        assert "comparison.json" not in outputs
        assert (tmp_path / "baseline_label_heatmap.svg").exists()

    def test_duplicate_modes_get_distinct_prefixes(self, runs, tmp_path):
        baseline, _ = runs
        outputs = write_report([baseline, baseline], tmp_path)
        assert "run0_baseline_attendance.svg" in outputs
        assert "run1_baseline_attendance.svg" in outputs

    def test_deterministic_bytes(self, runs, tmp_path):
        write_report(list(runs), tmp_path / "a")
        write_report(list(runs), tmp_path / "b")
        for path_a in sorted((tmp_path / "a").iterdir()):
            path_b = tmp_path / "b" / path_a.name
            assert path_a.read_bytes() == path_b.read_bytes(), path_a.name
