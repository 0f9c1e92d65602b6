"""Report generation: SVG charts plus CSV tables from saved run logs.

The CSVs are the source of truth; the charts are a readable view of the
same numbers. Everything is rendered from run logs after the fact, so
reports can be regenerated without touching training.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ContractError
from .federation import RunLog
from .metrics import (
    CommunicationLedger,
    communication_summary,
    per_class_f1,
    write_f1_per_round,
    write_per_client_label_f1,
    write_rounds_attended,
)
from .svg import LinearScale, SvgCanvas

ATTENDED_COLOR = "#c0392b"
SAVED_COLOR = "#27ae60"
SERIES_COLORS = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)

MARGIN_LEFT = 60
MARGIN_RIGHT = 20
MARGIN_TOP = 40
MARGIN_BOTTOM = 50


def render_attendance_chart(ledger: CommunicationLedger) -> str:
    """Stacked bar per client: rounds attended below, rounds saved above."""
    clients = ledger.clients
    width = max(420, MARGIN_LEFT + MARGIN_RIGHT + 64 * len(clients))
    height = 360
    canvas = SvgCanvas(width, height)
    plot_w = width - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = height - MARGIN_TOP - MARGIN_BOTTOM
    yscale = LinearScale(0, ledger.rounds_scheduled, MARGIN_TOP + plot_h, MARGIN_TOP)

    canvas.text(MARGIN_LEFT, 22, "Rounds attended vs saved per client", size=14)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        rounds = frac * ledger.rounds_scheduled
        y = yscale(rounds)
        canvas.line(MARGIN_LEFT, y, width - MARGIN_RIGHT, y, stroke="#dddddd")
        canvas.text(MARGIN_LEFT - 8, y + 4, f"{rounds:g}", size=11, anchor="end")

    slot = plot_w / max(1, len(clients))
    bar_w = slot * 0.6
    for i, client in enumerate(clients):
        x = MARGIN_LEFT + i * slot + (slot - bar_w) / 2
        y_attended = yscale(client.attended)
        canvas.rect(x, y_attended, bar_w, yscale(0) - y_attended, fill=ATTENDED_COLOR)
        if client.saved:
            y_total = yscale(client.attended + client.saved)
            canvas.rect(x, y_total, bar_w, y_attended - y_total, fill=SAVED_COLOR)
        canvas.text(
            x + bar_w / 2,
            height - MARGIN_BOTTOM + 16,
            str(client.client_id),
            size=11,
            anchor="middle",
        )

    if clients:
        mean_attended = ledger.total_attended / len(clients)
        y_mean = yscale(mean_attended)
        canvas.line(
            MARGIN_LEFT, y_mean, width - MARGIN_RIGHT, y_mean,
            stroke="#333333", dash="6,4",
        )
        canvas.text(
            width - MARGIN_RIGHT, y_mean - 6,
            f"mean {mean_attended:.1f}", size=11, anchor="end",
        )
    canvas.text(width / 2, height - 12, "client id", size=12, anchor="middle")
    canvas.rect(MARGIN_LEFT, height - 34, 12, 12, fill=ATTENDED_COLOR)
    canvas.text(MARGIN_LEFT + 18, height - 24, "attended", size=11)
    canvas.rect(MARGIN_LEFT + 100, height - 34, 12, 12, fill=SAVED_COLOR)
    canvas.text(MARGIN_LEFT + 118, height - 24, "saved", size=11)
    return canvas.render()


def render_f1_rounds_chart(run: RunLog) -> str:
    """Per-client validation F1 over rounds; triangles mark stop rounds."""
    width, height = 720, 400
    canvas = SvgCanvas(width, height)
    plot_h = height - MARGIN_TOP - MARGIN_BOTTOM
    rounds = [r.round_index for r in run.records]
    last_round = rounds[-1] if rounds else 1
    xscale = LinearScale(1, max(2, last_round), MARGIN_LEFT, width - MARGIN_RIGHT)
    yscale = LinearScale(0.0, 1.0, MARGIN_TOP + plot_h, MARGIN_TOP)

    canvas.text(MARGIN_LEFT, 22, "Validation macro F1 per round", size=14)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = yscale(frac)
        canvas.line(MARGIN_LEFT, y, width - MARGIN_RIGHT, y, stroke="#dddddd")
        canvas.text(MARGIN_LEFT - 8, y + 4, f"{frac:.2f}", size=11, anchor="end")
    tick_step = max(1, last_round // 10)
    for r in range(1, last_round + 1, tick_step):
        x = xscale(r)
        canvas.text(x, height - MARGIN_BOTTOM + 16, str(r), size=10, anchor="middle")

    series: dict[int, list[tuple[float, float]]] = {cid: [] for cid in run.client_ids}
    for record in run.records:
        for entry in record.entries:
            series[entry.client_id].append(
                (xscale(record.round_index), yscale(entry.val_f1))
            )
    for i, cid in enumerate(run.client_ids):
        color = SERIES_COLORS[i % len(SERIES_COLORS)]
        points = series[cid]
        if len(points) > 1:
            canvas.polyline(points, stroke=color)
        elif points:
            canvas.circle(points[0][0], points[0][1], 2.5, fill=color)
        stop = run.stop_rounds.get(cid)
        if stop is not None and 1 <= stop <= len(points):
            x, y = points[stop - 1]
            canvas.polygon([(x, y - 7), (x - 5, y + 4), (x + 5, y + 4)], fill=color)
        canvas.text(
            MARGIN_LEFT + 8 + 90 * i, height - 12,
            f"client {cid}", size=11, fill=color,
        )
    canvas.text(width / 2, height - MARGIN_BOTTOM + 32, "round", size=12, anchor="middle")
    return canvas.render()


def render_comparison_chart(runs: list[RunLog]) -> str:
    """Grouped bars: final per-client macro F1 for each run side by side."""
    if not runs:
        raise ContractError("no runs to compare")
    client_ids = runs[0].client_ids
    width = max(480, MARGIN_LEFT + MARGIN_RIGHT + 80 * len(client_ids))
    height = 380
    canvas = SvgCanvas(width, height)
    plot_w = width - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = height - MARGIN_TOP - MARGIN_BOTTOM
    yscale = LinearScale(0.0, 1.0, MARGIN_TOP + plot_h, MARGIN_TOP)

    canvas.text(MARGIN_LEFT, 22, "Final macro F1 per client", size=14)
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = yscale(frac)
        canvas.line(MARGIN_LEFT, y, width - MARGIN_RIGHT, y, stroke="#dddddd")
        canvas.text(MARGIN_LEFT - 8, y + 4, f"{frac:.2f}", size=11, anchor="end")

    slot = plot_w / max(1, len(client_ids))
    group_w = slot * 0.7
    bar_w = group_w / len(runs)
    for i, cid in enumerate(client_ids):
        x0 = MARGIN_LEFT + i * slot + (slot - group_w) / 2
        for j, run in enumerate(runs):
            color = SERIES_COLORS[j % len(SERIES_COLORS)]
            value = run.final_f1[cid]
            y = yscale(value)
            canvas.rect(x0 + j * bar_w, y, bar_w * 0.92, yscale(0) - y, fill=color)
        canvas.text(
            x0 + group_w / 2, height - MARGIN_BOTTOM + 16,
            str(cid), size=11, anchor="middle",
        )
    for j, run in enumerate(runs):
        color = SERIES_COLORS[j % len(SERIES_COLORS)]
        x = MARGIN_LEFT + 140 * j
        canvas.rect(x, height - 34, 12, 12, fill=color)
        canvas.text(
            x + 18, height - 24,
            f"{run.mode} (mean {run.mean_final_f1():.3f})", size=11,
        )
    canvas.text(width / 2, height - MARGIN_BOTTOM + 32, "client id", size=12, anchor="middle")
    return canvas.render()


def _heat_color(value: float) -> str:
    # White at 0 up to a saturated blue at 1.
    v = min(1.0, max(0.0, value))
    r = int(round(255 - 187 * v))
    g = int(round(255 - 136 * v))
    b = 255
    return f"#{r:02x}{g:02x}{b:02x}"


def render_label_heatmap(run: RunLog) -> str:
    """Client-by-label grid of per-class F1; gray cells are undefined."""
    letters = run.label_map.letters()
    cell = 30
    grid_w = cell * len(letters)
    grid_h = cell * len(run.client_ids)
    width = MARGIN_LEFT + grid_w + MARGIN_RIGHT
    height = MARGIN_TOP + grid_h + MARGIN_BOTTOM
    canvas = SvgCanvas(width, height)
    canvas.text(MARGIN_LEFT, 22, "Per-class F1 by client", size=14)

    for col, letter in enumerate(letters):
        canvas.text(
            MARGIN_LEFT + col * cell + cell / 2,
            MARGIN_TOP + grid_h + 16,
            letter, size=11, anchor="middle",
        )
    for row, cid in enumerate(run.client_ids):
        y0 = MARGIN_TOP + row * cell
        canvas.text(MARGIN_LEFT - 8, y0 + cell / 2 + 4, str(cid), size=11, anchor="end")
        scores = per_class_f1(run.confusions[cid])
        for col, value in enumerate(scores):
            x0 = MARGIN_LEFT + col * cell
            if np.isnan(value):
                canvas.rect(x0, y0, cell - 1, cell - 1, fill="#e8e8e8")
            else:
                canvas.rect(x0, y0, cell - 1, cell - 1, fill=_heat_color(float(value)))
                canvas.text(
                    x0 + cell / 2, y0 + cell / 2 + 3,
                    f"{value:.2f}".lstrip("0") or "0",
                    size=8, anchor="middle",
                )
    canvas.text(
        width / 2, height - 12,
        "label letter code (columns), client id (rows)", size=11, anchor="middle",
    )
    return canvas.render()


def comparison_payload(runs: list[RunLog]) -> dict:
    """Cross-run deltas; requires every run to share clients and labels."""
    base = runs[0]
    for other in runs[1:]:
        if other.client_ids != base.client_ids:
            raise ContractError("runs cover different client sets")
        if other.label_map.names != base.label_map.names:
            raise ContractError("runs use different label maps")
    payload: dict = {
        "clients": base.client_ids,
        "runs": {},
    }
    for run in runs:
        ledger = communication_summary(run)
        payload["runs"][run.mode] = {
            "mean_macro_f1": run.mean_final_f1(),
            "per_client_f1": {str(cid): run.final_f1[cid] for cid in run.client_ids},
            "communication_reduction": ledger.reduction,
            "total_saved": ledger.total_saved,
            "rounds_scheduled": ledger.rounds_scheduled,
        }
    if len(runs) == 2:
        a, b = runs
        payload["delta"] = {
            "mean_macro_f1": b.mean_final_f1() - a.mean_final_f1(),
            "per_client_f1": {
                str(cid): b.final_f1[cid] - a.final_f1[cid] for cid in base.client_ids
            },
        }
    return payload


def write_report(runs: list[RunLog], out_dir: str | Path) -> dict[str, Path]:
    """Emit all tables and charts for one or more runs; returns the paths."""
    if not runs:
        raise ContractError("write_report needs at least one run")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, Path] = {}

    modes = [run.mode for run in runs]
    prefixes = [
        mode if modes.count(mode) == 1 else f"run{i}_{mode}"
        for i, mode in enumerate(modes)
    ]
    for prefix, run in zip(prefixes, runs):
        ledger = communication_summary(run)
        paths = {
            f"{prefix}_attendance.svg": render_attendance_chart(ledger),
            f"{prefix}_f1_per_round.svg": render_f1_rounds_chart(run),
            f"{prefix}_label_heatmap.svg": render_label_heatmap(run),
        }
        for name, text in paths.items():
            target = out_dir / name
            target.write_text(text)
            outputs[name] = target
        csv_targets = {
            f"{prefix}_per_client_label_f1.csv": write_per_client_label_f1,
            f"{prefix}_f1_per_round.csv": write_f1_per_round,
        }
        for name, writer in csv_targets.items():
            target = out_dir / name
            writer(target, run)
            outputs[name] = target
        target = out_dir / f"{prefix}_rounds_attended.csv"
        write_rounds_attended(target, ledger)
        outputs[f"{prefix}_rounds_attended.csv"] = target

    if len(runs) > 1:
        target = out_dir / "comparison.svg"
        target.write_text(render_comparison_chart(runs))
        outputs["comparison.svg"] = target
        target = out_dir / "comparison.json"
        target.write_text(
            json.dumps(comparison_payload(runs), indent=2, sort_keys=True) + "\n"
        )
        outputs["comparison.json"] = target
    return outputs
