"""Confusion matrices, per-class and macro F1, communication accounting.

A class that is absent from both truth and predictions has no defined F1;
it is reported as NaN and excluded from the macro mean rather than being
counted as zero. Rare labels routinely vanish from a client's small test
split, and zeroing them would drag the headline mean for no reason.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .dataset import LabelMap
from .errors import ContractError, EvaluationError

if TYPE_CHECKING:  # pragma: no cover
    from .federation import RunLog


@dataclass
class ConfusionMatrix:
    """Rows are truth, columns are prediction."""

    counts: np.ndarray  # (C, C) int64
    label_map: LabelMap

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = len(self.label_map)
        if self.counts.shape != (c, c):
            raise ContractError(
                f"confusion matrix is {self.counts.shape}, label map has {c} classes"
            )
        if (self.counts < 0).any():
            raise ContractError("confusion matrix entries must be >= 0")

    @classmethod
    def from_pairs(cls, truth, pred, label_map: LabelMap) -> "ConfusionMatrix":
        truth = np.asarray(truth, dtype=np.int64)
        pred = np.asarray(pred, dtype=np.int64)
        if truth.shape != pred.shape:
            raise ContractError("truth and prediction lengths differ")
        c = len(label_map)
        if truth.size and (
            truth.min() < 0 or truth.max() >= c or pred.min() < 0 or pred.max() >= c
        ):
            raise ContractError("class id outside the label map range")
        counts = np.zeros((c, c), dtype=np.int64)
        np.add.at(counts, (truth, pred), 1)
        return cls(counts=counts, label_map=label_map)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def per_class_f1(cm: ConfusionMatrix) -> np.ndarray:
    """F1 per class; NaN marks classes absent from truth and predictions."""
    tp = np.diag(cm.counts).astype(np.float64)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp
    denom = 2.0 * tp + fp + fn
    out = np.full(len(cm.label_map), np.nan)
    defined = denom > 0
    out[defined] = 2.0 * tp[defined] / denom[defined]
    return out


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean F1 over the defined classes."""
    scores = per_class_f1(cm)
    defined = ~np.isnan(scores)
    if not defined.any():
        raise EvaluationError("no class has a defined F1 (empty confusion matrix)")
    return float(scores[defined].mean())


@dataclass
class ClientComms:
    client_id: int
    attended: int
    saved: int
    stop_round: int | None


@dataclass
class CommunicationLedger:
    rounds_scheduled: int
    clients: list[ClientComms]

    @property
    def total_attended(self) -> int:
        return sum(c.attended for c in self.clients)

    @property
    def total_saved(self) -> int:
        return sum(c.saved for c in self.clients)

    @property
    def reduction(self) -> float:
        scheduled = self.rounds_scheduled * len(self.clients)
        return self.total_saved / scheduled if scheduled else 0.0

    @property
    def stopped_early(self) -> int:
        return sum(1 for c in self.clients if c.stop_round is not None)


def communication_summary(run: "RunLog") -> CommunicationLedger:
    """Derive the ledger from per-round participation flags.

    Participation must be a prefix: once a client misses a round it never
    returns. Anything else means the run log is corrupt.
    """
    per_client: dict[int, list[bool]] = {cid: [] for cid in run.client_ids}
    for record in run.records:
        seen = set()
        for entry in record.entries:
            if entry.client_id not in per_client:
                raise ContractError(f"unknown client {entry.client_id} in round record")
            if entry.client_id in seen:
                raise ContractError(
                    f"duplicate client {entry.client_id} in round {record.round_index}"
                )
            seen.add(entry.client_id)
            per_client[entry.client_id].append(entry.participated)
        if seen != set(per_client):
            raise ContractError(f"round {record.round_index} is missing clients")

    clients = []
    for cid in run.client_ids:
        flags = per_client[cid]
        attended = sum(flags)
        if any(flags[attended:]):
            raise ContractError(
                f"client {cid}: participation resumes after a missed round"
            )
        stop = run.stop_rounds.get(cid)
        if stop is not None and stop != attended:
            raise ContractError(
                f"client {cid}: stop round {stop} disagrees with attendance {attended}"
            )
        clients.append(
            ClientComms(
                client_id=cid,
                attended=attended,
                saved=run.rounds_scheduled - attended,
                stop_round=stop,
            )
        )
    return CommunicationLedger(rounds_scheduled=run.rounds_scheduled, clients=clients)


# -- CSV emission -----------------------------------------------------------


def write_per_client_label_f1(path: str | Path, run: "RunLog") -> None:
    """Client-by-label F1 grid; blank cells mark undefined classes."""
    letters = run.label_map.letters()
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["client_id", *letters])
        for cid in run.client_ids:
            scores = per_class_f1(run.confusions[cid])
            row = [str(cid)]
            for value in scores:
                row.append("" if np.isnan(value) else f"{value:.6f}")
            writer.writerow(row)


def write_rounds_attended(path: str | Path, ledger: CommunicationLedger) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["client_id", "attended", "saved"])
        for client in ledger.clients:
            writer.writerow([client.client_id, client.attended, client.saved])


def write_f1_per_round(path: str | Path, run: "RunLog") -> None:
    """Round-by-client validation F1 plus the cross-client mean."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["round", *[f"client_{cid}" for cid in run.client_ids], "mean"]
        )
        for record in run.records:
            by_id = {e.client_id: e.val_f1 for e in record.entries}
            values = [by_id[cid] for cid in run.client_ids]
            writer.writerow(
                [record.round_index]
                + [f"{v:.6f}" for v in values]
                + [f"{float(np.mean(values)):.6f}"]
            )
