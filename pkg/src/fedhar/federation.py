"""Round-synchronous federated training with client-side early stopping.

Each round every active client receives the global parameters, evaluates
them on its held-out split (that score drives early stopping), then either
freezes (keeping the model it just received, leaving training and
aggregation for good) or trains locally and contributes to the weighted
average. Determinism comes from per-(client, round) derived seeds and a
fixed aggregation order, so the outcome does not depend on the order in
which clients are processed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import ClientDataset, LabelMap
from .errors import ContractError, EvaluationError
from .metrics import ConfusionMatrix, communication_summary, macro_f1
from .model import AdamState, Batch, ModelConfig, ModelParams, adam_step, forward, init_params, loss_and_grad

log = logging.getLogger(__name__)

STOP_RULES = ("best_so_far", "window_range")


@dataclass
class EarlyStopState:
    """Per-client stopping bookkeeping; round = len(f1_history)."""

    best_f1: float = 0.0
    rounds_since_improvement: int = 0
    stopped: bool = False
    stop_round: int | None = None
    f1_history: list[float] = field(default_factory=list)


def update_early_stop(
    state: EarlyStopState,
    f1: float,
    patience: int,
    threshold: float,
    rule: str = "best_so_far",
) -> EarlyStopState:
    """Fold one validation score into the stopping state.

    best_so_far: a score must beat the running best by more than the
    threshold to count as improvement; `patience` consecutive
    non-improvements stop the client.

    window_range: the client stops once the last `patience` scores span
    less than the threshold (a plateau detector that ignores the best).
    """
    if state.stopped:
        raise ContractError("update_early_stop called on a stopped client")
    if patience < 1:
        raise ContractError("patience must be >= 1")
    if threshold < 0:
        raise ContractError("threshold must be >= 0")
    if rule not in STOP_RULES:
        raise ContractError(f"unknown early-stop rule {rule!r}")

    history = state.f1_history + [f1]
    this_round = len(history)
    if f1 > state.best_f1 + threshold:
        best, counter = f1, 0
    else:
        best = state.best_f1
        counter = min(state.rounds_since_improvement + 1, patience)

    stopped = False
    if rule == "best_so_far":
        stopped = counter >= patience
    elif len(history) >= patience:
        tail = history[-patience:]
        stopped = (max(tail) - min(tail)) < threshold

    return EarlyStopState(
        best_f1=best,
        rounds_since_improvement=counter,
        stopped=stopped,
        stop_round=this_round if stopped else None,
        f1_history=history,
    )


@dataclass
class AggregationInput:
    client_id: int
    params: ModelParams
    n_examples: int

    def __post_init__(self) -> None:
        if self.n_examples < 1:
            raise ContractError("n_examples must be >= 1")


def aggregate_fedavg(inputs: list[AggregationInput]) -> ModelParams:
    """Example-count-weighted mean of client parameter vectors.

    Terms are accumulated in ascending client id order with Kahan
    compensation, then clamped to the coordinatewise hull of the inputs
    so rounding can never push a coordinate outside [min, max]; that
    also makes aggregation of identical inputs exact.
    """
    if not inputs:
        raise ContractError("cannot aggregate an empty input list")
    ordered = sorted(inputs, key=lambda inp: inp.client_id)
    first = ordered[0].params
    for inp in ordered[1:]:
        if inp.params.fingerprint != first.fingerprint:
            raise ContractError(
                f"client {inp.client_id}: fingerprint {inp.params.fingerprint} "
                f"does not match {first.fingerprint}"
            )
        if inp.params.flat.size != first.flat.size:
            raise ContractError("parameter vectors differ in length")

    total = sum(inp.n_examples for inp in ordered)
    acc = np.zeros_like(first.flat)
    comp = np.zeros_like(first.flat)
    for inp in ordered:
        term = (inp.n_examples / total) * inp.params.flat - comp
        new_acc = acc + term
        comp = (new_acc - acc) - term
        acc = new_acc

    stacked = np.stack([inp.params.flat for inp in ordered])
    out = np.clip(acc, stacked.min(axis=0), stacked.max(axis=0))
    return ModelParams(out, first.shapes, first.fingerprint)


def local_train(
    dataset: ClientDataset,
    params: ModelParams,
    model_config: ModelConfig,
    *,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed_chain: tuple[int, ...],
) -> tuple[ModelParams, int, float]:
    """Run Adam over shuffled mini-batches; returns (params', n, mean loss).

    The shuffle is seeded by the (master seed, client id, round) chain and
    the optimizer state is created fresh for every call: only parameters
    travel between rounds, never optimizer moments. The last short batch
    is kept.
    """
    if not dataset.train:
        raise ContractError(f"client {dataset.client_id}: empty train set")
    if epochs < 1 or batch_size < 1:
        raise ContractError("epochs and batch_size must be >= 1")
    inputs, targets = dataset.train_tensors()
    n = inputs.shape[0]
    rng = np.random.default_rng(list(seed_chain))
    current = params.copy()
    state = AdamState.fresh(current.flat.size, learning_rate=learning_rate)
    loss_sum = 0.0
    example_count = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            pick = order[start : start + batch_size]
            batch = Batch(inputs=inputs[pick], targets=targets[pick])
            loss, grad = loss_and_grad(model_config, current, batch)
            current, state = adam_step(current, grad, state)
            loss_sum += loss * pick.size
            example_count += pick.size
    return current, n, loss_sum / example_count


def evaluate_client(
    dataset: ClientDataset,
    params: ModelParams,
    model_config: ModelConfig,
    batch_chunk: int = 512,
) -> tuple[float, ConfusionMatrix]:
    """Macro F1 and confusion matrix over the client's test windows."""
    if not dataset.test:
        raise EvaluationError(f"client {dataset.client_id}: empty test set")
    inputs, targets = dataset.test_tensors()
    preds = np.empty(targets.size, dtype=np.int64)
    for start in range(0, targets.size, batch_chunk):
        chunk = inputs[start : start + batch_chunk]
        logits, _ = forward(
            model_config,
            params,
            Batch(inputs=chunk, targets=np.zeros(chunk.shape[0], dtype=np.int64)),
        )
        preds[start : start + chunk.shape[0]] = logits.argmax(axis=1)
    cm = ConfusionMatrix.from_pairs(targets, preds, dataset.label_map)
    return macro_f1(cm), cm


@dataclass
class RoundEntry:
    client_id: int
    participated: bool
    val_f1: float
    train_loss: float | None
    n_examples: int


@dataclass
class RoundRecord:
    round_index: int  # 1-based
    entries: tuple[RoundEntry, ...]
    global_fingerprint: str  # content hash of the broadcast parameters


@dataclass
class RunLog:
    mode: str
    config: dict
    rounds_scheduled: int
    client_ids: list[int]
    label_map: LabelMap
    records: list[RoundRecord]
    final_f1: dict[int, float]
    confusions: dict[int, ConfusionMatrix]
    stop_rounds: dict[int, int | None]

    def mean_final_f1(self) -> float:
        return float(np.mean([self.final_f1[cid] for cid in self.client_ids]))


@dataclass
class FederationSettings:
    """The knobs run_experiment actually consumes."""

    rounds: int = 100
    local_epochs: int = 1
    batch_size: int = 32
    learning_rate: float = 0.001
    seed: int = 0
    early_stopping_enabled: bool = False
    patience: int = 5
    threshold: float = 0.01
    stop_rule: str = "best_so_far"

    def __post_init__(self) -> None:
        if self.rounds < 1 or self.local_epochs < 1 or self.batch_size < 1:
            raise ContractError("rounds, epochs, and batch size must be >= 1")
        if self.patience < 1 or self.threshold < 0:
            raise ContractError("patience must be >= 1 and threshold >= 0")


def run_experiment(
    settings: FederationSettings,
    datasets: list[ClientDataset],
    model_config: ModelConfig,
    mode: str | None = None,
    config_echo: dict | None = None,
) -> RunLog:
    """Drive the full federation and return its complete log.

    Ends early, with a complete log, if every client has stopped. Stopped
    clients keep the global parameters they last received; their recorded
    validation F1 stays frozen at its stop-round value.
    """
    if not datasets:
        raise ContractError("no client datasets")
    datasets = sorted(datasets, key=lambda ds: ds.client_id)
    client_ids = [ds.client_id for ds in datasets]
    if len(set(client_ids)) != len(client_ids):
        raise ContractError("duplicate client ids")
    if mode is None:
        mode = "early_stop" if settings.early_stopping_enabled else "baseline"

    global_params = init_params(model_config)
    stop_states: dict[int, EarlyStopState] = {cid: EarlyStopState() for cid in client_ids}
    frozen_params: dict[int, ModelParams] = {}
    frozen_f1: dict[int, float] = {}
    records: list[RoundRecord] = []

    for round_index in range(1, settings.rounds + 1):
        broadcast_hash = global_params.content_hash()
        contributions: list[AggregationInput] = []
        entries: list[RoundEntry] = []
        for ds in datasets:
            cid = ds.client_id
            if stop_states[cid].stopped:
                entries.append(
                    RoundEntry(
                        client_id=cid,
                        participated=False,
                        val_f1=frozen_f1[cid],
                        train_loss=None,
                        n_examples=0,
                    )
                )
                continue
            f1, _ = evaluate_client(ds, global_params, model_config)
            if settings.early_stopping_enabled:
                state = update_early_stop(
                    stop_states[cid],
                    f1,
                    settings.patience,
                    settings.threshold,
                    settings.stop_rule,
                )
                stop_states[cid] = state
                if state.stopped:
                    frozen_params[cid] = global_params.copy()
                    frozen_f1[cid] = f1
                    log.info("client %d stopped at round %d", cid, round_index)
                    entries.append(
                        RoundEntry(
                            client_id=cid,
                            participated=True,
                            val_f1=f1,
                            train_loss=None,
                            n_examples=0,
                        )
                    )
                    continue
            tuned, n_examples, mean_loss = local_train(
                ds,
                global_params,
                model_config,
                epochs=settings.local_epochs,
                batch_size=settings.batch_size,
                learning_rate=settings.learning_rate,
                seed_chain=(settings.seed, cid, round_index),
            )
            contributions.append(AggregationInput(cid, tuned, n_examples))
            entries.append(
                RoundEntry(
                    client_id=cid,
                    participated=True,
                    val_f1=f1,
                    train_loss=mean_loss,
                    n_examples=n_examples,
                )
            )
        entries.sort(key=lambda e: e.client_id)
        records.append(
            RoundRecord(
                round_index=round_index,
                entries=tuple(entries),
                global_fingerprint=broadcast_hash,
            )
        )
        if not contributions:
            log.info("all clients stopped; ending after round %d", round_index)
            break
        global_params = aggregate_fedavg(contributions)

    final_f1: dict[int, float] = {}
    confusions: dict[int, ConfusionMatrix] = {}
    for ds in datasets:
        params = frozen_params.get(ds.client_id, global_params)
        f1, cm = evaluate_client(ds, params, model_config)
        final_f1[ds.client_id] = f1
        confusions[ds.client_id] = cm

    return RunLog(
        mode=mode,
        config=config_echo or {},
        rounds_scheduled=settings.rounds,
        client_ids=client_ids,
        label_map=datasets[0].label_map,
        records=records,
        final_f1=final_f1,
        confusions=confusions,
        stop_rounds={
            cid: stop_states[cid].stop_round for cid in client_ids
        },
    )


# -- persistence ------------------------------------------------------------


def save_runlog(run: RunLog, out_dir: str | Path) -> dict[str, Path]:
    """Write runlog.jsonl (one round per line) and summary.json.

    Both files are deterministic for a given run: no timestamps, sorted
    keys, repr-round-trip floats.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger = communication_summary(run)

    jsonl_path = out_dir / "runlog.jsonl"
    with jsonl_path.open("w") as fh:
        for record in run.records:
            fh.write(
                json.dumps(
                    {
                        "round": record.round_index,
                        "global_fingerprint": record.global_fingerprint,
                        "clients": [
                            {
                                "client_id": e.client_id,
                                "participated": e.participated,
                                "val_f1": e.val_f1,
                                "train_loss": e.train_loss,
                                "n_examples": e.n_examples,
                            }
                            for e in record.entries
                        ],
                    },
                    sort_keys=True,
                )
                + "\n"
            )

    summary = {
        "schema_version": 1,
        "mode": run.mode,
        "config": run.config,
        "rounds_scheduled": run.rounds_scheduled,
        "rounds_executed": len(run.records),
        "clients": run.client_ids,
        "label_names": list(run.label_map.names),
        "mean_macro_f1": run.mean_final_f1(),
        "per_client": {
            str(cid): {
                "macro_f1": run.final_f1[cid],
                "stop_round": run.stop_rounds[cid],
                "confusion": run.confusions[cid].counts.tolist(),
            }
            for cid in run.client_ids
        },
        "communication": {
            "rounds_scheduled": ledger.rounds_scheduled,
            "total_attended": ledger.total_attended,
            "total_saved": ledger.total_saved,
            "reduction": ledger.reduction,
            "stopped_early": ledger.stopped_early,
            "per_client": {
                str(c.client_id): {"attended": c.attended, "saved": c.saved}
                for c in ledger.clients
            },
        },
    }
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {"runlog": jsonl_path, "summary": summary_path}


def load_runlog(run_dir: str | Path) -> RunLog:
    """Rebuild a RunLog from a directory written by save_runlog."""
    run_dir = Path(run_dir)
    if run_dir.is_file():
        run_dir = run_dir.parent
    summary = json.loads((run_dir / "summary.json").read_text())
    label_map = LabelMap.from_names(summary["label_names"])
    records: list[RoundRecord] = []
    with (run_dir / "runlog.jsonl").open() as fh:
        for line in fh:
            doc = json.loads(line)
            records.append(
                RoundRecord(
                    round_index=doc["round"],
                    entries=tuple(
                        RoundEntry(
                            client_id=c["client_id"],
                            participated=c["participated"],
                            val_f1=c["val_f1"],
                            train_loss=c["train_loss"],
                            n_examples=c["n_examples"],
                        )
                        for c in doc["clients"]
                    ),
                    global_fingerprint=doc["global_fingerprint"],
                )
            )
    client_ids = summary["clients"]
    per_client = summary["per_client"]
    return RunLog(
        mode=summary["mode"],
        config=summary["config"],
        rounds_scheduled=summary["rounds_scheduled"],
        client_ids=client_ids,
        label_map=label_map,
        records=records,
        final_f1={cid: per_client[str(cid)]["macro_f1"] for cid in client_ids},
        confusions={
            cid: ConfusionMatrix(
                counts=np.array(per_client[str(cid)]["confusion"], dtype=np.int64),
                label_map=label_map,
            )
            for cid in client_ids
        },
        stop_rounds={cid: per_client[str(cid)]["stop_round"] for cid in client_ids},
    )
