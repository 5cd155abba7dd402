"""Training orchestration: single runs, seed/lambda sweeps, checkpoint
evaluation, and an on-disk result store.

A run is fully identified by (experiment config, seed); its sha-derived hash
keys the result directory, which makes sweeps resumable (completed cells are
skipped) and safely parallel (one directory per cell, merged on read).
Checkpoint selection keeps the latest epoch whose validation macro F ties or
beats the best seen, so the constraint term reflects its converged state on
tasks where task F saturates early.
"""

from __future__ import annotations

import hashlib
import json
import random
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
import yaml

from . import corpus as corpus_mod
from . import heuristic as heuristic_mod
from .corpus import Batch, Example, Task, Vocabulary, batchify, read_jsonl
from .metrics import ExampleOutcome, MetricsReport, evaluate_split
from .model import (AttentionClassifier, ModelConfig, build_embedding_matrix,
                    load_checkpoint, load_glove_text, save_checkpoint)
from .objective import ConstraintConfig, ConstraintKind, combined_loss, entropy_constraint

CONFIG_SCHEMA_VERSION = 1


@dataclass
class SyntheticSpec:
    """Generator settings for the planted-rationale corpus."""

    n_train: int = 2000
    n_val: int = 500
    n_test: int = 500
    vocab_size: int = 120
    rationale_lexicon_size: int = 8
    num_classes: int = 2
    seed: int = 0
    min_len: int = 8
    max_len: int = 16
    min_rationale: int = 2
    max_rationale: int = 3
    end_punct: bool = True
    mixed_rationale: bool = False

    def generate(self, split: str) -> list[Example]:
        sizes = {"train": self.n_train, "val": self.n_val, "test": self.n_test}
        if split not in sizes:
            raise ValueError(f"unknown split {split!r}")
        opts = asdict(self)
        for k in ("n_train", "n_val", "n_test"):
            opts.pop(k)
        return corpus_mod.load_corpus(
            "synthetic", None, split,
            synthetic_options={"n": sizes[split], **opts}).examples


@dataclass
class ExperimentConfig:
    corpus: str = "synthetic"
    task: str = "classification"
    data: dict = field(default_factory=dict)      # split -> canonical jsonl path
    model: ModelConfig = None
    constraint: ConstraintConfig = field(default_factory=ConstraintConfig)
    synthetic: Optional[SyntheticSpec] = None
    learning_rate: float = 1e-3
    adam_epsilon: float = 1e-8
    batch_size: int = 128
    max_epochs: int = 20
    seeds: tuple[int, ...] = (0, 1, 2)
    lambda_grid: tuple[float, ...] = (0.0, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1)
    min_count: int = 1
    deterministic: bool = True
    embeddings_path: Optional[str] = None
    heuristic_path: Optional[str] = None
    out_dir: str = "results"

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("seeds list must be non-empty")
        if any(not 0.0 <= l <= 0.1 for l in self.lambda_grid):
            raise ValueError("lambda grid values must lie in [0, 0.1]")
        if isinstance(self.constraint, dict):
            self.constraint = ConstraintConfig(**self.constraint)
        if isinstance(self.model, dict):
            self.model = ModelConfig.from_dict(self.model)
        if isinstance(self.synthetic, dict):
            self.synthetic = SyntheticSpec(**self.synthetic)
        if self.corpus == "synthetic" and self.synthetic is None:
            self.synthetic = SyntheticSpec()
        self.seeds = tuple(self.seeds)
        self.lambda_grid = tuple(self.lambda_grid)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["constraint"]["kind"] = self.constraint.kind.value
        d["schema_version"] = CONFIG_SCHEMA_VERSION
        # normalize tuples/enums into plain JSON types for yaml and hashing
        return json.loads(json.dumps(d))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        version = d.pop("schema_version", CONFIG_SCHEMA_VERSION)
        if version != CONFIG_SCHEMA_VERSION:
            raise ValueError(f"unsupported experiment config schema version {version}")
        return cls(**d)

    def with_updates(self, **kwargs) -> "ExperimentConfig":
        d = self.to_dict()
        d.pop("schema_version", None)
        for key, value in kwargs.items():
            if key == "lam":
                d["constraint"]["lam"] = value
            elif key == "kind":
                d["constraint"]["kind"] = ConstraintKind(value).value
            elif key == "num_bilstm_layers":
                d["model"]["num_bilstm_layers"] = value
            else:
                d[key] = value
        return ExperimentConfig.from_dict(d)


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        return ExperimentConfig.from_dict(yaml.safe_load(f))


def save_experiment_config(config: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=True)


def config_hash(config: ExperimentConfig, seed: int) -> str:
    """Identifies one sweep cell: every experiment-defining field plus the
    seed. Where results land (out_dir) is plumbing and excluded."""
    payload = config.to_dict()
    payload.pop("out_dir", None)
    payload["seed"] = seed
    blob = json.dumps(payload, sort_keys=True).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def seed_everything(seed: int, deterministic: bool = True) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    if deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)


@dataclass
class RunRecord:
    config_hash: str
    seed: int
    status: str                      # "ok" | "failed"
    config: dict
    history: list[dict] = field(default_factory=list)
    final: dict = field(default_factory=dict)     # split -> MetricsReport dict
    extras: dict = field(default_factory=dict)
    checkpoint_path: Optional[str] = None
    wall_clock: float = 0.0
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**d)

    def report(self, split: str = "val") -> MetricsReport:
        return MetricsReport.from_dict(self.final[split])


# ---------------------------------------------------------------------------
# data assembly
# ---------------------------------------------------------------------------

def _load_split(config: ExperimentConfig, split: str) -> list[Example]:
    if config.corpus == "synthetic":
        return config.synthetic.generate(split)
    try:
        path = config.data[split]
    except KeyError:
        raise ValueError(f"unknown split {split!r}; config declares {sorted(config.data)}") from None
    return read_jsonl(path)


def _load_heuristics(config: ExperimentConfig, train: Sequence[Example],
                     examples_by_split: dict) -> dict:
    if config.heuristic_path:
        return heuristic_mod.read_heuristic_jsonl(config.heuristic_path)
    if config.corpus == "synthetic":
        # desk-scale corpus: derive maps directly from the training annotations
        freq = heuristic_mod.build_frequency_table(train)
        maps = {}
        for split_examples in examples_by_split.values():
            maps.update(heuristic_mod.build_maps_for_corpus(
                split_examples, Task(config.task), frequency=freq))
        return maps
    raise ValueError("semi_supervised training needs heuristic_path "
                     "(generate maps with the 'heuristics' command first)")


def _batch_aux(batch: Batch, device, dtype) -> tuple[list, Optional[list]]:
    annotations = []
    heuristics = [] if batch.segments[0].heuristic is not None else None
    for seg in batch.segments:
        ann = torch.from_numpy(seg.annotation).to(device=device, dtype=dtype)
        annotations.append((ann, torch.from_numpy(seg.has_annotation)))
        if heuristics is not None:
            heur = torch.from_numpy(seg.heuristic).to(device=device, dtype=dtype)
            heuristics.append((heur, torch.from_numpy(seg.has_heuristic)))
    return annotations, heuristics


# ---------------------------------------------------------------------------
# single run
# ---------------------------------------------------------------------------

def train_one(config: ExperimentConfig, seed: int, store: Optional[str | Path] = None) -> RunRecord:
    """One fully seeded training run; writes its cell into the result store
    (``store`` overrides config.out_dir)."""
    if config.max_epochs < 1:
        raise ValueError("max_epochs must be >= 1")
    store_path = Path(store) if store is not None else Path(config.out_dir)
    run_hash = config_hash(config, seed)
    started = time.time()
    record = RunRecord(config_hash=run_hash, seed=seed, status="ok", config=config.to_dict())
    try:
        record = _train_one_inner(config, seed, record, store_path)
    except _DivergenceError as exc:
        record.status = "failed"
        record.error = str(exc)
    record.wall_clock = time.time() - started
    write_record(store_path, record)
    return record


class _DivergenceError(RuntimeError):
    pass


def _train_one_inner(config: ExperimentConfig, seed: int, record: RunRecord,
                     store_path: Path) -> RunRecord:
    seed_everything(seed, config.deterministic)

    train = _load_split(config, "train")
    val = _load_split(config, "val")
    if not train or not val:
        raise ValueError("train and val splits must be non-empty")

    vocab = Vocabulary.from_examples(train, min_count=config.min_count)
    model_cfg = config.model
    if model_cfg is None:
        raise ValueError("experiment config has no model section")
    if model_cfg.vocab_size != len(vocab):
        model_cfg = ModelConfig.from_dict({**model_cfg.to_dict(), "vocab_size": len(vocab)})

    pretrained = None
    if config.embeddings_path:
        pretrained = load_glove_text(config.embeddings_path, model_cfg.embedding_dim)
    matrix = build_embedding_matrix(vocab, model_cfg.embedding_dim, pretrained, seed=seed)
    model = AttentionClassifier(model_cfg, embedding_matrix=matrix)

    heuristic_maps = None
    if config.constraint.kind is ConstraintKind.SEMI_SUPERVISED and config.constraint.lam > 0:
        heuristic_maps = _load_heuristics(config, train, {"train": train, "val": val})

    val_batches = batchify(val, config.batch_size, vocab, heuristic_maps)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate,
                                 eps=config.adam_epsilon)

    best_state = None
    best_f = -1.0
    best_epoch = -1
    order_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB41C]))
    for epoch in range(1, config.max_epochs + 1):
        order = order_rng.permutation(len(train))
        epoch_examples = [train[i] for i in order]
        batches = batchify(epoch_examples, config.batch_size, vocab, heuristic_maps)
        model.train()
        ce_sum = 0.0
        att_sum = 0.0
        n_batches = 0
        for batch in batches:
            probs, atts = model.forward_batch(batch)
            annotations, heuristics = _batch_aux(batch, probs.device, probs.dtype)
            labels = torch.from_numpy(batch.labels)
            breakdown = combined_loss(probs, labels, atts, config.constraint,
                                      annotations=annotations, heuristics=heuristics)
            if not torch.isfinite(breakdown.total):
                raise _DivergenceError(f"non-finite loss at epoch {epoch}")
            optimizer.zero_grad()
            breakdown.total.backward()
            optimizer.step()
            ce_sum += float(breakdown.classification.detach())
            att_sum += config.constraint.lam * float(breakdown.attention.detach())
            n_batches += 1
        val_report, _ = _evaluate_model(model, val_batches)
        record.history.append({
            "epoch": epoch,
            "train_classification_loss": ce_sum / n_batches,
            "train_attention_term": att_sum / n_batches,
            "val_macro_f": val_report.macro_f,
        })
        if val_report.macro_f >= best_f:
            best_f = val_report.macro_f
            best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    model.load_state_dict(best_state)
    model.eval()
    val_report, extras = _evaluate_model(model, val_batches)
    record.final["val"] = val_report.to_dict()
    record.extras = {"best_epoch": best_epoch, "vocab_hash": vocab.content_hash(), **extras}

    cell_dir = store_path / record.config_hash
    cell_dir.mkdir(parents=True, exist_ok=True)
    ckpt = cell_dir / "checkpoint.bin"
    save_checkpoint(ckpt, model, vocab.content_hash(),
                    extra={"config_hash": record.config_hash, "seed": seed,
                           "constraint_kind": config.constraint.kind.value,
                           "lam": config.constraint.lam})
    record.checkpoint_path = str(ckpt)
    return record


@torch.no_grad()
def _evaluate_model(model: AttentionClassifier, batches: Sequence[Batch]
                    ) -> tuple[MetricsReport, dict]:
    """MetricsReport over the batches plus mean attention entropy per segment map."""
    model.eval()
    outcomes = []
    entropies = []
    for batch in batches:
        probs, atts = model.forward_batch(batch)
        predictions = probs.argmax(dim=1).tolist()
        for b, ex_id in enumerate(batch.example_ids):
            segments = []
            for s, att in enumerate(atts):
                seg = batch.segments[s]
                L = int(seg.lengths[b])
                scores = att.map[b, :L].double().numpy()
                ann = seg.annotation[b, :L].astype(int).tolist() if seg.has_annotation[b] else None
                segments.append((scores, ann))
                entropies.append(float(entropy_constraint(att.map[b, :L])))
            outcomes.append(ExampleOutcome(
                example_id=ex_id, prediction=int(predictions[b]),
                label=int(batch.labels[b]), segments=segments))
    report = evaluate_split(outcomes)
    extras = {"mean_attention_entropy": float(np.mean(entropies)) if entropies else None}
    return report, extras


# ---------------------------------------------------------------------------
# result store
# ---------------------------------------------------------------------------

def write_record(store: Path, record: RunRecord) -> None:
    cell_dir = store / record.config_hash
    cell_dir.mkdir(parents=True, exist_ok=True)
    (cell_dir / "record.json").write_text(
        json.dumps(record.to_dict(), indent=1, sort_keys=True), encoding="utf-8")
    if record.history:
        lines = ["epoch,train_classification_loss,train_attention_term,val_macro_f"]
        for row in record.history:
            lines.append(f"{row['epoch']},{row['train_classification_loss']!r},"
                         f"{row['train_attention_term']!r},{row['val_macro_f']!r}")
        (cell_dir / "history.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_store(store: str | Path) -> list[RunRecord]:
    records = []
    for path in sorted(Path(store).glob("*/record.json")):
        records.append(RunRecord.from_dict(json.loads(path.read_text(encoding="utf-8"))))
    return records


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

@dataclass
class SweepResult:
    records: list[RunRecord]
    n_new: int = 0
    n_reused: int = 0
    n_failed: int = 0

    def aggregate(self) -> list[dict]:
        """Seed-aggregated rows (mean/min/max) per grid point and metric."""
        groups: dict[tuple, dict[str, list[float]]] = {}
        for rec in self.records:
            if rec.status != "ok":
                continue
            key = _grid_key(rec)
            bucket = groups.setdefault(key, {})
            for metric, value in _record_metrics(rec).items():
                bucket.setdefault(metric, []).append(value)
        rows = []
        for key, metrics in sorted(groups.items()):
            corpus, kind, layers, lam = key
            for metric, values in sorted(metrics.items()):
                rows.append({
                    "corpus": corpus, "constraint": kind, "layers": layers,
                    "lambda": lam, "metric": metric, "n_seeds": len(values),
                    "mean": float(np.mean(values)), "min": float(np.min(values)),
                    "max": float(np.max(values)),
                })
        return rows


def _grid_key(rec: RunRecord) -> tuple:
    cfg = rec.config
    return (cfg["corpus"], cfg["constraint"]["kind"],
            cfg["model"]["num_bilstm_layers"], cfg["constraint"]["lam"])


def _record_metrics(rec: RunRecord) -> dict[str, float]:
    out = {}
    report = rec.final.get("val", {})
    for name in ("macro_f", "mean_auprc", "mean_recall", "mean_specificity"):
        if report.get(name) is not None:
            out[name] = report[name]
    if rec.extras.get("mean_attention_entropy") is not None:
        out["mean_attention_entropy"] = rec.extras["mean_attention_entropy"]
    return out


def sweep(configs: Sequence[ExperimentConfig], store: str | Path,
          progress: bool = False) -> SweepResult:
    """Run every (config, seed) cell not already in the store; never aborts
    the grid on a single cell's failure."""
    if not configs:
        raise ValueError("sweep needs at least one config")
    store = Path(store)
    store.mkdir(parents=True, exist_ok=True)
    existing = {rec.config_hash: rec for rec in read_store(store)}
    result = SweepResult(records=[])
    for config in configs:
        for seed in config.seeds:
            cell = config_hash(config, seed)
            prior = existing.get(cell)
            if prior is not None and prior.status == "ok":
                result.records.append(prior)
                result.n_reused += 1
                continue
            if progress:
                print(f"[sweep] running {cell} (kind={config.constraint.kind.value} "
                      f"lam={config.constraint.lam} layers={config.model.num_bilstm_layers} "
                      f"seed={seed})", flush=True)
            try:
                record = train_one(config, seed, store=store)
            except Exception as exc:
                record = RunRecord(config_hash=cell, seed=seed, status="failed",
                                   config=config.to_dict(), error=f"{type(exc).__name__}: {exc}")
                write_record(store, record)
            result.records.append(record)
            if record.status == "ok":
                result.n_new += 1
            else:
                result.n_failed += 1
    return result


def expand_grid(base: ExperimentConfig, kinds: Optional[Sequence[str]] = None,
                lambdas: Optional[Sequence[float]] = None,
                layers: Optional[Sequence[int]] = None) -> list[ExperimentConfig]:
    """Cartesian product of constraint kinds, lambda values, and LSTM depths."""
    kinds = list(kinds) if kinds else [base.constraint.kind.value]
    lambdas = list(lambdas) if lambdas is not None else list(base.lambda_grid)
    layers = list(layers) if layers else [base.model.num_bilstm_layers]
    configs = []
    for kind in kinds:
        for lam in lambdas:
            for depth in layers:
                configs.append(base.with_updates(kind=kind, lam=lam, num_bilstm_layers=depth))
    return configs


# ---------------------------------------------------------------------------
# checkpoint evaluation
# ---------------------------------------------------------------------------

def evaluate_checkpoint(checkpoint_path: str | Path, config: ExperimentConfig,
                        split: str = "val") -> MetricsReport:
    """Re-evaluate a saved checkpoint on one split; the vocabulary rebuilt from
    the config's training split must hash-match the checkpoint."""
    model, vocab_hash, _ = load_checkpoint(checkpoint_path)
    train = _load_split(config, "train")
    vocab = Vocabulary.from_examples(train, min_count=config.min_count)
    if vocab.content_hash() != vocab_hash:
        raise ValueError(
            f"vocabulary hash mismatch: checkpoint has {vocab_hash}, "
            f"config data rebuilds {vocab.content_hash()}")
    examples = _load_split(config, split)
    batches = batchify(examples, config.batch_size, vocab)
    report, _ = _evaluate_model(model, batches)
    return report
