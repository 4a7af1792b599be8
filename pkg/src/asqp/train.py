"""Mini-batch training with dev-set early stopping and checkpoint snapshots.

The loop is deterministic for a fixed config: data order, negative masks and
weight init all derive from the config seed, and gradient accumulation runs
in a fixed sample order. Negative masks are resampled every epoch. The best
checkpoint is the earliest epoch attaining the maximum dev strict F1;
training stops `patience` epochs after it at the latest.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .codec import encode_sample
from .core import STANDARD, TagSchema
from .data import Corpus
from .errors import DivergedLoss, NonFiniteGradient, NonFiniteLoss, VocabMismatch
from .eval import Metrics, corpus_prf
from .model import (
    LossMask,
    PreparedSample,
    ScorerParams,
    backward,
    batch_loss,
    check_vocab,
    init_params,
    predict,
    sample_negatives,
    prepare_sample,
)

# Resolved defaults when TrainConfig.learning_rate is unset. The trainable
# table needs the larger step: positives are a sliver of the sampled cells
# and the small-lr run plateaus before memorizing.
LR_FILE_BACKED = 3e-5
LR_TRAINABLE = 1e-2


@dataclass
class TrainConfig:
    epochs_max: int = 200
    batch_size: int = 32
    learning_rate: float | None = None  # resolved per provider when unset
    optimizer: str = "adam"  # adam(0.9, 0.999, 1e-8) or sgd
    patience: int = 4
    neg_rate: float = 0.4
    alpha: float = 1.0
    beta: float = 1.0
    seed: int = 0
    schema_variant: str = STANDARD
    embed_dim: int = 32
    pair_dim: int = 400
    tag_threshold: float = 0.5
    cat_threshold: float = 0.5
    allow_conflicts: bool = False

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if not 0.0 <= self.neg_rate <= 1.0:
            raise ValueError("neg_rate must be in [0, 1]")

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(payload: dict) -> "TrainConfig":
        return TrainConfig(**payload)


@dataclass
class EpochRecord:
    epoch: int
    loss_total: float
    loss_acd: float
    loss_aosc: float
    dev_f1: float
    seconds: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""

    def to_jsonl(self) -> str:
        lines = [json.dumps(r.to_json()) for r in self.records]
        lines.append(json.dumps({"best_epoch": self.best_epoch, "stop_reason": self.stop_reason}))
        return "\n".join(lines) + "\n"


class Sgd:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        for name, array in arrays.items():
            array -= self.learning_rate * grads[name]


class Adam:
    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        for name, array in arrays.items():
            grad = grads[name]
            m = self.m.setdefault(name, np.zeros_like(array))
            v = self.v.setdefault(name, np.zeros_like(array))
            m += (1 - self.beta1) * (grad - m)
            v += (1 - self.beta2) * (grad * grad - v)
            m_hat = m / (1 - self.beta1 ** self.t)
            v_hat = v / (1 - self.beta2 ** self.t)
            array -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(config: TrainConfig, provider) -> Sgd | Adam:
    lr = config.learning_rate
    if lr is None:
        lr = LR_TRAINABLE if provider.trainable else LR_FILE_BACKED
    if config.optimizer == "sgd":
        return Sgd(lr)
    if config.optimizer == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


def train(
    train_corpus: Corpus,
    dev_corpus: Corpus,
    config: TrainConfig,
    provider,
) -> tuple[ScorerParams, TrainHistory]:
    if train_corpus.vocab != dev_corpus.vocab:
        raise VocabMismatch("train and dev corpora have different category vocabularies")
    vocab = train_corpus.vocab
    schema = TagSchema.for_variant(config.schema_variant, vocab)
    token_vocab = provider.token_vocab if provider.trainable else None
    params = init_params(
        seed=config.seed,
        embed_dim=provider.dim,
        pair_dim=config.pair_dim,
        schema=schema,
        vocab=vocab,
        token_vocab=token_vocab,
        provider_kind=provider.kind,
        provider_seed=getattr(provider, "seed", 0),
    )

    # lossy encodings are rejected up front unless the caller opted in
    prepared: list[PreparedSample] = []
    for sample in train_corpus.samples:
        encoding = encode_sample(sample, schema, vocab, verify=not config.allow_conflicts)
        prepared.append(prepare_sample(sample.sentence, encoding, provider, params))

    optimizer = make_optimizer(config, provider)
    history = TrainHistory()
    best_f1 = -1.0
    best_params = params.copy()
    for epoch in range(1, config.epochs_max + 1):
        started = time.perf_counter()
        order = np.random.default_rng([config.seed, epoch, 11]).permutation(len(prepared))
        masks: dict[int, LossMask] = {
            int(i): sample_negatives(
                prepared[int(i)].encoding, config.neg_rate, [config.seed, epoch, int(i), 23]
            )
            for i in order
        }
        epoch_losses = []
        for lo in range(0, len(order), config.batch_size):
            batch_idx = [int(i) for i in order[lo:lo + config.batch_size]]
            batch = [prepared[i] for i in batch_idx]
            batch_masks = [masks[i] for i in batch_idx]
            try:
                loss = batch_loss(batch, params, batch_masks, config.alpha, config.beta)
                grads = backward(batch, params, batch_masks, config.alpha, config.beta)
            except (NonFiniteLoss, NonFiniteGradient) as exc:
                raise DivergedLoss(f"epoch {epoch}: {exc}") from exc
            optimizer.step(params.arrays(), grads)
            epoch_losses.append((loss.total, loss.acd_loss, loss.aosc_loss))

        dev_f1 = evaluate_checkpoint(
            params, dev_corpus, provider, config.tag_threshold, config.cat_threshold
        ).f1
        mean_losses = np.mean(epoch_losses, axis=0) if epoch_losses else np.zeros(3)
        history.records.append(
            EpochRecord(
                epoch,
                float(mean_losses[0]),
                float(mean_losses[1]),
                float(mean_losses[2]),
                dev_f1,
                time.perf_counter() - started,
            )
        )
        if dev_f1 > best_f1:
            best_f1 = dev_f1
            best_params = params.copy()
            history.best_epoch = epoch
        if epoch - history.best_epoch >= config.patience:
            history.stop_reason = "early_stop"
            break
    else:
        history.stop_reason = "max_epochs"
    return best_params, history


def evaluate_checkpoint(
    params: ScorerParams,
    corpus: Corpus,
    provider,
    tag_threshold: float = 0.5,
    cat_threshold: float = 0.5,
) -> Metrics:
    """Predict every sample and micro-score against its gold quads."""
    check_vocab(params, corpus.vocab)
    schema = TagSchema.for_variant(params.schema_variant, corpus.vocab)
    pred_lists = [
        predict(
            sample.sentence, params, provider, schema, corpus.vocab,
            tag_threshold, cat_threshold,
        )
        for sample in corpus.samples
    ]
    gold_lists = [list(sample.gold) for sample in corpus.samples]
    return corpus_prf(pred_lists, gold_lists)
