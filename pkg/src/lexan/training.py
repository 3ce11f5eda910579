"""SGD training with balanced multi-corpus batches and CRF fine-tuning."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import CorpusSet, Vocabulary, build_vocabulary
from .crf import CrfParams, log_likelihood
from .evaluation import overall_accuracy
from .model import Model
from .network import (NetworkGrads, NetworkParams, forward_batch, network_backward, pad_batch,
                      zeros_like_network)
from .tagset import LabelSpace

log = logging.getLogger(__name__)

Example = tuple[Sequence[int], Sequence[int]]  # (char ids, label ids)


@dataclass
class ModelConfig:
    embed_dim: int = 128
    hidden: int = 256
    num_layers: int = 2
    min_count: int = 2


@dataclass
class OptimizerConfig:
    base_lr: float = 1e-3
    embedding_lr: float = 5e-3
    per_corpus: int = 50
    batch_size: int | None = None  # derived as per_corpus x corpus count when None

    def resolved_batch_size(self, n_corpora: int) -> int:
        expected = self.per_corpus * n_corpora
        if self.batch_size is not None and self.batch_size != expected:
            raise ValueError(f"batch_size {self.batch_size} != per_corpus {self.per_corpus} "
                             f"x {n_corpora} corpora")
        return expected


@dataclass
class Schedule:
    finetune_every: int | None = 10_000  # None disables CRF fine-tuning
    finetune_passes: int = 1
    finetune_lr: float | None = None  # defaults to base_lr
    max_epochs: int = 1
    max_batches: int | None = None
    eval_every: int = 1_000
    patience: int = 3

    def __post_init__(self):
        if self.finetune_every is not None and self.finetune_every < 1:
            raise ValueError("finetune_every must be >= 1 (or None to disable)")


# ---------------------------------------------------------------------------
# sampling


class SamplerState:
    """Per-corpus shuffled cursors; draws never repeat within one pass."""

    def __init__(self, sizes: Sequence[int], rng: np.random.Generator):
        if not sizes or min(sizes) < 1:
            raise ValueError("every corpus must hold at least one sentence")
        self.sizes = list(sizes)
        self.rng = rng
        self.perms = [rng.permutation(n) for n in self.sizes]
        self.cursors = [0] * len(self.sizes)
        self.restarts = [0] * len(self.sizes)

    def draw(self, corpus: int) -> int:
        if self.cursors[corpus] == self.sizes[corpus]:
            self.perms[corpus] = self.rng.permutation(self.sizes[corpus])
            self.cursors[corpus] = 0
            self.restarts[corpus] += 1
        idx = int(self.perms[corpus][self.cursors[corpus]])
        self.cursors[corpus] += 1
        return idx


def next_batch(state: SamplerState, cfg: OptimizerConfig) -> list[tuple[int, int]]:
    return [(c, state.draw(c)) for c in range(len(state.sizes)) for _ in range(cfg.per_corpus)]


# ---------------------------------------------------------------------------
# parameters


def init_params(seed: int, vocab_size: int, num_labels: int, cfg: ModelConfig | None = None,
                ) -> tuple[NetworkParams, CrfParams]:
    """Every element, biases included, i.i.d. uniform on [-0.1, 0.1]."""
    cfg = cfg or ModelConfig()
    rng = np.random.default_rng(seed)
    net = zeros_like_network(vocab_size, cfg.embed_dim, cfg.hidden, cfg.num_layers, num_labels)
    crf = CrfParams.zeros(num_labels)
    for _, arr in list(net.arrays()) + list(crf.arrays()):
        arr[...] = rng.uniform(-0.1, 0.1, size=arr.shape)
    return net, crf


def param_digest(arrays) -> str:
    h = hashlib.sha256()
    for name, arr in arrays:
        h.update(name.encode())
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


@dataclass
class CrfGrads:
    transitions: np.ndarray
    start: np.ndarray


@dataclass
class BatchGrads:
    network: NetworkGrads
    crf: CrfGrads


def batch_gradients(net: NetworkParams, crf: CrfParams, batch: Sequence[Example],
                    ) -> tuple[float, BatchGrads]:
    """Mean log-likelihood over the batch and its gradients."""
    ids, lengths = pad_batch([x for x, _ in batch])
    emissions, tape = forward_batch(net, ids, lengths)
    d_em = np.zeros_like(emissions)
    d_trans = np.zeros_like(crf.transitions)
    d_start = np.zeros_like(crf.start)
    total = 0.0
    n = len(batch)
    for b, (_, labels) in enumerate(batch):
        T = lengths[b]
        val, de, dt, ds = log_likelihood(emissions[b, :T], labels, crf)
        total += val
        d_em[b, :T] = de / n
        d_trans += dt / n
        d_start += ds / n
    grads = BatchGrads(network_backward(net, tape, d_em), CrfGrads(d_trans, d_start))
    return total / n, grads


def sgd_step(net: NetworkParams, crf: CrfParams, grads: BatchGrads, cfg: OptimizerConfig) -> None:
    """In-place ascent step on the log-likelihood (descent on its negative)."""
    g = grads.network
    net.embedding[g.embedding_ids] += cfg.embedding_lr * g.embedding_rows
    for layer, glayer in zip(net.layers, g.layers):
        for (_, p), (_, dp) in zip(layer.arrays(), glayer.arrays()):
            if p.shape != dp.shape:
                raise ValueError(f"gradient shape {dp.shape} does not match {p.shape}")
            p += cfg.base_lr * dp
    net.proj_w += cfg.base_lr * g.proj_w
    net.proj_b += cfg.base_lr * g.proj_b
    crf.transitions += cfg.base_lr * grads.crf.transitions
    crf.start += cfg.base_lr * grads.crf.start


def corpus_loglik(emissions: Sequence[np.ndarray], labels: Sequence[Sequence[int]],
                  crf: CrfParams) -> float:
    return float(np.mean([log_likelihood(e, y, crf)[0] for e, y in zip(emissions, labels)]))


def frozen_emissions(net: NetworkParams, examples: Sequence[Example], batch_size: int = 64,
                     ) -> list[np.ndarray]:
    out = []
    for i in range(0, len(examples), batch_size):
        chunk = examples[i:i + batch_size]
        ids, lengths = pad_batch([x for x, _ in chunk])
        em, _ = forward_batch(net, ids, lengths, retain=False)
        out.extend(em[b, :n] for b, n in enumerate(lengths))
    return out


def finetune_crf(net: NetworkParams, crf: CrfParams, human: Sequence[Example], passes: int = 1,
                 lr: float = 1e-3, batch_size: int = 250,
                 monitor: Callable[[int, float], None] | None = None) -> CrfParams:
    """Re-fit transitions and start scores on ``human`` with the network frozen.

    Emissions are computed once; only the returned copy of the CRF changes.
    """
    if not human:
        raise ValueError("fine-tuning needs a non-empty human-annotated corpus")
    emissions = frozen_emissions(net, human)
    labels = [y for _, y in human]
    out = crf.copy()
    step = 0
    for _ in range(passes):
        for i in range(0, len(human), batch_size):
            d_trans = np.zeros_like(out.transitions)
            d_start = np.zeros_like(out.start)
            chunk = range(i, min(i + batch_size, len(human)))
            for j in chunk:
                _, _, dt, ds = log_likelihood(emissions[j], labels[j], out)
                d_trans += dt
                d_start += ds
            out.transitions += lr * d_trans / len(chunk)
            out.start += lr * d_start / len(chunk)
            step += 1
            if monitor is not None:
                monitor(step, corpus_loglik(emissions, labels, out))
    return out


# ---------------------------------------------------------------------------
# training loop


@dataclass
class TrainResult:
    model: Model  # best on dev (or final when there is no dev set)
    final: Model
    log: list[dict] = field(default_factory=list)
    batches: int = 0
    stopped_early: bool = False


def encode_corpora(corpora: CorpusSet, vocab: Vocabulary) -> list[list[Example]]:
    return [[(vocab.encode(s.chars), s.labels) for s in c.sentences] for c in corpora.corpora]


def dev_accuracy(model: Model, dev) -> float:
    """Word accuracy of constrained decoding on word-level dev sentences."""
    texts = ["".join(w for w, _ in s) for s in dev]
    return overall_accuracy(dev, model.tag(texts)).accuracy


def format_log_entry(entry: dict) -> str:
    parts = []
    for k, v in entry.items():
        parts.append(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}")
    return " ".join(parts)


def train(corpora: CorpusSet, space: LabelSpace, *, vocab: Vocabulary | None = None,
          model_cfg: ModelConfig | None = None, opt: OptimizerConfig | None = None,
          schedule: Schedule | None = None, dev=None, seed: int = 0,
          on_log: Callable[[dict], None] | None = None) -> TrainResult:
    model_cfg = model_cfg or ModelConfig()
    opt = opt or OptimizerConfig()
    schedule = schedule or Schedule()
    opt.resolved_batch_size(len(corpora.corpora))
    if vocab is None:
        vocab = build_vocabulary(corpora.texts(), model_cfg.min_count)

    data = encode_corpora(corpora, vocab)
    human = [ex for c, d in zip(corpora.corpora, data) if c.source == "human" for ex in d]
    if schedule.finetune_every is not None and not human:
        raise ValueError("CRF fine-tuning is enabled but no human corpus was given")
    net, crf = init_params(seed, vocab.size, space.size, model_cfg)
    sampler = SamplerState([len(d) for d in data], np.random.default_rng(seed + 1))

    per_epoch = math.ceil(max(len(d) for d in data) / opt.per_corpus)
    total = schedule.max_batches or per_epoch * schedule.max_epochs
    result = TrainResult(Model(space, vocab, net, crf), Model(space, vocab, net, crf))

    def emit(entry: dict) -> None:
        result.log.append(entry)
        log.info(format_log_entry(entry))
        if on_log is not None:
            on_log(entry)

    best_acc = -1.0
    best = (net.copy(), crf.copy())
    if dev:
        best_acc = dev_accuracy(result.model, dev)
        emit({"batch": 0, "dev_accuracy": best_acc})
    bad_evals = 0
    running: list[float] = []
    ft_lr = schedule.finetune_lr if schedule.finetune_lr is not None else opt.base_lr

    for n in range(1, total + 1):
        batch = [data[c][i] for c, i in next_batch(sampler, opt)]
        ll, grads = batch_gradients(net, crf, batch)
        sgd_step(net, crf, grads, opt)
        running.append(ll)
        result.batches = n

        if schedule.finetune_every and n % schedule.finetune_every == 0:
            tuned = finetune_crf(net, crf, human, schedule.finetune_passes, ft_lr,
                                 opt.resolved_batch_size(len(data)))
            crf.transitions[...] = tuned.transitions
            crf.start[...] = tuned.start
            emit({"batch": n, "event": "finetune_crf"})

        if dev and n % schedule.eval_every == 0:
            acc = dev_accuracy(result.model, dev)
            emit({"batch": n, "mean_loglik": float(np.mean(running)), "dev_accuracy": acc})
            running = []
            if acc > best_acc:
                best_acc, best, bad_evals = acc, (net.copy(), crf.copy()), 0
            else:
                bad_evals += 1
                if bad_evals > schedule.patience:
                    result.stopped_early = True
                    break

    if dev:
        result.model = Model(space, vocab, *best)
    else:
        if running:
            emit({"batch": result.batches, "mean_loglik": float(np.mean(running))})
    return result


def char_accuracy(model: Model, sentences) -> float:
    """Fraction of characters whose decoded label equals the reference label."""
    pred = model.decode([s.chars for s in sentences])
    hits = sum(int(a == b) for p, s in zip(pred, sentences) for a, b in zip(p, s.labels))
    return hits / sum(len(s.chars) for s in sentences)

