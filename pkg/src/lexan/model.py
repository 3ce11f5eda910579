"""A trained tagger: label space, vocabulary, encoder and CRF together."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .corpus import Vocabulary, WordSentence
from .crf import CrfParams, DecodeConstraints, viterbi_batch
from .network import NetworkParams, forward_batch, pad_batch
from .numkernel import NARROW
from .tagset import LabelSpace, labels_to_words

SENTENCE_END = set("。！？；!?;")


@dataclass
class Model:
    space: LabelSpace
    vocab: Vocabulary
    network: NetworkParams
    crf: CrfParams

    @cached_property
    def constraints(self) -> DecodeConstraints:
        return DecodeConstraints.from_space(self.space)

    def narrow(self) -> "Model":
        """float32 copy for inference."""
        return Model(self.space, self.vocab, self.network.astype(NARROW), self.crf.astype(NARROW))

    def decode_ids(self, id_seqs: Sequence[Sequence[int]]) -> list[list[int]]:
        if not id_seqs:
            return []
        ids, lengths = pad_batch(id_seqs)
        emissions, _ = forward_batch(self.network, ids, lengths, retain=False)
        paths, _ = viterbi_batch(emissions, lengths, self.crf, self.constraints)
        return paths

    def decode(self, texts: Sequence[str], batch_size: int = 32) -> list[list[int]]:
        """Constrained best label sequence for every text (empty text -> [])."""
        out: list[list[int]] = [[] for _ in texts]
        # Length-sorted batches keep padding small.
        order = sorted((i for i, t in enumerate(texts) if t), key=lambda i: len(texts[i]))
        for k in range(0, len(order), batch_size):
            chunk = order[k:k + batch_size]
            for i, path in zip(chunk, self.decode_ids([self.vocab.encode(texts[i]) for i in chunk])):
                out[i] = path
        return out

    def tag(self, texts: Sequence[str], batch_size: int = 32) -> list[WordSentence]:
        return [labels_to_words(t, p, self.space) if t else []
                for t, p in zip(texts, self.decode(texts, batch_size))]


def split_long(text: str, limit: int = 1000) -> list[str]:
    """Cut ``text`` into pieces of at most ``limit`` chars, preferring sentence ends."""
    if limit < 1:
        raise ValueError("limit must be positive")
    pieces = []
    while len(text) > limit:
        window = text[:limit]
        cut = max((i + 1 for i, ch in enumerate(window) if ch in SENTENCE_END), default=limit)
        pieces.append(text[:cut])
        text = text[cut:]
    if text:
        pieces.append(text)
    return pieces


def emissions_for(model: Model, text: str) -> np.ndarray:
    ids, lengths = pad_batch([model.vocab.encode(text)])
    em, _ = forward_batch(model.network, ids, lengths, retain=False)
    return em[0]
