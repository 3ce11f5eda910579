"""Synthetic tagged corpora for smoke tests and the bundled toy config."""

from __future__ import annotations

import numpy as np

from .corpus import WordSentence

CJK_BASE = 0x4E00


def toy_lexicon(rng: np.random.Generator, n_words: int, alphabet: list[str], tags: list[str],
                max_len: int = 3) -> dict[str, str]:
    """``n_words`` distinct words over ``alphabet``, each with a fixed tag."""
    words: set[str] = set()
    while len(words) < n_words:
        words.add("".join(rng.choice(alphabet, int(rng.integers(1, max_len + 1)))))
    return {w: tags[int(rng.integers(len(tags)))] for w in sorted(words)}


def toy_corpus(seed: int, n_sentences: int, tags: list[str], n_chars: int = 50, n_words: int = 30,
               min_words: int = 3, max_words: int = 8) -> list[WordSentence]:
    rng = np.random.default_rng(seed)
    alphabet = [chr(CJK_BASE + i) for i in range(n_chars)]
    lexicon = toy_lexicon(rng, n_words, alphabet, tags)
    words = list(lexicon)
    out = []
    for _ in range(n_sentences):
        picks = rng.integers(0, len(words), int(rng.integers(min_words, max_words + 1)))
        out.append([(words[i], lexicon[words[i]]) for i in picks])
    return out


def random_text(seed: int, n_chars: int, alphabet_size: int = 3000, min_len: int = 5,
                max_len: int = 60) -> list[str]:
    """Lines of random CJK characters totalling at least ``n_chars``."""
    rng = np.random.default_rng(seed)
    alphabet = np.array([chr(CJK_BASE + i) for i in range(alphabet_size)])
    lines, total = [], 0
    while total < n_chars:
        n = int(rng.integers(min_len, max_len + 1))
        lines.append("".join(rng.choice(alphabet, n)))
        total += n
    return lines
