"""Annotated text I/O, IOB2 conversion, vocabulary and multi-corpus sets.

Tagged text is one sentence per line of ``surface/tag`` tokens separated by
whitespace. The tag is whatever follows the last ``/`` of a token, so
surfaces may themselves contain slashes (``1/2/m``).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .network import UNK_ID
from .tagset import LabelSpace, SchemeError, labels_to_words, words_to_labels

Word = tuple[str, str]
WordSentence = list[Word]


class CorpusFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CharSentence:
    chars: str
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.chars) != len(self.labels):
            raise ValueError("chars and labels differ in length")


def parse_tagged_line(line: str, space: LabelSpace | None = None, lineno: int = 0) -> WordSentence:
    line = line.rstrip("\r\n")
    words: WordSentence = []
    for m in re.finditer(r"[^ \t]+", line):
        token = m.group()
        surface, sep, tag = token.rpartition("/")
        if not sep or not surface or not tag:
            raise CorpusFormatError(
                f"line {lineno}, column {m.start() + 1}: token {token!r} is not surface/tag")
        if space is not None:
            space.tag(tag)
        words.append((surface, tag))
    if not words:
        raise CorpusFormatError(f"line {lineno}: empty sentence")
    return words


def format_tagged_line(words: Iterable[Word]) -> str:
    return " ".join(f"{s}/{t}" for s, t in words)


def to_iob2(words: Sequence[Word], space: LabelSpace) -> CharSentence:
    return CharSentence("".join(s for s, _ in words), tuple(words_to_labels(words, space)))


def from_iob2(sent: CharSentence, space: LabelSpace) -> WordSentence:
    return labels_to_words(sent.chars, sent.labels, space)


def read_tagged_file(path: str | Path, space: LabelSpace | None = None) -> list[WordSentence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                out.append(parse_tagged_line(line, space, lineno))
    return out


def write_tagged_file(path: str | Path, sentences: Iterable[Sequence[Word]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(format_tagged_line(s) + "\n")


@dataclass
class Vocabulary:
    """Character to id map. Ids 0 and 1 are reserved for UNK and PAD."""

    chars: list[str]  # chars[i] has id i + 2
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {c: i + 2 for i, c in enumerate(self.chars)}
        if len(self.index) != len(self.chars):
            raise ValueError("vocabulary characters must be unique")

    def __len__(self) -> int:
        return len(self.chars) + 2

    @property
    def size(self) -> int:
        return len(self)

    def encode(self, text: str) -> list[int]:
        get = self.index.get
        return [get(c, UNK_ID) for c in text]


def build_vocabulary(texts: Iterable[str], min_count: int = 2) -> Vocabulary:
    """Characters seen at least ``min_count`` times, by frequency then codepoint."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    for text in texts:
        counts.update(text)
    kept = sorted((c for c, n in counts.items() if n >= min_count), key=lambda c: (-counts[c], c))
    return Vocabulary(kept)


@dataclass
class Corpus:
    name: str
    source: str  # "machine" or "human"
    sentences: list[CharSentence]

    def __len__(self) -> int:
        return len(self.sentences)


@dataclass
class CorpusSet:
    corpora: list[Corpus]

    def __post_init__(self):
        if not self.corpora:
            raise ValueError("a corpus set needs at least one corpus")
        for c in self.corpora:
            if c.source not in ("machine", "human"):
                raise ValueError(f"corpus {c.name}: source must be machine or human, got {c.source!r}")

    @property
    def human(self) -> list[Corpus]:
        return [c for c in self.corpora if c.source == "human"]

    def texts(self) -> Iterator[str]:
        for c in self.corpora:
            for s in c.sentences:
                yield s.chars


def read_manifest(path: str | Path) -> list[tuple[str, Path, str]]:
    """Parse ``name<TAB>path<TAB>machine|human`` lines; paths resolve relative to the manifest."""
    path = Path(path)
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusFormatError(f"{path}:{lineno}: expected name<TAB>path<TAB>source")
            name, p, source = parts
            entries.append((name, (path.parent / p), source))
    return entries


def load_corpus_set(manifest: str | Path, space: LabelSpace) -> CorpusSet:
    corpora = []
    for name, p, source in read_manifest(manifest):
        try:
            sents = [to_iob2(w, space) for w in read_tagged_file(p, space)]
        except SchemeError as e:
            raise CorpusFormatError(f"{p}: {e}") from None
        corpora.append(Corpus(name, source, sents))
    return CorpusSet(corpora)
