"""Tag inventory, IOB2 label space and label/word conversion.

Every character carries a label ``<tag>-B`` or ``<tag>-I``; there is no
outside label, so a sentence is always fully covered by words.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

B, I = "B", "I"


class SchemeError(ValueError):
    """Raised for malformed tag schemes or unknown tags/labels."""


@dataclass(frozen=True)
class Tag:
    code: str
    is_named_entity: bool = False
    description: str = ""


# (code, is_named_entity, description), in canonical order.
DEFAULT_TAGS: tuple[Tag, ...] = tuple(
    Tag(code, ne, desc)
    for code, ne, desc in [
        ("n", False, "Noun"),
        ("PER", True, "Person"),
        ("nr", False, "Person (low-confidence)"),
        ("LOC", True, "Location"),
        ("ns", False, "Location (low-confidence)"),
        ("ORG", True, "Organization"),
        ("nt", False, "Organization (low-confidence)"),
        ("nw", False, "Artwork"),
        ("nz", False, "Other proper noun"),
        ("TIME", True, "Time"),
        ("t", False, "Time (low-confidence)"),
        ("f", False, "Orientation word"),
        ("s", False, "Locative word"),
        ("v", False, "Verb"),
        ("vd", False, "Verb used as an adverb"),
        ("vn", False, "Verb used as a noun"),
        ("a", False, "Adjective"),
        ("ad", False, "Adjective used as an adverb"),
        ("an", False, "Adjective used as a noun"),
        ("d", False, "Adverb"),
        ("m", False, "Numeral / numeral-measure compound"),
        ("q", False, "Measure word"),
        ("p", False, "Preposition"),
        ("c", False, "Conjunction"),
        ("r", False, "Pronoun"),
        ("u", False, "Auxiliary"),
        ("xc", False, "Other function word"),
        ("w", False, "Punctuation"),
    ]
)

# Low-confidence POS tags and the entity type they stand in for.
LOW_CONFIDENCE_NE = {"nr": "PER", "ns": "LOC", "nt": "ORG", "t": "TIME"}


@dataclass(frozen=True)
class Label:
    tag: Tag
    position: str

    @property
    def name(self) -> str:
        return f"{self.tag.code}-{self.position}"


@dataclass(frozen=True, eq=False)
class LabelSpace:
    """Ordered IOB2 labels plus start and transition legality masks.

    Label ``2k`` is ``tags[k]-B`` and ``2k + 1`` is ``tags[k]-I``.
    ``transition_mask[a, b]`` is True when label ``b`` may follow ``a``.
    """

    tags: tuple[Tag, ...]
    labels: tuple[Label, ...]
    index: dict[str, int] = field(repr=False)
    start_mask: np.ndarray = field(repr=False)
    transition_mask: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def size(self) -> int:
        return len(self.labels)

    def tag(self, code: str) -> Tag:
        try:
            return self.tags[self.index[f"{code}-{B}"] // 2]
        except KeyError:
            raise SchemeError(f"unknown tag {code!r}") from None

    def label_id(self, code: str, position: str) -> int:
        try:
            return self.index[f"{code}-{position}"]
        except KeyError:
            raise SchemeError(f"unknown label {code}-{position}") from None

    def name(self, label: int) -> str:
        self._check(label)
        return self.labels[label].name

    def is_begin(self, label: int) -> bool:
        return label % 2 == 0

    def tag_code(self, label: int) -> str:
        self._check(label)
        return self.labels[label].tag.code

    def _check(self, label: int) -> None:
        if not 0 <= label < len(self.labels):
            raise SchemeError(f"label id {label} out of range [0, {len(self.labels)})")


def build_label_space(tags: Iterable[Tag]) -> LabelSpace:
    tags = tuple(tags)
    if not tags:
        raise SchemeError("tag scheme is empty")
    codes = [t.code for t in tags]
    dupes = sorted({c for c in codes if codes.count(c) > 1})
    if dupes:
        raise SchemeError(f"duplicate tag codes: {', '.join(dupes)}")

    labels = tuple(Label(t, pos) for t in tags for pos in (B, I))
    index = {lab.name: i for i, lab in enumerate(labels)}
    n = len(labels)
    is_b = np.array([lab.position == B for lab in labels])
    tag_of = np.arange(n) // 2
    trans = is_b[None, :] | (tag_of[:, None] == tag_of[None, :])
    is_b.setflags(write=False)
    trans.setflags(write=False)
    return LabelSpace(tags, labels, index, is_b, trans)


_DEFAULT_SPACE: LabelSpace | None = None


def default_label_space() -> LabelSpace:
    global _DEFAULT_SPACE
    if _DEFAULT_SPACE is None:
        _DEFAULT_SPACE = build_label_space(DEFAULT_TAGS)
    return _DEFAULT_SPACE


def is_start_allowed(space: LabelSpace, label: int) -> bool:
    space._check(label)
    return bool(space.start_mask[label])


def is_transition_allowed(space: LabelSpace, prev: int, label: int) -> bool:
    space._check(prev)
    space._check(label)
    return bool(space.transition_mask[prev, label])


def is_legal_sequence(space: LabelSpace, labels: Sequence[int]) -> bool:
    if len(labels) == 0:
        return True
    if not is_start_allowed(space, labels[0]):
        return False
    return all(is_transition_allowed(space, a, b) for a, b in zip(labels, labels[1:]))


def labels_to_words(
    chars: Sequence[str], labels: Sequence[int], space: LabelSpace
) -> list[tuple[str, str]]:
    """Chunk a character labelling into ``(surface, tag)`` words.

    An I label that cannot continue the current word (sentence-initial, or
    after a word of another tag) opens a new word, as if it were B.
    """
    if len(chars) != len(labels):
        raise ValueError(f"length mismatch: {len(chars)} chars vs {len(labels)} labels")
    words: list[tuple[str, str]] = []
    cur: list[str] = []
    cur_tag = None
    for ch, lab in zip(chars, labels):
        code = space.tag_code(int(lab))
        if space.is_begin(int(lab)) or code != cur_tag:
            if cur:
                words.append(("".join(cur), cur_tag))
            cur, cur_tag = [ch], code
        else:
            cur.append(ch)
    if cur:
        words.append(("".join(cur), cur_tag))
    return words


def words_to_labels(words: Sequence[tuple[str, str]], space: LabelSpace) -> list[int]:
    out: list[int] = []
    for surface, code in words:
        b = space.label_id(code, B)
        out.append(b)
        out.extend([b + 1] * (len(surface) - 1))
    return out


def load_scheme(path: str | Path) -> tuple[Tag, ...]:
    """Read a scheme file: ``code<TAB>ne_flag<TAB>description`` per line."""
    tags = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            tags.append(parse_scheme_line(line, lineno))
    return tuple(tags)


def parse_scheme_line(line: str, lineno: int = 0) -> Tag:
    parts = line.split("\t")
    if len(parts) < 2 or parts[1] not in ("0", "1") or not parts[0]:
        raise SchemeError(f"line {lineno}: expected code<TAB>0|1<TAB>description, got {line!r}")
    return Tag(parts[0], parts[1] == "1", parts[2] if len(parts) > 2 else "")


def format_scheme(tags: Iterable[Tag]) -> str:
    return "".join(f"{t.code}\t{int(t.is_named_entity)}\t{t.description}\n" for t in tags)


def parse_scheme(text: str) -> tuple[Tag, ...]:
    return tuple(
        parse_scheme_line(line, i)
        for i, line in enumerate(text.splitlines(), 1)
        if line.strip() and not line.startswith("#")
    )
