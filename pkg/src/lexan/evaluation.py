"""Word-level accuracy and named-entity precision/recall/F1.

A system word is correct when some gold word covers exactly the same
character span with exactly the same tag. Accuracy divides by the number of
words the *system* produced.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .tagset import LOW_CONFIDENCE_NE, LabelSpace

Span = tuple[int, int, str]


class AlignmentError(ValueError):
    def __init__(self, index: int, gold: str, system: str):
        super().__init__(f"sentence {index + 1}: character streams differ ({gold!r} vs {system!r})")
        self.index = index


def word_spans(words: Sequence[tuple[str, str]]) -> list[Span]:
    spans, pos = [], 0
    for surface, tag in words:
        spans.append((pos, pos + len(surface), tag))
        pos += len(surface)
    return spans


def _aligned(gold, system):
    if len(gold) != len(system):
        raise ValueError(f"{len(gold)} gold sentences vs {len(system)} system sentences")
    for i, (g, s) in enumerate(zip(gold, system)):
        gs, ss = "".join(w for w, _ in g), "".join(w for w, _ in s)
        if gs != ss:
            raise AlignmentError(i, gs, ss)
        yield g, s


@dataclass
class AccuracyCounts:
    correct: int = 0
    produced: int = 0
    gold: int = 0

    @property
    def accuracy(self) -> float:
        return self.correct / self.produced if self.produced else 0.0


def overall_accuracy(gold, system) -> AccuracyCounts:
    counts = AccuracyCounts()
    for g, s in _aligned(gold, system):
        gold_spans = set(word_spans(g))
        sys_spans = word_spans(s)
        counts.correct += sum(sp in gold_spans for sp in sys_spans)
        counts.produced += len(sys_spans)
        counts.gold += len(gold_spans)
    return counts


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


@dataclass
class PRF:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)


def entity_types(space: LabelSpace, include_low_confidence: bool = False) -> dict[str, str]:
    """Map each tag that counts as an entity mention to its entity type."""
    types = {t.code: t.code for t in space.tags if t.is_named_entity}
    if include_low_confidence:
        codes = {t.code for t in space.tags}
        types.update({lo: hi for lo, hi in LOW_CONFIDENCE_NE.items() if lo in codes and hi in types})
    return types


def ner_prf(gold, system, space: LabelSpace, include_low_confidence: bool = False,
            ) -> tuple[dict[str, PRF], PRF]:
    """Per-type and micro-averaged entity counts; a mention is one word."""
    types = entity_types(space, include_low_confidence)
    per_type = {t: PRF() for t in dict.fromkeys(types.values())}
    for g, s in _aligned(gold, system):
        gm = Counter((a, b, types[t]) for a, b, t in word_spans(g) if t in types)
        sm = Counter((a, b, types[t]) for a, b, t in word_spans(s) if t in types)
        for (_, _, t), n in (gm & sm).items():
            per_type[t].tp += n
        for (_, _, t), n in (sm - gm).items():
            per_type[t].fp += n
        for (_, _, t), n in (gm - sm).items():
            per_type[t].fn += n
    total = PRF(*(sum(getattr(p, k) for p in per_type.values()) for k in ("tp", "fp", "fn")))
    return per_type, total


@dataclass
class EvalReport:
    accuracy: AccuracyCounts
    ner: PRF
    per_type: dict[str, PRF] = field(default_factory=dict)

    def table(self) -> str:
        a = self.accuracy
        lines = [
            f"words: gold {a.gold}  system {a.produced}  correct {a.correct}",
            f"accuracy: {a.accuracy:.3f}",
            "",
            f"{'type':<8}{'P':>8}{'R':>8}{'F1':>8}{'TP':>7}{'FP':>7}{'FN':>7}",
        ]
        rows = list(self.per_type.items()) + [("ALL", self.ner)]
        for name, p in rows:
            lines.append(f"{name:<8}{p.precision:>8.3f}{p.recall:>8.3f}{p.f1:>8.3f}"
                         f"{p.tp:>7}{p.fp:>7}{p.fn:>7}")
        return "\n".join(lines)

    def key_values(self) -> str:
        a = self.accuracy
        kv = [("accuracy", f"{a.accuracy:.6f}"), ("words_correct", a.correct),
              ("words_system", a.produced), ("words_gold", a.gold)]
        for name, p in list(self.per_type.items()) + [("all", self.ner)]:
            kv += [(f"ner.{name}.precision", f"{p.precision:.6f}"),
                   (f"ner.{name}.recall", f"{p.recall:.6f}"),
                   (f"ner.{name}.f1", f"{p.f1:.6f}"),
                   (f"ner.{name}.tp", p.tp), (f"ner.{name}.fp", p.fp), (f"ner.{name}.fn", p.fn)]
        return "\n".join(f"{k}={v}" for k, v in kv)


def evaluate(gold, system, space: LabelSpace, include_low_confidence: bool = False) -> EvalReport:
    per_type, total = ner_prf(gold, system, space, include_low_confidence)
    return EvalReport(overall_accuracy(gold, system), total, per_type)
