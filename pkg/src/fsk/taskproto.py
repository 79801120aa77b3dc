"""Task definitions, response parsing and train/test protocols.

Keyword and template tables are JSON data files (``fsk/data``) so they can
be extended without touching code.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .imagecore import BBox
from .text import tokenize

__all__ = [
    "AnnotationRecord",
    "AttackClass",
    "PredictionRecord",
    "ProtocolSpec",
    "Split",
    "SynonymTable",
    "TaskKind",
    "TemplateSet",
    "UNPARSEABLE",
    "format_box",
    "load_synonyms",
    "load_templates",
    "make_splits",
    "parse_box",
    "parse_coarse",
    "parse_fine",
    "render_answer",
    "render_prompt",
]

UNPARSEABLE = "unparseable"
SOURCES = ("W", "S", "P")
IMAGE_TOKEN = "<image>"


class AttackClass(str, enum.Enum):
    BONAFIDE = "Bonafide"
    FAKEHEAD = "Fakehead"
    PRINT = "Print"
    GLASSES = "Glasses"
    REPLAY = "Replay"
    PAPER_MASK = "PaperMask"
    FLEXIBLE_MASK = "FlexibleMask"
    RIGID_MASK = "RigidMask"
    PARTIAL_EYE = "PartialEye"
    PARTIAL_MOUTH = "PartialMouth"
    MAKEUP = "Makeup"
    TATTOO = "Tattoo"

    @property
    def is_spoof(self) -> bool:
        return self is not AttackClass.BONAFIDE

    @property
    def phrase(self) -> str:
        """Lowercase phrase used when rendering answers."""
        return _PHRASES[self]

    @classmethod
    def parse(cls, value) -> "AttackClass":
        if isinstance(value, cls):
            return value
        key = re.sub(r"[\s_-]", "", str(value)).lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown attack class {value!r}")


_PHRASES = {
    AttackClass.BONAFIDE: "bonafide",
    AttackClass.FAKEHEAD: "fake head",
    AttackClass.PRINT: "print",
    AttackClass.GLASSES: "glasses",
    AttackClass.REPLAY: "replay",
    AttackClass.PAPER_MASK: "paper mask",
    AttackClass.FLEXIBLE_MASK: "flexible mask",
    AttackClass.RIGID_MASK: "rigid mask",
    AttackClass.PARTIAL_EYE: "partial eye",
    AttackClass.PARTIAL_MOUTH: "partial mouth",
    AttackClass.MAKEUP: "makeup",
    AttackClass.TATTOO: "tattoo",
}


class TaskKind(str, enum.Enum):
    COARSE = "coarse"
    FINE = "fine"
    REASONING = "reasoning"
    LOCALIZATION = "localization"


# -- data tables ---------------------------------------------------------------


def _phrases(items) -> tuple[tuple[str, ...], ...]:
    return tuple(tuple(tokenize(s)) for s in items)


@dataclass(frozen=True)
class SynonymTable:
    bonafide_cues: tuple
    spoof_cues: tuple
    negators: frozenset
    classes: dict  # AttackClass -> tuple of token phrases

    @classmethod
    def from_dict(cls, d: dict) -> "SynonymTable":
        coarse = d["coarse"]
        classes = {AttackClass.parse(k): _phrases(v) for k, v in d["fine"].items()}
        missing = set(AttackClass) - set(classes)
        if missing:
            raise ValueError(f"synonym table lacks classes {sorted(m.value for m in missing)}")
        return cls(
            bonafide_cues=_phrases(coarse["bonafide"]),
            spoof_cues=_phrases(coarse["spoof"]),
            negators=frozenset(coarse["negators"]),
            classes=classes,
        )


@lru_cache(maxsize=None)
def _default_json(name: str) -> str:
    return resources.files("fsk").joinpath("data", name).read_text(encoding="utf-8")


def load_synonyms(path=None) -> SynonymTable:
    text = _default_json("synonyms.json") if path is None else Path(path).read_text("utf-8")
    return SynonymTable.from_dict(json.loads(text))


@dataclass(frozen=True)
class TemplateSet:
    system: str
    questions: dict
    answers: dict
    few_shot: dict
    paraphrase: str
    image_token: str = IMAGE_TOKEN

    @classmethod
    def from_dict(cls, d: dict) -> "TemplateSet":
        ts = cls(
            system=d["system"],
            questions={k: tuple(v) for k, v in d["questions"].items()},
            answers={k: {p: tuple(v) for p, v in pools.items()} for k, pools in d["answers"].items()},
            few_shot={k: tuple(v) for k, v in d.get("few_shot", {}).items()},
            paraphrase=d["paraphrase"],
            image_token=d.get("image_token", IMAGE_TOKEN),
        )
        ts.lint()
        return ts

    def lint(self):
        """Check the template contracts that parsing and generation rely on."""
        for task, pool in self.questions.items():
            for q in pool:
                if self.image_token not in q:
                    raise ValueError(f"{task} question lacks {self.image_token}: {q!r}")
        for pool in self.answers.get("localization", {}).get("spoof", ()):
            if "{coordinates}" not in pool:
                raise ValueError(f"localization spoof answer lacks {{coordinates}}: {pool!r}")
        for pool in self.answers.get("localization", {}).get("bonafide", ()):
            if "{coordinates}" in pool:
                raise ValueError("bonafide localization answers must not carry coordinates")


def load_templates(path=None) -> TemplateSet:
    text = _default_json("templates.json") if path is None else Path(path).read_text("utf-8")
    return TemplateSet.from_dict(json.loads(text))


def render_prompt(task, templates: TemplateSet, ordinal: int = 0) -> str:
    """Question template for ``task``, chosen round-robin by sample ordinal."""
    key = task.value if isinstance(task, TaskKind) else str(task)
    pool = templates.questions.get(key)
    if not pool:
        raise KeyError(f"no question templates for task {key!r}")
    return pool[ordinal % len(pool)]


def format_box(box: BBox) -> str:
    return f"[{box.x1}, {box.y1}, {box.x2}, {box.y2}]"


def render_answer(
    task, cls: AttackClass, templates: TemplateSet, ordinal: int = 0, bbox: BBox | None = None
) -> str:
    """Gold answer text for a record; the inverse of the parsers below."""
    key = task.value if isinstance(task, TaskKind) else str(task)
    polarity = "spoof" if cls.is_spoof else "bonafide"
    pool = templates.answers.get(key, {}).get(polarity)
    if not pool:
        raise KeyError(f"no {polarity} answer templates for task {key!r}")
    text = pool[ordinal % len(pool)].replace("{class_phrase}", cls.phrase)
    if "{coordinates}" in text:
        if bbox is None:
            raise ValueError("answer needs coordinates but the record has no box")
        text = text.replace("{coordinates}", format_box(bbox))
    return text


# -- parsers -------------------------------------------------------------------

_CLAUSE_BREAKS = frozenset(".;,:!?")
NEGATION_WINDOW = 3


def _match_phrases(tokens: list[str], phrase_groups: dict):
    """Longest-match scan. Yields ``(start, group)`` for each matched phrase."""
    by_first: dict[str, list] = {}
    for group, phrases in phrase_groups.items():
        for ph in phrases:
            by_first.setdefault(ph[0], []).append((ph, group))
    for cands in by_first.values():
        cands.sort(key=lambda c: -len(c[0]))
    i = 0
    while i < len(tokens):
        for ph, group in by_first.get(tokens[i], ()):
            if tuple(tokens[i : i + len(ph)]) == ph:
                yield i, group
                i += len(ph)
                break
        else:
            i += 1


def _negated(tokens: list[str], start: int, negators: frozenset) -> bool:
    for k in range(start - 1, max(start - 1 - NEGATION_WINDOW, -1), -1):
        if tokens[k] in _CLAUSE_BREAKS:
            return False
        if tokens[k] in negators:
            return True
    return False


def parse_coarse(raw: str, table: SynonymTable | None = None) -> str:
    """Return ``"bonafide"``, ``"spoof"`` or ``"unparseable"``.

    A cue preceded by a negator within three tokens of the same clause
    counts for the opposite side ("not real" is a spoof cue).
    """
    table = table or load_synonyms()
    tokens = tokenize(raw)
    found = set()
    groups = {"bonafide": table.bonafide_cues, "spoof": table.spoof_cues}
    for start, group in _match_phrases(tokens, groups):
        if _negated(tokens, start, table.negators):
            group = "spoof" if group == "bonafide" else "bonafide"
        found.add(group)
    if len(found) != 1:
        return UNPARSEABLE
    return found.pop()


def parse_fine(raw: str, table: SynonymTable | None = None):
    """Return the single AttackClass named in ``raw``, else ``"unparseable"``."""
    table = table or load_synonyms()
    tokens = tokenize(raw)
    found = {group for _, group in _match_phrases(tokens, table.classes)}
    if len(found) != 1:
        return UNPARSEABLE
    return found.pop()


_NUM = r"([-+]?\d+(?:\.\d+)?|[-+]?\.\d+)"
_BOX = re.compile(r"\[\s*" + r"\s*,\s*".join([_NUM] * 4) + r"\s*\]")


def _round_half_up(x: float) -> int:
    return math.floor(round(x, 9) + 0.5)


def parse_box(raw: str, img_w: int | None = None, img_h: int | None = None) -> BBox | None:
    """First ``[x1, y1, x2, y2]`` group in ``raw`` as a pixel box.

    If all four numbers are <= 1 they are taken as normalised and scaled by
    the image size; without an image size such boxes are rejected. Boxes are
    clamped to the image, and degenerate results give ``None``.
    """
    m = _BOX.search(raw)
    if m is None:
        return None
    vals = [float(g) for g in m.groups()]
    if all(abs(v) <= 1.0 for v in vals):
        if img_w is None or img_h is None:
            return None
        vals = [vals[0] * img_w, vals[1] * img_h, vals[2] * img_w, vals[3] * img_h]
    x1, y1, x2, y2 = (_round_half_up(v) for v in vals)
    x1, x2 = max(x1, 0), max(x2, 0)
    y1, y2 = max(y1, 0), max(y2, 0)
    if img_w is not None:
        x1, x2 = min(x1, img_w), min(x2, img_w)
    if img_h is not None:
        y1, y2 = min(y1, img_h), min(y2, img_h)
    if x1 >= x2 or y1 >= y2:
        return None
    return BBox(x1, y1, x2, y2)


# -- records -------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotationRecord:
    """One catalog line: ``{id, image_path, source, class, bbox}``."""

    id: str
    image_path: str
    cls: AttackClass
    source: str
    bbox: BBox | None = None

    def __post_init__(self):
        object.__setattr__(self, "cls", AttackClass.parse(self.cls))
        if self.source not in SOURCES:
            raise ValueError(f"record {self.id}: unknown source tag {self.source!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationRecord":
        try:
            bbox = d.get("bbox")
            return cls(
                id=str(d["id"]),
                image_path=str(d.get("image_path", "")),
                cls=d["class"],
                source=d["source"],
                bbox=None if bbox is None else BBox(*(int(v) for v in bbox)),
            )
        except KeyError as exc:
            raise ValueError(f"catalog record {d.get('id', '?')}: missing field {exc}") from None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "image_path": self.image_path,
            "source": self.source,
            "class": self.cls.value,
            "bbox": None if self.bbox is None else self.bbox.as_list(),
        }


@dataclass(frozen=True)
class PredictionRecord:
    sample_id: str
    task: TaskKind
    raw_text: str
    parsed_label: object = None  # AttackClass, "bonafide"/"spoof", or None
    parsed_box: BBox | None = None

    @classmethod
    def parse(cls, sample_id, task, raw_text, img_w=None, img_h=None, table=None):
        task = TaskKind(task)
        label = None
        box = None
        if task is TaskKind.FINE:
            got = parse_fine(raw_text, table)
            label = None if got == UNPARSEABLE else got
        else:
            got = parse_coarse(raw_text, table)
            label = None if got == UNPARSEABLE else got
        if task is TaskKind.LOCALIZATION:
            box = parse_box(raw_text, img_w, img_h)
        return cls(str(sample_id), task, raw_text, label, box)


# -- protocols -----------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolSpec:
    """Intra-dataset (``test_source="combined"``) or cross-dataset protocol."""

    train_sources: tuple = SOURCES
    test_source: str = "combined"
    test_fraction: float = 0.10
    split_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "train_sources", tuple(self.train_sources))
        unknown = set(self.train_sources) - set(SOURCES)
        if unknown:
            raise ValueError(f"unknown source tags {sorted(unknown)}")
        if not 0.0 <= self.test_fraction <= 1.0:
            raise ValueError("test_fraction must lie in [0, 1]")
        if self.test_source != "combined":
            if self.test_source not in SOURCES:
                raise ValueError(f"unknown test source {self.test_source!r}")
            if self.test_source in self.train_sources:
                raise ValueError("cross-dataset test source must not be a training source")
            if not self.train_sources:
                raise ValueError("cross-dataset protocol needs training sources")

    @property
    def cross(self) -> bool:
        return self.test_source != "combined"

    @classmethod
    def parse(cls, text: str, **kwargs) -> "ProtocolSpec":
        """``"intra"`` or ``"W&S->P"`` style protocol names."""
        text = text.strip()
        if text.lower() == "intra":
            return cls(**kwargs)
        m = re.fullmatch(r"([WSP](?:&[WSP])*)\s*->\s*([WSP])", text)
        if m is None:
            raise ValueError(f"protocol must be 'intra' or like 'W&S->P', got {text!r}")
        return cls(train_sources=tuple(m.group(1).split("&")), test_source=m.group(2), **kwargs)


@dataclass(frozen=True)
class Split:
    train: tuple
    test: tuple


def held_out(catalog, spec: ProtocolSpec) -> dict[str, tuple[list, list]]:
    """Per-source ``(rest, test)`` id lists after a seeded shuffle."""
    by_source: dict[str, list[str]] = {s: [] for s in SOURCES}
    for rec in catalog:
        rid, source = (rec["id"], rec["source"]) if isinstance(rec, dict) else (rec.id, rec.source)
        if source not in by_source:
            raise ValueError(f"sample {rid}: unknown source tag {source!r}")
        by_source[source].append(str(rid))
    out = {}
    for k, source in enumerate(SOURCES):
        ids = sorted(by_source[source])
        order = np.random.default_rng([int(spec.split_seed) & ((1 << 64) - 1), k]).permutation(len(ids))
        shuffled = [ids[i] for i in order]
        n_test = math.floor(round(spec.test_fraction * len(ids), 9))
        cut = len(ids) - n_test
        out[source] = (shuffled[:cut], shuffled[cut:])
    return out


def make_splits(catalog, spec: ProtocolSpec = ProtocolSpec()) -> Split:
    parts = held_out(catalog, spec)
    if spec.cross:
        train = [i for s in spec.train_sources for i in parts[s][0] + parts[s][1]]
        test = parts[spec.test_source][1]
    else:
        train = [i for s in SOURCES for i in parts[s][0]]
        test = [i for s in SOURCES for i in parts[s][1]]
    return Split(train=tuple(sorted(train)), test=tuple(sorted(test)))
