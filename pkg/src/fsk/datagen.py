"""Instruction-corpus construction: generation, filtering, augmentation, output.

The assistant and the image-text scorer are external services behind small
interfaces. ``HttpAssistantClient`` and ``HttpSimilarityScorer`` speak the
JSON wire contract; the ``Mock*`` classes are deterministic and need no
network.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .fileio import atomic_write_text, canonical_json, read_jsonl
from .imagecore import BBox
from .taskproto import (
    AnnotationRecord,
    AttackClass,
    SynonymTable,
    TaskKind,
    TemplateSet,
    UNPARSEABLE,
    format_box,
    load_synonyms,
    load_templates,
    parse_box,
    parse_coarse,
    parse_fine,
    render_prompt,
)
from .text import fnv1a_64, tokenize

log = logging.getLogger(__name__)

__all__ = [
    "answer_matches_gold",
    "AssistantClient",
    "AssistantError",
    "DEFAULT_BANNED",
    "FilterReport",
    "HttpAssistantClient",
    "HttpSimilarityScorer",
    "InstructionRecord",
    "MockAssistant",
    "MockScorer",
    "ScorerError",
    "SimilarityScorer",
    "augment",
    "filter_corpus",
    "generate",
    "keyword_filter",
    "manual_filter",
    "read_corpus",
    "similarity_filter",
    "write_corpus",
]

PRETRAIN = "pretrain"
TASKS = (PRETRAIN,) + tuple(t.value for t in TaskKind)
DEFAULT_THRESHOLD = 0.15
DEFAULT_BANNED = (
    "as an ai model",
    "as an ai language model",
    "i'm sorry",
    "i cannot",
    "i can't",
)


class AssistantError(RuntimeError):
    """Transport failure talking to the assistant; safe to retry."""

    retriable = True

    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(f"{message} (record {record_id})" if record_id else message)
        self.record_id = record_id


class ScorerError(RuntimeError):
    pass


# -- records ---------------------------------------------------------------------


@dataclass(frozen=True)
class InstructionRecord:
    """One conversation. ``label``/``bbox`` carry the gold annotation for filtering."""

    id: str
    image_path: str
    task: str
    conversations: tuple
    label: str | None = None
    bbox: tuple | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        conv = tuple({"role": t["role"], "text": t["text"]} for t in self.conversations)
        if len(conv) < 2:
            raise ValueError(f"record {self.id}: a conversation needs at least two turns")
        for k, turn in enumerate(conv):
            expected = "human" if k % 2 == 0 else "assistant"
            if turn["role"] != expected:
                raise ValueError(f"record {self.id}: turn {k} should be {expected}")
        object.__setattr__(self, "conversations", conv)
        if self.bbox is not None:
            object.__setattr__(self, "bbox", tuple(int(v) for v in self.bbox))

    def turns(self, role: str) -> list[str]:
        return [t["text"] for t in self.conversations if t["role"] == role]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "image_path": self.image_path,
            "task": self.task,
            "conversations": [dict(t) for t in self.conversations],
            "label": self.label,
            "bbox": None if self.bbox is None else list(self.bbox),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstructionRecord":
        return cls(
            id=d["id"],
            image_path=d.get("image_path", ""),
            task=d["task"],
            conversations=tuple(d["conversations"]),
            label=d.get("label"),
            bbox=d.get("bbox"),
        )


@dataclass
class FilterReport:
    input_count: int = 0
    kept: int = 0
    dropped_by_similarity: int = 0
    dropped_by_keyword: int = 0
    dropped_by_manual: int = 0
    threshold: float | None = None
    dropped_ids: dict = field(default_factory=dict)

    @property
    def conserved(self) -> bool:
        dropped = self.dropped_by_similarity + self.dropped_by_keyword + self.dropped_by_manual
        return self.kept + dropped == self.input_count

    def to_dict(self) -> dict:
        return {
            "input_count": self.input_count,
            "kept": self.kept,
            "dropped_by_similarity": self.dropped_by_similarity,
            "dropped_by_keyword": self.dropped_by_keyword,
            "dropped_by_manual": self.dropped_by_manual,
            "threshold": self.threshold,
            "dropped_ids": {k: sorted(v) for k, v in self.dropped_ids.items()},
        }


# -- service interfaces ------------------------------------------------------------


class AssistantClient(Protocol):
    def complete(self, system: str, prompt: str, image_b64: str) -> str: ...


class SimilarityScorer(Protocol):
    def score(self, text: str, image_b64: str) -> float: ...


def _post_json(url: str, payload: dict, timeout: float) -> dict:
    req = urllib.request.Request(
        url,
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        if resp.status != 200:
            raise urllib.error.HTTPError(url, resp.status, "unexpected status", resp.headers, None)
        return json.loads(resp.read().decode("utf-8"))


class HttpAssistantClient:
    """POST ``{system, prompt, image_b64}`` and read ``{text}`` back."""

    def __init__(self, url: str | None = None, timeout: float = 60.0):
        self.url = url or os.environ.get("FSK_ASSISTANT_URL")
        if not self.url:
            raise ValueError("assistant URL not configured (assistant.url or FSK_ASSISTANT_URL)")
        self.timeout = timeout

    def complete(self, system: str, prompt: str, image_b64: str) -> str:
        payload = {"system": system, "prompt": prompt, "image_b64": image_b64}
        try:
            body = _post_json(self.url, payload, self.timeout)
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise AssistantError(f"assistant request to {self.url} failed: {exc}") from exc
        text = body.get("text") if isinstance(body, dict) else None
        if not isinstance(text, str):
            raise AssistantError(f"assistant at {self.url} returned no 'text' field")
        return text


class HttpSimilarityScorer:
    """POST ``{text, image_b64}`` and read ``{score}`` back."""

    def __init__(self, url: str | None = None, timeout: float = 60.0):
        self.url = url or os.environ.get("FSK_SCORER_URL")
        if not self.url:
            raise ValueError("scorer URL not configured (scorer.url or FSK_SCORER_URL)")
        self.timeout = timeout

    def score(self, text: str, image_b64: str) -> float:
        try:
            body = _post_json(self.url, {"text": text, "image_b64": image_b64}, self.timeout)
            return float(body["score"])
        except (urllib.error.URLError, OSError, ValueError, KeyError, TypeError) as exc:
            raise ScorerError(f"scorer request to {self.url} failed: {exc}") from exc


class MockAssistant:
    """Answers from the template pools, keyed on the ``Task:``/``Class:`` prompt lines.

    Localization answers keep the literal ``{coordinates}`` placeholder, as a
    real assistant is instructed to. Paraphrase requests are echoed back
    unchanged unless ``paraphrase`` is given.
    """

    def __init__(
        self,
        templates: TemplateSet | None = None,
        paraphrase: Callable[[str, int], str] | None = None,
    ):
        self.templates = templates or load_templates()
        self.paraphrase = paraphrase

    def complete(self, system: str, prompt: str, image_b64: str = "") -> str:
        fields = dict(
            line.split(": ", 1) for line in prompt.splitlines() if ": " in line and line[0].isupper()
        )
        if "Question" in fields and "Variant" in fields:
            question = prompt.split("Question: ", 1)[1].rsplit("\nVariant: ", 1)[0]
            variant = int(fields["Variant"])
            return self.paraphrase(question, variant) if self.paraphrase else question
        task = fields["Task"]
        cls = AttackClass.parse(fields["Class"])
        n_pairs = int(fields.get("Pairs", "1"))
        ordinal = fnv1a_64(prompt) % 997
        lines = []
        for k in range(n_pairs):
            q = render_prompt(task, self.templates, ordinal + k)
            pool = self.templates.answers[task]["spoof" if cls.is_spoof else "bonafide"]
            a = pool[(ordinal + k) % len(pool)].replace("{class_phrase}", cls.phrase)
            lines.append(f"Q: {q.replace(chr(10), ' ')}")
            lines.append(f"A: {a}")
        return "\n".join(lines)


class MockScorer:
    """Constant score, optionally overridden per record id."""

    def __init__(self, value: float = 1.0, by_id: dict | None = None):
        self.value = float(value)
        self.by_id = {str(k): float(v) for k, v in (by_id or {}).items()}

    def score(self, text: str, image_b64: str) -> float:
        return self.value

    def score_record(self, record_id: str, text: str, image_b64: str) -> float:
        return self.by_id.get(record_id, self.value)


# -- generation ------------------------------------------------------------------


def _image_b64(path: str) -> str:
    try:
        return base64.b64encode(Path(path).read_bytes()).decode("ascii")
    except OSError:
        return ""


def build_prompt(record: AnnotationRecord, task: str, templates: TemplateSet, pairs: int = 1) -> str:
    lines = [
        f"Task: {task}",
        f"Class: {record.cls.value}",
        f"Label description: {'real bonafide face' if not record.cls.is_spoof else record.cls.phrase + ' presentation attack'}",
        f"Attack region: {'present' if record.bbox is not None and record.cls.is_spoof else 'absent'}",
        f"Pairs: {pairs}",
        "Examples:",
    ]
    lines.extend(templates.few_shot.get(task, ()))
    lines.append(f"Write {pairs} question-answer pair(s) in the same format.")
    return "\n".join(lines)


def parse_qa(text: str) -> list[tuple[str, str]]:
    """Split ``Q: ...`` / ``A: ...`` lines into pairs; raises ValueError if malformed."""
    pairs, question = [], None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("Q:"):
            if question is not None:
                raise ValueError("question without answer")
            question = line[2:].strip()
        elif line.startswith("A:"):
            if question is None:
                raise ValueError("answer without question")
            pairs.append((question, line[2:].strip()))
            question = None
        elif question is None and pairs:
            # continuation of the previous answer
            q, a = pairs[-1]
            pairs[-1] = (q, a + " " + line)
        else:
            raise ValueError(f"unexpected line {line[:40]!r}")
    if question is not None or not pairs:
        raise ValueError("no complete question-answer pair")
    return pairs


def _make_record(record: AnnotationRecord, task: str, qa, templates: TemplateSet):
    token = templates.image_token
    conv = []
    for k, (q, a) in enumerate(qa):
        q = q.replace(token, "").strip()
        if k == 0:
            q = f"{token}\n{q}"
        if "{coordinates}" in a:
            if record.bbox is None or not record.cls.is_spoof:
                raise ValueError("answer carries coordinates but the record has no attack box")
            a = a.replace("{coordinates}", format_box(record.bbox))
        elif task == TaskKind.LOCALIZATION.value and record.cls.is_spoof:
            raise ValueError("localization answer lacks the {coordinates} placeholder")
        conv.append({"role": "human", "text": q})
        conv.append({"role": "assistant", "text": a})
    if task == PRETRAIN:
        conv = conv[:2]
    return InstructionRecord(
        id=f"{record.id}-{task}",
        image_path=record.image_path,
        task=task,
        conversations=tuple(conv),
        label=record.cls.value,
        bbox=None if record.bbox is None else record.bbox.as_list(),
    )


@dataclass
class GenerationLog:
    skipped: dict = field(default_factory=dict)  # record id -> reason


def generate(
    records: Iterable[AnnotationRecord],
    task: str,
    assistant: AssistantClient,
    templates: TemplateSet | None = None,
    pairs: int = 1,
    jobs: int = 1,
    gen_log: GenerationLog | None = None,
) -> list[InstructionRecord]:
    """Ask the assistant for QA pairs per record.

    Spoof records without a box are skipped for localization, and so are
    records whose reply is malformed; reasons land in ``gen_log``. Transport
    failures raise AssistantError.
    """
    task = TaskKind(task).value if task != PRETRAIN else PRETRAIN
    templates = templates or load_templates()
    gen_log = gen_log if gen_log is not None else GenerationLog()
    records = list(records)

    todo = []
    for rec in records:
        if task == TaskKind.LOCALIZATION.value and rec.cls.is_spoof and rec.bbox is None:
            gen_log.skipped[rec.id] = "spoof record has no bounding box"
            log.info("skip %s: no bounding box for localization", rec.id)
            continue
        todo.append(rec)

    def ask(rec: AnnotationRecord) -> str:
        prompt = build_prompt(rec, task, templates, 1 if task == PRETRAIN else pairs)
        try:
            return assistant.complete(templates.system, prompt, _image_b64(rec.image_path))
        except AssistantError as exc:
            raise AssistantError(str(exc), record_id=rec.id) from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            replies = list(pool.map(ask, todo))
    else:
        replies = [ask(rec) for rec in todo]

    out = []
    for rec, reply in zip(todo, replies):
        try:
            out.append(_make_record(rec, task, parse_qa(reply), templates))
        except ValueError as exc:
            gen_log.skipped[rec.id] = f"malformed assistant output: {exc}"
            log.warning("skip %s: malformed assistant output (%s)", rec.id, exc)
    return out


# -- filters ---------------------------------------------------------------------


def _assistant_text(rec: InstructionRecord) -> str:
    return "\n".join(rec.turns("assistant"))


def similarity_filter(
    records: Iterable[InstructionRecord],
    scorer: SimilarityScorer,
    threshold: float = DEFAULT_THRESHOLD,
):
    """Keep records scoring at least ``threshold``; lower scores are dropped.

    Scorer failures propagate so that no record is dropped silently.
    """
    records = list(records)
    report = FilterReport(input_count=len(records), threshold=threshold)
    kept, dropped = [], []
    for rec in records:
        text, image = _assistant_text(rec), _image_b64(rec.image_path)
        if hasattr(scorer, "score_record"):
            score = scorer.score_record(rec.id, text, image)
        else:
            score = scorer.score(text, image)
        if not 0.0 <= score <= 1.0:
            raise ScorerError(f"record {rec.id}: score {score} outside [0, 1]")
        (kept if score >= threshold else dropped).append(rec)
    report.kept = len(kept)
    report.dropped_by_similarity = len(dropped)
    report.dropped_ids["similarity"] = [r.id for r in dropped]
    return kept, report


def default_required_keywords(table: SynonymTable | None = None) -> dict:
    """Task -> class -> phrases, one of which the answer must contain."""
    table = table or load_synonyms()
    join = lambda phrases: tuple(" ".join(p) for p in phrases)  # noqa: E731
    binary = {
        c.value: join(table.spoof_cues if c.is_spoof else table.bonafide_cues) for c in AttackClass
    }
    fine = {c.value: join(table.classes[c]) for c in AttackClass}
    return {"coarse": binary, "fine": fine, "reasoning": binary, "localization": binary}


def _contains_phrase(text: str, phrase: str) -> bool:
    toks, ph = tokenize(text), tokenize(phrase)
    return any(toks[i : i + len(ph)] == ph for i in range(len(toks) - len(ph) + 1))


def keyword_filter(
    records: Iterable[InstructionRecord],
    banned: Iterable[str] = DEFAULT_BANNED,
    required_by_task: dict | None = None,
):
    """Drop answers with a banned phrase, or without the gold class keyword."""
    records = list(records)
    banned = [b.lower() for b in banned]
    required = default_required_keywords() if required_by_task is None else required_by_task
    report = FilterReport(input_count=len(records))
    kept, dropped = [], []
    for rec in records:
        text = _assistant_text(rec)
        lowered = text.lower()
        ok = not any(b in lowered for b in banned)
        need = required.get(rec.task, {}).get(rec.label) if rec.label else None
        if ok and need:
            ok = any(_contains_phrase(text, ph) for ph in need)
        (kept if ok else dropped).append(rec)
    report.kept = len(kept)
    report.dropped_by_keyword = len(dropped)
    report.dropped_ids["keyword"] = [r.id for r in dropped]
    return kept, report


def manual_filter(records: Iterable[InstructionRecord], excluded_ids: Iterable[str]):
    """Drop records listed by human reviewers."""
    records = list(records)
    excluded = set(excluded_ids)
    report = FilterReport(input_count=len(records))
    kept = [r for r in records if r.id not in excluded]
    report.kept = len(kept)
    report.dropped_by_manual = len(records) - len(kept)
    report.dropped_ids["manual"] = [r.id for r in records if r.id in excluded]
    return kept, report


def read_exclusions(path) -> list[str]:
    """One id per line; ``#`` starts a comment."""
    ids = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            ids.append(line)
    return ids


def filter_corpus(
    records: Iterable[InstructionRecord],
    scorer: SimilarityScorer | None = None,
    threshold: float = DEFAULT_THRESHOLD,
    banned: Iterable[str] = DEFAULT_BANNED,
    required_by_task: dict | None = None,
    excluded_ids: Iterable[str] = (),
):
    """Similarity, then keyword, then manual filtering, with one combined report.

    ``scorer=None`` skips the similarity stage.
    """
    records = list(records)
    report = FilterReport(input_count=len(records), threshold=threshold if scorer else None)
    kept = records
    if scorer is not None:
        kept, r = similarity_filter(kept, scorer, threshold)
        report.dropped_by_similarity = r.dropped_by_similarity
        report.dropped_ids.update(r.dropped_ids)
    kept, r = keyword_filter(kept, banned, required_by_task)
    report.dropped_by_keyword = r.dropped_by_keyword
    report.dropped_ids.update(r.dropped_ids)
    kept, r = manual_filter(kept, excluded_ids)
    report.dropped_by_manual = r.dropped_by_manual
    report.dropped_ids.update(r.dropped_ids)
    report.kept = len(kept)
    return kept, report


# -- augmentation ------------------------------------------------------------------


def augment(
    records: Iterable[InstructionRecord],
    assistant: AssistantClient,
    n_variants: int,
    templates: TemplateSet | None = None,
    gen_log: GenerationLog | None = None,
) -> list[InstructionRecord]:
    """Originals plus up to ``n_variants`` paraphrased copies of each record.

    Only human turns are rewritten. A paraphrase that loses the image token
    rejects that variant.
    """
    if n_variants < 0:
        raise ValueError("n_variants must be >= 0")
    templates = templates or load_templates()
    gen_log = gen_log if gen_log is not None else GenerationLog()
    token = templates.image_token
    out = []
    for rec in records:
        out.append(rec)
        for v in range(1, n_variants + 1):
            conv = []
            rejected = None
            for turn in rec.conversations:
                if turn["role"] != "human":
                    conv.append(dict(turn))
                    continue
                prompt = templates.paraphrase.replace("{question}", turn["text"]).replace(
                    "{variant}", str(v)
                )
                try:
                    text = assistant.complete(templates.system, prompt, _image_b64(rec.image_path))
                except AssistantError as exc:
                    raise AssistantError(str(exc), record_id=rec.id) from exc
                text = text.strip()
                if token in turn["text"] and token not in text:
                    rejected = "paraphrase dropped the image token"
                    break
                if not text:
                    rejected = "empty paraphrase"
                    break
                conv.append({"role": "human", "text": text})
            vid = f"{rec.id}-v{v}"
            if rejected:
                gen_log.skipped[vid] = rejected
                log.warning("reject %s: %s", vid, rejected)
                continue
            out.append(
                InstructionRecord(vid, rec.image_path, rec.task, tuple(conv), rec.label, rec.bbox)
            )
    return out


# -- label fidelity ------------------------------------------------------------------


def answer_matches_gold(rec: InstructionRecord, table: SynonymTable | None = None) -> bool:
    """Whether the task parsers recover the gold label (and box) from every answer."""
    if rec.label is None:
        return False
    gold = AttackClass.parse(rec.label)
    return all(_answer_ok(a, rec, gold, table) for a in rec.turns("assistant"))


def _answer_ok(answer: str, rec: InstructionRecord, gold: AttackClass, table) -> bool:
    if rec.task == "fine":
        return parse_fine(answer, table) == gold
    got = parse_coarse(answer, table)
    if got == UNPARSEABLE or (got == "spoof") != gold.is_spoof:
        return False
    if rec.task == "localization":
        box = parse_box(answer)
        if not gold.is_spoof:
            return box is None
        return box is not None and rec.bbox is not None and box == BBox(*rec.bbox)
    return True


# -- output ----------------------------------------------------------------------


def _corpus_text(records: Iterable[InstructionRecord]) -> str:
    rows = sorted((r.to_dict() for r in records), key=lambda d: d["id"])
    return "".join(canonical_json(row) + "\n" for row in rows)


def write_corpus(records: Iterable[InstructionRecord], path) -> dict:
    """Write sorted JSON-lines plus ``<path>.manifest.json``; returns the manifest."""
    records = list(records)
    ids = [r.id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate record ids in corpus")
    text = _corpus_text(records)
    path = Path(path)
    atomic_write_text(path, text)
    per_task: dict[str, int] = {t: 0 for t in TASKS}
    for r in records:
        per_task[r.task] += 1
    manifest = {
        "path": path.name,
        "count": len(records),
        "per_task": per_task,
        "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
    }
    atomic_write_text(manifest_path(path), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def manifest_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".manifest.json")


def read_corpus(path) -> list[InstructionRecord]:
    return [InstructionRecord.from_dict(d) for d in read_jsonl(path)]
