"""Per-task metric reports from prediction and gold JSON-lines.

Unparseable responses count as wrong decisions (or as a missing box) and
are tallied under ``n_unparseable``. HTER uses positive = spoof:
FAR = attacks accepted as bonafide, FRR = bonafide rejected as attacks.
"""

from __future__ import annotations

from pathlib import Path

from .imagecore import BBox, PPMError, read_ppm
from .metrics import (
    ConfusionCounts,
    UndefinedRateError,
    accuracy,
    ap_at,
    bleu_n,
    far,
    frr,
    hter,
    meteor_exact,
    rouge_l,
)
from .taskproto import UNPARSEABLE, AttackClass, TaskKind, load_synonyms, parse_box, parse_coarse, parse_fine

HTER_ORIENTATION = "positive=spoof; FAR=fn/(fn+tp) attacks accepted as bonafide; FRR=fp/(fp+tn) bonafide rejected"


class EvaluationError(ValueError):
    pass


def _index(rows, what: str) -> dict:
    out = {}
    for k, row in enumerate(rows):
        if "id" not in row:
            raise EvaluationError(f"{what} line {k + 1}: missing 'id'")
        rid = str(row["id"])
        if rid in out:
            raise EvaluationError(f"{what}: duplicate id {rid}")
        out[rid] = row
    return out


def _image_size(g: dict):
    if g.get("width") and g.get("height"):
        return int(g["width"]), int(g["height"])
    path = g.get("image_path")
    if path and Path(path).is_file():
        try:
            img = read_ppm(Path(path).read_bytes())
            return img.width, img.height
        except PPMError:
            pass
    return None, None


def _safe(fn, *args):
    try:
        return fn(*args)
    except UndefinedRateError:
        return None


def _empty_report(task: str, n: int) -> dict:
    return {
        "task": task,
        "n_samples": n,
        "acc": None,
        "hter": None,
        "far": None,
        "frr": None,
        "bleu": None,
        "rouge_l": None,
        "meteor": None,
        "ap40": None,
        "ap50": None,
        "n_unparseable": 0,
        "hter_orientation": HTER_ORIENTATION,
    }


def evaluate(task, predictions: list[dict], gold: list[dict], table=None) -> dict:
    task = TaskKind(task)
    table = table or load_synonyms()
    preds = _index(predictions, "predictions")
    golds = _index(gold, "gold")
    missing = sorted(set(golds) - set(preds))
    extra = sorted(set(preds) - set(golds))
    if missing or extra:
        raise EvaluationError(
            f"id mismatch: missing predictions for {missing}; predictions without gold {extra}"
        )
    for rid, p in preds.items():
        if "raw_text" not in p:
            raise EvaluationError(f"prediction {rid}: missing 'raw_text'")
        if p.get("task", task.value) != task.value:
            raise EvaluationError(f"prediction {rid}: task {p['task']!r} != {task.value!r}")
    ids = sorted(golds)
    if not ids:
        raise EvaluationError("no samples to evaluate")
    report = _empty_report(task.value, len(ids))
    gold_cls = {}
    for rid in ids:
        try:
            gold_cls[rid] = AttackClass.parse(golds[rid]["class"])
        except (KeyError, ValueError) as exc:
            raise EvaluationError(f"gold {rid}: bad or missing class ({exc})") from None

    unparseable = 0
    if task is TaskKind.LOCALIZATION:
        samples = []
        for rid in ids:
            g = golds[rid]
            w, h = _image_size(g)
            gb = g.get("bbox")
            gold_box = None if gb is None else BBox(*(int(v) for v in gb))
            pred_box = parse_box(preds[rid]["raw_text"], w, h)
            # neither a box nor a clear "no attack" statement
            if pred_box is None and parse_coarse(preds[rid]["raw_text"], table) != "bonafide":
                unparseable += 1
            samples.append((pred_box, gold_box))
        report["ap40"] = ap_at(samples, 0.4)
        report["ap50"] = ap_at(samples, 0.5)
        report["n_unparseable"] = unparseable
        return report

    gold_spoof, pred_spoof = [], []
    fine_correct = 0
    for rid in ids:
        raw = preds[rid]["raw_text"]
        gold_spoof.append(gold_cls[rid].is_spoof)
        if task is TaskKind.FINE:
            got = parse_fine(raw, table)
            if got == UNPARSEABLE:
                unparseable += 1
                pred_spoof.append(None)
            else:
                pred_spoof.append(got.is_spoof)
                fine_correct += got == gold_cls[rid]
        else:
            got = parse_coarse(raw, table)
            if got == UNPARSEABLE:
                unparseable += 1
                pred_spoof.append(None)
            else:
                pred_spoof.append(got == "spoof")
    counts = ConfusionCounts.from_labels(gold_spoof, pred_spoof)
    if task is TaskKind.FINE:
        report["acc"] = 100.0 * fine_correct / len(ids)
    else:
        report["acc"] = accuracy(counts)
    report["hter"] = _safe(hter, counts)
    report["far"] = _safe(far, counts)
    report["frr"] = _safe(frr, counts)
    report["n_unparseable"] = unparseable
    report["confusion"] = {"tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn}

    if task is TaskKind.REASONING:
        scores = {f"bleu{n}": [] for n in range(1, 5)}
        scores["rouge_l"], scores["meteor"] = [], []
        for rid in ids:
            ref = golds[rid].get("reference")
            if not ref:
                raise EvaluationError(f"gold {rid}: reasoning needs a 'reference' text")
            hyp = preds[rid]["raw_text"]
            for n in range(1, 5):
                scores[f"bleu{n}"].append(_text_metric(bleu_n, hyp, ref, n))
            scores["rouge_l"].append(_text_metric(rouge_l, hyp, ref))
            scores["meteor"].append(_text_metric(meteor_exact, hyp, ref))
        mean = lambda xs: sum(xs) / len(xs)  # noqa: E731
        report["bleu"] = {str(n): mean(scores[f"bleu{n}"]) for n in range(1, 5)}
        report["rouge_l"] = mean(scores["rouge_l"])
        report["meteor"] = mean(scores["meteor"])
    return report


def _text_metric(fn, hyp: str, ref: str, *args) -> float:
    try:
        return fn(hyp, ref, *args)
    except ValueError:
        # empty hypothesis after tokenization scores zero
        return 0.0
