"""Command-line entry point: ``fsk <subcommand> ...``.

Settings resolve in the order flags, ``--config`` JSON file, environment,
built-in defaults. ``--verbose`` prints the resolved values and where each
came from. Exit status is 0 only when nothing failed; usage errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import BACKEND, __version__
from .datagen import (
    TASKS,
    AssistantError,
    GenerationLog,
    HttpAssistantClient,
    HttpSimilarityScorer,
    MockAssistant,
    MockScorer,
    ScorerError,
    augment,
    filter_corpus,
    generate,
    read_corpus,
    read_exclusions,
    write_corpus,
)
from .evaluate import EvaluationError, evaluate
from .fileio import atomic_write_bytes, atomic_write_text, read_jsonl
from .imagecore import PPMError, read_ppm, write_pgm
from .pvtm import (
    MASK_MODES,
    MASK_STYLES,
    MaskConfig,
    TokmatError,
    importance_map,
    plan_mask,
    pool_prompt,
    read_tokmat,
)
from .savp import HogConfig, SizeError, compose_savp, write_descriptor
from .sweep import SweepConfig, rows_to_csv, run_sweep
from .taskproto import AnnotationRecord, TaskKind, load_synonyms, load_templates
from .toyenc import (
    CLASS_COUNTS,
    PatchEmbedConfig,
    PipelineConfig,
    embed_prompt,
    init_head,
    init_projector,
    load_params,
    run_pipeline,
    save_params,
)

DEFAULTS = {
    "seed": 0,
    "jobs": 1,
    "assistant.url": None,
    "scorer.url": None,
    "hog.cell_size": 8,
    "hog.bins": 9,
    "hog.block_size": 2,
    "hog.block_stride": 1,
    "hog.norm_clip": 0.2,
    "mask.k": 0.10,
    "mask.p": 0.05,
    "mask.mode": "bernoulli",
    "mask.style": "drop",
    "embed.patch_size": 16,
    "embed.dim": 64,
    "embed.seed": 0,
    "toy.proj_dim": 32,
    "toy.class_count": 2,
    "dataset.pairs": 1,
    "dataset.threshold": 0.15,
    "dataset.variants": 1,
    "sweep.k_list": "0,0.10,0.20,0.30",
    "sweep.p_list": "0,0.05,0.10,0.15,0.20",
    "sweep.trials": 1,
    "sweep.steps": 100,
    "sweep.lr": 0.1,
    "sweep.mode": "fixed_count",
}
ENV_KEYS = {
    "assistant.url": "FSK_ASSISTANT_URL",
    "scorer.url": "FSK_SCORER_URL",
    "seed": "FSK_SEED",
}
# types for values coming from env or a config file
_TYPES = {k: type(v) for k, v in DEFAULTS.items() if v is not None}


class CliError(Exception):
    """A failure the user can act on; the message names the file or id."""


# -- configuration -----------------------------------------------------------


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_config_file(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"{path}: cannot read config ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON at line {exc.lineno} col {exc.colno}") from None
    if not isinstance(raw, dict):
        raise CliError(f"{path}: config must be a JSON object")
    flat = _flatten(raw)
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise CliError(f"{path}: unknown config keys {unknown}")
    return flat


def _coerce(key: str, value, origin: str):
    typ = _TYPES.get(key)
    if value is None or typ is None or isinstance(value, typ):
        return value
    try:
        if typ is bool:
            return str(value).lower() in ("1", "true", "yes")
        if typ is int and isinstance(value, float) and not value.is_integer():
            raise ValueError
        return typ(value)
    except (TypeError, ValueError):
        raise CliError(f"{origin}: {key} expects {typ.__name__}, got {value!r}") from None


def resolve_settings(ns: argparse.Namespace, env=None) -> dict:
    """Map each setting the subcommand exposes to ``(value, source)``."""
    env = os.environ if env is None else env
    file_cfg = load_config_file(ns.config) if getattr(ns, "config", None) else {}
    out = {}
    for key, default in DEFAULTS.items():
        if not hasattr(ns, key):
            continue
        flag = getattr(ns, key)
        if flag is not None:
            out[key] = (flag, "flag")
        elif key in file_cfg:
            out[key] = (_coerce(key, file_cfg[key], f"{ns.config}"), "config")
        elif key in ENV_KEYS and env.get(ENV_KEYS[key]):
            out[key] = (_coerce(key, env[ENV_KEYS[key]], ENV_KEYS[key]), "env")
        else:
            out[key] = (default, "default")
    return out


def _values(settings: dict) -> dict:
    return {k: v for k, (v, _) in settings.items()}


# -- helpers -------------------------------------------------------------------


def _float_list(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise CliError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


def _grid_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise CliError(f"--importance-map: expected WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise CliError(f"--importance-map: grid must be positive, got {text!r}")
    return w, h


def _hog(cfg: dict) -> HogConfig:
    try:
        return HogConfig(
            cell_size=cfg["hog.cell_size"],
            bins=cfg["hog.bins"],
            block_size=cfg["hog.block_size"],
            block_stride=cfg["hog.block_stride"],
            norm_clip=cfg["hog.norm_clip"],
        )
    except ValueError as exc:
        raise CliError(f"HOG settings: {exc}") from None


def _mask(cfg: dict) -> MaskConfig:
    try:
        return MaskConfig(cfg["mask.k"], cfg["mask.p"], cfg["mask.mode"], cfg["seed"])
    except ValueError as exc:
        raise CliError(f"mask settings: {exc}") from None


def _emit(text: str, out) -> None:
    if out:
        atomic_write_text(out, text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _read_jsonl(path, what: str) -> list[dict]:
    try:
        return read_jsonl(path)
    except OSError as exc:
        raise CliError(f"{path}: cannot read {what} ({exc.strerror})") from None
    except ValueError as exc:
        raise CliError(str(exc)) from None


def _assistant(cfg: dict, mock: bool, templates):
    if mock:
        return MockAssistant(templates)
    url = cfg["assistant.url"]
    if not url:
        raise CliError("no assistant configured: pass --mock, --assistant-url or set FSK_ASSISTANT_URL")
    return HttpAssistantClient(url)


# -- subcommands -----------------------------------------------------------------


def cmd_savp(ns, cfg: dict) -> int:
    in_dir, out_dir = Path(ns.in_dir), Path(ns.out_dir)
    if not in_dir.is_dir():
        raise CliError(f"{in_dir}: not a directory")
    hog = _hog(cfg)
    files = sorted(p for p in in_dir.iterdir() if p.suffix.lower() == ".ppm" and p.is_file())

    def one(path: Path):
        try:
            desc = compose_savp(read_ppm(path.read_bytes()), hog)
            write_descriptor(desc, out_dir, path.stem)
            return None
        except PPMError as exc:
            return f"{path}: {exc}"
        except (OSError, SizeError, ValueError) as exc:
            return f"{path}: {exc}"

    jobs = max(1, int(cfg["jobs"]))
    if jobs > 1 and len(files) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            errors = list(pool.map(one, files))
    else:
        errors = [one(p) for p in files]
    failed = [e for e in errors if e]
    for msg in failed:
        print(msg, file=sys.stderr)
    print(f"{len(files) - len(failed)} processed, {len(failed)} failed")
    return 1 if failed else 0


def cmd_pvtm(ns, cfg: dict) -> int:
    grid = _grid_size(ns.importance_map) if ns.importance_map else None
    if grid and not ns.map_out:
        raise CliError("--importance-map needs --map-out")
    mask = _mask(cfg)
    try:
        tokens = read_tokmat(Path(ns.tokens).read_bytes())
    except OSError as exc:
        raise CliError(f"{ns.tokens}: cannot read ({exc.strerror})") from None
    except TokmatError as exc:
        raise CliError(f"{ns.tokens}: {exc}") from None
    if ns.prompt_tokens:
        try:
            prompt_tm = read_tokmat(Path(ns.prompt_tokens).read_bytes())
        except OSError as exc:
            raise CliError(f"{ns.prompt_tokens}: cannot read ({exc.strerror})") from None
        except TokmatError as exc:
            raise CliError(f"{ns.prompt_tokens}: {exc}") from None
        if prompt_tm.dim != tokens.dim:
            raise CliError(
                f"{ns.prompt_tokens}: prompt dim {prompt_tm.dim} != token dim {tokens.dim} in {ns.tokens}"
            )
    else:
        try:
            prompt_tm = embed_prompt(ns.prompt, PatchEmbedConfig(dim=tokens.dim))
        except ValueError as exc:
            raise CliError(f"--prompt: {exc}") from None
    try:
        plan = plan_mask(tokens, pool_prompt(prompt_tm), mask)
    except ValueError as exc:
        raise CliError(f"{ns.tokens}: {exc}") from None
    if grid:
        try:
            img = importance_map(plan, grid[0], grid[1], ns.map_start)
        except ValueError as exc:
            raise CliError(f"--importance-map: {exc}") from None
    _emit(plan.to_json() + "\n", ns.out)
    if grid:
        atomic_write_bytes(ns.map_out, write_pgm(img))
    return 0


def cmd_eval(ns, cfg: dict) -> int:
    table = load_synonyms(ns.synonyms)
    preds = _read_jsonl(ns.predictions, "predictions")
    gold = _read_jsonl(ns.gold, "gold")
    try:
        report = evaluate(ns.task, preds, gold, table)
    except EvaluationError as exc:
        raise CliError(f"{ns.predictions} vs {ns.gold}: {exc}") from None
    _emit(_dump(report), ns.report)
    return 0


def cmd_sweep(ns, cfg: dict) -> int:
    k_list = _float_list(cfg["sweep.k_list"], "k-list")
    p_list = _float_list(cfg["sweep.p_list"], "p-list")
    if cfg["sweep.mode"] not in MASK_MODES:
        raise CliError(f"--mode must be one of {MASK_MODES}")
    sc = SweepConfig(
        steps=cfg["sweep.steps"], lr=cfg["sweep.lr"], mode=cfg["sweep.mode"], seed=cfg["seed"]
    )
    try:
        rows = run_sweep(k_list, p_list, cfg["sweep.trials"], sc)
    except ValueError as exc:
        raise CliError(f"sweep: {exc}") from None
    _emit(rows_to_csv(rows), ns.out)
    return 0


def _catalog(path) -> list[AnnotationRecord]:
    out = []
    for k, row in enumerate(_read_jsonl(path, "catalog"), 1):
        try:
            out.append(AnnotationRecord.from_dict(row))
        except (KeyError, TypeError, ValueError) as exc:
            rid = row.get("id", f"line {k}") if isinstance(row, dict) else f"line {k}"
            raise CliError(f"{path}: record {rid}: {exc}") from None
    return out


def _corpus(path):
    try:
        return read_corpus(path)
    except OSError as exc:
        raise CliError(f"{path}: cannot read corpus ({exc.strerror})") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_dataset_build(ns, cfg: dict) -> int:
    if ns.task != "all" and ns.task not in TASKS:
        raise CliError(f"--task must be one of {('all',) + TASKS}")
    templates = load_templates(ns.templates)
    assistant = _assistant(cfg, ns.mock, templates)
    catalog = _catalog(ns.catalog)
    tasks = TASKS if ns.task == "all" else (ns.task,)
    records, skipped = [], {}
    for task in tasks:
        gen_log = GenerationLog()
        records.extend(
            generate(catalog, task, assistant, templates, cfg["dataset.pairs"], cfg["jobs"], gen_log)
        )
        if gen_log.skipped:
            skipped[task] = dict(sorted(gen_log.skipped.items()))
    manifest = write_corpus(records, ns.out)
    report = {"manifest": manifest, "input_count": len(catalog), "skipped": skipped}
    text = _dump(report)
    sys.stdout.write(text)
    if ns.report:
        atomic_write_text(ns.report, text)
    return 0


def cmd_dataset_filter(ns, cfg: dict) -> int:
    if ns.mock_score is not None and ns.scores:
        raise CliError("--mock-score and --scores are mutually exclusive")
    records = _corpus(ns.corpus)
    scorer = None
    if ns.scores:
        try:
            by_id = json.loads(Path(ns.scores).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"{ns.scores}: cannot load scores ({exc})") from None
        scorer = MockScorer(1.0 if ns.mock_score is None else ns.mock_score, by_id)
    elif ns.mock_score is not None:
        scorer = MockScorer(ns.mock_score)
    elif cfg["scorer.url"]:
        scorer = HttpSimilarityScorer(cfg["scorer.url"])
    elif not ns.skip_similarity:
        raise CliError("no scorer configured: pass --mock-score, --scores, --scorer-url or --skip-similarity")
    excluded = read_exclusions(ns.exclusions) if ns.exclusions else ()
    kept, report = filter_corpus(
        records, scorer, cfg["dataset.threshold"], excluded_ids=excluded
    )
    manifest = write_corpus(kept, ns.out)
    text = _dump({"manifest": manifest, **report.to_dict()})
    sys.stdout.write(text)
    if ns.report:
        atomic_write_text(ns.report, text)
    return 0


def cmd_dataset_augment(ns, cfg: dict) -> int:
    templates = load_templates(ns.templates)
    assistant = _assistant(cfg, ns.mock, templates)
    records = _corpus(ns.corpus)
    gen_log = GenerationLog()
    try:
        out = augment(records, assistant, cfg["dataset.variants"], templates, gen_log)
    except ValueError as exc:
        raise CliError(f"augment: {exc}") from None
    manifest = write_corpus(out, ns.out)
    text = _dump({"manifest": manifest, "input_count": len(records), "rejected": dict(sorted(gen_log.skipped.items()))})
    sys.stdout.write(text)
    if ns.report:
        atomic_write_text(ns.report, text)
    return 0


def cmd_toy_run(ns, cfg: dict) -> int:
    if cfg["toy.class_count"] not in CLASS_COUNTS:
        raise CliError(f"--class-count must be one of {CLASS_COUNTS}")
    if cfg["mask.style"] not in MASK_STYLES:
        raise CliError(f"--mask-style must be one of {MASK_STYLES}")
    try:
        pc = PipelineConfig(
            hog=_hog(cfg),
            embed=PatchEmbedConfig(cfg["embed.patch_size"], cfg["embed.dim"], cfg["embed.seed"]),
            mask=_mask(cfg),
            mask_style=cfg["mask.style"],
            resize=ns.resize,
            proj_dim=cfg["toy.proj_dim"],
            class_count=cfg["toy.class_count"],
        )
    except ValueError as exc:
        raise CliError(f"toy settings: {exc}") from None
    try:
        img = read_ppm(Path(ns.image).read_bytes())
    except OSError as exc:
        raise CliError(f"{ns.image}: cannot read ({exc.strerror})") from None
    except PPMError as exc:
        raise CliError(f"{ns.image}: {exc}") from None
    proj = head = None
    if ns.params:
        try:
            proj, head, _ = load_params(ns.params)
        except (OSError, KeyError, TokmatError, ValueError) as exc:
            raise CliError(f"{ns.params}: cannot load parameters ({exc})") from None
    try:
        result = run_pipeline(img, ns.prompt, pc, proj, head)
    except ValueError as exc:
        raise CliError(f"{ns.image}: {exc}") from None
    _emit(_dump(result.to_dict()), ns.out)
    if ns.save_params:
        proj = proj or init_projector(pc.embed.dim, pc.proj_dim, seed=pc.param_seed)
        head = head or init_head(proj.d_out, pc.class_count, seed=pc.param_seed + 1)
        save_params(ns.save_params, proj, head, {"image": Path(ns.image).name})
    return 0


# -- parser ----------------------------------------------------------------------


def _opt(p, flag, key, typ=None, help=None, choices=None):
    p.add_argument(flag, dest=key, type=typ, default=None, help=help, choices=choices)


def _common(p):
    p.add_argument("--config", help="JSON settings file (nested or dotted keys)")
    p.add_argument("-v", "--verbose", action="store_true", help="print resolved settings")


def _hog_opts(p):
    _opt(p, "--cell-size", "hog.cell_size", int, "HOG cell size in pixels")
    _opt(p, "--bins", "hog.bins", int, "HOG orientation bins")
    _opt(p, "--block-size", "hog.block_size", int, "HOG block size in cells")
    _opt(p, "--block-stride", "hog.block_stride", int, "HOG block stride in cells")
    _opt(p, "--norm-clip", "hog.norm_clip", float, "L2-Hys clip value")


def _mask_opts(p):
    _opt(p, "--k", "mask.k", float, "retain fraction")
    _opt(p, "--p", "mask.p", float, "mask probability")
    _opt(p, "--mode", "mask.mode", str, "masking mode", MASK_MODES)
    _opt(p, "--seed", "seed", int, "random seed (env FSK_SEED)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fsk", description="Face anti-spoofing toolkit: descriptors, token masking, metrics and dataset tooling.")
    ap.add_argument("--version", action="version", version=f"fsk {__version__} ({BACKEND} kernels)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("savp", help="write LBP/gray/HOG descriptor planes for a directory of PPMs")
    _common(p)
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    _opt(p, "--jobs", "jobs", int, "parallel files")
    _hog_opts(p)
    p.set_defaults(func=cmd_savp)

    p = sub.add_parser("pvtm", help="plan prompt-guided token masking for a TOKMAT file")
    _common(p)
    p.add_argument("tokens", help="vision tokens, TOKMAT format")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--prompt", help="prompt text, embedded with the toy hash embedding")
    g.add_argument("--prompt-tokens", help="prompt token TOKMAT file")
    _mask_opts(p)
    p.add_argument("--out", help="mask plan JSON (default stdout)")
    p.add_argument("--importance-map", metavar="WxH", help="also render importance scores as a WxH PGM")
    p.add_argument("--map-start", type=int, default=0, help="first token of the map grid")
    p.add_argument("--map-out", help="PGM path for --importance-map")
    p.set_defaults(func=cmd_pvtm)

    p = sub.add_parser("eval", help="score predictions against gold records")
    _common(p)
    p.add_argument("--task", required=True, choices=[t.value for t in TaskKind])
    p.add_argument("predictions")
    p.add_argument("gold")
    p.add_argument("--report", help="report JSON (default stdout)")
    p.add_argument("--synonyms", help="synonym table JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="retain-fraction x mask-probability ablation on a synthetic set")
    _common(p)
    _opt(p, "--k-list", "sweep.k_list", str, "comma-separated retain fractions")
    _opt(p, "--p-list", "sweep.p_list", str, "comma-separated mask probabilities")
    _opt(p, "--trials", "sweep.trials", int, "trials per cell")
    _opt(p, "--steps", "sweep.steps", int, "gradient steps per cell")
    _opt(p, "--lr", "sweep.lr", float, "learning rate")
    _opt(p, "--mode", "sweep.mode", str, "masking mode", MASK_MODES)
    _opt(p, "--seed", "seed", int, "base seed (env FSK_SEED)")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dataset", help="instruction corpus construction")
    dsub = p.add_subparsers(dest="dataset_command", required=True)

    b = dsub.add_parser("build", help="generate QA records from an annotation catalog")
    _common(b)
    b.add_argument("--catalog", required=True, help="annotation records, JSON-lines")
    b.add_argument("--task", default="all", help="task name or 'all'")
    b.add_argument("--out", required=True, help="corpus JSON-lines path")
    b.add_argument("--report", help="also write the report JSON here")
    b.add_argument("--mock", action="store_true", help="use the deterministic mock assistant")
    b.add_argument("--templates", help="template JSON")
    _opt(b, "--assistant-url", "assistant.url", str, "assistant endpoint (env FSK_ASSISTANT_URL)")
    _opt(b, "--pairs", "dataset.pairs", int, "QA pairs per record")
    _opt(b, "--jobs", "jobs", int, "in-flight assistant requests")
    b.set_defaults(func=cmd_dataset_build)

    f = dsub.add_parser("filter", help="similarity, keyword and manual filtering")
    _common(f)
    f.add_argument("corpus")
    f.add_argument("--out", required=True)
    f.add_argument("--report")
    f.add_argument("--mock-score", type=float, help="constant mock similarity score")
    f.add_argument("--scores", help="JSON object of record id -> mock score")
    f.add_argument("--skip-similarity", action="store_true")
    f.add_argument("--exclusions", help="manual-review exclusion list, one id per line")
    _opt(f, "--scorer-url", "scorer.url", str, "scorer endpoint (env FSK_SCORER_URL)")
    _opt(f, "--threshold", "dataset.threshold", float, "minimum similarity kept")
    f.set_defaults(func=cmd_dataset_filter)

    a = dsub.add_parser("augment", help="paraphrase human turns")
    _common(a)
    a.add_argument("corpus")
    a.add_argument("--out", required=True)
    a.add_argument("--report")
    a.add_argument("--mock", action="store_true")
    a.add_argument("--templates")
    _opt(a, "--assistant-url", "assistant.url", str, "assistant endpoint (env FSK_ASSISTANT_URL)")
    _opt(a, "--variants", "dataset.variants", int, "paraphrases per record")
    a.set_defaults(func=cmd_dataset_augment)

    p = sub.add_parser("toy", help="toy vision/projection pipeline")
    tsub = p.add_subparsers(dest="toy_command", required=True)
    t = tsub.add_parser("run", help="run one image and prompt through the toy pipeline")
    _common(t)
    t.add_argument("image", help="PPM image")
    t.add_argument("--prompt", required=True)
    t.add_argument("--out", help="result JSON (default stdout)")
    t.add_argument("--resize", action="store_true", help="nearest-neighbour resize to a patch multiple; otherwise sizes must divide")
    t.add_argument("--params", help="load parameters saved by --save-params")
    t.add_argument("--save-params", metavar="DIR", help="write the parameters used")
    _mask_opts(t)
    _opt(t, "--mask-style", "mask.style", str, "drop or zero masked tokens", MASK_STYLES)
    _opt(t, "--patch-size", "embed.patch_size", int)
    _opt(t, "--dim", "embed.dim", int)
    _opt(t, "--embed-seed", "embed.seed", int)
    _opt(t, "--proj-dim", "toy.proj_dim", int)
    _opt(t, "--class-count", "toy.class_count", int)
    _hog_opts(t)
    t.set_defaults(func=cmd_toy_run)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if ns.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        settings = resolve_settings(ns)
        if ns.verbose:
            for key, (value, source) in settings.items():
                print(f"config {key} = {value!r} ({source})", file=sys.stderr)
        return ns.func(ns, _values(settings))
    except CliError as exc:
        print(f"fsk: error: {exc}", file=sys.stderr)
        return 1
    except (AssistantError, ScorerError) as exc:
        print(f"fsk: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
