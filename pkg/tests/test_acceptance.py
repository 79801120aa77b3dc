"""Acceptance checks, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (visible even under output
capture) listing every sub-check, and asserts them all plus a time limit.
"""

import math
import random
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from fsk.cli import main as cli_main
from fsk.datagen import MockScorer, answer_matches_gold, read_corpus, similarity_filter
from fsk.imagecore import BBox, GrayImage, RasterImage
from fsk.metrics import ConfusionCounts, ap_at, bleu_n, hter, iou, meteor_exact, rouge_l
from fsk.pvtm import MaskConfig, PooledPrompt, TokenMatrix, importance, plan_mask
from fsk.savp import HogConfig, hog_plane, lbp_plane, to_gray
from fsk.sweep import CSV_COLUMNS
from fsk.taskproto import AnnotationRecord, ProtocolSpec, make_splits
from fsk.toyenc import (
    PipelineConfig,
    Projector,
    ToyHead,
    init_head,
    init_projector,
    loss_and_grads,
    predict,
    run_pipeline,
    separable_batch,
    train_step,
)

DATA = Path(__file__).parent / "data"


@pytest.fixture
def report(capsys):
    """Collect named checks; print one line at the end and assert."""

    class Report:
        def __init__(self):
            self.checks = []
            self.t0 = time.perf_counter()

        def check(self, name, ok):
            self.checks.append((name, bool(ok)))

        def finish(self, number, title, limit_s):
            elapsed = time.perf_counter() - self.t0
            self.check(f"time {elapsed:.1f}s < {limit_s}s", elapsed < limit_s)
            failed = [n for n, ok in self.checks if not ok]
            status = "FAIL" if failed else "PASS"
            detail = "; ".join(f"{n}: {'ok' if ok else 'FAILED'}" for n, ok in self.checks)
            with capsys.disabled():
                print(f"\n{status} criterion {number} ({title}): {detail}")
            assert not failed, f"criterion {number} failed: {failed}"

    return Report()


def test_criterion_1_savp_correctness(report):
    fixture = GrayImage(np.array([[10, 20, 10], [20, 15, 20], [10, 20, 10]], np.uint8))
    report.check("LBP fixture = 170", lbp_plane(fixture)[1, 1] == 170)
    const = GrayImage(np.full((9, 11), 77, np.uint8))
    report.check("constant interior LBP = 255", (lbp_plane(const)[1:-1, 1:-1] == 255).all())
    red = RasterImage(np.array([[[255, 0, 0]]], np.uint8))
    report.check("gray(255,0,0) = 76", to_gray(red).pixels[0, 0] == 76)
    report.check("constant HOG plane all zero", not hog_plane(GrayImage(np.full((32, 32), 90, np.uint8)), HogConfig()).any())
    report.finish(1, "SAVP correctness", 5)


def test_criterion_2_lbp_monotone_invariance(report):
    rng = np.random.default_rng(2024)
    same = 0
    for _ in range(200):
        g = rng.integers(0, 256, (8, 8), dtype=np.uint8)
        values = np.unique(g)
        targets = np.sort(rng.choice(256, size=len(values), replace=False))
        mapped = targets[np.searchsorted(values, g)].astype(np.uint8)
        same += np.array_equal(lbp_plane(GrayImage(g)), lbp_plane(GrayImage(mapped)))
    report.check(f"{same}/200 LBP planes identical", same == 200)
    report.finish(2, "LBP monotone invariance", 10)


def test_criterion_3_pvtm_invariants(report):
    rng = np.random.default_rng(3)
    sums_ok = top_ok = rank_ok = True
    for trial in range(200):
        n, d = int(rng.integers(2, 80)), int(rng.integers(1, 16))
        v = TokenMatrix(rng.standard_normal((n, d)))
        p = PooledPrompt(rng.standard_normal(d))
        s = importance(v, p)
        sums_ok &= abs(s.sum() - 1) <= 1e-9
        cfg = MaskConfig(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), ("bernoulli", "fixed_count")[trial % 2], trial)
        plan = plan_mask(v, p, cfg)
        top = set(np.argsort(-s, kind="stable")[: math.ceil(round(cfg.retain_fraction * n, 9))].tolist())
        top_ok &= top == set(plan.retained) and not top & set(plan.masked)
        scaled = TokenMatrix(v.values * rng.uniform(0.01, 100, n)[:, None])
        p2 = PooledPrompt(p.values * float(rng.uniform(0.01, 100)))
        rank_ok &= np.array_equal(np.argsort(-s, kind="stable"), np.argsort(-importance(scaled, p2), kind="stable"))
    report.check("sum of S_rank = 1 +- 1e-9", sums_ok)
    report.check("top ceil(kN) never masked", top_ok)
    report.check("ranking invariant under positive scaling", rank_ok)

    v100 = TokenMatrix(rng.standard_normal((100, 8)))
    plan = plan_mask(v100, PooledPrompt(rng.standard_normal(8)), MaskConfig(0.10, 0.05, "fixed_count", 0))
    report.check(
        "fixed_count 10/5/85",
        (len(plan.retained), len(plan.masked), len(plan.kept)) == (10, 5, 85),
    )

    v200 = TokenMatrix(rng.standard_normal((200, 8)))
    p200 = PooledPrompt(rng.standard_normal(8))
    trials = 10_000
    mean = sum(len(plan_mask(v200, p200, MaskConfig(0.10, 0.05, "bernoulli", s)).masked) for s in range(trials)) / trials
    sigma = math.sqrt(180 * 0.05 * 0.95 / trials)
    report.check(f"bernoulli mean {mean:.4f} within 3 sigma of 9", abs(mean - 9.0) <= 3 * sigma)
    report.finish(3, "PVTM invariants", 60)


AP_XFAIL = (
    "the AP fixture lists IoUs 0.9/0.55/0.45/0.41/missing with ap40 = 60.0, "
    "but four of those IoUs are >= 0.4, so the success rate is 80.0; "
    "no thresholding rule that also gives ap50 = 40.0 yields 60.0"
)


@pytest.mark.xfail(strict=True, reason=AP_XFAIL)
def test_criterion_4_metric_oracles(report):
    rng = random.Random(4)
    vocab = list("abcdef")
    worst = {"bleu": 0.0, "rouge": 0.0, "meteor": 0.0}
    for _ in range(150):
        h = [rng.choice(vocab) for _ in range(rng.randint(1, 8))]
        r = [rng.choice(vocab) for _ in range(rng.randint(1, 8))]
        for n in (1, 2, 3, 4):
            worst["bleu"] = max(worst["bleu"], abs(bleu_n(h, r, n) - oracles.bleu(h, r, n)))
        worst["rouge"] = max(worst["rouge"], abs(rouge_l(h, r) - oracles.rouge_l(h, r)))
        worst["meteor"] = max(worst["meteor"], abs(meteor_exact(h, r) - oracles.meteor(h, r)))
    for name, delta in worst.items():
        report.check(f"{name} max |delta| {delta:.1e} <= 1e-9 over 150 pairs", delta <= 1e-9)
    report.check("BLEU hand case = exp(-0.5)", abs(bleu_n("the cat", "the cat sat", 4) - math.exp(-0.5)) <= 1e-9)
    report.check("ROUGE-L fixture = 0.75", rouge_l("a b c d", "a c b d") == 0.75)
    report.check("HTER(20, 10) = 15", hter(ConfusionCounts(tp=8, fn=2, tn=9, fp=1)) == 15.0)
    report.check("IoU fixture = 25/175", abs(iou(BBox(0, 0, 10, 10), BBox(5, 5, 15, 15)) - 25 / 175) <= 1e-12)
    gold = BBox(0, 0, 100, 10)
    samples = [(BBox(0, 0, w, 10), gold) for w in (90, 55, 45, 41)] + [(None, gold)]
    ap50, ap40 = ap_at(samples, 0.5), ap_at(samples, 0.4)
    report.check(f"ap50 = {ap50} (want 40.0)", ap50 == 40.0)
    report.check(f"ap40 = {ap40} (want 60.0)", ap40 == 60.0)
    report.finish(4, "metric-oracle equivalence", 60)


def test_criterion_5_toy_pipeline(report):
    img = RasterImage(np.random.default_rng(5).integers(0, 256, (224, 224, 3), dtype=np.uint8))
    res = run_pipeline(img, "Is this face real?", PipelineConfig(mask=MaskConfig(0.10, 0.05, "fixed_count", 0)))
    report.check(f"pre-mask tokens {res.shapes['vision_tokens'][0]} = 392", res.shapes["vision_tokens"][0] == 392)
    report.check(f"post-mask tokens {res.shapes['post_mask_tokens'][0]} = 374", res.shapes["post_mask_tokens"][0] == 374)

    nrng = np.random.default_rng(55)
    batch = [(TokenMatrix(nrng.standard_normal((k + 2, 5))), int(nrng.integers(2))) for k in range(4)]
    proj, head = init_projector(5, 4, seed=1), init_head(4, 2, seed=2)
    _, grads = loss_and_grads(batch, proj, head)
    params = {"proj_w": proj.weight, "proj_b": proj.bias, "head_w": head.weight, "head_b": head.bias}
    eps, worst = 1e-4, 0.0
    for name, value in params.items():
        for idx in np.ndindex(value.shape):
            moved = []
            for sign in (1, -1):
                p = {k: v.copy() for k, v in params.items()}
                p[name][idx] += sign * eps
                moved.append(loss_and_grads(batch, Projector(p["proj_w"], p["proj_b"]), ToyHead(p["head_w"], p["head_b"]))[0])
            fd = (moved[0] - moved[1]) / (2 * eps)
            an = grads[name][idx]
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an), 1e-3))
    report.check(f"gradient max relative error {worst:.1e} <= 1e-4", worst <= 1e-4)

    train = separable_batch(40, dim=16, seed=0)
    proj, head = init_projector(16, 8, seed=3), init_head(8, 2, seed=4)
    for _ in range(100):
        proj, head, _ = train_step(train, proj, head, 0.1)
    acc = float(np.mean(predict([t for t, _ in train], proj, head) == np.array([y for _, y in train])))
    report.check(f"training accuracy {100 * acc:.1f}% >= 95%", acc >= 0.95)
    report.finish(5, "toy pipeline shapes and gradients", 120)


def test_criterion_6_protocol_determinism(report):
    from concurrent.futures import ThreadPoolExecutor

    cat = [
        AnnotationRecord(f"{s}{i:04d}", "", "Print", s)
        for s, n in {"W": 300, "S": 170, "P": 90}.items()
        for i in range(n)
    ]
    spec = ProtocolSpec(split_seed=6)
    split = make_splits(cat, spec)
    report.check("train and test disjoint", not set(split.train) & set(split.test))
    per_source = {s: sum(i.startswith(s) for i in split.test) for s in "WSP"}
    report.check(f"test sizes {per_source} = 10% per source", per_source == {"W": 30, "S": 17, "P": 9})
    with ThreadPoolExecutor(max_workers=8) as pool:
        runs = list(pool.map(lambda _: make_splits(cat, spec), range(16)))
    report.check("identical across runs and threads", all(r == split for r in runs))
    cross = make_splits(cat, ProtocolSpec.parse("W&S->P", split_seed=6))
    report.check("W&S->P train has no P", not any(i.startswith("P") for i in cross.train))
    report.finish(6, "protocol determinism", 5)


def test_criterion_7_dataset_pipeline(report, tmp_path, capsys):
    cat = DATA / "catalog20.jsonl"
    outs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.jsonl"
        cli_main(["dataset", "build", "--catalog", str(cat), "--out", str(out), "--mock"])
        outs.append(out)
    capsys.readouterr()
    report.check("two builds byte-identical", outs[0].read_bytes() == outs[1].read_bytes())
    records = read_corpus(outs[0])
    report.check(f"{len(records)} records generated from 20", len(records) >= 20)

    pair = records[:2]
    kept, _ = similarity_filter(pair, MockScorer(by_id={pair[0].id: 0.14, pair[1].id: 0.15}))
    report.check("0.14 dropped, 0.15 kept", [r.id for r in kept] == [pair[1].id])

    bad = [r.id for r in records if not answer_matches_gold(r)]
    report.check(f"{len(records) - len(bad)}/{len(records)} answers parse to gold", not bad)
    report.finish(7, "dataset pipeline with mock assistant", 30)


def test_criterion_8_ablation_harness(report, tmp_path):
    ks, ps = ["0", "0.10", "0.20", "0.30"], ["0", "0.05", "0.10", "0.15", "0.20"]
    csvs = []
    for name in ("a", "b"):
        out = tmp_path / f"{name}.csv"
        code = cli_main(["sweep", "--k-list", ",".join(ks), "--p-list", ",".join(ps), "--out", str(out)])
        report.check(f"run {name} exit 0", code == 0)
        csvs.append(out.read_text())
    lines = csvs[0].splitlines()
    report.check("header matches columns", lines[0] == ",".join(CSV_COLUMNS))
    rows = [dict(zip(CSV_COLUMNS, line.split(","))) for line in lines[1:]]
    cells = {(float(r["k"]), float(r["p"])) for r in rows}
    report.check(f"{len(cells)} of 20 cells present", cells == {(float(k), float(p)) for k in ks for p in ps})
    counts = lambda text: [line.split(",")[6] for line in text.splitlines()[1:]]  # noqa: E731
    report.check("post-mask counts identical across runs", counts(csvs[0]) == counts(csvs[1]))
    zero = [r for r in rows if float(r["k"]) == 0 and float(r["p"]) == 0]
    report.check("k=0,p=0 keeps every token", all(float(r["post_mask_n"]) == float(r["pre_mask_n"]) for r in zero))
    report.finish(8, "ablation harness", 120)
