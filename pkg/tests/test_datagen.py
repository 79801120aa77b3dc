import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsk.datagen import (
    TASKS,
    AssistantError,
    FilterReport,
    GenerationLog,
    HttpAssistantClient,
    HttpSimilarityScorer,
    InstructionRecord,
    MockAssistant,
    MockScorer,
    ScorerError,
    answer_matches_gold,
    augment,
    filter_corpus,
    generate,
    keyword_filter,
    manual_filter,
    read_corpus,
    read_exclusions,
    similarity_filter,
    write_corpus,
)
from fsk.imagecore import BBox
from fsk.taskproto import AnnotationRecord, AttackClass, parse_box

CLASSES = list(AttackClass)


def annotations(n=12, with_box=True):
    out = []
    for i in range(n):
        cls = CLASSES[i % len(CLASSES)]
        box = BBox(i, i, i + 10, i + 12) if with_box and cls.is_spoof else None
        out.append(AnnotationRecord(f"r{i:02d}", f"img{i}.ppm", cls, "WSP"[i % 3], box))
    return out


def qa(rid, answer, task="fine", label="Print", question="<image>\nWhat is it?"):
    conv = ({"role": "human", "text": question}, {"role": "assistant", "text": answer})
    return InstructionRecord(rid, f"{rid}.ppm", task, conv, label)


# -- records -----------------------------------------------------------------


def test_record_role_alternation_enforced():
    with pytest.raises(ValueError):
        InstructionRecord("x", "", "coarse", ({"role": "human", "text": "q"},))
    with pytest.raises(ValueError):
        InstructionRecord(
            "x", "", "coarse", ({"role": "assistant", "text": "a"}, {"role": "human", "text": "q"})
        )
    with pytest.raises(ValueError):
        qa("x", "a", task="chat")


# -- generation ---------------------------------------------------------------


def test_mock_generation_coarse():
    recs = generate(annotations(3), "coarse", MockAssistant())
    assert len(recs) == 3
    assert all(answer_matches_gold(r) for r in recs)
    assert [r.id for r in recs] == ["r00-coarse", "r01-coarse", "r02-coarse"]


@pytest.mark.parametrize("task", TASKS)
def test_label_fidelity_every_task(task):
    recs = generate(annotations(24), task, MockAssistant(), pairs=2)
    assert recs
    for r in recs:
        assert r.conversations[0]["text"].startswith("<image>")
        if task != "pretrain":
            assert answer_matches_gold(r), r


def test_localization_skips_spoof_without_box():
    log = GenerationLog()
    recs = generate(annotations(4, with_box=False), "localization", MockAssistant(), gen_log=log)
    # r00 is bonafide and needs no box
    assert [r.id for r in recs] == ["r00-localization"]
    assert set(log.skipped) == {"r01", "r02", "r03"}
    assert all("bounding box" in v for v in log.skipped.values())


def test_bonafide_localization_has_no_coordinates():
    rec = AnnotationRecord("b", "b.ppm", AttackClass.BONAFIDE, "W")
    (out,) = generate([rec], "localization", MockAssistant())
    answer = out.turns("assistant")[0]
    assert parse_box(answer, 100, 100) is None
    assert "[" not in answer


def test_localization_answer_carries_gold_box():
    rec = AnnotationRecord("p", "p.ppm", AttackClass.MAKEUP, "S", BBox(5, 6, 50, 60))
    (out,) = generate([rec], "localization", MockAssistant())
    assert parse_box(out.turns("assistant")[0], 100, 100) == BBox(5, 6, 50, 60)


class _Scripted:
    def __init__(self, reply):
        self.reply = reply

    def complete(self, system, prompt, image_b64):
        return self.reply


def test_malformed_reply_skipped_and_logged():
    log = GenerationLog()
    assert generate(annotations(2), "coarse", _Scripted("no format here"), gen_log=log) == []
    assert set(log.skipped) == {"r00", "r01"}


class _Broken:
    def complete(self, system, prompt, image_b64):
        raise AssistantError("connection refused")


def test_transport_failure_names_record():
    with pytest.raises(AssistantError) as info:
        generate(annotations(2), "coarse", _Broken())
    assert info.value.record_id == "r00"
    assert info.value.retriable


def test_generation_parallel_matches_serial():
    a = generate(annotations(12), "fine", MockAssistant(), jobs=1)
    b = generate(annotations(12), "fine", MockAssistant(), jobs=4)
    assert a == b


# -- similarity filter ------------------------------------------------------------


def test_similarity_boundary():
    recs = [qa(f"s{i}", "a print attack") for i in range(3)]
    scorer = MockScorer(by_id={"s0": 0.14, "s1": 0.15, "s2": 0.90})
    kept, report = similarity_filter(recs, scorer)
    assert [r.id for r in kept] == ["s1", "s2"]
    assert report.kept == 2 and report.dropped_by_similarity == 1
    assert report.threshold == 0.15 and report.conserved


@pytest.mark.parametrize("value, want", [(1.0, 5), (0.0, 0)])
def test_constant_scorers(value, want):
    recs = [qa(f"s{i}", "a print attack") for i in range(5)]
    kept, report = similarity_filter(recs, MockScorer(value))
    assert len(kept) == want and report.conserved


def test_out_of_range_score_is_an_error():
    with pytest.raises(ScorerError):
        similarity_filter([qa("s", "print")], MockScorer(1.5))


# -- keyword / manual ------------------------------------------------------------


def test_keyword_missing_class_dropped():
    kept, report = keyword_filter([qa("k", "This is a replay attack.", label="Print")])
    assert kept == [] and report.dropped_by_keyword == 1


def test_keyword_default_ban():
    kept, _ = keyword_filter([qa("k", "As an AI model I see a print attack.")])
    assert kept == []


def test_keyword_empty_ban_keeps_well_formed():
    recs = generate(annotations(12), "fine", MockAssistant())
    kept, report = keyword_filter(recs, banned=[])
    assert kept == recs and report.conserved


def test_manual_filter_and_exclusion_file(tmp_path):
    p = tmp_path / "ex.txt"
    p.write_text("# reviewers\nm1\n\nm3  # blurry\n")
    ids = read_exclusions(p)
    assert ids == ["m1", "m3"]
    recs = [qa(f"m{i}", "print") for i in range(4)]
    kept, report = manual_filter(recs, ids)
    assert [r.id for r in kept] == ["m0", "m2"]
    assert report.dropped_by_manual == 2 and report.dropped_ids["manual"] == ["m1", "m3"]


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0, 1), min_size=0, max_size=15),
    st.floats(0, 1),
    st.sets(st.integers(0, 14)),
    st.lists(st.booleans(), min_size=15, max_size=15),
)
def test_filter_conservation(scores, threshold, excluded, good):
    recs = [
        qa(f"c{i:02d}", "a print attack" if good[i] else "as an AI model, no idea")
        for i in range(len(scores))
    ]
    scorer = MockScorer(by_id={f"c{i:02d}": s for i, s in enumerate(scores)})
    kept, report = filter_corpus(recs, scorer, threshold, excluded_ids=[f"c{i:02d}" for i in excluded])
    assert report.conserved
    assert report.kept == len(kept)
    dropped = report.dropped_by_similarity + report.dropped_by_keyword + report.dropped_by_manual
    assert report.input_count == len(recs) == len(kept) + dropped


def test_filter_report_dict():
    d = FilterReport(input_count=3, kept=1, dropped_by_keyword=2).to_dict()
    assert d["input_count"] == 3 and d["kept"] == 1 and d["dropped_by_keyword"] == 2


# -- augmentation ---------------------------------------------------------------


def test_augment_zero_is_identity():
    recs = generate(annotations(3), "coarse", MockAssistant())
    assert augment(recs, MockAssistant(), 0) == recs


def test_augment_identity_paraphraser_triples():
    recs = generate(annotations(4), "fine", MockAssistant())
    out = augment(recs, MockAssistant(), 2)
    assert len(out) == 12
    assert {r.id for r in out} >= {"r00-fine-v1", "r00-fine-v2"}
    # answers never change
    by_id = {r.id: r for r in out}
    for r in recs:
        for v in (1, 2):
            assert by_id[f"{r.id}-v{v}"].turns("assistant") == r.turns("assistant")


def test_augment_rejects_lost_image_token():
    recs = generate(annotations(2), "coarse", MockAssistant())
    drop_token = MockAssistant(paraphrase=lambda q, v: q.replace("<image>", "") if v == 2 else "<image> " + q)
    log = GenerationLog()
    out = augment(recs, drop_token, 2, gen_log=log)
    assert len(out) == 4
    assert set(log.skipped) == {"r00-coarse-v2", "r01-coarse-v2"}


def test_augment_negative():
    with pytest.raises(ValueError):
        augment([], MockAssistant(), -1)


# -- output ----------------------------------------------------------------------


def test_write_empty_corpus(tmp_path):
    m = write_corpus([], tmp_path / "c.jsonl")
    assert (tmp_path / "c.jsonl").read_text() == ""
    assert m["count"] == 0 and all(v == 0 for v in m["per_task"].values())
    assert json.loads((tmp_path / "c.jsonl.manifest.json").read_text()) == m


def test_write_read_round_trip(tmp_path):
    recs = generate(annotations(12), "localization", MockAssistant())
    write_corpus(recs, tmp_path / "c.jsonl")
    assert read_corpus(tmp_path / "c.jsonl") == sorted(recs, key=lambda r: r.id)


def test_corpus_hash_is_order_independent(tmp_path):
    recs = generate(annotations(12), "fine", MockAssistant())
    a = write_corpus(recs, tmp_path / "a.jsonl")
    b = write_corpus(recs[::-1], tmp_path / "b.jsonl")
    assert a["sha256"] == b["sha256"]
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()


def test_duplicate_ids_rejected(tmp_path):
    with pytest.raises(ValueError):
        write_corpus([qa("d", "x"), qa("d", "y")], tmp_path / "c.jsonl")


# -- HTTP wire contract ------------------------------------------------------------


class _Server:
    def __init__(self, respond):
        seen = self.seen = []

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                seen.append(body)
                status, payload = respond(body)
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.httpd = HTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.httpd.server_port}/"
        threading.Thread(target=self.httpd.serve_forever, daemon=True).start()

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def server():
    made = []

    def start(respond):
        s = _Server(respond)
        made.append(s)
        return s

    yield start
    for s in made:
        s.close()


def test_http_assistant_contract(server, tmp_path):
    mock = MockAssistant()
    srv = server(lambda b: (200, {"text": mock.complete(b["system"], b["prompt"], b["image_b64"])}))
    img = tmp_path / "x.ppm"
    img.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
    rec = AnnotationRecord("h", str(img), AttackClass.PRINT, "W")
    (out,) = generate([rec], "coarse", HttpAssistantClient(srv.url, timeout=5))
    assert answer_matches_gold(out)
    (sent,) = srv.seen
    assert set(sent) == {"system", "prompt", "image_b64"}
    assert sent["image_b64"] == "UDYKMSAxCjI1NQoAAAA="


def test_http_assistant_missing_text_field(server):
    srv = server(lambda b: (200, {"answer": "x"}))
    with pytest.raises(AssistantError):
        HttpAssistantClient(srv.url, timeout=5).complete("s", "p", "")


def test_http_assistant_error_status_is_retriable(server):
    srv = server(lambda b: (503, {}))
    with pytest.raises(AssistantError) as info:
        generate(annotations(1), "coarse", HttpAssistantClient(srv.url, timeout=5))
    assert info.value.retriable and info.value.record_id == "r00"


def test_http_scorer_contract(server):
    srv = server(lambda b: (200, {"score": 0.15 if "print" in b["text"] else 0.14}))
    recs = [qa("a", "a print attack"), qa("b", "a replay attack", label="Replay")]
    kept, _ = similarity_filter(recs, HttpSimilarityScorer(srv.url, timeout=5))
    assert [r.id for r in kept] == ["a"]
    assert all(set(s) == {"text", "image_b64"} for s in srv.seen)


def test_http_scorer_failure_aborts(server):
    srv = server(lambda b: (500, {}))
    with pytest.raises(ScorerError):
        similarity_filter([qa("a", "print")], HttpSimilarityScorer(srv.url, timeout=5))


def test_urls_from_environment(monkeypatch):
    monkeypatch.setenv("FSK_ASSISTANT_URL", "http://a.invalid/")
    monkeypatch.setenv("FSK_SCORER_URL", "http://s.invalid/")
    assert HttpAssistantClient().url == "http://a.invalid/"
    assert HttpSimilarityScorer().url == "http://s.invalid/"
    monkeypatch.delenv("FSK_ASSISTANT_URL")
    with pytest.raises(ValueError):
        HttpAssistantClient()
