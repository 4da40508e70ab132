import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aura.ara.chunking import Chunk, Document, chunk_document
from aura.ara.context import MAX_K, MIN_K, allocate_context, base_k, estimate_complexity
from aura.ara.fuse import rrf_fuse
from aura.ara.index import EmptyKnowledgeBase, KnowledgeBase, PersistError, retrieve
from aura.ara.metrics import MissingGold, retrieval_metrics
from aura.ara.tokenizer import count_tokens, tokenize

_WORDS = [f"w{i}" for i in range(40)]


def _random_document(rng, doc_id, max_sentence_tokens):
    sections = []
    for _ in range(rng.integers(1, 5)):
        sentences = []
        for _ in range(rng.integers(1, 12)):
            n = int(rng.integers(1, max_sentence_tokens + 1))
            sentences.append(" ".join(rng.choice(_WORDS, size=n)) + ".")
        sections.append(" ".join(sentences))
    return Document(doc_id=doc_id, text="\n\n".join(sections))


def _reference_chunks(doc, s_target, o):
    """Independent re-derivation of the chunking procedure: emit short
    sections whole; otherwise pack sentences up to the target, carrying the
    last o tokens forward as overlap, and flush any trailing remainder."""
    out = []
    for block in doc.text.split("\n\n"):
        block = block.strip()
        if not block:
            continue
        words = tokenize(block)
        if len(words) <= s_target + o:
            out.append(words)
            continue
        buf = []
        for sentence in block.split(". "):
            toks = tokenize(sentence)
            if not toks:
                continue
            if len(buf) + len(toks) > s_target:
                if buf:
                    out.append(buf)
                    buf = (buf[-o:] if o > 0 else []) + toks
                else:
                    buf = toks
            else:
                buf = buf + toks
        if buf:
            out.append(buf)
    return [" ".join(ws) for ws in out]


class TestChunking:
    def test_matches_reference_on_randomized_documents(self):
        rng = np.random.default_rng(17)
        for i in range(50):
            s_target = int(rng.integers(8, 40))
            o = int(rng.integers(0, min(8, s_target)))
            doc = _random_document(rng, f"D{i}", max_sentence_tokens=s_target)
            got = [c.text for c in chunk_document(doc, s_target=s_target, o=o)]
            assert got == _reference_chunks(doc, s_target, o), (i, s_target, o)

    def test_no_chunk_exceeds_budget(self):
        rng = np.random.default_rng(23)
        for i in range(50):
            s_target = int(rng.integers(8, 40))
            o = int(rng.integers(0, min(8, s_target)))
            doc = _random_document(rng, f"E{i}", max_sentence_tokens=s_target)
            for c in chunk_document(doc, s_target=s_target, o=o):
                assert c.token_count <= s_target + o

    def test_short_section_emitted_whole(self):
        doc = Document("d", "alpha beta gamma. delta epsilon.")
        chunks = chunk_document(doc, s_target=512, o=64)
        assert len(chunks) == 1
        assert chunks[0].chunk_id == "d#0"
        assert chunks[0].token_count == 5

    def test_overlap_tokens_carry_forward(self):
        text = ". ".join("a b c d" for _ in range(6)) + "."
        chunks = chunk_document(Document("d", text), s_target=8, o=2)
        assert len(chunks) >= 2
        first, second = tokenize(chunks[0].text), tokenize(chunks[1].text)
        assert second[:2] == first[-2:]


class TestRrf:
    def test_single_method_rank_one(self):
        results = rrf_fuse({"dense": ["c1", "c2"]})
        assert results[0].chunk_id == "c1"
        assert results[0].rrf_score == 1.0 / 61.0

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_matches_exhaustive_formula(self, data):
        docs = [f"c{i}" for i in range(data.draw(st.integers(1, 20)))]
        n_methods = data.draw(st.integers(1, 5))
        rankings = {}
        for m in range(n_methods):
            perm = data.draw(st.permutations(docs))
            cut = data.draw(st.integers(0, len(docs)))
            if perm[:cut]:
                rankings[f"m{m}"] = list(perm[:cut])
        if not rankings:
            return
        fused = {r.chunk_id: r.rrf_score for r in rrf_fuse(rankings)}
        for d in docs:
            expected = sum(
                1.0 / (60 + ranked.index(d) + 1)
                for ranked in rankings.values()
                if d in ranked
            )
            assert fused.get(d, 0.0) == pytest.approx(expected)

    def test_ordering_and_tie_break(self):
        results = rrf_fuse({"a": ["x", "y"], "b": ["y", "x"]})
        # identical scores -> lexicographic chunk-id order
        assert [r.chunk_id for r in results] == ["x", "y"]

    def test_duplicate_ranking_rejected(self):
        with pytest.raises(ValueError):
            rrf_fuse({"a": ["x", "x"]})


def _chunk(cid, n):
    return Chunk(chunk_id=cid, doc_id="d", text=" ".join(["t"] * n), token_count=n)


class TestContextAllocation:
    def test_base_k_bounds(self):
        assert base_k(0.0) == MIN_K == 3
        assert base_k(1.0) == MAX_K == 10

    def test_complexity_monotone_in_codes(self):
        plain = estimate_complexity("charger offline")
        coded = estimate_complexity("charger offline GroundFailure OverCurrentFailure")
        assert coded > plain

    def test_never_exceeds_budget_fuzz(self):
        rng = np.random.default_rng(41)
        for _ in range(10_000):
            chunks = [
                _chunk(f"c{j}", int(rng.integers(1, 600)))
                for j in range(rng.integers(0, 12))
            ]
            c_max = int(rng.integers(1, 2000))
            k = int(rng.integers(1, 12)) if rng.random() < 0.5 else None
            ctx = allocate_context("q " * int(rng.integers(1, 30)), chunks, c_max, k=k)
            assert sum(c.token_count for c in ctx) <= c_max
            assert [c.chunk_id for c in ctx] == [c.chunk_id for c in chunks[: len(ctx)]]


@pytest.fixture(scope="module")
def kb():
    docs = [
        Document("ocpp", "OCPP websocket reconnect. Heartbeat timeout recovery.",
                 {"category": "communication"}),
        Document("power", "Overcurrent trip reset. Contactor weld check.",
                 {"category": "power_electronics"}),
        Document("auth", "RFID token cache refresh. Authorization retry.",
                 {"category": "authorization"}),
    ]
    chunks = [c for d in docs for c in chunk_document(d)]
    return KnowledgeBase(chunks)


class TestKnowledgeBase:

    def test_retrieve_ranks_on_topic_first(self, kb):
        results = retrieve("websocket heartbeat timeout", None, kb)
        assert results[0].chunk_id == "ocpp#0"

    def test_metadata_signal(self, kb):
        results = retrieve(
            "reset", None, kb, metadata={"category": "authorization"}
        )
        assert any(r.chunk_id == "auth#0" for r in results)

    def test_filter_predicate(self, kb):
        results = retrieve(
            "reset retry", lambda m: m.get("category") == "power_electronics", kb
        )
        assert {r.chunk_id for r in results} <= {"power#0"}

    def test_empty_kb_raises(self):
        with pytest.raises(EmptyKnowledgeBase):
            retrieve("anything", None, KnowledgeBase([]))

    def test_save_load_round_trip(self, kb, tmp_path):
        path = tmp_path / "kb.bin"
        kb.save(path)
        loaded = KnowledgeBase.load(path)
        assert [c.chunk_id for c in loaded.chunks] == [c.chunk_id for c in kb.chunks]
        a = [r.chunk_id for r in retrieve("websocket heartbeat", None, loaded)]
        b = [r.chunk_id for r in retrieve("websocket heartbeat", None, kb)]
        assert a == b

    def test_load_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(PersistError):
            KnowledgeBase.load(path)


class TestMetrics:
    def test_perfect_single_query(self):
        m = retrieval_metrics({"q1": ["a", "b"]}, {"q1": {"a"}})
        assert m == {"recall@5": 1.0, "precision@5": 0.2, "mrr": 1.0, "ndcg@10": 1.0}

    def test_relevant_at_rank_two(self):
        m = retrieval_metrics({"q1": ["x", "a"]}, {"q1": {"a"}})
        assert m["mrr"] == pytest.approx(0.5)
        assert m["ndcg@10"] == pytest.approx((1.0 / np.log2(3)) / 1.0)

    def test_missing_gold(self):
        with pytest.raises(MissingGold):
            retrieval_metrics({"q1": ["a"]}, {})

    def test_token_counter(self):
        assert count_tokens("OCPP-1.6 heartbeat, timeout!") == 3
