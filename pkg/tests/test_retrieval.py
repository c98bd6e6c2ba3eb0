import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exprforge import RetrievalQuery, build_index, retrieve, retrieve_via_llm
from exprforge.errors import EndpointUnavailable
from exprforge.expression_db import AliasEntry, ExpressionDatabase, ExpressionTag, StoryEntry
from exprforge.retrieval import (
    build_llm_context,
    parse_llm_tag_reply,
    tokenize,
)


def _mini_db():
    """Three-tag corpus matching the hand-computed BM25 oracle below."""
    def tag(name, definition, aliases=(), stories=()):
        return ExpressionTag(
            name=name,
            definition=definition,
            aliases=tuple(AliasEntry(a, "en") for a in aliases),
            transformation_free=True,
            stories=tuple(StoryEntry("en", i + 1, s) for i, s in enumerate(stories)),
        )

    return ExpressionDatabase(
        (
            tag("alpha", "bright eyes sparkle"),
            tag("beta", "calm eyes rest", aliases=("quiet face",)),
            tag("gamma", "sparkle lights shine bright", stories=("the sparkle grew",)),
        ),
        root=None,
    )


# Frozen oracle: naive BM25 (k1=1.2, b=0.75, idf=ln(1+(N-df+0.5)/(df+0.5))),
# per-field scores weighted name*4 alias*4 definition*2 story*1, computed
# with an independent reference script for the query "sparkle eyes".
ORACLE_SCORES = {
    "alpha": 1.9602047096504616,
    "beta": 0.9801023548252308,
    "gamma": 1.408370361711591,
}


def test_bm25_matches_frozen_oracle():
    index = build_index(_mini_db())
    results = retrieve(index, RetrievalQuery(text="sparkle eyes", k=5))
    got = {r.tag_name: r.score for r in results}
    assert set(got) == set(ORACLE_SCORES)
    for name, expected in ORACLE_SCORES.items():
        assert got[name] == pytest.approx(expected, abs=1e-9)
    assert [r.tag_name for r in results] == ["alpha", "gamma", "beta"]


def test_matched_fields_reported():
    index = build_index(_mini_db())
    results = retrieve(index, RetrievalQuery(text="sparkle eyes", k=5))
    by_name = {r.tag_name: r.matched_fields for r in results}
    assert by_name["alpha"] == ("definition",)
    assert by_name["gamma"] == ("definition", "story")


def test_exact_name_short_circuits():
    index = build_index(_mini_db())
    results = retrieve(index, RetrievalQuery(text="beta", k=3))
    assert results[0].tag_name == "beta"
    assert math.isinf(results[0].score)
    assert results[0].matched_fields == ("name",)


def test_exact_alias_short_circuits():
    index = build_index(_mini_db())
    results = retrieve(index, RetrievalQuery(text="quiet face", k=3))
    assert results[0].tag_name == "beta"
    assert math.isinf(results[0].score)
    assert results[0].matched_fields == ("alias",)


def test_k_limits_results():
    index = build_index(_mini_db())
    assert len(retrieve(index, RetrievalQuery(text="sparkle eyes", k=1))) == 1
    assert len(retrieve(index, RetrievalQuery(text="sparkle eyes", k=2))) == 2


def test_no_match_returns_empty():
    index = build_index(_mini_db())
    assert retrieve(index, RetrievalQuery(text="zzzz qqqq", k=5)) == []


def test_query_validation():
    with pytest.raises(ValueError):
        RetrievalQuery(text="", k=5)
    with pytest.raises(ValueError):
        RetrievalQuery(text="x", k=0)


def test_story_text_retrieves_plus_plus(sample_db):
    from exprforge.expression_db import get_tag

    index = build_index(sample_db)
    story = get_tag(sample_db, "+_+").stories[0].text
    results = retrieve(index, RetrievalQuery(text=story, k=5))
    assert results[0].tag_name == "+_+"


def test_retrieval_deterministic(sample_db):
    index = build_index(sample_db)
    q = RetrievalQuery(text="her eyes light up at the dessert cart", k=5)
    assert retrieve(index, q) == retrieve(build_index(sample_db), q)


def test_every_alias_ranks_first(sample_db):
    index = build_index(sample_db)
    for tag in sample_db.tags:
        for alias in tag.aliases:
            results = retrieve(index, RetrievalQuery(text=alias.text, k=3))
            assert results[0].tag_name == tag.name, alias.text
            assert math.isinf(results[0].score)


# --- tokenizer ---

def test_tokenize_latin_words():
    assert tokenize("Green Eyes, blue-bow!") == ["green", "eyes", "blue", "bow"]


def test_tokenize_cjk_bigrams():
    assert tokenize("星星眼") == ["星星", "星眼"]
    assert tokenize("目がしいたけ") == ["目が", "がし", "しい", "いた", "たけ"]
    assert tokenize("笑") == ["笑"]


def test_tokenize_hangul():
    assert tokenize("미소") == ["미소"]


def test_tokenize_mixed_scripts():
    assert tokenize("smile 笑顔 now") == ["smile", "笑顔", "now"]


@given(st.text(max_size=80))
@settings(max_examples=200, deadline=None)
def test_tokenize_total_function(text):
    tokens = tokenize(text)
    assert all(isinstance(t, str) and t for t in tokens)


# --- LLM adapter ---

class FakeLlm:
    def __init__(self, reply):
        self.reply = reply
        self.prompts = []

    def complete(self, prompt):
        self.prompts.append(prompt)
        return self.reply


class DeadLlm:
    def complete(self, prompt):
        raise EndpointUnavailable("connection refused")


def test_llm_context_lists_every_tag():
    db = _mini_db()
    doc = build_llm_context(db, RetrievalQuery(text="shiny", k=2))
    for tag in db.tags:
        assert tag.name in doc
    assert "shiny" in doc


def test_llm_reply_parsing_validates_names():
    db = _mini_db()
    assert parse_llm_tag_reply(db, "alpha, gamma") == ["alpha", "gamma"]
    assert parse_llm_tag_reply(db, "1. alpha\n2. made-up\n3. beta") == ["alpha", "beta"]
    assert parse_llm_tag_reply(db, '"quiet face"') == ["beta"]  # alias resolves
    assert parse_llm_tag_reply(db, "nothing real here") == []


def test_llm_retrieval_happy_path():
    db = _mini_db()
    result = retrieve_via_llm(db, RetrievalQuery(text="shiny things", k=2), FakeLlm("gamma, alpha"))
    assert [t.tag_name for t in result.tags] == ["gamma", "alpha"]
    assert not result.degraded


def test_llm_retrieval_falls_back_when_no_valid_tag():
    db = _mini_db()
    result = retrieve_via_llm(
        db, RetrievalQuery(text="sparkle eyes", k=3), FakeLlm("no tags whatsoever")
    )
    assert result.degraded
    assert [t.tag_name for t in result.tags] == ["alpha", "gamma", "beta"]


def test_llm_endpoint_failure_propagates():
    db = _mini_db()
    with pytest.raises(EndpointUnavailable):
        retrieve_via_llm(db, RetrievalQuery(text="x", k=1), DeadLlm())
