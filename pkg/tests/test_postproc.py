from __future__ import annotations

import random

from flowkit.postproc import combine, dedup, handle_combine, handle_dedup, \
    normalize_answer


def ans(text, score=1.0, doc_id="d1#0", begin=0):
    return {"text": text, "begin_char": begin,
            "end_char": begin + len(text), "score": score,
            "no_answer_score": 1.0 - score, "doc_id": doc_id}


# -- normalization ---------------------------------------------------------

def test_normalize_examples():
    assert normalize_answer("The Cat!") == "cat"
    assert normalize_answer("a  b   the c") == "b c"
    assert normalize_answer("An apple") == "apple"
    assert normalize_answer("Mt. St. Helens") == "mt st helens"
    assert normalize_answer("") == ""
    assert normalize_answer("the a an") == ""
    assert normalize_answer("catherine") == "catherine"  # no inner-word cuts


def test_normalize_idempotent():
    rng = random.Random(17)
    alphabet = "abc THE an. ,x!"
    for _ in range(200):
        s = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 25)))
        once = normalize_answer(s)
        assert normalize_answer(once) == once


# -- dedup -----------------------------------------------------------------

def test_dedup_keeps_best_of_group():
    a = ans("the cat", score=0.4, doc_id="d2#0")
    b = ans("Cat!", score=0.9, doc_id="d1#0")
    c = ans("cat", score=0.2, doc_id="d3#0")
    assert dedup([a, b, c]) == [b]


def test_dedup_ties_doc_id_then_begin():
    a = ans("cat", score=0.5, doc_id="d2#0")
    b = ans("cat", score=0.5, doc_id="d1#0", begin=9)
    c = ans("cat", score=0.5, doc_id="d1#0", begin=3)
    assert dedup([a, b, c]) == [c]


def test_dedup_preserves_input_order():
    xs = [ans("beta", 0.3), ans("alpha", 0.9), ans("gamma", 0.5)]
    assert dedup(xs) == xs  # all distinct: order untouched


def test_dedup_drops_empty_normalized():
    assert dedup([ans(""), ans("the a"), ans("!!")]) == []
    assert dedup([ans("the a"), ans("keep")]) == [ans("keep")]


def test_dedup_idempotent_property():
    rng = random.Random(29)
    texts = ["cat", "the cat", "dog", "Dog!", "bird", "", "a the"]
    for _ in range(100):
        xs = [ans(rng.choice(texts), score=rng.choice([0.1, 0.5, 0.9]),
                  doc_id=f"d{rng.randint(1, 3)}#0", begin=rng.randint(0, 9))
              for _ in range(rng.randint(0, 10))]
        once = dedup(xs)
        assert dedup(once) == once
        # one representative per normalized group, none empty
        keys = [normalize_answer(a["text"]) for a in once]
        assert len(keys) == len(set(keys))
        assert "" not in keys


# -- combine ---------------------------------------------------------------

def test_combine_filters_sorts_truncates():
    xs = [ans("low", 0.2, "d1#0"), ans("hi", 0.9, "d2#0"),
          ans("mid", 0.5, "d3#0"), ans("hi2", 0.9, "d1#0")]
    out = combine(xs, threshold=0.5, top_n=2)
    assert [a["text"] for a in out] == ["hi2", "hi"]  # tie: doc_id asc
    assert combine(xs, threshold=0.5, top_n=10) == \
        [xs[3], xs[1], xs[2]]


def test_combine_threshold_inclusive():
    xs = [ans("edge", 0.5)]
    assert combine(xs, 0.5, 5) == xs
    assert combine(xs, 0.5000001, 5) == []


def test_combine_top_n_edge_cases():
    xs = [ans("x", 0.9)]
    assert combine(xs, 0.0, 0) == []
    assert combine(xs, 0.0, -2) == []
    assert combine([], 0.0, 5) == []


def test_combine_monotone_in_threshold():
    rng = random.Random(37)
    for _ in range(100):
        xs = [ans(f"t{i}", score=rng.random(), doc_id=f"d{rng.randint(1, 4)}",
                  begin=rng.randint(0, 5)) for i in range(rng.randint(0, 12))]
        t1, t2 = sorted((rng.random(), rng.random()))
        lo = combine(xs, t1, 100)
        hi = combine(xs, t2, 100)
        # raising the threshold only removes answers, never reorders
        assert [a["text"] for a in hi] == \
            [a["text"] for a in lo if a["score"] >= t2]


def test_combine_truncation_prefix_property():
    xs = [ans(f"t{i}", score=i / 10, doc_id="d1") for i in range(10)]
    full = combine(xs, 0.0, 100)
    for n in range(11):
        assert combine(xs, 0.0, n) == full[:n]


# -- service handlers ------------------------------------------------------

def test_handlers_shape():
    xs = [ans("cat", 0.8), ans("the cat", 0.3)]
    assert handle_dedup({"answers": xs}) == {"answers": [xs[0]]}
    assert handle_combine({"answers": xs, "threshold": 0.5, "top_n": 5}) == \
        {"answers": [xs[0]]}
