import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_report
from ra_ner.evaluate import (
    AlignmentError,
    EvalReport,
    TypeCounts,
    confusion,
    confusion_table,
    lengthwise,
    lengthwise_table,
    report,
    report_csv,
    report_table,
    strict_counts,
)
from ra_ner.labels import CLASS_ORDER, ENTITY_TYPES, B, EntitySpan, Example, I, O, X


from ra_ner.labels import Label


def ex(ex_id, tags, tokens=None):
    labels = tuple(Label.parse(t) for t in tags)
    if tokens is None:
        tokens = tuple(f"w{i}" for i in range(len(labels)))
    return Example(ex_id, tokens, labels)


def test_zero_over_zero_is_zero():
    c = TypeCounts()
    assert c.precision == 0.0 and c.recall == 0.0 and c.f1 == 0.0
    assert EvalReport().macro_f1 == 0.0


def test_strict_counts_exact_match_only():
    gold = [EntitySpan(0, 2, "PER", "a b")]
    assert strict_counts(gold, [EntitySpan(0, 2, "PER", "a b")])["PER"].tp == 1
    # same boundaries, wrong type: one fn and one fp
    c = strict_counts(gold, [EntitySpan(0, 2, "LOC", "a b")])
    assert c["PER"].fn == 1 and c["LOC"].fp == 1
    # wrong boundary
    c = strict_counts(gold, [EntitySpan(0, 1, "PER", "a")])
    assert c["PER"].fn == 1 and c["PER"].fp == 1


def test_report_simple():
    gold = [ex("a", ["B-LOC", "I-LOC", "O"])]
    pred = [ex("a", ["B-LOC", "I-LOC", "O"])]
    rep = report(gold, pred)
    assert rep.per_type["LOC"].f1 == 1.0
    assert rep.macro_f1 == pytest.approx(1.0 / 6.0)
    assert rep.token_count == 3 and rep.example_count == 1


def test_report_strips_x_and_repairs():
    gold = [ex("a", ["B-PER", "O"])]
    pred = [ex("a", ["I-PER", "B-X"])]  # orphan I promoted, X dropped to O
    rep = report(gold, pred)
    # orphan I-PER is promoted to B-PER, X collapses to O: exact match
    assert rep.per_type["PER"].tp == 1
    assert rep.per_type["PER"].fp == 0 and rep.per_type["PER"].fn == 0


def test_misalignment_raises_with_ids():
    gold = [ex("a", ["O"]), ex("b", ["O"])]
    pred = [ex("a", ["O"]), ex("zzz", ["O"])]
    with pytest.raises(AlignmentError, match="zzz"):
        report(gold, pred)
    with pytest.raises(AlignmentError):
        report(gold, gold[:1])
    with pytest.raises(AlignmentError, match="tokens"):
        report([ex("a", ["O"])], [ex("a", ["O", "O"])])


LABELS_NO_X = tuple(lab for lab in CLASS_ORDER if lab is not X)


def random_example(rng, ex_id, length=None):
    length = length or rng.randint(1, 12)
    labels = []
    while len(labels) < length:
        lab = rng.choice(LABELS_NO_X)
        if lab.kind == "I" and not (labels and labels[-1].etype == lab.etype):
            lab = B(lab.etype)
        labels.append(lab)
    return Example(ex_id, tuple(f"t{i}" for i in range(length)), tuple(labels))


def test_report_matches_naive_oracle():
    rng = random.Random(17)
    gold, pred = [], []
    for i in range(1000):
        g = random_example(rng, f"e{i}")
        p = random_example(rng, f"e{i}", length=len(g.tokens))
        gold.append(g)
        pred.append(p)
    rep = report(gold, pred)
    oracle = naive_report(
        [[str(l) for l in g.labels] for g in gold],
        [[str(l) for l in p.labels] for p in pred],
    )
    for t in ENTITY_TYPES:
        c = rep.per_type[t]
        prec, rec, f1 = oracle[t]
        assert c.precision == pytest.approx(prec, abs=1e-12)
        assert c.recall == pytest.approx(rec, abs=1e-12)
        assert c.f1 == pytest.approx(f1, abs=1e-12)
    assert rep.macro_f1 == pytest.approx(oracle["macro"], abs=1e-12)


def test_identity_predictions_are_perfect():
    rng = random.Random(3)
    gold = [random_example(rng, f"e{i}") for i in range(200)]
    rep = report(gold, gold)
    present = {t for g in gold for t in (lab.etype for lab in g.labels) if t}
    for t in present:
        assert rep.per_type[t].f1 == 1.0
    assert all(rep.per_type[t].fp == 0 and rep.per_type[t].fn == 0 for t in ENTITY_TYPES)


def test_swap_symmetry():
    # swapping gold and pred swaps fp and fn, leaving f1 unchanged
    rng = random.Random(29)
    gold = [random_example(rng, f"e{i}") for i in range(100)]
    pred = [random_example(rng, f"e{i}", length=len(g.tokens)) for i, g in enumerate(gold)]
    fwd = report(gold, pred)
    rev = report(pred, gold)
    for t in ENTITY_TYPES:
        assert fwd.per_type[t].tp == rev.per_type[t].tp
        assert fwd.per_type[t].fp == rev.per_type[t].fn
        assert fwd.per_type[t].f1 == pytest.approx(rev.per_type[t].f1)


def test_merge_equals_joint_report():
    rng = random.Random(5)
    gold = [random_example(rng, f"e{i}") for i in range(60)]
    pred = [random_example(rng, f"e{i}", length=len(g.tokens)) for i, g in enumerate(gold)]
    joint = report(gold, pred)
    merged = report(gold[:30], pred[:30])
    merged.merge(report(gold[30:], pred[30:]))
    for t in ENTITY_TYPES:
        a, b = joint.per_type[t], merged.per_type[t]
        assert (a.tp, a.fp, a.fn) == (b.tp, b.fp, b.fn)
    assert merged.token_count == joint.token_count


def test_lengthwise_partitions_totals():
    rng = random.Random(11)
    gold = [random_example(rng, f"e{i}", length=rng.randint(1, 20)) for i in range(300)]
    pred = [random_example(rng, f"e{i}", length=len(g.tokens)) for i, g in enumerate(gold)]
    lw = lengthwise(gold, pred, l_max=15)
    assert all(length <= 15 for length in lw.rows)
    assert lw.all.example_count == 300
    # rows cover exactly the <= l_max examples
    n_short = sum(1 for g in gold if len(g.tokens) <= 15)
    assert sum(r.example_count for r in lw.rows.values()) == n_short
    for t in ENTITY_TYPES:
        total = report(gold, pred).per_type[t]
        assert (lw.all.per_type[t].tp, lw.all.per_type[t].fp, lw.all.per_type[t].fn) == (
            total.tp, total.fp, total.fn,
        )


def test_lengthwise_rows_sorted():
    gold = [ex("a", ["O"] * 3), ex("b", ["O"])]
    lw = lengthwise(gold, gold, l_max=15)
    assert list(lw.rows) == [1, 3]


def test_confusion_diagonal_and_spurious():
    gold = [ex("a", ["B-LOC", "O", "B-PER"])]
    pred = [ex("a", ["B-GRP", "B-CW", "B-PER"])]
    cm = confusion(gold, pred)
    assert cm.cells["LOC"]["GRP"] == 1  # boundary match, wrong type
    assert cm.cells["PER"]["PER"] == 1
    assert cm.cells["O"]["CW"] == 1  # spurious prediction
    pct = cm.row_percentages()
    assert pct["PER"]["PER"] == 1.0
    assert sum(pct["LOC"].values()) == pytest.approx(1.0)


def test_confusion_missed_span_goes_to_O_column():
    gold = [ex("a", ["B-CORP", "I-CORP"])]
    pred = [ex("a", ["O", "O"])]
    cm = confusion(gold, pred)
    assert cm.cells["CORP"]["O"] == 1


def test_tables_render():
    gold = [ex("a", ["B-LOC", "O"])]
    rep = report(gold, gold)
    assert "macro_f1\t0.1667" in report_table(rep)
    assert report_csv(rep).startswith("type,precision")
    lw = lengthwise(gold, gold)
    assert "all\t" in lengthwise_table(lw)
    assert "gold\\pred" in confusion_table(confusion(gold, gold))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_f1_bounds_property(data):
    tp = data.draw(st.integers(0, 50))
    fp = data.draw(st.integers(0, 50))
    fn = data.draw(st.integers(0, 50))
    c = TypeCounts(tp, fp, fn)
    assert 0.0 <= c.f1 <= 1.0
    assert 0.0 <= c.precision <= 1.0 and 0.0 <= c.recall <= 1.0
    if fp == 0 and fn == 0 and tp > 0:
        assert c.f1 == 1.0
