import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tga.errors import EmptyMatrix
from tga.model import InteractionType as IT, parse_behavior_code as code
from tga.sequence import (
    CodeSequence,
    LagResult,
    TransitionMatrix,
    allison_liker_z,
    breakdown_from_counts,
    build_network,
    extract_sequences,
    run_lsa,
    significant_patterns,
    transition_counts,
    type_breakdown,
    zscore_distribution,
)
from tga.synth import SynthConfig, default_scene, generate_session

from conftest import make_log
from oracles import brute_counts, hand_z

A, B, C, D = (code(c) for c in ("t_focal_understanding", "t_funnel_analyzing", "s_answer_low", "s_creative_high"))


def seq(codes, sid="x"):
    return CodeSequence(sid, tuple((10 * i, c, None) for i, c in enumerate(codes)))


def lr(a, b, z):
    return LagResult(a, b, 0, 0.0, z, IT(a.actor_kind + b.actor_kind))


def test_extract_keeps_sessions_apart():
    logs = [make_log(events=[(10, str(A)), (20, str(B)), (30, str(A))], session_id="one"),
            make_log(session_id="two")]
    seqs = extract_sequences(logs)
    assert [s.codes for s in seqs] == [[A, B, A], []]


def test_toy_counts():
    m = transition_counts([seq([A, B, A, B, A, B])])
    assert (m.count(A, B), m.count(B, A), m.N) == (3, 2, 5)


def test_no_cross_session_pair():
    m = transition_counts([seq([A, B]), seq([B, A])])
    assert (m.count(A, B), m.count(B, A), m.N) == (1, 1, 2)


def test_single_event_is_empty():
    m = transition_counts([seq([A])])
    assert m.N == 0
    with pytest.raises(EmptyMatrix):
        allison_liker_z(m)


def test_toy_z():
    res = allison_liker_z(transition_counts([seq([A, B, A, B, A, B])]))
    ab = next(r for r in sum(res, []) if (r.antecedent, r.consequent) == (A, B))
    assert ab.expected == pytest.approx(1.8)
    assert ab.z == pytest.approx(2.236, abs=1e-3)


def test_observed_equals_expected_gives_zero():
    m = TransitionMatrix((A, B), np.array([[1, 1], [1, 1]]))
    assert all(r.z == 0.0 for r in sum(allison_liker_z(m), []))


def test_zero_variance_cell_is_null():
    # every transition starts at A: row share 1 makes the variance vanish
    m = TransitionMatrix((A, B), np.array([[2, 3], [0, 0]]))
    zs = {(r.antecedent, r.consequent): r.z for r in sum(allison_liker_z(m), [])}
    assert zs[A, B] is None


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(st.sampled_from([A, B, C, D]), max_size=20), min_size=1, max_size=3),
       st.integers(1, 3))
def test_brute_force_equivalence(sessions, lag):
    m = transition_counts([seq(s) for s in sessions], lag)
    oracle = brute_counts(sessions, lag)
    for a in m.codes:
        for b in m.codes:
            assert m.count(a, b) == oracle.get((a, b), 0)
    assert m.N == sum(oracle.values())
    assert m.counts.sum(axis=1).sum() == m.N == m.counts.sum(axis=0).sum()
    if m.N < 2:
        return
    for r in sum(allison_liker_z(m), []):
        expected = hand_z(oracle, r.antecedent, r.consequent)
        if expected is None:
            assert r.z is None
        else:
            assert r.z == pytest.approx(expected, abs=1e-12)


def test_appending_empty_session_changes_nothing():
    logs = [make_log(events=[(i * 10, str(c)) for i, c in enumerate([A, B, C, A, D, B, A])])]
    before = run_lsa(logs)
    after = run_lsa(logs + [make_log(session_id="empty")])
    assert np.array_equal(before.matrix.counts, after.matrix.counts)
    assert before.results == after.results
    assert before.significant == after.significant


def test_significant_filter_and_order():
    pats = significant_patterns([lr(A, B, 2.5), lr(A, C, 1.0), lr(B, A, 3.1)], 1.96)
    assert [p.z for p in pats] == [3.1, 2.5]
    assert [p.z for p in significant_patterns([lr(A, B, 12), lr(A, C, 9), lr(B, A, 15)], 10)] == [15, 12]
    assert significant_patterns([], 1.96) == []


@given(st.lists(st.floats(-20, 20), max_size=30), st.floats(-5, 15), st.floats(0, 10))
def test_threshold_monotone(zs, t, bump):
    rs = [lr(A, B, z) for z in zs]
    assert len(significant_patterns(rs, t + bump)) <= len(significant_patterns(rs, t))


def test_breakdown_all_significant():
    pats = [lr(A, B, 3), lr(B, A, 3), lr(C, D, 3), lr(C, A, 3)]
    bd = type_breakdown(pats, "all_significant")
    assert bd.percentages[IT.TT] == 50.0
    assert bd.percentages[IT.SS] == 25.0
    assert bd.percentages[IT.ST] == 25.0


def test_breakdown_display_lines():
    bd = breakdown_from_counts({IT.TT: 69, IT.SS: 110, IT.ST: 16}, 198)
    assert bd.lines([IT.TT, IT.SS, IT.ST]) == [
        "T→T: 69 patterns; 34.8%", "S→S: 110 patterns; 55.6%", "S→T: 16 patterns; 8.1%"]


def test_breakdown_sum_of_reported_types():
    pats = [lr(A, B, 3)] * 2 + [lr(A, C, 3)] + [lr(C, D, 3)]
    bd = type_breakdown(pats, "sum_of_reported_types", reported_types=[IT.TT, IT.SS])
    assert bd.denominator == 3
    assert bd.percentages[IT.TT] == pytest.approx(66.7)


def test_breakdown_empty():
    bd = type_breakdown([], "all_significant")
    assert all(v == 0 for v in bd.counts.values())
    assert all(v == 0.0 for v in bd.percentages.values())


def test_five_number_summary():
    dist = zscore_distribution([lr(C, D, z) for z in [1, 2, 3, 4, 5]] + [lr(A, B, 7.0)])
    ss = dist[IT.SS]
    assert (ss.min, ss.q1, ss.median, ss.q3, ss.max) == (1, 2, 3, 4, 5)
    tt = dist[IT.TT]
    assert tt.min == tt.median == tt.max == 7.0
    assert IT.TS not in dist


def test_network():
    net = build_network([lr(A, B, 12), lr(A, C, 11)], 10)
    assert net.out_degree(A) == 2
    assert build_network([lr(A, B, 3)], 10).edges == []
    assert build_network([lr(A, B, 3)], 10).nodes == []
    loop = build_network([lr(A, A, 20)], 10)
    assert [(e.antecedent, e.consequent) for e in loop.edges] == [(A, A)]


def test_permutation_null_rate():
    """Shuffling a balanced sequence flags the (A, B) cell about 5% of the time."""
    rng = np.random.default_rng(2024)
    base = np.repeat(np.arange(4), 250)
    shuffles = 10_000
    hits = 0
    for _ in range(shuffles):
        s = rng.permutation(base)
        counts = np.zeros((4, 4), dtype=np.int64)
        np.add.at(counts, (s[:-1], s[1:]), 1)
        z = allison_liker_z(TransitionMatrix((A, B, C, D), counts))[0][1].z
        hits += abs(z) >= 1.96
    rate = hits / shuffles
    sd = math.sqrt(0.05 * 0.95 / shuffles)
    assert abs(rate - 0.05) <= 3 * sd, rate


def test_dense_student_chains_raise_ss_median():
    s1, s2, t1, t2 = code("s_build_high"), code("s_elaboration_high"), code("t_focal_remembering"), code("t_probe_applying")
    cfg = SynthConfig(
        codes=[s1, s2, t1, t2],
        transition=[[0.05, 0.85, 0.05, 0.05],
                     [0.85, 0.05, 0.05, 0.05],
                     [0.30, 0.20, 0.25, 0.25],
                     [0.20, 0.30, 0.25, 0.25]],
        n_events=1500,
        scene=default_scene(4),
        utterance_templates={},
        seed=5,
    )
    dist = zscore_distribution(run_lsa([generate_session(cfg)]).results)
    assert dist[IT.SS].median > dist[IT.TS].median
