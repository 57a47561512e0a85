import numpy as np
import pytest

from diarnn.errors import FormatError
from diarnn.metrics import (
    Segment,
    Timeline,
    der,
    labels_to_timeline,
    optimal_mapping,
    read_rttm,
    scored_regions,
    write_rttm,
)
from diarnn.sequences import LabelSequence

from helpers import random_canonical_labels


def _timeline(utt, *triples):
    return Timeline(utt, [Segment(a, b, spk) for a, b, spk in triples])


# ------------------------------------------------------------------- segments

def test_segment_validation_and_rounding():
    seg = Segment(0.123456789, 1.0000004, "a")
    assert seg.start == pytest.approx(0.123457, abs=1e-12)
    assert seg.end == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        Segment(1.0, 1.0, "a")
    with pytest.raises(ValueError):
        Segment(-0.5, 1.0, "a")


def test_labels_to_timeline_worked_examples():
    tl = labels_to_timeline(LabelSequence((1, 1, 2)), 0.4)
    assert [(s.start, s.end, s.speaker) for s in tl.segments] == [
        (0.0, 0.8, "1"), (0.8, 1.2, "2"),
    ]
    tl1 = labels_to_timeline(LabelSequence((1,)), 0.4)
    assert [(s.start, s.end, s.speaker) for s in tl1.segments] == [(0.0, 0.4, "1")]
    tl3 = labels_to_timeline(LabelSequence((1, 2, 1)), 0.25)
    assert len(tl3.segments) == 3


# -------------------------------------------------------------- scored regions

def test_scored_regions_collar_strips_boundaries():
    tl = _timeline("u", (0.0, 10.0, "A"))
    assert scored_regions(tl, collar=0.25) == [(0.25, 9.75)]


def test_scored_regions_overlap_removed():
    tl = _timeline("u", (0.0, 5.0, "A"), (3.0, 5.0, "B"))
    assert scored_regions(tl, collar=0.0, exclude_overlap=True) == [(0.0, 3.0)]


def test_scored_regions_no_collar_no_overlap_is_union():
    tl = _timeline("u", (0.0, 2.0, "A"), (4.0, 6.0, "B"))
    assert scored_regions(tl, collar=0.0) == [(0.0, 2.0), (4.0, 6.0)]


def test_scored_regions_keep_overlap_flag():
    tl = _timeline("u", (0.0, 5.0, "A"), (3.0, 5.0, "B"))
    assert scored_regions(tl, collar=0.0, exclude_overlap=False) == [(0.0, 5.0)]


def test_scored_time_nonincreasing_in_collar():
    tl = _timeline("u", (0.0, 3.0, "A"), (3.0, 7.5, "B"), (9.0, 12.0, "A"))
    widths = [sum(b - a for a, b in scored_regions(tl, collar=c))
              for c in (0.0, 0.1, 0.25, 0.5, 1.0)]
    assert all(w1 >= w2 - 1e-12 for w1, w2 in zip(widths, widths[1:]))


# --------------------------------------------------------------------- mapping

def test_optimal_mapping_identity():
    tl = _timeline("u", (0.0, 2.0, "A"), (2.0, 4.0, "B"))
    mapping = optimal_mapping(tl, tl, scored_regions(tl, collar=0.0))
    assert mapping == {"A": "A", "B": "B"}


def test_optimal_mapping_two_by_two():
    # overlap matrix h1/h2 x r1/r2 = [[3,1],[0,4]]: greedy on h1 would pick
    # r1 anyway, but the assignment must maximize the total 3 + 4
    ref = _timeline("u", (0.0, 4.0, "r1"), (4.0, 9.0, "r2"))
    hyp = _timeline("u", (0.0, 3.0, "h1"), (4.0, 5.0, "h1"), (5.0, 9.0, "h2"))
    mapping = optimal_mapping(ref, hyp, scored_regions(ref, collar=0.0))
    assert mapping == {"h1": "r1", "h2": "r2"}


def test_optimal_mapping_leaves_extra_hyp_speaker_unmapped():
    ref = _timeline("u", (0.0, 4.0, "r1"), (4.0, 8.0, "r2"))
    hyp = _timeline("u", (0.0, 4.0, "a"), (4.0, 6.0, "b"), (6.0, 8.0, "c"))
    mapping = optimal_mapping(ref, hyp, scored_regions(ref, collar=0.0))
    assert len(mapping) == 2
    assert mapping["a"] == "r1"
    result = der(ref, hyp, collar=0.0)
    assert result.confusion_time == pytest.approx(2.0)


def test_optimal_mapping_ignores_zero_overlap_pairs():
    ref = _timeline("u", (0.0, 4.0, "r1"))
    hyp = _timeline("u", (5.0, 6.0, "h1"))
    mapping = optimal_mapping(ref, hyp, scored_regions(ref, collar=0.0))
    assert mapping == {}


# ------------------------------------------------------------------------- der

def test_der_identical_timelines():
    tl = _timeline("u", (0.0, 3.0, "A"), (3.0, 7.0, "B"))
    assert der(tl, tl).der == 0.0


def test_der_permutation_invariance():
    ref = _timeline("u", (0.0, 3.0, "A"), (3.0, 7.0, "B"))
    hyp = _timeline("u", (0.0, 3.0, "x"), (3.0, 7.0, "y"))
    assert der(ref, hyp).der == 0.0


def test_der_half_confusion_exact():
    ref = _timeline("u", (0.0, 4.0, "A"), (4.0, 8.0, "B"))
    hyp = _timeline("u", (0.0, 8.0, "S"))
    result = der(ref, hyp, collar=0.0)
    assert result.der == 0.5
    assert result.scored_time == pytest.approx(8.0)
    assert result.confusion_time == pytest.approx(4.0)


def test_der_boundary_shift_within_collar_scores_zero():
    ref = _timeline("u", (0.0, 2.0, "A"), (2.0, 4.0, "B"))
    for shift in (0.2, -0.2):
        hyp = _timeline("u", (0.0, 2.0 + shift, "A"), (2.0 + shift, 4.0, "B"))
        assert der(ref, hyp, collar=0.25).der == 0.0


def test_der_missed_time_is_diagnostic_only():
    ref = _timeline("u", (0.0, 4.0, "A"))
    hyp = _timeline("u", (0.0, 3.0, "A"))
    result = der(ref, hyp, collar=0.0)
    assert result.der == 0.0
    assert result.missed_time == pytest.approx(1.0)
    assert result.false_alarm_time == 0.0


def test_der_false_alarm_on_hyp_overlap():
    ref = _timeline("u", (0.0, 4.0, "A"))
    hyp = _timeline("u", (0.0, 4.0, "A"), (1.0, 2.0, "B"))
    result = der(ref, hyp, collar=0.0)
    assert result.false_alarm_time == pytest.approx(1.0)
    assert result.der == 0.0


def test_der_requires_matching_utt():
    a = _timeline("a", (0.0, 1.0, "A"))
    b = _timeline("b", (0.0, 1.0, "A"))
    with pytest.raises(ValueError, match="utterance ids"):
        der(a, b)


def test_der_nothing_to_score():
    ref = _timeline("u", (0.0, 0.3, "A"))
    hyp = _timeline("u", (0.0, 0.3, "A"))
    with pytest.raises(ValueError, match="nothing to score"):
        der(ref, hyp, collar=0.25)


def test_der_self_is_zero_on_random_timelines():
    rng = np.random.default_rng(12)
    for _ in range(20):
        labels = random_canonical_labels(rng, int(rng.integers(3, 30)))
        tl = labels_to_timeline(labels, 0.4, utt="u")
        assert der(tl, tl, collar=0.1).der == 0.0


def test_der_invariant_under_hyp_renaming():
    rng = np.random.default_rng(13)
    for _ in range(10):
        ref = labels_to_timeline(random_canonical_labels(rng, 20), 0.4, utt="u")
        hyp = labels_to_timeline(random_canonical_labels(rng, 20), 0.4, utt="u")
        base = der(ref, hyp, collar=0.0).der
        renamed = Timeline(
            "u", [Segment(s.start, s.end, "spk-" + s.speaker) for s in hyp.segments]
        )
        assert der(ref, renamed, collar=0.0).der == pytest.approx(base, abs=1e-12)


# ------------------------------------------------------------------------ rttm

def test_rttm_round_trip(tmp_path):
    path = tmp_path / "x.rttm"
    a = _timeline("utt-a", (0.0, 1.25, "A"), (1.25, 3.0, "B"))
    b = _timeline("utt-b", (0.5, 2.0, "spk1"))
    write_rttm([a, b], path)
    back = read_rttm(path)
    assert set(back) == {"utt-a", "utt-b"}
    assert [(s.start, s.end, s.speaker) for s in back["utt-a"].segments] == [
        (0.0, 1.25, "A"), (1.25, 3.0, "B"),
    ]
    assert [(s.start, s.end, s.speaker) for s in back["utt-b"].segments] == [
        (0.5, 2.0, "spk1"),
    ]


def test_rttm_write_format(tmp_path):
    path = tmp_path / "x.rttm"
    write_rttm([_timeline("meeting", (0.0, 0.8, "1"))], path)
    line = path.read_text().strip()
    assert line == "SPEAKER meeting 1 0.000000 0.800000 <NA> <NA> 1 <NA> <NA>"


def test_rttm_reader_tolerates_whitespace(tmp_path):
    path = tmp_path / "x.rttm"
    path.write_text(
        "\nSPEAKER   u   1   0.00   1.50  <NA> <NA>  A  <NA> <NA>\n\n"
    )
    back = read_rttm(path)
    assert [(s.start, s.end, s.speaker) for s in back["u"].segments] == [(0.0, 1.5, "A")]


def test_rttm_reader_reports_bad_line(tmp_path):
    path = tmp_path / "bad.rttm"
    path.write_text(
        "SPEAKER u 1 0.0 1.0 <NA> <NA> A <NA> <NA>\n"
        "SPEAKER u 1 zero 1.0 <NA> <NA> A <NA> <NA>\n"
    )
    with pytest.raises(FormatError) as err:
        read_rttm(path)
    assert err.value.line == 2
    assert "bad.rttm:2:" in str(err.value)


def test_rttm_reader_rejects_short_line(tmp_path):
    path = tmp_path / "short.rttm"
    path.write_text("SPEAKER u 1 0.0\n")
    with pytest.raises(FormatError):
        read_rttm(path)
