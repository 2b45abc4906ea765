import json

import pytest

from app.core.errors import DataValidationError
from app.data.segments import Segment, Segmentation
from app.evaluation import EvalReport, argument_set, score_arguments, score_frames


GOLD = frozenset({(0, 0, "A"), (2, 3, "B"), (5, 5, "C"), (7, 8, "A")})


class TestScoreArguments:
    def test_perfect(self):
        report = score_arguments([GOLD], [GOLD])
        assert (report.precision, report.recall, report.f1) == (1.0, 1.0, 1.0)

    def test_partial_overlap(self):
        predicted = frozenset({(0, 0, "A"), (2, 3, "B"), (4, 4, "C")})
        report = score_arguments([predicted], [GOLD])
        assert report.true_positives == 2
        assert report.precision == pytest.approx(2 / 3)
        assert report.recall == pytest.approx(1 / 2)
        assert report.f1 == pytest.approx(4 / 7)

    def test_empty_predictions(self):
        report = score_arguments([frozenset()], [GOLD])
        assert (report.precision, report.recall, report.f1) == (0.0, 0.0, 0.0)
        assert report.false_negatives == 4

    def test_nothing_anywhere(self):
        report = score_arguments([frozenset(), frozenset()], [frozenset(), frozenset()])
        assert report.f1 == 0.0
        assert report.instances == 2

    def test_micro_average_over_instances(self):
        predictions = [frozenset({(0, 0, "A")}), frozenset({(1, 1, "B"), (2, 2, "B")})]
        golds = [frozenset({(0, 0, "A"), (3, 3, "A")}), frozenset({(1, 1, "B")})]
        report = score_arguments(predictions, golds)
        assert (report.true_positives, report.false_positives, report.false_negatives) == (2, 1, 1)

    def test_order_does_not_matter(self):
        predictions = [frozenset({(0, 0, "A")}), frozenset({(1, 1, "B")}), frozenset()]
        golds = [frozenset({(0, 0, "A")}), frozenset({(1, 2, "B")}), frozenset({(4, 4, "C")})]
        forward = score_arguments(predictions, golds)
        backward = score_arguments(predictions[::-1], golds[::-1])
        assert forward == backward

    def test_swapping_roles_swaps_precision_and_recall(self):
        predicted = frozenset({(0, 0, "A"), (2, 3, "B"), (4, 4, "C")})
        forward = score_arguments([predicted], [GOLD])
        swapped = score_arguments([GOLD], [predicted])
        assert forward.precision == swapped.recall
        assert forward.recall == swapped.precision
        assert forward.f1 == pytest.approx(swapped.f1)

    def test_misaligned(self):
        with pytest.raises(DataValidationError):
            score_arguments([GOLD], [])


class TestArgumentSet:
    def test_null_tiling_is_ignored(self):
        first = Segmentation.of([Segment(0, 1, None), Segment(2, 2, "A"), Segment(3, 3, None)])
        second = Segmentation.of([Segment(0, 0, None), Segment(1, 1, None), Segment(2, 2, "A"), Segment(3, 3, None)])
        assert argument_set(first) == argument_set(second) == {(2, 2, "A")}

    def test_frame_is_part_of_the_key(self):
        segments = [Segment(0, 0, "Theme")]
        assert argument_set(segments, "Motion") != argument_set(segments, "Giving")


class TestScoreFrames:
    @pytest.mark.parametrize(
        "predicted, expected",
        [(["A", "B", "C", "D"], 1.0), (["x", "x", "x", "x"], 0.0), (["A", "B", "C", "x"], 0.75)],
    )
    def test_accuracy(self, predicted, expected):
        assert score_frames(predicted, ["A", "B", "C", "D"]) == expected

    def test_empty(self):
        assert score_frames([], []) == 0.0

    def test_misaligned(self):
        with pytest.raises(DataValidationError):
            score_frames(["A"], ["A", "B"])


class TestReport:
    def test_json_and_table(self):
        report = EvalReport.from_counts(2, 1, 2, instances=1, frame_accuracy=0.5)
        assert json.loads(report.to_json())["f1"] == pytest.approx(4 / 7)
        lines = report.render_table().splitlines()
        assert lines[0].startswith("instances")
        assert lines[-1].startswith("frame accuracy")
        assert len({len(line) for line in lines}) == 1
