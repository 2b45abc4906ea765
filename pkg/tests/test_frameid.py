import math

import numpy as np
import pytest

from app.autodiff import Graph
from app.core.errors import DataValidationError
from app.models.frameid import (
    FrameIdentifier,
    FrameIdInstance,
    build_frame_instances,
    frame_posterior,
    frameid_ensemble,
    frameid_loss,
)


ORDER = ["Motion", "Giving", "Perception"]


class TestPosterior:
    def test_closed_form(self):
        posterior = frame_posterior({"A": math.log(3), "B": 0.0})
        assert posterior["A"] == pytest.approx(0.75, abs=1e-12)
        assert posterior["B"] == pytest.approx(0.25, abs=1e-12)

    def test_equal_scores_are_uniform(self):
        posterior = frame_posterior({name: 1.5 for name in "ABCD"})
        assert all(p == pytest.approx(0.25) for p in posterior.values())

    def test_single_candidate(self):
        assert frame_posterior({"A": -7.0}) == {"A": 1.0}

    def test_shift_invariance_and_normalisation(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            scores = {f"F{k}": float(rng.normal() * 5) for k in range(int(rng.integers(1, 6)))}
            shifted = {name: value + 11.0 for name, value in scores.items()}
            first, second = frame_posterior(scores), frame_posterior(shifted)
            assert sum(first.values()) == pytest.approx(1.0, abs=1e-12)
            for name in scores:
                assert first[name] == pytest.approx(second[name], abs=1e-12)

    def test_empty(self):
        with pytest.raises(DataValidationError):
            frame_posterior({})


class TestLoss:
    def test_uniform_over_four(self):
        graph = Graph()
        scores = {name: graph.scalar(0.3) for name in "ABCD"}
        assert frameid_loss(graph, scores, "C").scalar() == pytest.approx(math.log(4), abs=1e-12)

    def test_confident_gold(self):
        graph = Graph()
        scores = {"A": graph.scalar(60.0), "B": graph.scalar(0.0)}
        assert frameid_loss(graph, scores, "A").scalar() == pytest.approx(0.0, abs=1e-12)

    def test_gold_not_candidate(self):
        graph = Graph()
        with pytest.raises(DataValidationError):
            frameid_loss(graph, {"A": graph.scalar(0.0)}, "B")

    def test_gradient_matches_finite_differences(self, tiny_config, resources, numeric_grad):
        model = FrameIdentifier.create(tiny_config, resources, seed=2)
        instance = FrameIdInstance("0:0", ("Lee", "saw", "the", "bird"), ("NNP", "VBD", "DT", "NN"), (1, 1), "see.v", "Motion")

        def value():
            graph = Graph(model.store)
            return model.loss(graph, instance).scalar()

        graph = Graph(model.store)
        grads = graph.backward(model.loss(graph, instance))
        for name in ("frameid.w3", "frameid.w4", "frameid.tgt.W", "frameid.tok.bwd.W"):
            np.testing.assert_allclose(grads[name], numeric_grad(value, model.store.value(name)), rtol=1e-4, atol=1e-7)


class TestFrameScores:
    def test_candidates_follow_lexicon(self, tiny_config, resources):
        model = FrameIdentifier.create(tiny_config, resources, seed=0)
        scores = model.instance_scores(FrameIdInstance("x", ("Lee", "saw"), ("NNP", "VBD"), (1, 1), "see.v"))
        assert list(scores) == ["Perception", "Motion"]

    def test_single_candidate(self, tiny_config, resources):
        model = FrameIdentifier.create(tiny_config, resources, seed=0)
        scores = model.instance_scores(FrameIdInstance("x", ("Kim", "went"), ("NNP", "VBD"), (1, 1), "go.v"))
        assert list(scores) == ["Motion"]

    def test_unseen_lu_scores_every_frame(self, tiny_config, resources):
        model = FrameIdentifier.create(tiny_config, resources, seed=0)
        scores = model.instance_scores(FrameIdInstance("x", ("Kim", "ran"), ("NNP", "VBD"), (1, 1), "run.v"))
        assert sorted(scores) == sorted(ORDER)

    def test_zero_w3_zeroes_scores(self, tiny_config, resources):
        model = FrameIdentifier.create(tiny_config, resources, seed=0)
        model.store.zero("frameid.w3")
        scores = model.instance_scores(FrameIdInstance("x", ("Lee", "saw"), ("NNP", "VBD"), (1, 1), "see.v"))
        assert all(value == 0.0 for value in scores.values())

    def test_hand_set_parameters(self, tiny_config, resources):
        model = FrameIdentifier.create(tiny_config, resources, seed=0)
        model.store.zero("frameid.tgt")
        motion = resources.frame_row("Motion")
        lu_row = resources.lu_row("go.v")
        model.store.value("frameid.lu")[lu_row] = [1.0, 0.0, 0.0]
        w4 = model.store.value("frameid.w4")
        w4[motion] = [0.0, 0.0, 0.0, 2.0, 0.0, 0.0]
        model.store.value("frameid.w3")[motion] = 3.0
        # u_t = 0, u_l = [1, 0, 0]: nu = 3 * reLU(2)
        scores = model.instance_scores(FrameIdInstance("x", ("Kim", "went"), ("NNP", "VBD"), (1, 1), "go.v"))
        assert scores == {"Motion": pytest.approx(6.0)}
        w4[motion] = [0.0, 0.0, 0.0, -2.0, 0.0, 0.0]
        scores = model.instance_scores(FrameIdInstance("x", ("Kim", "went"), ("NNP", "VBD"), (1, 1), "go.v"))
        assert scores == {"Motion": 0.0}

    def test_sentence_pass_matches_per_target(self, tiny_config, resources):
        model = FrameIdentifier.create(tiny_config, resources, seed=5)
        tokens, pos = ("Kim", "gave", "Lee", "a", "book"), ("NNP", "VBD", "NNP", "DT", "NN")
        targets = [((1, 1), "give.v"), ((4, 4), "see.v")]
        shared = model.sentence_scores(tokens, pos, targets)
        for (target, lu), scores in zip(targets, shared):
            assert scores == model.instance_scores(FrameIdInstance("x", tokens, pos, target, lu))

    def test_build_instances(self, sentences):
        instances = build_frame_instances(sentences)
        assert len(instances) == 5
        assert instances[1].instance_id == "1:0"
        assert instances[1].frame == "Giving"

    def test_gold_outside_candidates_is_skipped(self, tiny_config, resources):
        model = FrameIdentifier.create(tiny_config, resources, seed=0)
        instance = FrameIdInstance("x", ("Kim", "went"), ("NNP", "VBD"), (1, 1), "go.v", "Giving")
        assert model.loss(Graph(model.store), instance) is None


class TestEnsemble:
    def test_single_member_is_argmax(self):
        scores = {"Motion": 0.1, "Perception": 0.7}
        assert frameid_ensemble([scores], ORDER) == "Perception"

    def test_tie_goes_to_ontology_order(self):
        first = {"Perception": 1.0, "Motion": -1.0}
        second = {"Perception": -1.0, "Motion": 1.0}
        assert frameid_ensemble([first, second], ORDER) == "Motion"

    def test_random_members_match_brute_force(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            members = [{frame: float(rng.normal()) for frame in ORDER} for _ in range(5)]
            totals = {frame: sum(member[frame] for member in members) for frame in ORDER}
            assert frameid_ensemble(members, ORDER) == max(ORDER, key=lambda frame: totals[frame])

    def test_uniform_shift_keeps_argmax(self):
        rng = np.random.default_rng(5)
        members = [{frame: float(rng.normal()) for frame in ORDER} for _ in range(3)]
        shifted = [{frame: value + 4.0 for frame, value in member.items()} for member in members]
        assert frameid_ensemble(members, ORDER) == frameid_ensemble(shifted, ORDER)

    def test_candidate_mismatch(self):
        with pytest.raises(DataValidationError):
            frameid_ensemble([{"Motion": 0.0}, {"Giving": 0.0}], ORDER)
