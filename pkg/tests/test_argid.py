import numpy as np
import pytest

from app.autodiff import Graph, OptimizerState, adam_step
from app.core.errors import DataValidationError
from app.data.corpus import build_instances
from app.data.trees import framenet_scaffold, parse_bracketed_tree
from app.models.argid import ArgumentModel

VARIANTS = [
    {},
    {"alpha": 0.0},
    {"null_max_length": 1},
    {"numerator_mode": "canonical"},
]


def _sampled_differences(fn, array, indices, h=1e-5):
    flat = array.reshape(-1)
    out = []
    for index in indices:
        original = flat[index]
        flat[index] = original + h
        plus = fn()
        flat[index] = original - h
        minus = fn()
        flat[index] = original
        out.append((plus - minus) / (2 * h))
    return np.array(out)


@pytest.mark.parametrize("seed", range(20))
def test_joint_loss_gradient_matches_finite_differences(seed, make_config, resources, sentences, ontology):
    config = make_config(**VARIANTS[seed % len(VARIANTS)])
    model = ArgumentModel.create(config, resources, seed=seed)
    instances = build_instances(sentences, ontology, config.max_span_length)
    instance = instances[seed % len(instances)]
    sentence = sentences[int(instance.instance_id.split(":")[0])]
    scaffold = framenet_scaffold(
        sentence.tokens, sentence.pos,
        [el.span for annotation in sentence.annotations for el in annotation.elements],
        config.max_span_length,
    )

    def value():
        return model.sentence_loss(Graph(model.store), [instance], scaffold).scalar()

    graph = Graph(model.store)
    grads = graph.backward(model.sentence_loss(graph, [instance], scaffold))
    rng = np.random.default_rng(seed)
    for param in model.store.trainable():
        if param.sparse:
            continue
        indices = rng.choice(param.value.size, size=min(3, param.value.size), replace=False)
        expected = _sampled_differences(value, param.value, indices)
        np.testing.assert_allclose(grads[param.name].reshape(-1)[indices], expected, rtol=1e-3, atol=1e-6)


def test_embedding_rows_get_gradients(tiny_config, resources, sentences, ontology, numeric_grad):
    model = ArgumentModel.create(tiny_config, resources, seed=1)
    instance = build_instances(sentences, ontology, tiny_config.max_span_length)[3]

    def value():
        return model.instance_loss(Graph(model.store), instance).scalar()

    graph = Graph(model.store)
    grads = graph.backward(model.instance_loss(graph, instance))
    for name in ("arg.role", "arg.frame"):
        np.testing.assert_allclose(grads[name], numeric_grad(value, model.store.value(name)), rtol=1e-3, atol=1e-6)


class TestArgumentModel:
    def test_lattice_labels_are_null_then_frame_roles(self, tiny_config, resources):
        model = ArgumentModel.create(tiny_config, resources, seed=0)
        lattice = model.lattice_scores(("Kim", "gave", "Lee", "a", "book"), ("NNP", "VBD", "NNP", "DT", "NN"), (1, 1), "give.v", "Giving")
        assert lattice.labels == [None, "Donor", "Recipient", "Theme"]
        assert lattice.max_length == tiny_config.max_span_length

    def test_decode_tiles_the_sentence(self, tiny_config, resources, sentences):
        model = ArgumentModel.create(tiny_config, resources, seed=2)
        for sentence in sentences:
            annotation = sentence.annotations[0]
            segmentation = model.decode(sentence.tokens, sentence.pos, annotation.target, annotation.lu, annotation.frame)
            segmentation.validate(len(sentence.tokens), tiny_config.max_span_length)

    def test_loss_is_nonnegative(self, tiny_config, resources, sentences, ontology):
        model = ArgumentModel.create(tiny_config, resources, seed=3)
        for instance in build_instances(sentences, ontology, tiny_config.max_span_length):
            assert model.instance_loss(Graph(model.store), instance).scalar() >= -1e-12

    def test_unknown_frame(self, tiny_config, resources):
        model = ArgumentModel.create(tiny_config, resources, seed=0)
        with pytest.raises(DataValidationError):
            model.decode(("a", "b"), ("X", "X"), (0, 0), "go.v", "Cooking")

    def test_unknown_words_decode(self, tiny_config, resources):
        model = ArgumentModel.create(tiny_config, resources, seed=0)
        segmentation = model.decode(("Zed", "strolled", "off"), ("NNP", "VBD", "RP"), (1, 1), "stroll.v", "Motion")
        segmentation.validate(3, tiny_config.max_span_length)

    def test_empty_sentence_loss(self, tiny_config, resources):
        model = ArgumentModel.create(tiny_config, resources, seed=0)
        with pytest.raises(DataValidationError):
            model.sentence_loss(Graph(model.store), [])

    def test_delta_scales_scaffold_term(self, make_config, resources):
        tree = parse_bracketed_tree("(S (NP the dog) (VP went))")
        losses = []
        for delta in (0.17, 0.34):
            model = ArgumentModel.create(make_config(delta=delta), resources, seed=5)
            losses.append(model.sentence_loss(Graph(model.store), [], tree).scalar())
        assert losses[1] == pytest.approx(2 * losses[0], rel=1e-12)

    def test_scaffold_update_leaves_target_distance_rows(self, tiny_config, resources):
        model = ArgumentModel.create(tiny_config, resources, seed=4)
        before = model.store.value("arg.distance").copy()
        tree = parse_bracketed_tree("(S (NP the dog) (VP went (NP home)))")
        graph = Graph(model.store)
        state = OptimizerState.for_store(model.store, 0.1, 0.9, 0.999, 1e-8)
        adam_step(state, model.store, graph.backward(model.sentence_loss(graph, [], tree)))
        after = model.store.value("arg.distance")
        no_target = 2 * tiny_config.distance_clamp + 1
        np.testing.assert_array_equal(after[:no_target], before[:no_target])
        assert not np.array_equal(after[no_target], before[no_target])
