import numpy as np
import pytest

from app.autodiff import Graph, ParameterStore, adam_step, OptimizerState
from app.autodiff.lstm import add_lstm
from app.core.errors import DataValidationError
from app.models.encoders import (
    TokenInput,
    add_frame_lu_tables,
    add_span_encoder,
    add_token_encoder,
    clamp_distance,
    encode_span_naive,
    encode_spans,
    encode_target,
    distance_row,
    encode_tokens,
    lookup_frame_lu,
    span_count,
    target_window,
    token_vector,
)


def _token_encoder(hidden=3, distance_dim=0, radius=0, seed=0):
    store = ParameterStore()
    pretrained = np.vstack([np.zeros((1, 2)), np.ones((3, 2))])
    encoder = add_token_encoder(
        store, "enc", vocab_size=5, pos_size=3, pretrained=pretrained, word_dim=4, pos_dim=2,
        hidden_dim=hidden, rng=np.random.default_rng(seed), distance_dim=distance_dim, distance_radius=radius,
    )
    return store, encoder


def _tokens(n):
    return [TokenInput(word_id=k % 5, pretrained_id=k % 4, pos_id=k % 3) for k in range(n)]


class TestTokenEncoder:
    def test_one_vector_per_token(self):
        store, encoder = _token_encoder(hidden=3)
        h_tok = encode_tokens(Graph(store), encoder, _tokens(4))
        assert len(h_tok) == 4
        assert all(node.shape == (6,) for node in h_tok)

    def test_zero_weights_give_zero_vectors(self):
        store, encoder = _token_encoder()
        store.zero("enc.tok")
        for node in encode_tokens(Graph(store), encoder, _tokens(3)):
            np.testing.assert_array_equal(node.value, np.zeros(6))

    def test_empty_sentence(self):
        store, encoder = _token_encoder()
        with pytest.raises(DataValidationError):
            encode_tokens(Graph(store), encoder, [])

    def test_dropout_ignored_without_rng(self):
        store, encoder = _token_encoder()
        first = encode_tokens(Graph(store), encoder, _tokens(3), dropout=0.5)
        second = encode_tokens(Graph(store), encoder, _tokens(3), dropout=0.5)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.value, b.value)

    def test_distance_rows(self):
        store, encoder = _token_encoder(distance_dim=2, radius=2)
        assert store.value("enc.distance").shape == (6, 2)
        assert [clamp_distance(q, 3, 2) for q in range(7)] == [-2, -2, -1, 0, 1, 2, 2]
        assert [distance_row(d, 2) for d in (-2, 0, 2, None)] == [0, 2, 4, 5]

    def test_no_target_reads_its_own_row(self):
        store, encoder = _token_encoder(distance_dim=2, radius=2)
        graph = Graph(store)
        without = TokenInput(word_id=1, pretrained_id=1, pos_id=1, target_distance=None)
        vector = token_vector(graph, encoder, without)
        np.testing.assert_array_equal(vector.value[-2:], store.value("enc.distance")[5])
        at_target = token_vector(graph, encoder, TokenInput(word_id=1, pretrained_id=1, pos_id=1))
        np.testing.assert_array_equal(at_target.value[-2:], store.value("enc.distance")[2])

    def test_target_change_moves_only_distances(self, resources):
        tokens, pos = ("Kim", "gave", "Lee", "a", "book"), ("NNP", "VBD", "NNP", "DT", "NN")
        first = resources.token_inputs(tokens, pos, 1, 20, unk_probability=0.0)
        second = resources.token_inputs(tokens, pos, 3, 20, unk_probability=0.0)
        for a, b in zip(first, second):
            assert (a.word_id, a.pretrained_id, a.pos_id) == (b.word_id, b.pretrained_id, b.pos_id)
        assert [t.target_distance for t in first] == [-1, 0, 1, 2, 3]
        assert [t.target_distance for t in second] == [-3, -2, -1, 0, 1]
        assert {t.target_distance for t in resources.token_inputs(tokens, pos, None, 20)} == {None}

    def test_reversed_sentence_mirrors_directions(self):
        store, encoder = _token_encoder(hidden=3, seed=6)
        tokens = _tokens(4)
        forward = encode_tokens(Graph(store), encoder, tokens)
        mirrored = ParameterStore()
        for name in store.names():
            twin = name.replace(".fwd.", ".bwd.") if ".fwd." in name else name.replace(".bwd.", ".fwd.")
            mirrored.add(name, store.value(name).shape, value=store.value(twin))
        reversed_out = encode_tokens(Graph(mirrored), encoder, tokens[::-1])
        n = len(tokens)
        for q in range(n):
            np.testing.assert_allclose(forward[q].value[:3], reversed_out[n - 1 - q].value[3:], rtol=0, atol=1e-12)
            np.testing.assert_allclose(forward[q].value[3:], reversed_out[n - 1 - q].value[:3], rtol=0, atol=1e-12)

    def test_same_lookup_twice_is_identical(self):
        store = ParameterStore()
        tables = add_frame_lu_tables(store, "arg", 3, 2, 4, 4, np.random.default_rng(0))
        graph = Graph(store)
        first = lookup_frame_lu(graph, tables, 1, 0)
        second = lookup_frame_lu(graph, tables, 1, 0)
        np.testing.assert_array_equal(first[0].value, second[0].value)
        assert first[0].shape == (4,)

    def test_sparse_step_leaves_other_frames(self):
        store = ParameterStore()
        tables = add_frame_lu_tables(store, "arg", 3, 2, 4, 4, np.random.default_rng(0))
        before = store.value(tables.frame_table).copy()
        graph = Graph(store)
        v_f, _ = lookup_frame_lu(graph, tables, 0, 1)
        state = OptimizerState.for_store(store, 0.1, 0.9, 0.999, 1e-8)
        adam_step(state, store, graph.backward(graph.dot(v_f, v_f)))
        np.testing.assert_array_equal(store.value(tables.frame_table)[1:], before[1:])
        assert not np.array_equal(store.value(tables.frame_table)[0], before[0])


class TestSpanTable:
    @pytest.mark.parametrize("n, max_length, expected", [(4, 20, 10), (5, 2, 9), (1, 1, 1)])
    def test_span_count(self, n, max_length, expected):
        assert span_count(n, max_length) == expected
        store, encoder = _token_encoder()
        spans = add_span_encoder(store, "enc", 6, 3, np.random.default_rng(1))
        graph = Graph(store)
        table = encode_spans(graph, spans, encode_tokens(graph, encoder, _tokens(n)), max_length)
        assert len(table) == expected

    def test_shared_runs_match_independent_runs(self):
        store, encoder = _token_encoder(seed=4)
        spans = add_span_encoder(store, "enc", 6, 3, np.random.default_rng(5))
        graph = Graph(store)
        h_tok = encode_tokens(graph, encoder, _tokens(5))
        table = encode_spans(graph, spans, h_tok, 3)
        for i, j in table:
            naive = encode_span_naive(graph, spans, h_tok, i, j)
            np.testing.assert_array_equal(table[(i, j)].value, naive.value)

    def test_span_outside_table(self):
        store, encoder = _token_encoder()
        spans = add_span_encoder(store, "enc", 6, 3, np.random.default_rng(1))
        graph = Graph(store)
        table = encode_spans(graph, spans, encode_tokens(graph, encoder, _tokens(4)), 2)
        assert (0, 2) not in table
        with pytest.raises(DataValidationError):
            table[(0, 2)]


class TestTargetWindow:
    def test_single_token_in_middle(self):
        assert list(target_window(5, (2, 2))) == [1, 2, 3]

    def test_whole_sentence_has_no_neighbours(self):
        assert list(target_window(4, (0, 3))) == [0, 1, 2, 3]

    def test_sentence_edges(self):
        assert list(target_window(5, (0, 0))) == [0, 1]
        assert list(target_window(5, (3, 4))) == [2, 3, 4]

    def test_target_out_of_bounds(self):
        with pytest.raises(DataValidationError):
            target_window(3, (2, 3))

    def test_zero_weights_give_zero_vector(self):
        store = ParameterStore()
        lstm = add_lstm(store, "tgt", 2, 3, np.random.default_rng(0))
        store.zero("tgt")
        graph = Graph(store)
        h_tok = [graph.constant([1.0, -1.0]) for _ in range(4)]
        np.testing.assert_array_equal(encode_target(graph, lstm, h_tok, (1, 2)).value, np.zeros(3))
