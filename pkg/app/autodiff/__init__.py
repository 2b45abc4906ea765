# Autodiff package.
from app.autodiff.graph import Gradients, Graph, Node
from app.autodiff.lstm import LSTMSpec, add_lstm, lstm_step, run_lstm
from app.autodiff.optim import OptimizerState, adam_step, clip_gradients, dropout_mask
from app.autodiff.params import Parameter, ParameterStore

__all__ = [
    "Gradients",
    "Graph",
    "LSTMSpec",
    "Node",
    "OptimizerState",
    "Parameter",
    "ParameterStore",
    "adam_step",
    "add_lstm",
    "clip_gradients",
    "dropout_mask",
    "lstm_step",
    "run_lstm",
]
