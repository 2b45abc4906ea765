# Evaluation package.
from app.evaluation.metrics import EvalReport, argument_set, score_arguments, score_frames

__all__ = ["EvalReport", "argument_set", "score_arguments", "score_frames"]
