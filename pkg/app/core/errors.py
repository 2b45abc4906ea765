from typing import Optional, Sequence


class SegRNNError(Exception):
    """Base class for every error raised by the parser."""


class ShapeError(SegRNNError):
    def __init__(self, op: str, left_shape: Sequence[int], right_shape: Sequence[int]) -> None:
        self.op = op
        self.left_shape = tuple(left_shape)
        self.right_shape = tuple(right_shape)
        super().__init__(f"{op}: incompatible shapes {self.left_shape} and {self.right_shape}")


class GraphError(SegRNNError):
    pass


class DataValidationError(SegRNNError):
    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None) -> None:
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class ConfigError(SegRNNError):
    pass


class CheckpointError(SegRNNError):
    pass


class NumericError(SegRNNError):
    pass


class EnumerationLimitError(SegRNNError):
    pass
