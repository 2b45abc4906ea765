from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import GraphError, ShapeError


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    frozen: bool = False
    # lookup tables get row-sparse updates
    sparse: bool = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.value.shape)


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


@dataclass
class ParameterStore:
    """Named float64 tensors shared by every graph built for one model."""

    params: Dict[str, Parameter] = field(default_factory=dict)

    def add(
        self,
        name: str,
        shape: Sequence[int],
        rng: Optional[np.random.Generator] = None,
        init: str = "glorot",
        sparse: bool = False,
        frozen: bool = False,
        value: Optional[np.ndarray] = None,
    ) -> Parameter:
        if name in self.params:
            raise GraphError(f"Parameter already defined: {name}")
        shape = tuple(int(dim) for dim in shape)
        if any(dim <= 0 for dim in shape):
            raise GraphError(f"Parameter {name} has a non-positive dimension: {shape}")

        if value is not None:
            array = np.array(value, dtype=np.float64)
            if array.shape != shape:
                raise ShapeError(f"param:{name}", array.shape, shape)
        elif init == "zeros":
            array = np.zeros(shape, dtype=np.float64)
        else:
            if rng is None:
                raise GraphError(f"Parameter {name} needs an rng for {init} init")
            fan_out = shape[0]
            fan_in = shape[1] if len(shape) > 1 else 1
            bound = glorot_bound(fan_in, fan_out)
            array = rng.uniform(-bound, bound, size=shape).astype(np.float64)

        param = Parameter(name=name, value=array, frozen=frozen, sparse=sparse)
        self.params[name] = param
        return param

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __getitem__(self, name: str) -> Parameter:
        try:
            return self.params[name]
        except KeyError as exc:
            raise GraphError(f"Unknown parameter: {name}") from exc

    def value(self, name: str) -> np.ndarray:
        return self[name].value

    def names(self) -> List[str]:
        return list(self.params.keys())

    def trainable(self) -> Iterator[Parameter]:
        return (param for param in self.params.values() if not param.frozen)

    def copy(self) -> "ParameterStore":
        return ParameterStore(
            {
                name: Parameter(name, param.value.copy(), param.frozen, param.sparse)
                for name, param in self.params.items()
            }
        )

    def zero(self, prefix: str) -> None:
        for name, param in self.params.items():
            if name.startswith(prefix):
                param.value[...] = 0.0
