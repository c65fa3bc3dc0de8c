"""
ModelWeights - named parameter tensors of the merging network.

Storage is float32 (float64 is kept for double-precision checks).
Immutable: arrays are copied on construction and marked read-only, so a
single instance can be shared by any number of concurrent forward calls.

Naming:
    <layer>.weight / <layer>.bias          conv_E1, conv_E2, conv_M1..conv_M4, conv_D
    scram.<1|3|shared>.spatial.<part>      reduce, dil1, dil2, dil3, project
    scram.<1|3|shared>.channel.<fcN>       fc1..fc4
    conv_M1.<1|2|3>                        when conv_M1 is not shared
    attention.<1|3>.conv1|conv2            ahdrnet_like attention
"""

from dataclasses import dataclass
from types import MappingProxyType
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np


@dataclass(frozen=True)
class ModelWeights:
    tensors: Mapping[str, np.ndarray]

    def __post_init__(self):
        frozen: Dict[str, np.ndarray] = {}
        for name in sorted(self.tensors):
            arr = np.array(self.tensors[name], copy=True)
            if arr.dtype != np.float64:
                arr = arr.astype(np.float32)
            arr.setflags(write=False)
            frozen[name] = arr
        object.__setattr__(self, "tensors", MappingProxyType(frozen))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def __contains__(self, name: object) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self.tensors)

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> Tuple[str, ...]:
        return tuple(self.tensors)

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        return {name: arr.shape for name, arr in self.tensors.items()}

    @property
    def param_count(self) -> int:
        return sum(int(arr.size) for arr in self.tensors.values())

    def as_dict(self) -> Dict[str, np.ndarray]:
        """Writable copies, e.g. as optimizer input."""
        return {name: arr.copy() for name, arr in self.tensors.items()}

    def equals(self, other: "ModelWeights") -> bool:
        """Bitwise equality of names, shapes and values."""
        if self.names() != other.names():
            return False
        return all(
            self[n].shape == other[n].shape and self[n].tobytes() == other[n].tobytes()
            for n in self.names()
        )
