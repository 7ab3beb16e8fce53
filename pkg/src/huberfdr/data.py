from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class ZData:
    """A validated vector of z-values with a dataset label."""

    values: np.ndarray
    label: str = field(default="data")

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ValueError(f"z-values must be finite; entry {bad} is {values[bad]!r}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n(self):
        return self.values.size

    def __len__(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, ZData):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.values, other.values)

    def __repr__(self):
        return f"ZData(label={self.label!r}, n={self.n})"


def as_zdata(data, label="data"):
    if isinstance(data, ZData):
        return data
    return ZData(np.asarray(data, dtype=float), label=label)
