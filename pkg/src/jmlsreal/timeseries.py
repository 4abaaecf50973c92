"""Sampled input/output data shared by the simulators and estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .words import Alphabet


@dataclass(frozen=True)
class TimeSeries:
    """Finite output record with either per-letter inputs or a discrete path.

    u-form stores the input values u_s(t) column-per-letter (alphabet gives
    the column names); theta-form stores a discrete mode path from which
    pair inputs u_(q1,q2)(t) = 1{theta(t)=q1, theta(t+1)=q2} are derived.
    The two forms are mutually exclusive.
    """

    y: np.ndarray
    u: np.ndarray | None = None
    theta: np.ndarray | None = None
    alphabet: Alphabet | None = None
    n_modes: int | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        if y.ndim != 2 or y.shape[0] < 1:
            raise ValidationError("y must be a (T, p) array")
        if not np.all(np.isfinite(y)):
            raise ValidationError("y contains non-finite values")
        object.__setattr__(self, "y", y)
        if (self.u is None) == (self.theta is None):
            raise ValidationError("exactly one of u-form and theta-form is required")
        if self.u is not None:
            u = np.asarray(self.u, dtype=float)
            if u.ndim != 2 or u.shape[0] != y.shape[0]:
                raise ValidationError("u must be (T, d)")
            if self.alphabet is None or len(self.alphabet) != u.shape[1]:
                raise ValidationError("u-form needs an alphabet matching the columns")
            if not np.all(np.isfinite(u)):
                raise ValidationError("u contains non-finite values")
            object.__setattr__(self, "u", u)
        else:
            th = np.asarray(self.theta)
            if th.ndim != 1 or th.shape[0] != y.shape[0]:
                raise ValidationError("theta must be (T,)")
            if self.n_modes is None or self.n_modes < 1:
                raise ValidationError("theta-form needs n_modes")
            if th.min() < 0 or th.max() >= self.n_modes:
                raise ValidationError("theta values outside mode range")
            object.__setattr__(self, "theta", th.astype(np.int64))

    @property
    def horizon(self) -> int:
        return self.y.shape[0]

    @property
    def output_dim(self) -> int:
        return self.y.shape[1]


def pair_letter_name(q1: int, q2: int) -> str:
    return f"{q1}>{q2}"


def parse_pair_letter(name: str) -> tuple[int, int]:
    a, b = name.split(">")
    return int(a), int(b)
