"""Scalar fields on a phase space, evaluated on batches of states."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ScalarField:
    """A smooth function on M.

    ``evaluator`` takes an array of states (``(..., 2, 2)`` matrices on the
    hyperbolic backend, ``(..., 2)`` coordinates on the planar one) and
    returns an array of the batch shape.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    smoothness_scale: float = 1.0
    label: str = "field"
    real: bool = True
    meta: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, states) -> np.ndarray:
        return np.asarray(self.evaluator(np.asarray(states, dtype=float)))

    @classmethod
    def constant(cls, value: complex, label: str | None = None, state_ndim: int | None = None) -> "ScalarField":
        """Constant field; ``state_ndim`` is 1 for planar and 2 for group states.

        Without it the batch shape is guessed: a trailing (2, 2) is read as a matrix.
        """
        real = np.isrealobj(value)

        def const(states, _v=value):
            states = np.asarray(states)
            if state_ndim is None:
                nd = 2 if states.shape[-2:] == (2, 2) else 1
            else:
                nd = state_ndim
            return np.full(states.shape[:-nd], _v, dtype=float if real else complex)

        return cls(const, np.inf, label or f"const({value})", real)

    def _combine(self, other, op, sym):
        if isinstance(other, ScalarField):
            scale = min(self.smoothness_scale, other.smoothness_scale)
            return ScalarField(
                lambda s: op(self(s), other(s)),
                scale,
                f"({self.label}{sym}{other.label})",
                self.real and other.real,
            )
        real = self.real and np.isrealobj(other)
        return ScalarField(
            lambda s: op(self(s), other), self.smoothness_scale, f"({self.label}{sym}{other})", real
        )

    def __add__(self, other):
        return self._combine(other, np.add, "+")

    def __radd__(self, other):
        return self._combine(other, lambda a, b: b + a, "+")

    def __sub__(self, other):
        return self._combine(other, np.subtract, "-")

    def __rsub__(self, other):
        return self._combine(other, lambda a, b: b - a, "-")

    def __mul__(self, other):
        return self._combine(other, np.multiply, "*")

    def __rmul__(self, other):
        return self._combine(other, lambda a, b: b * a, "*")

    def __truediv__(self, other):
        return self._combine(other, np.divide, "/")

    def __neg__(self):
        return self * -1.0

    def map(self, fn: Callable[[np.ndarray], np.ndarray], label: str, real: bool | None = None):
        return ScalarField(
            lambda s: fn(self(s)), self.smoothness_scale, label, self.real if real is None else real
        )

    def conj(self) -> "ScalarField":
        if self.real:
            return self
        return ScalarField(lambda s: np.conj(self(s)), self.smoothness_scale, f"conj({self.label})", False)
