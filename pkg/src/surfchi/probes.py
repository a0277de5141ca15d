"""Phase functions restricted to a surface: heights, distances, general fields."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True, eq=False)
class ProbeFunction:
    kind: str
    direction: Optional[np.ndarray] = None
    point: Optional[np.ndarray] = None
    _value: Optional[Callable] = field(default=None, repr=False)
    _gradient: Optional[Callable] = field(default=None, repr=False)
    _hessian: Optional[Callable] = field(default=None, repr=False)
    label: str = ""

    @classmethod
    def height(cls, omega, normalize=True):
        w = np.asarray(omega, dtype=float).reshape(3)
        n = float(np.linalg.norm(w))
        if not np.isfinite(n) or n == 0.0:
            raise ParameterError("height direction must be a non-zero vector")
        if normalize:
            w = w / n
        elif abs(n - 1.0) > 1e-9:
            raise ParameterError(f"height direction must have unit length, got |w| = {n!r}")
        w.setflags(write=False)
        return cls("height", direction=w)

    @classmethod
    def distance(cls, x):
        p = np.asarray(x, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ParameterError("receiver point must be finite")
        p.setflags(write=False)
        return cls("distance", point=p)

    @classmethod
    def general(cls, value, gradient, hessian, label="general"):
        return cls("general", _value=value, _gradient=gradient, _hessian=hessian, label=label)

    # --- evaluation on (n, 3) arrays ---------------------------------------

    def value(self, p):
        p = np.asarray(p, float)
        if self.kind == "height":
            return p @ self.direction
        if self.kind == "distance":
            return np.linalg.norm(p - self.point, axis=-1)
        return np.asarray(self._value(p), float)

    def gradient(self, p):
        p = np.asarray(p, float)
        if self.kind == "height":
            return np.broadcast_to(self.direction, p.shape).copy()
        if self.kind == "distance":
            d = p - self.point
            return d / np.linalg.norm(d, axis=-1)[..., None]
        return np.asarray(self._gradient(p), float)

    def hessian(self, p):
        p = np.asarray(p, float)
        shape = p.shape[:-1] + (3, 3)
        if self.kind == "height":
            return np.zeros(shape)
        if self.kind == "distance":
            d = p - self.point
            r = np.linalg.norm(d, axis=-1)
            u = d / r[..., None]
            return (np.eye(3) - u[..., :, None] * u[..., None, :]) / r[..., None, None]
        return np.asarray(self._hessian(p), float)

    def negated(self):
        if self.kind == "height":
            return ProbeFunction.height(-self.direction)
        if self.kind == "distance":
            raise ParameterError("a distance probe has no negated form")
        return ProbeFunction.general(
            lambda p: -self._value(p), lambda p: -self._gradient(p), lambda p: -self._hessian(p),
            label=f"-{self.label}",
        )

    def describe(self) -> dict:
        if self.kind == "height":
            return {"kind": "height", "direction": [float(c) for c in self.direction]}
        if self.kind == "distance":
            return {"kind": "distance", "point": [float(c) for c in self.point]}
        return {"kind": "general", "label": self.label}

    def bound(self, points) -> float:
        """max |psi| over a point sample."""
        return float(np.max(np.abs(self.value(points))))
