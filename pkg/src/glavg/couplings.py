"""Coupling registry for the slow-fast reaction terms f and g.

Couplings are pointwise maps applied on the physical grid and projected
back onto the retained modes.  Each entry declares its Lipschitz constants
and the uniform bound of f; the validation suite probes the declarations
empirically.  Additively separable couplings (f = fx(x) + fy(y),
g = gx(x) + gy(y)) additionally support the live-plus-offset averaged
drift and tabulated averaging modes.

The integer ids and the parameter vector [a_f, a_g, b_g] are the contract
shared with both kernel backends.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CID_ZERO = 0
CID_DEFAULT = 1
CID_SLOW_ONLY = 2
CID_Y_ONLY = 3
CID_SIN_FAST = 4
CID_MIXED = 5


@dataclass(frozen=True)
class Coupling:
    """A named (f, g) pair with declared constants.

    lip_f bounds ||f(x1,y1)-f(x2,y2)|| by lip_f (||dx|| + ||dy||);
    cg and lip_g bound ||g(x1,y1)-g(x2,y2)|| by cg ||dx|| + lip_g ||dy||;
    f_bound bounds sup ||f||.
    """

    name: str
    cid: int
    a_f: float
    a_g: float
    b_g: float
    separable: bool
    f_depends_on_y: bool

    @property
    def params(self) -> np.ndarray:
        return np.array([self.a_f, self.a_g, self.b_g], dtype=np.float64)

    @property
    def lip_f(self) -> float:
        return {
            CID_ZERO: 0.0,
            CID_DEFAULT: self.a_f,
            CID_SLOW_ONLY: self.a_f,
            CID_Y_ONLY: 0.5 * self.a_f,
            CID_SIN_FAST: self.a_f,
            CID_MIXED: self.a_f,
        }[self.cid]

    @property
    def cg(self) -> float:
        return 0.0 if self.cid in (CID_SIN_FAST, CID_Y_ONLY, CID_ZERO) else self.a_g

    @property
    def lip_g(self) -> float:
        return 0.0 if self.cid in (CID_SIN_FAST, CID_ZERO) else self.b_g

    @property
    def f_bound(self) -> float:
        return {
            CID_ZERO: 0.0,
            CID_DEFAULT: 1.5 * self.a_f,
            CID_SLOW_ONLY: self.a_f,
            CID_Y_ONLY: 0.5 * self.a_f,
            CID_SIN_FAST: self.a_f,
            CID_MIXED: self.a_f,
        }[self.cid]

    # pointwise grid maps, used outside the kernels (frozen-x fields,
    # reference evaluations in tests); the kernels inline the same formulas.

    def f_grid(self, xg: np.ndarray, yg: np.ndarray) -> np.ndarray:
        if self.cid == CID_ZERO:
            return np.zeros_like(xg)
        if self.cid == CID_DEFAULT:
            return self.a_f * (np.sin(xg) + 0.5 * np.sin(yg))
        if self.cid == CID_SLOW_ONLY:
            return self.a_f * np.sin(xg)
        if self.cid == CID_Y_ONLY:
            return 0.5 * self.a_f * np.sin(yg)
        if self.cid == CID_SIN_FAST:
            return self.a_f * np.sin(yg)
        if self.cid == CID_MIXED:
            return self.a_f * np.sin(xg + yg)
        raise ValueError(f"unknown coupling id {self.cid}")

    def g_grid(self, xg: np.ndarray, yg: np.ndarray) -> np.ndarray:
        if self.cid in (CID_ZERO, CID_SIN_FAST):
            return np.zeros_like(xg)
        if self.cid in (CID_DEFAULT, CID_SLOW_ONLY, CID_MIXED):
            return self.a_g * np.sin(xg) + self.b_g * np.arctan(yg)
        if self.cid == CID_Y_ONLY:
            return self.b_g * np.arctan(yg)
        raise ValueError(f"unknown coupling id {self.cid}")

    def fx_grid(self, xg: np.ndarray) -> np.ndarray:
        """x-only part of a separable f (what the slow stepper evaluates live)."""
        if self.cid in (CID_DEFAULT, CID_SLOW_ONLY):
            return self.a_f * np.sin(xg)
        return np.zeros_like(xg)

    def fy_grid(self, yg: np.ndarray) -> np.ndarray:
        """y-only part of a separable f (what the ergodic offset averages)."""
        if self.cid == CID_DEFAULT:
            return 0.5 * self.a_f * np.sin(yg)
        if self.cid == CID_Y_ONLY:
            return 0.5 * self.a_f * np.sin(yg)
        if self.cid == CID_SIN_FAST:
            return self.a_f * np.sin(yg)
        return np.zeros_like(yg)

    def gx_grid(self, xg: np.ndarray) -> np.ndarray:
        if self.cid in (CID_DEFAULT, CID_SLOW_ONLY, CID_MIXED):
            return self.a_g * np.sin(xg)
        return np.zeros_like(xg)

    def gy_grid(self, yg: np.ndarray) -> np.ndarray:
        if self.cid in (CID_DEFAULT, CID_SLOW_ONLY, CID_Y_ONLY, CID_MIXED):
            return self.b_g * np.arctan(yg)
        return np.zeros_like(yg)


_REGISTRY = {
    "zero": (CID_ZERO, True, False),
    "default": (CID_DEFAULT, True, True),
    "slow_only": (CID_SLOW_ONLY, True, False),
    "y_only": (CID_Y_ONLY, True, True),
    "sin_fast": (CID_SIN_FAST, True, True),
    "mixed": (CID_MIXED, False, True),
}


def coupling_names() -> list[str]:
    return sorted(_REGISTRY)


def make_coupling(name: str, a_f: float = 1.0, a_g: float = 1.0, b_g: float = 1.0) -> Coupling:
    if name not in _REGISTRY:
        raise ValueError(f"unknown coupling {name!r}; known: {', '.join(coupling_names())}")
    cid, separable, dep_y = _REGISTRY[name]
    return Coupling(name, cid, a_f, a_g, b_g, separable, dep_y)
