"""Safeguarded 1-D maps, the cascade/cross/couple combinator and the 3D-ILS map."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

C0 = 0.077
DEFAULT_TRANSIENT = 1000


@dataclass(frozen=True)
class Guards:
    """Saturation margin ``eps`` and denominator floor ``eps_d``."""

    eps: float = 1e-12
    eps_d: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise ValueError(f"eps must lie in (0, 0.5), got {self.eps!r}")
        if not 0.0 < self.eps_d < 1.0:
            raise ValueError(f"eps_d must lie in (0, 1), got {self.eps_d!r}")


DEFAULT_GUARDS = Guards()


@dataclass(frozen=True)
class SystemParams:
    alpha: float
    r: float
    mu: float
    c: float = C0
    guards: Guards = field(default_factory=Guards)

    def __post_init__(self):
        for name in ("alpha", "r", "mu", "c"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha!r}")
        if not 0 < self.r <= 4:
            raise ValueError(f"r must lie in (0, 4], got {self.r!r}")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu!r}")

    def replace(self, **changes) -> "SystemParams":
        kw = dict(alpha=self.alpha, r=self.r, mu=self.mu, c=self.c, guards=self.guards)
        kw.update(changes)
        return SystemParams(**kw)


class SystemState(NamedTuple):
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class Orbit:
    """``states`` has shape ``(n_samples, 3)``; columns are x, y, z."""

    states: np.ndarray
    transient_discarded: int
    params: SystemParams

    def __len__(self):
        return len(self.states)

    @property
    def x(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.states[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.states[:, 2]


def sat(u: float, guards: Guards = DEFAULT_GUARDS) -> float:
    return min(1.0 - guards.eps, max(guards.eps, u))


def den(u: float, guards: Guards = DEFAULT_GUARDS) -> float:
    d = 2.0 * u - 1.0
    if abs(d) >= guards.eps_d:
        return d
    # sgn(0) taken as +1
    return -guards.eps_d if d < 0 else guards.eps_d


def map_G(u: float, r: float) -> float:
    """Logistic map."""
    return r * u * (1.0 - u)


def map_H(u: float, mu: float) -> float:
    """Normalised Sine map."""
    return (math.sin(mu * math.pi * (2.0 * u - 1.0)) + 1.0) / 2.0


def map_F(u: float, alpha: float, guards: Guards = DEFAULT_GUARDS) -> float:
    """Normalised ICMIC map with the denominator guard."""
    return (math.sin(alpha / den(u, guards)) + 1.0) / 2.0


def cross_couple(lead: float, g_val: float, h_val: float, p: float, q: float, c: float) -> float:
    """Pre-saturation input ``lead*G + (1-lead)*H + c*(p-q)*(lead-1/2)``."""
    return lead * g_val + (1.0 - lead) * h_val + c * (p - q) * (lead - 0.5)


UnaryMap = Callable[[float], float]


def ccc_step(
    state: SystemState,
    F: UnaryMap,
    G: UnaryMap,
    H: UnaryMap,
    c: float,
    guards: Guards = DEFAULT_GUARDS,
) -> SystemState:
    """One step of the generic coupling rule for arbitrary maps F, G, H.

    Updates are sequential: the y-update sees the new x, the z-update sees
    the new x and y. Each coupled input is saturated before F.
    """
    x, y, z = state
    x1 = F(sat(cross_couple(x, G(y), H(z), y, z, c), guards))
    y1 = F(sat(cross_couple(y, G(z), H(x1), z, x1, c), guards))
    z1 = F(sat(cross_couple(z, G(x1), H(y1), x1, y1, c), guards))
    return SystemState(x1, y1, z1)


def ils_components(params: SystemParams) -> tuple[UnaryMap, UnaryMap, UnaryMap]:
    """The (F, G, H) triple that turns :func:`ccc_step` into the 3D-ILS map."""
    a, r, mu, g = params.alpha, params.r, params.mu, params.guards
    return (lambda u: map_F(u, a, g)), (lambda u: map_G(u, r)), (lambda u: map_H(u, mu))


def ils_step(state: SystemState, params: SystemParams) -> SystemState:
    # Inlined for speed; must stay operation-for-operation identical to
    # ccc_step(state, *ils_components(params), params.c, params.guards).
    x, y, z = state
    a, r, mu, c = params.alpha, params.r, params.mu, params.c
    g = params.guards
    eps, hi, eps_d = g.eps, 1.0 - g.eps, g.eps_d
    sin, pi = math.sin, math.pi

    u = x * (r * y * (1.0 - y)) + (1.0 - x) * ((sin(mu * pi * (2.0 * z - 1.0)) + 1.0) / 2.0) + c * (y - z) * (x - 0.5)
    u = min(hi, max(eps, u))
    d = 2.0 * u - 1.0
    if abs(d) < eps_d:
        d = -eps_d if d < 0 else eps_d
    x1 = (sin(a / d) + 1.0) / 2.0

    u = y * (r * z * (1.0 - z)) + (1.0 - y) * ((sin(mu * pi * (2.0 * x1 - 1.0)) + 1.0) / 2.0) + c * (z - x1) * (y - 0.5)
    u = min(hi, max(eps, u))
    d = 2.0 * u - 1.0
    if abs(d) < eps_d:
        d = -eps_d if d < 0 else eps_d
    y1 = (sin(a / d) + 1.0) / 2.0

    u = z * (r * x1 * (1.0 - x1)) + (1.0 - z) * ((sin(mu * pi * (2.0 * y1 - 1.0)) + 1.0) / 2.0) + c * (x1 - y1) * (z - 0.5)
    u = min(hi, max(eps, u))
    d = 2.0 * u - 1.0
    if abs(d) < eps_d:
        d = -eps_d if d < 0 else eps_d
    z1 = (sin(a / d) + 1.0) / 2.0

    return SystemState(x1, y1, z1)


def clamp_seed(seed, guards: Guards = DEFAULT_GUARDS) -> SystemState:
    x, y, z = (float(v) for v in seed)
    if not all(math.isfinite(v) for v in (x, y, z)):
        raise ValueError(f"seed coordinates must be finite, got {seed!r}")
    return SystemState(sat(x, guards), sat(y, guards), sat(z, guards))


def generate_orbit(
    seed,
    params: SystemParams,
    n_transient: int = DEFAULT_TRANSIENT,
    n_samples: int = 1,
) -> Orbit:
    """Iterate from the sat-clamped seed, drop ``n_transient`` states, keep ``n_samples``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n_transient < 0:
        raise ValueError("n_transient must be >= 0")
    s = clamp_seed(seed, params.guards)
    step = ils_step
    for _ in range(n_transient):
        s = step(s, params)
    out = np.empty((n_samples, 3))
    for i in range(n_samples):
        s = step(s, params)
        out[i] = s
    return Orbit(out, n_transient, params)
