"""Jacobians, Lyapunov spectra and scan drivers for the 3D-ILS map."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, NamedTuple

import numpy as np
import scipy.linalg

from .chaos import (
    DEFAULT_TRANSIENT,
    Orbit,
    SystemParams,
    SystemState,
    clamp_seed,
    cross_couple,
    generate_orbit,
    ils_step,
    map_G,
    map_H,
)

DEFAULT_FD_STEP = 1e-7
DEFAULT_LYAPUNOV_STEPS = 10_000
DEFAULT_SCAN_PARAMS = SystemParams(alpha=10.0, r=4.0, mu=5.0)
DEFAULT_SCAN_SEED = (0.3, 0.3, 0.3)
SWEEPABLE = ("alpha", "r", "mu")

# Reference and three-positive parameter sets from the Lyapunov study.
REFERENCE_PARAMS = SystemParams(alpha=74.7631, r=3.8647, mu=11.3289)
HYPERCHAOTIC_PARAMS = SystemParams(alpha=109.1686, r=3.9570, mu=14.4175)
LYAPUNOV_SEED = (0.31, 0.37, 0.41)

SCAN_CSV_HEADER = ("param", "coord", "iter", "value")
SPECTRUM_JSON_KEYS = ("alpha", "r", "mu", "c", "seed", "lambdas", "n_steps", "guard_hits", "logdet_mean")

JacobianSource = str  # "analytic" | "finite-difference"


class DegenerateFrameError(ArithmeticError):
    """A triangular-factor diagonal entry vanished on a guard-free step."""

    def __init__(self, step: int):
        super().__init__(f"tangent frame degenerated at step {step}")
        self.step = step


# ---------------------------------------------------------------------------
# Jacobians


def _analytic(state, params: SystemParams):
    """Analytic Jacobian, log|det J| and the triangular factors ``(L, U)``.

    J = P K with P lower-triangular (diagonal M1, M2, M3) and K
    upper-triangular, so det J is a product of six scalars. This avoids
    forming the determinant from the (badly conditioned) matrix itself.
    """
    x, y, z = state
    a, r, mu, c, g = params.alpha, params.r, params.mu, params.c, params.guards
    eps, eps_d = g.eps, g.eps_d
    k = mu * math.pi

    def Gp(u):
        return r * (1.0 - 2.0 * u)

    def Hp(u):
        return k * math.cos(k * (2.0 * u - 1.0))

    def F_and_slope(u):
        # returns F(u) = Phi(sat(u)) and F'(u) = Phi'(sat(u)) * sat'(u)
        v = min(1.0 - eps, max(eps, u))
        d = 2.0 * v - 1.0
        live = eps < u < 1.0 - eps and abs(d) >= eps_d
        if abs(d) < eps_d:
            d = -eps_d if d < 0 else eps_d
        val = (math.sin(a / d) + 1.0) / 2.0
        slope = -a * math.cos(a / d) / (d * d) if live else 0.0
        return val, slope

    u1 = cross_couple(x, map_G(y, r), map_H(z, mu), y, z, c)
    x1, M1 = F_and_slope(u1)
    u2 = cross_couple(y, map_G(z, r), map_H(x1, mu), z, x1, c)
    y1, M2 = F_and_slope(u2)
    u3 = cross_couple(z, map_G(x1, r), map_H(y1, mu), x1, y1, c)
    _, M3 = F_and_slope(u3)

    du1 = np.array([
        map_G(y, r) - map_H(z, mu) + c * (y - z),
        x * Gp(y) + c * (x - 0.5),
        (1.0 - x) * Hp(z) - c * (x - 0.5),
    ])
    row_x = M1 * du1

    A2 = (1.0 - y) * Hp(x1) - c * (y - 0.5)
    own2 = map_G(z, r) - map_H(x1, mu) + c * (z - x1)
    b2 = y * Gp(z) + c * (y - 0.5)
    du2 = A2 * row_x + np.array([0.0, own2, b2])
    row_y = M2 * du2

    Bx = z * Gp(x1) + c * (z - 0.5)
    By = (1.0 - z) * Hp(y1) - c * (z - 0.5)
    own3 = map_G(x1, r) - map_H(y1, mu) + c * (x1 - y1)
    du3 = Bx * row_x + By * row_y + np.array([0.0, 0.0, own3])
    row_z = M3 * du3

    factors = (M1, M2, M3, du1[0], own2, own3)
    if any(f == 0.0 for f in factors):
        logdet = -math.inf
    else:
        logdet = sum(math.log(abs(f)) for f in factors)
    L = np.array([
        [M1, 0.0, 0.0],
        [M2 * A2 * M1, M2, 0.0],
        [M3 * (Bx + By * M2 * A2) * M1, M3 * By * M2, M3],
    ])
    U = np.array([du1, [0.0, own2, b2], [0.0, 0.0, own3]])
    return np.array([row_x, row_y, row_z]), logdet, (L, U)


def jacobian_analytic(state, params: SystemParams) -> np.ndarray:
    """Row i holds the partials of next-state coordinate i."""
    return _analytic(state, params)[0]


def jacobian_fd(
    state,
    params: SystemParams | None = None,
    h: float = DEFAULT_FD_STEP,
    step: Callable | None = None,
) -> np.ndarray:
    """Central-difference Jacobian; column j perturbs coordinate j.

    ``step`` replaces the 3D-ILS map (used to check the differencing itself).
    """
    if not h > 0:
        raise ValueError(f"finite-difference step must be > 0, got {h!r}")
    if step is None:
        if params is None:
            raise ValueError("params required when no step map is given")
        step = lambda s: ils_step(SystemState(*s), params)  # noqa: E731
    s0 = np.asarray(state, dtype=float)
    J = np.empty((3, 3))
    for j in range(3):
        up, dn = s0.copy(), s0.copy()
        up[j] += h
        dn[j] -= h
        J[:, j] = (np.asarray(step(up), dtype=float) - np.asarray(step(dn), dtype=float)) / (2.0 * h)
    return J


def has_guard_row(J: np.ndarray) -> bool:
    return bool(np.any(np.all(J == 0.0, axis=1)))


class TangentStep(NamedTuple):
    """One step's Jacobian and log|det J|.

    ``factors`` optionally holds ``(L, U)`` with ``J = L @ U`` and ``U``
    upper-triangular; QR propagation then runs through each factor
    separately, which keeps the determinant bookkeeping exact.
    """

    J: np.ndarray
    logdet: float
    factors: tuple[np.ndarray, np.ndarray] | None = None


def _lu_step(J: np.ndarray) -> TangentStep:
    # Row pivoting copes with the strong row grading of these Jacobians far
    # better than a Householder QR of J itself.
    P, L, U = scipy.linalg.lu(J)
    du = np.abs(np.diag(U))
    logdet = -math.inf if np.any(du == 0.0) else float(np.log(du).sum())
    return TangentStep(J, logdet, (P @ L, U))


def jacobians_along_orbit(
    seed,
    params: SystemParams,
    n_transient: int,
    n_steps: int,
    jacobian_source: JacobianSource = "analytic",
    h: float = DEFAULT_FD_STEP,
) -> Iterator[TangentStep]:
    """Yield a :class:`TangentStep` for n = 0 .. n_steps-1 after the transient."""
    if jacobian_source not in ("analytic", "finite-difference"):
        raise ValueError(f"unknown jacobian source {jacobian_source!r}")
    s = clamp_seed(seed, params.guards)
    for _ in range(n_transient):
        s = ils_step(s, params)
    for _ in range(n_steps):
        if jacobian_source == "analytic":
            yield TangentStep(*_analytic(s, params))
        else:
            yield _lu_step(jacobian_fd(s, params, h))
        s = ils_step(s, params)


# ---------------------------------------------------------------------------
# Lyapunov spectra


@dataclass(frozen=True)
class LyapunovSpectrum:
    lambdas: tuple[float, float, float]
    n_steps: int
    logdet_mean: float
    guard_hits: int = 0
    method: str = "qr"
    params: SystemParams | None = None
    seed: tuple[float, float, float] | None = None

    @property
    def sum_rule_residual(self) -> float:
        return abs(sum(self.lambdas) - self.logdet_mean)

    def to_json(self) -> dict:
        p = self.params
        return {
            "alpha": p.alpha if p else None,
            "r": p.r if p else None,
            "mu": p.mu if p else None,
            "c": p.c if p else None,
            "seed": list(self.seed) if self.seed is not None else None,
            "lambdas": list(self.lambdas),
            "n_steps": self.n_steps,
            "guard_hits": self.guard_hits,
            "logdet_mean": self.logdet_mean,
        }


def _frame_qr(step, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR of ``J @ Q``; returns the new frame and the diagonal of R."""
    if len(step) > 2 and step[2] is not None:
        L, U = step[2]
        Q1, R1 = np.linalg.qr(U @ Q)
        Q2, R2 = np.linalg.qr(L @ Q1)
        return Q2, np.diag(R2) * np.diag(R1)
    Q, R = np.linalg.qr(step[0] @ Q)
    return Q, np.diag(R)


def qr_accumulate(steps: Iterable[tuple]) -> tuple[np.ndarray, float, int, int]:
    """Tangent-space QR iteration over ``(J, log|det J|[, factors])`` steps.

    Returns ``(lambdas, logdet_mean, n_steps, guard_hits)``; lambdas are in
    frame order (not sorted). A step whose Jacobian has an all-zero row
    (a saturated or floored guard) still re-orthonormalises the frame but
    adds nothing to either accumulator; it is counted in ``guard_hits`` and
    in the step count.
    """
    Q = np.eye(3)
    sums = np.zeros(3)
    logdet = 0.0
    n = hits = 0
    for step in steps:
        Q, d = _frame_qr(step, Q)
        Q = Q * np.where(d < 0.0, -1.0, 1.0)
        n += 1
        if has_guard_row(step[0]):
            hits += 1
            continue
        if np.any(d == 0.0):
            raise DegenerateFrameError(n - 1)
        sums += np.log(np.abs(d))
        logdet += step[1]
    if n == 0:
        raise ValueError("no steps to accumulate")
    return sums / n, logdet / n, n, hits


def svd_accumulate(steps: Iterable[tuple]) -> tuple[np.ndarray, float, int, int]:
    """Average of per-step log singular values; same guard handling as QR."""
    sums = np.zeros(3)
    logdet = 0.0
    n = hits = 0
    for J, ld, *_ in steps:
        n += 1
        if has_guard_row(J):
            hits += 1
            continue
        sv = np.linalg.svd(J, compute_uv=False)
        if np.any(sv == 0.0):
            raise DegenerateFrameError(n - 1)
        sums += np.log(sv)
        logdet += ld
    if n == 0:
        raise ValueError("no steps to accumulate")
    return sums / n, logdet / n, n, hits


def _sorted3(v) -> tuple[float, float, float]:
    a = sorted((float(t) for t in v), reverse=True)
    return a[0], a[1], a[2]


def lyapunov_qr(
    seed,
    params: SystemParams,
    n_transient: int = DEFAULT_TRANSIENT,
    n_steps: int = DEFAULT_LYAPUNOV_STEPS,
    jacobian_source: JacobianSource = "finite-difference",
    h: float = DEFAULT_FD_STEP,
) -> LyapunovSpectrum:
    if n_steps < 100:
        raise ValueError("n_steps must be >= 100")
    lam, ld, n, hits = qr_accumulate(jacobians_along_orbit(seed, params, n_transient, n_steps, jacobian_source, h))
    return LyapunovSpectrum(_sorted3(lam), n, ld, hits, "qr", params, tuple(float(v) for v in seed))


def finite_time_exponents(
    seed,
    params: SystemParams,
    n_steps: int,
    n_transient: int = DEFAULT_TRANSIENT,
    jacobian_source: JacobianSource = "finite-difference",
    h: float = DEFAULT_FD_STEP,
) -> LyapunovSpectrum:
    """(1/N) sum of log singular values of each step Jacobian.

    Bounds the QR spectrum from above in the leading exponent; its smallest
    entry is the quantity whose positivity implies three positive exponents.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    lam, ld, n, hits = svd_accumulate(jacobians_along_orbit(seed, params, n_transient, n_steps, jacobian_source, h))
    return LyapunovSpectrum(_sorted3(lam), n, ld, hits, "svd", params, tuple(float(v) for v in seed))


# ---------------------------------------------------------------------------
# Scans


@dataclass(frozen=True)
class BifurcationScan:
    """``samples[k, i, :]`` is the i-th retained (x, y, z) at ``grid[k]``."""

    swept_parameter: str
    grid: np.ndarray
    samples: np.ndarray
    n_iter: int

    def rows(self) -> Iterator[tuple[float, str, int, float]]:
        n_keep = self.samples.shape[1]
        first = self.n_iter - n_keep + 1
        for k, p in enumerate(self.grid):
            for ci, coord in enumerate("xyz"):
                for i in range(n_keep):
                    yield float(p), coord, first + i, float(self.samples[k, i, ci])

    def write_csv(self, fh) -> int:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SCAN_CSV_HEADER)
        n = 0
        for p, coord, it, v in self.rows():
            w.writerow((repr(p), coord, it, repr(v)))
            n += 1
        return n


def bifurcation_scan(
    swept: str,
    grid,
    fixed: SystemParams = DEFAULT_SCAN_PARAMS,
    seed=DEFAULT_SCAN_SEED,
    n_iter: int = 1000,
    n_keep: int = 200,
) -> BifurcationScan:
    if swept not in SWEEPABLE:
        raise ValueError(f"swept parameter must be one of {SWEEPABLE}, got {swept!r}")
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    if not 1 <= n_keep <= n_iter:
        raise ValueError("need 1 <= n_keep <= n_iter")
    samples = np.empty((grid.size, n_keep, 3))
    for k, value in enumerate(grid):
        params = fixed.replace(**{swept: float(value)})
        samples[k] = generate_orbit(seed, params, n_iter - n_keep, n_keep).states
    return BifurcationScan(swept, grid, samples, n_iter)


@dataclass(frozen=True)
class SensitivityTrace:
    delta: float
    base_orbit: Orbit
    perturbed_orbit: Orbit

    @property
    def differences(self) -> np.ndarray:
        return np.abs(self.base_orbit.states - self.perturbed_orbit.states)

    @property
    def max_difference(self) -> float:
        return float(self.differences.max())

    def first_exceeding(self, threshold: float) -> int | None:
        """1-based iteration at which some coordinate difference exceeds ``threshold``."""
        hit = np.nonzero(self.differences.max(axis=1) > threshold)[0]
        return int(hit[0]) + 1 if hit.size else None

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iter", "coord", "base", "perturbed", "abs_diff"))
        b, p, d = self.base_orbit.states, self.perturbed_orbit.states, self.differences
        for i in range(len(b)):
            for ci, coord in enumerate("xyz"):
                w.writerow((i + 1, coord, repr(float(b[i, ci])), repr(float(p[i, ci])), repr(float(d[i, ci]))))


def sensitivity_pair(
    seed=DEFAULT_SCAN_SEED,
    delta: float = 1e-16,
    params: SystemParams = DEFAULT_SCAN_PARAMS,
    n_steps: int = 50,
) -> SensitivityTrace:
    if not (math.isfinite(delta) and delta >= 0):
        raise ValueError(f"delta must be finite and non-negative, got {delta!r}")
    other = tuple(float(v) + delta for v in seed)
    base = generate_orbit(seed, params, 0, n_steps)
    pert = generate_orbit(other, params, 0, n_steps)
    return SensitivityTrace(delta, base, pert)


def phase_samples(seed, params: SystemParams, n: int, n_transient: int = DEFAULT_TRANSIENT) -> Orbit:
    return generate_orbit(seed, params, n_transient, n)


def write_orbit_csv(orbit: Orbit, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("iter", "x", "y", "z"))
    first = orbit.transient_discarded + 1
    for i, (x, y, z) in enumerate(orbit.states):
        w.writerow((first + i, repr(float(x)), repr(float(y)), repr(float(z))))
