"""Statistical evaluation of cipher images."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .cipher import KeyMaterial, check_image, encrypt

CHANNELS = ("r", "g", "b")
DIRECTIONS = {"h": (0, 1), "v": (1, 0), "d": (1, 1)}
_DIRECTION_ALIASES = {"horizontal": "h", "vertical": "v", "diagonal": "d"}
DEFAULT_CORRELATION_SAMPLES = 5000

# Key-space figures quoted in reports; neither is measured.
NOMINAL_KEY_SPACE_BITS = 309
DERIVED_KEY_ENTROPY_BITS = 96  # six 16-bit words


class UndefinedCorrelationError(ValueError):
    pass


def _same_shape(c1, c2):
    a, b = np.asarray(c1), np.asarray(c2)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a, b


def histogram(channel) -> np.ndarray:
    a = np.asarray(channel, dtype=np.uint8).ravel()
    return np.bincount(a, minlength=256)


def shannon_entropy(channel) -> float:
    counts = histogram(channel)
    total = counts.sum()
    if total == 0:
        raise ValueError("entropy of an empty channel is undefined")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum()) + 0.0


def _pairs(channel: np.ndarray, direction: str):
    di, dj = DIRECTIONS[direction]
    h, w = channel.shape
    if h - di < 1 or w - dj < 1:
        raise ValueError(f"channel {channel.shape} has no adjacent pair in direction {direction!r}")
    return channel[: h - di, : w - dj], channel[di:, dj:]


def adjacent_correlation(
    channel,
    direction: str = "h",
    n_samples: int | None = DEFAULT_CORRELATION_SAMPLES,
    rng_seed: int = 0,
) -> float:
    """Pearson coefficient of (pixel, neighbour) pairs.

    ``n_samples`` positions are drawn uniformly (with replacement) from the
    valid anchors; ``n_samples=None`` uses every adjacent pair.
    """
    direction = _DIRECTION_ALIASES.get(direction, direction)
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    a = np.asarray(channel)
    if a.ndim != 2:
        raise ValueError("expected a 2-D channel")
    first, second = _pairs(a, direction)
    if n_samples is None:
        u = first.ravel().astype(np.float64)
        v = second.ravel().astype(np.float64)
    else:
        rng = np.random.default_rng(rng_seed)
        rows = rng.integers(0, first.shape[0], n_samples)
        cols = rng.integers(0, first.shape[1], n_samples)
        u = first[rows, cols].astype(np.float64)
        v = second[rows, cols].astype(np.float64)
    du, dv = u - u.mean(), v - v.mean()
    su, sv = (du * du).sum(), (dv * dv).sum()
    if su == 0 or sv == 0:
        raise UndefinedCorrelationError("correlation undefined: a marginal has zero variance")
    return float((du * dv).sum() / np.sqrt(su * sv))


def npcr(c1, c2) -> float:
    a, b = _same_shape(c1, c2)
    return 100.0 * float(np.count_nonzero(a != b)) / a.size


def uaci(c1, c2) -> float:
    a, b = _same_shape(c1, c2)
    diff = np.abs(a.astype(np.int16) - b.astype(np.int16))
    return 100.0 * float(diff.sum()) / (255.0 * a.size)


def diff_image(c1, c2) -> np.ndarray:
    a, b = _same_shape(c1, c2)
    return np.abs(a.astype(np.int16) - b.astype(np.int16)).astype(np.uint8)


def differential_test(
    plain,
    pixel: tuple[int, int] = (0, 0),
    new_value=None,
    fixed_keys: KeyMaterial | None = None,
) -> tuple[float, float]:
    """NPCR/UACI between ciphertexts of ``plain`` and a one-pixel edit of it.

    Each plaintext gets its own derived keys unless ``fixed_keys`` is given.
    ``new_value=None`` flips the lowest bit of the red sample.
    """
    a = check_image(plain)
    i, j = pixel
    if not (0 <= i < a.shape[0] and 0 <= j < a.shape[1]):
        raise IndexError(f"pixel {pixel} outside {a.shape[:2]}")
    edited = a.copy()
    if new_value is None:
        edited[i, j, 0] ^= 1
    else:
        edited[i, j] = np.asarray(new_value, dtype=np.uint8)
    c1 = encrypt(a, fixed_keys)
    c2 = encrypt(edited, fixed_keys)
    return npcr(c1, c2), uaci(c1, c2)


@dataclass
class MetricsReport:
    entropy: dict[str, float]
    correlation: dict[str, dict[str, float]]
    histogram: np.ndarray  # (3, 256)
    npcr: float | None = None
    uaci: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "entropy": dict(self.entropy),
            "correlation": {d: dict(v) for d, v in self.correlation.items()},
            "npcr": self.npcr,
            "uaci": self.uaci,
        }
        out.update(self.extra)
        return out

    def write_histogram_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("channel", "bin", "count"))
        for ci, ch in enumerate(CHANNELS):
            for b in range(256):
                w.writerow((ch, b, int(self.histogram[ci, b])))


def image_metrics(
    img,
    n_samples: int | None = DEFAULT_CORRELATION_SAMPLES,
    rng_seed: int = 0,
) -> MetricsReport:
    a = check_image(img)
    entropy = {ch: shannon_entropy(a[..., ci]) for ci, ch in enumerate(CHANNELS)}
    corr = {
        d: {ch: adjacent_correlation(a[..., ci], d, n_samples, rng_seed) for ci, ch in enumerate(CHANNELS)}
        for d in DIRECTIONS
    }
    hist = np.stack([histogram(a[..., ci]) for ci in range(3)])
    return MetricsReport(entropy, corr, hist)
