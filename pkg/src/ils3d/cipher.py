"""Plaintext-keyed one-round colour image cipher driven by the 3D-ILS map."""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .chaos import C0, DEFAULT_TRANSIENT, SystemParams, SystemState, generate_orbit

MOD16 = 1 << 16
_HEX64 = re.compile(r"[0-9a-fA-F]{64}")


class KeyFormatError(ValueError):
    pass


def check_image(img) -> np.ndarray:
    """Validate an h x w x 3 uint8 RGB array and return it as such."""
    a = np.asarray(img)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected an h x w x 3 image, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    if a.dtype != np.uint8:
        raise ValueError(f"expected uint8 samples, got {a.dtype}")
    return a


# ---------------------------------------------------------------------------
# key derivation


@dataclass(frozen=True)
class KeyMaterial:
    hash_hex: str
    t: tuple[int, ...]
    k: tuple[int, ...]
    k_norm: tuple[float, ...]
    alpha: float
    r: float
    mu: float
    x0: float
    y0: float
    z0: float

    @property
    def params(self) -> SystemParams:
        return SystemParams(self.alpha, self.r, self.mu, C0)

    @property
    def seed(self) -> SystemState:
        return SystemState(self.x0, self.y0, self.z0)


def parse_key_hex(text: str) -> bytes:
    """Key-file text: 64 hex characters, whitespace ignored, any case."""
    compact = "".join(text.split())
    if not _HEX64.fullmatch(compact):
        raise KeyFormatError("key must be exactly 64 hexadecimal characters")
    return bytes.fromhex(compact)


def keys_from_hash(digest: bytes | str) -> KeyMaterial:
    """Expand a 256-bit digest into the six map parameters.

    Accepts raw bytes or hex text, so externally supplied keys bypass the
    plaintext hash.
    """
    if isinstance(digest, str):
        digest = parse_key_hex(digest)
    if len(digest) != 32:
        raise KeyFormatError(f"digest must be 32 bytes, got {len(digest)}")
    t = [int.from_bytes(digest[2 * j: 2 * j + 2], "big") for j in range(16)]
    t.append((t[0] & t[1]) ^ t[2])
    t.append((t[3] & t[4]) ^ t[5])
    k = tuple(sum(t[3 * i: 3 * i + 3]) % MOD16 for i in range(6))
    kn = tuple(v / MOD16 for v in k)
    return KeyMaterial(
        hash_hex=digest.hex(),
        t=tuple(t),
        k=k,
        k_norm=kn,
        alpha=3.0 + 3.0 * kn[0],
        r=3.7 + 0.3 * kn[1],
        mu=5.0 + 5.0 * kn[2],
        x0=kn[3],
        y0=kn[4],
        z0=kn[5],
    )


def image_digest(img) -> bytes:
    """SHA-256 of the decoded samples, row-major with RGB interleaved."""
    a = check_image(img)
    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).digest()


def derive_keys(plaintext) -> KeyMaterial:
    return keys_from_hash(image_digest(plaintext))


# ---------------------------------------------------------------------------
# nibble mixing


def bit_mix(img) -> np.ndarray:
    """Route nibbles across channels: (G_L|B_H, B_L|R_H, R_L|G_H), high nibble first."""
    a = check_image(img)
    R, G, B = a[..., 0], a[..., 1], a[..., 2]
    out = np.empty_like(a)
    out[..., 0] = ((G & 0x0F) << 4) | (B >> 4)
    out[..., 1] = ((B & 0x0F) << 4) | (R >> 4)
    out[..., 2] = ((R & 0x0F) << 4) | (G >> 4)
    return out


def bit_unmix(img) -> np.ndarray:
    a = check_image(img)
    Re, Ge, Be = a[..., 0], a[..., 1], a[..., 2]
    out = np.empty_like(a)
    out[..., 0] = ((Ge & 0x0F) << 4) | (Be >> 4)
    out[..., 1] = ((Be & 0x0F) << 4) | (Re >> 4)
    out[..., 2] = ((Re & 0x0F) << 4) | (Ge >> 4)
    return out


# ---------------------------------------------------------------------------
# keystream, permutation, diffusion


@dataclass(frozen=True)
class KeystreamBundle:
    """``W`` is 0-based: ``U[W]`` is non-decreasing."""

    n: int
    U: np.ndarray
    W: np.ndarray
    V: np.ndarray


def keystream_from_sequence(U) -> KeystreamBundle:
    U = np.asarray(U, dtype=np.float64).ravel()
    if U.size < 3 or U.size % 3:
        raise ValueError("chaotic sequence length must be a positive multiple of 3")
    W = np.argsort(U, kind="stable")
    V = (np.floor(10000.0 * U).astype(np.int64) & 255).astype(np.uint8)
    return KeystreamBundle(U.size // 3, U, W, V)


def make_keystream(keys: KeyMaterial, n: int, n_transient: int = DEFAULT_TRANSIENT) -> KeystreamBundle:
    if n < 1:
        raise ValueError("pixel count must be >= 1")
    orbit = generate_orbit(keys.seed, keys.params, n_transient, n)
    U = np.concatenate([orbit.x, orbit.y, orbit.z])
    return keystream_from_sequence(U)


def diffuse(P, V) -> np.ndarray:
    """Forward XOR chain over the permuted samples ``P = R[W]``."""
    P = [int(v) for v in P]
    V = [int(v) for v in V]
    m = len(P)
    if m < 3 or len(V) != m:
        raise ValueError("need at least 3 samples and a matching keystream")
    D = [0] * m
    last, second_last = P[-1], P[-2]
    D[0] = P[0] ^ last ^ second_last ^ V[0]
    D[1] = P[1] ^ D[0] ^ last ^ V[1]
    d2, d1 = D[0], D[1]
    for i in range(2, m):
        d = P[i] ^ d1 ^ d2 ^ V[i]
        D[i] = d
        d2, d1 = d1, d
    return np.array(D, dtype=np.uint8)


def undiffuse(D, V) -> np.ndarray:
    """Inverse of :func:`diffuse`; tail first, then the two seed positions."""
    D = np.asarray(D, dtype=np.uint8)
    V = np.asarray(V, dtype=np.uint8)
    m = D.size
    if m < 3 or V.size != m:
        raise ValueError("need at least 3 samples and a matching keystream")
    P = np.empty(m, dtype=np.uint8)
    P[2:] = D[2:] ^ D[1:-1] ^ D[:-2] ^ V[2:]
    P[1] = D[1] ^ D[0] ^ P[-1] ^ V[1]
    P[0] = D[0] ^ P[-1] ^ P[-2] ^ V[0]
    return P


def encrypt_with_keystream(plain, ks: KeystreamBundle) -> np.ndarray:
    a = check_image(plain)
    if a.shape[0] * a.shape[1] != ks.n:
        raise ValueError("keystream length does not match image size")
    R = bit_mix(a).reshape(-1)
    return diffuse(R[ks.W], ks.V).reshape(a.shape)


def decrypt_with_keystream(cipher, ks: KeystreamBundle) -> np.ndarray:
    c = check_image(cipher)
    if c.shape[0] * c.shape[1] != ks.n:
        raise ValueError("keystream length does not match image size")
    R = np.empty(3 * ks.n, dtype=np.uint8)
    R[ks.W] = undiffuse(c.reshape(-1), ks.V)
    return bit_unmix(R.reshape(c.shape))


def encrypt(plain, keys: KeyMaterial | None = None, n_transient: int = DEFAULT_TRANSIENT) -> np.ndarray:
    """Encrypt; with ``keys=None`` the keys are derived from ``plain`` itself."""
    a = check_image(plain)
    if keys is None:
        keys = derive_keys(a)
    ks = make_keystream(keys, a.shape[0] * a.shape[1], n_transient)
    return encrypt_with_keystream(a, ks)


def decrypt(cipher, keys: KeyMaterial, n_transient: int = DEFAULT_TRANSIENT) -> np.ndarray:
    c = check_image(cipher)
    ks = make_keystream(keys, c.shape[0] * c.shape[1], n_transient)
    return decrypt_with_keystream(c, ks)
