"""Seeded generation of measurement matrices, sparse signals and instances.

Every generator is a pure function of its dimensions and an
:class:`RngStream`.  Randomness comes from numpy's Philox counter-based
generator keyed by ``(master_seed, stream_id)``; normal variates are the
inverse normal CDF of one 53-bit uniform each, so the number of raw draws
never depends on the values drawn.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import ndtri

from .linalg import as_matrix

SIGNAL_KINDS = ("gaussian", "cars", "custom")

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngStream:
    """An independent, reproducible random stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def child(self, tag: int) -> "RngStream":
        """Derive a sub-stream; distinct tags give independent streams."""
        return RngStream(self.master_seed, _splitmix64(self.stream_id ^ _splitmix64(tag)))

    def raw(self, size: int) -> np.ndarray:
        bitgen = np.random.Philox(key=np.array([self.master_seed, self.stream_id], dtype=np.uint64))
        return bitgen.random_raw(size).astype(np.uint64, copy=False)


def _uniform_open(raw: np.ndarray) -> np.ndarray:
    # (k + 1/2) 2^-53 is never 0, 1 or 1/2
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def standard_normal(rng: RngStream, size: int) -> np.ndarray:
    return ndtri(_uniform_open(rng.raw(size)))


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    support: np.ndarray
    kind: str = "custom"

    @property
    def sparsity(self) -> int:
        return int(self.support.shape[0])

    @property
    def xi(self) -> float:
        """Smallest nonzero magnitude."""
        return float(np.abs(self.values[self.support]).min())

    @classmethod
    def from_vector(cls, values, kind: str = "custom") -> "SparseSignal":
        values = np.asarray(values, dtype=np.float64).copy()
        return cls(values, np.flatnonzero(values).astype(np.int64), kind)


@dataclass(frozen=True)
class MeasurementInstance:
    phi: np.ndarray
    y: np.ndarray
    truth: SparseSignal | None = None
    noise: np.ndarray | None = None
    seed: int = 0
    stream_id: int = 0
    noise_level: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return self.phi.shape[0]

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    def digest(self) -> str:
        """SHA-256 over the matrix and measurement bytes."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.phi).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()


def gaussian_matrix(m: int, n: int, rng: RngStream) -> np.ndarray:
    """``m x n`` matrix with i.i.d. N(0, 1/m) entries, drawn row-major."""
    if m <= 0 or n <= 0:
        raise ValueError("dimensions must be positive")
    if m >= n:
        raise ValueError(f"undersampling requires m < n, got m={m}, n={n}")
    return (standard_normal(rng, m * n) / np.sqrt(m)).reshape(m, n)


def random_support(n: int, s: int, rng: RngStream) -> np.ndarray:
    """Uniform size-``s`` subset of ``range(n)`` by partial Fisher-Yates."""
    u = _uniform_open(rng.raw(s))
    perm = np.arange(n, dtype=np.int64)
    for i in range(s):
        j = i + int(u[i] * (n - i))
        perm[i], perm[j] = perm[j], perm[i]
    return np.sort(perm[:s])


def sparse_signal(n: int, s: int, kind: str, rng: RngStream) -> SparseSignal:
    """Length-``n`` signal with ``s`` nonzeros on a uniformly random support.

    ``gaussian`` draws each nonzero from N(0, 1); ``cars`` draws each from
    {+1, -1} with equal probability.
    """
    if s < 1 or s > n:
        raise ValueError(f"sparsity must lie in [1, {n}], got {s}")
    if kind not in ("gaussian", "cars"):
        raise ValueError(f"unknown signal kind {kind!r}")
    support = random_support(n, s, rng.child(0))
    values = np.zeros(n)
    if kind == "gaussian":
        values[support] = standard_normal(rng.child(1), s)
    else:
        bits = rng.child(1).raw(s) >> np.uint64(63)
        values[support] = 1.0 - 2.0 * bits.astype(np.float64)
    return SparseSignal(values, support, kind)


def build_instance(m: int, n: int, s: int, kind: str, noise_level: float,
                   rng: RngStream) -> MeasurementInstance:
    """Fresh matrix, signal and (optional) noise from independent sub-streams.

    The noise is i.i.d. normal rescaled so that ``|e| = noise_level * |phi x|``.
    """
    if s > m:
        raise ValueError(f"sparsity {s} exceeds the number of measurements {m}")
    if noise_level < 0:
        raise ValueError("noise_level must be nonnegative")
    phi = gaussian_matrix(m, n, rng.child(0))
    signal = sparse_signal(n, s, kind, rng.child(1))
    clean = phi[:, signal.support] @ signal.values[signal.support]
    noise = np.zeros(m)
    if noise_level > 0:
        g = standard_normal(rng.child(2), m)
        noise = g * (noise_level * np.linalg.norm(clean) / np.linalg.norm(g))
    return MeasurementInstance(phi, clean + noise, signal, noise, rng.master_seed,
                               rng.stream_id, float(noise_level))


def make_instance(phi, x=None, noise=None, y=None) -> MeasurementInstance:
    """Wrap user data; ``y`` defaults to ``phi @ x + noise``."""
    phi = as_matrix(phi)
    truth = None if x is None else SparseSignal.from_vector(x)
    noise = np.zeros(phi.shape[0]) if noise is None else np.asarray(noise, dtype=np.float64)
    if y is None:
        if truth is None:
            raise ValueError("need either y or x")
        y = phi @ truth.values + noise
    return MeasurementInstance(phi, np.asarray(y, dtype=np.float64), truth, noise)


# -- container file ---------------------------------------------------------
#
# magic (8 bytes) | header length (uint32 LE) | UTF-8 JSON header |
# float64 LE blocks, row-major: phi (m*n), y (m), x (n), e (m)

MAGIC = b"PLABINST"
FORMAT_VERSION = 1


def save_instance(inst: MeasurementInstance, path) -> None:
    m, n = inst.phi.shape
    header = {
        "format_version": FORMAT_VERSION,
        "m": m,
        "n": n,
        "s": inst.truth.sparsity if inst.truth is not None else None,
        "kind": inst.truth.kind if inst.truth is not None else None,
        "seed": int(inst.seed),
        "stream_id": int(inst.stream_id),
        "noise_level": float(inst.noise_level),
        "has_truth": inst.truth is not None,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    x = inst.truth.values if inst.truth is not None else np.zeros(n)
    e = inst.noise if inst.noise is not None else np.zeros(m)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for block in (inst.phi, inst.y, x, e):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_instance(path) -> MeasurementInstance:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ValueError(f"{path}: not an instance container")
    (hlen,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    m, n = int(header["m"]), int(header["n"])
    body = np.frombuffer(data, dtype="<f8", offset=12 + hlen)
    expected = m * n + m + n + m
    if body.shape[0] != expected:
        raise ValueError(f"{path}: expected {expected} floats, found {body.shape[0]}")
    phi = body[: m * n].reshape(m, n).astype(np.float64)
    y = body[m * n: m * n + m].astype(np.float64)
    x = body[m * n + m: m * n + m + n].astype(np.float64)
    e = body[m * n + m + n:].astype(np.float64)
    truth = None
    if header.get("has_truth", True):
        truth = SparseSignal(x, np.flatnonzero(x).astype(np.int64), header.get("kind") or "custom")
    return MeasurementInstance(phi, y, truth, e, int(header.get("seed", 0)),
                               int(header.get("stream_id", 0)),
                               float(header.get("noise_level", 0.0)), header)
