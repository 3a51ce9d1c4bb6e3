"""Image workload: grayscale conversion, storage through the approximate
array, and PSNR scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .driver import DriverConfig, QualityLevel
from .engine import PathTable, WriteConfig, write_bits
from .errors import ParseError, UsageError

EXACT = "exact"


@dataclass(frozen=True)
class Image:
    width: int
    height: int
    channels: int
    samples: np.ndarray  # uint8, shape (height, width, channels)

    def __post_init__(self):
        if self.channels not in (1, 3):
            raise UsageError("images have 1 or 3 channels")
        s = np.asarray(self.samples)
        if s.size != self.width * self.height * self.channels:
            raise UsageError("sample count does not match the image dimensions")
        if s.dtype != np.uint8:
            if s.size and (s.min() < 0 or s.max() > 255):
                raise UsageError("samples must lie in [0, 255]")
            s = s.astype(np.uint8)
        object.__setattr__(self, "samples", s.reshape(self.height, self.width, self.channels))

    @classmethod
    def from_array(cls, arr) -> "Image":
        a = np.asarray(arr)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise UsageError("expected an (h, w) or (h, w, c) array")
        return cls(a.shape[1], a.shape[0], a.shape[2], a)

    def __eq__(self, other):
        if not isinstance(other, Image):
            return NotImplemented
        return (
            (self.width, self.height, self.channels) == (other.width, other.height, other.channels)
            and np.array_equal(self.samples, other.samples)
        )


def _pnm_tokens(data: bytes, count: int, pos: int):
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ParseError("truncated image header")
        tokens.append(data[start:pos])
    return tokens, pos


def decode_pnm(data: bytes) -> Image:
    """Binary PGM (P5) or PPM (P6) with maxval 255."""
    (magic,), pos = _pnm_tokens(data, 1, 0)
    if magic not in (b"P5", b"P6"):
        raise ParseError(f"unsupported image format {magic[:2]!r}, expected P5 or P6")
    try:
        (w, h, maxval), pos = _pnm_tokens(data, 3, pos)
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise ParseError("non-numeric image header") from exc
    if maxval != 255:
        raise ParseError(f"maxval {maxval} unsupported, expected 255")
    if w <= 0 or h <= 0:
        raise ParseError("image dimensions must be positive")
    pos += 1  # single whitespace byte after the header
    channels = 1 if magic == b"P5" else 3
    size = w * h * channels
    if pos + size > len(data):
        raise ParseError("image data shorter than the header declares")
    body = np.frombuffer(data, dtype=np.uint8, count=size, offset=pos)
    return Image(w, h, channels, body.copy())


def encode_pnm(img: Image) -> bytes:
    magic = b"P5" if img.channels == 1 else b"P6"
    return magic + f"\n{img.width} {img.height}\n255\n".encode("ascii") + img.samples.tobytes()


def read_image(path: Union[str, Path]) -> Image:
    return decode_pnm(Path(path).read_bytes())


def write_image(path: Union[str, Path], img: Image) -> None:
    Path(path).write_bytes(encode_pnm(img))


def grayscale(img: Image) -> Image:
    if img.channels != 3:
        raise UsageError("grayscale conversion needs a 3-channel image")
    total = img.samples.astype(np.uint16).sum(axis=2)
    return Image(img.width, img.height, 1, (total // 3).astype(np.uint8))


def pack_words(samples: np.ndarray) -> np.ndarray:
    """Bytes to a (n_words, 64) bit matrix, little-endian, zero padded."""
    flat = np.asarray(samples, dtype=np.uint8).reshape(-1)
    pad = (-flat.size) % 8
    if pad:
        flat = np.concatenate([flat, np.zeros(pad, dtype=np.uint8)])
    return np.unpackbits(flat.reshape(-1, 8), axis=1, bitorder="little")


def unpack_words(bits: np.ndarray, n_bytes: int) -> np.ndarray:
    return np.packbits(bits, axis=1, bitorder="little").reshape(-1)[:n_bytes]


@dataclass(frozen=True)
class QualityReport:
    level: QualityLevel
    psnr_db: Union[float, str]
    flipped_bits: int
    energy: float
    seed: int
    attempted_bits: int = 0

    def csv_row(self) -> str:
        psnr = self.psnr_db if self.psnr_db == EXACT else f"{self.psnr_db:.4f}"
        return f"{self.level.tag},{psnr},{self.flipped_bits},{self.energy * 1e12:.6f}"


QUALITY_CSV_HEADER = "level,psnr_db,flipped_bits,energy_pj"


def store_through_memory(
    img: Image,
    level: QualityLevel,
    driver: DriverConfig,
    mtj,
    seed: int,
    *,
    write: WriteConfig = WriteConfig(),
    rng=None,
):
    """Write the image into a zeroed array at ``level`` and read it back."""
    rng = rng if rng is not None else np.random.default_rng(np.random.SeedSequence([seed, 0]))
    n_bytes = img.samples.size
    new = pack_words(img.samples)
    old = np.zeros_like(new)
    res = write_bits(old, new, PathTable(level, driver, mtj, write), rng)
    out = Image(img.width, img.height, img.channels, unpack_words(res.bits, n_bytes))
    flipped = int(np.count_nonzero(res.bits != new))
    report = QualityReport(
        level=level,
        psnr_db=psnr(img, out),
        flipped_bits=flipped,
        energy=math.fsum(res.energy.reshape(-1)),
        seed=seed,
        attempted_bits=int(res.attempted.sum()),
    )
    return out, report


def psnr(ref: Image, test: Image) -> Union[float, str]:
    if (ref.width, ref.height, ref.channels) != (test.width, test.height, test.channels):
        raise UsageError("PSNR needs images of identical dimensions")
    diff = ref.samples.astype(np.int64) - test.samples.astype(np.int64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return EXACT
    return 10.0 * math.log10(255.0**2 / mse)


def synthetic_image(width: int, height: int, seed: Optional[int] = 0) -> Image:
    """Smooth colour test pattern with mild noise (3 channels)."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:height, 0:width]
    r = 127.5 * (1 + np.sin(x / max(width, 1) * 2 * np.pi))
    g = 255.0 * y / max(height - 1, 1)
    b = 127.5 * (1 + np.cos((x + y) / max(width + height, 1) * 4 * np.pi))
    rgb = np.stack([r, g, b], axis=2) + rng.normal(0, 8, size=(height, width, 3))
    return Image(width, height, 3, np.clip(np.rint(rgb), 0, 255).astype(np.uint8))
