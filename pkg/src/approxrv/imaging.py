"""Grayscale sharpening benchmark whose multiplications run through a multiplier circuit.

The filter is unsharp masking, ``S = clamp(2*I - G)``, where ``G`` is the
5x5 binomial blur ``outer([1,4,6,4,1], [1,4,6,4,1]) / 256`` with edge
replication. Every pixel-times-weight product goes through the selected
multiplier circuit; sums, the ``>> 8`` normalisation, the subtraction and
the clamp use exact host arithmetic.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .circuits import MASK32, MULTIPLIER, CircuitRegistry
from .csr import MULCSR, ApproxConfig, decode_csr_fields

KERNEL_TAPS = (1, 4, 6, 4, 1)
KERNEL = np.outer(KERNEL_TAPS, KERNEL_TAPS).astype(np.int64)  # sums to 256
KERNEL_SHIFT = 8
MAX_PIXEL = 255
PSNR_EXACT = math.inf

MulConfig = Union[ApproxConfig, int]


class PgmError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """8-bit grayscale image, ``pixels`` shaped (height, width)."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"pixels must be a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer):
                raise ValueError(f"pixels must be integers, got {px.dtype}")
            if px.min() < 0 or px.max() > MAX_PIXEL:
                raise ValueError("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = px.copy()
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_bytes(cls, width: int, height: int, data: bytes) -> "ImageBuffer":
        if width < 1 or height < 1:
            raise ValueError("width and height must be positive")
        if len(data) != width * height:
            raise ValueError(f"expected {width * height} samples, got {len(data)}")
        return cls(np.frombuffer(data, dtype=np.uint8).reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def __eq__(self, other):
        if not isinstance(other, ImageBuffer):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


def _as_config(mul_config: MulConfig) -> ApproxConfig:
    return decode_csr_fields(mul_config) if isinstance(mul_config, int) else mul_config


def _check_size(img: ImageBuffer) -> None:
    if img.width < 5 or img.height < 5:
        raise ValueError(f"sharpening needs at least a 5x5 image, got {img.width}x{img.height}")


def _windows(img: ImageBuffer) -> np.ndarray:
    """(h, w, 5, 5) view of the edge-replicated neighbourhood of every pixel."""
    padded = np.pad(img.pixels.astype(np.int64), 2, mode="edge")
    return np.lib.stride_tricks.sliding_window_view(padded, (5, 5))


def _finish(img: ImageBuffer, acc: np.ndarray) -> ImageBuffer:
    blurred = acc >> KERNEL_SHIFT
    out = 2 * img.pixels.astype(np.int64) - blurred
    return ImageBuffer(np.clip(out, 0, MAX_PIXEL).astype(np.uint8))


def sharpen_reference(img: ImageBuffer) -> ImageBuffer:
    """Same filter with native integer products."""
    _check_size(img)
    acc = np.einsum("hwij,ij->hw", _windows(img), KERNEL)
    return _finish(img, acc)


def sharpen(img: ImageBuffer, mul_config: MulConfig = 0, registry: Optional[CircuitRegistry] = None,
            guest: bool = False) -> ImageBuffer:
    """Sharpen ``img`` with products from the multiplier selected by ``mul_config``.

    ``mul_config`` is a decoded :class:`ApproxConfig` or a raw mulcsr word.
    With ``guest=True`` the filter runs as a guest program on the simulator
    instead of calling the circuit directly; the result is identical but much
    slower.
    """
    _check_size(img)
    registry = registry or CircuitRegistry()
    cfg = _as_config(mul_config)
    if guest:
        return _sharpen_on_guest(img, cfg, registry)
    slot, circuit = registry.select(MULTIPLIER, cfg)
    ef, trunc = (cfg.error_field, cfg.truncation) if cfg.approx_enable else (0, 0)
    win = _windows(img)
    h, w = img.height, img.width
    pixels = win.reshape(-1).astype(np.uint64)
    weights = np.broadcast_to(KERNEL, win.shape).reshape(-1).astype(np.uint64)
    if circuit.evaluate_batch is not None:
        products = circuit.evaluate_batch(pixels, weights, "uu", ef, trunc)
    else:
        products = np.fromiter((circuit.evaluate(int(p), int(k), "uu", ef, trunc)
                                for p, k in zip(pixels, weights)), dtype=np.uint64, count=pixels.size)
    # a MUL keeps the low word; reinterpret as a signed 32-bit accumuland
    low = (np.asarray(products, dtype=np.uint64) & np.uint64(MASK32)).astype(np.int64)
    low = np.where(low >= 1 << 31, low - (1 << 32), low)
    acc = low.reshape(h, w, 25).sum(axis=2)
    return _finish(img, acc)


def mse(x: ImageBuffer, y: ImageBuffer) -> float:
    if x.pixels.shape != y.pixels.shape:
        raise ValueError(f"image dimensions differ: {x.width}x{x.height} vs {y.width}x{y.height}")
    diff = x.pixels.astype(np.int64) - y.pixels.astype(np.int64)
    return int(np.sum(diff * diff)) / diff.size


def psnr(mse_value: float) -> float:
    """PSNR in dB for 8-bit samples; ``math.inf`` when the images are identical."""
    if mse_value < 0:
        raise ValueError(f"MSE cannot be negative, got {mse_value}")
    if mse_value == 0:
        return PSNR_EXACT
    return 10 * math.log10(MAX_PIXEL ** 2 / mse_value)


# ---------------------------------------------------------------------------
# PGM

def _pgm_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First ``count`` header tokens (comments skipped) and the payload offset."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise PgmError("truncated PGM header")
        start = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= n or not data[pos:pos + 1].isspace():
        raise PgmError("truncated PGM header")
    return tokens, pos + 1


def parse_pgm(data: bytes) -> ImageBuffer:
    if data[:2] != b"P5":
        if data[:2] == b"P2":
            raise PgmError("binary PGM (P5) required; got ASCII P2")
        raise PgmError("binary PGM (P5) required; not a PGM file")
    tokens, offset = _pgm_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise PgmError(f"malformed PGM header: {b' '.join(tokens)!r}") from None
    if width < 1 or height < 1:
        raise PgmError(f"invalid PGM dimensions {width}x{height}")
    if maxval != MAX_PIXEL:
        raise PgmError(f"8-bit samples required (maxval 255), got maxval {maxval}")
    payload = data[offset:offset + width * height]
    if len(payload) < width * height:
        raise PgmError(f"truncated PGM payload: expected {width * height} bytes, got {len(payload)}")
    return ImageBuffer.from_bytes(width, height, payload)


def load_pgm(path: Union[str, os.PathLike]) -> ImageBuffer:
    with open(path, "rb") as fh:
        return parse_pgm(fh.read())


def save_pgm(img: ImageBuffer, path: Union[str, os.PathLike]) -> None:
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def synthetic_image(width: int = 64, height: int = 64) -> ImageBuffer:
    """Diagonal gradient with a superimposed grid of bright and dark squares."""
    y, x = np.mgrid[0:height, 0:width]
    base = (x + y) * 200 // max(width + height - 2, 1) + 20
    cell = max(min(width, height) // 8, 1)
    squares = ((x // cell + y // cell) % 2) * 2 - 1
    inner = (x % cell >= cell // 4) & (x % cell < 3 * cell // 4) & (y % cell >= cell // 4) & (y % cell < 3 * cell // 4)
    img = base + np.where(inner, 30 * squares, 0)
    return ImageBuffer(np.clip(img, 0, MAX_PIXEL).astype(np.uint8))


# ---------------------------------------------------------------------------
# guest-program variant

_GUEST_CODE = 0x0
_GUEST_IMAGE = 0x10000


def _guest_program(width: int, height: int, image_base: int, out_base: int):
    from .encoding import ProgramBuilder

    pw = width + 4
    p = ProgramBuilder()
    p.li("s0", image_base)
    p.li("s1", out_base)
    p.li("s3", height)
    p.label("row")
    p.li("s2", width)
    p.label("col")
    p.emit("addi", rd="a0", rs1="zero", imm=0)
    for ky in range(5):
        for kx in range(5):
            p.emit("lbu", rd="t0", rs1="s0", imm=ky * pw + kx)
            p.emit("addi", rd="t1", rs1="zero", imm=int(KERNEL[ky, kx]))
            p.emit("mul", rd="t0", rs1="t0", rs2="t1")
            p.emit("add", rd="a0", rs1="a0", rs2="t0")
    p.emit("srai", rd="a0", rs1="a0", imm=KERNEL_SHIFT)
    p.emit("lbu", rd="t2", rs1="s0", imm=2 * pw + 2)
    p.emit("add", rd="t2", rs1="t2", rs2="t2")
    p.emit("sub", rd="t2", rs1="t2", rs2="a0")
    p.emit("bge", rs1="t2", rs2="zero", imm="not_negative")
    p.emit("addi", rd="t2", rs1="zero", imm=0)
    p.label("not_negative")
    p.emit("addi", rd="t3", rs1="zero", imm=MAX_PIXEL)
    p.emit("bge", rs1="t3", rs2="t2", imm="in_range")
    p.emit("addi", rd="t2", rs1="zero", imm=MAX_PIXEL)
    p.label("in_range")
    p.emit("sb", rs1="s1", rs2="t2", imm=0)
    p.emit("addi", rd="s0", rs1="s0", imm=1)
    p.emit("addi", rd="s1", rs1="s1", imm=1)
    p.emit("addi", rd="s2", rs1="s2", imm=-1)
    p.emit("bne", rs1="s2", rs2="zero", imm="col")
    p.emit("addi", rd="s0", rs1="s0", imm=4)
    p.emit("addi", rd="s3", rs1="s3", imm=-1)
    p.emit("bne", rs1="s3", rs2="zero", imm="row")
    p.emit("addi", rd="a0", rs1="zero", imm=0)
    p.li("a7", 93)
    p.emit("ecall")
    return p


def _sharpen_on_guest(img: ImageBuffer, cfg: ApproxConfig, registry: CircuitRegistry) -> ImageBuffer:
    from .isa import CoreConfig, Machine, MachineState

    if img.width + 4 > 400:
        raise ValueError("guest-mode sharpening supports widths up to 396 pixels")
    padded = np.pad(img.pixels, 2, mode="edge")
    out_base = _GUEST_IMAGE + padded.size
    config = CoreConfig(memory_size=out_base + img.width * img.height + 0x1000)
    state = MachineState.for_config(config)
    state.csrs[MULCSR] = cfg.encode()
    machine = Machine(config, registry, state, record_trace=False)
    machine.load_bytes(_GUEST_CODE, _guest_program(img.width, img.height, _GUEST_IMAGE, out_base).build())
    machine.load_bytes(_GUEST_IMAGE, padded.tobytes())
    report = machine.run()
    if report.status != "exit" or report.exit_code != 0:
        raise RuntimeError(f"guest sharpening did not finish cleanly: {report.to_dict()}")
    data = bytes(state.mem[out_base:out_base + img.width * img.height])
    return ImageBuffer.from_bytes(img.width, img.height, data)


# ---------------------------------------------------------------------------
# benchmark

@dataclass(frozen=True)
class SharpenResult:
    label: str
    raw: Optional[int]
    level: Optional[int]
    mse: float
    psnr_db: float
    image: ImageBuffer


def sweep_sharpen(img: ImageBuffer, error_fields, registry: Optional[CircuitRegistry] = None,
                  slot: int = 1, include_exact: bool = True) -> list[SharpenResult]:
    """Sharpen once per demo-multiplier error field and score against the exact reference."""
    registry = registry or CircuitRegistry()
    reference = sharpen_reference(img)
    results = []
    if include_exact:
        out = sharpen(img, 0, registry)
        m = mse(out, reference)
        results.append(SharpenResult("exact", None, None, m, psnr(m), out))
    circuit = registry.get(MULTIPLIER, slot)
    for ef in error_fields:
        cfg = ApproxConfig(approx_enable=1, circuit_select=slot, error_field=ef)
        out = sharpen(img, cfg, registry)
        m = mse(out, reference)
        results.append(SharpenResult(str(circuit.level(ef)), ef, circuit.level(ef), m, psnr(m), out))
    return results
