"""Raster file formats: PFM for float payloads, PNG for 8-bit color/masks.

PFM files are grayscale ``Pf``, scale -1.0 (little-endian), rows stored
bottom-to-top per the format convention. PNG is 8-bit sRGB via Pillow; float
images in [0, 1] are quantized with round(v * 255) only at this boundary.
Writes go through a temp file + atomic rename so readers never see partials.
"""

from __future__ import annotations

import os
import tempfile

import numpy as np
from PIL import Image

from .errors import CorruptMember, IoFailure


def write_pfm(path, data: np.ndarray) -> None:
    data = np.asarray(data, dtype=np.float32)
    if data.ndim != 2:
        raise ValueError("PFM writer handles grayscale (2D) data only")
    h, w = data.shape

    def _write(fh):
        fh.write(b"Pf\n")
        fh.write(f"{w} {h}\n".encode("ascii"))
        fh.write(b"-1.0\n")
        fh.write(data[::-1].astype("<f4").tobytes())

    atomic_write_bytes(path, _write)


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise CorruptMember(str(path), f"not a PFM file (header {header!r})")
        if header == b"PF":
            raise CorruptMember(str(path), "color PFM not supported, expected grayscale Pf")
        dims = fh.readline().split()
        if len(dims) != 2:
            raise CorruptMember(str(path), "malformed PFM dimensions")
        w, h = int(dims[0]), int(dims[1])
        scale = float(fh.readline().strip())
        endian = "<" if scale < 0 else ">"
        raw = fh.read(w * h * 4)
        if len(raw) != w * h * 4:
            raise CorruptMember(str(path), "truncated PFM payload")
        data = np.frombuffer(raw, dtype=endian + "f4").reshape(h, w)
    return data[::-1].astype(float)


def write_png(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=float)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    if q.ndim == 2:
        pil = Image.fromarray(q, mode="L")
    elif q.ndim == 3 and q.shape[2] == 3:
        pil = Image.fromarray(q, mode="RGB")
    else:
        raise ValueError(f"cannot write image of shape {img.shape}")

    def _write(fh):
        pil.save(fh, format="PNG")

    atomic_write_bytes(path, _write)


def read_png(path) -> np.ndarray:
    pil = Image.open(path)
    if pil.mode in ("L", "I;16", "I"):
        arr = np.asarray(pil.convert("L"), dtype=float) / 255.0
    else:
        arr = np.asarray(pil.convert("RGB"), dtype=float) / 255.0
    return arr


def png_bytes(img: np.ndarray) -> bytes:
    """Deterministic in-memory PNG encoding of a float image."""
    import io

    img = np.asarray(img, dtype=float)
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    pil = Image.fromarray(q, mode="L" if q.ndim == 2 else "RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def atomic_write_bytes(path, writer) -> None:
    """Run writer(filehandle) against a temp file, then rename over path."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    except OSError as exc:
        raise IoFailure(f"cannot create temp file in {directory}: {exc}") from exc
    try:
        with os.fdopen(fd, "wb") as fh:
            writer(fh)
        os.replace(tmp, path)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise IoFailure(f"failed writing {path}: {exc}") from exc
