"""Image quality metrics and report aggregation.

PSNR and SSIM operate on float images in [0, 1] (peak 1.0). SSIM uses the
canonical 11x11 Gaussian window with sigma 1.5 and K = (0.01, 0.03), computed
on luma, over windows fully inside the image. The identity score is cosine
similarity between externally computed feature embeddings (higher is better);
LPIPS is never computed here, only ingested from sidecar files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyMask,
    EmptyReport,
    LengthMismatch,
    TooSmall,
    ZeroVector,
)


def psnr(a: np.ndarray, b: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB; inf for identical inputs.

    With a mask, only pixels with weight > 0.5 enter the mean squared error.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch("psnr", f"{a.shape} vs {b.shape}")
    se = (a - b) ** 2
    if mask is not None:
        mask = np.asarray(mask, dtype=float)
        if mask.shape != a.shape[:2]:
            raise DimensionMismatch("mask", f"{mask.shape} vs {a.shape[:2]}")
        inc = mask > 0.5
        if not inc.any():
            raise EmptyMask("mask selects no pixels")
        se = se[inc]
    mse = se.mean()
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def _luma(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return img
    return img[:, :, 0] * 0.299 + img[:, :, 1] * 0.587 + img[:, :, 2] * 0.114


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = size // 2
    x = np.arange(-half, half + 1, dtype=float)
    g = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    win = np.outer(g, g)
    return win / win.sum()

_SSIM_WIN = _gaussian_window()


def _window_means(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    """Windowed weighted means over fully interior positions ('valid')."""
    k = win.shape[0]
    h, w = img.shape
    out = np.zeros((h - k + 1, w - k + 1))
    for i in range(k):
        for j in range(k):
            out += win[i, j] * img[i:i + h - k + 1, j:j + w - k + 1]
    return out


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local structural similarity on luma in [-1, 1]."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch("ssim", f"{a.shape} vs {b.shape}")
    x = _luma(a)
    y = _luma(b)
    if min(x.shape) < 11:
        raise TooSmall(f"ssim needs min side >= 11, got {x.shape}")
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    mu_x = _window_means(x, _SSIM_WIN)
    mu_y = _window_means(y, _SSIM_WIN)
    var_x = _window_means(x * x, _SSIM_WIN) - mu_x ** 2
    var_y = _window_means(y * y, _SSIM_WIN) - mu_y ** 2
    cov = _window_means(x * y, _SSIM_WIN) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float((num / den).mean())


def id_score(f1: np.ndarray, f2: np.ndarray) -> float:
    """Cosine similarity between identity-embedding vectors."""
    f1 = np.asarray(f1, dtype=float).ravel()
    f2 = np.asarray(f2, dtype=float).ravel()
    if f1.shape != f2.shape:
        raise LengthMismatch(f"{f1.shape} vs {f2.shape}")
    n1 = np.linalg.norm(f1)
    n2 = np.linalg.norm(f2)
    if n1 == 0 or n2 == 0:
        raise ZeroVector("feature vector has zero norm")
    return float(f1 @ f2 / (n1 * n2))


@dataclass
class MetricRow:
    name: str
    psnr_db: float
    ssim: float
    lpips: float | None = None
    id_score: float | None = None


@dataclass
class MetricReport:
    per_image: list[MetricRow]
    aggregate: dict

    def to_json_dict(self) -> dict:
        def enc(v):
            if v is None:
                return None
            return "inf" if math.isinf(v) else v
        return {
            "per_image": [
                {"name": r.name, "psnr_db": enc(r.psnr_db), "ssim": enc(r.ssim),
                 "lpips": enc(r.lpips), "id_score": enc(r.id_score)}
                for r in self.per_image
            ],
            "aggregate": {k: enc(v) for k, v in self.aggregate.items()},
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2)

    def format_table(self) -> str:
        cols = ["PSNR↑", "SSIM↑", "LPIPS↓", "ID↑"]
        keys = ["psnr_db", "ssim", "lpips", "id_score"]

        def fmt(v):
            if v is None:
                return "-"
            if math.isinf(v):
                return "inf"
            return f"{v:.3f}"

        rows = [["Methods"] + cols]
        for r in self.per_image:
            rows.append([r.name] + [fmt(getattr(r, k)) for k in keys])
        rows.append(["mean"] + [fmt(self.aggregate.get(k)) for k in keys])
        widths = [max(len(row[i]) for row in rows) for i in range(5)]
        lines = [" | ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
                 for row in rows]
        lines.insert(1, "-+-".join("-" * w for w in widths))
        return "\n".join(lines)


def aggregate_report(rows: list[MetricRow]) -> MetricReport:
    """Column means over present values; rows missing an optional metric are
    excluded from that column's mean only."""
    if not rows:
        raise EmptyReport("no metric rows")
    aggregate = {}
    for key in ("psnr_db", "ssim", "lpips", "id_score"):
        vals = [getattr(r, key) for r in rows if getattr(r, key) is not None]
        aggregate[key] = float(np.mean(vals)) if vals else None
    return MetricReport(per_image=list(rows), aggregate=aggregate)
