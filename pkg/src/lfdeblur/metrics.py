"""PSNR / SSIM / RMSE per sub-aperture view and per light field.

Views are float arrays in [0, 1]. SSIM uses the usual 11x11 Gaussian
window (sigma 1.5, K1 = 0.01, K2 = 0.03, L = 1) on luma, averaged over
all fully-contained window positions.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

LUMA = np.array([0.299, 0.587, 0.114])
SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def rmse(a, b) -> float:
    return math.sqrt(mse(a, b))


def psnr(a, b) -> float:
    """PSNR in dB for data range 1, MSE pooled over all channels; ``inf`` for identical inputs."""
    m = mse(a, b)
    if m == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / m)


def gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    g /= g.sum()
    return np.outer(g, g)


def to_luma(img) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3:
        return img @ LUMA
    return img


def ssim(a, b) -> float:
    a, b = _pair(a, b)
    a, b = to_luma(a), to_luma(b)
    if min(a.shape) < SSIM_WIN:
        raise ValueError(f"image {a.shape} smaller than the {SSIM_WIN}x{SSIM_WIN} SSIM window")
    win = gaussian_window()
    c1 = (SSIM_K1 * 1.0) ** 2
    c2 = (SSIM_K2 * 1.0) ** 2

    def filt(img):
        return convolve2d(img, win, mode="valid")

    mu_a, mu_b = filt(a), filt(b)
    var_a = filt(a * a) - mu_a * mu_a
    var_b = filt(b * b) - mu_b * mu_b
    cov = filt(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass
class EvalReport:
    pred_id: str
    gt_id: str
    rows: list[dict] = field(default_factory=list)   # {"u", "v", "psnr", "ssim", "rmse"}

    @property
    def average(self) -> dict:
        n = len(self.rows)
        return {k: sum(r[k] for r in self.rows) / n for k in ("psnr", "ssim", "rmse")}

    def to_dict(self) -> dict:
        return {"pred": self.pred_id, "gt": self.gt_id,
                "views": [_jsonable(r) for r in self.rows],
                "average": _jsonable(self.average)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v", "psnr", "ssim", "rmse"])
            for r in self.rows:
                w.writerow([r["u"], r["v"], r["psnr"], r["ssim"], r["rmse"]])
            avg = self.average
            w.writerow(["mean", "mean", avg["psnr"], avg["ssim"], avg["rmse"]])


def _jsonable(row: dict) -> dict:
    return {k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in row.items()}


def evaluate_lf(pred, gt, pred_id: str = "pred", gt_id: str = "gt") -> EvalReport:
    """Per-view PSNR/SSIM/RMSE over every (u, v) and their arithmetic means."""
    if pred.data.shape != gt.data.shape:
        raise ValueError(f"light-field shape mismatch: {pred.data.shape} vs {gt.data.shape}")
    report = EvalReport(pred_id, gt_id)
    U, V = gt.angular_size
    for u in range(U):
        for v in range(V):
            p, g = pred.data[u, v], gt.data[u, v]
            report.rows.append({"u": u, "v": v, "psnr": psnr(p, g), "ssim": ssim(p, g),
                                "rmse": rmse(p, g)})
    return report
