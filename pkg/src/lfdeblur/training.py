"""Training loop and full-light-field recurrent inference."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .blur import load_dataset_manifest
from .lightfield import LightField, angular_sample_positions, load_lightfield, spiral_order
from .net import DeblurNet, NetworkConfig, stack_frames, unrolled_loss

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    patch: int = 256
    n: int = 10
    batch: int = 1
    lr: float = 1e-4
    iterations: int = 1000
    lam: float = 1e-4
    color_aug: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.batch != 1:
            raise ValueError("only batch size 1 is supported")
        if self.patch < 2 or self.patch % 2:
            raise ValueError(f"patch must be an even size >= 2, got {self.patch}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown TrainConfig field(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class TrainResult:
    model: DeblurNet
    log: list[dict] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [r["loss"] for r in self.log]


def smoothed(values, window: int = 20) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` entries average what is available."""
    v = np.asarray(values, dtype=np.float64)
    c = np.cumsum(np.insert(v, 0, 0.0))
    idx = np.arange(1, len(v) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def _lf_tensor(lf: LightField) -> torch.Tensor:
    # (U, V, H, W, 3) -> (U, V, 3, H, W)
    return torch.from_numpy(np.ascontiguousarray(lf.data.transpose(0, 1, 4, 2, 3)))


def load_pairs(dataset) -> list[tuple[LightField, LightField]]:
    """(blurred, sharp) pairs from a manifest path, a ``synth`` output directory or a list."""
    if isinstance(dataset, (str, Path)):
        job = Path(dataset) / "job.json"
        if job.is_file() and not (Path(dataset) / "manifest.json").is_file():
            with open(job) as fh:
                meta = json.load(fh)
            base = Path(dataset)
            return [(load_lightfield(base / meta["blurred"]),
                     load_lightfield(base / meta["ground_truth"]))]
        manifest, base = load_dataset_manifest(dataset)
        return [(load_lightfield(base / r["blurred"]), load_lightfield(base / r["ground_truth"]))
                for r in manifest["pairs"]]
    return list(dataset)


def train(dataset, cfg: TrainConfig = TrainConfig(), net: NetworkConfig = NetworkConfig(),
          model: DeblurNet | None = None, log_path=None, log_every: int = 0) -> TrainResult:
    """Train on random patches of spiral-stacked, angularly sampled light fields.

    Each iteration picks one pair, crops one patch location shared by all
    views, optionally permutes RGB identically in input and target, and
    unrolls the network over ``cfg.n`` spiral positions spread uniformly
    from the centre view to the last view. Step inputs are the spiral
    neighbours of each sampled position (ends replicated); the hidden state
    flows from one sampled step to the next and gradients flow through it.
    The optimised loss is the per-step MSE averaged over the unroll plus
    ``lam`` times the squared kernel norm.
    """
    pairs = load_pairs(dataset)
    if not pairs:
        raise ValueError("dataset is empty")
    U, V = pairs[0][0].angular_size
    H, W = pairs[0][0].spatial_size
    for b, s in pairs:
        if b.data.shape != s.data.shape or b.data.shape != pairs[0][0].data.shape:
            raise ValueError("all light fields in a dataset must share one shape")
    if cfg.patch > min(H, W):
        raise ValueError(f"patch {cfg.patch} larger than views {H}x{W}")
    seq = spiral_order(U, V)
    if cfg.n > len(seq):
        raise ValueError(f"n = {cfg.n} exceeds the {len(seq)} available views")
    positions = angular_sample_positions(len(seq), cfg.n)

    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    model = model if model is not None else DeblurNet(net)
    model.train()
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8)
    tensors = [(_lf_tensor(b), _lf_tensor(s)) for b, s in pairs]
    radius = model.cfg.radius
    p = cfg.patch

    fh = open(log_path, "w") if log_path else None
    result = TrainResult(model)
    t0 = time.perf_counter()
    try:
        for it in range(cfg.iterations):
            k = int(rng.integers(len(tensors)))
            y0 = int(rng.integers(0, H - p + 1))
            x0 = int(rng.integers(0, W - p + 1))
            perm = rng.permutation(3) if cfg.color_aug else np.arange(3)
            blurred, sharp = tensors[k]
            perm_t = torch.from_numpy(perm)
            bviews = [blurred[u, v][perm_t, y0:y0 + p, x0:x0 + p] for u, v in seq]

            opt.zero_grad(set_to_none=True)
            frames = [stack_frames(bviews, a, radius) for a in positions]
            targets = [sharp[u, v][perm_t, y0:y0 + p, x0:x0 + p].unsqueeze(0)
                       for u, v in (seq[a] for a in positions)]
            total, data, _ = unrolled_loss(model, frames, targets, None, cfg.lam)
            total.backward()
            opt.step()

            rec = {"iteration": it, "loss": float(total.detach()),
                   "data_loss": float(data.detach()), "wall_time": time.perf_counter() - t0}
            result.log.append(rec)
            if fh:
                fh.write(json.dumps(rec) + "\n")
            if log_every and (it % log_every == 0 or it == cfg.iterations - 1):
                log.info("iter %d loss %.6g data %.6g", it, rec["loss"], rec["data_loss"])
    finally:
        if fh:
            fh.close()
    model.eval()
    return result


@torch.no_grad()
def deblur_lightfield(lf: LightField, model: DeblurNet, radius: int | None = None,
                      timings: list | None = None) -> LightField:
    """Deblur every view by running the network along the full spiral sequence.

    Odd spatial sizes are reflect-padded to even and cropped afterwards.
    ``timings``, if given, receives the wall time of each recurrent step.
    """
    radius = model.cfg.radius if radius is None else radius
    if radius != model.cfg.radius:
        raise ValueError(f"network expects radius {model.cfg.radius}, got {radius}")
    U, V = lf.angular_size
    H, W = lf.spatial_size
    seq = spiral_order(U, V)
    x = _lf_tensor(lf)
    pad_h, pad_w = H % 2, W % 2
    dtype = next(model.parameters()).dtype
    views = []
    for u, v in seq:
        t = x[u, v].to(dtype)
        if pad_h or pad_w:
            t = F.pad(t.unsqueeze(0), (0, pad_w, 0, pad_h), mode="reflect").squeeze(0)
        views.append(t)
    was_training = model.training
    model.eval()
    out = np.empty_like(lf.data)
    h = None
    for a, (u, v) in enumerate(seq):
        t0 = time.perf_counter()
        P, h = model(stack_frames(views, a, radius), h)
        P = P[0, :, :H, :W].to(torch.float32).numpy()
        out[u, v] = P.transpose(1, 2, 0)
        if timings is not None:
            timings.append(time.perf_counter() - t0)
    model.train(was_training)
    return lf.with_data(out)


def run_config_dict(cfg: TrainConfig, net: NetworkConfig) -> dict:
    return {"train": asdict(cfg), "network": asdict(net)}
