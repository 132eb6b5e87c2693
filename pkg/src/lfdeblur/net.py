"""Recurrent sub-aperture deblurring network.

Layer table (C = base width, C_h = hidden width, b = temporal radius)::

    conv1    5x5 s1   3(2b+1)   -> C      IN + ReLU
    conv2    3x3 s2   C         -> 2C     IN + ReLU        (half resolution)
    concat   [conv2, h_{a-1}]             -> 2C + C_h
    block_k  3x3 conv, IN, ReLU, 3x3 conv, IN, + skip  (x num_blocks, width 2C)
    deconv   4x4 s2   2C        -> C      IN + ReLU        (output path, full res)
    conv3    3x3 s1   2C        -> C_h    IN + ReLU        (recurrence path -> h_a)
    conv4    3x3 s1   C         -> 3      tanh             (residual)

    P_a = clamp(B_a + residual, 0, 1)

The first block receives 2C + C_h channels; its skip carries the conv2
features only.
"""

from __future__ import annotations

import io
import json
import struct
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

CHECKPOINT_MAGIC = b"LFRDBN\x00\x01"


@dataclass(frozen=True)
class NetworkConfig:
    radius: int = 1          # b; the network sees 2b+1 consecutive views
    channels: int = 64       # C
    hidden: int = 64         # C_h
    num_blocks: int = 12
    eps: float = 1e-5
    seed: int = 0

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        if self.channels < 1 or self.hidden < 1:
            raise ValueError("channels and hidden must be >= 1")
        if self.num_blocks < 1:
            raise ValueError(f"num_blocks must be >= 1, got {self.num_blocks}")
        if not self.eps > 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")

    @property
    def frames(self) -> int:
        return 2 * self.radius + 1

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown NetworkConfig field(s): {sorted(unknown)}")
        return cls(**d)


def instance_norm(t: torch.Tensor, gamma: torch.Tensor, beta: torch.Tensor,
                  eps: float = 1e-5) -> torch.Tensor:
    """Per-instance, per-channel normalisation over spatial positions of an (N, C, H, W) map."""
    if not eps > 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    mean = t.mean(dim=(2, 3), keepdim=True)
    var = ((t - mean) ** 2).mean(dim=(2, 3), keepdim=True)
    out = (t - mean) / torch.sqrt(var + eps)
    return out * gamma.view(1, -1, 1, 1) + beta.view(1, -1, 1, 1)


class InstanceNorm(nn.Module):
    def __init__(self, channels, eps):
        super().__init__()
        self.eps = eps
        self.gamma = nn.Parameter(torch.ones(channels))
        self.beta = nn.Parameter(torch.zeros(channels))

    def forward(self, t):
        return instance_norm(t, self.gamma, self.beta, self.eps)


class ResBlock(nn.Module):
    def __init__(self, in_ch, width, eps):
        super().__init__()
        self.width = width
        self.conv_a = nn.Conv2d(in_ch, width, 3, padding=1)
        self.norm_a = InstanceNorm(width, eps)
        self.conv_b = nn.Conv2d(width, width, 3, padding=1)
        self.norm_b = InstanceNorm(width, eps)

    def forward(self, x):
        r = F.relu(self.norm_a(self.conv_a(x)))
        r = self.norm_b(self.conv_b(r))
        return x[:, :self.width] + r


class DeblurNet(nn.Module):
    def __init__(self, cfg: NetworkConfig = NetworkConfig()):
        super().__init__()
        self.cfg = cfg
        C, Ch, eps = cfg.channels, cfg.hidden, cfg.eps
        self.conv1 = nn.Conv2d(3 * cfg.frames, C, 5, padding=2)
        self.norm1 = InstanceNorm(C, eps)
        self.conv2 = nn.Conv2d(C, 2 * C, 3, stride=2, padding=1)
        self.norm2 = InstanceNorm(2 * C, eps)
        self.blocks = nn.ModuleList(
            [ResBlock(2 * C + Ch if i == 0 else 2 * C, 2 * C, eps) for i in range(cfg.num_blocks)])
        self.deconv = nn.ConvTranspose2d(2 * C, C, 4, stride=2, padding=1)
        self.norm_d = InstanceNorm(C, eps)
        self.conv3 = nn.Conv2d(2 * C, Ch, 3, padding=1)
        self.norm3 = InstanceNorm(Ch, eps)
        self.conv4 = nn.Conv2d(C, 3, 3, padding=1)
        self.reset_parameters()

    @torch.no_grad()
    def reset_parameters(self):
        """Fan-in scaled uniform kernels, zero biases, unit/zero norm affine; conv4 all zero."""
        gen = torch.Generator().manual_seed(self.cfg.seed)
        for name, p in self.named_parameters():
            if name.endswith("gamma"):
                p.fill_(1.0)
            elif name.endswith("beta") or name.endswith("bias"):
                p.zero_()
            else:
                # ConvTranspose2d weights are (in, out, k, k); fan-in counts what feeds one output
                if name.startswith("deconv"):
                    fan_in = p.shape[0] * p.shape[2] * p.shape[3] // 4
                else:
                    fan_in = p.shape[1] * p.shape[2] * p.shape[3]
                bound = 1.0 / np.sqrt(fan_in)
                p.copy_(torch.rand(p.shape, generator=gen, dtype=p.dtype) * (2 * bound) - bound)
        self.conv4.weight.zero_()
        self.conv4.bias.zero_()

    def zero_hidden(self, height, width, dtype=None) -> torch.Tensor:
        dtype = dtype or self.conv1.weight.dtype
        return torch.zeros(1, self.cfg.hidden, height // 2, width // 2, dtype=dtype)

    def forward(self, frames: torch.Tensor, h_prev: torch.Tensor | None = None):
        """``frames``: (1, 3(2b+1), H, W) with the centre view in the middle slot.

        Returns (P_a, h_a) with P_a of shape (1, 3, H, W).
        """
        n, ch, H, W = frames.shape
        if ch != 3 * self.cfg.frames:
            raise ValueError(f"expected {3 * self.cfg.frames} input channels, got {ch}")
        if H % 2 or W % 2:
            raise ValueError(f"spatial size must be divisible by 2, got {H}x{W}")
        if h_prev is None:
            h_prev = self.zero_hidden(H, W, frames.dtype).expand(n, -1, -1, -1)
        if h_prev.shape != (n, self.cfg.hidden, H // 2, W // 2):
            raise ValueError(f"hidden state shape {tuple(h_prev.shape)} does not match "
                             f"{(n, self.cfg.hidden, H // 2, W // 2)}")
        f = F.relu(self.norm1(self.conv1(frames)))
        f = F.relu(self.norm2(self.conv2(f)))
        f = torch.cat([f, h_prev], dim=1)
        for blk in self.blocks:
            f = blk(f)
        out = F.relu(self.norm_d(self.deconv(f)))
        h = F.relu(self.norm3(self.conv3(f)))
        residual = torch.tanh(self.conv4(out))
        b = self.cfg.radius
        centre = frames[:, 3 * b:3 * b + 3]
        return torch.clamp(centre + residual, 0.0, 1.0), h


def regularized_parameters(model: nn.Module):
    """Convolution and deconvolution kernels; these make up the penalised set W."""
    return [p for name, p in model.named_parameters() if name.endswith("weight")]


def weight_penalty(model: nn.Module) -> torch.Tensor:
    return sum((p * p).sum() for p in regularized_parameters(model))


def loss(P: torch.Tensor, S: torch.Tensor, model: nn.Module | None = None,
         lam: float = 1e-4) -> torch.Tensor:
    """Mean squared error over all samples plus ``lam`` times the squared kernel norm."""
    if P.shape != S.shape:
        raise ValueError(f"shape mismatch: {tuple(P.shape)} vs {tuple(S.shape)}")
    data = ((S - P) ** 2).mean()
    if model is None or lam == 0:
        return data
    return data + lam * weight_penalty(model)


def stack_frames(views, index: int, radius: int) -> torch.Tensor:
    """Channel-stack views index-b .. index+b (ends replicated) from a sequence of (3, H, W) tensors."""
    last = len(views) - 1
    return torch.cat([views[min(max(index + k, 0), last)] for k in range(-radius, radius + 1)],
                     dim=0).unsqueeze(0)


def unrolled_loss(model: DeblurNet, frames_seq, targets, h_prev: torch.Tensor | None = None,
                  lam: float = 1e-4):
    """Run the recurrence over a list of stacked inputs; return (total, data term, last h).

    The data term is the mean over steps of the per-step MSE; the kernel
    penalty is added once.
    """
    if len(frames_seq) != len(targets) or not frames_seq:
        raise ValueError("frames_seq and targets must be non-empty and of equal length")
    h = h_prev
    data = 0.0
    for frames, S in zip(frames_seq, targets):
        P, h = model(frames, h)
        data = data + loss(P, S)
    data = data / len(frames_seq)
    total = data + lam * weight_penalty(model) if lam else data
    return total, data, h


def gradients(model: DeblurNet, frames, h_prev: torch.Tensor | None, S,
              lam: float = 1e-4) -> "OrderedDict[str, torch.Tensor]":
    """Reverse-mode gradients of the loss w.r.t. every trainable tensor.

    ``frames`` and ``S`` are either single tensors (one step) or equal-length
    lists, in which case the loss of the whole unroll is differentiated and
    gradients flow through the hidden state. If ``h_prev`` requires grad its
    gradient is returned under ``"h_prev"``.
    """
    if isinstance(frames, torch.Tensor):
        frames, S = [frames], [S]
    model.zero_grad(set_to_none=True)
    value, _, _ = unrolled_loss(model, list(frames), list(S), h_prev, lam)
    names = [n for n, _ in model.named_parameters()]
    inputs = [p for _, p in model.named_parameters()]
    if h_prev is not None and h_prev.requires_grad:
        names.append("h_prev")
        inputs.append(h_prev)
    grads = torch.autograd.grad(value, inputs, allow_unused=True)
    return OrderedDict((n, torch.zeros_like(x) if g is None else g)
                       for n, g, x in zip(names, grads, inputs))


def zero_parameters(model: nn.Module) -> nn.Module:
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    return model


# ---------------------------------------------------------------- checkpoints
#
# Layout (little-endian):
#   magic (8 bytes) | u32 config length | config JSON (utf-8) | u32 tensor count
#   per tensor: u16 name length | name | u8 ndim | u32 dims... | float32 data

def save_checkpoint(model: DeblurNet, path, extra: dict | None = None) -> None:
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    cfg = json.dumps({"network": asdict(model.cfg), **(extra or {})}, sort_keys=True).encode()
    buf.write(struct.pack("<I", len(cfg)))
    buf.write(cfg)
    state = model.state_dict()
    buf.write(struct.pack("<I", len(state)))
    for name, t in state.items():
        arr = t.detach().cpu().numpy().astype("<f4")
        nb = name.encode()
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<B", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(arr.tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[DeblurNet, dict]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a deblurring-network checkpoint")
    pos = 8

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, raw, pos)
        pos += struct.calcsize(fmt)
        return vals

    (clen,) = take("<I")
    meta = json.loads(raw[pos:pos + clen].decode())
    pos += clen
    model = DeblurNet(NetworkConfig.from_dict(meta["network"]))
    (count,) = take("<I")
    state = OrderedDict()
    for _ in range(count):
        (nlen,) = take("<H")
        name = raw[pos:pos + nlen].decode()
        pos += nlen
        (ndim,) = take("<B")
        shape = take(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f4", count=size, offset=pos).reshape(shape)
        pos += 4 * size
        state[name] = torch.from_numpy(arr.astype(np.float32))
    model.load_state_dict(state)
    return model, meta
