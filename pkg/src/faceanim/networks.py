"""Model components: two generators, a two-headed discriminator, and a
frozen identity-feature network.

The generators share one architecture (strided downsampling, residual
blocks, nearest-upsample decoding) and consume a 23-channel conditioned
input: the image plus the 20 attribute values replicated over space. The
discriminator is a PatchGAN trunk with a realism head (patch score map)
and an attribute-regression head (20 sigmoid outputs), both branching from
the last shared feature map. The identity network is a small classifier
trained separately on identity labels, then frozen; its last pooling and
fully-connected activations serve as identity features.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .attributes import NUM_ATTRIBUTES, FacialAttributeVector
from .errors import CheckpointError, ValidationError

CHECKPOINT_FORMAT = 1

IMG_CHANNELS = 3
COND_CHANNELS = IMG_CHANNELS + NUM_ATTRIBUTES  # 23


@dataclass(frozen=True)
class ArchConfig:
    """Architecture hyperparameters shared by G_N and G_A."""

    resolution: int = 128
    gen_base_width: int = 64
    gen_res_blocks: int = 6
    disc_base_width: int = 64
    disc_layers: int = 3
    identity_width: int = 32
    identity_feat_dim: int = 64

    def as_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "gen_base_width": self.gen_base_width,
            "gen_res_blocks": self.gen_res_blocks,
            "disc_base_width": self.disc_base_width,
            "disc_layers": self.disc_layers,
            "identity_width": self.identity_width,
            "identity_feat_dim": self.identity_feat_dim,
        }


# Presets: "paper" mirrors the CycleGAN-scale model at 128x128; "desk" is
# sized so a full acceptance training run fits a single CPU core.
PRESETS = {
    "paper": ArchConfig(),
    "desk": ArchConfig(
        resolution=64,
        gen_base_width=24,
        gen_res_blocks=4,
        disc_base_width=32,
        disc_layers=4,
        identity_width=24,
        identity_feat_dim=48,
    ),
}


def replicate_concat(img: np.ndarray, fa: FacialAttributeVector) -> np.ndarray:
    """Concatenate an HxWx3 image with the attribute vector replicated to HxWx20."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != IMG_CHANNELS:
        raise ValidationError(f"expected HxWx3 image, got shape {img.shape}")
    h, w = img.shape[:2]
    planes = np.broadcast_to(fa.as_array(), (h, w, NUM_ATTRIBUTES))
    return np.concatenate([img, planes], axis=2)


def replicate_concat_torch(imgs: torch.Tensor, attrs: torch.Tensor) -> torch.Tensor:
    """Batched NCHW variant: (B,3,H,W) + (B,20) -> (B,23,H,W)."""
    b, c, h, w = imgs.shape
    if c != IMG_CHANNELS or attrs.shape != (b, NUM_ATTRIBUTES):
        raise ValidationError(
            f"bad conditioned-input shapes: {tuple(imgs.shape)} and {tuple(attrs.shape)}"
        )
    planes = attrs[:, :, None, None].expand(b, NUM_ATTRIBUTES, h, w)
    return torch.cat([imgs, planes], dim=1)


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.block = nn.Sequential(
            nn.Conv2d(channels, channels, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(channels, channels, 3, padding=1),
        )

    def forward(self, x):
        return x + self.block(x)


class Generator(nn.Module):
    """Conditioned image-to-image generator, tanh output in [-1, 1].

    No normalization layers anywhere: the attribute conditioning enters as
    spatially-constant planes, and per-sample norms subtract exactly that
    constant back out of the first feature map, leaving the generator blind
    to its conditioning. Coordinate planes are concatenated at the input and
    the bottleneck — attributes position content (a translated face, bars of
    a given width), and a translation-equivariant stack cannot place content
    from constant conditioning without a spatial reference. The attribute
    planes are also re-concatenated at the bottleneck.
    """

    def __init__(self, arch: ArchConfig):
        super().__init__()
        w = arch.gen_base_width
        self.encode = nn.Sequential(
            nn.Conv2d(COND_CHANNELS + 2, w, 7, padding=3),
            nn.ReLU(inplace=True),
            # Two stride-2 downsampling stages.
            nn.Conv2d(w, 2 * w, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, 4 * w, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
        )
        self.fuse = nn.Conv2d(4 * w + NUM_ATTRIBUTES + 2, 4 * w, 1)
        self.blocks = nn.Sequential(
            *[ResidualBlock(4 * w) for _ in range(arch.gen_res_blocks)]
        )
        self.decode = nn.Sequential(
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(4 * w, 2 * w, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Upsample(scale_factor=2, mode="nearest"),
            nn.Conv2d(2 * w, w, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, IMG_CHANNELS, 7, padding=3),
            nn.Tanh(),
        )

    @staticmethod
    def _coords(like: torch.Tensor) -> torch.Tensor:
        b, _, h, w = like.shape
        v = torch.linspace(-1.0, 1.0, h, dtype=like.dtype, device=like.device)
        u = torch.linspace(-1.0, 1.0, w, dtype=like.dtype, device=like.device)
        grid = torch.stack(torch.meshgrid(v, u, indexing="ij"))
        return grid.unsqueeze(0).expand(b, 2, h, w)

    def forward(self, conditioned: torch.Tensor) -> torch.Tensor:
        if conditioned.shape[1] != COND_CHANNELS:
            raise ValidationError(
                f"generator expects {COND_CHANNELS} input channels, got {conditioned.shape[1]}"
            )
        feats = self.encode(torch.cat([conditioned, self._coords(conditioned)], dim=1))
        attrs = conditioned[:, IMG_CHANNELS:, :1, :1].expand(
            -1, NUM_ATTRIBUTES, feats.shape[2], feats.shape[3]
        )
        feats = self.fuse(torch.cat([feats, attrs, self._coords(feats)], dim=1))
        return self.decode(self.blocks(feats))


class Discriminator(nn.Module):
    """PatchGAN trunk with realism (C1) and attribute-regression (C2) heads."""

    def __init__(self, arch: ArchConfig):
        super().__init__()
        w = arch.disc_base_width
        # No normalization: attribute regression needs absolute feature
        # magnitudes (part areas, widths) that per-image norms erase.
        layers: list[nn.Module] = [
            nn.Conv2d(IMG_CHANNELS, w, 4, stride=2, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
        ]
        ch = w
        for _ in range(arch.disc_layers - 1):
            layers += [
                nn.Conv2d(ch, 2 * ch, 4, stride=2, padding=1),
                nn.LeakyReLU(0.2, inplace=True),
            ]
            ch *= 2
        self.trunk = nn.Sequential(*layers)
        self.realism = nn.Sequential(nn.Conv2d(ch, 1, 4, padding=1), nn.Sigmoid())
        # Full-map valid convolution: keeps spatial layout (a global pool
        # would discard the face position the pose attributes encode).
        map_size = arch.resolution // 2**arch.disc_layers
        self.attrs = nn.Sequential(
            nn.Conv2d(ch, ch, 3, padding=1),
            nn.LeakyReLU(0.2, inplace=True),
            nn.Conv2d(ch, NUM_ATTRIBUTES, map_size),
            nn.Flatten(),
            nn.Sigmoid(),
        )

    def forward(self, img: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        feats = self.trunk(img)
        return self.realism(feats), self.attrs(feats)


class IdentityNet(nn.Module):
    """Identity classifier; pool and fc activations double as identity features."""

    def __init__(self, arch: ArchConfig, n_identities: int):
        super().__init__()
        w = arch.identity_width
        self.features = nn.Sequential(
            nn.Conv2d(IMG_CHANNELS, w, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(w, 2 * w, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(2 * w, 4 * w, 3, stride=2, padding=1),
            nn.ReLU(inplace=True),
        )
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(4 * w, arch.identity_feat_dim)
        self.classifier = nn.Linear(arch.identity_feat_dim, n_identities)
        self.n_identities = n_identities

    def pool_fc(self, img: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        pooled = self.pool(self.features(img)).flatten(1)
        return pooled, self.fc(pooled)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        _, fc = self.pool_fc(img)
        return self.classifier(torch.relu(fc))


@dataclass
class ModelBundle:
    """All four parameter sets plus the loss weights they were trained with."""

    arch: ArchConfig
    neutralizer: Generator
    animator: Generator
    discriminator: Discriminator
    identity: IdentityNet
    lambdas: tuple[float, float, float] = (10.0, 1.0, 10.0)
    trained_steps: int = 0
    extra: dict = field(default_factory=dict)

    @classmethod
    def create(
        cls,
        arch: ArchConfig,
        n_identities: int,
        lambdas: tuple[float, float, float] = (10.0, 1.0, 10.0),
    ) -> "ModelBundle":
        if any(l <= 0 for l in lambdas):
            raise ValidationError(f"loss weights must be positive, got {lambdas}")
        return cls(
            arch=arch,
            neutralizer=Generator(arch),
            animator=Generator(arch),
            discriminator=Discriminator(arch),
            identity=IdentityNet(arch, n_identities),
            lambdas=lambdas,
        )

    def freeze_identity(self) -> None:
        for p in self.identity.parameters():
            p.requires_grad_(False)
        self.identity.eval()

    def eval_mode(self) -> None:
        for m in (self.neutralizer, self.animator, self.discriminator, self.identity):
            m.eval()


def to_tensor(images: np.ndarray) -> torch.Tensor:
    """(B,H,W,3) float array in [-1,1] -> float32 NCHW tensor."""
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(arr).permute(0, 3, 1, 2).contiguous()


def to_image(tensor: torch.Tensor) -> np.ndarray:
    """Inverse of to_tensor for a single image; returns HxWx3 float64."""
    arr = tensor.detach().cpu().numpy()
    if arr.ndim == 4:
        arr = arr[0]
    return np.ascontiguousarray(np.transpose(arr, (1, 2, 0)), dtype=np.float64)


def save_checkpoint(bundle: ModelBundle, path: str | Path, **extra) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "arch": bundle.arch.as_dict(),
        "n_identities": bundle.identity.n_identities,
        "lambdas": list(bundle.lambdas),
        "trained_steps": bundle.trained_steps,
        "extra": {**bundle.extra, **extra},
        "neutralizer": bundle.neutralizer.state_dict(),
        "animator": bundle.animator.state_dict(),
        "discriminator": bundle.discriminator.state_dict(),
        "identity": bundle.identity.state_dict(),
    }
    torch.save(payload, Path(path))


def load_checkpoint(path: str | Path) -> ModelBundle:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:  # torch raises several unpickling error types
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(
            f"unsupported checkpoint format in {path}: {payload.get('format')!r}"
            if isinstance(payload, dict)
            else f"not a model checkpoint: {path}"
        )
    arch = ArchConfig(**payload["arch"])
    bundle = ModelBundle.create(
        arch, payload["n_identities"], lambdas=tuple(payload["lambdas"])
    )
    try:
        bundle.neutralizer.load_state_dict(payload["neutralizer"])
        bundle.animator.load_state_dict(payload["animator"])
        bundle.discriminator.load_state_dict(payload["discriminator"])
        bundle.identity.load_state_dict(payload["identity"])
    except RuntimeError as exc:
        raise CheckpointError(f"checkpoint {path} incompatible with its config: {exc}") from None
    bundle.trained_steps = int(payload["trained_steps"])
    bundle.extra = dict(payload.get("extra", {}))
    bundle.freeze_identity()
    bundle.eval_mode()
    return bundle
