"""Adversarial training loop: one discriminator update then one joint
generator update per step, with resumable state and a JSON-lines metrics log.

Wiring per step: source -> G_N (with the neutral attribute vector) ->
neutral image -> G_A (with the driving attributes) -> reenacted image; plus
G_A run on the source with neutral attributes, whose agreement with G_N's
output is the pseudo-ground-truth reconstruction term. The identity network
is pretrained on identity labels and frozen before the main loop.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from . import losses
from .attributes import NUM_ATTRIBUTES, neutral
from .data import DatasetManifest, Track, load_image
from .sprites import TRANSLATION_AMPLITUDE
from .errors import ValidationError
from .networks import (
    ArchConfig,
    ModelBundle,
    PRESETS,
    load_checkpoint,
    replicate_concat_torch,
    save_checkpoint,
    to_tensor,
)


@dataclass(frozen=True)
class TrainConfig:
    preset: str = "desk"
    batch_size: int = 8
    steps: int = 2000
    g_lr: float = 5e-4
    d_lr: float = 1e-3
    # In-plane rotation range (normalized roll units) for driving-pair
    # augmentation; 0 disables it.
    augment_roll: float = 0.25
    # First-moment coefficient 0.5: the usual GAN setting.
    betas: tuple[float, float] = (0.5, 0.999)
    lambdas: tuple[float, float, float] = (10.0, 1.0, 10.0)
    seed: int = 0
    checkpoint_interval: int = 1000
    identity_epochs: int = 20

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValidationError(f"unknown preset {self.preset!r}, expected one of {sorted(PRESETS)}")
        for name in ("batch_size", "g_lr", "d_lr", "checkpoint_interval", "identity_epochs"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.steps < 0:
            raise ValidationError("steps must be >= 0")
        if not 0.0 <= self.augment_roll <= 0.5:
            raise ValidationError("augment_roll must lie in [0, 0.5]")
        if any(l <= 0 for l in self.lambdas):
            raise ValidationError(f"loss weights must be positive, got {self.lambdas}")

    @property
    def arch(self) -> ArchConfig:
        return PRESETS[self.preset]


class PairSampler:
    """In-memory frame-pair sampler; one PNG decode per frame, ever.

    Draw logic matches data.sample_pair: uniform over tracks with >= 2
    frames, then two distinct frames. Images are cached as uint8 and
    converted per batch. If a track contains a frame whose attributes equal
    the neutral vector (generated tracks open with one), that frame is
    returned alongside the pair as a pixel-space anchor for the neutralizer;
    tracks without one get a zero image and a False mask entry.
    """

    def __init__(self, manifest: DatasetManifest, split: str):
        self.tracks = [t for t in manifest.split_tracks(split) if len(t.frames) >= 2]
        if not self.tracks:
            raise ValidationError(f"no track with >= 2 frames in split {split!r}")
        self._images: dict[str, np.ndarray] = {}
        for t in self.tracks:
            for f in t.frames:
                img = load_image(f.image_path)
                self._images[str(f.image_path)] = ((img + 1.0) * 127.5).astype(np.uint8)
        fa_n = neutral().as_array()
        self._neutral_pos: dict[str, int | None] = {}
        for t in self.tracks:
            pos = None
            for k, f in enumerate(t.frames):
                if np.abs(t.attributes[f.frame_index].as_array() - fa_n).max() < 1e-9:
                    pos = k
                    break
            self._neutral_pos[t.track_id] = pos

    def image(self, track: Track, frame_pos: int) -> np.ndarray:
        raw = self._images[str(track.frames[frame_pos].image_path)]
        return raw.astype(np.float64) / 127.5 - 1.0

    def batch(
        self, batch_size: int, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        sources, drivings, attrs, anchors, mask = [], [], [], [], []
        for _ in range(batch_size):
            track = self.tracks[rng.integers(len(self.tracks))]
            i, j = rng.choice(len(track.frames), size=2, replace=False)
            sources.append(self.image(track, i))
            drivings.append(self.image(track, j))
            attrs.append(track.attributes[track.frames[j].frame_index].as_array())
            pos = self._neutral_pos[track.track_id]
            if pos is None:
                anchors.append(np.zeros_like(sources[-1]))
                mask.append(False)
            else:
                anchors.append(self.image(track, pos))
                mask.append(True)
        return (
            np.stack(sources),
            np.stack(drivings),
            np.stack(attrs),
            np.stack(anchors),
            np.asarray(mask, dtype=bool),
        )


@dataclass
class TrainState:
    config: TrainConfig
    bundle: ModelBundle
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    rng: np.random.Generator
    step: int = 0
    running: dict = field(default_factory=dict)


def augment_rotation(
    drivings: np.ndarray,
    attrs: np.ndarray,
    max_droll: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Rotate each driving frame about the canvas center, adjusting its label.

    In-plane rotation transforms the attribute vector exactly: roll shifts by
    the angle and the pitch/yaw translation rotates with the frame, so every
    rotation makes a new valid (image, attributes) pair from the same data.
    A draw that would push pose outside [0, 1] falls back to no rotation.
    """
    from scipy.ndimage import rotate

    if max_droll <= 0:
        return drivings, attrs
    out_x = drivings.copy()
    out_a = attrs.copy()
    half = TRANSLATION_AMPLITUDE * 2.0  # pose unit -> canvas scale
    for i in range(drivings.shape[0]):
        roll = attrs[i, 2]
        lo, hi = max(-max_droll, -roll), min(max_droll, 1.0 - roll)
        if lo >= hi:
            continue
        droll = rng.uniform(lo, hi)
        ang = droll * math.pi
        cy = (attrs[i, 0] - 0.5) * half
        cx = (attrs[i, 1] - 0.5) * half
        cx2 = cx * math.cos(ang) - cy * math.sin(ang)
        cy2 = cx * math.sin(ang) + cy * math.cos(ang)
        pitch, yaw = 0.5 + cy2 / half, 0.5 + cx2 / half
        if not (0.0 <= pitch <= 1.0 and 0.0 <= yaw <= 1.0):
            continue
        out_x[i] = rotate(
            drivings[i], -math.degrees(ang), axes=(0, 1),
            reshape=False, order=1, mode="nearest",
        )
        out_a[i, 0], out_a[i, 1], out_a[i, 2] = pitch, yaw, roll + droll
    return np.clip(out_x, -1.0, 1.0), out_a


def _clamp_scores(scores: torch.Tensor) -> torch.Tensor:
    return scores.clamp(losses.EPS, 1.0 - losses.EPS)


def _neutral_batch(batch_size: int) -> torch.Tensor:
    return torch.from_numpy(
        np.broadcast_to(neutral().as_array(), (batch_size, NUM_ATTRIBUTES)).astype(np.float32)
    ).contiguous()


def train_step(
    state: TrainState,
    batch: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray],
) -> losses.LossBreakdown:
    """One discriminator update followed by one joint generator update."""
    bundle = state.bundle
    g_n, g_a, disc = bundle.neutralizer, bundle.animator, bundle.discriminator
    for m in (g_n, g_a, disc):
        m.train()

    sources, drivings, attrs, anchors, anchor_mask = batch
    drivings, attrs = augment_rotation(
        drivings, np.asarray(attrs, dtype=np.float64), state.config.augment_roll, state.rng
    )
    s = to_tensor(sources)
    x = to_tensor(drivings)
    fa_d = torch.from_numpy(np.asarray(attrs, dtype=np.float32))
    fa_n = _neutral_batch(s.shape[0])

    neutral_img = g_n(replicate_concat_torch(s, fa_n))
    reenacted = g_a(replicate_concat_torch(neutral_img, fa_d))
    ga_neutral = g_a(replicate_concat_torch(s, fa_n))

    # --- Discriminator update (fakes detached). ---
    real_scores, real_attrs = disc(x)
    fake_gn_scores, _ = disc(neutral_img.detach())
    fake_ga_scores, _ = disc(reenacted.detach())
    d_gn, _ = losses.adversarial_loss(_clamp_scores(real_scores), _clamp_scores(fake_gn_scores))
    d_ga, _ = losses.adversarial_loss(_clamp_scores(real_scores), _clamp_scores(fake_ga_scores))
    d_adv = 0.5 * (d_gn + d_ga)
    # Eq. 2's real-image term: supervised regression, trains trunk + C2.
    d_attr = ((real_attrs - fa_d) ** 2).sum(dim=-1).mean()
    d_total = d_adv + bundle.lambdas[0] * d_attr
    state.opt_d.zero_grad(set_to_none=True)
    d_total.backward()
    state.opt_d.step()

    # --- Joint generator update against the updated discriminator. ---
    gn_scores, gn_attrs = disc(neutral_img)
    ga_scores, ga_attrs = disc(reenacted)
    _, adv_gn = losses.adversarial_loss(_clamp_scores(real_scores.detach()), _clamp_scores(gn_scores))
    _, adv_ga = losses.adversarial_loss(_clamp_scores(real_scores.detach()), _clamp_scores(ga_scores))
    attr_g = ((ga_attrs - fa_d) ** 2).sum(dim=-1).mean() + ((gn_attrs - fa_n) ** 2).sum(dim=-1).mean()
    pool_s, fc_s = bundle.identity.pool_fc(s)
    pool_g, fc_g = bundle.identity.pool_fc(reenacted)
    ident = losses.identity_loss(pool_s.detach(), fc_s.detach(), pool_g, fc_g)
    recon = losses.reconstruction_loss(x, reenacted, neutral_img, ga_neutral)
    total = losses.total_loss(adv_gn, adv_ga, attr_g, ident, recon, bundle.lambdas)

    # Pixel anchors: tracks that contain a canonical neutral frame pin G_N's
    # output to it, and give G_A a clean supervised template->driving pair.
    anchor = torch.zeros((), dtype=total.dtype)
    if anchor_mask.any():
        gt = to_tensor(anchors)
        m = torch.from_numpy(anchor_mask.astype(np.float32)).view(-1, 1, 1, 1)
        denom = m.sum() * float(np.prod(gt.shape[1:]))
        anchor = (m * (neutral_img - gt).abs()).sum() / denom
        ga_direct = g_a(replicate_concat_torch(gt, fa_d))
        anchor = anchor + (m * (ga_direct - x).abs()).sum() / denom
        total = total + bundle.lambdas[2] * anchor

    state.opt_g.zero_grad(set_to_none=True)
    total.backward()
    state.opt_g.step()

    breakdown = losses.LossBreakdown(
        d_adv=d_adv.item(),
        d_attr=d_attr.item(),
        adv_GN=adv_gn.item(),
        adv_GA=adv_ga.item(),
        attr=(attr_g + d_attr).item(),  # includes the gradient-free real term
        identity=ident.item(),
        recon=recon.item(),
        anchor=anchor.item(),
        total=total.item(),
    )
    if not all(math.isfinite(v) for v in breakdown.as_dict().values()):
        raise ValidationError(f"non-finite loss at step {state.step}: {breakdown.as_dict()}")
    state.step += 1
    bundle.trained_steps = state.step
    return breakdown


def pretrain_identity(
    bundle: ModelBundle,
    manifest: DatasetManifest,
    epochs: int,
    rng: np.random.Generator,
    batch_size: int = 32,
    lr: float = 1e-3,
) -> float:
    """Train the identity classifier on identity labels, then freeze it.

    Validation holds out every 5th frame of each track (tracks are split by
    identity, so a track-level holdout would have no shared classes).
    Returns the validation accuracy.
    """
    ids = manifest.identity_ids()
    if len(ids) < 2:
        raise ValidationError(f"identity pretraining needs >= 2 identities, got {len(ids)}")
    if len(ids) != bundle.identity.n_identities:
        raise ValidationError(
            f"identity head sized for {bundle.identity.n_identities} classes, "
            f"manifest has {len(ids)}"
        )
    label = {identity: i for i, identity in enumerate(ids)}

    train_items, val_items = [], []
    for t in manifest.tracks:
        last = len(t.frames) - 1
        for k, f in enumerate(t.frames):
            # Tracks shorter than the holdout stride still contribute their
            # last frame, so validation is never empty.
            held_out = k % 5 == 4 or (len(t.frames) < 5 and k == last and last > 0)
            dest = val_items if held_out else train_items
            dest.append((f.image_path, label[t.identity_id]))
    if not val_items:
        raise ValidationError("identity pretraining needs tracks with >= 2 frames")

    net = bundle.identity
    net.train()
    for p in net.parameters():
        p.requires_grad_(True)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    ce = torch.nn.CrossEntropyLoss()

    cache = {str(p): load_image(p) for p, _ in train_items + val_items}

    def stack(items):
        imgs = to_tensor(np.stack([cache[str(p)] for p, _ in items]))
        labels = torch.tensor([l for _, l in items], dtype=torch.long)
        return imgs, labels

    for _ in range(epochs):
        order = rng.permutation(len(train_items))
        for start in range(0, len(order), batch_size):
            chunk = [train_items[i] for i in order[start : start + batch_size]]
            imgs, labels = stack(chunk)
            opt.zero_grad(set_to_none=True)
            loss = ce(net(imgs), labels)
            loss.backward()
            opt.step()

    net.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(val_items), batch_size):
            imgs, labels = stack(val_items[start : start + batch_size])
            correct += int((net(imgs).argmax(dim=1) == labels).sum())
    accuracy = correct / len(val_items)
    bundle.freeze_identity()
    return accuracy


def evaluate_epoch(
    bundle: ModelBundle,
    manifest: DatasetManifest,
    split: str = "val",
    n_samples: int = 32,
    seed: int = 0,
) -> dict:
    """Oracle-based validation metrics; mutates no parameters."""
    from . import reenact as reenact_mod  # local import: reenact depends on networks
    from .oracle import oracle_extract, oracle_identity
    from .sprites import hue_to_skin_hue

    tracks = [t for t in manifest.split_tracks(split) if len(t.frames) >= 2]
    if not tracks:
        raise ValidationError(f"empty split {split!r}")
    bundle.eval_mode()
    rng = np.random.default_rng(seed)
    sq_errs, hue_errs, neutral_errs = [], [], []
    neutral_target = neutral().as_array()
    for _ in range(n_samples):
        track = tracks[rng.integers(len(tracks))]
        i, j = rng.choice(len(track.frames), size=2, replace=False)
        source = load_image(track.frames[i].image_path)
        fa = track.attributes[track.frames[j].frame_index]
        out = reenact_mod.reenact(bundle, source, fa)
        try:
            got = oracle_extract(out).as_array()
            sq_errs.append((got - fa.as_array()) ** 2)
            src_hue = oracle_identity(source).skin_hue
            hue_errs.append(abs(oracle_identity(out).skin_hue - src_hue))
        except Exception:
            sq_errs.append(np.ones(NUM_ATTRIBUTES))
            hue_errs.append(1.0)
        neu = reenact_mod.neutralize(bundle, source)
        try:
            neutral_errs.append(
                float(np.abs(oracle_extract(neu).as_array() - neutral_target).max())
            )
        except Exception:
            neutral_errs.append(1.0)
    rmse = np.sqrt(np.mean(np.stack(sq_errs), axis=0))
    return {
        "split": split,
        "n_samples": n_samples,
        "attribute_rmse": float(np.sqrt(np.mean(np.stack(sq_errs)))),
        "per_attribute_rmse": [float(v) for v in rmse],
        "mean_hue_error": float(np.mean(hue_errs)),
        "mean_neutralization_error": float(np.mean(neutral_errs)),
    }


def _make_state(config: TrainConfig, bundle: ModelBundle) -> TrainState:
    trainable = list(bundle.neutralizer.parameters()) + list(bundle.animator.parameters())
    return TrainState(
        config=config,
        bundle=bundle,
        opt_g=torch.optim.Adam(trainable, lr=config.g_lr, betas=config.betas),
        opt_d=torch.optim.Adam(
            bundle.discriminator.parameters(), lr=config.d_lr, betas=config.betas
        ),
        rng=np.random.default_rng(config.seed),
    )


def _save_train_checkpoint(state: TrainState, path: Path) -> None:
    save_checkpoint(
        state.bundle,
        path,
        train_state={
            "config": asdict(state.config),
            "opt_g": state.opt_g.state_dict(),
            "opt_d": state.opt_d.state_dict(),
            "rng": state.rng.bit_generator.state,
            "torch_rng": torch.get_rng_state(),
            "step": state.step,
        },
    )


def resume_state(checkpoint_path: str | Path) -> TrainState:
    """Rebuild a TrainState whose next step matches the uninterrupted run."""
    bundle = load_checkpoint(checkpoint_path)
    saved = bundle.extra.get("train_state")
    if saved is None:
        raise ValidationError(f"checkpoint {checkpoint_path} holds no training state")
    config = TrainConfig(**{**saved["config"], "betas": tuple(saved["config"]["betas"]),
                            "lambdas": tuple(saved["config"]["lambdas"])})
    state = _make_state(config, bundle)
    state.opt_g.load_state_dict(saved["opt_g"])
    state.opt_d.load_state_dict(saved["opt_d"])
    state.rng.bit_generator.state = saved["rng"]
    torch.set_rng_state(saved["torch_rng"])
    state.step = saved["step"]
    return state


def train(
    config: TrainConfig,
    manifest: DatasetManifest,
    out_dir: str | Path,
    log_every: int = 25,
) -> Path:
    """Full training run; returns the final checkpoint path."""
    if manifest.resolution != config.arch.resolution:
        raise ValidationError(
            f"manifest resolution {manifest.resolution} != preset resolution "
            f"{config.arch.resolution}"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    torch.manual_seed(config.seed)
    bundle = ModelBundle.create(
        config.arch, len(manifest.identity_ids()), lambdas=config.lambdas
    )
    state = _make_state(config, bundle)

    id_acc = pretrain_identity(bundle, manifest, config.identity_epochs, state.rng)
    bundle.extra["identity_val_accuracy"] = id_acc

    sampler = PairSampler(manifest, "train")
    metrics_path = out / "metrics.jsonl"
    final_path = out / "checkpoint_final.pt"
    with metrics_path.open("w") as log:
        log.write(json.dumps({"event": "identity_pretrain", "val_accuracy": id_acc}) + "\n")
        while state.step < config.steps:
            batch = sampler.batch(config.batch_size, state.rng)
            breakdown = train_step(state, batch)
            if state.step % log_every == 0 or state.step == config.steps:
                log.write(json.dumps({"step": state.step, **breakdown.as_dict()}) + "\n")
                log.flush()
            if state.step % config.checkpoint_interval == 0:
                _save_train_checkpoint(state, out / f"checkpoint_{state.step:06d}.pt")
    _save_train_checkpoint(state, final_path)
    return final_path
