"""LSTM-TrajGAN: generator, discriminator, TrajLoss, training and generation."""

from __future__ import annotations

import dataclasses
import logging
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import container
from .data import N_DAYS, N_HOURS, Dataset, Trajectory
from .encoding import EncodedBatch, decode_batch, encode_batch
from .neural import (LSTM, Adam, Dense, TrainingError, loss_bce, loss_bce_grad,
                     loss_l2_spatial, loss_l2_spatial_grad, loss_sce, loss_sce_grad)

log = logging.getLogger(__name__)

FUSED_WIDTH = 100


@dataclass
class TrainingConfig:
    lr: float = 0.001
    epochs: int = 2000
    batch_size: int = 256
    alpha: float = 1.0   # adversarial BCE
    beta: float = 10.0   # spatial L2
    gamma: float = 1.0   # day + hour SCE
    c: float = 1.0       # category SCE
    noise_dim: int = 28
    noise_per_slot: bool = True
    spatial_dim: int = 64
    units: int = 100
    seed: int = 0

    def __post_init__(self):
        weights = (self.alpha, self.beta, self.gamma, self.c)
        if min(weights) < 0:
            raise ValueError(f"loss weights must be >= 0, got {weights}")
        if max(weights) <= 0:
            raise ValueError("at least one loss weight must be positive")
        if self.lr <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("lr must be > 0, epochs >= 0, batch_size >= 1")

    @property
    def loss_weights(self):
        return (self.alpha, self.beta, self.gamma, self.c)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


class TrajectoryEmbedder:
    """Per-attribute ReLU embeddings, concatenated (with optional noise) and fused.

    Padded slots are forced to zero embeddings and zero fused features.
    """

    def __init__(self, name: str, n_categories: int, spatial_dim: int = 64,
                 noise_dim: int = 0, fused_dim: int = FUSED_WIDTH,
                 rng: np.random.Generator | None = None):
        self.spatial = Dense(f"{name}.embed_spatial", 2, spatial_dim, "relu", rng)
        self.day = Dense(f"{name}.embed_day", N_DAYS, N_DAYS, "relu", rng)
        self.hour = Dense(f"{name}.embed_hour", N_HOURS, N_HOURS, "relu", rng)
        self.cat = Dense(f"{name}.embed_cat", n_categories, n_categories, "relu", rng)
        self.noise_dim = noise_dim
        self.widths = (spatial_dim, N_DAYS, N_HOURS, n_categories)
        self.fusion = Dense(f"{name}.fusion", sum(self.widths) + noise_dim, fused_dim, "relu", rng)
        self._mask = None

    def layers(self):
        return [self.spatial, self.day, self.hour, self.cat, self.fusion]

    def parameters(self):
        return [p for layer in self.layers() for p in layer.parameters()]

    def forward(self, dev, day, hour, cat, mask, noise=None):
        m = np.asarray(mask, dtype=np.float64)[..., None]
        self._mask = m
        parts = [self.spatial.forward(dev) * m, self.day.forward(day) * m,
                 self.hour.forward(hour) * m, self.cat.forward(cat) * m]
        if self.noise_dim:
            if noise is None or noise.shape[-1] != self.noise_dim:
                raise ValueError(f"expected noise with last axis {self.noise_dim}")
            parts.append(noise * m)
        return self.fusion.forward(np.concatenate(parts, axis=-1)) * m

    def backward(self, d_fused):
        m = self._mask
        d_cat_in = self.fusion.backward(d_fused * m) * m
        grads = []
        start = 0
        for layer, width in zip(self.layers()[:4], self.widths):
            grads.append(layer.backward(d_cat_in[..., start:start + width]))
            start += width
        return tuple(grads)  # d_dev, d_day, d_hour, d_cat


@dataclass
class GeneratorOutput:
    dev: np.ndarray
    day: np.ndarray
    hour: np.ndarray
    cat: np.ndarray


class Generator:
    """Embeddings + noise -> fusion -> many-to-many LSTM -> per-slot decoders."""

    def __init__(self, n_categories: int, stretch=(1.0, 1.0), spatial_dim: int = 64,
                 noise_dim: int = 28, units: int = 100, rng: np.random.Generator | None = None,
                 fused_dim: int = FUSED_WIDTH):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_categories = n_categories
        self.stretch = np.asarray(stretch, dtype=np.float64)
        self.embedder = TrajectoryEmbedder("gen", n_categories, spatial_dim, noise_dim, fused_dim, rng)
        self.lstm = LSTM("gen.lstm", fused_dim, units, rng)
        self.dec_spatial = Dense("gen.dec_spatial", units, 2, "tanh", rng)
        self.dec_day = Dense("gen.dec_day", units, N_DAYS, "softmax", rng)
        self.dec_hour = Dense("gen.dec_hour", units, N_HOURS, "softmax", rng)
        self.dec_cat = Dense("gen.dec_cat", units, n_categories, "softmax", rng)
        self._mask = None

    @property
    def noise_dim(self):
        return self.embedder.noise_dim

    def decoders(self):
        return [self.dec_spatial, self.dec_day, self.dec_hour, self.dec_cat]

    def parameters(self):
        return self.embedder.parameters() + self.lstm.parameters() + [
            p for d in self.decoders() for p in d.parameters()]

    def forward(self, batch: EncodedBatch, noise) -> GeneratorOutput:
        m = batch.mask[..., None]
        self._mask = m
        fused = self.embedder.forward(batch.dev, batch.day, batch.hour, batch.cat, batch.mask, noise)
        h = self.lstm.forward(fused, batch.mask, "many_to_many")
        return GeneratorOutput(
            dev=self.dec_spatial.forward(h) * self.stretch * m,
            day=self.dec_day.forward(h) * m,
            hour=self.dec_hour.forward(h) * m,
            cat=self.dec_cat.forward(h) * m,
        )

    def backward(self, grads: GeneratorOutput):
        m = self._mask
        dh = self.dec_spatial.backward(grads.dev * self.stretch * m)
        dh = dh + self.dec_day.backward(grads.day * m)
        dh = dh + self.dec_hour.backward(grads.hour * m)
        dh = dh + self.dec_cat.backward(grads.cat * m)
        self.embedder.backward(self.lstm.backward(dh))


class Discriminator:
    """Embeddings -> fusion -> many-to-one LSTM -> sigmoid unit."""

    def __init__(self, n_categories: int, spatial_dim: int = 64, units: int = 100,
                 rng: np.random.Generator | None = None, fused_dim: int = FUSED_WIDTH):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.embedder = TrajectoryEmbedder("disc", n_categories, spatial_dim, 0, fused_dim, rng)
        self.lstm = LSTM("disc.lstm", fused_dim, units, rng)
        self.head = Dense("disc.head", units, 1, "sigmoid", rng)

    def parameters(self):
        return self.embedder.parameters() + self.lstm.parameters() + self.head.parameters()

    def forward(self, dev, day, hour, cat, mask):
        fused = self.embedder.forward(dev, day, hour, cat, mask)
        h = self.lstm.forward(fused, mask, "many_to_one")
        return self.head.forward(h)[:, 0]

    def backward(self, d_out):
        dh = self.head.backward(np.asarray(d_out)[:, None])
        return self.embedder.backward(self.lstm.backward(dh))


def generator_forward(batch: EncodedBatch, noise, params: Generator) -> GeneratorOutput:
    return params.forward(batch, noise)


def discriminator_forward(dev, day, hour, cat, mask, params: Discriminator):
    return params.forward(dev, day, hour, cat, mask)


# ------------------------------------------------------------------ TrajLoss

def traj_loss_terms(y_r, y_p, real: EncodedBatch, synth: GeneratorOutput):
    mask = real.mask
    return {
        "bce": loss_bce(y_r, y_p),
        "spatial": loss_l2_spatial(real.dev, synth.dev, mask),
        "temporal": loss_sce(real.hour, synth.hour, mask) + loss_sce(real.day, synth.day, mask),
        "categorical": loss_sce(real.cat, synth.cat, mask),
    }


def traj_loss(y_r, y_p, real: EncodedBatch, synth: GeneratorOutput, weights) -> float:
    """alpha*BCE + beta*L2(spatial) + gamma*(SCE hour + SCE day) + c*SCE(category)."""
    alpha, beta, gamma, c = weights
    t = traj_loss_terms(y_r, y_p, real, synth)
    return alpha * t["bce"] + beta * t["spatial"] + gamma * t["temporal"] + c * t["categorical"]


def traj_loss_grad(y_r, y_p, real: EncodedBatch, synth: GeneratorOutput, weights):
    """Gradients of ``traj_loss`` w.r.t. ``y_p`` and each generator output."""
    alpha, beta, gamma, c = weights
    mask = real.mask
    d_yp = alpha * loss_bce_grad(y_r, y_p)
    return d_yp, GeneratorOutput(
        dev=beta * loss_l2_spatial_grad(real.dev, synth.dev, mask),
        day=gamma * loss_sce_grad(real.day, synth.day, mask),
        hour=gamma * loss_sce_grad(real.hour, synth.hour, mask),
        cat=c * loss_sce_grad(real.cat, synth.cat, mask),
    )


# ----------------------------------------------------------------- training

@dataclass
class Checkpoint:
    generator: Generator
    discriminator: Discriminator
    config: TrainingConfig
    centroid: tuple
    category_vocab: tuple
    epoch: int = 0
    history: list = field(default_factory=list)

    @property
    def stretch(self):
        return tuple(float(s) for s in self.generator.stretch)


HISTORY_FIELDS = ("epoch", "d_loss", "g_loss", "g_bce", "g_spatial", "g_temporal", "g_categorical")


def compute_stretch(batch: EncodedBatch):
    s = np.abs(batch.dev * batch.mask[..., None]).max(axis=(0, 1))
    return np.where(s > 0, s, 1e-6)


def draw_noise(rng: np.random.Generator, batch: EncodedBatch, cfg: TrainingConfig):
    if cfg.noise_per_slot:
        z = rng.standard_normal((batch.size, batch.steps, cfg.noise_dim))
    else:
        z = np.repeat(rng.standard_normal((batch.size, 1, cfg.noise_dim)), batch.steps, axis=1)
    return z * batch.mask[..., None]


def build_models(n_categories: int, stretch, cfg: TrainingConfig):
    rng = np.random.default_rng(cfg.seed)
    gen = Generator(n_categories, stretch, cfg.spatial_dim, cfg.noise_dim, cfg.units, rng)
    disc = Discriminator(n_categories, cfg.spatial_dim, cfg.units, rng)
    return gen, disc


def _stack(real: EncodedBatch, fake: GeneratorOutput):
    return (np.concatenate([real.dev, fake.dev]), np.concatenate([real.day, fake.day]),
            np.concatenate([real.hour, fake.hour]), np.concatenate([real.cat, fake.cat]),
            np.concatenate([real.mask, real.mask]))


def generator_objective(gen: Generator, disc: Discriminator, real: EncodedBatch, noise,
                        weights, backward: bool = True, fake: GeneratorOutput | None = None):
    """TrajLoss of the generator with the "real" label; optionally backpropagates.

    Gradients reach the generator both directly and through the
    discriminator; discriminator gradients are left in place for the caller.
    """
    if fake is None:
        fake = gen.forward(real, noise)
    y_r = np.ones(real.size)
    y_p = disc.forward(fake.dev, fake.day, fake.hour, fake.cat, real.mask)
    terms = traj_loss_terms(y_r, y_p, real, fake)
    alpha, beta, gamma, c = weights
    loss = alpha * terms["bce"] + beta * terms["spatial"] + gamma * terms["temporal"] + c * terms["categorical"]
    if backward:
        d_yp, direct = traj_loss_grad(y_r, y_p, real, fake, weights)
        d_dev, d_day, d_hour, d_cat = disc.backward(d_yp)
        gen.backward(GeneratorOutput(direct.dev + d_dev, direct.day + d_day,
                                     direct.hour + d_hour, direct.cat + d_cat))
    return loss, terms


def discriminator_objective(disc: Discriminator, real: EncodedBatch, fake: GeneratorOutput,
                            backward: bool = True):
    """BCE with real trajectories labelled 1 and generated ones 0."""
    n = real.size
    labels = np.concatenate([np.ones(n), np.zeros(n)])
    p = disc.forward(*_stack(real, fake))
    if backward:
        disc.backward(loss_bce_grad(labels, p))
    return loss_bce(labels, p)


def train_step(gen: Generator, disc: Discriminator, d_opt: Adam, g_opt: Adam,
               real: EncodedBatch, noise, cfg: TrainingConfig):
    """One discriminator update followed by one generator update."""
    fake = gen.forward(real, noise)
    d_opt.zero_grad()
    d_loss = discriminator_objective(disc, real, fake)
    d_opt.step()

    g_opt.zero_grad()
    g_loss, terms = generator_objective(gen, disc, real, noise, cfg.loss_weights, fake=fake)
    d_opt.zero_grad()  # D gradients from the generator pass are discarded
    g_opt.step()
    return d_loss, g_loss, terms


def train_gan(ds: Dataset, cfg: TrainingConfig, progress=None) -> Checkpoint:
    """Adversarial training on the train split (or all trajectories if unsplit)."""
    trajs = ds.part("train") if ds.split else list(ds.trajectories)
    if not trajs:
        raise ValueError("training split is empty")
    encoded = encode_batch(trajs, ds.centroid, max(len(t) for t in trajs), ds.n_categories)
    stretch = compute_stretch(encoded)
    gen, disc = build_models(ds.n_categories, stretch, cfg)
    d_opt = Adam(disc.parameters(), cfg.lr)
    g_opt = Adam(gen.parameters(), cfg.lr)
    rng = np.random.default_rng([cfg.seed, 1])
    history = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(encoded.size)
        sums = np.zeros(6)
        count = 0
        for start in range(0, encoded.size, cfg.batch_size):
            batch = encoded.take(order[start:start + cfg.batch_size]).trimmed()
            noise = draw_noise(rng, batch, cfg)
            try:
                d_loss, g_loss, terms = train_step(gen, disc, d_opt, g_opt, batch, noise, cfg)
            except TrainingError as exc:
                raise TrainingError(f"epoch {epoch}, batch {start // cfg.batch_size}: {exc}") from None
            if not (np.isfinite(d_loss) and np.isfinite(g_loss)):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}")
            sums += (d_loss, g_loss, terms["bce"], terms["spatial"], terms["temporal"], terms["categorical"])
            count += 1
        row = dict(zip(HISTORY_FIELDS, (epoch, *(sums / count))))
        history.append(row)
        if progress is not None:
            progress(row)
        if epoch % 100 == 0 or epoch == cfg.epochs:
            log.info("epoch %d d_loss=%.4f g_loss=%.4f", epoch, row["d_loss"], row["g_loss"])
    return Checkpoint(gen, disc, cfg, tuple(ds.centroid), tuple(ds.category_vocab), cfg.epochs, history)


# --------------------------------------------------------------- generation

class VocabularyMismatch(ValueError):
    pass


def trajectory_noise(noise_seed: int, tid: int, length: int, cfg: TrainingConfig):
    rng = np.random.default_rng([noise_seed, tid % (1 << 63)])
    if cfg.noise_per_slot:
        return rng.standard_normal((length, cfg.noise_dim))
    return np.repeat(rng.standard_normal((1, cfg.noise_dim)), length, axis=0)


def generate_synthetic(trajectories: Sequence[Trajectory] | Dataset, ckpt: Checkpoint,
                       noise_seed: int = 0, category_vocab=None, chunk: int = 256) -> list[Trajectory]:
    """One synthetic trajectory per input: same tid, uid and length.

    Noise for each trajectory comes from a stream keyed by (noise_seed, tid),
    so output does not depend on batch composition.
    """
    if isinstance(trajectories, Dataset):
        category_vocab = trajectories.category_vocab if category_vocab is None else category_vocab
        trajectories = list(trajectories.trajectories)
    if category_vocab is not None and tuple(category_vocab) != tuple(ckpt.category_vocab):
        raise VocabularyMismatch(
            f"dataset vocabulary ({len(category_vocab)} categories) does not match the "
            f"checkpoint vocabulary ({len(ckpt.category_vocab)} categories)")
    cfg = ckpt.config
    out = []
    for start in range(0, len(trajectories), chunk):
        part = trajectories[start:start + chunk]
        steps = max(len(t) for t in part)
        batch = encode_batch(part, ckpt.centroid, steps, len(ckpt.category_vocab))
        noise = np.zeros((batch.size, steps, cfg.noise_dim))
        for b, t in enumerate(part):
            noise[b, steps - len(t):] = trajectory_noise(noise_seed, t.tid, len(t), cfg)
        g = ckpt.generator.forward(batch, noise)
        out.extend(decode_batch(g.dev, g.day, g.hour, g.cat, batch, ckpt.centroid))
    return out


# -------------------------------------------------------------- persistence

def _named(params):
    return {p.name: p.value for p in params}


def checkpoint_save(ckpt: Checkpoint, path: str | os.PathLike):
    meta = {
        "kind": "trajgan",
        "config": ckpt.config.to_dict(),
        "centroid": list(ckpt.centroid),
        "stretch": list(ckpt.stretch),
        "category_vocab": list(ckpt.category_vocab),
        "epoch": ckpt.epoch,
        "history_fields": list(HISTORY_FIELDS),
    }
    tensors = {**_named(ckpt.generator.parameters()), **_named(ckpt.discriminator.parameters())}
    hist = np.array([[row[k] for k in HISTORY_FIELDS] for row in ckpt.history], dtype=np.float64)
    tensors["history"] = hist.reshape(len(ckpt.history), len(HISTORY_FIELDS))
    container.save(path, meta, tensors)


def checkpoint_load(path: str | os.PathLike, category_vocab=None) -> Checkpoint:
    meta, tensors = container.load(path)
    if meta.get("kind") != "trajgan":
        raise container.ContainerError(f"{path}: not a TrajGAN checkpoint (kind={meta.get('kind')!r})")
    vocab = tuple(meta["category_vocab"])
    if category_vocab is not None and tuple(category_vocab) != vocab:
        raise VocabularyMismatch(
            f"checkpoint has {len(vocab)} categories {list(vocab)}, dataset has "
            f"{len(category_vocab)} {list(category_vocab)}")
    cfg = TrainingConfig.from_dict(meta["config"])
    gen, disc = build_models(len(vocab), meta["stretch"], cfg)
    for p in gen.parameters() + disc.parameters():
        if p.name not in tensors or tensors[p.name].shape != p.shape:
            raise container.ContainerError(f"{path}: tensor {p.name} missing or mis-shaped")
        p.value = tensors[p.name].copy()
    fields = meta.get("history_fields", list(HISTORY_FIELDS))
    history = [dict(zip(fields, (int(r[0]), *map(float, r[1:])))) for r in tensors.get("history", [])]
    return Checkpoint(gen, disc, cfg, tuple(meta["centroid"]), vocab, int(meta["epoch"]), history)


def history_csv(history) -> str:
    lines = [",".join(HISTORY_FIELDS)]
    for row in history:
        lines.append(",".join([str(int(row["epoch"]))] + [repr(float(row[k])) for k in HISTORY_FIELDS[1:]]))
    return "\n".join(lines) + "\n"
