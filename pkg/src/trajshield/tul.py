"""Trajectory-user linking classifier and its accuracy metrics.

The classifier reuses the discriminator's front end (per-attribute
embeddings and fusion) with a many-to-one LSTM and a softmax over users.
Spatial deviations are divided by their training-set standard deviation
before embedding, so nearby users stay separable.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import container
from .data import Trajectory
from .encoding import EncodedBatch, encode_batch
from .neural import LSTM, Adam, Dense, loss_sce, loss_sce_grad
from .trajgan import FUSED_WIDTH, TrajectoryEmbedder

log = logging.getLogger(__name__)


class UnknownUserError(ValueError):
    pass


class TulModel:
    def __init__(self, users: Sequence[int], n_categories: int, centroid,
                 spatial_dim: int = 64, units: int = 100, seed: int = 0, spatial_scale: float = 1.0):
        rng = np.random.default_rng(seed)
        self.users = [int(u) for u in users]
        self.index = {u: i for i, u in enumerate(self.users)}
        self.n_categories = n_categories
        self.centroid = tuple(centroid)
        self.spatial_dim = spatial_dim
        self.spatial_scale = float(spatial_scale)
        self.embedder = TrajectoryEmbedder("tul", n_categories, spatial_dim, 0, rng=rng)
        self.lstm = LSTM("tul.lstm", FUSED_WIDTH, units, rng)
        self.head = Dense("tul.head", units, len(self.users), "softmax", rng)
        self.history: list[float] = []

    def parameters(self):
        return self.embedder.parameters() + self.lstm.parameters() + self.head.parameters()

    def forward(self, batch: EncodedBatch):
        fused = self.embedder.forward(batch.dev * self.spatial_scale, batch.day, batch.hour, batch.cat, batch.mask)
        return self.head.forward(self.lstm.forward(fused, batch.mask, "many_to_one"))

    def backward(self, d_probs):
        self.embedder.backward(self.lstm.backward(self.head.backward(d_probs)))

    def encode(self, trajectories: Sequence[Trajectory]) -> EncodedBatch:
        return encode_batch(trajectories, self.centroid, max(len(t) for t in trajectories),
                            self.n_categories)

    def labels(self, trajectories: Sequence[Trajectory]) -> np.ndarray:
        missing = sorted({t.uid for t in trajectories} - set(self.index))
        if missing:
            raise UnknownUserError(f"users not seen in TUL training: {missing[:10]}")
        return np.array([self.index[t.uid] for t in trajectories])

    def predict_proba(self, trajectories: Sequence[Trajectory], chunk: int = 512) -> np.ndarray:
        out = []
        for s in range(0, len(trajectories), chunk):
            out.append(self.forward(self.encode(trajectories[s:s + chunk])))
        return np.concatenate(out)

    def save(self, path: str | os.PathLike):
        meta = {"kind": "tul", "users": self.users, "n_categories": self.n_categories,
                "centroid": list(self.centroid), "spatial_dim": self.spatial_dim,
                "units": self.lstm.units, "spatial_scale": self.spatial_scale, "history": self.history}
        container.save(path, meta, {p.name: p.value for p in self.parameters()})

    @classmethod
    def load(cls, path: str | os.PathLike) -> "TulModel":
        meta, tensors = container.load(path)
        if meta.get("kind") != "tul":
            raise container.ContainerError(f"{path}: not a TUL model (kind={meta.get('kind')!r})")
        model = cls(meta["users"], meta["n_categories"], meta["centroid"],
                    meta["spatial_dim"], meta["units"], spatial_scale=meta["spatial_scale"])
        for p in model.parameters():
            if p.name not in tensors or tensors[p.name].shape != p.shape:
                raise container.ContainerError(f"{path}: tensor {p.name} missing or mis-shaped")
            p.value = tensors[p.name].copy()
        model.history = list(meta.get("history", []))
        return model


def train_tul(trajectories: Sequence[Trajectory], n_categories: int, centroid,
              epochs: int = 200, lr: float = 0.001, seed: int = 0, batch_size: int = 256,
              spatial_dim: int = 64, units: int = 100) -> TulModel:
    """Softmax cross-entropy training with Adam; labels are the train users."""
    users = sorted({t.uid for t in trajectories})
    if len(users) < 2:
        raise ValueError("TUL training needs at least two users")
    model = TulModel(users, n_categories, centroid, spatial_dim, units, seed)
    encoded = model.encode(list(trajectories))
    real = encoded.dev[encoded.mask > 0]
    std = float(real.std())
    model.spatial_scale = 1.0 / std if std > 0 else 1.0
    onehot = np.eye(len(users))[model.labels(trajectories)]
    opt = Adam(model.parameters(), lr)
    rng = np.random.default_rng([seed, 2])
    for epoch in range(epochs):
        order = rng.permutation(encoded.size)
        total, count = 0.0, 0
        for s in range(0, encoded.size, batch_size):
            rows = order[s:s + batch_size]
            batch = encoded.take(rows).trimmed()
            ones = np.ones((len(rows), 1))
            opt.zero_grad()
            probs = model.forward(batch)
            total += loss_sce(onehot[rows][:, None, :], probs[:, None, :], ones)
            model.backward(loss_sce_grad(onehot[rows][:, None, :], probs[:, None, :], ones)[:, 0, :])
            opt.step()
            count += 1
        model.history.append(total / count)
    log.info("TUL trained %d epochs, final loss %.4f", epochs, model.history[-1] if model.history else float("nan"))
    return model


@dataclass
class TulScores:
    acc1: float
    acc5: float
    macro_p: float
    macro_r: float
    macro_f1: float

    def as_dict(self):
        return {"acc1": self.acc1, "acc5": self.acc5, "macro_p": self.macro_p,
                "macro_r": self.macro_r, "macro_f1": self.macro_f1}


def scores_from_proba(probs: np.ndarray, labels: np.ndarray) -> TulScores:
    """ACC@1, ACC@5 and macro precision/recall/F1 over classes present in ``labels``."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise ValueError("no trajectories to score")
    # stable sort on negated probabilities: ties go to the lower class index
    ranking = np.argsort(-probs, axis=1, kind="stable")
    pred = ranking[:, 0]
    acc1 = float(np.mean(pred == labels))
    k = min(5, probs.shape[1])
    acc5 = float(np.mean(np.any(ranking[:, :k] == labels[:, None], axis=1)))
    precisions, recalls = [], []
    for cls in np.unique(labels):
        tp = np.sum((pred == cls) & (labels == cls))
        predicted = np.sum(pred == cls)
        precisions.append(tp / predicted if predicted else 0.0)
        recalls.append(tp / np.sum(labels == cls))
    mp, mr = float(np.mean(precisions)), float(np.mean(recalls))
    f1 = 2 * mp * mr / (mp + mr) if mp + mr > 0 else 0.0
    return TulScores(acc1, acc5, mp, mr, float(f1))


def tul_metrics(model: TulModel, trajectories: Sequence[Trajectory]) -> TulScores:
    if not trajectories:
        raise ValueError("no trajectories to score")
    labels = model.labels(trajectories)
    return scores_from_proba(model.predict_proba(list(trajectories)), labels)
