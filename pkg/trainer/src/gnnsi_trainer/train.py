"""Full-batch Adam training on the synthetic dataset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .config import TrainConfig
from .data import make_dataset
from .models import build_model, propagation


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during optimization."""


@dataclass
class TrainResult:
    model: torch.nn.Module
    config: TrainConfig
    train_accuracy: float
    eval_accuracy: float
    final_loss: float
    eval_samples: list


def _accuracy(model, arch, samples) -> float:
    correct = 0
    with torch.no_grad():
        for adj, x, label in samples:
            prop = propagation(arch, adj)
            logits = model(prop, torch.tensor(x, dtype=torch.float64))
            correct += int(int(torch.argmax(logits)) == label)
    return correct / len(samples)


def train(cfg: TrainConfig) -> TrainResult:
    torch.manual_seed(cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    train_samples, eval_samples = make_dataset(cfg.dataset, rng)
    model = build_model(cfg.architecture, cfg.dataset.d, cfg.hidden,
                        cfg.gin_mlp_hidden, cfg.n_classes, cfg.seed)
    # graphs vary per sample, so precompute each propagation matrix once
    batch = [(propagation(cfg.architecture, adj),
              torch.tensor(x, dtype=torch.float64),
              torch.tensor(label))
             for adj, x, label in train_samples]
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate)
    loss_fn = torch.nn.CrossEntropyLoss()
    loss_value = float("nan")
    for _ in range(cfg.epochs):
        optimizer.zero_grad()
        logits = torch.stack([model(prop, x) for prop, x, _ in batch])
        labels = torch.stack([label for _, _, label in batch])
        loss = loss_fn(logits, labels)
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"loss became {float(loss)}")
        loss.backward()
        optimizer.step()
        loss_value = float(loss.detach())
    return TrainResult(
        model=model,
        config=cfg,
        train_accuracy=_accuracy(model, cfg.architecture, train_samples),
        eval_accuracy=_accuracy(model, cfg.architecture, eval_samples),
        final_loss=loss_value,
        eval_samples=eval_samples,
    )
