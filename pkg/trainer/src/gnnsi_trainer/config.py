"""Training configuration, JSON-compatible."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class DatasetConfig:
    """Synthetic two-class dataset: class 1 graphs carry a sparse mean
    shift of size ``delta``; class 0 graphs are pure noise."""

    n_graphs: int = 200
    n_nodes: int = 16
    d: int = 5
    avg_degree: float = 3.0
    delta: float = 2.5
    flip_prob: float = 0.3
    eval_fraction: float = 0.25

    def __post_init__(self):
        if self.n_graphs < 4:
            raise ValueError("need at least four graphs")
        if not 0.0 < self.eval_fraction < 1.0:
            raise ValueError("eval_fraction must lie in (0, 1)")


@dataclass
class TrainConfig:
    """Architecture and optimization settings.

    Defaults mirror the engine's model family: three GCN layers of width
    10, or GIN blocks with a 64/64 MLP.
    """

    architecture: str = "gcn"
    hidden: list = field(default_factory=lambda: [10, 10, 10])
    gin_mlp_hidden: int = 64
    n_classes: int = 2
    epochs: int = 200
    learning_rate: float = 0.01
    seed: int = 0
    dataset: DatasetConfig = field(default_factory=DatasetConfig)

    def __post_init__(self):
        if self.architecture not in ("gcn", "gin"):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if isinstance(self.dataset, dict):
            self.dataset = DatasetConfig(**self.dataset)

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)

    @staticmethod
    def from_json(path) -> "TrainConfig":
        with open(path) as fh:
            return TrainConfig(**json.load(fh))
