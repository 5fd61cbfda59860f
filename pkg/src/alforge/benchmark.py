"""Reference metadata for the ten-task text-classification benchmark suite.

Budgets are the per-dataset label budgets the suite is run with; model
records carry the embedding metadata (dimension, pooling token, leaderboard
score) used to populate dataset manifests.
"""

from dataclasses import dataclass

DATASET_BUDGETS = {
    "agnews": 1000,
    "banking77": 5000,
    "dbpedia": 500,
    "fnc1": 3500,
    "mnli": 4000,
    "qnli": 4500,
    "sst2": 500,
    "trec6": 1000,
    "wikitalk": 3000,
    "yelp5": 2500,
}


@dataclass(frozen=True)
class ModelInfo:
    name: str
    num_params: str
    embedding_dim: int
    pooling: str
    mteb_rank: int | None
    mteb_score: float


EMBEDDING_MODELS = (
    ModelInfo("nvidia-embed-v2", "7.8B", 4096, "CLS", 1, 72.31),
    ModelInfo("bge-en-icl", "7.1B", 4096, "EOS", 2, 71.67),
    ModelInfo("stella-v5", "1.5B", 1536, "CLS", 3, 71.19),
    ModelInfo("sfr-embed-2", "7.1B", 4096, "EOS", 4, 70.31),
    ModelInfo("qwen2.5-7b", "7.6B", 3584, "EOS", 6, 69.59),
    ModelInfo("modernbert-base", "150M", 768, "CLS", None, 62.61),
    ModelInfo("bert-base-uncased", "110M", 768, "CLS", 174, 38.33),
)

DEFAULT_SWEEP_SIZES = (20, 50, 100, 250, 500, 1000, 2500, 5000)
