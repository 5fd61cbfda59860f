"""Documented pooling conventions for the benchmark's embedding models.

Extraction refuses a pooling mode that contradicts the model's documented
convention; unknown models are unconstrained.
"""

DOCUMENTED_POOLING = {
    "nv-embed-v2": "CLS",
    "bge-en-icl": "EOS",
    "stella_en_1.5b_v5": "CLS",
    "sfr-embedding-2_r": "EOS",
    "qwen2.5-7b-instruct": "EOS",
    "modernbert-base": "CLS",
    "bert-base-uncased": "CLS",
}


def documented_pooling(model_id: str) -> str | None:
    """Convention for a hub id or local path, matched on the last component."""
    base = model_id.rstrip("/").rsplit("/", 1)[-1].lower()
    return DOCUMENTED_POOLING.get(base)
