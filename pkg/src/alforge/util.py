"""Deterministic seeding and hashing helpers.

Every random stream in the package is derived from a tuple of parts
(experiment seed, strategy name, purpose string) so that adding a strategy
or reordering work never perturbs another stream's draws.
"""

import hashlib
import json

import numpy as np


def stable_u64(part) -> int:
    """Map a seed part (int or str) to a stable unsigned 64-bit value."""
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFFFFFFFFFF
    digest = hashlib.sha256(str(part).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(*parts) -> np.random.Generator:
    """Build a Generator from a stable hash of the given parts."""
    entropy = [stable_u64(p) for p in parts]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def config_hash(obj) -> str:
    """SHA-256 over the canonical JSON encoding of a plain config object."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
