"""Deterministic random-stream derivation from a single 64-bit run seed.

Every source of randomness in a run is a child of ``SeedSequence(run_seed)``
split by a documented ``spawn_key`` prefix, so independent components (and
independent re-implementations) can reproduce any individual stream without
replaying the whole run.  Stream constants are part of the file-format
contract recorded in run summaries.
"""

from __future__ import annotations

import numpy as np

# spawn_key stream constants; indices after the constant are documented below
STREAM_INITIAL_DESIGN = 1  # ()            initial design: choice, perturbation, noise
STREAM_QUADRATURE = 2      # (trial, candidate) quadrature node draws
STREAM_OUTER = 3           # (trial,)      shared outer perturbation deviates
STREAM_EXPLORE = 4         # (trial,)      Bernoulli explore/exploit coin
STREAM_SELECT = 5          # (trial,)      uniform selection / random-method scores
STREAM_PERTURB = 6         # (trial,)      realized input perturbation
STREAM_NOISE = 7           # (trial,)      observation noise
STREAM_ORACLE = 8          # (candidate,)  ground-truth reliability sampling
STREAM_REPLICATION = 9     # (replication,) per-replication run-seed derivation
STREAM_TRUTH = 10          # ()            synthetic truth draws (prior samples, data)

MAX_SEED = 2**64 - 1


def stream_rng(run_seed: int, stream: int, *indices: int) -> np.random.Generator:
    """Generator for the given stream of a run, keyed by integer indices."""
    seq = np.random.SeedSequence(run_seed, spawn_key=(stream, *indices))
    return np.random.default_rng(seq)


def replication_seed(master_seed: int, replication: int) -> int:
    """Derive the 64-bit run seed of one replication from the master seed."""
    seq = np.random.SeedSequence(master_seed, spawn_key=(STREAM_REPLICATION, replication))
    return int(seq.generate_state(1, np.uint64)[0])
