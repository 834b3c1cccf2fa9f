import numpy as np
import pytest

from woodwatch.features import FeatureConfig, FeatureSet, mfcc_frames
from woodwatch.synth import SynthConfig, gen_clean_clip, gen_infested_clip


def make_feature_set(n_per_class: int, duration_s: float = 1.25, snr_db: float = 12.0,
                     seed: int = 0) -> FeatureSet:
    """Small labeled feature set for fast model tests (T = 40 at 1.25 s)."""
    cfg = SynthConfig(duration_s=duration_s, snr_db=snr_db, seed=seed)
    rng = np.random.default_rng(seed)
    clip_seeds = rng.integers(0, 2**63, size=2 * n_per_class)
    ids, labels, matrices = [], [], []
    for i in range(n_per_class):
        ids.append(f"clean/{i}")
        labels.append(0)
        matrices.append(mfcc_frames(gen_clean_clip(cfg, int(clip_seeds[i]))).values)
    for i in range(n_per_class):
        ids.append(f"infested/{i}")
        labels.append(1)
        matrices.append(mfcc_frames(gen_infested_clip(cfg, int(clip_seeds[n_per_class + i]))).values)
    return FeatureSet(ids, np.array(labels), np.stack(matrices), FeatureConfig())


@pytest.fixture(scope="session")
def tiny_features() -> FeatureSet:
    return make_feature_set(8, seed=101)
