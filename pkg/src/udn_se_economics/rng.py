# src/udn_se_economics/rng.py
from __future__ import annotations

import numpy as np

# 試行内のストリーム番号
STREAM_TOPOLOGY = 0
STREAM_FADING = 1


def trial_generator(seed: int, trial: int, stream: int) -> np.random.Generator:
    """
    (seed, trial, stream) をキーにしたカウンタ型 (Philox) 乱数。
    試行ごとに独立なので、並列度や実行順に関係なく同じ列が出る。
    点ごとの値は各ストリーム内で点インデックス順に引く。
    """
    if seed < 0 or trial < 0 or stream < 0:
        raise ValueError(f"seed/trial/stream must be non-negative: {(seed, trial, stream)!r}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(trial), int(stream)))
    return np.random.Generator(np.random.Philox(ss))
