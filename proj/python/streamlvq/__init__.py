# Copyright 2026-present the streamlvq authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Dynamic graph index over locally-adaptive quantized vectors."""

from ._streamlvq import (
    ArgumentError,
    FormatError,
    Index,
    StateError,
    brute_force_knn,
    lvq_encode,
    num_threads,
    set_num_threads,
)

__all__ = [
    "ArgumentError",
    "FormatError",
    "Index",
    "StateError",
    "brute_force_knn",
    "lvq_encode",
    "num_threads",
    "recall_at_k",
    "set_num_threads",
]


def recall_at_k(found, truth, k):
    """Mean fraction of the true top-k ids present in each result row."""
    import numpy as np

    found = np.asarray(found)[:, :k]
    truth = np.asarray(truth)[:, :k]
    if found.shape[0] != truth.shape[0]:
        raise ValueError("result and ground-truth row counts differ")
    hits = sum(len(set(f.tolist()) & set(t.tolist())) for f, t in zip(found, truth))
    return hits / float(k * truth.shape[0])
