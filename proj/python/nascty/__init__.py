# Copyright 2026 The NASCTY Authors.
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

"""Neuroevolution of CNN architectures for profiling side-channel attacks."""

from ._core import (
    DataError,
    Genome,
    TraceSet,
    ValidationError,
    evolve,
    generate_traces,
    guessing_entropy,
    key_rank,
    log_prob_vector,
    normalize,
    read_traceset,
    run_cli,
    sbox,
    write_traceset,
)

__all__ = [
    "DataError",
    "Genome",
    "TraceSet",
    "ValidationError",
    "evolve",
    "generate_traces",
    "guessing_entropy",
    "key_rank",
    "log_prob_vector",
    "normalize",
    "read_traceset",
    "run_cli",
    "sbox",
    "write_traceset",
]
