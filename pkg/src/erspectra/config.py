"""Calibrated constants and solver settings, overridable from a JSON file.

The theory leaves most absolute constants unnamed.  Every such constant used
by the library lives here so that a run can be reproduced from the resolved
configuration embedded in its output.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

SCHEMA_VERSION = "1.0"
RNG_IDENTITY = "numpy.random.PCG64 seeded by SeedSequence(seed, spawn_key=(index,))"


@dataclasses.dataclass(frozen=True)
class Config:
    # exponent gamma in (0, 1/6) used by every envelope and vertex class
    gamma: float = 0.125
    # constant c of the admissible (alpha, beta) region |beta - 1| <= c min(1, alpha - 2)
    c_admissible: float = 0.25
    # c_* in the W / V / U thresholds and in the alpha window q
    c_star: float = 3.0
    # c in the default ball radius 42 + floor((1/c) a^2/(a-2)^2 log d / log a)
    c_radius: float = 0.1
    # c_* in the eigenvector tail radius 22 + (1/c_*) (log d/log alpha)(alpha/(alpha-2))^2
    c_tail: float = 0.1
    # c in the rigidity window sigma - c * chi
    c_window: float = 0.5
    # explicit alpha-window half-width; None means derive it from c_star
    q_window: float | None = None
    # truncation size for the model operator
    n_truncation: int = 256
    # sparse eigensolver settings
    eig_tol: float = 1e-10
    eig_ncv: int = 64
    residual_tol: float = 1e-8
    dense_max: int = 4096
    # expected number of points above the window edge
    K: float = 5.0
    # rigidity matching tolerance in rescaled units
    gap_tol: float = 0.1
    # localization envelope q = loc_factor / sigma, plus additive slack
    loc_factor: float = 2.5
    loc_slack: float = 0.05
    # envelope constants reported by the checks
    C_lambda_d: float = 10.0
    C_mz: float = 10.0
    C_lipschitz: float = 10.0
    C_moivre: float = 10.0
    C_binomial: float = 5.0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path | None) -> "Config":
        if path is None:
            return cls()
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


DEFAULT = Config()
