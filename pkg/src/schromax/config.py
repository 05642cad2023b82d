"""Run configuration: JSON file plus command-line overrides."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .errors import InvalidArgument

DEFAULT_LADDER = (256.0, 1024.0, 4096.0, 16384.0)


@dataclass
class RunConfig:
    n: int = 2
    m: int = 1
    p: str = "2"
    ladder: list = field(default_factory=lambda: list(DEFAULT_LADDER))
    c_win: float = 0.5
    n_t: int = 33
    x_step: float = 1.0 / 64
    u_fraction: float = 1.0 / 8
    e0: list = None
    threshold_factor: float = 0.5
    mc_points: int = 100_000
    seed: int = 0
    out: str = "ladder_out"
    fhat: str = None

    def validate(self):
        from .scaling import as_rational

        if not isinstance(self.n, int) or not isinstance(self.m, int):
            raise InvalidArgument("n and m must be integers")
        if not 1 <= self.m <= self.n:
            raise InvalidArgument(f"need 1 <= m <= n, got m={self.m}, n={self.n}")
        if as_rational(self.p) < 1:
            raise InvalidArgument(f"p must be >= 1, got {self.p}")
        if not self.ladder:
            raise InvalidArgument("ladder must list at least one R")
        Rs = [float(r) for r in self.ladder]
        if any(not (math.isfinite(r) and r > 1) for r in Rs):
            raise InvalidArgument(f"every R must be > 1, got {self.ladder}")
        if any(b <= a for a, b in zip(Rs, Rs[1:])):
            raise InvalidArgument("ladder must be strictly increasing")
        for name in ("c_win", "x_step", "u_fraction", "threshold_factor"):
            if not getattr(self, name) > 0:
                raise InvalidArgument(f"{name} must be positive")
        if not isinstance(self.n_t, int) or self.n_t < 2:
            raise InvalidArgument("n_t must be an integer >= 2")
        if not isinstance(self.mc_points, int) or self.mc_points < 1:
            raise InvalidArgument("mc_points must be a positive integer")
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise InvalidArgument("seed must be an integer in [0, 2^64)")
        if self.e0 is not None and len(self.e0) != self.m:
            raise InvalidArgument(f"e0 must give {self.m} interval(s)")
        if self.fhat is None and self.m != 1:
            raise InvalidArgument("m >= 2 requires an fhat lattice file")
        return self

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidArgument(f"unknown config keys: {unknown}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise InvalidArgument("config must be a JSON object")
        return cls.from_dict(data)
