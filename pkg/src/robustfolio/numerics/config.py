from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Any, Mapping

from ..errors import DomainError


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-9
    max_iterations: int = 10_000
    step_a: float = 1.0  # supergradient step a / (k + b)
    step_b: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DomainError(f"tolerance must be positive, got {self.tolerance!r}")
        if self.max_iterations < 1:
            raise DomainError(f"max_iterations must be >= 1, got {self.max_iterations!r}")
        if not (self.step_a > 0 and self.step_b > 0):
            raise DomainError("step rule parameters must be positive")

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SolverConfig":
        known = {k: doc[k] for k in cls.__dataclass_fields__ if k in doc}
        unknown = set(doc) - set(known)
        if unknown:
            raise DomainError(f"unknown solver config keys: {sorted(unknown)}")
        return cls(**known)


DEFAULT = SolverConfig()
