from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace


class ParamError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Constants of the two-species chemotaxis / competition system.

    ``d1 = d2 = 0`` selects the hyperbolic-hyperbolic-elliptic limit.
    """

    d1: float = 1.0
    d2: float = 1.0
    d3: float = 1.0
    chi1: float = 1.0
    chi2: float = 1.0
    mu1: float = 1.0
    mu2: float = 1.0
    a1: float = 1.0
    a2: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ParamError(f"{f.name} must be a finite real, got {v!r}")
        for name in ("d1", "d2", "a1", "a2"):
            if getattr(self, name) < 0:
                raise ParamError(f"{name} must be >= 0, got {getattr(self, name)}")
        for name in ("d3", "alpha", "beta", "gamma"):
            if getattr(self, name) <= 0:
                raise ParamError(f"{name} must be > 0, got {getattr(self, name)}")
        # chi and mu may be 0 for control runs (no chemotaxis / no kinetics)
        for name in ("chi1", "chi2", "mu1", "mu2"):
            if getattr(self, name) < 0:
                raise ParamError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def hyperbolic(self) -> bool:
        return self.d1 == 0.0 and self.d2 == 0.0

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)

    def to_dict(self) -> dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}


def unit_params(**overrides) -> ModelParams:
    """All twelve constants set to 1, then ``overrides`` applied."""
    return ModelParams(**overrides)
