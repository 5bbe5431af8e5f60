"""Pipeline parameters and the flat ``key = value`` config format."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractError


def _default_betas():
    return (200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0)


@dataclass(frozen=True)
class PipelineConfig:
    L: int = 6
    mu: float = 8.0
    R: int = 14
    d: int = 6
    e1: float = 20.0
    e2: float = 40.0
    alpha: float = 1e-10
    betas: tuple = field(default_factory=_default_betas)
    gammas: tuple = (0.5, 1.5, 2.0)
    target_n: int = 600
    bins: int = 64
    bandwidth: float | None = None
    geodesic_range: float | None = None
    gamma_b: float = 5.0
    pairwise_weight: float = 100.0
    seed: int = 0
    kmeans_weighted: bool = False
    normalize_affinity: bool = True
    eig_tol: float = 1e-8
    eig_maxiter: int | None = None
    compactness: float = 0.0
    edge_sigma: float = 1.0

    def __post_init__(self):
        for name in ("L", "R", "d", "target_n", "bins"):
            if getattr(self, name) < 1:
                raise ContractError(f"{name} must be >= 1")
        if not self.e2 > self.e1 > 0:
            raise ContractError("need e2 > e1 > 0")
        if self.mu < 0:
            raise ContractError("mu must be >= 0")
        if self.alpha <= 0:
            raise ContractError("alpha must be > 0")
        if not self.betas:
            raise ContractError("betas must be nonempty")

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {f.name: (list(v) if isinstance(v := getattr(self, f.name), tuple) else v)
                for f in dataclasses.fields(self)}


_NONE = {"none", "null", ""}


def _parse_value(name: str, raw: str, default):
    raw = raw.strip()
    if name in ("betas", "gammas"):
        return tuple(float(x) for x in raw.replace(",", " ").split())
    if name in ("bandwidth", "geodesic_range"):
        return None if raw.lower() in _NONE else float(raw)
    if name == "eig_maxiter":
        return None if raw.lower() in _NONE else int(raw)
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int):
        return int(raw)
    return float(raw)


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Unknown keys fail."""
    base = base or PipelineConfig()
    fields = {f.name for f in dataclasses.fields(PipelineConfig)}
    changes = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ContractError(f"config line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in fields:
            raise ContractError(f"config line {lineno}: unknown key {key!r}")
        try:
            changes[key] = _parse_value(key, raw, getattr(base, key))
        except ValueError as exc:
            raise ContractError(f"config line {lineno}: bad value for {key}: {exc}") from None
    return base.replace(**changes)


def load_config(path) -> PipelineConfig:
    return parse_config(Path(path).read_text())


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, list):
            value = ", ".join(f"{v:g}" for v in value)
        elif value is None:
            value = "none"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
