import cmath
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from rhparametrix.numerics import Tolerance
from rhparametrix.surface import Side, SurfaceConfig, SurfaceConfigError
from rhparametrix.utils import load_config, logger

PROBLEM_KEYS = {"cuts", "alpha", "n", "beta", "tolerances", "output"}


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_depth: int = 50
    invert_tol: float = 1e-10
    jump_threshold: float = 1e-7
    det_threshold: float = 1e-9

    @classmethod
    def from_dict(cls, data: dict) -> "Tolerances":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown tolerance keys: {sorted(unknown)}")
        try:
            return cls(**{k: type(getattr(cls, k))(v) for k, v in data.items()})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"invalid tolerance value: {e}")

    @property
    def quadrature(self) -> Tolerance:
        try:
            return Tolerance(self.abs_tol, self.rel_tol, self.max_depth)
        except ValueError as e:
            raise ConfigError(str(e))


@dataclass(frozen=True)
class ProblemConfig:
    cuts: tuple[tuple[float, float], ...]
    alpha: tuple[float, ...]
    n: int
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: Path = Path("out")
    beta: tuple[float, ...] | None = None

    @property
    def surface(self) -> SurfaceConfig:
        return SurfaceConfig(self.cuts)

    @property
    def targets(self) -> np.ndarray:
        return np.mod(self.n * np.array(self.alpha, dtype=float), 1.0)

    @classmethod
    def from_dict(cls, data: dict, defaults: dict | None = None) -> "ProblemConfig":
        if not isinstance(data, dict):
            raise ConfigError("the configuration must be a JSON object")
        unknown = set(data) - PROBLEM_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for key in ("cuts", "alpha", "n"):
            if key not in data:
                raise ConfigError(f"missing required key {key!r}")

        # raises SurfaceConfigError naming the violated ordering
        try:
            surface = SurfaceConfig(tuple(tuple(c) for c in data["cuts"]))
            alpha = tuple(float(a) for a in data["alpha"])
        except SurfaceConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"cuts and alpha must be lists of numbers: {e}")
        if len(alpha) != surface.genus:
            raise ConfigError(
                f"len(alpha) = {len(alpha)} but N - 1 = {surface.genus} is required"
            )
        if any(not math.isfinite(a) for a in alpha):
            raise ConfigError("alpha entries must be finite")

        n = data["n"]
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise ConfigError(f"n must be an integer >= 0, got {n!r}")

        beta = data.get("beta")
        if beta is not None:
            try:
                beta = tuple(float(b) for b in beta)
            except (TypeError, ValueError):
                raise ConfigError(f"beta must be a list of numbers, got {beta!r}")
            if len(beta) != surface.genus or any(not 0 <= b < 1 for b in beta):
                raise ConfigError(f"beta must hold {surface.genus} values in [0, 1)")

        merged = dict((defaults or {}).get("tolerances", {}))
        merged.update(data.get("tolerances", {}))
        output = data.get("output", {})

        return cls(
            cuts=surface.cuts,
            alpha=alpha,
            n=n,
            tolerances=Tolerances.from_dict(merged),
            output_dir=Path(output.get("dir", "out")),
            beta=beta,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ProblemConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}")

        defaults = load_config()
        if defaults:
            logger.debug("merging per-user defaults")
        return cls.from_dict(data, defaults)

    def with_overrides(self, tol: float | None = None, out: str | None = None):
        config = self
        if tol is not None:
            config = replace(
                config, tolerances=replace(config.tolerances, abs_tol=tol, rel_tol=tol)
            )
        if out is not None:
            config = replace(config, output_dir=Path(out))
        return config


GridPoint = tuple[complex, Side | None]


def _count(spec: dict) -> int:
    try:
        count = int(spec.get("count", 50))
    except ValueError:
        raise ConfigError(f"count must be an integer, got {spec['count']!r}")
    if count < 0:
        raise ConfigError(f"count must be non-negative, got {count}")
    return count


def _number(spec: dict, key: str, default=None) -> complex:
    if key not in spec:
        if default is None:
            raise ConfigError(f"grid spec needs {key}=...")
        return default
    try:
        return complex(spec[key].replace(" ", ""))
    except ValueError:
        raise ConfigError(f"cannot parse {key}={spec[key]!r} as a number")


def parse_grid(spec: dict) -> list[GridPoint]:
    """
    Points from a KEY=VALUE grid spec:

        kind=circle radius=R [center=C] [count=K]
        kind=segment start=X end=Y [count=K] [side=above|below|both]
        kind=point z=Z [side=above|below]
    """
    kind = spec.get("kind")
    if kind == "circle":
        radius = _number(spec, "radius").real
        center = _number(spec, "center", 0j)
        count = _count(spec)
        # quarter-step offset keeps every point off the real axis
        angles = 2 * math.pi * (np.arange(count) + 0.25) / max(count, 1)
        return [(center + radius * cmath.exp(1j * t), None) for t in angles]

    if kind == "segment":
        start, end = _number(spec, "start"), _number(spec, "end")
        count = _count(spec)
        side = spec.get("side", "both")
        if side not in ("above", "below", "both"):
            raise ConfigError(f"side must be above, below or both, got {side!r}")
        sides = [Side.ABOVE, Side.BELOW] if side == "both" else [Side(side)]
        t = (np.arange(count) + 0.5) / max(count, 1)
        points = []
        for z in start + (end - start) * t:
            if z.imag == 0:
                points.extend((complex(z), s) for s in sides)
            else:
                points.append((complex(z), None))
        return points

    if kind == "point":
        z = _number(spec, "z")
        side = spec.get("side")
        if side not in (None, "above", "below"):
            raise ConfigError(f"side must be above or below, got {side!r}")
        return [(z, Side(side) if side and z.imag == 0 else None)]

    raise ConfigError(f"unknown grid kind {kind!r} (circle, segment or point)")


class ConfigError(ValueError):
    pass
