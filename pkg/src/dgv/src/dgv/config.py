"""Run configuration: key=value files, command-line overrides and validation."""

import logging
from pathlib import Path
from typing import Any, TypedDict

from dgk.cases import CASES
from dgk.discretization import TIME_DERIVATIVES
from dgk.errors import ConfigError
from dgk.integrator import default_cfl
from dgk.runtime import default_workers

logger = logging.getLogger(__name__)

KEYS = (
    "case",
    "order",
    "mesh",
    "nonuniform",
    "cfl",
    "dt",
    "tend",
    "workers",
    "out",
    "emit_fields",
    "record_every",
    "flux_points",
    "time_derivative",
)

ORDERS = {"p2": 2, "p3": 3}

DEFAULT_MESHES = {
    "adv2d": [8, 16, 32],
    "adv3d": [8, 16],
    "vortex2d": [20, 40, 80],
    "tgv": [32],
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


class RunConfig(TypedDict):
    """Validated run configuration."""
    case: str
    order: int
    mesh: list[int]
    nonuniform: bool
    cfl: float
    dt: float | None
    tend: float
    workers: int
    out: Path
    emit_fields: bool
    record_every: float
    flux_points: int | None
    time_derivative: str | None


def load_config_file(path: str | Path) -> dict[str, str]:
    """Read a line-oriented key=value file; '#' starts a comment.

    Raises:
        ConfigError: On malformed lines or unknown keys
    """
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("config", f"line {number} is not key=value: {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in KEYS:
            raise ConfigError(key, f"unknown key on line {number}")
        values[key] = value
    logger.debug(f"Loaded {len(values)} keys from {path}")
    return values


def _parse_mesh(value: Any) -> list[int]:
    if isinstance(value, str):
        parts = [p for p in value.replace(" ", "").split(",") if p]
    elif isinstance(value, int):
        parts = [value]
    else:
        parts = list(value)
    try:
        sizes = [int(p) for p in parts]
    except (TypeError, ValueError):
        raise ConfigError("mesh", f"expected comma-separated integers, got {value!r}")
    if not sizes:
        raise ConfigError("mesh", "at least one mesh size is required")
    if any(n < 4 for n in sizes):
        raise ConfigError("mesh", f"mesh sizes must be at least 4, got {sizes}")
    return sizes


def _parse_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ConfigError(key, f"expected a boolean, got {value!r}")


def _parse_number(key: str, value: Any, kind: type = float) -> Any:
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {kind.__name__}, got {value!r}")


def check_doubling(sizes: list[int]) -> None:
    """Each mesh size must be twice the previous one.

    Raises:
        ConfigError: Otherwise, naming the mesh key
    """
    for coarse, fine in zip(sizes, sizes[1:]):
        if fine != 2 * coarse:
            raise ConfigError("mesh", f"mesh sizes must double, got {coarse} then {fine}")


def build_run_config(file_values: dict[str, str] | None = None, **overrides: Any) -> RunConfig:
    """Merge case defaults, file values and overrides (highest precedence), then validate.

    Overrides that are None are ignored so unset command-line flags do not mask file values.

    Raises:
        ConfigError: For the first invalid key
    """
    merged: dict[str, Any] = dict(file_values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(merged) - set(KEYS)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(key, "unknown key")

    case = merged.get("case")
    if case is None:
        raise ConfigError("case", "a case is required")
    if case not in CASES:
        raise ConfigError("case", f"unknown case {case!r}; choose from {', '.join(CASES)}")

    order_text = str(merged.get("order", "p2")).lower()
    if order_text not in ORDERS:
        raise ConfigError("order", f"unsupported order {order_text!r}; choose from {', '.join(ORDERS)}")
    order = ORDERS[order_text]

    mesh = _parse_mesh(merged.get("mesh", DEFAULT_MESHES[case]))
    check_doubling(mesh)
    if case == "tgv" and len(mesh) > 1:
        raise ConfigError("mesh", "tgv runs take a single mesh size")

    cfl = _parse_number("cfl", merged.get("cfl", default_cfl(order)))
    if not 0.0 < cfl <= 1.0:
        raise ConfigError("cfl", f"must lie in (0, 1], got {cfl}")

    dt = merged.get("dt")
    if dt is not None:
        dt = _parse_number("dt", dt)
        if not dt > 0.0:
            raise ConfigError("dt", f"must be positive, got {dt}")

    tend = _parse_number("tend", merged.get("tend", CASES[case].t_end))
    if not tend >= 0.0:
        raise ConfigError("tend", f"must be non-negative, got {tend}")

    workers = _parse_number("workers", merged.get("workers", default_workers()), int)
    if workers < 1:
        raise ConfigError("workers", f"must be at least 1, got {workers}")

    record_every = _parse_number("record_every", merged.get("record_every", 0.05))
    if not record_every > 0.0:
        raise ConfigError("record_every", f"must be positive, got {record_every}")

    flux_points = merged.get("flux_points")
    if flux_points is not None:
        flux_points = _parse_number("flux_points", flux_points, int)
        if not 1 <= flux_points <= 8:
            raise ConfigError("flux_points", f"must lie in [1, 8], got {flux_points}")

    time_derivative = merged.get("time_derivative")
    if time_derivative is not None:
        time_derivative = str(time_derivative).lower()
        if time_derivative not in TIME_DERIVATIVES:
            raise ConfigError(
                "time_derivative", f"choose from {', '.join(TIME_DERIVATIVES)}, got {time_derivative!r}"
            )
        if time_derivative == "operator" and case == "tgv":
            raise ConfigError("time_derivative", "the operator time derivative needs an inviscid case")

    config: RunConfig = {
        "case": case,
        "order": order,
        "mesh": mesh,
        "nonuniform": _parse_bool("nonuniform", merged.get("nonuniform", False)),
        "cfl": cfl,
        "dt": dt,
        "tend": tend,
        "workers": workers,
        "out": Path(merged.get("out", "results")),
        "emit_fields": _parse_bool("emit_fields", merged.get("emit_fields", False)),
        "record_every": record_every,
        "flux_points": flux_points,
        "time_derivative": time_derivative,
    }
    logger.info(f"Run config: {config}")
    return config
