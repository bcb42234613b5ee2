"""Panel CSV schema, scenario config files, and run manifests.

The CSV layer is byte-stable: write -> read -> write reproduces the file
exactly (floats carry 17 significant digits). Configs are flat INI files with
a single [scenario] section whose keys mirror ScenarioConfig. Every run emits
one manifest tying the outputs' SHA-256 digests to a (config, seed) pair.
"""

import configparser
import dataclasses
import hashlib
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import __version__
from .errors import ConfigError, IoFailure, SchemaViolation
from .simulate import GroundTruth, PanelRow, ScenarioConfig

PANEL_COLUMNS = (
    "hcp_id", "period", "ln_price", "ln_subsidy", "ln_netcost",
    "s2", "s2c", "ln_speed", "hcp_type", "service_type", "state",
    "n_requests", "speed_mbps",
)
_FLOAT_COLUMNS = (
    "ln_price", "ln_subsidy", "ln_netcost", "s2", "s2c", "ln_speed",
    "speed_mbps",
)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: str, data: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", text=True)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# panel CSV
# ---------------------------------------------------------------------------

def panel_to_csv(rows: Sequence[PanelRow]) -> str:
    lines = [",".join(PANEL_COLUMNS)]
    for r in rows:
        rec = []
        for col in PANEL_COLUMNS:
            v = getattr(r, col)
            if col in _FLOAT_COLUMNS:
                rec.append(_fmt(v))
            else:
                rec.append(str(v))
        lines.append(",".join(rec))
    return "\n".join(lines) + "\n"


def write_panel_csv(rows: Sequence[PanelRow], path: str) -> None:
    _atomic_write(path, panel_to_csv(rows))


def _parse_float(raw: str, row: int, col: str) -> float:
    if raw == "":
        raise SchemaViolation(f"row {row}: missing value in column {col!r}")
    try:
        v = float(raw)
    except ValueError as exc:
        raise SchemaViolation(f"row {row}: column {col!r}: {raw!r} is not a float") from exc
    if not math.isfinite(v):
        raise SchemaViolation(f"row {row}: column {col!r} is non-finite")
    return v


def read_panel_csv(path: str) -> List[PanelRow]:
    """Parse and validate a panel CSV; errors carry the row and column."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise SchemaViolation("empty file, header row mandatory")
    header = tuple(lines[0].split(","))
    if header != PANEL_COLUMNS:
        raise SchemaViolation(
            f"header mismatch: expected {','.join(PANEL_COLUMNS)}, got {lines[0]}"
        )
    rows = []
    for i, line in enumerate(lines[1:], start=1):
        if line == "":
            continue
        parts = line.split(",")
        if len(parts) != len(PANEL_COLUMNS):
            raise SchemaViolation(
                f"row {i}: expected {len(PANEL_COLUMNS)} fields, got {len(parts)}"
            )
        rec = dict(zip(PANEL_COLUMNS, parts))
        if rec["period"] not in ("0", "1"):
            raise SchemaViolation(f"row {i}: column 'period' must be 0 or 1")
        try:
            n_req = int(rec["n_requests"])
        except ValueError as exc:
            raise SchemaViolation(
                f"row {i}: column 'n_requests': {rec['n_requests']!r} is not an integer"
            ) from exc
        if n_req <= 0:
            raise SchemaViolation(f"row {i}: column 'n_requests' must be positive")
        vals = {c: _parse_float(rec[c], i, c) for c in _FLOAT_COLUMNS}
        for c in ("s2", "s2c"):
            if not 0.0 <= vals[c] <= 1.0:
                raise SchemaViolation(f"row {i}: column {c!r} outside [0, 1]")
        rows.append(PanelRow(
            hcp_id=rec["hcp_id"], period=int(rec["period"]),
            ln_price=vals["ln_price"], ln_subsidy=vals["ln_subsidy"],
            ln_netcost=vals["ln_netcost"], s2=vals["s2"], s2c=vals["s2c"],
            ln_speed=vals["ln_speed"], hcp_type=rec["hcp_type"],
            service_type=rec["service_type"], state=rec["state"],
            n_requests=n_req, speed_mbps=vals["speed_mbps"],
        ))
    return rows


# ---------------------------------------------------------------------------
# ground-truth sidecar
# ---------------------------------------------------------------------------

def write_ground_truth(truth: GroundTruth, path: str) -> None:
    _atomic_write(path, json.dumps(dataclasses.asdict(truth), indent=1,
                                   sort_keys=True) + "\n")


def read_ground_truth(path: str) -> GroundTruth:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return GroundTruth(**raw)


# ---------------------------------------------------------------------------
# scenario config files
# ---------------------------------------------------------------------------

_PAIR_FIELDS = {"a_range", "c_range", "pbar_ratio_range"}


def load_config(path: str, seed_override: Optional[int] = None) -> ScenarioConfig:
    """Read a [scenario] INI section into a ScenarioConfig."""
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not parser.has_section("scenario"):
        raise ConfigError(f"{path}: missing [scenario] section")
    known = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
    kwargs = {}
    for key, raw in parser.items("scenario"):
        if key not in known:
            raise ConfigError(f"{path}: unknown key {key!r} in [scenario]")
        try:
            if key in _PAIR_FIELDS:
                parts = [float(p) for p in raw.split(",")]
                if len(parts) != 2:
                    raise ValueError("expected two comma-separated numbers")
                kwargs[key] = (parts[0], parts[1])
            elif known[key].type in ("int", int):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"{path}: key {key!r}: {exc}") from exc
    if seed_override is not None:
        kwargs["seed"] = int(seed_override)
    if "seed" not in kwargs:
        raise ConfigError(f"{path}: 'seed' is mandatory in [scenario]")
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(config: ScenarioConfig) -> str:
    lines = ["[scenario]"]
    for f in dataclasses.fields(ScenarioConfig):
        v = getattr(config, f.name)
        if isinstance(v, tuple):
            lines.append(f"{f.name} = {_fmt(v[0])},{_fmt(v[1])}")
        elif isinstance(v, float):
            lines.append(f"{f.name} = {_fmt(v)}")
        else:
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# run manifests
# ---------------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    seed: Optional[int]
    config: Dict[str, object] = field(default_factory=dict)
    package_version: str = __version__
    wall_time_s: float = 0.0
    digests: Dict[str, str] = field(default_factory=dict)


def sha256_of_file(path: str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 16), b""):
                h.update(chunk)
    except OSError as exc:
        raise IoFailure(f"cannot digest {path}: {exc}") from exc
    return h.hexdigest()


def write_manifest(manifest: RunManifest, path: str) -> None:
    _atomic_write(path, json.dumps(dataclasses.asdict(manifest), indent=1,
                                   sort_keys=True) + "\n")


def read_manifest(path: str) -> RunManifest:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return RunManifest(**raw)
