import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List

from pydantic import ValidationError

from .config import settings
from .errors import ConfigError, OutputError
from .models import SWEEP_HEADER, SweepConfig, SweepRecord


def _clean_relative(filename: str) -> str:
    # "/data/x.csv", "data/x.csv" and "x.csv" all mean DATA_DIR/x.csv
    clean_name = str(filename).replace("\\", "/").lstrip("/")
    if clean_name.startswith("data/"):
        clean_name = clean_name[5:]
    return clean_name


def resolve_output(filename: str) -> Path:
    """
    Resolves an output filename. Absolute paths are kept, relative ones land in DATA_DIR.
    Parent directories are created.
    """
    if not filename:
        raise ConfigError("Output path cannot be empty.")

    path_obj = Path(filename)
    if path_obj.is_absolute():
        full_path = path_obj.resolve()
    else:
        full_path = (settings.DATA_DIR / _clean_relative(filename)).resolve()

    try:
        full_path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"Cannot create directory {full_path.parent}: {e}")
    return full_path


def resolve_input(filename: str) -> Path:
    """Existing path as given, otherwise relative to DATA_DIR."""
    path_obj = Path(filename)
    if path_obj.exists():
        return path_obj.resolve()
    candidate = settings.DATA_DIR / _clean_relative(filename)
    if candidate.exists():
        return candidate.resolve()
    raise ConfigError(f"File {filename} does not exist.")


def load_sweep_config(filename: str) -> SweepConfig:
    path = resolve_input(filename)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    except OSError as e:
        raise ConfigError(f"Cannot read {path}: {e}")

    try:
        return SweepConfig.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"{path}: {problems}")


def format_value(value: Any) -> str:
    """CSV cell: 17 significant digits for floats, empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def write_csv(path: Path, records: Iterable[SweepRecord]) -> int:
    count = 0
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(SWEEP_HEADER)
            for record in records:
                row = record.model_dump()
                writer.writerow([format_value(row[name]) for name in SWEEP_HEADER])
                count += 1
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}")
    return count


def read_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def write_json(path: Path, payload: Dict[str, Any]):
    try:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
            f.write("\n")
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e}")
