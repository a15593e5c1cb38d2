"""Built-in benchmark frequency tables, addressable by name."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .freq_model import FrequencyTable, parse_frequency_table, read_frequency_table

__all__ = ["DATASETS", "load_dataset", "resolve_table", "dataset_path"]

DATASETS = ("meth", "polyps_low", "polyps_high", "scrapie", "butterfly", "microbial")

_ALIASES = {
    "polyps-low": "polyps_low",
    "polyps-high": "polyps_high",
    "butterflies": "butterfly",
    "methamphetamine": "meth",
}


def _canonical(name: str) -> str:
    name = name.strip().lower()
    return _ALIASES.get(name, name)


def dataset_path(name: str):
    name = _canonical(name)
    if name not in DATASETS:
        raise KeyError(f"unknown dataset {name!r}; choose from {', '.join(DATASETS)}")
    return resources.files("ratiopop").joinpath("data", f"{name}.txt")


def load_dataset(name: str) -> FrequencyTable:
    """Load a built-in table by name (``meth``, ``polyps_low``, ...)."""
    path = dataset_path(name)
    return parse_frequency_table(path.read_text(encoding="utf-8"), name=_canonical(name))


def resolve_table(spec: str) -> FrequencyTable:
    """Built-in dataset name, or path to a table file."""
    if _canonical(spec) in DATASETS:
        return load_dataset(spec)
    path = Path(spec)
    if not path.exists():
        raise KeyError(f"{spec!r} is neither a built-in dataset nor an existing file")
    return read_frequency_table(path, name=path.stem)
