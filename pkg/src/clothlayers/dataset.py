"""Dataset directories: manifest, class-code sidecar, hash-based splits.

A dataset is a directory of labeled-scan PLY files plus ``manifest.json``
(one entry per scene: file, outfit, band, seeds, point count) and
``class_codes.json`` documenting every label coding used by the toolkit.
Everything embeds the toolkit version and the hash of the resolved config,
so a run is reproducible from its artifacts alone.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__
from .errors import InvalidArgumentError
from .layering import CLASS_CODE_TABLES, GarmentClass, Strategy
from .plyio import read_labeled_scan
from .scanner import LabeledScan


def config_hash(config: dict) -> str:
    """Stable hash of a JSON-serializable config."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def class_code_sidecar() -> dict:
    """Machine-readable class code tables (canonical + per strategy)."""
    return {
        "garment_classes": {cls.label: int(cls) for cls in GarmentClass},
        "none_class": -1,
        "strategies": {
            s.value: {
                f"layer{i + 1}": {str(code): name
                                  for code, name in enumerate(names)}
                for i, names in enumerate(CLASS_CODE_TABLES[s])
            } for s in Strategy
        },
    }


def write_class_codes(directory) -> Path:
    path = Path(directory) / "class_codes.json"
    path.write_text(json.dumps(class_code_sidecar(), indent=2, sort_keys=True))
    return path


def save_manifest(directory, entries: list[dict], config: dict,
                  seed: int) -> Path:
    manifest = {
        "version": __version__,
        "config_hash": config_hash(config),
        "seed": seed,
        "config": config,
        "scenes": entries,
    }
    path = Path(directory) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


def load_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise InvalidArgumentError(f"{directory} has no manifest.json")
    return json.loads(path.read_text())


def load_dataset(directory) -> tuple[list[str], list[LabeledScan]]:
    """All scans of a dataset directory in manifest order."""
    manifest = load_manifest(directory)
    names, scans = [], []
    for entry in manifest["scenes"]:
        names.append(entry["file"])
        scans.append(read_labeled_scan(Path(directory) / entry["file"]))
    return names, scans


def split_by_hash(names: list[str], val_fraction: float,
                  seed: int) -> tuple[list[str], list[str]]:
    """Deterministic, disjoint train/val split keyed on file-name hashes."""
    if not 0.0 <= val_fraction < 1.0:
        raise InvalidArgumentError("val_fraction must be in [0, 1)")
    ranked = sorted(
        names,
        key=lambda n: hashlib.sha256(f"{n}:{seed}".encode()).hexdigest())
    n_val = int(round(val_fraction * len(names)))
    val = set(ranked[:n_val])
    return [n for n in names if n not in val], [n for n in names if n in val]
