"""Line-delimited JSON manifests and run configuration.

A manifest file holds one header line followed by one record per line::

    {"manifest": {"schema_version": 1, "record_type": "tree_node",
                  "config": {...}, "config_fingerprint": "..."}}
    {"id": "golden", ...}
    {"id": "e1", ...}

Records are kept as plain dicts, so fields this version does not know about
survive a read/write cycle. Writes use sorted keys and compact separators,
so equal record sets serialize to identical bytes.
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

from .mutate import MutationTree, TreeConfig
from .validate import RandomStimulusConfig

SCHEMA_VERSION = 1
HEADER_KEY = "manifest"


class ManifestError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def fingerprint(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


@dataclass
class Manifest:
    record_type: Optional[str] = None
    records: List[dict] = field(default_factory=list)
    config: Optional[dict] = None
    schema_version: int = SCHEMA_VERSION
    extra: Dict[str, Any] = field(default_factory=dict)  # unknown header fields

    @property
    def config_fingerprint(self) -> Optional[str]:
        return fingerprint(self.config) if self.config is not None else None

    def header(self) -> dict:
        h = dict(self.extra)
        h.update(schema_version=self.schema_version, record_type=self.record_type,
                 config=self.config, config_fingerprint=self.config_fingerprint)
        return {HEADER_KEY: h}

    def dumps(self) -> str:
        lines = [canonical_json(self.header())]
        lines += [canonical_json(r) for r in self.records]
        return "\n".join(lines) + "\n"


def _header(obj: Any) -> Optional[dict]:
    if isinstance(obj, dict) and set(obj) == {HEADER_KEY} and isinstance(obj[HEADER_KEY], dict):
        return obj[HEADER_KEY]
    return None


def loads_manifest(text: str, record_type: Optional[str] = None) -> Manifest:
    # only \n delimits records; splitlines() would also break on U+0085/U+2028 inside strings
    lines = text.split("\n")
    if not any(line.strip() for line in lines):
        return Manifest(record_type)
    m: Optional[Manifest] = None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"malformed JSON ({exc.msg})", lineno) from None
        if m is None:
            h = _header(obj)
            if h is None:
                raise ManifestError("first line must be a manifest header", lineno)
            version = h.get("schema_version")
            if version != SCHEMA_VERSION:
                raise ManifestError(f"schema version {version!r} is not supported (expected {SCHEMA_VERSION})",
                                    lineno)
            extra = {k: v for k, v in h.items()
                     if k not in ("schema_version", "record_type", "config", "config_fingerprint")}
            m = Manifest(h.get("record_type"), [], h.get("config"), version, extra)
            stored = h.get("config_fingerprint")
            if stored is not None and stored != m.config_fingerprint:
                raise ManifestError("config fingerprint does not match the stored config", lineno)
            if record_type is not None and m.record_type not in (None, record_type):
                raise ManifestError(f"expected '{record_type}' records, found '{m.record_type}'", lineno)
            continue
        if not isinstance(obj, dict):
            raise ManifestError("records must be JSON objects", lineno)
        h = _header(obj)
        if h is not None:
            # concatenated manifests repeat the header; it must agree with the first
            if (h.get("schema_version"), h.get("record_type")) != (m.schema_version, m.record_type):
                raise ManifestError("repeated header disagrees with the first one", lineno)
            continue
        m.records.append(obj)
    return m


def read_manifest(path, record_type: Optional[str] = None) -> Manifest:
    with open(path, encoding="utf-8") as f:
        return loads_manifest(f.read(), record_type)


def write_manifest(path, manifest: Manifest) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(manifest.dumps())
    os.replace(tmp, path)


def append_records(path, records: Iterable[dict], record_type: Optional[str] = None,
                   config: Optional[dict] = None) -> None:
    """Append records under an exclusive lock, writing the header first if the file is new or empty."""
    with open(path, "a+", encoding="utf-8") as f:
        fcntl.flock(f, fcntl.LOCK_EX)
        try:
            f.seek(0, os.SEEK_END)
            chunk = []
            if f.tell() == 0:
                chunk.append(canonical_json(Manifest(record_type, config=config).header()))
            chunk += [canonical_json(r) for r in records]
            if chunk:
                f.write("\n".join(chunk) + "\n")
                f.flush()
        finally:
            fcntl.flock(f, fcntl.LOCK_UN)


# -- trees ----------------------------------------------------------------------------


def tree_records(trees: Iterable[MutationTree]) -> List[dict]:
    """Flatten trees into manifest records: nodes first, then shortfalls, per tree."""
    out = []
    for t in trees:
        out += [dict(type="node", tree=t.name, **n.to_dict()) for n in t.nodes.values()]
        out += [dict(type="shortfall", tree=t.name, **sf.to_dict()) for sf in t.shortfalls]
    return out


def trees_from_records(records: Iterable[dict], config: TreeConfig) -> List[MutationTree]:
    nodes: Dict[str, List[dict]] = {}
    shortfalls: Dict[str, List[dict]] = {}
    for r in records:
        kind = r.get("type", "node")
        body = {k: v for k, v in r.items() if k not in ("type", "tree")}
        if kind == "node":
            nodes.setdefault(r["tree"], []).append(body)
            shortfalls.setdefault(r["tree"], [])
        elif kind == "shortfall":
            shortfalls.setdefault(r["tree"], []).append(body)
    return [MutationTree.from_records(name, config, nodes[name], shortfalls.get(name, ())) for name in nodes]


# -- run configuration --------------------------------------------------------------


@dataclass(frozen=True)
class BackendConfig:
    endpoint: Optional[str] = None
    model: Optional[str] = None
    api_key_env: str = "RTLPLAN_API_KEY"
    retries: int = 2

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    tree: TreeConfig = TreeConfig()
    validation: RandomStimulusConfig = RandomStimulusConfig()
    backend: BackendConfig = BackendConfig()
    outputs: Dict[str, str] = field(default_factory=dict)
    workers: int = 1

    def to_dict(self) -> dict:
        """Everything that can change results; the worker count cannot, and is left out."""
        return {
            "seed": self.seed,
            "tree": self.tree.to_dict(),
            "validation": self.validation.to_dict(),
            "backend": self.backend.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict, workers: int = 1, outputs: Optional[Dict[str, str]] = None) -> "RunConfig":
        return cls(
            seed=int(d.get("seed", 0)),
            tree=TreeConfig.from_dict(d["tree"]) if "tree" in d else TreeConfig(),
            validation=RandomStimulusConfig(**d["validation"]) if "validation" in d else RandomStimulusConfig(),
            backend=BackendConfig(**d["backend"]) if "backend" in d else BackendConfig(),
            outputs=dict(outputs or {}),
            workers=workers,
        )

    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())


__all__ = [
    "BackendConfig", "Manifest", "ManifestError", "RunConfig", "SCHEMA_VERSION", "append_records",
    "canonical_json", "fingerprint", "loads_manifest", "read_manifest", "tree_records",
    "trees_from_records", "write_manifest",
]
