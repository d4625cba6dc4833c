"""Write-once, checksummed experiment cache.

Every record is keyed by (model, task, stage, fingerprint, seed, candidate
index) and stored in its own JSON file. Writes go through a temp file and an
atomic rename, so concurrent writers of the same key converge on one value;
a checksum mismatch on read is treated as a miss with a warning.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path

logger = logging.getLogger(__name__)


def fingerprint(obj) -> str:
    """Short stable digest of any JSON-serializable object."""
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _payload_checksum(payload) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CacheKey:
    model_id: str
    task_id: str
    stage: str
    fingerprint: str
    seed: int
    candidate_index: int

    def file_id(self) -> str:
        joined = "\x1f".join(
            [self.model_id, self.task_id, self.stage, self.fingerprint,
             str(self.seed), str(self.candidate_index)]
        )
        return hashlib.sha256(joined.encode("utf-8")).hexdigest()


class Cache:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: CacheKey) -> Path:
        return self.root / f"{key.file_id()}.json"

    def get(self, key: CacheKey):
        path = self._path(key)
        if not path.exists():
            return None
        try:
            wrapper = json.loads(path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, OSError) as exc:
            logger.warning("cache entry %s unreadable (%s); treating as miss", path.name, exc)
            return None
        payload = wrapper.get("payload")
        if wrapper.get("checksum") != _payload_checksum(payload):
            logger.warning("cache entry %s failed checksum; treating as miss", path.name)
            return None
        return payload

    def put(self, key: CacheKey, payload):
        """Write-once: an existing valid entry wins over the new payload."""
        existing = self.get(key)
        if existing is not None:
            return existing
        wrapper = {
            "key": asdict(key),
            "checksum": _payload_checksum(payload),
            "payload": payload,
        }
        path = self._path(key)
        tmp = path.with_name(f".{path.name}.{uuid.uuid4().hex}.tmp")
        tmp.write_text(json.dumps(wrapper, sort_keys=True), encoding="utf-8")
        os.replace(tmp, path)
        return payload

    def get_or_compute(self, key: CacheKey, compute):
        cached = self.get(key)
        if cached is not None:
            return cached
        return self.put(key, compute())
