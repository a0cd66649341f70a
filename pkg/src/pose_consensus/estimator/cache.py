"""Content-addressed cache for estimator responses.

One file per key under the cache root; the filename is the hex digest of
(backend id, backend version, ordered frame content digests) and the file
body is the response line exactly as the backend emitted it. Writes go
through a temp file and an atomic rename, so concurrent readers never see
a partial entry and concurrent writers of the same key simply race to an
identical result.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from ..errors import MalformedResponse
from . import protocol

logger = logging.getLogger(__name__)


def frame_digest(ref: str) -> str:
    """Digest of a frame reference: file bytes when it points at a readable
    file, otherwise the reference string itself (virtual frames)."""
    path = Path(ref)
    h = hashlib.sha256()
    try:
        if path.is_file():
            h.update(b"file\x00")
            with open(path, "rb") as f:
                for chunk in iter(lambda: f.read(1 << 20), b""):
                    h.update(chunk)
            return h.hexdigest()
    except OSError:  # unreadable: fall back to the name
        h = hashlib.sha256()
    h.update(b"name\x00")
    h.update(ref.encode())
    return h.hexdigest()


def request_key(backend_id: str, backend_version: str, frame_refs: Sequence[str]) -> str:
    """Cache key for one request. Order-sensitive in the frame list."""
    h = hashlib.sha256()
    h.update(backend_id.encode())
    h.update(b"\x00")
    h.update(backend_version.encode())
    for ref in frame_refs:
        h.update(b"\x00")
        h.update(frame_digest(ref).encode())
    return h.hexdigest()


class ResultCache:
    def __init__(self, root) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / key

    def get(self, key: str) -> Optional[str]:
        """Stored response line, or None on a miss or a corrupt entry."""
        path = self._path(key)
        try:
            line = path.read_text()
        except FileNotFoundError:
            return None
        except OSError as exc:
            logger.warning("cache entry %s unreadable (%s); recomputing", key, exc)
            return None
        line = line.rstrip("\n")
        try:
            protocol.parse_response(line)
        except MalformedResponse as exc:
            logger.warning("cache entry %s is corrupt (%s); recomputing", key, exc)
            return None
        return line

    def put(self, key: str, line: str) -> None:
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=self.root)
        try:
            with os.fdopen(fd, "w") as f:
                f.write(line.rstrip("\n") + "\n")
            os.replace(tmp, self._path(key))
        except BaseException:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise
