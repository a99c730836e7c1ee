"""Content-addressed, append-only artifact store."""

from __future__ import annotations

import hashlib
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import NotFound

ALGORITHM = "sha-256"


@dataclass(frozen=True, order=True)
class ContentHash:
    """SHA-256 digest naming an immutable payload."""

    digest: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.digest, bytes) or len(self.digest) != 32:
            raise ValueError("digest must be exactly 32 bytes")

    @property
    def algorithm(self) -> str:
        return ALGORITHM

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def __str__(self) -> str:
        return self.hex

    def __repr__(self) -> str:
        return f"ContentHash({self.hex[:12]}...)"

    @classmethod
    def of(cls, payload: bytes) -> ContentHash:
        return cls(hashlib.sha256(payload).digest())

    @classmethod
    def from_hex(cls, text: str) -> ContentHash:
        if len(text) != 64 or text != text.lower():
            raise ValueError(f"not a lowercase 64-character hex digest: {text!r}")
        return cls(bytes.fromhex(text))


class ArtifactStore:
    """One file per object at ``<root>/objects/<hex[:2]>/<hex>``.

    Objects hold raw payload bytes. Nothing is ever overwritten or deleted.
    """

    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)
        self.objects = self.root / "objects"

    def path_for(self, h: ContentHash) -> Path:
        return self.objects / h.hex[:2] / h.hex

    def put(self, payload: bytes) -> ContentHash:
        h = ContentHash.of(payload)
        path = self.path_for(h)
        if path.exists():
            return h
        path.parent.mkdir(parents=True, exist_ok=True)
        # write-then-rename so readers never observe a partial object
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(payload)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return h

    def get(self, h: ContentHash) -> bytes:
        try:
            return self.path_for(h).read_bytes()
        except FileNotFoundError:
            raise NotFound(f"no object {h.hex}") from None

    def __contains__(self, h: ContentHash) -> bool:
        return self.path_for(h).is_file()

    def __iter__(self):
        if not self.objects.is_dir():
            return
        for sub in sorted(self.objects.iterdir()):
            for obj in sorted(sub.iterdir()):
                if not obj.name.startswith("."):
                    yield ContentHash.from_hex(obj.name)

    def __len__(self) -> int:
        return sum(1 for _ in self)

    def audit(self) -> list[ContentHash]:
        """Return the objects whose bytes no longer hash to their file name."""
        return [h for h in self if ContentHash.of(self.get(h)) != h]
