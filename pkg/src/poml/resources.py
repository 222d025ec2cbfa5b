"""Resource loaders for src attributes and includes.

Every external reference goes through a loader. Paths resolve relative to the
referring file and are confined to the loader's root: anything that escapes,
including through symlinks, is rejected.
"""

from __future__ import annotations

import os
import posixpath
from dataclasses import dataclass


class ResourceError(Exception):
    pass


@dataclass(frozen=True)
class DirEntry:
    name: str
    is_dir: bool
    size: int


class MemoryLoader:
    """In-memory loader keyed by slash-separated relative paths."""

    def __init__(self, files: dict[str, str | bytes]):
        self.files = dict(files)

    def resolve(self, base: str, ref: str) -> str:
        if ref.startswith("/"):
            combined = ref.lstrip("/")
        else:
            combined = posixpath.join(posixpath.dirname(base), ref)
        normalized = posixpath.normpath(combined)
        if normalized.startswith("..") or normalized.startswith("/"):
            raise ResourceError(f"path {ref!r} escapes the workspace")
        return "" if normalized == "." else normalized

    def read_bytes(self, path: str) -> bytes:
        try:
            data = self.files[path]
        except KeyError:
            raise ResourceError(f"no such resource: {path}") from None
        return data.encode("utf-8") if isinstance(data, str) else data

    def read_text(self, path: str) -> str:
        return self.read_bytes(path).decode("utf-8", errors="replace")

    def exists(self, path: str) -> bool:
        return path in self.files or self.is_dir(path)

    def is_dir(self, path: str) -> bool:
        prefix = path.rstrip("/") + "/" if path else ""
        return any(key.startswith(prefix) for key in self.files) if prefix else bool(self.files)

    def list_dir(self, path: str) -> list[DirEntry]:
        prefix = path.rstrip("/") + "/" if path else ""
        names: dict[str, DirEntry] = {}
        for key, value in self.files.items():
            if not key.startswith(prefix):
                continue
            rest = key[len(prefix):]
            if "/" in rest:
                child = rest.split("/", 1)[0]
                names.setdefault(child, DirEntry(child, True, 0))
            else:
                size = len(value.encode("utf-8")) if isinstance(value, str) else len(value)
                names[rest] = DirEntry(rest, False, size)
        if not names and not self.is_dir(path):
            raise ResourceError(f"no such directory: {path}")
        return sorted(names.values(), key=lambda e: e.name)


class FileSystemLoader:
    """Disk loader rooted at a directory; resolution never leaves the root."""

    def __init__(self, root: str):
        self.root = os.path.realpath(root)

    def resolve(self, base: str, ref: str) -> str:
        if os.path.isabs(ref):
            candidate = os.path.join(self.root, ref.lstrip("/\\"))
        else:
            base_dir = os.path.dirname(os.path.join(self.root, base))
            candidate = os.path.join(base_dir, ref)
        resolved = os.path.realpath(candidate)
        if resolved != self.root and not resolved.startswith(self.root + os.sep):
            raise ResourceError(f"path {ref!r} escapes the workspace")
        return os.path.relpath(resolved, self.root)

    def _full(self, path: str) -> str:
        full = os.path.realpath(os.path.join(self.root, path))
        if full != self.root and not full.startswith(self.root + os.sep):
            raise ResourceError(f"path {path!r} escapes the workspace")
        return full

    def read_bytes(self, path: str) -> bytes:
        try:
            with open(self._full(path), "rb") as handle:
                return handle.read()
        except OSError as exc:
            raise ResourceError(f"cannot read {path}: {exc.strerror}") from None

    def read_text(self, path: str) -> str:
        return self.read_bytes(path).decode("utf-8", errors="replace")

    def exists(self, path: str) -> bool:
        try:
            return os.path.exists(self._full(path))
        except ResourceError:
            return False

    def is_dir(self, path: str) -> bool:
        try:
            return os.path.isdir(self._full(path))
        except ResourceError:
            return False

    def list_dir(self, path: str) -> list[DirEntry]:
        full = self._full(path)
        try:
            names = sorted(os.listdir(full))
        except OSError as exc:
            raise ResourceError(f"cannot list {path}: {exc.strerror}") from None
        entries = []
        for name in names:
            child = os.path.join(full, name)
            is_dir = os.path.isdir(child)
            size = 0 if is_dir else os.path.getsize(child)
            entries.append(DirEntry(name, is_dir, size))
        return entries
