"""Async-aware TTL cache for decompositions served by the MCP tools."""

from __future__ import annotations

import asyncio
import time
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any, TypeVar

from src.decomposition import SupportScope
from src.graph import Graph

T = TypeVar('T')


@dataclass(slots=True)
class CacheEntry:
    value: Any
    expires_at: float

    def expired(self, now: float | None = None) -> bool:
        current = time.monotonic() if now is None else now
        return current >= self.expires_at


def decomposition_key(g: Graph, delta: int, scope: SupportScope, apply_caef: bool) -> str:
    """Cache key: graph structure plus every setting that changes the result."""
    return f'{g.fingerprint()}:{delta}:{scope}:{int(apply_caef)}'


class TTLCache:
    """TTL cache for async contexts with hit/miss counters and shared in-flight misses."""

    def __init__(self, ttl_seconds: float, maxsize: int) -> None:
        self._ttl = max(ttl_seconds, 0.0)
        self._maxsize = max(1, maxsize)
        self._entries: dict[str, CacheEntry] = {}
        self._lock = asyncio.Lock()
        self._pending: dict[str, asyncio.Future[Any]] = {}
        self.hits = 0
        self.misses = 0

    def __len__(self) -> int:
        return len(self._entries)

    async def get(self, key: str) -> Any | None:
        async with self._lock:
            entry = self._entries.get(key)
            if entry is None:
                self.misses += 1
                return None
            if entry.expired():
                self._entries.pop(key, None)
                self.misses += 1
                return None
            self.hits += 1
            return entry.value

    async def set(self, key: str, value: Any) -> None:
        if self._ttl == 0:
            return
        entry = CacheEntry(value=value, expires_at=time.monotonic() + self._ttl)
        async with self._lock:
            if key not in self._entries and len(self._entries) >= self._maxsize:
                self._evict_one_locked()
            self._entries[key] = entry

    async def get_or_compute(self, key: str, compute: Callable[[], T]) -> tuple[T, bool]:
        """Return ``(value, cached)``; ``compute`` runs in a worker thread on a miss.

        Concurrent misses on one key share a single computation; callers that
        join an in-flight computation report ``cached=True``.
        """
        async with self._lock:
            entry = self._entries.get(key)
            if entry is not None and not entry.expired():
                self.hits += 1
                return entry.value, True
            self._entries.pop(key, None)
            pending = self._pending.get(key)
            if pending is None:
                self.misses += 1
                pending = asyncio.get_running_loop().create_future()
                self._pending[key] = pending
                owner = True
            else:
                self.hits += 1
                owner = False
        if not owner:
            return await asyncio.shield(pending), True
        try:
            value = await asyncio.to_thread(compute)
        except Exception as exc:
            pending.set_exception(exc)
            pending.exception()  # mark retrieved when no caller is waiting
            raise
        else:
            pending.set_result(value)
            await self.set(key, value)
            return value, False
        finally:
            if not pending.done():
                pending.cancel()
            async with self._lock:
                self._pending.pop(key, None)

    async def clear(self) -> None:
        async with self._lock:
            self._entries.clear()

    def _evict_one_locked(self) -> None:
        """Remove the entry closest to expiry."""
        if not self._entries:
            return
        oldest_key = min(self._entries, key=lambda key: self._entries[key].expires_at)
        self._entries.pop(oldest_key, None)
