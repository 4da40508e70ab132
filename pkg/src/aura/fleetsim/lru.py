"""Bounded LRU cache for the station authorization whitelist."""

from __future__ import annotations

from collections import OrderedDict


class LruCache:
    def __init__(self, capacity: int = 25000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data: OrderedDict = OrderedDict()

    def get(self, key, default=None):
        if key not in self._data:
            return default
        self._data.move_to_end(key)
        return self._data[key]

    def put(self, key, value) -> None:
        if key in self._data:
            self._data.move_to_end(key)
        self._data[key] = value
        while len(self._data) > self.capacity:
            self._data.popitem(last=False)

    def __contains__(self, key) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)

    def snapshot(self) -> dict:
        return dict(self._data)

    def restore(self, snapshot: dict) -> None:
        self._data = OrderedDict(snapshot)
