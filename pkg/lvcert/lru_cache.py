import threading
from collections import OrderedDict


class LRUCache(OrderedDict):
    """Bounded mapping that evicts the least recently used entry.

    Reads through :meth:`get` refresh the entry, so tables that are looked
    up on every Newton step stay resident.
    """

    def __init__(self, max_items=8):
        super().__init__()
        self.max_items = max_items
        self._lock = threading.RLock()

    def __setitem__(self, key, value):
        with self._lock:
            if key in self:
                super().__delitem__(key)
            super().__setitem__(key, value)
            while len(self) > self.max_items:
                self.popitem(last=False)

    def get(self, key, default=None):
        with self._lock:
            if key not in self:
                return default
            self.move_to_end(key)
            return super().__getitem__(key)

    def get_or_create(self, key, factory):
        """Return the cached value for *key*, building it with *factory()* on a miss.

        *factory* runs outside the lock, so misses on different keys build
        concurrently. Two threads missing the same key may both build it;
        the first value stored wins and is returned to both.
        """
        value = self.get(key)
        if value is not None:
            return value
        value = factory()
        with self._lock:
            stored = self.get(key)
            if stored is not None:
                return stored
            self[key] = value
            return value
