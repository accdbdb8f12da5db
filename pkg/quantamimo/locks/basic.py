import abc
import contextlib
import threading

from quantamimo import utils
from quantamimo.exceptions import ResultLocked


class ResultLock(abc.ABC):
    @abc.abstractmethod
    def acquire(self, *args, **kwargs) -> bool:
        raise NotImplementedError()

    @abc.abstractmethod
    def release(self):
        raise NotImplementedError()

    @contextlib.contextmanager
    def held(self):
        """Hold the lock for the body; ResultLocked when the wait times out."""
        if not self.acquire():
            raise ResultLocked()
        try:
            yield self
        finally:
            self.release()


class ThreadLock(ResultLock):
    """
    Guards the result storage inside one process. Worker processes never touch the
    storage, so this is enough unless several runs share a cache.
    """

    storage_lock = threading.Lock()

    def acquire(self, *args, **kwargs) -> bool:
        return self.storage_lock.acquire(timeout=utils.get_lock_timeout())

    def release(self):
        self.storage_lock.release()
