import abc
import pickle
from collections import defaultdict
from typing import Tuple

from django.core.cache import caches


class ResultStorage(abc.ABC):
    """
    Where finished sweep points are kept, keyed by their encoded configuration, so a
    re-run of the same point returns the stored estimate.
    """

    @abc.abstractmethod
    def store_data(self, cache_name: str, encoded_key: str, result: object) -> None:
        """
        :param cache_name: name of the cache defined in settings under CACHES
        :param encoded_key: the sweep-point key produced by the config encoder
        :param result: the RateEstimate (or tuple of them) to keep
        """
        raise NotImplementedError

    @abc.abstractmethod
    def retrieve_data(self, cache_name: str, encoded_key: str) -> Tuple[bool, object]:
        """
        :return: ``(True, result)`` on a hit and ``(False, None)`` otherwise
        """
        raise NotImplementedError

    @staticmethod
    @abc.abstractmethod
    def validate_storage(name: str):
        """
        Raise if the storage name cannot be used, e.g. a missing entry in CACHES.
        """
        raise NotImplementedError


class MemoryResultStorage(ResultStorage):
    def __init__(self):
        self.results = defaultdict(dict)

    def store_data(self, cache_name: str, encoded_key: str, result: object) -> None:
        self.results[cache_name][encoded_key] = result

    def retrieve_data(self, cache_name: str, encoded_key: str) -> Tuple[bool, object]:
        the_cache = self.results.get(cache_name)
        if the_cache and encoded_key in the_cache:
            return True, the_cache[encoded_key]
        return False, None

    @staticmethod
    def validate_storage(name: str):
        pass


class CacheResultStorage(ResultStorage):
    """
    Results kept in one of Django's caches, so a file-based or redis cache can share
    finished points between runs and processes.
    """

    def store_data(self, cache_name: str, encoded_key: str, result: object) -> None:
        caches[cache_name].set(encoded_key, pickle.dumps(result), timeout=None)

    def retrieve_data(self, cache_name: str, encoded_key: str) -> Tuple[bool, object]:
        if encoded_key in caches[cache_name]:
            return True, pickle.loads(caches[cache_name].get(encoded_key))
        return False, None

    @staticmethod
    def validate_storage(name: str):
        # raises InvalidCacheBackendError for an unknown cache
        caches[name]
