from redis import Redis

from quantamimo import utils
from quantamimo.exceptions import ContractViolation
from quantamimo.locks.basic import ResultLock


class MultiProcessRedisLock(ResultLock):
    """
    Lock held in Redis, for runs on several hosts or processes that share one result
    cache (e.g. a django-redis CACHES entry).
    """

    def __init__(self):
        location = utils.get_lock_location()
        if not location:
            raise ContractViolation(
                "Redis server location must be set in QUANTAMIMO['LOCK']['LOCATION']."
            )

        self.redis_obj = Redis.from_url(location)
        self.storage_lock = self.redis_obj.lock(
            name=utils.get_lock_name(),
            # forcefully released after this many seconds
            timeout=utils.get_lock_time_to_live(),
            blocking_timeout=utils.get_lock_timeout(),
        )

    def acquire(self, *args, **kwargs) -> bool:
        return self.storage_lock.acquire()

    def release(self):
        self.storage_lock.release()
