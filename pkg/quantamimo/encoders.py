import abc
import hashlib
import json

from quantamimo.exceptions import ContractViolation


class ConfigEncoder(abc.ABC):
    @abc.abstractmethod
    def encode_key(self, config, coordinates) -> str:
        raise NotImplementedError


class Sha256ConfigEncoder(ConfigEncoder):
    """
    Hash of the canonical JSON of a SimConfig plus the sweep coordinates that tell
    the point apart (sweep variable, value, rate method, ...).
    """

    def encode_key(self, config, coordinates=None) -> str:
        if config is None:
            raise ContractViolation("A configuration is required to build a cache key.")
        m = hashlib.sha256()
        m.update(canonical_json(config.as_dict()).encode("UTF-8"))
        if coordinates:
            m.update(canonical_json(coordinates).encode("UTF-8"))
        return m.hexdigest()


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
