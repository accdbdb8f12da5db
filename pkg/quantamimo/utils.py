import os

from django.conf import settings
from django.utils import module_loading

from quantamimo.exceptions import ContractViolation

DEFAULT_DETECTORS = {
    "mrc": "quantamimo.detectors.MaximalRatioDetector",
    "zf": "quantamimo.detectors.ZeroForcingDetector",
}

DEFAULT_PILOT_CANDIDATES = [1, 2, 3, 4, 5, 6, 8, 10, 15, 20]

DEFAULT_PROFILES = {
    "full": {},
    "ci": {"channel_realizations": 20, "noise_trials": 300, "drops": 50},
}


def configure_settings(quantamimo=None):
    """
    Configure django settings for use outside of a django project. Has no effect when
    the settings have already been configured (e.g. by DJANGO_SETTINGS_MODULE).
    """
    if not settings.configured and not os.environ.get("DJANGO_SETTINGS_MODULE"):
        settings.configure(QUANTAMIMO=dict(quantamimo or {}))


def get_quantamimo_settings():
    return getattr(settings, "QUANTAMIMO", dict())


def get_condition_bound():
    return get_quantamimo_settings().get("CONDITION_BOUND", 1e12)


def get_quantizer_settings():
    return get_quantamimo_settings().get("QUANTIZER", dict())


def get_lloyd_max_tolerance():
    return get_quantizer_settings().get("TOL", 1e-9)


def get_lloyd_max_max_iter():
    return get_quantizer_settings().get("MAX_ITER", 10_000)


def get_grid_settings():
    return get_quantamimo_settings().get("GRID", dict())


def get_grid_bins():
    return get_grid_settings().get("BINS", 64)


def get_grid_widen():
    return get_grid_settings().get("WIDEN", 0.01)


def get_grid_epsilon():
    return get_grid_settings().get("EPSILON", 1e-9)


def get_approx_settings():
    return get_quantamimo_settings().get("APPROX", dict())


def get_covariance_regularization():
    return get_approx_settings().get("REGULARIZATION", 1e-12)


def get_mixture_samples():
    return get_approx_settings().get("MIXTURE_SAMPLES", 200_000)


def get_zf_covariance_trials():
    return get_approx_settings().get("ZF_COVARIANCE_TRIALS", 3000)


def get_pilot_candidates():
    return get_quantamimo_settings().get("PILOT_CANDIDATES", DEFAULT_PILOT_CANDIDATES)


def get_detector_paths():
    detectors = dict(DEFAULT_DETECTORS)
    detectors.update(get_quantamimo_settings().get("DETECTORS", dict()))
    return detectors


def get_detector_class(name):
    detectors = get_detector_paths()
    if name not in detectors:
        raise ContractViolation(
            'Unknown detector "{}"; expected one of {}.'.format(
                name, ", ".join(sorted(detectors))
            )
        )
    return module_loading.import_string(detectors[name])


def get_computation_settings():
    """
    The effective settings that change a computed rate. Worker, storage, lock and
    profile settings are left out.
    """
    return {
        "condition_bound": get_condition_bound(),
        "lloyd_max_tolerance": get_lloyd_max_tolerance(),
        "lloyd_max_max_iter": get_lloyd_max_max_iter(),
        "grid_bins": get_grid_bins(),
        "grid_widen": get_grid_widen(),
        "grid_epsilon": get_grid_epsilon(),
        "covariance_regularization": get_covariance_regularization(),
        "mixture_samples": get_mixture_samples(),
        "zf_covariance_trials": get_zf_covariance_trials(),
        "pilot_candidates": list(get_pilot_candidates()),
        "detectors": get_detector_paths(),
    }


def get_worker_count():
    env = os.environ.get("QUANTAMIMO_WORKERS")
    if env:
        return max(1, int(env))
    return get_quantamimo_settings().get("WORKERS", 1)


def get_profiles():
    profiles = {name: dict(values) for name, values in DEFAULT_PROFILES.items()}
    profiles.update(get_quantamimo_settings().get("PROFILES", dict()))
    return profiles


def get_encoder_class():
    return module_loading.import_string(
        get_quantamimo_settings().get(
            "ENCODER_CLASS", "quantamimo.encoders.Sha256ConfigEncoder"
        )
    )


def get_storage_settings():
    return get_quantamimo_settings().get("STORAGE", dict())


def get_storage_class():
    return module_loading.import_string(
        get_storage_settings().get("CLASS", "quantamimo.storage.MemoryResultStorage")
    )


def get_storage_cache_name():
    return get_storage_settings().get("CACHE_NAME", "default")


def get_storage_enable():
    return get_storage_settings().get("ENABLE", True)


def get_lock_settings():
    return get_quantamimo_settings().get("LOCK", dict())


def get_lock_class():
    return module_loading.import_string(
        get_lock_settings().get("CLASS", "quantamimo.locks.basic.ThreadLock")
    )


def get_lock_location():
    return get_lock_settings().get("LOCATION", "redis://localhost:6379/1")


def get_lock_timeout():
    return get_lock_settings().get("TIMEOUT", 0.1)  # default to 100ms


def get_lock_enable():
    return get_lock_settings().get("ENABLE", True)


def get_lock_time_to_live():
    return get_lock_settings().get("TTL", 300)  # default to 5 minutes


def get_lock_name():
    return get_lock_settings().get("NAME", "QuantamimoResultLock")
