import abc

import numpy as np

from quantamimo import numerics
from quantamimo.exceptions import SingularGram


class Detector(abc.ABC):
    name: str

    @abc.abstractmethod
    def filter_matrix(self, H_hat: np.ndarray) -> np.ndarray:
        """
        Return the N x K matrix whose k-th column is the receive filter a_k, so that
        the soft estimate of user k is a_k^H r.
        """
        raise NotImplementedError


class MaximalRatioDetector(Detector):
    name = "mrc"

    def filter_matrix(self, H_hat: np.ndarray) -> np.ndarray:
        H_hat = np.asarray(H_hat, dtype=complex)
        energy = np.sum(np.abs(H_hat) ** 2, axis=0)
        if np.any(energy == 0):
            raise SingularGram(
                condition=float("inf"), msg="MRC filter needs non-zero channel columns."
            )
        return H_hat / energy


class ZeroForcingDetector(Detector):
    name = "zf"

    def filter_matrix(self, H_hat: np.ndarray) -> np.ndarray:
        return numerics.left_pseudo_inverse(H_hat)
