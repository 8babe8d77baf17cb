"""Dense eigensolvers and the spectral verification harness."""

from okflow.spectra.dense import dense_eigenvalues, hessenberg, jacobi_eigenvalues
from okflow.spectra.lemmas import (
    SpectralReport,
    lemma2_interval,
    matching_identity_error,
    null_space_eigen_error,
    sym_generalized_extremes,
    two_iteration_check,
    verify_lemmas,
)

__all__ = [
    "SpectralReport",
    "dense_eigenvalues",
    "hessenberg",
    "jacobi_eigenvalues",
    "lemma2_interval",
    "matching_identity_error",
    "null_space_eigen_error",
    "sym_generalized_extremes",
    "two_iteration_check",
    "verify_lemmas",
]
