"""Sublinear-sample sparse transform recovery over power-of-two grids.

The library recovers a k-sparse signal from a small number of reads of its
orthonormal discrete Fourier transform. `sparse_fft` is the main entry
point; the submodules expose the building blocks (bucket filters, spectrum
permutations, semi-equispaced evaluation, bucket measurements, location,
estimation) and a benchmark harness with a CLI.
"""

from .core import (
    DenseSignal,
    DimensionError,
    DivergenceError,
    GridIndex,
    ParameterError,
    ProbePair,
    RecoveryParams,
    ScaleGuardError,
    SparseApprox,
    Tunables,
    digit_base,
    positive_part,
    star,
)
from .dense_dft import forward_dft, inverse_dft
from .diagnostics import NoiseProfile, compute_noise_profile
from .estimation import EstimateBatch, estimate_values
from .filters import BucketFilter, FlatWindow, build_bucket_filter, build_flat_window
from .harness import ExperimentSpec, RunRecord, generate_signal, run_experiment
from .hashing_measurements import (
    MeasurementSet,
    acquire_measurements,
    hash_to_bins,
    load_measurement_set,
    save_measurement_set,
    update_residual_measurements,
)
from .location import LocationResult, check_balanced, locate_signal
from .permutation import (
    Hashing,
    SpectrumPermutation,
    apply_P,
    bucket_of,
    is_isolated,
    offset,
    sample_permutation,
)
from .recovery import (
    RunStats,
    recover_at_constant_snr,
    reduce_inf_norm,
    reduce_l1_norm,
    sparse_fft,
    sparse_fft_with_stats,
)
from .semi_equispaced import semi_equispaced_fft, shifted_semi_equispaced

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "ParameterError",
    "DimensionError",
    "ScaleGuardError",
    "DivergenceError",
    "GridIndex",
    "ProbePair",
    "star",
    "digit_base",
    "positive_part",
    "DenseSignal",
    "SparseApprox",
    "Tunables",
    "RecoveryParams",
    "forward_dft",
    "inverse_dft",
    "BucketFilter",
    "FlatWindow",
    "build_bucket_filter",
    "build_flat_window",
    "SpectrumPermutation",
    "Hashing",
    "sample_permutation",
    "apply_P",
    "bucket_of",
    "offset",
    "is_isolated",
    "semi_equispaced_fft",
    "shifted_semi_equispaced",
    "MeasurementSet",
    "acquire_measurements",
    "hash_to_bins",
    "update_residual_measurements",
    "save_measurement_set",
    "load_measurement_set",
    "LocationResult",
    "locate_signal",
    "check_balanced",
    "EstimateBatch",
    "estimate_values",
    "RunStats",
    "reduce_l1_norm",
    "reduce_inf_norm",
    "recover_at_constant_snr",
    "sparse_fft",
    "sparse_fft_with_stats",
    "NoiseProfile",
    "compute_noise_profile",
    "ExperimentSpec",
    "RunRecord",
    "generate_signal",
    "run_experiment",
]
