"""Experiment driver: signal generation, end-to-end runs, and result files.

An ExperimentSpec pins a grid, a sparsity, a signal model, and the seeds to
run; `run_experiment` executes the recovery pipeline once per seed and
returns one RunRecord per run, optionally writing a CSV of the records and
a JSON sidecar with the full configuration. Identical spec and seed give an
identical record except for wall_time_ms.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .core import (
    DenseSignal,
    GridIndex,
    ParameterError,
    RecoveryParams,
    SparseApprox,
    Tunables,
    is_power_of_two,
)
from .dense_dft import forward_dft
from .recovery import sparse_fft_with_stats

__all__ = [
    "SIGNAL_MODELS",
    "ExperimentSpec",
    "RunRecord",
    "generate_signal",
    "run_experiment",
    "run_sweep",
    "spec_digest",
    "write_csv",
    "read_csv",
    "write_json",
]

SIGNAL_MODELS = (
    "exact-sparse",
    "sparse-plus-gaussian-tail",
    "sparse-plus-adversarial-bucket-tail",
)

# Columns of the emitted CSV, in order; RunRecord.row() must match.
CSV_HEADER = (
    "spec_hash",
    "seed",
    "l2_error_ratio",
    "support_precision",
    "support_recall",
    "samples_location",
    "samples_estimation",
    "samples_infnorm",
    "samples_constsnr",
    "samples_total",
    "wall_time_ms",
)


@dataclass
class ExperimentSpec:
    """One experiment configuration: grid, sparsity, model, and seeds.

    snr scales the planted head magnitudes relative to the exact noise
    level mu of the generated signal; noisy models need snr >= 2 so every
    head coefficient clears 2 mu. The optional overrides replace the
    derived recovery geometry, and `constants` overrides individual
    tunables by name.
    """

    n: int
    d: int
    k: int
    signal_model: str = "exact-sparse"
    snr: float = 10.0
    epsilon: float = 0.1
    seeds: list[int] = field(default_factory=lambda: [0])
    alpha: float = 0.25
    r_star: float | None = None
    B: int | None = None
    F: int | None = None
    r_max: int | None = None
    c_max: int | None = None
    constants: dict[str, float] | None = None

    def __post_init__(self) -> None:
        if not is_power_of_two(self.n):
            raise ParameterError(f"grid side must be a power of two, got n={self.n}")
        if self.d < 1 or self.k < 1:
            raise ParameterError(f"need d >= 1 and k >= 1, got d={self.d}, k={self.k}")
        if not self.seeds:
            raise ParameterError("seeds must be nonempty")
        if self.signal_model not in SIGNAL_MODELS:
            raise ParameterError(
                f"unknown signal model {self.signal_model!r}; "
                f"choose one of {', '.join(SIGNAL_MODELS)}"
            )
        if self.epsilon <= 0.0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if self.signal_model != "exact-sparse" and self.snr < 2.0:
            raise ParameterError(
                f"noisy models need snr >= 2 so heads clear 2*mu, got {self.snr}"
            )

    def tunables(self) -> Tunables:
        if not self.constants:
            return Tunables()
        base = Tunables()
        unknown = [name for name in self.constants if not hasattr(base, name)]
        if unknown:
            raise ParameterError(f"unknown tunable overrides: {', '.join(unknown)}")
        return replace(base, **self.constants)

    def recovery_params(self, mu: float, seed: int) -> RecoveryParams:
        return RecoveryParams.derive(
            self.n,
            self.d,
            self.k,
            epsilon=self.epsilon,
            mu=mu,
            r_star=self.effective_r_star(),
            seed=seed,
            alpha=self.alpha,
            F=self.F,
            B=self.B,
            r_max=self.r_max,
            c_max=self.c_max,
            tunables=self.tunables(),
        )

    def effective_r_star(self) -> float:
        if self.r_star is not None:
            return self.r_star
        return max(2.0, 2.0 * self.snr)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        return cls(**data)


@dataclass
class RunRecord:
    """Metrics of one recovery run against its generated ground truth."""

    spec_hash: str
    seed: int
    l2_error_ratio: float
    support_precision: float
    support_recall: float
    samples_location: int
    samples_estimation: int
    samples_infnorm: int
    samples_constsnr: int
    samples_total: int
    wall_time_ms: float

    def __post_init__(self) -> None:
        parts = (
            self.samples_location
            + self.samples_estimation
            + self.samples_infnorm
            + self.samples_constsnr
        )
        if self.samples_total != parts:
            raise ParameterError(
                f"samples_total {self.samples_total} does not equal the sum "
                f"of its parts {parts}"
            )

    def row(self) -> tuple:
        return (
            self.spec_hash,
            self.seed,
            self.l2_error_ratio,
            self.support_precision,
            self.support_recall,
            self.samples_location,
            self.samples_estimation,
            self.samples_infnorm,
            self.samples_constsnr,
            self.samples_total,
            self.wall_time_ms,
        )


def spec_digest(spec: ExperimentSpec) -> str:
    """Short stable hash of the full configuration."""
    payload = json.dumps(spec.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def _ball_coords(n: int, d: int, center: np.ndarray, radius: int) -> np.ndarray:
    """All grid points within sup-distance radius of center, as flat indices."""
    side = np.arange(-radius, radius + 1)
    offsets = np.stack(np.meshgrid(*([side] * d), indexing="ij"), axis=-1).reshape(-1, d)
    coords = (center[None, :] + offsets) % n
    flat = np.zeros(coords.shape[0], dtype=np.int64)
    for ax in range(d):
        flat = flat * n + coords[:, ax]
    return flat


def generate_signal(
    spec: ExperimentSpec, seed: int
) -> tuple[DenseSignal, SparseApprox, float]:
    """Draw one signal: planted sparse head plus the model's tail.

    Returns the dense time-domain signal, the planted head as the ground
    truth, and the exact noise level mu = ||tail||_2 / sqrt(k) of the
    realized draw. Head magnitudes are snr * mu times a uniform [1, 2]
    factor (uniform [1, 2] outright when the tail is empty), so they clear
    2 mu whenever snr >= 2. Gaussian tails target total energy k; the
    adversarial model packs the same energy into one sup-norm ball.
    """
    N = spec.n**spec.d
    if spec.k > N // 4:
        raise ParameterError(f"k={spec.k} exceeds N/4 = {N // 4}")
    rng = np.random.default_rng(seed)
    n, d, k = spec.n, spec.d, spec.k

    head_flat = rng.choice(N, size=k, replace=False)
    values = np.zeros((n,) * d, dtype=np.complex128).reshape(N)

    if spec.signal_model == "sparse-plus-gaussian-tail":
        tail_cells = np.setdiff1d(np.arange(N), head_flat)
    elif spec.signal_model == "sparse-plus-adversarial-bucket-tail":
        center = rng.integers(0, n, size=d)
        radius = max(1, n // 32)
        cells = np.setdiff1d(_ball_coords(n, d, center, radius), head_flat)
        while cells.size == 0:
            radius *= 2
            cells = np.setdiff1d(_ball_coords(n, d, center, radius), head_flat)
        tail_cells = cells
    else:
        tail_cells = np.array([], dtype=np.int64)

    if tail_cells.size:
        energy = float(k)
        sigma = math.sqrt(energy / (2.0 * tail_cells.size))
        tail_vals = sigma * (
            rng.standard_normal(tail_cells.size)
            + 1j * rng.standard_normal(tail_cells.size)
        )
        values[tail_cells] = tail_vals
        mu_true = float(np.linalg.norm(tail_vals) / math.sqrt(k))
    else:
        mu_true = 0.0

    phases = np.exp(2j * np.pi * rng.random(k))
    scale = spec.snr * mu_true if mu_true > 0.0 else 1.0
    mags = scale * (1.0 + rng.random(k))
    values[head_flat] = mags * phases

    entries = {}
    for pos, flat in enumerate(head_flat):
        coords = []
        rem = int(flat)
        for _ in range(d):
            coords.append(rem % n)
            rem //= n
        coords.reverse()
        entries[GridIndex(n, tuple(coords))] = complex(mags[pos] * phases[pos])
    x = DenseSignal(n, d, values.reshape((n,) * d), domain="time")
    return x, SparseApprox(n, d, entries), mu_true


def _run_one(spec: ExperimentSpec, seed: int, digest: str) -> RunRecord:
    start = time.perf_counter()
    x, truth, mu_true = generate_signal(spec, seed)
    xhat = forward_dft(x)
    params = spec.recovery_params(mu_true, seed)
    output, stats = sparse_fft_with_stats(
        xhat,
        spec.k,
        epsilon=spec.epsilon,
        r_star=spec.effective_r_star(),
        mu=mu_true,
        seed=seed,
        params=params,
    )
    wall_ms = (time.perf_counter() - start) * 1e3

    x_norm = x.norm2()
    err = np.linalg.norm(x.values - output.to_dense("time").values) ** 2
    tail_energy = np.linalg.norm(x.values - truth.to_dense("time").values) ** 2
    # The denominator is floored so exactly sparse runs (tail 0) report a
    # finite ratio; 1e-9 of the signal norm tracks the pipeline's own
    # subtraction accuracy.
    denom = max(tail_energy, (1e-9 * x_norm) ** 2, 1e-300)

    found = output.support()
    true_supp = truth.support()
    hits = len(found & true_supp)
    precision = hits / len(found) if found else 1.0
    recall = hits / len(true_supp) if true_supp else 1.0

    return RunRecord(
        spec_hash=digest,
        seed=seed,
        l2_error_ratio=float(err / denom),
        support_precision=precision,
        support_recall=recall,
        samples_location=stats.samples_location,
        samples_estimation=stats.samples_estimation,
        samples_infnorm=stats.samples_infnorm,
        samples_constsnr=stats.samples_constsnr,
        samples_total=stats.total_samples,
        wall_time_ms=wall_ms,
    )


def _worker_count() -> int:
    raw = os.environ.get("SPARSEFFT_WORKERS", "").strip()
    if not raw:
        return 1
    count = int(raw)
    if count < 1:
        raise ParameterError(f"SPARSEFFT_WORKERS must be >= 1, got {count}")
    return count


def run_experiment(
    spec: ExperimentSpec,
    *,
    csv_path: str | None = None,
    json_path: str | None = None,
) -> list[RunRecord]:
    """Run the full pipeline once per seed and optionally write result files.

    Seeds run in a thread pool sized by SPARSEFFT_WORKERS (default 1);
    records are collected and written in seed order regardless of worker
    scheduling, so output files are deterministic up to wall_time_ms.
    """
    digest = spec_digest(spec)
    workers = _worker_count()
    if workers == 1:
        records = [_run_one(spec, seed, digest) for seed in spec.seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_one, spec, seed, digest) for seed in spec.seeds]
            records = [f.result() for f in futures]
    if csv_path is not None:
        write_csv(csv_path, records)
    if json_path is not None:
        write_json(json_path, spec, records)
    return records


def run_sweep(
    spec: ExperimentSpec,
    param: str,
    values: list,
    *,
    csv_path: str | None = None,
) -> dict:
    """Rerun the experiment with `param` replaced by each value in turn.

    Returns {value: records}; the optional CSV is tidy (one row per run,
    with the swept parameter and value as leading columns) so error and
    sample curves can be plotted directly.
    """
    if not hasattr(spec, param) or param in ("seeds", "signal_model", "constants"):
        raise ParameterError(f"cannot sweep parameter {param!r}")
    results: dict = {}
    for value in values:
        results[value] = run_experiment(replace(spec, **{param: value}))
    if csv_path is not None:
        try:
            with open(csv_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(("param", "value") + CSV_HEADER)
                for value, records in results.items():
                    for rec in records:
                        writer.writerow((param, value) + rec.row())
        except OSError as exc:
            raise OSError(f"writing sweep CSV {csv_path!r}: {exc}") from exc
    return results


def write_csv(path: str, records: list[RunRecord]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for rec in records:
                writer.writerow(rec.row())
    except OSError as exc:
        raise OSError(f"writing records CSV {path!r}: {exc}") from exc


def read_csv(path: str) -> list[RunRecord]:
    """Inverse of write_csv; numeric columns come back typed."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise OSError(f"reading records CSV {path!r}: {exc}") from exc
    out = []
    for row in rows:
        out.append(
            RunRecord(
                spec_hash=row["spec_hash"],
                seed=int(row["seed"]),
                l2_error_ratio=float(row["l2_error_ratio"]),
                support_precision=float(row["support_precision"]),
                support_recall=float(row["support_recall"]),
                samples_location=int(row["samples_location"]),
                samples_estimation=int(row["samples_estimation"]),
                samples_infnorm=int(row["samples_infnorm"]),
                samples_constsnr=int(row["samples_constsnr"]),
                samples_total=int(row["samples_total"]),
                wall_time_ms=float(row["wall_time_ms"]),
            )
        )
    return out


def write_json(path: str, spec: ExperimentSpec, records: list[RunRecord]) -> None:
    payload = {
        "spec": spec.to_dict(),
        "spec_hash": spec_digest(spec),
        "records": [asdict(rec) for rec in records],
    }
    try:
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"writing JSON sidecar {path!r}: {exc}") from exc
