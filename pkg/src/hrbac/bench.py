"""Seal/open timing versus payload size.

Times the crypto path only; no store I/O happens inside the timed windows.
Each size gets a discarded warmup pass, then the median over the
requested repetitions.  The encrypt/decrypt ratio is reported but not
asserted: with an authenticated mode the two directions are
near-symmetric and the split is hardware dependent.
"""

from __future__ import annotations

import io
import os
import statistics
import time
from dataclasses import dataclass

from . import envelope
from .errors import InsufficientMemory, TooFewRows, ValidationError

MIN_REPETITIONS = 5
MAX_PAYLOAD_BYTES = 1 << 30  # refuse absurd allocations up front


@dataclass(frozen=True)
class BenchRow:
    size_bytes: int
    encrypt_ms: float
    decrypt_ms: float
    repetitions: int

    @property
    def ratio(self) -> float:
        return self.encrypt_ms / self.decrypt_ms if self.decrypt_ms else float("inf")


@dataclass(frozen=True)
class TrendReport:
    encrypt_slope_ms_per_byte: float
    decrypt_slope_ms_per_byte: float
    mean_ratio: float

    @property
    def increasing(self) -> bool:
        return self.encrypt_slope_ms_per_byte > 0 and self.decrypt_slope_ms_per_byte > 0


def _pin_to_one_cpu():
    """Restrict the process to a single logical processor while timing;
    returns the previous affinity set, or None where unsupported."""
    if not hasattr(os, "sched_getaffinity"):
        return None
    try:
        previous = os.sched_getaffinity(0)
        os.sched_setaffinity(0, {min(previous)})
        return previous
    except OSError:
        return None


def run_matrix(sizes: list[int], repetitions: int = MIN_REPETITIONS) -> list[BenchRow]:
    """One row per size, sizes strictly ascending, random payloads."""
    if any(later <= earlier for earlier, later in zip(sizes, sizes[1:])):
        raise ValidationError("sizes must be strictly ascending")
    if repetitions < MIN_REPETITIONS:
        raise ValidationError(f"repetitions must be at least {MIN_REPETITIONS}")
    previous_affinity = _pin_to_one_cpu()
    try:
        return _run_matrix_pinned(sizes, repetitions)
    finally:
        if previous_affinity is not None:
            os.sched_setaffinity(0, previous_affinity)


def _run_matrix_pinned(sizes: list[int], repetitions: int) -> list[BenchRow]:
    rows = []
    for size in sizes:
        if size > MAX_PAYLOAD_BYTES:
            raise InsufficientMemory(f"refusing {size}-byte payload")
        try:
            payload = os.urandom(size)
        except MemoryError as exc:
            raise InsufficientMemory(str(exc)) from exc
        key = envelope.generate_data_key()
        aad = b"bench"

        envelope.open_blob(envelope.seal(payload, key, aad), key, aad)  # warmup

        encrypt_times = []
        decrypt_times = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            blob = envelope.seal(payload, key, aad)
            t1 = time.perf_counter()
            envelope.open_blob(blob, key, aad)
            t2 = time.perf_counter()
            encrypt_times.append((t1 - t0) * 1e3)
            decrypt_times.append((t2 - t1) * 1e3)
        rows.append(
            BenchRow(
                size_bytes=size,
                encrypt_ms=statistics.median(encrypt_times),
                decrypt_ms=statistics.median(decrypt_times),
                repetitions=repetitions,
            )
        )
    return rows


def assert_trend(rows: list[BenchRow]) -> TrendReport:
    """Least-squares slope of time vs size must be strictly positive for
    both directions; raises TooFewRows below three rows."""
    if len(rows) < 3:
        raise TooFewRows(f"trend needs at least 3 rows, got {len(rows)}")
    sizes = [float(r.size_bytes) for r in rows]
    enc = statistics.linear_regression(sizes, [r.encrypt_ms for r in rows])
    dec = statistics.linear_regression(sizes, [r.decrypt_ms for r in rows])
    return TrendReport(
        encrypt_slope_ms_per_byte=enc.slope,
        decrypt_slope_ms_per_byte=dec.slope,
        mean_ratio=statistics.fmean(r.ratio for r in rows),
    )


def to_csv(rows: list[BenchRow]) -> str:
    out = io.StringIO()
    out.write("size_bytes,encrypt_ms,decrypt_ms,ratio\n")
    for r in rows:
        out.write(f"{r.size_bytes},{r.encrypt_ms:.6f},{r.decrypt_ms:.6f},{r.ratio:.6f}\n")
    return out.getvalue()
