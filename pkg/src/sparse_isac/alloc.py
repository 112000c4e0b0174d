"""Sparse subcarrier allocation patterns and their difference-set (virtual) apertures.

An allocation says which subcarriers carry sensing energy in each OFDM
symbol.  Its difference set {n_i - n_j} is the lag support on which the
autocorrelation estimator can synthesize a virtual measurement, so the
quality of a sparse pattern is judged by how completely those lags cover
the full range -(N-1)..N-1.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OfdmParams",
    "ResourceAllocation",
    "VirtualAperture",
    "HoleFillCurve",
    "make_allocation",
    "difference_set",
    "coverage_fraction",
    "hole_fill_probability",
    "hole_fill_curve",
    "nested_params_for",
]


@dataclass(frozen=True)
class OfdmParams:
    """Static OFDM waveform constants.

    n_subcarriers          grid width in frequency (N)
    n_symbols              grid depth in time, one CPI (M)
    subcarrier_spacing_hz  inter-carrier spacing
    carrier_freq_hz        RF carrier, used for Doppler mapping and wavelength
    cp_len_s               cyclic-prefix duration, 0 allowed
    """

    n_subcarriers: int
    n_symbols: int
    subcarrier_spacing_hz: float
    carrier_freq_hz: float
    cp_len_s: float = 0.0

    def __post_init__(self):
        if self.n_subcarriers < 2:
            raise ValueError(f"n_subcarriers must be >= 2, got {self.n_subcarriers}")
        if self.n_symbols < 1:
            raise ValueError(f"n_symbols must be >= 1, got {self.n_symbols}")
        if self.subcarrier_spacing_hz <= 0:
            raise ValueError("subcarrier_spacing_hz must be positive")
        if self.carrier_freq_hz <= 0:
            raise ValueError("carrier_freq_hz must be positive")
        if self.cp_len_s < 0:
            raise ValueError("cp_len_s must be >= 0")

    @property
    def symbol_core_s(self) -> float:
        """Useful symbol duration 1/subcarrier_spacing (no CP)."""
        return 1.0 / self.subcarrier_spacing_hz

    @property
    def symbol_dur_s(self) -> float:
        """Full symbol duration including cyclic prefix."""
        return self.symbol_core_s + self.cp_len_s

    @property
    def bandwidth_hz(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing_hz

    @property
    def total_dur_s(self) -> float:
        """CPI duration covered by all n_symbols."""
        return self.n_symbols * self.symbol_dur_s

    @property
    def range_bin_m(self) -> float:
        """Fundamental (non-oversampled) range resolution c/(2*B)."""
        from .scene import SPEED_OF_LIGHT

        return SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz)


def _as_index_array(indices, n_subcarriers: int) -> np.ndarray:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise ValueError("index set must be a non-empty 1-D sequence")
    if idx.min() < 0 or idx.max() > n_subcarriers - 1:
        raise ValueError(
            f"indices must lie in [0, {n_subcarriers - 1}], got range "
            f"[{idx.min()}, {idx.max()}]"
        )
    idx = np.unique(idx)  # dedup + ascending
    idx.setflags(write=False)
    return idx


@dataclass(frozen=True)
class ResourceAllocation:
    """Per-symbol active subcarrier index sets.

    Index sets are ascending and duplicate-free.  Patterns produced by
    make_allocation are identical for every OFDM symbol; custom
    allocations may vary per symbol (the CRLB machinery supports that,
    the autocorrelation estimator does not).
    """

    per_symbol_indices: tuple[np.ndarray, ...]
    n_subcarriers: int
    pattern_label: str = "custom"

    def __post_init__(self):
        if len(self.per_symbol_indices) < 1:
            raise ValueError("allocation needs at least one symbol")
        cleaned = tuple(
            _as_index_array(idx, self.n_subcarriers) for idx in self.per_symbol_indices
        )
        object.__setattr__(self, "per_symbol_indices", cleaned)

    @property
    def n_symbols(self) -> int:
        return len(self.per_symbol_indices)

    @property
    def is_constant(self) -> bool:
        first = self.per_symbol_indices[0]
        return all(
            idx is first or np.array_equal(idx, first)
            for idx in self.per_symbol_indices
        )

    @property
    def indices(self) -> np.ndarray:
        """The common index set; raises if the allocation varies per symbol."""
        if not self.is_constant:
            raise ValueError("allocation varies across symbols; no single index set")
        return self.per_symbol_indices[0]

    @property
    def n_active(self) -> int:
        return int(self.indices.size)

    def cardinalities(self) -> np.ndarray:
        return np.array([idx.size for idx in self.per_symbol_indices], dtype=np.int64)

    def mask(self) -> np.ndarray:
        """Boolean (n_symbols, n_subcarriers) activity mask."""
        out = np.zeros((self.n_symbols, self.n_subcarriers), dtype=bool)
        for m, idx in enumerate(self.per_symbol_indices):
            out[m, idx] = True
        return out

    @classmethod
    def constant(cls, indices, n_symbols: int, n_subcarriers: int, label: str = "custom"):
        idx = _as_index_array(indices, n_subcarriers)
        return cls(
            per_symbol_indices=tuple([idx] * n_symbols),
            n_subcarriers=n_subcarriers,
            pattern_label=label,
        )


@dataclass(frozen=True)
class VirtualAperture:
    """Lag support of an allocation's difference set.

    lags         ascending available lags, symmetric about 0
    pair_counts  ordered-pair multiplicity per lag (same length as lags)
    holes        lags in -(N-1)..N-1 produced by no index pair
    """

    lags: np.ndarray
    pair_counts: np.ndarray
    holes: np.ndarray
    n_subcarriers: int

    def __post_init__(self):
        for name in ("lags", "pair_counts", "holes"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.lags.size != self.pair_counts.size:
            raise ValueError("lags and pair_counts must align")
        if 0 not in self.lags:
            raise ValueError("lag 0 must always be available")

    @property
    def n_lags(self) -> int:
        return int(self.lags.size)

    @property
    def max_lag(self) -> int:
        return int(self.lags.max())

    def count(self, lag: int) -> int:
        pos = np.searchsorted(self.lags, lag)
        if pos >= self.lags.size or self.lags[pos] != lag:
            return 0
        return int(self.pair_counts[pos])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lag", "pair_count"])
            for lag, cnt in zip(self.lags, self.pair_counts):
                w.writerow([int(lag), int(cnt)])


def nested_params_for(n_active: int, n_subcarriers: int) -> tuple[int, int]:
    """Pick (inner, outer) block sizes for a nested pattern of the given cardinality.

    Maximizes the pattern extent (inner+1)*outer - 1 subject to fitting in
    n_subcarriers, with inner + outer == n_active.
    """
    if n_active < 2:
        raise ValueError("nested pattern needs cardinality >= 2")
    best = None
    for inner in range(1, n_active):
        outer = n_active - inner
        extent = (inner + 1) * outer - 1
        if extent <= n_subcarriers - 1:
            if best is None or extent > best[2]:
                best = (inner, outer, extent)
    if best is None:
        raise ValueError(
            f"no nested pattern of cardinality {n_active} fits in N={n_subcarriers}"
        )
    return best[0], best[1]


def _nested_indices(inner: int, outer: int, n_subcarriers: int) -> np.ndarray:
    if inner < 1 or outer < 1:
        raise ValueError("nested pattern needs inner >= 1 and outer >= 1")
    max_index = (inner + 1) * outer - 1
    if max_index > n_subcarriers - 1:
        raise ValueError(
            f"nested(inner={inner}, outer={outer}) reaches index {max_index} "
            f"> N-1 = {n_subcarriers - 1}"
        )
    dense = np.arange(inner)
    coarse = (inner + 1) * np.arange(1, outer + 1) - 1
    return np.union1d(dense, coarse)


def _coprime_indices(p: int, q: int, n_subcarriers: int) -> np.ndarray:
    if p < 1 or q < 1:
        raise ValueError("co-prime strides must be >= 1")
    if math.gcd(p, q) != 1:
        raise ValueError(f"strides ({p}, {q}) are not co-prime")
    if min(p, q) > n_subcarriers - 1:
        raise ValueError(
            f"co-prime strides ({p}, {q}) generate only index 0 for N={n_subcarriers}"
        )
    comb_p = np.arange(0, n_subcarriers, p)
    comb_q = np.arange(0, n_subcarriers, q)
    return np.union1d(comb_p, comb_q)


def make_allocation(
    params: OfdmParams,
    pattern: str,
    *,
    n_active: int | None = None,
    stride: int | None = None,
    p: int | None = None,
    q: int | None = None,
    inner: int | None = None,
    outer: int | None = None,
    indices=None,
    seed=None,
) -> ResourceAllocation:
    """Build a ResourceAllocation, identical across all OFDM symbols.

    Patterns:
      full                 every subcarrier
      comb                 {0, stride, 2*stride, ...}
      random               n_active indices; 0 and N-1 are always forced in,
                           the rest drawn uniformly without replacement
      coprime              union of two combs with co-prime strides (p, q)
      nested               dense block of `inner` indices plus `outer` coarse
                           indices at multiples of inner+1 (shifted by -1), the
                           construction whose difference set is hole-free
      custom               explicit index list, or list of per-symbol lists

    Deterministic for a fixed seed.
    """
    n = params.n_subcarriers
    label = pattern
    if pattern == "full":
        idx = np.arange(n)
    elif pattern == "comb":
        if stride is None or stride < 1:
            raise ValueError("comb pattern needs stride >= 1")
        idx = np.arange(0, n, stride)
    elif pattern == "random":
        if n_active is None:
            raise ValueError("random pattern needs n_active")
        if not 2 <= n_active <= n:
            raise ValueError(f"n_active must be in [2, {n}], got {n_active}")
        rng = np.random.default_rng(seed)
        middle = rng.choice(np.arange(1, n - 1), size=n_active - 2, replace=False)
        idx = np.union1d([0, n - 1], middle)
    elif pattern == "coprime":
        if p is None or q is None:
            raise ValueError("coprime pattern needs strides p and q")
        idx = _coprime_indices(p, q, n)
    elif pattern == "nested":
        if inner is None or outer is None:
            raise ValueError("nested pattern needs inner and outer block sizes")
        idx = _nested_indices(inner, outer, n)
    elif pattern == "custom":
        if indices is None:
            raise ValueError("custom pattern needs explicit indices")
        first = indices[0] if len(indices) else None
        if first is not None and np.ndim(first) >= 1:
            # per-symbol list of lists
            if len(indices) != params.n_symbols:
                raise ValueError(
                    f"custom per-symbol allocation needs {params.n_symbols} index "
                    f"sets, got {len(indices)}"
                )
            return ResourceAllocation(
                per_symbol_indices=tuple(np.asarray(s, dtype=np.int64) for s in indices),
                n_subcarriers=n,
                pattern_label=label,
            )
        idx = np.asarray(indices, dtype=np.int64)
    else:
        raise ValueError(f"unknown pattern {pattern!r}")

    alloc = ResourceAllocation.constant(idx, params.n_symbols, n, label)
    if alloc.n_active < 2:
        raise ValueError(f"pattern {pattern!r} produced fewer than 2 active subcarriers")
    return alloc


def difference_set(alloc: ResourceAllocation) -> VirtualAperture:
    """All pairwise index differences of the allocation, with multiplicities.

    Requires the allocation to be symbol-constant (the autocorrelation
    estimator fixes one index set across the CPI).
    """
    idx = alloc.indices  # raises if per-symbol sets differ
    if idx.size < 2:
        raise ValueError("difference set needs at least 2 active indices")
    n = alloc.n_subcarriers
    diffs = (idx[:, None] - idx[None, :]).ravel()
    counts = np.bincount(diffs + (n - 1), minlength=2 * n - 1)
    lags = np.nonzero(counts)[0] - (n - 1)
    holes = np.nonzero(counts == 0)[0] - (n - 1)
    return VirtualAperture(
        lags=lags,
        pair_counts=counts[counts > 0],
        holes=holes,
        n_subcarriers=n,
    )


def coverage_fraction(aperture: VirtualAperture, n_subcarriers: int) -> float:
    """Fraction of the full lag range -(N-1)..N-1 the aperture covers."""
    return aperture.n_lags / (2 * n_subcarriers - 1)


def _binomial_halfwidth(p_hat: float, n: int) -> float:
    # normal-approximation 95% half width
    return 1.96 * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / n)


def _random_subsets_with_endpoints(n, n_active, trial_seeds) -> np.ndarray:
    """Boolean (trials, n) membership matrix; indices 0 and n-1 always active.

    One child seed per trial so any partitioning over workers reproduces
    the sequential result.
    """
    out = np.zeros((len(trial_seeds), n), dtype=bool)
    out[:, 0] = True
    out[:, n - 1] = True
    interior = np.arange(1, n - 1)
    for t, child in enumerate(trial_seeds):
        rng = np.random.default_rng(child)
        picked = rng.choice(interior, size=n_active - 2, replace=False)
        out[t, picked] = True
    return out


def _fill_counts(membership: np.ndarray) -> np.ndarray:
    """Per-trial lag pair counts for lags 0..n-1 via FFT correlation."""
    n = membership.shape[1]
    f = np.fft.rfft(membership.astype(np.float64), n=2 * n, axis=1)
    acf = np.fft.irfft(f * np.conj(f), n=2 * n, axis=1)[:, :n]
    return np.rint(acf)


def hole_fill_probability(
    n_subcarriers: int,
    n_active: int,
    lag: int,
    n_trials: int = 1000,
    seed=None,
) -> tuple[float, float]:
    """Monte-Carlo probability that `lag` appears in a random difference set.

    Random subsets always contain indices 0 and N-1; the remaining
    n_active-2 indices are drawn uniformly without replacement.  Returns
    (estimate, 95% binomial half-width).
    """
    n = n_subcarriers
    if not 2 <= n_active <= n:
        raise ValueError(f"n_active must be in [2, {n}], got {n_active}")
    if not 1 <= lag <= n - 1:
        raise ValueError(f"lag must be in [1, {n - 1}], got {lag}")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if n_active == n:
        return 1.0, 0.0
    trial_seeds = np.random.SeedSequence(seed).spawn(n_trials)
    member = _random_subsets_with_endpoints(n, n_active, trial_seeds)
    filled = np.any(member[:, : n - lag] & member[:, lag:], axis=1)
    p_hat = float(filled.mean())
    return p_hat, _binomial_halfwidth(p_hat, n_trials)


@dataclass(frozen=True)
class HoleFillCurve:
    """Per-lag fill probabilities for one (N, n_active) Monte-Carlo run."""

    n_subcarriers: int
    n_active: int
    n_trials: int
    lags: np.ndarray  # 1..N-1
    fill_probability: np.ndarray
    fill_halfwidth: np.ndarray
    all_filled_probability: float
    all_filled_halfwidth: float

    @property
    def min_fill_probability(self) -> float:
        return float(self.fill_probability.min())


def hole_fill_curve(
    n_subcarriers: int,
    n_active: int,
    n_trials: int = 1000,
    seed=None,
) -> HoleFillCurve:
    """Per-lag fill probabilities plus the hole-free (all lags filled) rate.

    The per-lag curve and the aggregated curve answer different questions,
    so both are reported.
    """
    n = n_subcarriers
    if not 2 <= n_active <= n:
        raise ValueError(f"n_active must be in [2, {n}], got {n_active}")
    lags = np.arange(1, n)
    if n_active == n:
        ones = np.ones(n - 1)
        return HoleFillCurve(n, n_active, n_trials, lags, ones, np.zeros(n - 1), 1.0, 0.0)
    trial_seeds = np.random.SeedSequence(seed).spawn(n_trials)
    member = _random_subsets_with_endpoints(n, n_active, trial_seeds)
    counts = _fill_counts(member)[:, 1:]  # drop lag 0
    filled = counts > 0.5
    p = filled.mean(axis=0)
    hw = 1.96 * np.sqrt(np.maximum(p * (1 - p), 0.0) / n_trials)
    p_all = float(filled.all(axis=1).mean())
    return HoleFillCurve(
        n_subcarriers=n,
        n_active=n_active,
        n_trials=n_trials,
        lags=lags,
        fill_probability=p,
        fill_halfwidth=hw,
        all_filled_probability=p_all,
        all_filled_halfwidth=_binomial_halfwidth(p_all, n_trials),
    )
