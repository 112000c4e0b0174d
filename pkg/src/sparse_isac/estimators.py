"""Delay and Doppler estimation from a sparse frequency-domain grid.

Three estimators work off the same received grid:

* zero-fill periodogram: unused resource elements stay zero and a plain
  oversampled inverse transform maps subcarriers to delay;
* single-target ML: direct maximization of the matched-phasor objective
  on the same delay grid (argmax provably coincides with the zero-fill
  periodogram, but the code path is an independent direct evaluation);
* autocorrelation on the virtual aperture: per-symbol lag products build
  a signal on the difference set, coherent accumulation over the CPI
  suppresses the cross terms, and an inverse transform of the zero-filled
  lag axis yields a periodogram with the virtual resolution.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .alloc import OfdmParams, ResourceAllocation, VirtualAperture, difference_set
from .scene import SPEED_OF_LIGHT
from .synth import FreqGrid

__all__ = [
    "Periodogram",
    "DelayEstimate",
    "VirtualSignal",
    "Peak",
    "PeakList",
    "zero_fill_periodogram",
    "ml_single_target",
    "autocorrelate_symbol",
    "accumulate_cpi",
    "build_virtual_signal",
    "virtual_periodogram",
    "detect_peaks",
    "doppler_periodogram",
]


@dataclass(frozen=True)
class Periodogram:
    """Magnitude spectrum on a delay (s) or Doppler (Hz) axis."""

    axis: np.ndarray
    values: np.ndarray
    domain: str  # "delay" | "doppler"
    method: str
    oversample: int
    params: OfdmParams

    def __post_init__(self):
        if self.axis.shape != self.values.shape:
            raise ValueError("axis and values must align")
        if np.any(np.diff(self.axis) <= 0):
            raise ValueError("axis must be strictly increasing")
        if np.any(self.values < 0):
            raise ValueError("magnitudes must be non-negative")
        self.axis.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def n_bins(self) -> int:
        return int(self.values.size)

    @property
    def bin_width(self) -> float:
        return float(self.axis[1] - self.axis[0])

    @property
    def argmax_bin(self) -> int:
        return int(np.argmax(self.values))

    def range_axis_m(self) -> np.ndarray:
        if self.domain != "delay":
            raise ValueError("range axis only exists for delay periodograms")
        return self.axis * SPEED_OF_LIGHT / 2.0

    def to_csv(self, path, comment: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["axis_value", "magnitude"])
            for a, v in zip(self.axis, self.values):
                w.writerow([f"{a:.12g}", f"{v:.12g}"])


@dataclass(frozen=True)
class DelayEstimate:
    delay_s: float
    range_m: float
    bin_index: int
    n_bins: int
    peak_value: float
    refined: bool


@dataclass(frozen=True)
class VirtualSignal:
    """Complex per-lag values on a virtual aperture.

    Conjugate-symmetric by construction: the value at -s is the conjugate
    of the value at s, and the zero lag is real and non-negative up to
    round-off.
    """

    values: np.ndarray  # complex, aligned with aperture.lags
    aperture: VirtualAperture
    accumulated: bool = False
    n_symbols: int = 1

    def __post_init__(self):
        if self.values.shape != self.aperture.lags.shape:
            raise ValueError("values must align with the aperture lag set")
        self.values.setflags(write=False)

    def value_at(self, lag: int) -> complex:
        pos = np.searchsorted(self.aperture.lags, lag)
        if pos >= self.aperture.lags.size or self.aperture.lags[pos] != lag:
            raise KeyError(f"lag {lag} is a hole of this aperture")
        return complex(self.values[pos])


@dataclass(frozen=True)
class Peak:
    bin_index: int
    axis_value: float
    refined_axis_value: float
    magnitude: float


@dataclass(frozen=True)
class PeakList:
    """Peaks ordered by magnitude descending."""

    peaks: tuple[Peak, ...]
    requested: int
    domain: str

    @property
    def complete(self) -> bool:
        return len(self.peaks) >= self.requested

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["rank", "delay_s", "range_m", "magnitude"])
            for rank, p in enumerate(self.peaks, start=1):
                delay = p.refined_axis_value
                rng_m = delay * SPEED_OF_LIGHT / 2.0 if self.domain == "delay" else ""
                w.writerow([rank, f"{delay:.12g}", f"{rng_m:.12g}" if rng_m != "" else "", f"{p.magnitude:.12g}"])


def _active_cardinality(alloc: ResourceAllocation) -> float:
    """Mean active subcarriers per symbol (scale factor for periodograms)."""
    total = int(alloc.cardinalities().sum())
    if total == 0:
        raise ValueError("allocation has no active resource elements")
    return total / alloc.n_symbols


def zero_fill_periodogram(grid: FreqGrid, oversample: int = 4) -> Periodogram:
    """Delay periodogram of the zero-filled grid.

    values[q] = |sum_m sum_n Y_m[n] e^{j 2 pi q n / Q}| / (M * K) on a
    Q = oversample * N point grid, where K is the active cardinality.  The
    axis maps bin q to delay q / (Q * subcarrier_spacing).
    """
    if int(oversample) != oversample or oversample < 1:
        raise ValueError("oversample must be a positive integer")
    oversample = int(oversample)
    params = grid.params
    n = params.n_subcarriers
    q_bins = oversample * n
    k = _active_cardinality(grid.alloc)
    collapsed = grid.samples.sum(axis=0)  # symbols combine coherently
    spectrum = np.fft.ifft(collapsed, n=q_bins) * q_bins
    values = np.abs(spectrum) / (grid.n_symbols * k)
    axis = np.arange(q_bins) / (q_bins * params.subcarrier_spacing_hz)
    return Periodogram(
        axis=axis,
        values=values,
        domain="delay",
        method="zero_fill",
        oversample=oversample,
        params=params,
    )


def _parabolic_offset(log_m1: float, log_0: float, log_p1: float) -> float:
    """Vertex offset in bins of the parabola through three log-magnitudes."""
    denom = log_m1 - 2.0 * log_0 + log_p1
    if denom == 0.0 or not math.isfinite(denom):
        return 0.0
    delta = 0.5 * (log_m1 - log_p1) / denom
    # stays within one grid cell of the raw bin
    return float(np.clip(delta, -1.0, 1.0))


def _refine_bin(values: np.ndarray, idx: int) -> float:
    """Fractional bin position of the peak at idx via a 3-point parabolic
    fit on log-magnitude; the axis is treated as circular."""
    n = values.size
    vm1, v0, vp1 = values[(idx - 1) % n], values[idx], values[(idx + 1) % n]
    if v0 <= 0.0 or vm1 <= 0.0 or vp1 <= 0.0:
        return float(idx)
    return idx + _parabolic_offset(math.log(vm1), math.log(v0), math.log(vp1))


_STEERING_CACHE: dict = {}


def _steering_block(q_bins: int, active: np.ndarray) -> list[np.ndarray]:
    """Chunked e^{j 2 pi q n / Q} blocks over the active subcarriers.

    Building the exponentials dominates the direct ML search, so blocks
    are cached per (grid size, active set); Monte-Carlo loops reuse them.
    """
    key = (q_bins, active.tobytes())
    hit = _STEERING_CACHE.get(key)
    if hit is not None:
        return hit
    chunk = 4096
    blocks = [
        np.exp(
            2j
            * np.pi
            * np.outer(np.arange(q0, min(q0 + chunk, q_bins)), active)
            / q_bins
        )
        for q0 in range(0, q_bins, chunk)
    ]
    if len(_STEERING_CACHE) >= 8:
        _STEERING_CACHE.pop(next(iter(_STEERING_CACHE)))
    _STEERING_CACHE[key] = blocks
    return blocks


def ml_single_target(
    grid: FreqGrid, oversample: int = 4, refine: bool = True
) -> DelayEstimate:
    """Single-target ML delay estimate.

    Maximizes |sum_m sum_{n active} Y_m[n] e^{j 2 pi n df tau}| over the
    oversampled delay grid by direct evaluation of the objective (no FFT),
    optionally refined by a parabolic fit on log-magnitude.  Documented
    single-target assumption; nothing is enforced.
    """
    if int(oversample) != oversample or oversample < 1:
        raise ValueError("oversample must be a positive integer")
    oversample = int(oversample)
    params = grid.params
    n = params.n_subcarriers
    q_bins = oversample * n
    if not np.any(grid.samples):
        raise ValueError("grid is empty (all-zero samples)")
    collapsed = grid.samples.sum(axis=0)
    active = np.unique(np.concatenate(grid.alloc.per_symbol_indices))
    z = collapsed[active]
    values = np.concatenate(
        [np.abs(block @ z) for block in _steering_block(q_bins, active)]
    )
    best = int(np.argmax(values))
    pos = _refine_bin(values, best) if refine else float(best)
    bin_width = 1.0 / (q_bins * params.subcarrier_spacing_hz)
    delay = (pos % q_bins) * bin_width
    return DelayEstimate(
        delay_s=delay,
        range_m=delay * SPEED_OF_LIGHT / 2.0,
        bin_index=best,
        n_bins=q_bins,
        peak_value=float(values[best]),
        refined=refine,
    )


def _lag_products(rows: np.ndarray, aperture: VirtualAperture) -> np.ndarray:
    """Per-row lag sums R[s] = sum_{i-j=s} Y[i] * conj(Y[j]) on the aperture
    lags, normalized by the pair counts.  rows: (m, N) complex."""
    n = aperture.n_subcarriers
    length = 2 * n
    f = np.fft.fft(rows, n=length, axis=-1)
    acf = np.fft.ifft(f * np.conj(f), axis=-1)
    vals = acf[..., np.mod(aperture.lags, length)]
    return vals / aperture.pair_counts


def autocorrelate_symbol(
    grid: FreqGrid, symbol: int, aperture: VirtualAperture
) -> VirtualSignal:
    """Virtual signal of one OFDM symbol.

    For every available lag s the normalized sum of pair products
    Y[i] conj(Y[j]) over index pairs with i - j = s; a noiseless single
    target of amplitude A yields exactly A^2 e^{-j 2 pi df s tau} at every
    lag, symbol by symbol (the Doppler phase cancels within a symbol).
    """
    row = grid.samples[symbol]
    vals = _lag_products(row[None, :], aperture)[0]
    return VirtualSignal(values=vals, aperture=aperture, accumulated=False, n_symbols=1)


def accumulate_cpi(signals: list[VirtualSignal] | tuple[VirtualSignal, ...]) -> VirtualSignal:
    """Lag-wise mean of per-symbol virtual signals over the CPI."""
    if len(signals) < 1:
        raise ValueError("need at least one symbol to accumulate")
    ap = signals[0].aperture
    for s in signals[1:]:
        if not np.array_equal(s.aperture.lags, ap.lags):
            raise ValueError("virtual signals live on mismatched apertures")
    stack = np.stack([s.values for s in signals], axis=0)
    return VirtualSignal(
        values=stack.mean(axis=0),
        aperture=ap,
        accumulated=True,
        n_symbols=len(signals),
    )


def build_virtual_signal(
    grid: FreqGrid, alloc: ResourceAllocation | None = None
) -> tuple[VirtualSignal, VirtualAperture]:
    """Full virtual-resource pipeline for one grid.

    Difference set of the (symbol-constant) allocation, per-symbol lag
    products, then coherent accumulation across the CPI.  Returns the
    accumulated virtual signal together with its aperture.
    """
    alloc = grid.alloc if alloc is None else alloc
    aperture = difference_set(alloc)
    vals = _lag_products(grid.samples, aperture).mean(axis=0)
    vs = VirtualSignal(
        values=vals, aperture=aperture, accumulated=True, n_symbols=grid.n_symbols
    )
    return vs, aperture


def virtual_periodogram(
    vs: VirtualSignal,
    params: OfdmParams,
    oversample: int = 4,
    n_subcarriers: int | None = None,
) -> Periodogram:
    """Delay periodogram of a virtual signal.

    The lag values are placed on a zero-filled axis spanning the full
    range -(N-1)..N-1 (holes stay zero) and inverse-transformed on a
    Q = oversample * (2N - 1) point grid; magnitudes are scaled by the
    number of available lags so a unit noiseless target peaks at A^2.
    """
    if int(oversample) != oversample or oversample < 1:
        raise ValueError("oversample must be a positive integer")
    oversample = int(oversample)
    n = n_subcarriers if n_subcarriers is not None else vs.aperture.n_subcarriers
    span = 2 * n - 1
    q_bins = oversample * span
    taps = np.zeros(q_bins, dtype=np.complex128)
    taps[np.mod(vs.aperture.lags, q_bins)] = vs.values
    spectrum = np.fft.ifft(taps) * q_bins
    values = np.abs(spectrum) / vs.aperture.n_lags
    axis = np.arange(q_bins) / (q_bins * params.subcarrier_spacing_hz)
    return Periodogram(
        axis=axis,
        values=values,
        domain="delay",
        method="autocorrelation",
        oversample=oversample,
        params=params,
    )


def _circular_distance(i: int, j: int, n: int) -> int:
    d = abs(i - j) % n
    return min(d, n - d)


def detect_peaks(p: Periodogram, k: int = 1, min_separation: int = 1) -> PeakList:
    """Greedy peak picking with circular exclusion zones.

    Local maxima are ranked by magnitude (lowest bin wins exact ties) and
    accepted unless within min_separation bins of an already accepted
    peak.  Fewer than k peaks may come back; PeakList.complete tells.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    v = p.values
    n = v.size
    left = np.roll(v, 1)
    right = np.roll(v, -1)
    cand = np.nonzero((v > left) & (v >= right))[0]
    if cand.size == 0 and np.any(v > 0):
        cand = np.array([int(np.argmax(v))])
    order = cand[np.lexsort((cand, -v[cand]))]  # magnitude desc, index asc
    chosen: list[int] = []
    for idx in order:
        if len(chosen) == k:
            break
        if all(_circular_distance(idx, c, n) > min_separation for c in chosen):
            chosen.append(int(idx))
    peaks = []
    for idx in chosen:
        pos = _refine_bin(v, idx)
        refined_axis = (pos % n) * p.bin_width + float(p.axis[0])
        peaks.append(
            Peak(
                bin_index=idx,
                axis_value=float(p.axis[idx]),
                refined_axis_value=refined_axis,
                magnitude=float(v[idx]),
            )
        )
    return PeakList(peaks=tuple(peaks), requested=k, domain=p.domain)


def _noncoherent_delay(grid: FreqGrid, oversample: int) -> float:
    """Delay from the symbol-incoherent power profile.

    Summing per-symbol spectral power keeps moving targets visible (a
    coherent symbol sum nulls out whenever the Doppler phase wraps whole
    cycles over the CPI), which makes this the right pre-step for
    picking the Doppler slice.
    """
    params = grid.params
    q_bins = oversample * params.n_subcarriers
    spectra = np.abs(np.fft.ifft(grid.samples, n=q_bins, axis=1)) ** 2
    profile = spectra.sum(axis=0)
    pos = _refine_bin(profile, int(np.argmax(profile)))
    return (pos % q_bins) / (q_bins * params.subcarrier_spacing_hz)


def doppler_periodogram(
    grid: FreqGrid, oversample: int = 4, delay_s: float | None = None
) -> Periodogram:
    """Doppler periodogram on the matched delay slice.

    Each symbol is compressed at the given delay (estimated from the
    symbol-incoherent power profile when omitted), then the symbol
    sequence is transformed to Doppler on an oversampled axis centered
    on zero.
    """
    if int(oversample) != oversample or oversample < 1:
        raise ValueError("oversample must be a positive integer")
    oversample = int(oversample)
    params = grid.params
    if delay_s is None:
        delay_s = _noncoherent_delay(grid, oversample)
    n_idx = np.arange(params.n_subcarriers)
    unwrap = np.exp(2j * np.pi * params.subcarrier_spacing_hz * delay_s * n_idx)
    slices = grid.samples @ unwrap  # per-symbol matched sum over subcarriers
    m = params.n_symbols
    u_bins = oversample * m
    k = _active_cardinality(grid.alloc)
    spectrum = np.fft.fft(slices, n=u_bins)
    values = np.abs(np.fft.fftshift(spectrum)) / (m * k)
    axis = (np.arange(u_bins) - u_bins // 2) / (u_bins * params.symbol_dur_s)
    return Periodogram(
        axis=axis,
        values=values,
        domain="doppler",
        method="zero_fill",
        oversample=oversample,
        params=params,
    )
