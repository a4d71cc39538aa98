"""Band-pass filtering and wavelet sub-band decomposition."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

SUBBAND_NAMES = ("D1", "D2", "D3", "D4", "D5", "A5")


@dataclass(frozen=True)
class FilterCoefficients:
    """Cascade of biquads ``(b0, b1, b2, a1, a2)`` with ``a0 = 1``.

    ``gain`` multiplies the whole cascade; ``order`` is the prototype order.
    """

    sections: tuple[tuple[float, float, float, float, float], ...]
    gain: float
    order: int
    low_hz: float
    high_hz: float
    fs: float

    def __post_init__(self):
        for b0, b1, b2, a1, a2 in self.sections:
            if np.any(np.abs(np.roots([1.0, a1, a2])) >= 1.0):
                raise ValueError("unstable section: pole on or outside the unit circle")

    def sos(self) -> np.ndarray:
        """Second-order-section array in scipy layout, gain folded into section 0."""
        out = np.array([[b0, b1, b2, 1.0, a1, a2] for b0, b1, b2, a1, a2 in self.sections])
        out[0, :3] *= self.gain
        return out

    @property
    def digital_order(self) -> int:
        return 2 * len(self.sections)


def design_butterworth_bandpass(order: int, low_hz: float, high_hz: float,
                                fs: float) -> FilterCoefficients:
    """Digital Butterworth band-pass from the analog prototype.

    Band edges are prewarped so that the bilinear transform puts the -3 dB
    points exactly at ``low_hz`` and ``high_hz``.
    """
    if order < 1:
        raise ValueError(f"filter order must be >= 1, got {order}")
    if not 0 < low_hz < high_hz < fs / 2:
        raise ValueError(
            f"band edges must satisfy 0 < low < high < fs/2; got {low_hz}, {high_hz} at fs={fs}")

    fs2 = 2.0 * fs
    w_lo = fs2 * math.tan(math.pi * low_hz / fs)
    w_hi = fs2 * math.tan(math.pi * high_hz / fs)
    bw = w_hi - w_lo
    w0_sq = w_lo * w_hi

    k = np.arange(order)
    proto = np.exp(1j * np.pi * (2 * k + order + 1) / (2 * order))
    # s^2 - p*bw*s + w0^2 = 0 for each prototype pole
    half = proto * bw / 2.0
    disc = np.sqrt(half**2 - w0_sq + 0j)
    analog_poles = np.concatenate([half + disc, half - disc])
    analog_gain = bw**order

    # n zeros at s=0 -> z=+1, n zeros at infinity -> z=-1
    digital_poles = (fs2 + analog_poles) / (fs2 - analog_poles)
    gain = analog_gain * np.real(fs2**order / np.prod(fs2 - analog_poles))

    sections = []
    for a1, a2 in _pair_poles(digital_poles):
        sections.append((1.0, 0.0, -1.0, a1, a2))
    return FilterCoefficients(tuple(sections), float(gain), order,
                              float(low_hz), float(high_hz), float(fs))


def _pair_poles(poles: np.ndarray) -> list[tuple[float, float]]:
    tol = 1e-12
    upper = sorted((p for p in poles if p.imag > tol), key=lambda p: (abs(p), p.real))
    reals = sorted(p.real for p in poles if abs(p.imag) <= tol)
    if len(reals) % 2:
        raise ArithmeticError("odd number of real poles; cannot form biquads")
    pairs = [(-2.0 * p.real, abs(p) ** 2) for p in upper]
    for r1, r2 in zip(reals[::2], reals[1::2]):
        pairs.append((-(r1 + r2), r1 * r2))
    return pairs


def frequency_response(coeffs: FilterCoefficients, freqs_hz) -> np.ndarray:
    """Complex response of the cascade at the given frequencies."""
    z = np.exp(1j * 2 * np.pi * np.asarray(freqs_hz, dtype=float) / coeffs.fs)
    zi = 1.0 / z
    h = np.full(z.shape, coeffs.gain, dtype=complex)
    for b0, b1, b2, a1, a2 in coeffs.sections:
        h *= (b0 + b1 * zi + b2 * zi**2) / (1.0 + a1 * zi + a2 * zi**2)
    return h


def filter_zero_phase(x, coeffs: FilterCoefficients) -> np.ndarray:
    """Forward-backward filtering with mirror (even) padding at both ends.

    The pad spans three periods of the low cut-off, and never less than
    three times the digital filter order. Each pass starts from the
    steady-state section state for its first value.
    """
    x = np.asarray(x, dtype=np.float64)
    min_len = 3 * coeffs.digital_order
    if x.ndim != 1 or x.size <= min_len:
        raise ValueError(f"signal too short for zero-phase filtering: need > {min_len} samples")
    pad = min(x.size - 1, max(min_len, math.ceil(3 * coeffs.fs / coeffs.low_hz)))
    ext = np.concatenate([x[pad:0:-1], x, x[-2:-pad - 2:-1]])

    sos = coeffs.sos()
    zi = sps.sosfilt_zi(sos)
    y, _ = sps.sosfilt(sos, ext, zi=zi * ext[0])
    y = y[::-1]
    y, _ = sps.sosfilt(sos, y, zi=zi * y[0])
    return y[::-1][pad:-pad].copy()


# --- wavelets -------------------------------------------------------------

def _daubechies_lowpass(vanishing_moments: int) -> np.ndarray:
    """Minimum-phase Daubechies scaling filter by spectral factorization."""
    p = vanishing_moments
    # |m0|^2 = cos^{2p}(w/2) * P(sin^2(w/2)), P(y) = sum C(p-1+k, k) y^k
    coeffs_P = [math.comb(p - 1 + k, k) for k in range(p)]
    y_roots = np.roots(coeffs_P[::-1]) if p > 1 else np.array([])
    poly = np.array([1.0 + 0j])
    for y in y_roots:
        # y = (2 - z - 1/z)/4  ->  z^2 - (2 - 4y) z + 1 = 0
        c = 1.0 - 2.0 * y
        cands = np.array([c + np.sqrt(c * c - 1), c - np.sqrt(c * c - 1)])
        z = cands[np.argmin(np.abs(cands))]
        poly = np.convolve(poly, [1.0, -z])
    for _ in range(p):
        poly = np.convolve(poly, [1.0, 1.0])
    h = np.real(poly)
    h = h * (math.sqrt(2.0) / h.sum())
    # Largest taps first, matching the usual reconstruction-filter orientation.
    if abs(h[0]) < abs(h[-1]):
        h = h[::-1]
    return h


def check_wavelet_taps(h: np.ndarray, vanishing_moments: int, tol: float = 1e-12) -> None:
    """Raise if ``h`` is not an orthonormal scaling filter with the given moments."""
    taps = h.size
    if abs(h.sum() - math.sqrt(2.0)) > tol:
        raise ArithmeticError(f"sum(h) = {h.sum()!r}, expected sqrt(2)")
    if abs(np.dot(h, h) - 1.0) > tol:
        raise ArithmeticError(f"sum(h^2) = {np.dot(h, h)!r}, expected 1")
    k = np.arange(taps, dtype=float)
    alt = (-1.0) ** k * h[::-1]
    for power in range(vanishing_moments):
        moment = np.dot(alt, k**power)
        if abs(moment) > tol * max(1.0, taps**power):
            raise ArithmeticError(f"high-pass moment {power} = {moment!r}, expected 0")
    for shift in range(2, taps, 2):
        if abs(np.dot(h[:-shift], h[shift:])) > tol:
            raise ArithmeticError(f"taps not orthogonal to their {shift}-shift")


@dataclass(frozen=True)
class Wavelet:
    name: str
    rec_lo: np.ndarray

    @property
    def taps(self) -> int:
        return self.rec_lo.size

    @property
    def dec_lo(self) -> np.ndarray:
        return self.rec_lo[::-1]

    @property
    def dec_hi(self) -> np.ndarray:
        k = np.arange(self.taps)
        return (-1.0) ** (k + 1) * self.rec_lo


@functools.lru_cache(maxsize=None)
def get_wavelet(name: str) -> Wavelet:
    """Orthogonal Daubechies wavelet ``dbN`` (N vanishing moments, 2N taps)."""
    key = name.lower()
    if not (key.startswith("db") and key[2:].isdigit() and 1 <= int(key[2:]) <= 10):
        raise ValueError(f"unknown wavelet {name!r}; supported: db1..db10")
    p = int(key[2:])
    h = _daubechies_lowpass(p)
    check_wavelet_taps(h, p, tol=1e-12 if p <= 6 else 1e-9)
    h.setflags(write=False)
    return Wavelet(key, h)


@dataclass(frozen=True)
class SubbandSet:
    details: tuple[np.ndarray, ...]  # D1 (finest) .. Dn
    approximation: np.ndarray
    wavelet: str
    levels: int
    mode: str

    def bands(self) -> dict[str, np.ndarray]:
        """Sub-bands keyed ``D1..Dn, An`` in that order."""
        out = {f"D{i + 1}": d for i, d in enumerate(self.details)}
        out[f"A{self.levels}"] = self.approximation
        return out

    def energy(self) -> float:
        return float(sum(np.dot(v, v) for v in self.bands().values()))


MODES = ("periodization", "symmetric")


def dwt_level(x: np.ndarray, wavelet: Wavelet, mode: str) -> tuple[np.ndarray, np.ndarray]:
    """One analysis step: returns (approximation, detail)."""
    lo, hi = wavelet.dec_lo, wavelet.dec_hi
    L = wavelet.taps
    if mode == "periodization":
        if x.size % 2:
            x = np.append(x, x[-1])
        n = x.size
        # a[i] = sum_k lo[k] x[(2i + 1 - k + L/2 - 1) mod n]
        idx = (2 * np.arange(n // 2)[:, None] + L // 2 - np.arange(L)[None, :]) % n
        xs = x[idx]
        return xs @ lo, xs @ hi
    if mode == "symmetric":
        n = x.size
        pad = np.array([_reflect(i, n) for i in range(-(L - 1), n + L - 1)])
        ext = x[pad]
        out_len = (n + L - 1) // 2
        full_lo = np.convolve(ext, lo, mode="valid")
        full_hi = np.convolve(ext, hi, mode="valid")
        return full_lo[1:2 * out_len:2].copy(), full_hi[1:2 * out_len:2].copy()
    raise ValueError(f"unknown extension mode {mode!r}; choose from {MODES}")


def _reflect(i: int, n: int) -> int:
    """Index into ``x`` for half-point symmetric extension (edge sample repeated)."""
    period = 2 * n
    i %= period
    return i if i < n else period - 1 - i


def dwt_decompose(x, wavelet: str = "db4", levels: int = 5,
                  mode: str = "periodization") -> SubbandSet:
    """Multi-level pyramid decomposition into D1..Dn and An.

    With ``mode="periodization"`` the transform is orthogonal, so coefficient
    energy equals signal energy whenever the length is divisible by
    ``2**levels``. ``mode="symmetric"`` uses half-point extension and yields
    ``floor((len + taps - 1) / 2)`` coefficients per level.
    """
    x = np.asarray(x, dtype=np.float64)
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if mode not in MODES:
        raise ValueError(f"unknown extension mode {mode!r}; choose from {MODES}")
    w = get_wavelet(wavelet)
    if x.ndim != 1 or x.size < 2**levels:
        raise ValueError(f"signal too short for {levels} levels: need >= {2**levels} samples")
    details = []
    approx = x
    for _ in range(levels):
        approx, detail = dwt_level(approx, w, mode)
        details.append(detail)
    return SubbandSet(tuple(details), approx, w.name, levels, mode)
