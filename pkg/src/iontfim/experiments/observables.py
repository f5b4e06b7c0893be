"""Order parameters computed from site magnetizations."""
from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid


def neel_pattern(n: int) -> np.ndarray:
    """``s_i = (-1)^i`` for one-based ``i``: site 1 down."""
    return np.array([(-1.0) ** i for i in range(1, n + 1)])


def hamming_distance(magnetizations, pattern) -> np.ndarray:
    """Normalized Hamming distance ``1/2 - (1/2N) sum_i s_i <sigma_i^z>``.

    ``magnetizations`` has sites on the last axis; leading axes (time,
    realization) are kept.
    """
    m = np.asarray(magnetizations, dtype=float)
    s = np.asarray(pattern, dtype=float)
    if m.shape[-1] != s.shape[-1]:
        raise ValueError(f"magnetizations have {m.shape[-1]} sites, pattern has {s.shape[-1]}")
    n = s.shape[-1]
    return 0.5 - (m @ s) / (2 * n)


def position_weights(n: int) -> np.ndarray:
    """``(2i - N - 1) / (N - 1)``: -1 on site 1, +1 on site N."""
    if n < 2:
        raise ValueError("position observable needs at least two sites")
    i = np.arange(1, n + 1)
    return (2 * i - n - 1) / (n - 1)


def position_observable(magnetizations) -> np.ndarray:
    """``C = sum_i w_i (<sigma_i^z> + 1) / 2`` over the last axis."""
    m = np.asarray(magnetizations, dtype=float)
    return (0.5 * (m + 1)) @ position_weights(m.shape[-1])


def cumulative_average(times, values) -> np.ndarray:
    """Running time average ``(1/t) int_0^t f`` by the trapezoid rule; equals ``f(0)`` at ``t = 0``."""
    t = np.asarray(times, dtype=float)
    f = np.asarray(values, dtype=float)
    integral = cumulative_trapezoid(f, t, axis=0, initial=0.0)
    elapsed = (t - t[0]).reshape((-1,) + (1,) * (f.ndim - 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = integral / elapsed
    out[0] = f[0]
    return out


def dft_magnitude(series, axis: int = 0) -> np.ndarray:
    """Magnitude of the unnormalized DFT, rectangular window."""
    return np.abs(np.fft.fft(np.asarray(series, dtype=float), axis=axis))


def sample_shots(magnetizations, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Replace exact ``<sigma>`` values by binomial estimates from ``shots`` projective measurements."""
    if shots < 1:
        raise ValueError(f"shots must be positive, got {shots}")
    m = np.clip(np.asarray(magnetizations, dtype=float), -1.0, 1.0)
    ups = rng.binomial(shots, 0.5 * (1 + m))
    return 2.0 * ups / shots - 1.0
