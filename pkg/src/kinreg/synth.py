"""Synthetic fields with known smoothness, used to calibrate the estimators."""
import numpy as np


def fgn_autocovariance(n, hurst):
    k = np.arange(n + 1, dtype=float)
    return 0.5 * (np.abs(k + 1) ** (2 * hurst) - 2 * k ** (2 * hurst) + np.abs(k - 1) ** (2 * hurst))


def fbm_path(n, hurst, seed=0, rng=None):
    """Fractional Brownian motion at t = 0, 1/n, ..., 1 (n + 1 samples).

    Exact Davies-Harte circulant embedding of fractional Gaussian noise.
    """
    rng = np.random.default_rng(seed) if rng is None else rng
    gamma = fgn_autocovariance(n, hurst)
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        raise ValueError("circulant embedding is not nonnegative definite")
    eig = np.clip(eig, 0.0, None)
    m = row.size
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    fgn = np.fft.fft(np.sqrt(eig / m) * z)[:n].real
    return np.concatenate([[0.0], np.cumsum(fgn)]) * float(n) ** (-hurst)


def cusp_field(n):
    """|x|^(1/2) (1 - x^2)^2 on the periodic grid x = -1 + 2k/n; Fourier decay |k|^(-3/2)."""
    x = -1.0 + 2.0 * np.arange(n) / n
    return np.sqrt(np.abs(x)) * (1.0 - x * x) ** 2
