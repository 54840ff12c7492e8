"""AWGN corruption of complex latent vectors and empirical SNR measurement.

The signal power in the noise-variance formula is the empirical mean
per-symbol power ``||h||^2 / S`` of the vector being sent; there is no trained
encoder to take an ensemble expectation over.
"""

from __future__ import annotations

import numpy as np

NOISELESS_SNR_DB = 200.0


def _as_latent(h) -> np.ndarray:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 1 or h.size == 0:
        raise ValueError("latent vector must be one-dimensional with at least one symbol")
    if not np.all(np.isfinite(h)):
        raise ValueError("latent vector must be finite")
    return h


def symbol_power(h) -> float:
    h = _as_latent(h)
    return float(np.vdot(h, h).real / h.size)


def noise_variance(h, snr_db: float) -> float:
    """Per-symbol complex noise variance for the requested SNR."""
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    power = symbol_power(h)
    if power == 0.0:
        raise ValueError("zero-power latent vector: SNR is undefined")
    return power / 10.0 ** (snr_db / 10.0)


def normalize_power(h) -> np.ndarray:
    """Scale ``h`` to unit average symbol power."""
    h = _as_latent(h)
    power = symbol_power(h)
    if power == 0.0:
        raise ValueError("cannot normalise a zero-power latent vector")
    return h / np.sqrt(power)


def random_latent(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-power circularly-symmetric Gaussian latent of ``dim`` complex symbols."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    return (rng.standard_normal(dim) + 1j * rng.standard_normal(dim)) / np.sqrt(2.0)


def transmit(h, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Return ``h + z`` with ``z ~ CN(0, sigma^2)``: real and imaginary parts each ``sigma^2 / 2``."""
    h = _as_latent(h)
    sigma2 = noise_variance(h, snr_db)
    if snr_db >= NOISELESS_SNR_DB:
        return h.copy()
    scale = np.sqrt(sigma2 / 2.0)
    z = scale * (rng.standard_normal(h.size) + 1j * rng.standard_normal(h.size))
    return h + z


def measure_snr(h, y) -> float:
    """Empirical SNR in dB: ``10 log10(||h||^2 / ||y - h||^2)``."""
    h = _as_latent(h)
    y = _as_latent(y)
    if h.shape != y.shape:
        raise ValueError(f"dimension mismatch: {h.shape} vs {y.shape}")
    noise = y - h
    noise_energy = float(np.vdot(noise, noise).real)
    if noise_energy == 0.0:
        raise ValueError("received vector equals the sent one: no noise to measure")
    return 10.0 * np.log10(float(np.vdot(h, h).real) / noise_energy)


def simulate(dim: int, snr_db: float, trials: int, seed: int,
             normalize: bool = False) -> dict[str, float | int]:
    """Monte-Carlo summary of target vs measured SNR over ``trials`` transmissions.

    Trial ``t`` uses a stream derived from ``(seed, t)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    measured = np.empty(trials)
    sigma2 = np.empty(trials)
    re_var = np.empty(trials)
    im_var = np.empty(trials)
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        h = random_latent(dim, rng)
        if normalize:
            h = normalize_power(h)
        y = transmit(h, snr_db, rng)
        z = y - h
        sigma2[t] = noise_variance(h, snr_db)
        measured[t] = measure_snr(h, y) if snr_db < NOISELESS_SNR_DB else float("inf")
        re_var[t] = float(np.var(z.real))
        im_var[t] = float(np.var(z.imag))
    return {"dim": dim, "trials": trials, "seed": seed,
            "target_snr_db": float(snr_db),
            "measured_snr_db_mean": float(measured.mean()),
            "measured_snr_db_std": float(measured.std()),
            "noise_variance_mean": float(sigma2.mean()),
            "noise_real_variance_mean": float(re_var.mean()),
            "noise_imag_variance_mean": float(im_var.mean())}
