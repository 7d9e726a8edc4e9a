"""Shared linear-algebra helpers for Hermitian covariance work.

Covariance matrices, training sets and steering vectors are plain complex
numpy arrays throughout the package. Only eigen-decompositions get a small
container, because their ordering and phase conventions matter downstream.
"""

from dataclasses import dataclass

import numpy as np

ATOL = 1e-10
RTOL = 1e-8

# modulus below which an eigenvector entry is ignored by the phase convention
_PHASE_FLOOR = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    """Eigen-decomposition of a Hermitian matrix.

    Attributes
    ----------
    vectors : ndarray, shape (N, N)
        Unitary matrix whose columns are eigenvectors. In every column the
        first entry with modulus above 1e-12 is real and positive.
    values : ndarray, shape (N,)
        Real eigenvalues sorted in descending order.
    """

    vectors: np.ndarray
    values: np.ndarray

    @property
    def dim(self):
        return self.values.shape[0]

    def reconstruct(self, values=None):
        """Rebuild ``V diag(values) V^H`` (defaults to the stored values)."""
        return reconstruct(self.vectors, self.values if values is None else values)


def close(a, b, atol=ATOL, rtol=RTOL):
    """Elementwise ``|a - b| <= atol + rtol * |b|``."""
    return np.all(np.abs(np.asarray(a) - np.asarray(b)) <= atol + rtol * np.abs(b))


def as_samples(z):
    """Return the N x K complex sample matrix held by ``z``.

    A 1-D input is read as a single snapshot.
    """
    z = np.asarray(getattr(z, "samples", z))
    if z.ndim == 1:
        z = z[:, None]
    if z.ndim != 2:
        raise ValueError(f"training set must be 2-D (N x K), got shape {z.shape}")
    return z.astype(complex, copy=False)


def sample_covariance(z):
    """Sample covariance ``Z Z^H / K`` of an N x K training matrix.

    Parameters
    ----------
    z : array_like, shape (N, K)
        Training snapshots stored column-wise.

    Returns
    -------
    ndarray, shape (N, N)
        Hermitian positive semi-definite estimate.
    """
    z = as_samples(z)
    k = z.shape[1]
    if k == 0 or z.shape[0] == 0:
        raise ValueError("empty training set")
    s = z @ z.conj().T / k
    return 0.5 * (s + s.conj().T)


def hermitian_error(m):
    """Largest entry of ``|M - M^H|``."""
    m = np.asarray(m)
    return float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0


def check_hermitian(m, tol=1e-8):
    """Validate squareness and Hermitian symmetry, returning a complex copy."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    err = hermitian_error(m)
    if err > tol * scale:
        raise ValueError(f"matrix is not Hermitian (asymmetry {err:.3g})")
    return m


def _fix_phase(v):
    # make the first significant entry of each column real positive
    mask = np.abs(v) > _PHASE_FLOOR
    idx = np.argmax(mask, axis=0)
    lead = v[idx, np.arange(v.shape[1])]
    mag = np.abs(lead)
    rot = np.where(mag > 0, lead.conj() / np.where(mag > 0, mag, 1.0), 1.0)
    return v * rot


def eig_hermitian(m):
    """Eigen-decomposition with descending eigenvalues and fixed phases.

    Parameters
    ----------
    m : array_like, shape (N, N)
        Hermitian matrix. Asymmetry above 1e-8 (relative to the largest
        entry) raises ``ValueError``.

    Returns
    -------
    EigenSystem
    """
    m = check_hermitian(m)
    d, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    d = d[::-1].copy()
    v = _fix_phase(v[:, ::-1])
    return EigenSystem(vectors=v, values=d)


def spectrum(m):
    """Accept either an ``EigenSystem`` or a Hermitian matrix."""
    return m if isinstance(m, EigenSystem) else eig_hermitian(m)


def reconstruct(v, d):
    """Hermitian-symmetrized ``V diag(d) V^H``."""
    v = np.asarray(v)
    d = np.asarray(d, dtype=float)
    if v.ndim != 2 or v.shape[1] != d.shape[0]:
        raise ValueError(f"dimension mismatch: vectors {v.shape}, values {d.shape}")
    m = (v * d) @ v.conj().T
    return 0.5 * (m + m.conj().T)


def _diagonal_index(n):
    rows, cols = np.indices((n, n))
    return (cols - rows + n - 1).ravel()


def _diagonal_means(m):
    n = m.shape[0]
    idx = _diagonal_index(n)
    flat = m.ravel()
    # average offsets from each diagonal's first entry so constant
    # diagonals reproduce their value exactly
    first = np.concatenate([m[:0:-1, 0], m[0, :]])
    off = flat - first[idx]
    counts = np.bincount(idx, minlength=2 * n - 1)
    means = np.bincount(idx, weights=off.real, minlength=2 * n - 1) / counts
    if np.iscomplexobj(m):
        means = means + 1j * np.bincount(idx, weights=off.imag, minlength=2 * n - 1) / counts
    return idx, first + means


def toeplitz_deviation(m):
    """Largest distance of any entry from the mean of its diagonal.

    Zero exactly when ``m`` is Toeplitz. All 2N - 1 diagonals are scanned,
    which for Hermitian input is the same as scanning offsets 0..N-1.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] == 0:
        return 0.0
    idx, means = _diagonal_means(m)
    return float(np.max(np.abs(m.ravel() - means[idx])))


def toeplitz_average(m):
    """Replace every diagonal of ``m`` by its mean."""
    m = np.asarray(m)
    idx, means = _diagonal_means(m)
    return means[idx].reshape(m.shape)


def complex_gaussian(rng, shape):
    """Circular complex normal entries with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def trial_rng(seed, *keys):
    """Generator for the stream ``SeedSequence([seed, *keys])``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(k) for k in keys]))


def psd_sqrt(m):
    """Hermitian square root with negative eigenvalues floored at zero."""
    es = eig_hermitian(m)
    return reconstruct(es.vectors, np.sqrt(np.maximum(es.values, 0.0)))


def steering_vector(azimuth, doppler=0.0, prf=1.0, channels=1, pulses=1,
                    spacing_over_wavelength=0.5):
    """Space-time steering vector ``s_t (x) s_s``.

    Parameters
    ----------
    azimuth : float
        Look angle in radians.
    doppler : float
        Target Doppler frequency in Hz.
    prf : float
        Pulse repetition frequency in Hz.
    channels, pulses : int
        Number of array elements and of pulses.
    spacing_over_wavelength : float
        Element spacing divided by wavelength.

    Returns
    -------
    ndarray, shape (channels * pulses,)
        Unit-modulus entries; the spatial index runs fastest.
    """
    if channels < 1 or pulses < 1:
        raise ValueError("channels and pulses must be positive")
    if prf <= 0:
        raise ValueError("prf must be positive")
    spatial = np.exp(2j * np.pi * spacing_over_wavelength * np.sin(azimuth)
                     * np.arange(channels))
    temporal = np.exp(2j * np.pi * (doppler / prf) * np.arange(pulses))
    return np.kron(temporal, spatial)


def steering_matrix(azimuths, doppler=0.0, prf=1.0, channels=1, pulses=1,
                    spacing_over_wavelength=0.5):
    """Stack steering vectors for several azimuths as columns."""
    return np.stack([steering_vector(a, doppler, prf, channels, pulses,
                                     spacing_over_wavelength)
                     for a in np.atleast_1d(azimuths)], axis=1)
