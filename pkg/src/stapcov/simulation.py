"""Ground-truth covariances and training data.

Two truth families are provided: the wideband-jammer array model (Hermitian
Toeplitz by construction) and a low-rank clutter model built on a random
orthonormal basis. Named presets cover the standard experiment setups.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .core import as_samples, complex_gaussian, psd_sqrt


@dataclass(frozen=True)
class Jammer:
    power_db: float
    phase_deg: float
    fractional_bandwidth: float = 0.0


@dataclass(frozen=True)
class JammerScenario:
    """Uniform linear array with J wideband jammers in white noise.

    Attributes
    ----------
    dim : int
        Number of array elements N.
    jammers : tuple of Jammer
    noise_power : float
        Linear white-noise power sigma_a^2.
    label : str
    rank : int or None
        Clutter rank to hand to rank-aware estimators.
    """

    dim: int
    jammers: tuple = ()
    noise_power: float = 1.0
    label: str = "jammer"
    rank: int = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be positive")
        for j in self.jammers:
            if not 0 <= j.fractional_bandwidth < 1:
                raise ValueError(f"fractional bandwidth must lie in [0, 1): {j}")
            if not np.isfinite(j.power_db):
                raise ValueError(f"jammer power must be finite: {j}")


@dataclass(frozen=True)
class SyntheticClutterScenario:
    """``sigma^2 I + V_r diag(p) V_r^H`` with a seeded random basis."""

    dim: int
    clutter_eigenvalues: tuple = ()
    noise_power: float = 1.0
    seed: int = 0
    label: str = "lowrank"
    channels: int = None
    pulses: int = None
    prf: float = None

    def __post_init__(self):
        if len(self.clutter_eigenvalues) > self.dim:
            raise ValueError("clutter rank exceeds dimension")
        if any(p <= 0 for p in self.clutter_eigenvalues):
            raise ValueError("clutter eigenvalues must be positive")

    @property
    def clutter_rank(self):
        return len(self.clutter_eigenvalues)

    @property
    def rank(self):
        return self.clutter_rank


def jammer_covariance(sc):
    """Jammer-plus-noise covariance.

    ``R(n, m) = sum_i p_i sinc(0.5 beta_i (n - m) phi_i) exp(j (n - m) phi_i)
    + sigma_a^2 delta(n - m)`` with the unnormalized ``sinc(x) = sin(x)/x``,
    ``phi_i`` in radians and ``p_i = 10^(dB/10)``.
    """
    lag = np.arange(sc.dim, dtype=float)
    col = np.zeros(sc.dim, dtype=complex)
    col[0] = sc.noise_power
    for j in sc.jammers:
        phi = np.deg2rad(j.phase_deg)
        x = 0.5 * j.fractional_bandwidth * lag * phi
        # numpy's sinc is normalized: sinc(t) = sin(pi t)/(pi t)
        col = col + 10.0 ** (j.power_db / 10.0) * np.sinc(x / np.pi) * np.exp(1j * lag * phi)
    col[0] = col[0].real
    # one value per lag makes the output exactly Hermitian Toeplitz
    return scipy.linalg.toeplitz(col)


def random_unitary(dim, seed):
    """Unitary matrix from the QR of a seeded complex Gaussian matrix."""
    rng = np.random.default_rng(seed)
    q, tri = np.linalg.qr(complex_gaussian(rng, (dim, dim)))
    ph = np.diag(tri) / np.abs(np.diag(tri))
    return q * ph


def synthetic_lowrank_covariance(sc):
    """Low-rank clutter plus white noise with exactly ``r`` clutter eigenvalues."""
    p = np.asarray(sc.clutter_eigenvalues, dtype=float)
    r = sc.noise_power * np.eye(sc.dim, dtype=complex)
    if p.size:
        v = random_unitary(sc.dim, sc.seed)[:, :p.size]
        r = r + (v * p) @ v.conj().T
    return 0.5 * (r + r.conj().T)


def truth_covariance(sc):
    """Dispatch on the scenario type."""
    if isinstance(sc, JammerScenario):
        return jammer_covariance(sc)
    if isinstance(sc, SyntheticClutterScenario):
        return synthetic_lowrank_covariance(sc)
    raise TypeError(f"unknown scenario type {type(sc).__name__}")


def sample_training(truth, count, seed, root=None):
    """Draw ``count`` snapshots ``R^{1/2} g`` with ``g`` standard complex normal.

    Parameters
    ----------
    truth : ndarray, shape (N, N)
        PSD covariance (negative eigenvalues are floored at zero).
    count : int
    seed : int or numpy.random.Generator
    root : ndarray, optional
        Precomputed square root of ``truth``.

    Returns
    -------
    ndarray, shape (N, count)
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    root = psd_sqrt(truth) if root is None else root
    return root @ complex_gaussian(rng, (root.shape[0], int(count)))


def inject_targets(z, s, amplitude, fraction, seed):
    """Add ``amplitude * s`` to ``floor(fraction * K)`` randomly chosen snapshots.

    Returns a new array plus the indices that were corrupted.
    """
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must lie in [0, 1]")
    z = as_samples(z).copy()
    k = z.shape[1]
    count = int(np.floor(fraction * k))
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.permutation(k)[:count])
    z[:, idx] += amplitude * np.asarray(s)[:, None]
    return z, idx


def _jam(*rows):
    return tuple(Jammer(p, f, b) for p, f, b in rows)


PRESETS = {
    "fig-sinr-model": JammerScenario(
        dim=20, jammers=_jam((10, 20, 0.2), (20, 40, 0.0), (30, 60, 0.3)),
        noise_power=1.0, label="fig-sinr-model", rank=7),
    "cn-a": JammerScenario(dim=20, jammers=_jam((30, 20, 0.0)), label="cn-a", rank=1),
    "cn-b": JammerScenario(dim=20, jammers=_jam((30, 20, 0.3)), label="cn-b", rank=3),
    "cn-c": JammerScenario(dim=20, jammers=_jam((30, 20, 0.0), (30, 40, 0.0), (30, 60, 0.0)),
                           label="cn-c", rank=3),
    "cn-d": JammerScenario(dim=20, jammers=_jam((30, 20, 0.3), (30, 40, 0.3), (30, 60, 0.3)),
                           label="cn-d", rank=7),
    "cn-e": JammerScenario(dim=20, jammers=_jam((10, 20, 0.2), (20, 40, 0.0), (30, 60, 0.3)),
                           label="cn-e", rank=7),
    "lowrank-el": SyntheticClutterScenario(
        dim=20, clutter_eigenvalues=(100.0, 50.0, 30.0, 20.0, 10.0), noise_power=1.0,
        seed=0, label="lowrank-el"),
    # 11 channels x 32 pulses, clutter rank J + P - 1 = 42, 40 dB peak clutter
    "kassper-dim": SyntheticClutterScenario(
        dim=352, clutter_eigenvalues=tuple(np.geomspace(1e4, 10.0, 42)), noise_power=1.0,
        seed=0, label="kassper-dim", channels=11, pulses=32, prf=1984.0),
}


def get_preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown scenario preset {name!r}; known: {sorted(PRESETS)}") from None


def scenario_from_dict(data):
    """Build a scenario from a preset name or an inline mapping."""
    if isinstance(data, str):
        return get_preset(data)
    data = dict(data)
    if "preset" in data:
        return get_preset(data["preset"])
    kind = data.pop("kind", "jammer")
    if kind == "jammer":
        jammers = tuple(Jammer(float(j["power_db"]), float(j["phase_deg"]),
                               float(j.get("fractional_bandwidth", 0.0)))
                        for j in data.pop("jammers", []))
        return JammerScenario(dim=int(data["dim"]), jammers=jammers,
                              noise_power=float(data.get("noise_power", 1.0)),
                              label=str(data.get("label", "custom")),
                              rank=data.get("rank"))
    if kind == "lowrank":
        return SyntheticClutterScenario(
            dim=int(data["dim"]),
            clutter_eigenvalues=tuple(float(p) for p in data["clutter_eigenvalues"]),
            noise_power=float(data.get("noise_power", 1.0)), seed=int(data.get("seed", 0)),
            label=str(data.get("label", "custom")))
    raise ValueError(f"unknown scenario kind {kind!r}")
