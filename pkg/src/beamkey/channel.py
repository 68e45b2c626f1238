"""Multipath MIMO channel synthesis and beam-domain statistics.

A narrowband channel between a base station with M antennas and a terminal
with N antennas is a sum of planar propagation paths,

    H = sum_p gain_p * a_rx(aoa_p) a_tx(aod_p)^H        (N x M),

with unit-norm uniform-linear-array steering vectors on both ends.  Projecting
H onto a grid of steering vectors uniformly spaced in the sine of the angle
(the "beam domain") concentrates each path into a few entries; at
half-wavelength spacing the projection matrices are unitary, so the transform
is lossless.  This module synthesizes such channels, performs the beam-domain
transform, and computes the second-order statistics (transmit/receive beam
covariances and the full covariance of the vectorized beam-domain channel)
either in closed form over the path gains or by Monte Carlo.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from ._util import complex_normal, readonly, vec

HALF_PI = np.pi / 2.0

# Unitarity tolerance for beam-domain projection matrices (per entry).
UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing as a fraction of wavelength."""

    antenna_count: int
    spacing_ratio: float = 0.5

    def __post_init__(self) -> None:
        if int(self.antenna_count) != self.antenna_count or self.antenna_count < 1:
            raise ValueError(f"antenna_count must be a positive integer, got {self.antenna_count}")
        if not np.isfinite(self.spacing_ratio) or self.spacing_ratio <= 0:
            raise ValueError(f"spacing_ratio must be positive and finite, got {self.spacing_ratio}")
        object.__setattr__(self, "antenna_count", int(self.antenna_count))


@dataclass(frozen=True)
class PathSet:
    """Multipath parameterization of one link.

    gains   : realized complex path gains, shape (n_paths,)
    aoa     : angles of arrival at the terminal, radians
    aod     : angles of departure at the base station, radians
    powers  : mean path powers E|gain|^2 used for statistics and fresh draws
    """

    gains: np.ndarray
    aoa: np.ndarray
    aod: np.ndarray
    powers: np.ndarray

    def __post_init__(self) -> None:
        gains = np.atleast_1d(np.asarray(self.gains, dtype=complex))
        aoa = np.atleast_1d(np.asarray(self.aoa, dtype=float))
        aod = np.atleast_1d(np.asarray(self.aod, dtype=float))
        powers = np.atleast_1d(np.asarray(self.powers, dtype=float))
        n = gains.shape[0]
        if n < 1:
            raise ValueError("a PathSet needs at least one path")
        if not (aoa.shape == aod.shape == powers.shape == (n,)):
            raise ValueError("gains, aoa, aod and powers must have identical lengths")
        if not np.all(np.isfinite(gains)):
            raise ValueError("path gains must be finite")
        _validate_angles(aoa, "aoa")
        _validate_angles(aod, "aod")
        if not np.all(np.isfinite(powers)) or np.any(powers < 0):
            raise ValueError("path powers must be finite and nonnegative")
        if powers.sum() <= 0:
            raise ValueError("total path power must be positive")
        object.__setattr__(self, "gains", readonly(gains))
        object.__setattr__(self, "aoa", readonly(aoa))
        object.__setattr__(self, "aod", readonly(aod))
        object.__setattr__(self, "powers", readonly(powers))

    @property
    def n_paths(self) -> int:
        return self.gains.shape[0]


def _validate_angles(angles: np.ndarray, name: str) -> None:
    # The lowest grid beam sits exactly at -pi/2, so the left endpoint is
    # admitted; +pi/2 is not (no grid beam reaches it).
    if not np.all(np.isfinite(angles)):
        raise ValueError(f"{name} angles must be finite")
    if np.any(angles < -HALF_PI) or np.any(angles >= HALF_PI):
        raise ValueError(f"{name} angles must lie in [-pi/2, pi/2)")


@dataclass(frozen=True)
class BeamDomainChannel:
    """Beam-domain channel matrix together with the sampling matrices that produced it."""

    matrix: np.ndarray
    a_ut: np.ndarray
    a_bs: np.ndarray
    source: PathSet | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", readonly(np.asarray(self.matrix, dtype=complex)))


@dataclass(frozen=True)
class BeamCovariances:
    """Second-order beam-domain statistics of one link.

    r_bs        : transmit-side covariance, Hermitian PSD (M x M)
    r_ut        : receive-side covariance, Hermitian PSD (N x N)
    lambda_full : covariance of the column-stacked beam-domain channel (MN x MN)
    provenance  : "analytic" or "monte_carlo"
    """

    r_bs: np.ndarray
    r_ut: np.ndarray
    lambda_full: np.ndarray
    provenance: str
    sample_count: int | None = None

    def __post_init__(self) -> None:
        for name in ("r_bs", "r_ut", "lambda_full"):
            mat = np.asarray(getattr(self, name), dtype=complex)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError(f"{name} must be square")
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, readonly(mat))
        if self.lambda_full.shape[0] != self.r_bs.shape[0] * self.r_ut.shape[0]:
            raise ValueError("lambda_full dimension must equal r_bs dim times r_ut dim")
        if self.provenance not in ("analytic", "monte_carlo"):
            raise ValueError(f"unknown provenance {self.provenance!r}")


def steering_vector(geometry: ArrayGeometry, angle: float) -> np.ndarray:
    """Unit-norm array response of a ULA toward `angle` (radians off broadside).

    Entry q is exp(-j*q*psi)/sqrt(n) with psi = 2*pi*(d/lambda)*sin(angle).
    """
    angle = float(angle)
    if not np.isfinite(angle):
        raise ValueError("steering angle must be finite")
    if abs(angle) > HALF_PI:
        raise ValueError("steering angle must lie within [-pi/2, pi/2]")
    n = geometry.antenna_count
    psi = 2.0 * np.pi * geometry.spacing_ratio * np.sin(angle)
    return np.exp(-1j * psi * np.arange(n)) / np.sqrt(n)


def grid_sines(antenna_count: int) -> np.ndarray:
    """Sines of the beam grid angles: sin(angle_m) = 2m/n - 1, m = 0..n-1."""
    n = int(antenna_count)
    if n < 1:
        raise ValueError("antenna_count must be positive")
    return 2.0 * np.arange(n) / n - 1.0


def sampling_matrix(geometry: ArrayGeometry) -> np.ndarray:
    """n x n matrix whose columns are steering vectors on the uniform sine grid.

    At spacing_ratio = 0.5 the columns coincide with a rephased DFT basis and
    the matrix is unitary; for other spacings a non-fatal warning is issued
    and downstream operations that rely on unitarity will reject the result.
    """
    n = geometry.antenna_count
    psi = 2.0 * np.pi * geometry.spacing_ratio * grid_sines(n)
    a = np.exp(-1j * np.outer(np.arange(n), psi)) / np.sqrt(n)
    if geometry.spacing_ratio != 0.5:
        warnings.warn(
            "sampling_matrix is only unitary at spacing_ratio = 0.5; "
            f"got {geometry.spacing_ratio}",
            UserWarning,
            stacklevel=2,
        )
    return a


def sample_paths(
    n_paths: int,
    rng: np.random.Generator,
    grid: tuple[int, int] | None = None,
    power_profile=None,
) -> PathSet:
    """Draw a random PathSet.

    With grid=None the path sines are i.i.d. uniform on (-1, 1) (so paths are
    uniform over the beam grid); with grid=(bs_count, ut_count) the departure
    and arrival angles are drawn without replacement from the two beam grids.
    Gains are circularly symmetric complex Gaussian with per-path variance
    given by `power_profile` (uniform 1/n_paths by default; a custom profile
    must sum to 1).
    """
    n_paths = int(n_paths)
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if power_profile is None:
        powers = np.full(n_paths, 1.0 / n_paths)
    else:
        powers = np.asarray(power_profile, dtype=float)
        if powers.shape != (n_paths,):
            raise ValueError("power_profile length must equal n_paths")
        if np.any(powers < 0) or not np.all(np.isfinite(powers)):
            raise ValueError("power_profile entries must be finite and nonnegative")
        if abs(powers.sum() - 1.0) > 1e-9:
            raise ValueError("custom power_profile must sum to 1")

    if grid is None:
        sin_aod = _open_uniform(rng, n_paths)
        sin_aoa = _open_uniform(rng, n_paths)
        aod = np.arcsin(sin_aod)
        aoa = np.arcsin(sin_aoa)
    else:
        bs_count, ut_count = (int(grid[0]), int(grid[1]))
        if n_paths > min(bs_count, ut_count):
            raise ValueError(
                f"cannot place {n_paths} paths on distinct grid points of "
                f"arrays with {bs_count} and {ut_count} beams"
            )
        aod_idx = rng.choice(bs_count, size=n_paths, replace=False)
        aoa_idx = rng.choice(ut_count, size=n_paths, replace=False)
        aod = np.arcsin(grid_sines(bs_count)[aod_idx])
        aoa = np.arcsin(grid_sines(ut_count)[aoa_idx])

    gains = complex_normal(rng, n_paths, powers)
    return PathSet(gains=gains, aoa=aoa, aod=aod, powers=powers)


def _open_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    # Uniform on the open interval (-1, 1); the endpoints would alias the
    # two array endfire directions onto a single angle.
    x = rng.uniform(-1.0, 1.0, size=size)
    return np.clip(x, np.nextafter(-1.0, 0.0), np.nextafter(1.0, 0.0))


def _steering_columns(geometry: ArrayGeometry, angles: np.ndarray) -> np.ndarray:
    n = geometry.antenna_count
    psi = 2.0 * np.pi * geometry.spacing_ratio * np.sin(np.asarray(angles, dtype=float))
    return np.exp(-1j * np.outer(np.arange(n), psi)) / np.sqrt(n)


def synthesize_channel(paths: PathSet, bs: ArrayGeometry, ut: ArrayGeometry) -> np.ndarray:
    """Channel matrix H = sum_p gain_p a_ut(aoa_p) a_bs(aod_p)^H, shape (N_ut, M_bs)."""
    u = _steering_columns(ut, paths.aoa)
    w = _steering_columns(bs, paths.aod)
    return (u * paths.gains) @ w.conj().T


def to_beam_domain(h: np.ndarray, a_ut: np.ndarray, a_bs: np.ndarray,
                   source: PathSet | None = None) -> BeamDomainChannel:
    """Project a channel matrix onto the beam grids: H_beam = A_ut^H H A_bs.

    Both sampling matrices must be unitary (per-entry tolerance 1e-12), which
    guarantees the Frobenius norm is preserved.
    """
    h = np.asarray(h, dtype=complex)
    a_ut = np.asarray(a_ut, dtype=complex)
    a_bs = np.asarray(a_bs, dtype=complex)
    if h.ndim != 2:
        raise ValueError("channel matrix must be two-dimensional")
    n_ut, m_bs = h.shape
    if a_ut.shape != (n_ut, n_ut) or a_bs.shape != (m_bs, m_bs):
        raise ValueError(
            f"dimension mismatch: H is {h.shape}, A_ut is {a_ut.shape}, A_bs is {a_bs.shape}"
        )
    for name, a in (("a_ut", a_ut), ("a_bs", a_bs)):
        gram_err = np.max(np.abs(a.conj().T @ a - np.eye(a.shape[0])))
        if gram_err > UNITARY_TOL:
            raise ValueError(f"{name} is not unitary (max |A^H A - I| = {gram_err:.3e})")
    hb = a_ut.conj().T @ h @ a_bs
    norm_in = np.linalg.norm(h)
    if abs(np.linalg.norm(hb) - norm_in) > 1e-10 * max(norm_in, 1.0):
        raise ValueError("beam-domain transform failed to preserve the Frobenius norm")
    return BeamDomainChannel(matrix=hb, a_ut=a_ut, a_bs=a_bs, source=source)


def beam_path_factors(paths: PathSet, bs: ArrayGeometry,
                      ut: ArrayGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Per-path beam-domain signatures.

    Returns (u, w) with u[:, p] = A_ut^H a_ut(aoa_p) and w[:, p] = A_bs^H a_bs(aod_p),
    so the beam-domain channel is sum_p gain_p u_p w_p^H.
    """
    a_ut = sampling_matrix(ut)
    a_bs = sampling_matrix(bs)
    u = a_ut.conj().T @ _steering_columns(ut, paths.aoa)
    w = a_bs.conj().T @ _steering_columns(bs, paths.aod)
    return u, w


def beam_covariances(
    paths: PathSet,
    bs: ArrayGeometry,
    ut: ArrayGeometry,
    mode: str = "analytic",
    samples: int | None = None,
    rng: np.random.Generator | None = None,
) -> BeamCovariances:
    """Beam-domain covariances of one link, averaging over the path gains.

    The expectation treats the path angles as fixed and the gains as
    independent zero-mean complex Gaussians with variances `paths.powers`.
    Analytic mode evaluates the expectation in closed form:

        r_bs   = sum_p power_p w_p w_p^H
        r_ut   = sum_p power_p u_p u_p^H
        lambda = sum_p power_p (w_p^* kron u_p)(w_p^* kron u_p)^H

    Monte Carlo mode averages the corresponding outer products over `samples`
    fresh gain draws (chunked internally; the result depends only on the seed).
    """
    if bs.spacing_ratio != 0.5 or ut.spacing_ratio != 0.5:
        raise ValueError("beam covariances require unitary grids (spacing_ratio = 0.5)")
    u, w = beam_path_factors(paths, bs, ut)
    n_ut, m_bs = u.shape[0], w.shape[0]
    powers = paths.powers
    # Column p is w_p^* kron u_p, matching column-major vectorization.
    vmat = (w.conj()[:, None, :] * u[None, :, :]).reshape(m_bs * n_ut, paths.n_paths)

    if mode == "analytic":
        r_bs = _hermitize((w * powers) @ w.conj().T)
        r_ut = _hermitize((u * powers) @ u.conj().T)
        lam = _hermitize((vmat * powers) @ vmat.conj().T)
        return BeamCovariances(r_bs=r_bs, r_ut=r_ut, lambda_full=lam, provenance="analytic")

    if mode == "monte_carlo":
        if samples is None or int(samples) < 1:
            raise ValueError("monte_carlo mode needs samples >= 1")
        if rng is None:
            raise ValueError("monte_carlo mode needs an explicit rng")
        samples = int(samples)
        gains = complex_normal(rng, (samples, paths.n_paths), powers)
        lam = np.zeros((m_bs * n_ut,) * 2, dtype=complex)
        r_bs = np.zeros((m_bs, m_bs), dtype=complex)
        r_ut = np.zeros((n_ut, n_ut), dtype=complex)
        for start in range(0, samples, 4096):
            chunk = gains[start:start + 4096]
            b = vmat @ chunk.T                      # columns are vec(H_beam) draws
            lam += b @ b.conj().T
            hb = b.T.reshape(chunk.shape[0], m_bs, n_ut).transpose(0, 2, 1)
            r_ut += np.einsum("snm,spm->np", hb, hb.conj())
            r_bs += np.einsum("snm,snp->mp", hb.conj(), hb)
        return BeamCovariances(
            r_bs=_hermitize(r_bs / samples),
            r_ut=_hermitize(r_ut / samples),
            lambda_full=_hermitize(lam / samples),
            provenance="monte_carlo",
            sample_count=samples,
        )

    raise ValueError(f"unknown covariance mode {mode!r}")


def _hermitize(mat: np.ndarray) -> np.ndarray:
    return (mat + mat.conj().T) / 2.0


def pathset_to_json(paths: PathSet) -> str:
    """Serialize a PathSet (gains as [re, im] pairs, angles in radians)."""
    doc = {
        "gains": [[float(g.real), float(g.imag)] for g in paths.gains],
        "aoa_rad": [float(a) for a in paths.aoa],
        "aod_rad": [float(a) for a in paths.aod],
        "powers": [float(p) for p in paths.powers],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def pathset_from_json(text: str) -> PathSet:
    doc = json.loads(text)
    gains = np.array([complex(re, im) for re, im in doc["gains"]])
    return PathSet(
        gains=gains,
        aoa=np.array(doc["aoa_rad"], dtype=float),
        aod=np.array(doc["aod_rad"], dtype=float),
        powers=np.array(doc["powers"], dtype=float),
    )


__all__ = [
    "ArrayGeometry",
    "BeamCovariances",
    "BeamDomainChannel",
    "PathSet",
    "beam_covariances",
    "beam_path_factors",
    "grid_sines",
    "pathset_from_json",
    "pathset_to_json",
    "sample_paths",
    "sampling_matrix",
    "steering_vector",
    "synthesize_channel",
    "to_beam_domain",
    "vec",
]
