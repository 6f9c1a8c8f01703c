"""Zero-mean Gaussian states and the passive/lossy maps acting on them.

Quadratures are ordered ``xxpp`` (all positions first, then all momenta) with
hbar = 1, so the vacuum covariance matrix is the identity.

States store the *excess* covariance ``cov - I`` rather than ``cov`` itself.
Every map used here (beamsplitters, phases, pure loss) acts linearly on the
excess, and vacuum probabilities only need ``det(I + excess / 2)``. Keeping the
excess avoids rounding ``1 + 2e-9`` style diagonals, which matters because the
heralded click probabilities of interest can be as small as 1e-16.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
PHYSICAL_TOL = 1e-9


@dataclass(frozen=True)
class GaussianState:
    """Zero-mean (in practice) multimode Gaussian state.

    Attributes
    ----------
    excess : ndarray, shape (2n, 2n)
        ``cov - I`` in xxpp ordering.
    mean : ndarray, shape (2n,)
        Quadrature displacements.
    """

    excess: np.ndarray
    mean: np.ndarray

    def __post_init__(self):
        excess = np.asarray(self.excess, dtype=float)
        mean = np.asarray(self.mean, dtype=float)
        if excess.ndim != 2 or excess.shape[0] != excess.shape[1] or excess.shape[0] % 2:
            raise ValueError(f"excess covariance must be 2n x 2n, got {excess.shape}")
        if mean.shape != (excess.shape[0],):
            raise ValueError("mean vector length does not match covariance")
        excess.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "excess", excess)
        object.__setattr__(self, "mean", mean)

    @classmethod
    def from_cov(cls, cov, mean=None) -> "GaussianState":
        cov = np.asarray(cov, dtype=float)
        if mean is None:
            mean = np.zeros(cov.shape[0])
        return cls(cov - np.eye(cov.shape[0]), mean)

    @property
    def n_channels(self) -> int:
        return self.excess.shape[0] // 2

    @property
    def cov(self) -> np.ndarray:
        return self.excess + np.eye(self.excess.shape[0])

    def quadrature_indices(self, channels: Sequence[int]) -> np.ndarray:
        channels = _check_channels(self.n_channels, channels)
        return np.concatenate([channels, channels + self.n_channels])


def _check_channels(n: int, channels) -> np.ndarray:
    idx = np.asarray(list(channels), dtype=int)
    if idx.size == 0:
        raise ValueError("channel subset must be non-empty")
    if np.any(idx < 0) or np.any(idx >= n):
        raise IndexError(f"channel index out of range for {n} channels: {idx.tolist()}")
    if len(set(idx.tolist())) != idx.size:
        raise ValueError(f"repeated channel index in {idx.tolist()}")
    return idx


def _check_index(state: GaussianState, i: int) -> None:
    if not 0 <= i < state.n_channels:
        raise IndexError(f"channel {i} out of range for {state.n_channels} channels")


def symplectic_form(n: int) -> np.ndarray:
    """Standard symplectic form ``[[0, I], [-I, 0]]`` for xxpp ordering."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def vacuum_state(n_channels: int) -> GaussianState:
    if n_channels < 1:
        raise ValueError("need at least one channel")
    return GaussianState(np.zeros((2 * n_channels, 2 * n_channels)), np.zeros(2 * n_channels))


def is_vacuum(state: GaussianState, channels, tol: float = 0.0) -> bool:
    """True if the channels are in vacuum and uncorrelated with everything else."""
    q = state.quadrature_indices(channels)
    rows = state.excess[q, :]
    return bool(np.all(np.abs(rows) <= tol) and np.all(np.abs(state.mean[q]) <= tol))


def apply_tmsv(state: GaussianState, i: int, j: int, mu: float) -> GaussianState:
    """Load a two-mode squeezed vacuum with ``mu`` photons per arm onto vacuum channels i, j."""
    _check_index(state, i)
    _check_index(state, j)
    if i == j:
        raise ValueError("TMSV needs two distinct channels")
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    if not is_vacuum(state, [i, j]):
        raise ValueError(f"channels {i}, {j} are not in vacuum")
    if mu == 0:
        return state
    n = state.n_channels
    diag = 2.0 * mu
    corr = 2.0 * np.sqrt(mu * (mu + 1.0))
    excess = state.excess.copy()
    for a in (i, j):
        excess[a, a] = diag
        excess[n + a, n + a] = diag
    excess[i, j] = excess[j, i] = corr
    excess[n + i, n + j] = excess[n + j, n + i] = -corr
    return GaussianState(excess, state.mean)


def beamsplitter_symplectic(n: int, i: int, j: int, t: float) -> np.ndarray:
    """Symplectic matrix of a beamsplitter with transmittivity t between channels i and j."""
    return rotation_symplectic(n, i, j, float(np.arccos(np.sqrt(t))))


def rotation_symplectic(n: int, i: int, j: int, theta: float) -> np.ndarray:
    """Beamsplitter with signed amplitudes: ``sqrt(t) -> cos(theta)``, ``sqrt(1-t) -> sin(theta)``."""
    s = np.eye(2 * n)
    ct, st = np.cos(theta), np.sin(theta)
    for off in (0, n):
        a, b = i + off, j + off
        s[a, a] = ct
        s[a, b] = st
        s[b, a] = -st
        s[b, b] = ct
    return s


def phase_symplectic(n: int, i: int, phi: float) -> np.ndarray:
    s = np.eye(2 * n)
    c, sn = np.cos(phi), np.sin(phi)
    s[i, i] = c
    s[i, n + i] = sn
    s[n + i, i] = -sn
    s[n + i, n + i] = c
    return s


def apply_symplectic(state: GaussianState, s: np.ndarray) -> GaussianState:
    """``cov -> S^T cov S`` and ``d -> S^T d``; the excess transforms the same way for orthogonal S."""
    return GaussianState(s.T @ state.excess @ s, s.T @ state.mean)


def apply_beamsplitter(state: GaussianState, i: int, j: int, t: float) -> GaussianState:
    _check_index(state, i)
    _check_index(state, j)
    if i == j:
        raise ValueError("beamsplitter needs two distinct channels")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmittivity must lie in [0, 1], got {t}")
    if t == 1.0:
        return state
    return apply_symplectic(state, beamsplitter_symplectic(state.n_channels, i, j, t))


def apply_rotation(state: GaussianState, i: int, j: int, theta: float) -> GaussianState:
    """Mode rotation by angle theta (a polarizer rotated by theta when i, j are H and V)."""
    _check_index(state, i)
    _check_index(state, j)
    if i == j:
        raise ValueError("rotation needs two distinct channels")
    return apply_symplectic(state, rotation_symplectic(state.n_channels, i, j, theta))


def apply_phase(state: GaussianState, i: int, phi: float) -> GaussianState:
    _check_index(state, i)
    return apply_symplectic(state, phase_symplectic(state.n_channels, i, phi))


def apply_loss(state: GaussianState, i: int, eta: float) -> GaussianState:
    """Pure-loss channel of efficiency eta on channel i: ``cov -> eta cov + (1 - eta) I`` there."""
    _check_index(state, i)
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    if eta == 1.0:
        return state
    n = state.n_channels
    scale = np.ones(2 * n)
    scale[[i, n + i]] = np.sqrt(eta)
    excess = state.excess * scale[:, None] * scale[None, :]
    return GaussianState(excess, state.mean * scale)


def reduce(state: GaussianState, channels: Sequence[int]) -> GaussianState:
    """Reduced state on ``channels`` (in the order given)."""
    q = state.quadrature_indices(channels)
    return GaussianState(state.excess[np.ix_(q, q)], state.mean[q])


def logdet_eye_plus(excess: np.ndarray) -> np.ndarray:
    """``log det(I + E)`` for a stack of symmetric positive-definite ``I + E``.

    Gaussian elimination is carried out on E itself so each pivot is held as
    ``pivot - 1`` and accumulated with ``log1p``; this keeps full relative
    precision when E is tiny. No pivoting: ``I + E`` is positive definite for
    every physical input, so the natural order is stable. Arithmetic runs in
    extended precision.

    Parameters
    ----------
    excess : array_like, shape (..., m, m)

    Returns
    -------
    ndarray of longdouble, shape (...)
    """
    e = np.array(excess, dtype=np.longdouble)
    batch_shape = e.shape[:-2]
    m = e.shape[-1]
    e = e.reshape((-1, m, m))
    out = np.zeros(e.shape[0], dtype=np.longdouble)
    for k in range(m):
        d = e[:, k, k]
        if np.any(d <= -1):
            raise FloatingPointError("I + E is not positive definite")
        out += np.log1p(d)
        if k + 1 < m:
            col = e[:, k + 1:, k] / (1 + d)[:, None]
            e[:, k + 1:, k + 1:] -= col[:, :, None] * e[:, None, k, k + 1:]
    return out.reshape(batch_shape)


def log_vacuum_probability(state: GaussianState, channels: Sequence[int]) -> float:
    q = state.quadrature_indices(channels)
    return float(-0.5 * logdet_eye_plus(0.5 * state.excess[np.ix_(q, q)]))


def vacuum_probability(state: GaussianState, channels: Sequence[int]) -> float:
    """Probability that every listed channel is empty, ``2^k / sqrt(det(cov_sub + I))``."""
    return float(np.exp(log_vacuum_probability(state, channels)))


def uncertainty_eigenvalues(state: GaussianState) -> np.ndarray:
    """Eigenvalues of the Hermitian matrix ``cov + i Omega``; all >= 0 for a physical state."""
    omega = symplectic_form(state.n_channels)
    return np.linalg.eigvalsh(state.cov + 1j * omega)


def check_physical(state: GaussianState, tol: float = PHYSICAL_TOL) -> None:
    """Raise ``ValueError`` if the covariance is asymmetric or violates the uncertainty relation."""
    if not np.allclose(state.excess, state.excess.T, rtol=0, atol=SYMMETRY_TOL):
        raise ValueError("covariance matrix is not symmetric")
    low = uncertainty_eigenvalues(state).min()
    if low < -tol:
        raise ValueError(f"cov + i*Omega has eigenvalue {low:.3e} < 0")
