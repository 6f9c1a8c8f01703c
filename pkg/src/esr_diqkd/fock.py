"""Truncated Fock-space oracle for the direct and ESR layouts.

This is a brute-force cross-check of the Gaussian engine, written without any
use of covariance matrices. Two-mode rotations (polarizers and beamsplitters)
conserve total photon number, so they are built block by block from
``U a_j^dag U^dag = sum_k M_kj a_k^dag``, with ``M = [[c, -s], [s, c]]`` the
Heisenberg action ``a_i -> c a_i - s a_j``, ``a_j -> s a_i + c a_j``.

Losses immediately in front of detectors are folded into the on-off POVM,
``P(no click | n photons) = (1 - nu) (1 - eta)^n``. The fibre loss of the
relay input is applied to the density matrix with binomial Kraus operators.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

N_MAX = 6
OVERFLOW_TOL = 1e-6


class TruncationError(ArithmeticError):
    """Too much population sits at the truncation edge for the result to be trusted."""


@dataclass(frozen=True)
class FockState:
    """Pure state as a complex tensor with one axis per mode, photon numbers 0..n_max."""

    amplitudes: np.ndarray
    n_max: int = N_MAX

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if any(d != self.n_max + 1 for d in amp.shape):
            raise ValueError(f"every axis must have length n_max + 1 = {self.n_max + 1}")
        object.__setattr__(self, "amplitudes", amp)

    @property
    def n_modes(self) -> int:
        return self.amplitudes.ndim

    @property
    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def tensor(self, other: "FockState") -> "FockState":
        if other.n_max != self.n_max:
            raise ValueError("truncations differ")
        return FockState(np.multiply.outer(self.amplitudes, other.amplitudes), self.n_max)

    def edge_population(self) -> float:
        """Largest population on the ``n = n_max`` slice of any mode."""
        pops = np.abs(self.amplitudes) ** 2
        return max(float(np.take(pops, self.n_max, axis=k).sum()) for k in range(self.n_modes))


def fock_vacuum(n_modes: int, n_max: int = N_MAX) -> FockState:
    amp = np.zeros((n_max + 1,) * n_modes, dtype=complex)
    amp[(0,) * n_modes] = 1.0
    return FockState(amp, n_max)


def tmsv_amplitudes(mu: float, n_max: int = N_MAX) -> np.ndarray:
    """``c_n = tanh(r)^n / cosh(r)`` with ``sinh^2 r = mu``."""
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    x = math.sqrt(mu / (1.0 + mu))  # tanh r
    return np.array([x**n for n in range(n_max + 1)]) / math.sqrt(1.0 + mu)


def fock_tmsv(mu: float, n_max: int = N_MAX) -> FockState:
    return FockState(np.diag(tmsv_amplitudes(mu, n_max)).astype(complex), n_max)


@lru_cache(maxsize=4096)
def _rotation_block(total: int, c: float, s: float) -> np.ndarray:
    """``U[k, n] = <k, N-k| U |n, N-n>`` for the two-mode rotation at fixed total N."""
    m11, m21, m12, m22 = c, s, -s, c
    u = np.zeros((total + 1, total + 1))
    for n1 in range(total + 1):
        n2 = total - n1
        p1 = np.array([math.comb(n1, i) * m11**i * m21 ** (n1 - i) for i in range(n1 + 1)])
        p2 = np.array([math.comb(n2, i) * m12**i * m22 ** (n2 - i) for i in range(n2 + 1)])
        coef = np.convolve(p1, p2)  # coefficient of (a1^dag)^k (a2^dag)^(N-k)
        for k in range(total + 1):
            u[k, n1] = coef[k] * math.sqrt(math.factorial(k) * math.factorial(total - k) / (math.factorial(n1) * math.factorial(n2)))
    return u


def rotation_blocks(theta: float, n_max: int):
    c, s = math.cos(theta), math.sin(theta)
    return [_rotation_block(t, c, s) for t in range(2 * n_max + 1)]


def fock_rotation(state: FockState, i: int, j: int, theta: float) -> FockState:
    """Rotate modes i, j by theta. Amplitude pushed beyond n_max is checked, then dropped."""
    if i == j:
        raise ValueError("rotation needs two distinct modes")
    n = state.n_max
    amp = np.moveaxis(state.amplitudes, (i, j), (-2, -1))
    out = np.zeros_like(amp)
    lost = 0.0
    for total, u in enumerate(rotation_blocks(theta, n)):
        ins = [(k, total - k) for k in range(total + 1) if k <= n and total - k <= n]
        if not ins:
            continue
        src = np.stack([amp[..., a, b] for a, b in ins], axis=-1)
        cols = [a for a, _ in ins]
        res = src @ u[:, cols].T
        for k in range(total + 1):
            if k <= n and total - k <= n:
                out[..., k, total - k] = res[..., k]
            else:
                lost += float(np.sum(np.abs(res[..., k]) ** 2))
    if lost > OVERFLOW_TOL:
        raise TruncationError(f"rotation pushed population {lost:.3e} beyond n_max = {n}")
    return FockState(np.moveaxis(out, (-2, -1), (i, j)), n)


def fock_beamsplitter(state: FockState, i: int, j: int, t: float) -> FockState:
    """Beamsplitter of transmittivity t, with the same sign convention as the Gaussian engine."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"transmittivity must lie in [0, 1], got {t}")
    return fock_rotation(state, i, j, math.acos(math.sqrt(t)))


def loss_kraus(eta: float, n_max: int = N_MAX) -> np.ndarray:
    """``K[k][m, n] = sqrt(C(n, k) eta^(n-k) (1-eta)^k)`` for ``m = n - k``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    kraus = np.zeros((n_max + 1, n_max + 1, n_max + 1))
    for n in range(n_max + 1):
        for k in range(n + 1):
            kraus[k, n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
    return kraus


def density(state: FockState) -> np.ndarray:
    """``rho[n..., m...] = psi[n...] conj(psi[m...])``."""
    return np.multiply.outer(state.amplitudes, state.amplitudes.conj())


def fock_loss(rho: np.ndarray, mode: int, eta: float, n_max: int = N_MAX) -> np.ndarray:
    """Pure loss on one mode of a density tensor with 2 * n_modes axes (kets first)."""
    n_modes = rho.ndim // 2
    kraus = loss_kraus(eta, n_max)
    r = np.moveaxis(rho, (mode, n_modes + mode), (0, 1))
    r = np.einsum("kan,nm...,kbm->ab...", kraus, r, kraus)
    return np.moveaxis(r, (0, 1), (mode, n_modes + mode))


def fock_click_probability(rho: np.ndarray, mode: int, nu: float = 0.0) -> float:
    """Probability that an on-off detector on ``mode`` clicks: ``1 - (1 - nu) P(n = 0)``."""
    n_modes = rho.ndim // 2
    r = rho
    for k in reversed(range(n_modes)):
        if k != mode:
            r = np.trace(r, axis1=k, axis2=k + r.ndim // 2)
    return float(1.0 - (1.0 - nu) * np.real(r[0, 0]))


def _detector_weights(eta: float, nu: float, n: int) -> np.ndarray:
    """Rows: (no click, click) probabilities for 0..n photons."""
    silent = (1.0 - nu) * (1.0 - eta) ** np.arange(n + 1)
    return np.stack([silent, 1.0 - silent])


def pair_povm(theta: float, eta: float, nu: float, n_max: int = N_MAX) -> np.ndarray:
    """On-off POVM of two detectors behind a rotation, pulled back to the input modes.

    Returns
    -------
    ndarray, shape (2, 2, n+1, n+1, n+1, n+1)
        ``Pi[c1, c2][m1, m2, n1, n2]``; ``c = 1`` means the detector clicks.
    """
    w = _detector_weights(eta, nu, 2 * n_max)
    out = np.zeros((2, 2) + (n_max + 1,) * 4)
    for total, u in enumerate(rotation_blocks(theta, n_max)):
        ins = [k for k in range(total + 1) if k <= n_max and total - k <= n_max]
        if not ins:
            continue
        ks = np.arange(total + 1)
        sub = u[:, ins]
        for c1, c2 in itertools.product((0, 1), repeat=2):
            d = w[c1, ks] * w[c2, total - ks]
            block = sub.T @ (d[:, None] * sub)
            for x, m1 in enumerate(ins):
                for y, n1 in enumerate(ins):
                    out[c1, c2, m1, total - m1, n1, total - n1] = block[x, y]
    return out


def _party_operator(psi: np.ndarray, povm: np.ndarray) -> np.ndarray:
    """``rho[c1, c2][x, y] = sum Pi[m, n] psi[n, x] conj(psi[m, y])`` over the party's two modes."""
    half = np.tensordot(povm, psi, axes=([4, 5], [0, 1]))  # (c, d, m, o, x, y)
    return np.tensordot(half, psi.conj(), axes=([2, 3], [0, 1]))


def _source_amplitudes(mu_hv: float, mu_vh: float, n_max: int) -> np.ndarray:
    """Amplitudes on (aH, aV, bH, bV): TMSV(aH, bV) with mu_hv and TMSV(aV, bH) with mu_vh."""
    c1 = tmsv_amplitudes(mu_hv, n_max)
    c2 = tmsv_amplitudes(mu_vh, n_max)
    psi = np.zeros((n_max + 1,) * 4)
    for n in range(n_max + 1):
        for m in range(n_max + 1):
            psi[n, m, m, n] = c1[n] * c2[m]
    return psi


def direct_patterns(
    mu: tuple,
    theta_a: float,
    theta_b: float,
    eta_a: float = 1.0,
    eta_b: float = 1.0,
    nu: float = 0.0,
    n_max: int = N_MAX,
) -> np.ndarray:
    """All 16 click-pattern probabilities of the direct layout.

    Parameters
    ----------
    mu : (float, float)
        Mean photon numbers of TMSV(A_H, B_V) and TMSV(A_V, B_H).
    eta_a, eta_b : float
        Total efficiency in front of Alice's and Bob's detectors.

    Returns
    -------
    ndarray, shape (2, 2, 2, 2)
        Indexed by the click bits of D1, D2, D3, D4.
    """
    psi = _source_amplitudes(mu[0], mu[1], n_max)
    pa = pair_povm(theta_a, eta_a, nu, n_max)
    pb = pair_povm(theta_b, eta_b, nu, n_max)
    half = np.tensordot(pa, psi, axes=([4, 5], [0, 1]))  # (a, b, m, o, s, t)
    rho_b = np.tensordot(half, psi.conj(), axes=([2, 3], [0, 1]))  # (a, b, s, t, q, r)
    return np.tensordot(rho_b, pb, axes=([4, 5, 2, 3], [2, 3, 4, 5])).real


def esr_patterns(
    mu_a: tuple,
    mu_b: tuple,
    theta_a: float,
    theta_b: float,
    eta_t: float = 1.0,
    eta_d: float = 1.0,
    eta_hd: float = 1.0,
    nu_u: float = 0.0,
    nu_h: float = 0.0,
    n_max: int = N_MAX,
) -> np.ndarray:
    """All 256 click-pattern probabilities of the ESR layout.

    Source A emits TMSV(A_H, in_V) with ``mu_a[0]`` and TMSV(A_V, in_H) with
    ``mu_a[1]``; source B emits TMSV(loc_H, B_V) and TMSV(loc_V, B_H). The
    relay mixes in_H with loc_H and in_V with loc_V on 50:50 beamsplitters
    whose outputs feed D7, D5 (H pair) and D6, D8 (V pair).

    Returns
    -------
    ndarray, shape (2,) * 8
        Indexed by the click bits of D1..D8.
    """
    psi_a = _source_amplitudes(mu_a[0], mu_a[1], n_max)  # (A_H, A_V, in_H, in_V)
    psi_b = _source_amplitudes(mu_b[0], mu_b[1], n_max)  # (loc_H, loc_V, B_H, B_V)
    rho_a = _party_operator(psi_a, pair_povm(theta_a, eta_d, nu_u, n_max))
    rho_b = _party_operator(np.transpose(psi_b, (2, 3, 0, 1)), pair_povm(theta_b, eta_d, nu_u, n_max))
    # fibre loss on the relay input, axes (c, d, inH, inV, inH', inV')
    kraus = loss_kraus(eta_t, n_max)
    rho_a = _lossy_pair_operator(rho_a, kraus)
    # herald POVMs on (in, loc) for each polarization: clicks of (D7, D5) and (D6, D8)
    herald = pair_povm(math.pi / 4, eta_hd, nu_h, n_max)
    # P = sum rho_a[ab,x,y,z,w] rho_b[cd,s,t,u,v] H[gh,z,u,x,s] V[ef,w,v,y,t]
    t1 = np.tensordot(rho_a, herald, axes=([2, 4], [4, 2]))  # (a, b, y, w, g, h, u, s)
    t2 = np.tensordot(t1, rho_b, axes=([7, 6], [2, 4]))  # (a, b, y, w, g, h, c, d, t, v)
    probs = np.tensordot(t2, herald, axes=([2, 3, 8, 9], [4, 2, 5, 3])).real  # (a, b, g, h, c, d, e, f)
    # g, h = D7, D5 and e, f = D6, D8
    return np.transpose(probs, (0, 1, 4, 5, 3, 6, 2, 7))


def _lossy_pair_operator(rho: np.ndarray, kraus: np.ndarray) -> np.ndarray:
    """Pure loss on both modes of ``rho[c, d, x, y, z, w]`` (kets x, y; bras z, w)."""
    for ket, bra in ((2, 4), (3, 5)):
        out = np.zeros_like(rho)
        for k in kraus:
            r = np.moveaxis(np.tensordot(k, rho, axes=([1], [ket])), 0, ket)
            out += np.moveaxis(np.tensordot(k, r, axes=([1], [bra])), 0, bra)
        rho = out
    return rho
