"""Propagation channels, dynamic-range distortion, and pilot-aided LS estimation.

Conventions used throughout the package:

* A link with N transmit and M receive antennas is an M x N complex matrix,
  entries i.i.d. CN(0, 1) (real/imag parts each of variance 1/2).
* All power quantities (rho, eta, kappa, beta, alpha) are linear ratios;
  dB conversion happens only at the CLI/config boundary.
* Transmitter noise adds per-antenna Gaussian distortion with variance kappa
  times the intended transmit energy at that antenna; receiver distortion adds
  variance beta times the energy collected at that antenna.
* Randomness is counter-based (Philox) with explicit spawn keys, so trials and
  links get independent, scheduling-invariant substreams.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "SystemParams",
    "ChannelSet",
    "PilotMatrix",
    "LinkEstimate",
    "make_rng",
    "crandn",
    "hermitize",
    "psd_sqrt",
    "draw_channels",
    "transmitter_noise_cov",
    "receiver_distortion_cov",
    "build_pilot",
    "simulate_training",
    "ls_estimate",
    "estimation_error_cov",
    "conditional_error_cov",
    "draw_link_estimate",
]


@dataclass(frozen=True)
class SystemParams:
    """Scenario scalars.

    rho_r, rho_d : SNR at the relay / destination (linear).
    eta_r, eta_d : INR at the relay (self-interference) / destination (linear).
    kappa        : transmitter-noise fraction, 1/kappa = transmitter dynamic range.
    beta         : receiver-distortion fraction, 1/beta = receiver dynamic range.
    n_s, n_r     : transmit antennas at source / relay.
    m_r, m_d     : receive antennas at relay / destination.
    train_len    : pilot repetitions T; each training period spans T*N uses.
    """

    rho_r: float
    rho_d: float
    eta_r: float
    eta_d: float
    kappa: float
    beta: float
    n_s: int = 3
    n_r: int = 3
    m_r: int = 4
    m_d: int = 4
    train_len: int = 50

    def __post_init__(self):
        for name in ("rho_r", "rho_d", "eta_r", "eta_d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("kappa", "beta"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        for name in ("n_s", "n_r", "m_r", "m_d"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.train_len < 1:
            raise ValueError("train_len must be >= 1")

    def with_(self, **kw) -> "SystemParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class ChannelSet:
    """The four true propagation matrices of one realization."""

    h_sr: np.ndarray  # (m_r, n_s)
    h_rr: np.ndarray  # (m_r, n_r)
    h_rd: np.ndarray  # (m_d, n_r)
    h_sd: np.ndarray  # (m_d, n_s)


@dataclass(frozen=True)
class PilotMatrix:
    """Space-time pilot X of shape (N, T*N) with (1/2T) X X^H = I exactly."""

    x: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def t(self) -> int:
        return self.x.shape[1] // self.x.shape[0]


@dataclass(frozen=True)
class LinkEstimate:
    """LS channel estimate and its conditional error covariance.

    h_hat is the estimated channel, d_hat the receive-side Hermitian PSD error
    covariance conditioned on h_hat, alpha the link's power ratio. A link with
    alpha = 0 carries zero matrices: it contributes nothing to any receiver.
    """

    h_hat: np.ndarray
    d_hat: np.ndarray
    alpha: float


def make_rng(seed, key=()) -> np.random.Generator:
    """Counter-based generator for substream `key` of the given seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def crandn(rng: np.random.Generator, *shape) -> np.ndarray:
    """i.i.d. CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def hermitize(a: np.ndarray) -> np.ndarray:
    """(A + A^H)/2; keeps covariance assemblies Hermitian against float drift."""
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def _check_hermitian_psd(a: np.ndarray, name: str, tol: float = 1e-10) -> None:
    scale = max(1.0, float(np.abs(a).max()) if a.size else 1.0)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if np.abs(a - a.conj().T).max() > tol * scale:
        raise ValueError(f"{name} must be Hermitian")
    w = np.linalg.eigvalsh(hermitize(a))
    if w.min() < -tol * scale:
        raise ValueError(f"{name} must be positive semidefinite")


def psd_sqrt(a: np.ndarray) -> np.ndarray:
    """Hermitian PSD square root via eigendecomposition."""
    w, v = np.linalg.eigh(hermitize(a))
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def draw_channels(params: SystemParams, seed, key=()) -> ChannelSet:
    """Draw the four Rayleigh-fading links, i.i.d. CN(0,1) entries.

    Deterministic for a fixed (seed, key); the optional key selects a
    substream (used by the experiment harness for per-trial streams).
    """
    rng = make_rng(seed, key)
    return ChannelSet(
        h_sr=crandn(rng, params.m_r, params.n_s),
        h_rr=crandn(rng, params.m_r, params.n_r),
        h_rd=crandn(rng, params.m_d, params.n_r),
        h_sd=crandn(rng, params.m_d, params.n_s),
    )


def transmitter_noise_cov(q: np.ndarray, kappa: float) -> np.ndarray:
    """Covariance kappa * diag(Q) of the transmitter noise c(t).

    Q is the (Hermitian PSD) covariance of the intended transmit signal.
    """
    _check_hermitian_psd(q, "q")
    return kappa * np.diag(np.real(np.diag(q))).astype(complex)


def receiver_distortion_cov(phi: np.ndarray, beta: float) -> np.ndarray:
    """Covariance beta * diag(Phi) of the receiver distortion e(t).

    Phi is the covariance of the undistorted receive vector u(t).
    """
    _check_hermitian_psd(phi, "phi")
    return beta * np.diag(np.real(np.diag(phi))).astype(complex)


def build_pilot(n: int, t: int) -> PilotMatrix:
    """Pilot of shape (n, t*n): scaled DFT rows tiled t times.

    Satisfies (1/2t) X X^H = I exactly; the per-period spatial correlation is
    (2/n) I, i.e. training power tr(Q) = 2.
    """
    if n < 1 or t < 1:
        raise ValueError("n and t must be >= 1")
    k = np.arange(n)
    dft = np.exp(-2j * np.pi * np.outer(k, k) / n)  # unnormalized, F F^H = n I
    x = np.sqrt(2.0 / n) * np.tile(dft, (1, t))
    return PilotMatrix(x=x)


def simulate_training(
    h: np.ndarray,
    alpha: float,
    pilot: PilotMatrix,
    kappa: float,
    beta: float,
    seed,
    key=(),
    awgn: bool = True,
) -> np.ndarray:
    """One noisy training observation Y = sqrt(alpha) H (X + C) + N + E.

    Stochastic oracle for the LS estimator; `awgn=False` removes the additive
    noise matrix (with kappa=beta=0 this makes Y = sqrt(alpha) H X exactly).
    """
    m, n = h.shape
    tn = pilot.x.shape[1]
    rng = make_rng(seed, key)
    c = crandn(rng, n, tn) * np.sqrt(2.0 * kappa / n)
    u = np.sqrt(alpha) * h @ (pilot.x + c)
    if awgn:
        u = u + crandn(rng, m, tn)
    # e(t) tracks the mean collected energy: Phi = 2 alpha (1+kappa)/n H H^H + I
    phi_diag = 2.0 * alpha * (1.0 + kappa) / n * np.real(np.einsum("ij,ij->i", h, h.conj())) + 1.0
    e = crandn(rng, m, tn) * np.sqrt(beta * phi_diag)[:, None]
    return u + e


def ls_estimate(y: np.ndarray, pilot: PilotMatrix, alpha: float) -> np.ndarray:
    """Least-squares channel estimate: sqrt(alpha) Hhat = (1/2T) Y X^H."""
    if alpha <= 0:
        raise ValueError("alpha must be > 0 for LS estimation")
    if y.shape[1] != pilot.x.shape[1]:
        raise ValueError("y and pilot have mismatched time dimensions")
    t = pilot.t
    return (y @ pilot.x.conj().T) / (2.0 * t * np.sqrt(alpha))


def _error_cov(h: np.ndarray, alpha: float, kappa: float, beta: float, t: int, exact: bool) -> np.ndarray:
    m, n = h.shape
    hh = h @ h.conj().T
    dg = np.diag(np.real(np.diag(hh))).astype(complex)
    eye = np.eye(m, dtype=complex)
    if exact:
        d = (1.0 + beta) * eye + alpha * (2.0 * kappa / n) * hh \
            + alpha * (2.0 * beta / n) * (1.0 + kappa) * dg
    else:
        d = eye + alpha * (2.0 * kappa / n) * hh + alpha * (2.0 * beta / n) * dg
    return hermitize(d / (2.0 * t))


def estimation_error_cov(
    h: np.ndarray, alpha: float, kappa: float, beta: float, t: int, exact: bool = True
) -> np.ndarray:
    """Spatial covariance D of the LS estimation error sqrt(alpha)(Hhat - H).

    `exact=True` keeps the (1+beta) and (1+kappa) factors; `exact=False` is
    the kappa,beta << 1 reduction.
    """
    return _error_cov(h, alpha, kappa, beta, t, exact)


def conditional_error_cov(h_hat: np.ndarray, alpha: float, kappa: float, beta: float, t: int) -> np.ndarray:
    """Error covariance Dhat conditioned on the estimate (Hhat in place of H)."""
    return _error_cov(h_hat, alpha, kappa, beta, t, exact=False)


def draw_link_estimate(
    h: np.ndarray, alpha: float, kappa: float, beta: float, t: int, rng: np.random.Generator
) -> LinkEstimate:
    """Draw Hhat statistically equivalent to the LS estimator output.

    Uses sqrt(alpha) Hhat = sqrt(alpha) H + D^{1/2} Htilde with Htilde i.i.d.
    CN(0,1), which matches the LS error statistics without simulating pilots.
    A link with alpha = 0 is absent and degenerates to zero matrices.
    """
    m, n = h.shape
    if alpha == 0.0:
        return LinkEstimate(
            h_hat=np.zeros((m, n), dtype=complex),
            d_hat=np.zeros((m, m), dtype=complex),
            alpha=0.0,
        )
    d = estimation_error_cov(h, alpha, kappa, beta, t, exact=True)
    h_hat = h + psd_sqrt(d) @ crandn(rng, m, n) / np.sqrt(alpha)
    d_hat = conditional_error_cov(h_hat, alpha, kappa, beta, t)
    return LinkEstimate(h_hat=h_hat, d_hat=d_hat, alpha=float(alpha))
