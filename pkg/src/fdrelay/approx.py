"""Closed-form achievable-rate approximation and duplex-regime boundaries.

Valid for symmetric antenna counts (N transmit, M receive per node), no
direct source-destination interference (eta_d = 0), equal time share
(tau = 1/2), and perfect CSI. The channels are idealized as diagonal with
R = min(M, N) identical entries sqrt(MN/R), which preserves E tr(H H^H) = MN.

Under that model the two candidate schedules are "full duplex" (uniform
covariances I/N in both periods) and "half duplex" (source sends 2I/N in
period 1 only, relay in period 2 only), yielding

    I_fd = R log2(1 + rho_d / (R/M + (k+b) rho_d))                if rho_r/rho_d >= 1 + (k+b) eta_r M/R
         = R log2(1 + rho_r / (R/M + (k+b)(rho_r + eta_r)))       otherwise

    I_hd = (R/2) log2(1 + rho / (R/(2M) + (k+b) rho)),  rho = min(rho_r, rho_d)

with k+b = kappa + beta, and the approximate rate is max(I_fd, I_hd).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "RegimeParams",
    "diag_channel_rate",
    "approx_rate_fd",
    "approx_rate_hd",
    "approx_rate",
    "duplex_boundary",
]


@dataclass(frozen=True)
class RegimeParams:
    """Parameters of the symmetric-antenna approximation regime.

    r = min(m, n) and theta = r / (m (kappa + beta)) are derived; theta is
    infinite in the distortion-free limit kappa + beta = 0, where full-duplex
    always wins and the duplex boundary is +inf.
    """

    n: int
    m: int
    rho_r: float
    rho_d: float
    eta_r: float
    kappa: float
    beta: float
    r: int = 0
    theta: float = 0.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("antenna counts must be >= 1")
        for name in ("rho_r", "rho_d", "eta_r", "kappa", "beta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        object.__setattr__(self, "r", min(self.m, self.n))
        kb = self.kappa + self.beta
        object.__setattr__(self, "theta", self.r / (self.m * kb) if kb > 0 else math.inf)


def diag_channel_rate(p: RegimeParams, q_s, q_r) -> float:
    """Rate of the idealized diagonal-channel model at uniform per-period loads.

    q_s, q_r give the per-antenna power of the (diagonal) covariances in the
    two periods; only the R live streams count. Used to close the loop between
    the general expression and the piecewise formulas below.
    """
    kb = p.kappa + p.beta
    gain = p.n * p.m / p.r

    def link(rho, qa, interferer_eta, qb):
        total = 0.0
        for l in range(2):
            denom = 1.0 + kb * gain * (rho * qa[l] + interferer_eta * qb[l])
            total += p.r * math.log2(1.0 + rho * gain * qa[l] / denom)
        return total

    i_sr = link(p.rho_r, q_s, p.eta_r, q_r)
    i_rd = link(p.rho_d, q_r, 0.0, q_s)
    return 0.5 * min(i_sr, i_rd)


def approx_rate_fd(p: RegimeParams) -> float:
    """Rate of the full-duplex candidate (uniform covariances both periods)."""
    kb = p.kappa + p.beta
    rm = p.r / p.m
    if p.rho_d > 0 and p.rho_r / p.rho_d >= 1.0 + kb * p.eta_r * p.m / p.r:
        return p.r * math.log2(1.0 + p.rho_d / (rm + kb * p.rho_d))
    return p.r * math.log2(1.0 + p.rho_r / (rm + kb * (p.rho_r + p.eta_r)))


def approx_rate_hd(p: RegimeParams) -> float:
    """Rate of the half-duplex candidate (one active period per node)."""
    kb = p.kappa + p.beta
    rm2 = p.r / (2.0 * p.m)
    rho = min(p.rho_r, p.rho_d)
    return 0.5 * p.r * math.log2(1.0 + rho / (rm2 + kb * rho))


def approx_rate(p: RegimeParams):
    """Approximate optimized rate: the better of the two candidates.

    Returns (rate in bpcu, mode), mode in {"full", "half"}; ties go to full.
    """
    fd = approx_rate_fd(p)
    hd = approx_rate_hd(p)
    return (fd, "full") if fd >= hd else (hd, "half")


def duplex_boundary(p: RegimeParams) -> float:
    """INR eta_r below which full-duplex is preferred, for p's SNR pair.

    Distortion-free systems always prefer full duplex (+inf). When
    rho_r/rho_d exceeds 1 + (kappa+beta) eta_r M/R for every eta_r below the
    boundary, full-duplex is always used and the boundary is +inf as well.
    """
    kb = p.kappa + p.beta
    if kb == 0.0:
        return math.inf
    th = p.theta
    if p.rho_d > 0 and p.rho_r / p.rho_d <= 1.0:
        e = th + 2.0 * p.rho_r
        return 0.5 * math.sqrt(e * e + 2.0 * p.rho_r / kb * e) - 0.5 * th
    e = th + 2.0 * p.rho_d
    ratio = p.rho_r / (2.0 * p.rho_d)
    return ratio * math.sqrt(e * e + 2.0 * p.rho_d / kb * e) - th * (1.0 - ratio)
