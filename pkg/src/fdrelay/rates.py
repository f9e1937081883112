"""Aggregate noise covariances after partial cancellation, and rate bounds.

After the relay subtracts its known self-interference component
sqrt(eta_r) Hhat_rr x_r, the residual noise at the relay in data period l has
the Hhat-conditional covariance

    Sig_r[l] = I + kappa rho_r Hsr diag(Qs[l]) Hsr^H + Dsr tr(Qs[l])
                 + kappa eta_r Hrr diag(Qr[l]) Hrr^H + Drr tr(Qr[l])
                 + beta rho_r diag(Hsr Qs[l] Hsr^H)
                 + beta eta_r diag(Hrr Qr[l] Hrr^H)

(all H's are estimates, D's conditional error covariances). The destination
does not cancel the source's interference, so its counterpart keeps the full
eta_d Hsd (Qs[l] + kappa diag(Qs[l])) Hsd^H term:

    Sig_d[l] = I + kappa rho_d Hrd diag(Qr[l]) Hrd^H + Drd tr(Qr[l])
                 + eta_d Hsd (Qs[l] + kappa diag(Qs[l])) Hsd^H + Dsd tr(Qs[l])
                 + beta rho_d diag(Hrd Qr[l] Hrd^H)
                 + beta eta_d diag(Hsd Qs[l] Hsd^H)

Treating the residual noise as Gaussian gives per-period rate lower bounds

    I_sr[l] = log2 det(rho_r Hsr Qs[l] Hsr^H + Sig_r[l]) - log2 det(Sig_r[l])

and mirrored for the relay-to-destination link; the end-to-end lower bound is
the tau-weighted minimum of the two link sums. The upper bound is the same
expression with the estimation-error covariances forced to zero (perfect CSI).

With `cancellation=False` the known self-interference power
eta_r Hrr Qr[l] Hrr^H is added back into Sig_r[l] (the no-cancellation
baseline).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import LinkEstimate, SystemParams, draw_link_estimate, hermitize, make_rng

__all__ = [
    "CovarianceSchedule",
    "EstimateBundle",
    "RateReport",
    "estimate_links",
    "noise_cov_relay",
    "noise_cov_dest",
    "rate_sr",
    "rate_rd",
    "end_to_end_rate",
]

_LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class CovarianceSchedule:
    """Transmit covariance quadruple (Qs[1], Qs[2], Qr[1], Qr[2]) plus time share.

    Period 1 has normalized duration tau, period 2 has 1 - tau. Feasibility:
    each Q Hermitian PSD and sum_l tau[l] tr(Q[l]) <= 1 per transmitter.
    """

    q_s: tuple
    q_r: tuple
    tau: float

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        for name, pair in (("q_s", self.q_s), ("q_r", self.q_r)):
            if len(pair) != 2:
                raise ValueError(f"{name} must hold one matrix per period")
            for q in pair:
                scale = max(1.0, float(np.abs(q).max()))
                if np.abs(q - q.conj().T).max() > 1e-9 * scale:
                    raise ValueError(f"{name} entries must be Hermitian")
                if np.linalg.eigvalsh(hermitize(q)).min() < -1e-9 * scale:
                    raise ValueError(f"{name} entries must be PSD")
            budget = sum(w * np.real(np.trace(q)) for w, q in zip(self.weights, pair))
            if budget > 1.0 + 1e-9:
                raise ValueError(f"{name} violates the tau-weighted trace budget: {budget}")

    @property
    def weights(self) -> np.ndarray:
        return np.array([self.tau, 1.0 - self.tau])

    def stacks(self):
        """(qs, qr) as (2, n, n) arrays for batched period math."""
        return np.stack(self.q_s).astype(complex), np.stack(self.q_r).astype(complex)


@dataclass(frozen=True)
class EstimateBundle:
    """Per-link estimates; alphas are (rho_r, eta_r, rho_d, eta_d)."""

    sr: LinkEstimate
    rr: LinkEstimate
    rd: LinkEstimate
    sd: LinkEstimate

    def perfect_csi(self) -> "EstimateBundle":
        """Same estimates with the error covariances zeroed (upper bound)."""
        return EstimateBundle(
            *(replace(le, d_hat=np.zeros_like(le.d_hat)) for le in (self.sr, self.rr, self.rd, self.sd))
        )


@dataclass(frozen=True)
class RateReport:
    """Per-period link rates (bpcu) and the tau-weighted end-to-end bound."""

    i_sr: tuple
    i_rd: tuple
    i_end: float
    bound_kind: str


def estimate_links(channels, params: SystemParams, seed, key=()) -> EstimateBundle:
    """Estimate all four links with independent noise substreams.

    Source and relay pilots occupy separate training periods, so each link is
    estimated without self-interference; the destination estimates the
    source-destination channel during the source's period.
    """
    t = params.train_len
    links = [
        ("sr", channels.h_sr, params.rho_r),
        ("rr", channels.h_rr, params.eta_r),
        ("rd", channels.h_rd, params.rho_d),
        ("sd", channels.h_sd, params.eta_d),
    ]
    out = {}
    for i, (name, h, alpha) in enumerate(links):
        rng = make_rng(seed, tuple(key) + (i + 1,))
        out[name] = draw_link_estimate(h, alpha, params.kappa, params.beta, t, rng)
    return EstimateBundle(**out)


# ---------------------------------------------------------------------------
# batched covariance / rate internals: period axis first, shape (2, m, m)

def _hqh(h, q):
    return h @ q @ h.conj().T


def _h_diagq_h(h, q):
    d = np.real(q.diagonal(axis1=-2, axis2=-1))
    return (h * d[:, None, :]) @ h.conj().T


def _diag_of_hqh(h, q):
    t = np.matmul(h, q)
    return np.real(np.sum(t * h.conj(), axis=-1))


def _traces(q):
    return np.real(q.diagonal(axis1=-2, axis2=-1).sum(axis=-1))


def _sigma_r_stack(est: EstimateBundle, qs, qr, p: SystemParams, cancellation: bool):
    hsr, hrr = est.sr.h_hat, est.rr.h_hat
    m = hsr.shape[0]
    sig = p.kappa * p.rho_r * _h_diagq_h(hsr, qs) \
        + _traces(qs)[:, None, None] * est.sr.d_hat \
        + p.kappa * p.eta_r * _h_diagq_h(hrr, qr) \
        + _traces(qr)[:, None, None] * est.rr.d_hat
    if not cancellation:
        sig = sig + p.eta_r * _hqh(hrr, qr)
    dvec = 1.0 + p.beta * p.rho_r * _diag_of_hqh(hsr, qs) + p.beta * p.eta_r * _diag_of_hqh(hrr, qr)
    idx = np.arange(m)
    sig = hermitize(sig)
    sig[:, idx, idx] += dvec
    return sig


def _sigma_d_stack(est: EstimateBundle, qs, qr, p: SystemParams):
    hrd, hsd = est.rd.h_hat, est.sd.h_hat
    m = hrd.shape[0]
    sig = p.kappa * p.rho_d * _h_diagq_h(hrd, qr) \
        + _traces(qr)[:, None, None] * est.rd.d_hat \
        + p.eta_d * (_hqh(hsd, qs) + p.kappa * _h_diagq_h(hsd, qs)) \
        + _traces(qs)[:, None, None] * est.sd.d_hat
    dvec = 1.0 + p.beta * p.rho_d * _diag_of_hqh(hrd, qr) + p.beta * p.eta_d * _diag_of_hqh(hsd, qs)
    idx = np.arange(m)
    sig = hermitize(sig)
    sig[:, idx, idx] += dvec
    return sig


def _logdet_pd(a):
    ell = np.linalg.cholesky(a)
    return 2.0 * np.sum(np.log(np.real(ell.diagonal(axis1=-2, axis2=-1))), axis=-1)


def _link_rates(est: EstimateBundle, qs, qr, p: SystemParams, cancellation: bool):
    """Per-period (i_sr, i_rd) in bpcu, each shape (2,)."""
    sig_r = _sigma_r_stack(est, qs, qr, p, cancellation)
    sig_d = _sigma_d_stack(est, qs, qr, p)
    s_r = sig_r + p.rho_r * _hqh(est.sr.h_hat, qs)
    s_d = sig_d + p.rho_d * _hqh(est.rd.h_hat, qr)
    i_sr = (_logdet_pd(s_r) - _logdet_pd(sig_r)) / _LN2
    i_rd = (_logdet_pd(s_d) - _logdet_pd(sig_d)) / _LN2
    return i_sr, i_rd


def _check_period(l: int) -> int:
    if l not in (1, 2):
        raise ValueError("period index l must be 1 or 2")
    return l - 1


# ---------------------------------------------------------------------------
# public operations

def noise_cov_relay(
    est: EstimateBundle,
    sched: CovarianceSchedule,
    params: SystemParams,
    l: int,
    cancellation: bool = True,
) -> np.ndarray:
    """Aggregate noise covariance Sig_r[l] at the relay, period l in {1, 2}."""
    qs, qr = sched.stacks()
    return _sigma_r_stack(est, qs, qr, params, cancellation)[_check_period(l)]


def noise_cov_dest(
    est: EstimateBundle, sched: CovarianceSchedule, params: SystemParams, l: int
) -> np.ndarray:
    """Aggregate noise covariance Sig_d[l] at the destination."""
    qs, qr = sched.stacks()
    return _sigma_d_stack(est, qs, qr, params)[_check_period(l)]


def rate_sr(
    est: EstimateBundle,
    sched: CovarianceSchedule,
    params: SystemParams,
    l: int,
    cancellation: bool = True,
) -> float:
    """Source-to-relay lower-bound rate in period l (bpcu), two-log-det form."""
    qs, qr = sched.stacks()
    return float(_link_rates(est, qs, qr, params, cancellation)[0][_check_period(l)])


def rate_rd(
    est: EstimateBundle,
    sched: CovarianceSchedule,
    params: SystemParams,
    l: int,
    cancellation: bool = True,
) -> float:
    """Relay-to-destination lower-bound rate in period l (bpcu)."""
    qs, qr = sched.stacks()
    return float(_link_rates(est, qs, qr, params, cancellation)[1][_check_period(l)])


def end_to_end_rate(
    est: EstimateBundle,
    sched: CovarianceSchedule,
    params: SystemParams,
    bound_kind: str = "lower",
    cancellation: bool = True,
) -> RateReport:
    """End-to-end rate bound: tau-weighted minimum of the two link sums.

    bound_kind "lower" uses the conditional error covariances as estimated;
    "upper" recomputes with perfect CSI (all Dhat = 0).
    """
    if bound_kind not in ("lower", "upper"):
        raise ValueError("bound_kind must be 'lower' or 'upper'")
    bundle = est if bound_kind == "lower" else est.perfect_csi()
    qs, qr = sched.stacks()
    i_sr, i_rd = _link_rates(bundle, qs, qr, params, cancellation)
    i_sr = np.maximum(i_sr, 0.0)
    i_rd = np.maximum(i_rd, 0.0)
    w = sched.weights
    i_end = float(min(w @ i_sr, w @ i_rd))
    return RateReport(
        i_sr=(float(i_sr[0]), float(i_sr[1])),
        i_rd=(float(i_rd[0]), float(i_rd[1])),
        i_end=i_end,
        bound_kind=bound_kind,
    )
