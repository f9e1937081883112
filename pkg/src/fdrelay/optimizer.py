"""Maximin transmit-covariance optimization.

The maximin rate for a fixed time share tau is found by bisecting the weight
zeta of the weighted sum-rate

    I_tau(Q, zeta) = zeta * sum_l tau[l] I_sr[l] + (1-zeta) * sum_l tau[l] I_rd[l]

toward a link-equalizing solution. Each weighted problem is solved with
gradient projection: alternately step the relay pair (Qr[1], Qr[2]) and the
source pair along the analytic gradient, project onto the constraint set
{Q PSD, sum_l tau[l] tr(Q[l]) <= 1} by eigenvalue water-filling with a shared
water level, and pick the damping gamma with the Armijo rule.

Scheme variants: OHD pins Qs[2] = Qr[1] = 0 (optimized half-duplex, fixed
zeta = 1/2); NFD reuses the OHD covariances in both periods (rescaled onto the
budget); TCO-1-IC ties the two periods; TCO-2 disables self-interference
cancellation in the noise covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .model import SystemParams, hermitize
from .rates import (
    CovarianceSchedule,
    EstimateBundle,
    RateReport,
    end_to_end_rate,
    _hqh,
    _link_rates,
    _sigma_d_stack,
    _sigma_r_stack,
    _check_period,
)

__all__ = [
    "GpConfig",
    "SchemeId",
    "OptResult",
    "weighted_sum_rate",
    "gradient_relay",
    "gradient_source",
    "project_constraint",
    "gp_optimize",
    "ohd_schedule",
    "nfd_schedule",
    "bisect_zeta",
    "optimize_scheme",
]

_LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class GpConfig:
    """Gradient-projection knobs: Armijo sigma/nu, stop threshold, iter caps."""

    sigma: float = 0.01
    nu: float = 0.2
    eps_stop: float = 0.01
    max_outer_iters: int = 400
    s_step: float = 1.0

    def __post_init__(self):
        if not 1e-5 <= self.sigma <= 1e-1:
            raise ValueError("sigma must lie in [1e-5, 1e-1]")
        if not 0.1 <= self.nu <= 0.5:
            raise ValueError("nu must lie in [0.1, 0.5]")
        if self.eps_stop <= 0 or self.max_outer_iters < 1 or self.s_step <= 0:
            raise ValueError("eps_stop, s_step must be > 0 and max_outer_iters >= 1")


class SchemeId(Enum):
    TCO_2_IC = "TCO-2-IC"
    TCO_2 = "TCO-2"
    TCO_1_IC = "TCO-1-IC"
    OHD = "OHD"
    NFD = "NFD"


@dataclass
class OptResult:
    sched: CovarianceSchedule
    zeta: float
    rate: RateReport
    tau_star: float
    iterations: int
    converged: bool
    log: list = field(default_factory=list)

    @property
    def min_rate(self) -> float:
        return self.rate.i_end


# ---------------------------------------------------------------------------
# objective and gradients

def _weighted_rate(est, qs, qr, tw, params, zeta, cancellation) -> float:
    i_sr, i_rd = _link_rates(est, qs, qr, params, cancellation)
    return float(zeta * (tw @ i_sr) + (1.0 - zeta) * (tw @ i_rd))


def weighted_sum_rate(
    est: EstimateBundle,
    sched: CovarianceSchedule,
    params: SystemParams,
    zeta: float,
    cancellation: bool = True,
) -> float:
    """zeta-weighted sum of the tau-weighted link rates (bpcu)."""
    if not 0.0 <= zeta <= 1.0:
        raise ValueError("zeta must lie in [0, 1]")
    qs, qr = sched.stacks()
    return _weighted_rate(est, qs, qr, sched.weights, params, zeta, cancellation)


def _embed_diag(vals):
    n = vals.shape[-1]
    out = np.zeros(vals.shape[:-1] + (n, n), dtype=complex)
    idx = np.arange(n)
    out[..., idx, idx] = vals
    return out


def _grad_stacks(est, qs, qr, tw, params, zeta, cancellation, which):
    """Gradient of the weighted sum-rate w.r.t. the relay or source pair.

    Returns a (2, n, n) Hermitian stack G with d(rate) = (1/2) tr(G dQ), the
    scaling used by the projection iteration Q + s*G.
    """
    p = params
    sig_r = _sigma_r_stack(est, qs, qr, p, cancellation)
    sig_d = _sigma_d_stack(est, qs, qr, p)
    s_r = sig_r + p.rho_r * _hqh(est.sr.h_hat, qs)
    s_d = sig_d + p.rho_d * _hqh(est.rd.h_hat, qr)
    inv_sr, inv_sigr = np.linalg.inv(s_r), np.linalg.inv(sig_r)
    inv_sd, inv_sigd = np.linalg.inv(s_d), np.linalg.inv(sig_d)
    w_r = inv_sr - inv_sigr
    w_d = inv_sd - inv_sigd

    def dterm(h, w_full, w_diff, d_hat, alpha_signal, alpha_noise, with_signal, with_full_noise):
        # derivative of logdet(S) - logdet(Sig) for one link's coefficients
        hc = h.conj().T
        out = np.zeros((2, h.shape[1], h.shape[1]), dtype=complex)
        if with_signal:
            out = out + alpha_signal * (hc @ w_full @ h)
        b = hc @ w_diff @ h
        if with_full_noise:
            out = out + alpha_noise * b
        out = out + p.kappa * alpha_noise * _embed_diag(b.diagonal(axis1=-2, axis2=-1))
        wdiag = np.real(w_diff.diagonal(axis1=-2, axis2=-1))
        out = out + p.beta * alpha_noise * ((hc[None, :, :] * wdiag[:, None, :]) @ h)
        tr_wd = np.real(np.einsum("lij,ji->l", w_diff, d_hat))
        eye = np.eye(h.shape[1], dtype=complex)
        return out + tr_wd[:, None, None] * eye

    if which == "r":
        g_d = dterm(est.rd.h_hat, inv_sd, w_d, est.rd.d_hat, p.rho_d, p.rho_d,
                    with_signal=True, with_full_noise=False)
        g_r = dterm(est.rr.h_hat, None, w_r, est.rr.d_hat, 0.0, p.eta_r,
                    with_signal=False, with_full_noise=not cancellation)
        g = (1.0 - zeta) * g_d + zeta * g_r
    elif which == "s":
        g_r = dterm(est.sr.h_hat, inv_sr, w_r, est.sr.d_hat, p.rho_r, p.rho_r,
                    with_signal=True, with_full_noise=False)
        g_d = dterm(est.sd.h_hat, None, w_d, est.sd.d_hat, 0.0, p.eta_d,
                    with_signal=False, with_full_noise=True)
        g = zeta * g_r + (1.0 - zeta) * g_d
    else:
        raise ValueError("which must be 'r' or 's'")
    g = (2.0 / _LN2) * tw[:, None, None] * g
    return hermitize(g)


def gradient_relay(
    est: EstimateBundle,
    sched: CovarianceSchedule,
    params: SystemParams,
    zeta: float,
    l: int,
    cancellation: bool = True,
) -> np.ndarray:
    """Gradient G_r[l] of the weighted sum-rate w.r.t. Qr[l]."""
    qs, qr = sched.stacks()
    g = _grad_stacks(est, qs, qr, sched.weights, params, zeta, cancellation, "r")
    return g[_check_period(l)]


def gradient_source(
    est: EstimateBundle,
    sched: CovarianceSchedule,
    params: SystemParams,
    zeta: float,
    l: int,
    cancellation: bool = True,
) -> np.ndarray:
    """Gradient G_s[l] of the weighted sum-rate w.r.t. Qs[l]."""
    qs, qr = sched.stacks()
    g = _grad_stacks(est, qs, qr, sched.weights, params, zeta, cancellation, "s")
    return g[_check_period(l)]


# ---------------------------------------------------------------------------
# water-filling projection

def _water_level(eigs, weights, budget=1.0):
    """Smallest mu >= 0 with sum_i w_i max(eig_i - mu, 0) = budget (exact solve)."""
    lam = eigs[(weights > 0) & (eigs > 0)]
    wgt = weights[(weights > 0) & (eigs > 0)]
    if lam.size == 0:
        return 0.0
    order = np.argsort(lam)[::-1]
    lam, wgt = lam[order], wgt[order]
    cw = np.cumsum(wgt)
    cwl = np.cumsum(wgt * lam)
    # on (lam[j+1], lam[j]] the trace is cwl[j] - mu * cw[j], linear in mu
    for j in range(lam.size):
        mu = (cwl[j] - budget) / cw[j]
        lo = lam[j + 1] if j + 1 < lam.size else 0.0
        if lo <= mu <= lam[j]:
            return max(mu, 0.0)
    return 0.0


def _project_stack(p_stack, tw):
    """Project a (2, n, n) Hermitian pair onto the tau-weighted budget set.

    Eigenvalues of both periods are clipped at one shared water level mu, with
    mu = 0 admitted whenever the positive parts already fit the budget.
    """
    w, v = np.linalg.eigh(hermitize(p_stack))
    weights = np.repeat(tw[:, None], w.shape[1], axis=1)
    if float(np.sum(weights * np.clip(w, 0.0, None))) <= 1.0:
        mu = 0.0
    else:
        mu = _water_level(w.ravel(), weights.ravel())
    clipped = np.clip(w - mu, 0.0, None)
    q = (v * clipped[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))
    return hermitize(q)


def project_constraint(p1: np.ndarray, p2: np.ndarray, tau: float):
    """Water-filling projection of a Hermitian pair; returns (q1, q2)."""
    tw = np.array([tau, 1.0 - tau])
    q = _project_stack(np.stack([p1, p2]).astype(complex), tw)
    return q[0], q[1]


# ---------------------------------------------------------------------------
# gradient projection

def _feasible(qs, qr, tw, tol=1e-6) -> bool:
    for q in (qs, qr):
        if float(tw @ np.real(q.diagonal(axis1=-2, axis2=-1).sum(-1))) > 1.0 + tol:
            return False
        if np.linalg.eigvalsh(hermitize(q)).min() < -tol:
            return False
    return True


def _uniform_schedule(params: SystemParams, tau: float) -> CovarianceSchedule:
    """Identity covariances at full budget, same in both periods."""
    qs = np.eye(params.n_s, dtype=complex) / params.n_s
    qr = np.eye(params.n_r, dtype=complex) / params.n_r
    return CovarianceSchedule(q_s=(qs, qs.copy()), q_r=(qr, qr.copy()), tau=tau)


def gp_optimize(
    est: EstimateBundle,
    params: SystemParams,
    zeta: float,
    tau: float,
    init: CovarianceSchedule,
    cfg: GpConfig,
    half_duplex: bool = False,
    tie_periods: bool = False,
    cancellation: bool = True,
    collect_log: bool = False,
) -> OptResult:
    """Gradient projection on the zeta-weighted sum-rate from a feasible start.

    One outer iteration steps the relay pair then the source pair; it stops
    when the largest entrywise change of the quadruple falls below eps_stop.
    Non-convergence within max_outer_iters is flagged, never raised.
    """
    tw = np.array([tau, 1.0 - tau])
    qs, qr = init.stacks()
    if not _feasible(qs, qr, tw):
        raise ValueError("init schedule is infeasible")
    mask_s = np.array([1.0, 0.0]) if half_duplex else np.array([1.0, 1.0])
    mask_r = np.array([0.0, 1.0]) if half_duplex else np.array([1.0, 1.0])
    if half_duplex:
        qs = qs * mask_s[:, None, None]
        qr = qr * mask_r[:, None, None]
    if tie_periods:
        # the tied constraint set is Q[1] = Q[2]; start inside it
        qs = np.broadcast_to(0.5 * (qs[0] + qs[1]), qs.shape).copy()
        qr = np.broadcast_to(0.5 * (qr[0] + qr[1]), qr.shape).copy()

    log: list = []
    f_cur = _weighted_rate(est, qs, qr, tw, params, zeta, cancellation)

    def budget_residual(q):
        budget = float(tw @ np.real(q.diagonal(axis1=-2, axis2=-1).sum(-1)))
        return max(0.0, budget - 1.0)

    def block_step(which, qs, qr, k):
        nonlocal f_cur
        g = _grad_stacks(est, qs, qr, tw, params, zeta, cancellation, which)
        mask = mask_r if which == "r" else mask_s
        g = g * mask[:, None, None]
        q = qr if which == "r" else qs
        if tie_periods:
            step = cfg.s_step * np.broadcast_to(g[0] + g[1], g.shape)
        else:
            step = cfg.s_step * g
        q_tilde = _project_stack(q + step, tw)
        diff = q_tilde - q
        inner = float(np.real(np.sum(np.conj(g) * diff)))

        def log_entry(gamma, f_new, ok, q_acc):
            if collect_log:
                log.append(dict(iter=k, block=which, gamma=gamma, inner=inner,
                                f_before=f_cur, f_after=f_new, armijo_ok=ok,
                                budget_residual=budget_residual(q_acc)))

        if inner <= 1e-14:
            log_entry(0.0, f_cur, True, q)
            return qs, qr, 0.0
        gamma, accepted, f_new = 0.0, False, f_cur
        for m in range(40):
            gamma = cfg.nu ** m
            q_cand = q + gamma * diff
            if which == "r":
                f_new = _weighted_rate(est, qs, q_cand, tw, params, zeta, cancellation)
            else:
                f_new = _weighted_rate(est, q_cand, qr, tw, params, zeta, cancellation)
            if f_new - f_cur >= cfg.sigma * gamma * inner:
                accepted = True
                break
        if not accepted:
            log_entry(0.0, f_cur, False, q)
            return qs, qr, 0.0
        q_new = q + gamma * diff
        log_entry(gamma, f_new, True, q_new)
        f_cur = f_new
        if which == "r":
            return qs, q_new, float(np.abs(gamma * diff).max())
        return q_new, qr, float(np.abs(gamma * diff).max())

    converged = False
    iters = 0
    for k in range(cfg.max_outer_iters):
        iters = k + 1
        qs, qr, d_r = block_step("r", qs, qr, k)
        qs, qr, d_s = block_step("s", qs, qr, k)
        if max(d_r, d_s) < cfg.eps_stop:
            converged = True
            break

    sched = CovarianceSchedule(q_s=(qs[0], qs[1]), q_r=(qr[0], qr[1]), tau=tau)
    report = end_to_end_rate(est, sched, params, "lower", cancellation)
    return OptResult(sched=sched, zeta=zeta, rate=report, tau_star=tau,
                     iterations=iters, converged=converged, log=log)


# ---------------------------------------------------------------------------
# scheme construction

def ohd_schedule(
    est: EstimateBundle, params: SystemParams, tau: float, cfg: GpConfig,
    collect_log: bool = False,
) -> OptResult:
    """Optimized half-duplex: maximize the zeta=1/2 sum-rate with Qs[2]=Qr[1]=0."""
    if not 0.0 < tau < 1.0:
        raise ValueError("OHD needs tau strictly inside (0, 1)")
    qs1 = np.eye(params.n_s, dtype=complex) / (params.n_s * tau)
    qr2 = np.eye(params.n_r, dtype=complex) / (params.n_r * (1.0 - tau))
    zs = np.zeros_like(qs1)
    zr = np.zeros_like(qr2)
    init = CovarianceSchedule(q_s=(qs1, zs), q_r=(zr, qr2), tau=tau)
    return gp_optimize(est, params, 0.5, tau, init, cfg,
                       half_duplex=True, collect_log=collect_log)


def nfd_schedule(ohd: CovarianceSchedule) -> CovarianceSchedule:
    """Naive full-duplex: OHD's active covariances reused in both periods.

    Rescaled onto the tau-weighted budget so the GP start stays feasible.
    """
    def scaled(q):
        tr = float(np.real(np.trace(q)))
        return q / tr if tr > 0 else q

    qs = scaled(ohd.q_s[0])
    qr = scaled(ohd.q_r[1])
    return CovarianceSchedule(q_s=(qs, qs.copy()), q_r=(qr, qr.copy()), tau=ohd.tau)


def _tie(sched: CovarianceSchedule) -> CovarianceSchedule:
    """Average the two periods (feasible: budget is convex)."""
    qs = hermitize(0.5 * (sched.q_s[0] + sched.q_s[1]))
    qr = hermitize(0.5 * (sched.q_r[0] + sched.q_r[1]))
    return CovarianceSchedule(q_s=(qs, qs.copy()), q_r=(qr, qr.copy()), tau=sched.tau)


def bisect_zeta(
    est: EstimateBundle,
    params: SystemParams,
    tau: float,
    cfg: GpConfig,
    inits=None,
    tie_periods: bool = False,
    cancellation: bool = True,
    gap_tol: float = 1e-2,
    max_iters: int = 30,
) -> OptResult:
    """Bisection on zeta toward a link-equalizing weighted-sum-rate solution.

    At each midpoint the weighted problem is solved from every init and the
    best min-rate run is retained; the interval shrinks toward larger zeta
    when I_rd > I_sr at the midpoint. When no equalizing zeta exists the
    search collapses toward zeta = 0. Returns the best min-rate schedule seen
    (the starting schedules themselves are candidates).
    """
    if inits is None:
        ohd = ohd_schedule(est, params, tau, cfg)
        inits = [ohd.sched, nfd_schedule(ohd.sched)]
    tw = np.array([tau, 1.0 - tau])

    best: OptResult | None = None
    total_iters = 0
    for sched in inits:
        report = end_to_end_rate(est, sched, params, "lower", cancellation)
        cand = OptResult(sched=sched, zeta=0.5, rate=report, tau_star=tau,
                         iterations=0, converged=True)
        if best is None or cand.min_rate > best.min_rate:
            best = cand

    lo, hi = 0.0, 1.0
    for _ in range(max_iters):
        zeta = 0.5 * (lo + hi)
        retained = None
        for sched in inits:
            res = gp_optimize(est, params, zeta, tau, sched, cfg,
                              tie_periods=tie_periods, cancellation=cancellation)
            total_iters += res.iterations
            if retained is None or res.min_rate > retained.min_rate:
                retained = res
        if retained.min_rate > best.min_rate:
            best = retained
        i_sr_sum = float(tw @ np.array(retained.rate.i_sr))
        i_rd_sum = float(tw @ np.array(retained.rate.i_rd))
        if abs(i_rd_sum - i_sr_sum) < gap_tol:
            break
        if i_rd_sum > i_sr_sum:
            lo = zeta
        else:
            hi = zeta
    best.iterations = total_iters
    return best


def optimize_scheme(
    est: EstimateBundle,
    params: SystemParams,
    scheme: SchemeId,
    tau_grid,
    cfg: GpConfig,
) -> OptResult:
    """Run one scheme over the tau grid and keep the best min-rate result.

    Rate ties across tau are broken toward tau = 0.5. TCO-1-IC is
    tau-invariant (tied periods collapse every tau-weighted sum), so it runs
    once at tau = 0.5.
    """
    scheme = SchemeId(scheme)
    taus = [0.5] if scheme is SchemeId.TCO_1_IC else list(tau_grid)
    best = None
    for tau in taus:
        ohd = ohd_schedule(est, params, tau, cfg)
        if scheme is SchemeId.OHD:
            cand = ohd
        elif scheme is SchemeId.NFD:
            sched = nfd_schedule(ohd.sched)
            cand = OptResult(sched=sched, zeta=0.5,
                             rate=end_to_end_rate(est, sched, params, "lower"),
                             tau_star=tau, iterations=ohd.iterations,
                             converged=ohd.converged)
        elif scheme is SchemeId.TCO_1_IC:
            nfd = nfd_schedule(ohd.sched)
            inits = [_tie(nfd), _uniform_schedule(params, tau)]
            cand = bisect_zeta(est, params, tau, cfg, inits=inits, tie_periods=True)
        else:
            cancellation = scheme is not SchemeId.TCO_2
            inits = [ohd.sched, nfd_schedule(ohd.sched)]
            cand = bisect_zeta(est, params, tau, cfg, inits=inits,
                               cancellation=cancellation)
        cand.tau_star = tau
        if best is None or cand.min_rate > best.min_rate + 1e-12 or (
            abs(cand.min_rate - best.min_rate) <= 1e-12
            and abs(tau - 0.5) < abs(best.tau_star - 0.5)
        ):
            best = cand
    return best
