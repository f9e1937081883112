import numpy as np
import pytest

from fdrelay import (
    CovarianceSchedule,
    GpConfig,
    SchemeId,
    SystemParams,
    bisect_zeta,
    draw_channels,
    end_to_end_rate,
    estimate_links,
    gp_optimize,
    gradient_relay,
    gradient_source,
    nfd_schedule,
    ohd_schedule,
    optimize_scheme,
    project_constraint,
    weighted_sum_rate,
)
from fdrelay.optimizer import _uniform_schedule

from oracles import fd_gradient, perfect_bundle, rand_psd, wf_capacity


def params(**kw):
    base = dict(rho_r=31.6228, rho_d=15.8114, eta_r=100.0, eta_d=1.0,
                kappa=1e-3, beta=1e-3, n_s=3, n_r=3, m_r=4, m_d=4, train_len=5)
    base.update(kw)
    return SystemParams(**base)


def random_case(seed, tau=0.5, **kw):
    p = params(**kw)
    ch = draw_channels(p, seed)
    est = estimate_links(ch, p, seed, key=(0,))
    rng = np.random.default_rng(seed + 77)
    sched = CovarianceSchedule(
        q_s=(rand_psd(rng, p.n_s, 0.8 / tau if tau else 1.0), rand_psd(rng, p.n_s, 0.1)),
        q_r=(rand_psd(rng, p.n_r, 0.5), rand_psd(rng, p.n_r, 0.9)),
        tau=tau,
    )
    return p, est, sched


def ideal_bundle(seed, p):
    return perfect_bundle(draw_channels(p, seed), p)


class TestWeightedSumRate:
    def test_endpoints_and_linearity(self):
        p, est, sched = random_case(0)
        rep = end_to_end_rate(est, sched, p)
        w = sched.weights
        isr = float(w @ np.array(rep.i_sr))
        ird = float(w @ np.array(rep.i_rd))
        assert weighted_sum_rate(est, sched, p, 1.0) == pytest.approx(isr, abs=1e-12)
        assert weighted_sum_rate(est, sched, p, 0.0) == pytest.approx(ird, abs=1e-12)
        assert weighted_sum_rate(est, sched, p, 0.5) == pytest.approx(0.5 * (isr + ird), abs=1e-12)


class TestGradients:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_differences(self, seed):
        p, est, sched = random_case(seed, tau=0.4)
        zeta = 0.37
        for which, grad in (("r", gradient_relay), ("s", gradient_source)):
            for l in (1, 2):
                ga = grad(est, sched, p, zeta, l)
                gn = fd_gradient(est, sched, p, zeta, which, l)
                assert np.abs(ga - gn).max() / np.abs(ga).max() < 1e-5

    def test_matches_finite_differences_no_cancellation(self):
        p, est, sched = random_case(5, tau=0.6)
        ga = gradient_relay(est, sched, p, 0.5, 1, cancellation=False)
        gn = fd_gradient(est, sched, p, 0.5, "r", 1, cancellation=False)
        assert np.abs(ga - gn).max() / np.abs(ga).max() < 1e-5

    def test_ideal_closed_form_relay(self):
        # kappa = beta = 0, perfect CSI, zeta = 0: only the rd signal term remains
        p = params(kappa=0.0, beta=0.0, eta_r=0.0, eta_d=0.0)
        est = ideal_bundle(3, p)
        _, _, sched = random_case(3, tau=0.4, kappa=0.0, beta=0.0, eta_r=0.0, eta_d=0.0)
        for l, tau_l in ((1, 0.4), (2, 0.6)):
            g = gradient_relay(est, sched, p, 0.0, l)
            s_d = p.rho_d * est.rd.h_hat @ sched.q_r[l - 1] @ est.rd.h_hat.conj().T + np.eye(p.m_d)
            expect = 2 * tau_l * p.rho_d / np.log(2) * est.rd.h_hat.conj().T @ np.linalg.inv(s_d) @ est.rd.h_hat
            assert np.abs(g - expect).max() < 1e-9

    def test_ideal_closed_form_source(self):
        p = params(kappa=0.0, beta=0.0, eta_r=0.0, eta_d=0.0)
        est = ideal_bundle(4, p)
        _, _, sched = random_case(4, tau=0.3, kappa=0.0, beta=0.0, eta_r=0.0, eta_d=0.0)
        g = gradient_source(est, sched, p, 1.0, 1)
        s_r = p.rho_r * est.sr.h_hat @ sched.q_s[0] @ est.sr.h_hat.conj().T + np.eye(p.m_r)
        expect = 2 * 0.3 * p.rho_r / np.log(2) * est.sr.h_hat.conj().T @ np.linalg.inv(s_r) @ est.sr.h_hat
        assert np.abs(g - expect).max() < 1e-9

    def test_source_gradient_vanishes_when_decoupled(self):
        # eta_d = 0 and zeta = 0: the destination rate does not depend on Q_s
        p = params(eta_d=0.0)
        est = ideal_bundle(6, p)
        _, _, sched = random_case(6, eta_d=0.0)
        for l in (1, 2):
            assert np.abs(gradient_source(est, sched, p, 0.0, l)).max() < 1e-14

    def test_zero_tau_period(self):
        p, est, _ = random_case(7, tau=0.5)
        rng = np.random.default_rng(0)
        sched = CovarianceSchedule(
            q_s=(rand_psd(rng, p.n_s, 0.9), rand_psd(rng, p.n_s, 0.5)),
            q_r=(rand_psd(rng, p.n_r, 0.9), rand_psd(rng, p.n_r, 0.5)),
            tau=1.0,
        )
        assert np.abs(gradient_relay(est, sched, p, 0.5, 2)).max() == 0.0
        assert np.abs(gradient_source(est, sched, p, 0.5, 2)).max() == 0.0


class TestProjection:
    def test_hand_solved_case(self):
        q1, q2 = project_constraint(np.diag([3.0, 1.0]).astype(complex),
                                    np.zeros((2, 2), complex), tau=1.0)
        assert np.allclose(q1, np.diag([1.0, 0.0]))
        assert np.abs(q2).max() == 0.0

    def test_interior_point_unchanged(self):
        rng = np.random.default_rng(0)
        p1 = rand_psd(rng, 3, 0.3)
        p2 = rand_psd(rng, 3, 0.2)
        q1, q2 = project_constraint(p1, p2, tau=0.5)
        assert np.abs(q1 - p1).max() < 1e-12
        assert np.abs(q2 - p2).max() < 1e-12

    def test_negative_definite_clips_to_zero(self):
        q1, q2 = project_constraint(-np.eye(3, dtype=complex), -2 * np.eye(3, dtype=complex), 0.5)
        assert np.abs(q1).max() == 0.0 and np.abs(q2).max() == 0.0

    @pytest.mark.parametrize("seed", range(6))
    def test_feasibility_and_idempotence(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        p1, p2 = (a + a.conj().T) * 2, (b + b.conj().T) * 2
        tau = rng.uniform(0.1, 0.9)
        q1, q2 = project_constraint(p1, p2, tau)
        tw = np.array([tau, 1 - tau])
        for q in (q1, q2):
            assert np.linalg.eigvalsh(q).min() >= -1e-10
        budget = tw[0] * np.trace(q1).real + tw[1] * np.trace(q2).real
        assert budget <= 1.0 + 1e-9
        # when the water level is active the budget is met with equality
        raw = sum(w * np.clip(np.linalg.eigvalsh(p), 0, None).sum()
                  for w, p in zip(tw, (p1, p2)))
        if raw > 1.0:
            assert abs(budget - 1.0) < 1e-9
        r1, r2 = project_constraint(q1, q2, tau)
        assert np.abs(r1 - q1).max() < 1e-10
        assert np.abs(r2 - q2).max() < 1e-10


class TestGpOptimize:
    def wf_setup(self, seed):
        p = params(kappa=0.0, beta=0.0, eta_r=0.0, eta_d=0.0, rho_r=10.0, rho_d=5.0)
        ch = draw_channels(p, seed)
        return p, perfect_bundle(ch, p), ch

    def test_reaches_water_filling_capacity(self):
        for seed in (0, 1):
            p, est, ch = self.wf_setup(seed)
            cfg = GpConfig(eps_stop=1e-5, max_outer_iters=3000)
            res = gp_optimize(est, p, zeta=1.0, tau=0.5, init=_uniform_schedule(p, 0.5), cfg=cfg)
            got = float(res.sched.weights @ np.array(res.rate.i_sr))
            assert abs(got - wf_capacity(ch.h_sr, p.rho_r)) < 1e-3

    def test_fixed_point_terminates_immediately(self):
        p, est, ch = self.wf_setup(2)
        # closed-form water-filling solution as the initial schedule
        lam, v = np.linalg.eigh(ch.h_sr.conj().T @ ch.h_sr)
        lam, v = lam[::-1], v[:, ::-1]
        for k in range(len(lam), 0, -1):
            mu = (1.0 + np.sum(1.0 / (p.rho_r * lam[:k]))) / k
            pw = mu - 1.0 / (p.rho_r * lam[:k])
            if pw.min() > 0:
                break
        q = (v[:, :k] * pw) @ v[:, :k].conj().T
        init = CovarianceSchedule(q_s=(q, q.copy()), q_r=(q * 0, q * 0), tau=0.5)
        f0 = weighted_sum_rate(est, init, p, 1.0)
        res = gp_optimize(est, p, 1.0, 0.5, init, GpConfig())
        assert res.iterations <= 2
        assert abs(weighted_sum_rate(est, res.sched, p, 1.0) - f0) < 1e-6

    def test_armijo_inequality_every_accepted_step(self):
        p, est, _ = random_case(9)
        cfg = GpConfig(max_outer_iters=60)
        res = gp_optimize(est, p, 0.5, 0.5, _uniform_schedule(p, 0.5), cfg, collect_log=True)
        assert res.log, "expected a populated iteration log"
        for entry in res.log:
            if entry["gamma"] > 0:
                gain = entry["f_after"] - entry["f_before"]
                assert gain >= cfg.sigma * entry["gamma"] * entry["inner"] - 1e-12
            assert entry["budget_residual"] <= 1e-9

    def test_non_convergence_flagged_not_raised(self):
        p, est, _ = random_case(13)
        res = gp_optimize(est, p, 0.5, 0.5, _uniform_schedule(p, 0.5),
                          GpConfig(max_outer_iters=1, eps_stop=1e-9))
        assert res.converged is False
        assert res.iterations == 1

    def test_objective_monotone_across_steps(self):
        p, est, _ = random_case(10)
        res = gp_optimize(est, p, 0.3, 0.5, _uniform_schedule(p, 0.5),
                          GpConfig(max_outer_iters=60), collect_log=True)
        fs = [e["f_before"] for e in res.log] + [res.log[-1]["f_after"]]
        assert all(b >= a - 1e-12 for a, b in zip(fs, fs[1:]))

    def test_infeasible_init_rejected(self):
        p, est, _ = random_case(11)
        q = np.eye(p.n_s, dtype=complex)  # trace 3 per period
        bad = CovarianceSchedule.__new__(CovarianceSchedule)
        object.__setattr__(bad, "q_s", (q, q))
        object.__setattr__(bad, "q_r", (q, q))
        object.__setattr__(bad, "tau", 0.5)
        with pytest.raises(ValueError):
            gp_optimize(est, p, 0.5, 0.5, bad, GpConfig())

    def test_result_schedule_feasible(self):
        p, est, _ = random_case(12)
        res = gp_optimize(est, p, 0.5, 0.4, _uniform_schedule(p, 0.4), GpConfig())
        w = res.sched.weights
        for pair in (res.sched.q_s, res.sched.q_r):
            budget = sum(wl * np.trace(q).real for wl, q in zip(w, pair))
            assert budget <= 1.0 + 1e-9
            for q in pair:
                assert np.linalg.eigvalsh(q).min() >= -1e-10


class TestGpConfig:
    def test_parameter_ranges(self):
        with pytest.raises(ValueError):
            GpConfig(sigma=0.5)
        with pytest.raises(ValueError):
            GpConfig(nu=0.05)


class TestBisectZeta:
    def test_symmetric_links_equalize_near_half(self):
        p = params(rho_r=10.0, rho_d=10.0, eta_r=0.0, eta_d=0.0, kappa=0.0, beta=0.0)
        ch = draw_channels(p, 21)
        # force identical source-relay and relay-destination channels
        ch = type(ch)(h_sr=ch.h_sr, h_rr=ch.h_rr, h_rd=ch.h_sr.copy(), h_sd=ch.h_sd)
        est = perfect_bundle(ch, p)
        res = bisect_zeta(est, p, tau=0.5, cfg=GpConfig())
        w = res.sched.weights
        gap = abs(float(w @ np.array(res.rate.i_sr)) - float(w @ np.array(res.rate.i_rd)))
        assert gap < 1e-2
        assert 0.3 < res.zeta < 0.7

    def test_unbalanced_links_drive_zeta_to_zero(self):
        p = params(rho_r=1000.0, rho_d=1.0, eta_r=0.0, eta_d=0.0, kappa=0.0, beta=0.0)
        est = perfect_bundle(draw_channels(p, 22), p)
        res = bisect_zeta(est, p, tau=0.5, cfg=GpConfig())
        w = res.sched.weights
        isr = float(w @ np.array(res.rate.i_sr))
        ird = float(w @ np.array(res.rate.i_rd))
        assert isr > ird
        assert res.zeta <= 0.1

    def test_respects_iteration_cap(self):
        p, est, _ = random_case(24)
        res = bisect_zeta(est, p, tau=0.5, cfg=GpConfig(), max_iters=2)
        # two bisection levels only visit zeta in {1/2, 1/4, 3/4}
        assert res.zeta in (0.5, 0.25, 0.75)

    def test_sr_rate_non_decreasing_in_zeta(self):
        p, est, _ = random_case(23)
        ohd = ohd_schedule(est, p, 0.5, GpConfig())
        inits = [ohd.sched, nfd_schedule(ohd.sched)]
        rates = []
        for zeta in np.arange(0.1, 0.95, 0.1):
            best = None
            for init in inits:
                r = gp_optimize(est, p, float(zeta), 0.5, init, GpConfig())
                if best is None or r.min_rate > best.min_rate:
                    best = r
            rates.append(float(best.sched.weights @ np.array(best.rate.i_sr)))
        assert all(b >= a - 1e-2 for a, b in zip(rates, rates[1:]))


class TestSchemes:
    def test_ohd_invariant_to_eta_r(self):
        vals = []
        for eta_db in (0.0, 100.0):
            p = params(eta_r=10 ** (eta_db / 10), kappa=1e-4, beta=1e-4, train_len=50)
            ch = draw_channels(p, 31)
            est = estimate_links(ch, p, 31, key=(0,))
            vals.append(optimize_scheme(est, p, SchemeId.OHD, [0.3, 0.5, 0.7], GpConfig()).min_rate)
        assert vals[0] == vals[1]

    def test_ohd_pins_silent_periods(self):
        p, est, _ = random_case(39)
        res = optimize_scheme(est, p, SchemeId.OHD, [0.4], GpConfig())
        assert np.abs(res.sched.q_s[1]).max() == 0.0
        assert np.abs(res.sched.q_r[0]).max() == 0.0
        assert np.real(np.trace(res.sched.q_s[0])) > 0.0
        assert np.real(np.trace(res.sched.q_r[1])) > 0.0

    def test_tco2ic_at_least_ohd(self):
        for seed in (32, 33):
            p = params(kappa=1e-4, beta=1e-4, eta_r=1e4, train_len=50)
            ch = draw_channels(p, seed)
            est = estimate_links(ch, p, seed, key=(0,))
            cfg = GpConfig()
            tco = optimize_scheme(est, p, SchemeId.TCO_2_IC, [0.5], cfg)
            ohd = optimize_scheme(est, p, SchemeId.OHD, [0.5], cfg)
            assert tco.min_rate >= ohd.min_rate - 1e-3

    def test_no_interference_matches_nfd_initialized_run(self):
        # with eta_r = eta_d = 0 and ideal hardware, full duplex is optimal and
        # the NFD-initialized GP solve attains the TCO-2-IC rate
        p = params(kappa=0.0, beta=0.0, eta_r=0.0, eta_d=0.0)
        est = perfect_bundle(draw_channels(p, 34), p)
        cfg = GpConfig()
        tco = optimize_scheme(est, p, SchemeId.TCO_2_IC, [0.5], cfg)
        ohd = ohd_schedule(est, p, 0.5, cfg)
        nfd_run = bisect_zeta(est, p, 0.5, cfg, inits=[nfd_schedule(ohd.sched)])
        assert abs(tco.min_rate - nfd_run.min_rate) < 5e-2
        assert tco.min_rate >= nfd_run.min_rate - 1e-9

    def test_scheme_accepts_string_names(self):
        p, est, _ = random_case(36)
        res = optimize_scheme(est, p, "OHD", [0.5], GpConfig())
        assert res.min_rate > 0

    def test_nfd_schedule_feasible_and_full_duplex(self):
        p, est, _ = random_case(37)
        ohd = ohd_schedule(est, p, 0.4, GpConfig())
        nfd = nfd_schedule(ohd.sched)
        w = nfd.weights
        for pair in (nfd.q_s, nfd.q_r):
            assert np.abs(pair[0] - pair[1]).max() < 1e-15
            budget = sum(wl * np.trace(q).real for wl, q in zip(w, pair))
            assert budget <= 1.0 + 1e-9
        assert np.abs(nfd.q_s[0]).max() > 0
        assert np.abs(nfd.q_r[0]).max() > 0

    def test_tco1ic_ties_periods(self):
        p, est, _ = random_case(38)
        res = optimize_scheme(est, p, SchemeId.TCO_1_IC, [0.3, 0.5], GpConfig())
        assert np.abs(res.sched.q_s[0] - res.sched.q_s[1]).max() < 1e-12
        assert np.abs(res.sched.q_r[0] - res.sched.q_r[1]).max() < 1e-12
