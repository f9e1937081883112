"""How training length drives channel-estimation quality.

Draws one set of links, simulates pilot-aided LS estimation at several
training lengths, and compares the empirical estimation-error energy with
the closed-form error covariance, which shrinks like 1/T.
"""

import numpy as np

from fdrelay import SystemParams, build_pilot, draw_channels, estimation_error_cov, ls_estimate, simulate_training

params = SystemParams(rho_r=10 ** 1.5, rho_d=10 ** 1.5 / 2, eta_r=1e3, eta_d=1.0,
                      kappa=1e-4, beta=1e-4, n_s=3, n_r=3, m_r=4, m_d=4)
channels = draw_channels(params, seed=1)
h = channels.h_sr
alpha = params.rho_r

print(f"source-relay link: {h.shape[0]}x{h.shape[1]}, SNR {10*np.log10(alpha):.0f} dB")
print(f"{'T':>6} {'empirical err^2':>16} {'predicted tr(D)':>16}")
for t in (1, 2, 5, 10, 50):
    pilot = build_pilot(params.n_s, t)
    err_sq = 0.0
    n_trials = 400
    for k in range(n_trials):
        y = simulate_training(h, alpha, pilot, params.kappa, params.beta, seed=k, key=(t,))
        h_hat = ls_estimate(y, pilot, alpha)
        err_sq += alpha * np.sum(np.abs(h_hat - h) ** 2)
    d = estimation_error_cov(h, alpha, params.kappa, params.beta, t)
    # error columns are i.i.d. with covariance D, so E ||err||^2 = N tr(D)
    print(f"{t:>6} {err_sq / n_trials:>16.4f} {params.n_s * np.real(np.trace(d)):>16.4f}")
