"""Where full-duplex relaying stops paying off.

Prints the closed-form rate approximation across self-interference levels,
the duplex mode it selects, and the critical INR below which full-duplex is
always optimal. No Monte-Carlo involved; everything here is analytic.
"""

import math

from fdrelay import RegimeParams, approx_rate, approx_rate_fd, approx_rate_hd, duplex_boundary

rho_r = 10 ** 1.5  # 15 dB, with rho_d = rho_r / 2

print("N=3, M=4, 40 dB dynamic range, rho_r = 15 dB")
print(f"{'eta_r dB':>9} {'full':>8} {'half':>8} {'approx':>8} {'mode':>6}")
for eta_db in range(0, 81, 10):
    p = RegimeParams(n=3, m=4, rho_r=rho_r, rho_d=rho_r / 2,
                     eta_r=10 ** (eta_db / 10), kappa=1e-4, beta=1e-4)
    rate, mode = approx_rate(p)
    print(f"{eta_db:>9} {approx_rate_fd(p):>8.3f} {approx_rate_hd(p):>8.3f} "
          f"{rate:>8.3f} {mode:>6}")

p = RegimeParams(n=3, m=4, rho_r=rho_r, rho_d=rho_r / 2, eta_r=1.0,
                 kappa=1e-4, beta=1e-4)
eta_crit = (p.rho_r / p.rho_d - 1.0) * p.theta
print(f"\nduplex switch at eta_r = {10*math.log10(duplex_boundary(p)):.1f} dB")
print(f"below eta_crit = {10*math.log10(eta_crit):.1f} dB the rate is "
      "relay-to-destination limited (invariant to rho_r and eta_r)")
