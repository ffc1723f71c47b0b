#!/usr/bin/env python3
"""Recompute every frozen reference value used by the Rust test suites.

Pure stdlib arithmetic with no project code: this file is the independent
oracle that the constants in the tests were frozen against. Run it whenever
a frozen constant changes; it prints the full table and exits nonzero if any
internal consistency check fails.

Usage:
    python3 scripts/check_values.py           # print table + run checks
    python3 scripts/check_values.py --emit-rust  # print a Rust const block
"""

import math
import sys

# Reference system parameters (silicon-chip transmitter testbed defaults).
E_D = 0.015        # misalignment error probability
Y0 = 2e-5          # background yield per pulse
ETA_BOB = 0.2      # receiver transmittance including detector efficiency
ALPHA = 0.2        # fiber loss, dB/km
E0 = 0.5           # background error rate


def h2(x):
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def pdl_loss_factor(pdl_db):
    return 10.0 ** (-pdl_db / 10.0)


def eta_sys(d_km, eta_bob=ETA_BOB, alpha=ALPHA):
    return eta_bob * 10.0 ** (-alpha * d_km / 10.0)


def poisson_pmf(mu, i):
    if mu == 0.0:
        return 1.0 if i == 0 else 0.0
    p = math.exp(-mu)
    for k in range(1, i + 1):
        p *= mu / k
    return p


def plasma_shift(d_ne, d_nh):
    dn = -(8.8e-22 * d_ne + 8.5e-18 * d_nh ** 0.8)
    da = 8.5e-18 * d_ne + 6.0e-18 * d_nh
    return dn, da


def yield_i(i, eta, y0=Y0):
    return 1.0 - (1.0 - y0) * (1.0 - eta) ** i


def gain(mu, eta, y0=Y0):
    return 1.0 - (1.0 - y0) * math.exp(-mu * eta)


def error_i(yi, y0=Y0, e_d=E_D, e0=E0):
    return (y0 * e0 + (yi - y0) * e_d) / yi


def qber(mu, eta, y0=Y0, e_d=E_D, e0=E0):
    return (y0 * (e0 - e_d) + e_d * (1.0 - (1.0 - y0) * math.exp(-mu * eta))) / gain(mu, eta, y0)


def heuristic_p(mu_sv, loss):
    return min(1.0, loss * math.exp((1.0 - loss) * mu_sv))


def substituted(loss, mu_s, p_sel, eta):
    """Post-selected single-photon gain, phase error, and signal gain/error-gain."""
    mu_v_pol, mu_h_pol = mu_s, loss * mu_s
    y1 = yield_i(1, eta)
    e1 = error_i(y1)
    q1 = min(mu_h_pol * math.exp(-mu_h_pol), p_sel * mu_v_pol * math.exp(-mu_v_pol)) * y1
    qh, qv = gain(mu_h_pol, eta), gain(mu_v_pol, eta)
    eh, ev = qber(mu_h_pol, eta), qber(mu_v_pol, eta)
    qs = 0.5 * qh + 0.5 * p_sel * qv
    qs_es = 0.5 * qh * eh + 0.5 * p_sel * qv * ev
    return q1, y1, e1, qs, qs_es


def key_rate(loss, mu_s, p_sel, eta, q, f):
    q1, _, e1, qs, qs_es = substituted(loss, mu_s, p_sel, eta)
    if qs <= 0.0:
        return 0.0
    es = qs_es / qs
    return max(0.0, q * (q1 * (1.0 - h2(e1)) - qs * f * h2(es)))


def approx_key_rate(mu_s, loss, p_sel, eta, e_d, f):
    return (eta * loss * mu_s * math.exp(-loss * mu_s) * (1.0 - h2(e_d))
            - (0.5 * p_sel * eta * mu_s + 0.5 * eta * loss * mu_s) * f * h2(e_d))


def mu_residual(mu, loss, e_d, f):
    hh = h2(e_d)
    lhs = (1.0 - hh) * (loss * math.exp(-loss * mu) - loss * loss * mu * math.exp(-loss * mu))
    rhs = 0.5 * f * hh * (loss + loss * math.exp((1.0 - loss) * mu)
                          + loss * mu * math.exp((1.0 - loss) * mu) * (1.0 - loss))
    return lhs - rhs


def solve_mu(loss, e_d, f, lo=1e-6, hi=5.0):
    flo = mu_residual(lo, loss, e_d, f)
    if flo * mu_residual(hi, loss, e_d, f) > 0.0:
        raise ValueError("no sign change")
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if flo * mu_residual(mid, loss, e_d, f) <= 0.0:
            hi = mid
        else:
            lo = mid
            flo = mu_residual(lo, loss, e_d, f)
    return 0.5 * (lo + hi)


def y1_lower(q_s, q_v, y0_l, mu_s, mu_v):
    v = (mu_s / (mu_s * mu_v - mu_v * mu_v)) * (
        q_v * math.exp(mu_v)
        - q_s * math.exp(mu_s) * (mu_v * mu_v) / (mu_s * mu_s)
        - ((mu_s * mu_s - mu_v * mu_v) / (mu_s * mu_s)) * y0_l)
    return min(max(v, 0.0), 1.0)


def e1y1_upper(q_v, e_v, y0_l, e0, mu_v):
    return min(max((e_v * q_v * math.exp(mu_v) - e0 * y0_l) / mu_v, 0.0), 1.0)


def per_pol_bounds(d_km, pdl_db, mu_s, mu_v):
    """Per-polarization two-decoy bounds using each polarization's own intensities."""
    loss = pdl_loss_factor(pdl_db)
    eta = eta_sys(d_km)
    out = {}
    for pol, scale in (("H", loss), ("V", 1.0), ("D", loss), ("A", 1.0)):
        ms, mv = scale * mu_s, scale * mu_v
        out[pol] = (y1_lower(gain(ms, eta), gain(mv, eta), Y0, ms, mv),
                    e1y1_upper(gain(mv, eta), qber(mv, eta), Y0, E0, mv))
    y1c = 0.5 * (out["H"][0] + out["V"][0])
    den = out["D"][0] + out["A"][0]
    e1p = (out["D"][1] + out["A"][1]) / den if den > 0.0 else None
    return out, y1c, e1p


def two_decoy_rate(d_km, pdl_db, mu_s, mu_v, p_sel, q, f):
    loss = pdl_loss_factor(pdl_db)
    eta = eta_sys(d_km)
    _, y1c, e1p = per_pol_bounds(d_km, pdl_db, mu_s, mu_v)
    if e1p is None:
        return 0.0
    mu_h = loss * mu_s
    q1 = min(mu_h * math.exp(-mu_h), p_sel * mu_s * math.exp(-mu_s)) * y1c
    qh, qv = gain(mu_h, eta), gain(mu_s, eta)
    qs = 0.5 * qh + 0.5 * p_sel * qv
    es = (0.5 * qh * qber(mu_h, eta) + 0.5 * p_sel * qv * qber(mu_s, eta)) / qs
    return max(0.0, q * (q1 * (1.0 - h2(min(e1p, 0.5))) - qs * f * h2(es)))


def hoeffding(x, eps):
    return math.sqrt(x / 2.0 * math.log(1.0 / eps)) if x > 0.0 else 0.0


def interval(x, pulses, eps):
    d = hoeffding(x, eps)
    return max(0.0, x - d), min(float(pulses), x + d)


def finite_key(d_km, pdl_db, n_pulses, mu_s, mu_v, p_sig, p_dec, f, eps):
    """Deterministic expected-count finite-key evaluation; returns (s1L, e1U, rate)."""
    loss = pdl_loss_factor(pdl_db)
    eta = eta_sys(d_km)
    p_sel = heuristic_p(mu_s, loss)
    n_set = {"s": round(p_sig * n_pulses), "v": round(p_dec * n_pulses),
             "w": round((1.0 - p_sig - p_dec) * n_pulses)}
    pulses = {}
    for n, nn in n_set.items():
        base = nn // 4
        for pol in "HVDA":
            pulses[(n, pol)] = base + (nn - 4 * base if pol == "H" else 0)
    pulses[("s", "V")] = math.floor(p_sel * n_set["s"] / 4.0)
    mus = {}
    for pol, scale in (("H", loss), ("V", 1.0), ("D", loss), ("A", 1.0)):
        mus[("s", pol)] = scale * mu_s
        mus[("v", pol)] = scale * mu_v
        mus[("w", pol)] = 0.0
    det = {k: gain(mus[k], eta) * pulses[k] for k in pulses}
    err = {k: det[k] * (qber(mus[k], eta) if mus[k] > 0.0 else E0) for k in pulses}

    def y1l_worst(pol):
        best = None
        ws = [interval(det[(n, pol)], pulses[(n, pol)], eps) for n in ("s", "v", "w")]
        for qs_end in ws[0]:
            for qv_end in ws[1]:
                for y0_end in ws[2]:
                    v = y1_lower(qs_end / pulses[("s", pol)], qv_end / pulses[("v", pol)],
                                 y0_end / pulses[("w", pol)], mus[("s", pol)], mus[("v", pol)])
                    best = v if best is None else min(best, v)
        return best

    def e1y1u_worst(pol):
        y0_lo = interval(det[("w", pol)], pulses[("w", pol)], eps)[0] / pulses[("w", pol)]
        eq_hi = interval(err[("v", pol)], pulses[("v", pol)], eps)[1] / pulses[("v", pol)]
        return min(max((eq_hi * math.exp(mus[("v", pol)]) - E0 * y0_lo) / mus[("v", pol)], 0.0), 1.0)

    mu_h = loss * mu_s
    m = min(mu_h * math.exp(-mu_h), p_sel * mu_s * math.exp(-mu_s))
    s1 = m * y1l_worst("H") * pulses[("s", "H")] + (m / p_sel) * y1l_worst("V") * pulses[("s", "V")]
    den = y1l_worst("D") + y1l_worst("A")
    e1u = min((e1y1u_worst("D") + e1y1u_worst("A")) / den, 0.5) if den > 0.0 else None
    if e1u is None or s1 <= 0.0:
        return s1, e1u, 0.0
    n_z = det[("s", "H")] + det[("s", "V")]
    e_z = (err[("s", "H")] + err[("s", "V")]) / n_z
    lam = f * n_z * h2(e_z)
    raw = s1 * (1.0 - h2(e1u)) - lam - 6.0 * math.log2(21.0 / eps) - math.log2(2.0 / eps)
    return s1, e1u, max(0.0, math.floor(raw)) / n_pulses


def main():
    eta80 = eta_sys(80.0)
    eta50 = eta_sys(50.0)
    y1_80 = yield_i(1, eta80)
    values = []

    def put(name, value):
        values.append((name, value))

    dn_e, da_e = plasma_shift(5e17, 0.0)
    dn_h, da_h = plasma_shift(0.0, 5e17)
    put("plasma_dn_electrons_5e17", dn_e)
    put("plasma_da_electrons_5e17", da_e)
    put("plasma_dn_holes_5e17", dn_h)
    put("plasma_da_holes_5e17", da_h)
    put("poisson_pmf_mu05_i1", poisson_pmf(0.5, 1))
    put("pdl_loss_10db", pdl_loss_factor(10.0))
    put("pdl_loss_1p6db", pdl_loss_factor(1.6))
    put("eta_sys_50km_bob1", eta_sys(50.0, 1.0))
    put("eta_sys_80km", eta80)
    put("yield1_80km", y1_80)
    put("error1_80km", error_i(y1_80))
    put("gain_mu05_80km", gain(0.5, eta80))
    put("qber_mu05_80km", qber(0.5, eta80))
    put("gain_mu005_80km", gain(0.05, eta80))
    put("binary_entropy_002", h2(0.02))
    put("binary_entropy_0015", h2(0.015))
    put("min_term_l05_mu1", min(0.5 * math.exp(-0.5), 1.0 * math.exp(-1.0)))
    put("key_rate_80km_mu07_p1_q05_f116", key_rate(1.0, 0.70, 1.0, eta80, 0.5, 1.16))
    put("heuristic_p_l01_mu1", heuristic_p(1.0, 0.1))
    put("heuristic_p_l05_mu2_raw", 0.5 * math.exp((1.0 - 0.5) * 2.0))
    put("approx_rate_l01_mu1_80km_f116",
        approx_key_rate(1.0, 0.1, heuristic_p(1.0, 0.1), eta80, E_D, 1.16))
    put("optimal_mu_l1_f116", solve_mu(1.0, E_D, 1.16))
    put("optimal_mu_l01_f116", solve_mu(0.1, E_D, 1.16))
    put("y1_lower_80km_mu07_mu01", y1_lower(gain(0.7, eta80), gain(0.1, eta80), Y0, 0.7, 0.1))
    put("beta_80km_mu07_mu01", (y1_80 - y1_lower(gain(0.7, eta80), gain(0.1, eta80), Y0, 0.7, 0.1)) / y1_80)
    put("e1y1_upper_80km_mu01", e1y1_upper(gain(0.1, eta80), qber(0.1, eta80), Y0, E0, 0.1))
    put("y1e1_true_80km", y1_80 * error_i(y1_80))
    _, y1c_50, e1p_50 = per_pol_bounds(50.0, 10.0, 0.7, 0.1)
    put("combined_y1_lower_50km_pdl10", y1c_50)
    put("combined_e1_phase_upper_50km_pdl10", e1p_50)
    put("yield1_50km", yield_i(1, eta50))
    put("e1y1_upper_noerror_mu01", E0 * Y0 * (math.exp(0.1) - 1.0) / 0.1)
    put("two_decoy_rate_50km_pdl10_q05_f116",
        two_decoy_rate(50.0, 10.0, 0.7, 0.1, heuristic_p(0.7, 0.1), 0.5, 1.16))
    put("hoeffding_5000_1em10", hoeffding(5000.0, 1e-10))
    lo, hi = interval(5000.0, 10 ** 6, 1e-10)
    put("interval_lo_5000_1em10", lo)
    put("interval_hi_5000_1em10", hi)
    put("key_length_overhead_1em10", 6.0 * math.log2(21.0 / 1e-10) + math.log2(2.0 / 1e-10))
    raw = 1e6 * (1.0 - h2(0.02)) - 328141.0 - 6.0 * math.log2(21.0 / 1e-10) - math.log2(2.0 / 1e-10)
    put("key_length_example", float(math.floor(raw)))
    s1, e1u, rate = finite_key(50.0, 10.0, 1e12, 1.3, 0.08, 0.8, 0.15, 1.16, 1e-10)
    put("finite_s1_lower_50km_pdl10_1e12", s1)
    put("finite_e1_upper_50km_pdl10_1e12", e1u)
    put("finite_rate_50km_pdl10_1e12", rate)

    checks = []

    def check(name, ok):
        checks.append((name, ok))

    check("plasma zero case", plasma_shift(0.0, 0.0) == (0.0, 0.0))
    check("plasma electron hand value", abs(dn_e - (-4.4e-4)) < 1e-19 and abs(da_e - 4.25) < 1e-12)
    check("pmf sums to 1 (mu=2)", abs(sum(poisson_pmf(2.0, i) for i in range(200)) - 1.0) < 1e-12)
    check("eta_sys zero distance", eta_sys(0.0) == ETA_BOB)
    check("gain at mu=0 is Y0", abs(gain(0.0, eta80) - Y0) < 1e-16)
    check("qber at mu=0 is e0", abs(qber(0.0, eta80) - E0) < 1e-12)
    check("error rate at Y1=Y0 is e0", abs(error_i(Y0) - E0) < 1e-15)
    # series identity: Q*E must equal sum_i pmf(mu,i) * Y_i * e_i
    mu = 0.5
    series = sum(poisson_pmf(mu, i) * yield_i(i, eta80) * error_i(yield_i(i, eta80))
                 for i in range(200))
    check("gain*qber equals series", abs(gain(mu, eta80) * qber(mu, eta80) - series) < 1e-12)
    check("entropy symmetry", abs(h2(0.3) - h2(0.7)) < 1e-15)
    check("entropy max", h2(0.5) == 1.0)
    check("heuristic P equalizes min arguments",
          abs(0.1 * 1.0 * math.exp(-0.1) - heuristic_p(1.0, 0.1) * 1.0 * math.exp(-1.0)) < 1e-12)
    check("residual at root below 1e-10",
          abs(mu_residual(solve_mu(1.0, E_D, 1.16), 1.0, E_D, 1.16)) < 1e-10)
    check("y1 lower bound dominated by exact yield",
          y1_lower(gain(0.7, eta80), gain(0.1, eta80), Y0, 0.7, 0.1) <= y1_80)
    check("e1y1 upper bound dominates exact product",
          e1y1_upper(gain(0.1, eta80), qber(0.1, eta80), Y0, E0, 0.1) >= y1_80 * error_i(y1_80))
    check("hoeffding sqrt scaling",
          abs(hoeffding(20000.0, 1e-10) - 2.0 * hoeffding(5000.0, 1e-10)) < 1e-9)
    check("interval clamped to pulse count", interval(10.0, 12, 1e-10)[1] == 12.0)
    check("finite rate positive at reference point", rate > 0.0)
    check("finite e1 upper above misalignment", e1u > E_D)

    if "--emit-rust" in sys.argv[1:]:
        for name, value in values:
            print(f"    (\"{name}\", {value!r}),")
    else:
        width = max(len(n) for n, _ in values)
        for name, value in values:
            print(f"{name:<{width}}  {value!r}")
        print()
        failed = [n for n, ok in checks if not ok]
        for name, ok in checks:
            print(f"[{'ok' if ok else 'FAIL'}] {name}")
        if failed:
            print(f"\n{len(failed)} check(s) failed", file=sys.stderr)
            return 1
        print(f"\nall {len(checks)} checks passed; {len(values)} reference values emitted")
    return 0


if __name__ == "__main__":
    sys.exit(main())
