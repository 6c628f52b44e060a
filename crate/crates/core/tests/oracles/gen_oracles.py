"""Regenerate oracles.json with mpmath (arbitrary precision)."""
import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 60


def ml_two(a, b, z, terms=4000):
    """Standard E_{a,b}(z) by direct summation at working precision."""
    a, b, z = mp.mpf(a), mp.mpf(b), mp.mpf(z)
    s = mp.mpf(0)
    for n in range(terms):
        t = z**n / mp.gamma(a * n + b)
        s += t
        if n > 10 and abs(t) < mp.mpf(10) ** (-mp.mp.dps + 5) * (1 + abs(s)):
            break
    return s


def ml_neg_laplace(a, x):
    """E_a(-x), 0 < a < 1, through its completely monotone spectral density."""
    a = mp.mpf(a)
    s = mp.power(x, 1 / a)

    def k(r):
        return mp.power(r, a - 1) * mp.sin(a * mp.pi) / (mp.pi * (mp.power(r, 2 * a) + 2 * mp.power(r, a) * mp.cos(a * mp.pi) + 1))

    return mp.quad(lambda r: mp.exp(-r * s) * k(r), [0, 1, 10, mp.inf])


def ml_series(mu, nu, t):
    """Σ t^{nν}/Γ(μ+nν)."""
    return ml_two(nu, mu, mp.power(t, nu)) if t > 0 else 1 / mp.gamma(mu)


def f(x):
    return float(x)


out = {}

out["ml_series"] = [
    {"mu": mu, "nu": nu, "t": t, "value": f(ml_series(mp.mpf(mu), mp.mpf(nu), mp.mpf(t)))}
    for mu, nu, t in [(1, 0.5, 2), (1, 1, 1), (0.5, 0.5, 0), (0.3, 0.3, 1.5), (1.5, 0.5, 4), (1, 0.7, 3)]
]

neg = []
for a in [0.3, 0.5, 0.7, 0.9]:
    for b in [1.0, a, 1.0 + a]:
        for x in [0.01, 0.5, 1, 2, 3, 4, 6, 8, 15, 30, 50, 200, 1000]:
            y = x ** (1 / a)
            if y < 150:
                mp.mp.dps = 60 + int(y / 2.3)
                neg.append({"a": a, "b": b, "x": x, "value": f(ml_two(a, b, -x, 20000))})
                mp.mp.dps = 60
            elif b == 1.0:
                neg.append({"a": a, "b": b, "x": x, "value": f(ml_neg_laplace(a, x))})
out["ml_neg"] = neg

# E_{1/2}(-sqrt t) = e^t erfc(sqrt t)
out["linear_scalar"] = [
    {"t": t, "value": f(mp.exp(t) * mp.erfc(mp.sqrt(t)))} for t in [1e-6, 1e-3, 0.01, 0.1, 0.25, 0.5, 1.0]
]

# t^{a-1} E_{a,a}(-lam t^a), the B = 0, f = 0 integral-initial solution
out["integral_initial"] = [
    {"alpha": a, "lambda": lam, "t": t, "value": f(mp.power(t, a - 1) * ml_two(a, a, -lam * mp.power(t, a)))}
    for a in [0.5, 0.7]
    for lam in [1.0, 3.0]
    for t in [1 / 16, 1 / 4, 9 / 16, 1.0]
]

# Hankel: 1/Γ(x) at the reference points
out["rgamma"] = [{"x": x, "value": f(mp.rgamma(x))} for x in [0.5, 1.0, 2.0, 3.5, 0.1, 10.0]]

x_min = mp.findroot(mp.digamma, 1.46)
out["gamma_min"] = f(x_min)
out["gamma_min_value"] = f(mp.gamma(x_min))

out["wright_half"] = [{"theta": th, "value": f(mp.exp(-th * th / 4) / mp.sqrt(mp.pi))} for th in [0.1, 1.0, 2.5, 6.0]]

out["beta_inc"] = [
    {"a": a, "b": b, "x": x, "value": f(mp.betainc(a, b, 0, x, regularized=True))}
    for a, b, x in [(0.5, 0.5, 0.3), (2.0, 3.0, 0.7), (0.3, 1.7, 0.01), (5.0, 0.5, 0.99)]
]

# (T(t)-I)A^{-δ} scalar maximizer over λ > 0 of (1 - e^{-λ t}) λ^{-δ} t^{-δ}
out["increment_sup"] = []
for d in [0.25, 0.5, 0.75]:
    lo = mp.findroot(lambda l: l * mp.exp(-l) - d * (1 - mp.exp(-l)), 1.0)
    out["increment_sup"].append({"delta": d, "value": f((1 - mp.exp(-lo)) * mp.power(lo, -d))})

out["blowup_quadratic"] = {
    "alpha": 0.5,
    "lambda": 0.1,
    "u0": 2.0,
    "adams_exceed_1e6": {"4000": 0.04638, "16000": 0.046395},
    "t_star_range": [0.0462, 0.0465],
}

Path(__file__).with_name("oracles.json").write_text(json.dumps(out, indent=1) + "\n")
