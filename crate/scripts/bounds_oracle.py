#!/usr/bin/env python3
"""High-precision reference values for the bound formulas.

Evaluates every closed-form bound at 50 significant digits with mpmath and
writes crates/core/tests/fixtures/bounds_oracle.json. The acceptance
test compares the library against this file.

    python3 scripts/bounds_oracle.py [--seed 7] [--cases 100]
"""

import argparse
import json
import random
from pathlib import Path

import mpmath as mp

mp.mp.dps = 50

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/bounds_oracle.json"


def lnln(x):
    return mp.log(mp.log(x))


def geometry(values, lengths):
    """Per-index (segment, distance) plus per-segment run lengths."""
    k = len(lengths)
    seg, dist = [], []
    for s, m in enumerate(lengths):
        for j in range(1, m + 1):
            seg.append(s)
            dist.append(min(j, m - j + 1))
    # jump[s] is the sign of values[s+1] - values[s]
    jump = [1 if values[s + 1] > values[s] else -1 for s in range(k - 1)]

    def monotone_through(s):
        # An interior segment lies inside a monotone stretch when the jump
        # into it and the jump out of it have the same sign.
        return 0 < s < k - 1 and jump[s - 1] == jump[s]

    left, right = list(lengths), list(lengths)
    for s in range(k):
        if not monotone_through(s):
            continue
        a = s - 1
        while monotone_through(a) and jump[a - 1] == jump[s]:
            a -= 1
        b = s + 1
        while monotone_through(b) and jump[b] == jump[s]:
            b += 1
        left[s] = sum(lengths[a : s + 1])
        right[s] = sum(lengths[s : b + 1])
    # segments whose incoming and outgoing directions differ (ends count as 0)
    padded = [0] + jump + [0]
    changes = [s for s in range(k) if padded[s] != padded[s + 1]] if k > 1 else [0]
    return seg, dist, left, right, changes


def b_value(d, m, sigma, delta, lam, m_left=None, m_right=None):
    d, m = mp.mpf(d), mp.mpf(m)
    d3 = max(d, mp.mpf(3))
    l1d = mp.log(1 / delta)
    local = 4 * sigma * (mp.sqrt(lnln(2 * d3) / d3) + mp.sqrt(l1d / d))
    penalty = 4 * sigma**2 * (lnln(2 * m) + l1d) / lam
    if m_left is None:
        segment = (2 * mp.sqrt(m * sigma**2 * l1d) + 2 * lam) / m
    else:
        segment = 2 * mp.sqrt(m * sigma**2 * l1d) / m + 2 * (lam / m_left + lam / m_right)
    return local + penalty + segment


def sse_quantile(lengths, changes, v, delta, lam, L, improved):
    n = mp.mpf(sum(lengths))
    k = len(lengths)
    lnd = mp.log(n / delta)
    ll = lnln(2 * n)
    logsum = k + mp.fsum(mp.log(mp.mpf(m) / 2) for m in lengths)
    if improved:
        lam_sq = 144 * lam**2 / L**2 * mp.fsum(mp.mpf(1) / lengths[s] for s in changes)
    else:
        lam_sq = 24 * lam**2 / L**2 * mp.fsum(mp.mpf(1) / m for m in lengths)
    terms = [
        24 / L**2 * (2 * ll + lnd) * logsum,
        3 * n / L**2 * 4 * (ll**2 + lnd**2) / lam**2,
        6 * k / L**2 * lnd,
        lam_sq,
        2 * k * max(mp.mpf(3), 12**4 / L**4, 12**2 / (2 * L**2) * lnd) * v**2,
    ]
    return mp.fsum(terms)


def sse_mean(lengths, changes, delta, lam, sigma, improved):
    n = mp.mpf(sum(lengths))
    k = len(lengths)
    lnd = mp.log(n / delta)
    ll = lnln(2 * n)
    logsum = k + mp.fsum(mp.log(mp.mpf(m) / 2) for m in lengths)
    if improved:
        lam_sq = 144 * lam**2 * mp.fsum(mp.mpf(1) / lengths[s] for s in changes)
    else:
        lam_sq = 24 * lam**2 * mp.fsum(mp.mpf(1) / m for m in lengths)
    terms = [
        192 * sigma**2 * (ll + lnd / 2) * logsum,
        24 * n * sigma**4 * (ll**2 + lnd**2 / 4) / lam**2,
        12 * k * sigma**2 * lnd,
        lam_sq,
    ]
    return mp.fsum(terms)


def b_uniform(n, delta, lam):
    n = mp.mpf(n)
    l1d = mp.log(1 / delta)
    return (lnln(2 * n) + l1d) / lam + mp.sqrt(l1d / n)


def draw(rng):
    k = rng.randint(1, 8)
    lengths = [rng.randint(1, 400) for _ in range(k)]
    values = [round(rng.uniform(-3, 3), 3)]
    while len(values) < k:
        v = round(rng.uniform(-3, 3), 3)
        if v != values[-1]:
            values.append(v)
    return {
        "values": values,
        "lengths": lengths,
        "sigma": rng.uniform(0.1, 3.0),
        # below (ln 2 / e)^2 so every bound accepts it
        "delta": rng.uniform(1e-4, 0.06),
        "lambda": 10 ** rng.uniform(-1, 3),
        "growth_l": 10 ** rng.uniform(-2, 0.5),
        "index": rng.randrange(sum(lengths)),
    }


def evaluate(case):
    values, lengths = case["values"], case["lengths"]
    sigma, delta, lam, L = (mp.mpf(case[key]) for key in ("sigma", "delta", "lambda", "growth_l"))
    seg, dist, left, right, changes = geometry(values, lengths)
    i = case["index"]
    s = seg[i]
    v = mp.mpf(max(values)) - mp.mpf(min(values))
    n = sum(lengths)
    out = {
        "b": b_value(dist[i], lengths[s], sigma, delta, lam),
        "b_improved": b_value(dist[i], lengths[s], sigma, delta, lam, left[s], right[s]),
        "b_quantile": b_value(dist[i], lengths[s], mp.mpf(1) / 2, delta, lam),
        "b_uniform": b_uniform(n, delta, lam),
        "sse_quantile": sse_quantile(lengths, changes, v, delta, lam, L, False),
        "sse_quantile_improved": sse_quantile(lengths, changes, v, delta, lam, L, True),
        "sse_mean": sse_mean(lengths, changes, delta, lam, sigma, False),
        "sse_mean_improved": sse_mean(lengths, changes, delta, lam, sigma, True),
    }
    return {key: mp.nstr(val, 30) for key, val in out.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--cases", type=int, default=100)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    cases = []
    for _ in range(args.cases):
        case = draw(rng)
        case["expected"] = evaluate(case)
        cases.append(case)
    doc = {
        "generator": f"scripts/bounds_oracle.py --seed {args.seed} --cases {args.cases}",
        "digits": mp.mp.dps,
        "prob_const": mp.nstr(1 + 24 / mp.log(2) ** 2, 30),
        "cases": cases,
    }
    OUT.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {len(cases)} cases to {OUT}")


if __name__ == "__main__":
    main()
