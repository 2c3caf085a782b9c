#!/usr/bin/env python3
"""Freeze reference statistics into tests/data/adf_fixtures.json.

Series come from a 32-bit LCG (a=1664525, c=1013904223) fed through
Box-Muller, so the C++ tests can regenerate them bit for bit. Reference
numbers are statsmodels adfuller(regression="c", autolag="AIC"); mean,
standard deviation and trend lines are computed in exact rational arithmetic.
"""

import json
import math
import statistics
from fractions import Fraction
from pathlib import Path

import statsmodels
from statsmodels.tsa.stattools import adfuller
from statsmodels.tsa.adfvalues import mackinnonp

OUT = Path(__file__).resolve().parent.parent / "tests" / "data" / "adf_fixtures.json"


class Lcg:
    def __init__(self, seed):
        self.state = seed & 0xFFFFFFFF

    def uniform(self):
        self.state = (1664525 * self.state + 1013904223) & 0xFFFFFFFF
        return (self.state + 0.5) / 4294967296.0

    def normal(self):
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


def generate(kind, seed, n, params):
    rng = Lcg(seed)
    out = []
    if kind == "white":
        for _ in range(n):
            out.append(params["mean"] + params["sigma"] * rng.normal())
    elif kind == "walk":
        x = params["start"]
        for _ in range(n):
            x += params["drift"] + params["sigma"] * rng.normal()
            out.append(x)
    elif kind == "ar":
        phi = params["phi"]
        hist = [0.0] * len(phi)
        for _ in range(n):
            e = params["sigma"] * rng.normal()
            x = e + sum(p * h for p, h in zip(phi, hist))
            hist = [x] + hist[:-1]
            out.append(params["mean"] + x)
    else:
        raise ValueError(kind)
    return out


SERIES = [
    ("white_noise", "white", 42, 100, {"mean": 15.2, "sigma": 3.0}),
    ("random_walk", "walk", 7, 120, {"start": 100.0, "drift": 0.0, "sigma": 1.0}),
    ("ar1", "ar", 11, 60, {"mean": 50.0, "phi": [0.6], "sigma": 2.0}),
    ("walk_drift", "walk", 99, 200, {"start": 0.0, "drift": 0.3, "sigma": 1.5}),
    ("ar2_year", "ar", 2024, 365, {"mean": 1000.0, "phi": [0.5, -0.3], "sigma": 40.0}),
    ("near_unit_root", "ar", 5, 150, {"mean": 10.0, "phi": [0.97], "sigma": 1.0}),
]

P_POINTS = [-30.0, -18.83, -12.09, -8.7, -4.0, -2.7, -1.61, -1.6, 0.0, 1.5, 2.74, 3.0]


def exact_ols(values):
    xs = [Fraction(i) for i in range(len(values))]
    ys = [Fraction(v) for v in values]
    n = len(values)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    slope = sxy / sxx
    intercept = my - slope * mx
    ssr = sum((y - intercept - slope * x) ** 2 for x, y in zip(xs, ys))
    return {"slope": float(slope), "intercept": float(intercept), "residual_std_error": math.sqrt(ssr / (n - 2))}


def main():
    series = []
    for name, kind, seed, n, params in SERIES:
        values = generate(kind, seed, n, params)
        stat, p, lag, nobs, _crit, icbest = adfuller(values, regression="c", autolag="AIC")
        capped = adfuller(values, maxlag=2, regression="c", autolag="AIC")
        series.append({
            "name": name, "kind": kind, "seed": seed, "n": n, "params": params,
            "values": values,
            "statistic": stat, "p_value": p, "used_lag": lag, "n_obs": nobs, "aic": icbest,
            "max_lag2": {"statistic": capped[0], "p_value": capped[1], "used_lag": capped[2], "n_obs": capped[3]},
        })
    pvalues = [{"tau": t, "p": float(mackinnonp(t, regression="c", N=1))} for t in P_POINTS]
    desc = generate("white", 1000, 1000, {"mean": 100.0, "sigma": 5.0})
    trend = [3.0 + 0.25 * i + v for i, v in enumerate(generate("white", 77, 200, {"mean": 0.0, "sigma": 2.0}))]
    descriptive = {
        "seed": 1000, "n": 1000, "params": {"mean": 100.0, "sigma": 5.0},
        "mean": float(statistics.mean(Fraction(v) for v in desc)),
        "std": math.sqrt(statistics.variance(Fraction(v) for v in desc)),
    }
    ols = {"seed": 77, "n": 200, "values": trend, **exact_ols(trend)}
    doc = {"generator": "statsmodels " + statsmodels.__version__, "series": series, "mackinnon": pvalues,
           "descriptive": descriptive, "ols": ols}
    OUT.write_text(json.dumps(doc, indent=1) + "\n")


if __name__ == "__main__":
    main()
