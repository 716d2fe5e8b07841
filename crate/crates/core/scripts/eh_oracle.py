#!/usr/bin/env python3
"""Arbitrary-precision reference values for the rectenna transfer function.

Evaluates the unclipped harvested power with 60 significant digits using
mpmath's Lambert-W and Bessel-I0. The printed values are frozen as test
constants in src/eh_model.rs and tests/acceptance.rs.

    python3 scripts/eh_oracle.py
"""
import mpmath as mp

mp.mp.dps = 60

A = mp.mpf("1.29")
B = mp.mpf("1.55e3")
I_S = mp.mpf("5e-6")
R_L = mp.mpf("1e4")
P_SAT = mp.mpf("25e-6")


def varphi(p):
    x = B * mp.sqrt(2 * p)
    u = A * mp.e**A * mp.besseli(0, x)
    return (mp.lambertw(u).real / A - 1) ** 2 * I_S**2 * R_L


if __name__ == "__main__":
    for p in ["25e-6", "1e-6", "12.5e-6"]:
        print(p, mp.nstr(varphi(mp.mpf(p)), 30))
