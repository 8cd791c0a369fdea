#!/usr/bin/env python3
"""Regenerates the shipped OCP tables and surrogate drive cycles under data/.

The outputs are committed; this script documents how they were produced and
is not needed for building or testing. Run from the repository root.
"""
import os

import numpy as np

DATA = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "data")
T_REF = 298.15
CAPACITY_AH = 1.95


def stoich_grid(n=301, lo=0.001, hi=0.999):
    i = np.arange(n)
    return 0.5 * (lo + hi) - 0.5 * (hi - lo) * np.cos(np.pi * i / (n - 1))


def u_nmc(th):
    return 4.05 - 1.1 * (th - 0.55) - 0.04 * np.log(th / (1.0 - th))


def dudt_nmc(th):
    return -1.0e-4 + 0.8e-4 * th


def u_graphite(th):
    return (0.16 - 0.12 * (th - 0.5) - 0.02 * np.log(th / (1.0 - th))
            + 0.6 * np.exp(-th / 0.04))


def dudt_graphite(th):
    return 3.0e-4 * np.exp(-th / 0.15) - 0.5e-4


def write_ocp(path, name, u, dudt):
    th = stoich_grid()
    with open(path, "w") as f:
        f.write(f"# {name} open-circuit potential, table version 1\n")
        f.write(f"# columns: stoichiometry [-], U at {T_REF} K [V], dU/dT [V/K]\n")
        for t, v, d in zip(th, u(th), dudt(th)):
            f.write(f"{t:.10f} {v:.10f} {d:.6e}\n")


def smooth(x, tau):
    y = np.empty_like(x)
    acc = x[0]
    a = 1.0 / tau
    for k, v in enumerate(x):
        acc += a * (v - acc)
        y[k] = acc
    return y


def pulse_train(rng, n, lo, hi, dmin, dmax):
    out = np.empty(n)
    k = 0
    while k < n:
        d = int(rng.integers(dmin, dmax + 1))
        out[k:k + d] = rng.uniform(lo, hi)
        k += d
    return out


def write_cycle(path, name, t, current, temp, note):
    with open(path, "w") as f:
        f.write(f"# {name}: {note}\n")
        f.write("t_s,current_A,temperature_K\n")
        for a, b, c in zip(t, current, temp):
            f.write(f"{a:.1f},{b:.6f},{c:.4f}\n")


def charge_sustaining(rng):
    # Aggressive highway-style blocks: fast pulses to +/-3.5C with a few
    # sustained 1C segments; each 600 s block is shifted to zero mean.
    blocks = []
    for b in range(12):
        x = pulse_train(rng, 600, -2.5, 3.5, 3, 25) * CAPACITY_AH
        x = smooth(x, 2.0)
        s = int(rng.integers(60, 400))
        x[s:s + 90] = (1.0 if b % 2 == 0 else -1.0) * CAPACITY_AH
        x -= x.mean()
        blocks.append(np.clip(x, -3.5 * CAPACITY_AH, 3.5 * CAPACITY_AH))
    cur = np.concatenate(blocks)
    cur -= cur.mean()
    return cur


def charge_depleting(rng):
    # Urban-style blocks: stop/go pulses up to 2.5C with regen down to -1C and
    # idle periods; mean discharge around 0.25C.
    blocks = []
    for _ in range(8):
        x = pulse_train(rng, 700, -1.0, 2.5, 4, 30) * CAPACITY_AH
        idle = pulse_train(rng, 700, 0.0, 1.0, 10, 40) < 0.3
        x[idle] = 0.0
        x = smooth(x, 2.0)
        blocks.append(x)
    cur = np.concatenate(blocks)
    cur += 0.25 * CAPACITY_AH - cur.mean()
    return cur


def constant_current(c_rate, duration, rest):
    cur = np.concatenate([np.full(duration, c_rate * CAPACITY_AH), np.zeros(rest)])
    return cur


def main():
    write_ocp(os.path.join(DATA, "ocp_nmc.dat"), "NMC cathode", u_nmc, dudt_nmc)
    write_ocp(os.path.join(DATA, "ocp_graphite.dat"), "graphite anode", u_graphite,
              dudt_graphite)

    rng = np.random.default_rng(20200601)
    cyc = os.path.join(DATA, "cycles")
    os.makedirs(cyc, exist_ok=True)

    cs = charge_sustaining(rng)
    t = np.arange(len(cs), dtype=float)
    temp = T_REF + 1.5 * (1.0 - np.exp(-t / 1800.0))
    write_cycle(os.path.join(cyc, "us06_surrogate.csv"), "us06_surrogate", t, cs, temp,
                "charge-sustaining surrogate, 7200 s, 1 Hz, scaled to a 1.95 Ah cell "
                "(peak 3.5C discharge, 2.5C regen, zero net charge)")

    cd = charge_depleting(rng)
    t = np.arange(len(cd), dtype=float)
    write_cycle(os.path.join(cyc, "udds_surrogate.csv"), "udds_surrogate", t, cd,
                np.full_like(t, T_REF),
                "charge-depleting surrogate, 5600 s, 1 Hz, scaled to a 1.95 Ah cell "
                "(peak 2.5C, regen 1C, mean 0.25C discharge)")

    for c_rate, dur, name in ((1.0, 3240, "cc_1c"), (2.0, 1620, "cc_2c")):
        cur = constant_current(c_rate, dur, 600)
        t = np.arange(len(cur), dtype=float)
        write_cycle(os.path.join(cyc, f"{name}.csv"), name, t, cur, np.full_like(t, T_REF),
                    f"{c_rate:g}C constant-current discharge for {dur} s then 600 s rest")


if __name__ == "__main__":
    main()
