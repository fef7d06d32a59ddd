#!/usr/bin/env python3
"""Generate the bundled demo cases.

Each case is built from a bus-level network: every generator's internal
source sits behind its transient reactance on a terminal bus, terminal
buses are tied by lines, and constant-impedance loads hang off the buses.
Kron reduction onto the internal nodes gives the reduced admittance matrix.
Internal voltage phasors are chosen, the network currents follow, and the
machine-frame algebra yields an exact equilibrium whose terminal phasors
are written to the case file.

Usage: make_cases.py [--out cases/] [--print-expected]
"""

import argparse
import json
import math
import pathlib

import numpy as np

OMEGA0 = 2.0 * math.pi * 60.0
S_B = 100.0


def kron_reduce(y_bus, keep):
    keep = np.asarray(keep)
    drop = np.setdiff1d(np.arange(y_bus.shape[0]), keep)
    y_kk = y_bus[np.ix_(keep, keep)]
    y_kd = y_bus[np.ix_(keep, drop)]
    y_dk = y_bus[np.ix_(drop, keep)]
    y_dd = y_bus[np.ix_(drop, drop)]
    return y_kk - y_kd @ np.linalg.solve(y_dd, y_dk)


def build_network(machines, lines, loads):
    g = len(machines)
    nb = g  # one terminal bus per generator
    nn = g + nb
    y = np.zeros((nn, nn), dtype=complex)

    def branch(a, b, yab):
        y[a, a] += yab
        y[b, b] += yab
        y[a, b] -= yab
        y[b, a] -= yab

    for i, m in enumerate(machines):
        x_sys = m["x_dp"] * S_B / m["S_N"]
        branch(i, g + i, 1.0 / (1j * x_sys))
    for (a, b, z) in lines:
        branch(g + a, g + b, 1.0 / z)
    for (bus, s_load) in loads:
        # constant impedance at ~1 pu voltage: y = conj(S)
        y[g + bus, g + bus] += np.conj(s_load)
    return kron_reduce(y, list(range(g)))


def equilibrium(machines, y_red, psi):
    current = y_red @ psi
    out = []
    for m, p, it in zip(machines, psi, current):
        scale = S_B / m["S_N"]
        i_m = scale * it
        if m["model_order"] == "Transient4":
            delta = np.angle(p + 1j * (m["x_q"] - m["x_qp"]) * i_m)
        else:
            delta = np.angle(p)
        rot = np.exp(-1j * delta)
        ep = p * rot
        e_qp, e_dp = ep.real, -ep.imag
        idq = i_m * rot
        i_q, i_d = idq.real, -idq.imag
        e_q = e_qp - m["x_dp"] * i_d
        e_d = e_dp + m["x_qp"] * i_q
        e_t = (e_q - 1j * e_d) * np.exp(1j * delta)
        t_e = scale * (e_q * i_q + e_d * i_d)
        if m["model_order"] == "Transient4":
            e_fd = e_qp + (m["x_d"] - m["x_dp"]) * i_d
            assert abs(-e_dp + (m["x_q"] - m["x_qp"]) * i_q) < 1e-12
        else:
            e_fd = e_qp
        out.append(dict(delta=delta, e_qp=e_qp, e_dp=e_dp, e_t=e_t, i_t=it,
                        t_m=t_e, e_fd=e_fd))
    return out


def rhs(machines, y_red, x, t_m, e_fd):
    g = len(machines)
    d, w, eq, ed = x[:g], x[g:2 * g], x[2 * g:3 * g], x[3 * g:]
    psi = (eq - 1j * ed) * np.exp(1j * d)
    it = y_red @ psi
    dx = np.zeros(4 * g)
    for i, m in enumerate(machines):
        scale = S_B / m["S_N"]
        idq = scale * it[i] * np.exp(-1j * d[i])
        i_q, i_d = idq.real, -idq.imag
        e_q = eq[i] - m["x_dp"] * i_d
        e_d = ed[i] + m["x_qp"] * i_q
        t_e = scale * (e_q * i_q + e_d * i_d)
        dx[i] = w[i] - OMEGA0
        dx[g + i] = OMEGA0 / (2 * m["H"]) * (t_m[i] - t_e - m["K_D"] / OMEGA0 * (w[i] - OMEGA0))
        if m["model_order"] == "Transient4":
            dx[2 * g + i] = (e_fd[i] - eq[i] - (m["x_d"] - m["x_dp"]) * i_d) / m["T_d0p"]
            dx[3 * g + i] = (-ed[i] + (m["x_q"] - m["x_qp"]) * i_q) / m["T_q0p"]
    return dx


def heun(machines, y_red, x, t_m, e_fd, dt, steps):
    for _ in range(steps):
        f0 = rhs(machines, y_red, x, t_m, e_fd)
        xt = x + dt * f0
        f1 = rhs(machines, y_red, xt, t_m, e_fd)
        x = x + 0.5 * dt * (f0 + f1)
    return x


def transient(i, H, KD, S_N=100.0, xd=1.2, xq=0.9, xdp=0.25, xqp=0.35, td=6.0, tq=0.6):
    return dict(index=i, model_order="Transient4", H=H, K_D=KD, T_d0p=td, T_q0p=tq,
                x_d=xd, x_q=xq, x_dp=xdp, x_qp=xqp, S_N=S_N)


def classical(i, H, KD, S_N=100.0, xdp=0.3):
    return dict(index=i, model_order="Classical2", H=H, K_D=KD, x_dp=xdp, x_qp=xdp, S_N=S_N)


def demo2():
    machines = [transient(1, 6.5, 2.0), classical(2, 12.0, 2.0)]
    lines = [(0, 1, 0.01 + 0.12j)]
    loads = [(0, 0.9 + 0.3j), (1, 1.1 + 0.35j)]
    psi_mag = [1.08, 1.05]
    psi_ang = [0.95, 0.80]
    return "demo2", machines, lines, loads, psi_mag, psi_ang


def demo10():
    machines = [
        transient(1, 6.0, 2.0, xd=1.1, xq=0.85, xdp=0.24, xqp=0.32, td=5.5, tq=0.55),
        classical(2, 9.0, 2.5, xdp=0.28),
        transient(3, 5.0, 1.5, S_N=200.0, xd=1.3, xq=1.0, xdp=0.30, xqp=0.40, td=7.0, tq=0.7),
        transient(4, 4.5, 2.0, xd=1.0, xq=0.8, xdp=0.22, xqp=0.30, td=5.0, tq=0.5),
        classical(5, 15.0, 3.0, S_N=200.0, xdp=0.25),
        transient(6, 5.5, 2.0, xd=1.2, xq=0.9, xdp=0.26, xqp=0.34, td=6.5, tq=0.6),
        classical(7, 8.0, 2.0, xdp=0.32),
        transient(8, 6.5, 2.5, xd=1.15, xq=0.95, xdp=0.25, xqp=0.36, td=6.0, tq=0.65),
        classical(9, 10.0, 2.0, xdp=0.30),
        transient(10, 4.0, 1.5, xd=1.25, xq=0.88, xdp=0.27, xqp=0.33, td=5.8, tq=0.58),
    ]
    # two loosely tied areas: buses 0-4 and 5-9, linked by a weak tie 3-6
    lines = [
        (0, 1, 0.01 + 0.08j), (1, 2, 0.01 + 0.10j), (2, 3, 0.012 + 0.09j),
        (3, 4, 0.01 + 0.11j), (0, 2, 0.015 + 0.14j),
        (5, 6, 0.01 + 0.09j), (6, 7, 0.01 + 0.08j), (7, 8, 0.012 + 0.10j),
        (8, 9, 0.01 + 0.12j), (5, 9, 0.02 + 0.16j),
        (3, 6, 0.03 + 0.30j),
    ]
    loads = [(1, 0.8 + 0.25j), (2, 1.0 + 0.3j), (4, 0.7 + 0.2j), (6, 0.9 + 0.3j),
             (7, 0.8 + 0.25j), (9, 0.9 + 0.3j), (0, 0.4 + 0.1j), (5, 0.5 + 0.15j)]
    psi_mag = [1.08, 1.06, 1.10, 1.07, 1.05, 1.09, 1.06, 1.08, 1.05, 1.07]
    psi_ang = [0.90, 0.82, 0.95, 0.85, 0.78, 0.88, 0.80, 0.86, 0.76, 0.84]
    return "demo10", machines, lines, loads, psi_mag, psi_ang


def make(builder):
    name, machines, lines, loads, psi_mag, psi_ang = builder()
    y_red = build_network(machines, lines, loads)
    psi = np.array([mg * np.exp(1j * a) for mg, a in zip(psi_mag, psi_ang)])
    eq = equilibrium(machines, y_red, psi)
    g = len(machines)
    doc = {
        "name": name,
        "s_b": S_B,
        "omega_0_rad_s": OMEGA0,
        "machines": machines,
        "y_reduced": [[float(v.real), float(v.imag)] for v in y_red.reshape(-1)],
        "terminal": [[float(e["e_t"].real), float(e["e_t"].imag),
                      float(e["i_t"].real), float(e["i_t"].imag)] for e in eq],
    }
    x0 = np.concatenate([[e["delta"] for e in eq], [OMEGA0] * g,
                         [e["e_qp"] for e in eq], [e["e_dp"] for e in eq]])
    t_m = np.array([e["t_m"] for e in eq])
    e_fd = np.array([e["e_fd"] for e in eq])
    res = np.max(np.abs(rhs(machines, y_red, x0, t_m, e_fd)))
    assert res < 1e-10, res
    # small-signal stability of the equilibrium (dynamic coordinates only)
    dyn = [i for i in range(4 * g)
           if i < 2 * g or machines[i % g]["model_order"] == "Transient4"]
    jac = np.zeros((4 * g, 4 * g))
    h = 1e-7
    for j in range(4 * g):
        xp = x0.copy(); xp[j] += h
        xm = x0.copy(); xm[j] -= h
        jac[:, j] = (rhs(machines, y_red, xp, t_m, e_fd) - rhs(machines, y_red, xm, t_m, e_fd)) / (2 * h)
    eig = np.linalg.eigvals(jac[np.ix_(dyn, dyn)])
    return name, doc, eq, eig, (machines, y_red, x0, t_m, e_fd)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(pathlib.Path(__file__).resolve().parent.parent / "cases"))
    ap.add_argument("--print-expected", action="store_true")
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for builder in (demo2, demo10):
        name, doc, eq, eig, sim = make(builder)
        with open(out / f"{name}.json", "w") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"{name}: max Re(eig) = {max(eig.real):.4g}")
        print("  P_e:", [round(float((e['e_t'] * np.conj(e['i_t'])).real), 4) for e in eq])
        print("  delta0:", [round(float(e['delta']), 4) for e in eq])
        if args.print_expected:
            for i, e in enumerate(eq):
                print(f"  machine {i}: delta0={e['delta']!r} e_qp0={e['e_qp']!r} "
                      f"e_dp0={e['e_dp']!r} T_m={e['t_m']!r} E_fd={e['e_fd']!r}")


if __name__ == "__main__":
    main()
