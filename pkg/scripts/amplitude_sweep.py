"""Sweep the planar bump amplitude and report where the positivity margins break.

    python scripts/amplitude_sweep.py --amplitudes 0.25 0.5 1 2 3
"""

import argparse

from horoflow import calculus, flows, planar_toy


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--amplitudes", type=float, nargs="+", default=[0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0])
    ap.add_argument("--width", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    planar = flows.make_backend("planar")
    print(f"{'a':>6s} {'delta_f':>9s} {'delta_g':>9s} {'mourre':>7s}")
    packet = planar_toy.gaussian_packet()
    for a in args.amplitudes:
        rep = calculus.check_assumption(planar, planar_toy.planar_bump(a, args.width), 1000, args.seed)
        verdict = "-"
        if rep.passed:
            tc = calculus.make_time_change(planar, planar_toy.planar_bump(a, args.width), 1000, args.seed)
            ok = all(planar_toy.mourre_check(J, packet, tc).passed for J in planar_toy.MOURRE_INTERVALS)
            verdict = "pass" if ok else "FAIL"
        print(f"{a:6.2f} {rep.delta_f:9.4f} {rep.delta_g:9.4f} {verdict:>7s}")


if __name__ == "__main__":
    main()
