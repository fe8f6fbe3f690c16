"""Monte-Carlo spectral density against the exact planar spectrum, as n grows.

    python scripts/run_planar_oracle.py --n 2000 10000 100000 --seed 7
"""

import argparse
import time

from horoflow import calculus, flows, planar_toy, spectral

PAIRS = {
    "bump(0.5,1)/gauss": (planar_toy.planar_bump(0.5, 1.0), planar_toy.gaussian_packet(), (0.0, 0.0)),
    "bump(0.3,1.5)/packet k=2": (
        planar_toy.planar_bump(0.3, 1.5),
        planar_toy.gaussian_packet(center=(0.5, 0.0), wavenumber=2.0),
        (0.5, 0.0),
    ),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[2000, 10_000])
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    planar = flows.make_backend("planar")
    print(f"{'pair':28s} {'n':>8s} {'L1':>8s} {'secs':>7s}")
    for name, (f, phi, center) in PAIRS.items():
        tc = calculus.make_time_change(planar, f)
        exact = planar_toy.exact_spectrum(phi, f, representation="tilde")
        for n in args.n:
            t0 = time.perf_counter()
            series = spectral.correlation(planar, phi, tc, args.T, args.dt, n, args.seed,
                                          proposal=spectral.GaussianProposal(center, 0.8), threads=args.threads)
            l1 = spectral.density(series).l1_distance(exact)
            print(f"{name:28s} {n:8d} {l1:8.4f} {time.perf_counter() - t0:7.1f}")


if __name__ == "__main__":
    main()
