#!/usr/bin/env python3
"""Write a synthetic drive log (k,v,a,F_w,d_target,mode,theta) from the reference road-load model."""
import argparse
import math
import random

M, RHO, A, G = 1844.0, 1.206, 2.629, 9.81
C_R, C_V, C_X0, C_X1, C_X2 = 0.0093, 0.0, 0.335, 68.3193, 142.4522


def wheel_force(v, a, d):
    cx = C_X0 if math.isinf(d) else C_X0 * (1.0 - C_X1 / (d + C_X2))
    return M * a + M * G * C_R + C_V * v + 0.5 * RHO * A * cx * v * v


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out")
    ap.add_argument("--per-cluster", type=int, default=100)
    ap.add_argument("--noise", type=float, default=0.0, help="force noise sigma [N]")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    k = 0
    with open(args.out, "w") as f:
        f.write("k,v,a,F_w,d_target,mode,theta\n")
        for mode in ("FE", "FC"):
            for v0 in (15.0, 25.0, 35.0):
                for d in (5.0, 10.0, 20.0, math.inf):
                    for _ in range(args.per_cluster):
                        v = v0 + rng.uniform(-1.0, 1.0)
                        a = rng.uniform(-0.3, 0.3)
                        F = wheel_force(v, a, d) + (rng.gauss(0.0, args.noise) if args.noise > 0 else 0.0)
                        label = "inf" if math.isinf(d) else repr(d)
                        f.write(f"{k},{v!r},{a!r},{F!r},{label},{mode},0\n")
                        k += 1


if __name__ == "__main__":
    main()
