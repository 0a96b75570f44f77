"""Measured depths of Brent and VSBR outputs against the proven bounds."""

import argparse
import random
import statistics

from bordercx import circuitc as cc


def brent_rows(rng, sizes, reps):
    for s in sizes:
        depths, slack, ratios = [], [], []
        for _ in range(reps):
            g = cc.random_arity3_formula(rng, 3, rng.choice([5, 7, 9]), max_gates=s)
            trace: list = []
            out = cc.brent_arity3(cc.Circuit.single(g, 3), trace)
            depths.append(out.depth())
            slack.append(cc.brent_depth_bound(cc.tree_size(g)) - out.depth())
            ratios += [max(p) / t for t, p in trace]
        worst = max(ratios, default=0)
        print(f"brent  gates<={s:3d}  depth mean {statistics.mean(depths):5.1f}  max {max(depths):3d}"
              f"  min slack to bound {min(slack):5.1f}  worst part ratio {worst:.2f}")


def chain(length):
    x, y, z = (cc.var(i, 3) for i in range(3))
    g = x
    for k in range(length):
        g = cc.mul3(g, y, z) if k % 2 else cc.add(cc.mul3(g, x, y), cc.mul3(z, z, g))
    return g


def vsbr_rows(lengths):
    for n in lengths:
        c = cc.Circuit.single(chain(n), 3)
        d = cc.formal_degree(c.root)
        out = cc.vsbr_arity3(c)
        assert out.eval() == c.eval()
        print(f"vsbr   degree {d:4d}  size {c.size():4d} -> {out.size():5d}"
              f"  mult depth {c.mult_depth():3d} -> {out.mult_depth():3d}  bound {cc.vsbr_mult_depth_bound(d)}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    brent_rows(rng, [8, 16, 32, 64], args.reps)
    vsbr_rows([4, 8, 16, 32, 64, 128])


if __name__ == "__main__":
    main()
