"""Number of forms produced by continuant compilation versus formula size."""

import random

from bordercx import circuitc as cc
from bordercx.polyring import equiv_mod_eps


def main(seed=3):
    rng = random.Random(seed)
    print("d  gates  r     k-values")
    for d in (3, 5, 7):
        for gates in (2, 4, 8):
            g = cc.random_arity3_formula(rng, 3, d, max_gates=gates)
            res = cc.continuant_compile(g, d, 3)
            assert equiv_mod_eps(res.evaluate(), cc.evaluate(g, 3))
            ks = sorted(set(res.stats.get("k", [])))
            print(f"{d}  {cc.tree_size(g):5d}  {res.r:4d}  {ks}")


if __name__ == "__main__":
    main()
