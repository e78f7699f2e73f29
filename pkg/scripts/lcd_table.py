"""Print LCD and subvector LCD for a few named directions across sizes.

Usage: python3 scripts/lcd_table.py [alpha] [gamma]
"""
import math
import sys

import numpy as np

from rmtlab import arithmetic
from rmtlab.experiments import unit_vector


def main(alpha=0.05, gamma=0.1, cap=1e3):
    params = arithmetic.LcdParams(alpha, gamma, cap=cap)
    print(f"alpha={alpha} gamma={gamma} cap={cap:g}")
    print(f"{'n':>4} {'vector':>10} {'lcd':>14} {'branch':>13} {'sub_lcd':>14}")
    for n in (4, 8, 16, 32, 64):
        for name in ("e1", "constant", "two_level", "random"):
            v = unit_vector(name, n, seed=n)
            res = arithmetic.lcd(v, params)
            mode = "exact" if math.comb(n, int(0.2 * n)) <= 2000 else "heuristic"
            sub = arithmetic.subvector_lcd(v, params, 0.1, mode=mode, seed=n)
            print(f"{n:4d} {name:>10} {res.value:14.6g} {res.binding_constraint:>13} {sub.value:14.6g}")


if __name__ == "__main__":
    main(*map(float, sys.argv[1:3]))
