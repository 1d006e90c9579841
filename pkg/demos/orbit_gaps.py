"""Gaps of orbit segments {x + i alpha}, 0 <= i < q_n, against 1/(2 q_n) and 2/q_n."""
import numpy as np

from arnoldlab import CirclePoint, golden, orbit_spacing_check, silver

rng = np.random.default_rng(0)
x = CirclePoint.random(rng)
for cf in (golden(40), silver(30)):
    print(f"alpha = {cf.label}")
    print(f"{'n':>3} {'q_n':>10} {'2 q min gap':>12} {'q max gap / 2':>14}")
    for n in range(2, 21, 3):
        rep = orbit_spacing_check(x, cf, n)
        print(f"{n:>3} {rep.q:>10} {2 * rep.q * float(rep.min_gap):>12.4f} {rep.q * float(rep.max_gap) / 2:>14.4f}")
    print()
