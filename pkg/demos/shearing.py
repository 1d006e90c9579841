"""Small and large shearing on a rotation number with one very large partial quotient.

The fixture boosts its sparse quotients so that q_13 / q_12 is about 63; at
that order good pairs shear into the compact set P within one or two
returns, and type I pairs drift apart by a bounded multiple of log q.
"""
from arnoldlab import large_shearing_check, shear_constants, small_shearing_search
from arnoldlab.harness import SHEAR_ROOF, resolve_alpha, resolve_roof, sample_pairs

f = resolve_roof(SHEAR_ROOF)
cf = resolve_alpha("D_alpha:seed=0,depth=40,boost=4")
c = shear_constants(f, cf)
print(f"H = {float(c.H)}  P = {c.P_interval}  d1 = {float(c.d1)}  d2 = {float(c.d2)}")
print(f"q_12 = {cf.q[12]}  q_13 = {cf.q[13]}")

print("\nsmall shearing, order 12")
for x, y in sample_pairs(cf, 12, "good", 6, seed=1, y_sets=[("E_n", 12, None)]):
    out = small_shearing_search(f, x, y, cf, 12)
    print(f"  m = {out.m:2d}  ell0 = {out.ell0:3d}  difference = {out.difference:+.4f}  "
          f"p = {out.p:+.4f}  success = {out.success}")

print("\nlarge shearing, order 13, type I pairs")
pairs = sample_pairs(cf, 13, "type_I", 4, seed=2,
                     x_sets=[("E_n", 13, None), ("E_n", 14, None)], y_sets=[("E_n", 13, None)])
for x, y in pairs:
    out = large_shearing_check(f, x, y, cf, 13)
    print(f"  Delta = {out.delta:7.3f}  in [{out.d1}, {out.d2_log_q:.2f}]: {out.lower_ok and out.upper_ok}  "
          f"straddles = {len(out.straddle)}")
