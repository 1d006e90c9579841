"""Follow one point of the special flow and write its trajectory to CSV.

Usage: python3 demos/flow_trajectory.py [out.csv]
"""
import sys

from arnoldlab import FlowPoint, golden, make_roof
from arnoldlab.circle import CirclePoint
from arnoldlab.flow import flow, write_trajectory_csv

f = make_roof(0.5, 0.25)
cf = golden(40)
p = FlowPoint(CirclePoint.from_fraction("1/3"), 0.1)
rows = []
for n in range(1, 41):
    step = flow(f, p, 0.25 * n, cf)
    rows.append((n, 0.25 * n, step))
    print(f"t = {0.25 * n:5.2f}  m = {step.m:3d}  x = {float(step.target.x):.12f}  s = {step.target.s:.6f}")
if len(sys.argv) > 1:
    write_trajectory_csv(sys.argv[1], rows)
    print(f"wrote {sys.argv[1]}")
