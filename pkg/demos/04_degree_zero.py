"""A curve of degree zero over the base circle has to turn back somewhere.

theta(t) = amp * sin(2 pi t) winds zero times, so it cannot be a covering
of the base and it is tangent to the vertical circles at the turning points.
"""

import numpy as np

from folicheck import builtin, degree_report, perturb_until_generic, run_sweep
from folicheck.degree import covering_check, degree_criterion_verdict
from folicheck.errors import NotTransverse

for amp in (0.05, 0.25, 0.45):
    sc = builtin("torus_zero_winding", amp=amp)
    emb, locus = perturb_until_generic(sc.embedding, sc.foliation, sc.family())
    rep = degree_report(emb, sc.foliation, locus)
    v = degree_criterion_verdict(sc.foliation, rep, locus)
    zs = [round(z.t, 6) for z in locus.zeros]
    print(f"amp {amp}: degree {rep.integer_degree}, tangencies at t = {zs}, {v.details['outcome']}")

try:
    covering_check(sc.embedding, sc.foliation)
except NotTransverse as e:
    print("covering check:", e)

rows, summary = run_sweep(builtin("torus_zero_winding"), range(30))
counts = np.array([r["zero_count"] for r in rows])
print(f"30 perturbed runs: counts between {counts.min()} and {counts.max()}, all even: {bool(np.all(counts % 2 == 0))}")
print("runs with degree 0 and no tangency:", summary["inconsistent"])
