"""A slope-2/3 curve on the flat torus never touches the vertical circles.

Walk through the pieces by hand: the determinant of the normal block,
the winding degree and the sheet count over a few base points.
"""

import numpy as np

from folicheck import builtin, degree_report, det_section, perturb_until_generic
from folicheck.degree import covering_check, degree_criterion_verdict

sc = builtin("torus_pq", p=2, q=3)
emb, fol = sc.embedding, sc.foliation

# the normal block is 1x1 here: d theta / dt, which is constant
ds = det_section(emb, fol)
t = np.linspace(0, 1, 9)
print("det along the curve:", np.round(ds.evaluate(t), 6))

emb, locus = perturb_until_generic(emb, fol, sc.family())
print("tangency locus empty:", locus.empty, "| certified:", locus.certificate.holds)

rep = degree_report(emb, fol, locus)
print("winding degree:", rep.integer_degree, "| mod 2:", rep.mod2_degree)

cov = covering_check(emb, fol)
print("preimage counts at 8 base points:", cov["counts"])
for lo, hi, n in cov["witnesses"][:3]:
    print(f"  evenly covered: ({lo:.4f}, {hi:.4f}) has {n} sheets over it")

v = degree_criterion_verdict(fol, rep, locus)
print("degree criterion:", v.details["outcome"])
print("  ", v.details["note"])
