"""A section of the Klein bottle must touch the horizontal line foliation.

The normal bundle of the foliation flips orientation around the curve
while the curve's own tangent line does not, so the determinant section
changes sign once per lap.  Any small perturbation keeps an odd number of zeros.
"""

from collections import Counter

from folicheck import builtin, perturb_until_generic, w1_identity_check
from folicheck.detline import det_section

sc = builtin("klein_nonTO")

ds = det_section(sc.embedding, sc.foliation)
ident = w1_identity_check(ds)
print("pairings on the loop (TS, normal, det line):")
for name, ts, nu, L in ident.rows:
    print(f"  {name}: {ts} {nu} {L}")

emb, locus = perturb_until_generic(sc.embedding, sc.foliation, sc.family())
print("unperturbed zeros:", [(round(z.t, 6), round(z.derivative, 4)) for z in locus.zeros])

counts = Counter()
for seed in range(40):
    for eps in (0.01, 0.05, 0.1):
        _, locus = perturb_until_generic(sc.embedding, sc.foliation, sc.family(eps, seed))
        counts[len(locus.zeros)] += 1
print("zero counts over 120 perturbations:", dict(sorted(counts.items())))
print("all odd:", all(n % 2 for n in counts))
