"""Tangency curves of a torus in S^1 x RP^2 against the circle fibers.

The unperturbed torus is tangent everywhere, so we perturb and extract the
zero curves of the determinant with marching squares on the quotient.  Their
crossing parities with the two generator loops match the det-line pairings.
"""

from folicheck import builtin, perturb_until_generic
from folicheck.detline import w1_identity_check
from folicheck.tangency import crossing_parities, extract_zero_curve_2d

sc = builtin("rp2_product")

for seed in range(4):
    emb, locus = perturb_until_generic(sc.embedding, sc.foliation, sc.family(0.05, seed))
    ds = locus.section
    table = crossing_parities(locus.curves, ds)
    sizes = [c.n_vertices for c in locus.curves]
    print(f"seed {seed}: {len(locus.curves)} curve(s) with {sizes} vertices")
    for loop, row in sorted(table.items()):
        print(f"   {loop:<6} crossings {row['crossings']:>2}  parity {row['parity']}")

    # same parities on a grid twice as fine
    fine = extract_zero_curve_2d(ds, 2 * locus.grid_n, certify=False)
    again = crossing_parities(fine.curves, ds)
    print("   stable under grid doubling:", all(again[k]["parity"] == table[k]["parity"] for k in table))

print("det-line pairings:", {r[0]: r[3] for r in w1_identity_check(ds).rows})
