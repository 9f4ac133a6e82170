"""Brute-force cross-checks for the tangency and degree pipeline.

Nothing here reuses the grid, root refinement or curve chaining of the main
pipeline: the section is sampled densely and sign changes are counted.  Loops
are walked as one continuous straight path in the cover, so no seam
bookkeeping is needed along the way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detline import generator_loops
from .tangency import loop_basepoint, loop_offsets

DENSE = 100_000
_SHIFT = 0.3819660112501051  # keeps samples off rational points such as t = 0 or 1/4


def _sign_changes(v: np.ndarray) -> int:
    s = np.sign(v)
    return int(np.count_nonzero(s[:-1] * s[1:] < 0) + np.count_nonzero(s[1:-1] == 0))


def zero_count_1d(ds, n: int = DENSE) -> int:
    """Zeros of a section over a circle from n samples plus the seam pair."""
    t = (np.arange(n) + _SHIFT) / n
    v = ds.evaluate(t)
    closing = ds.seam_signs[0] * v[0]
    return _sign_changes(np.append(v, closing))


def loop_crossings(ds, gen_index: int, offset: float, n: int = DENSE) -> int:
    """Sign changes of the section along the straight cover path p0 -> sigma(p0)."""
    dom = ds.domain
    gen = dom.generators[gen_index]
    p0 = loop_basepoint(dom, gen_index, offset) if dom.dim == 2 else np.zeros(1)
    p1 = np.array(gen.apply([np.array(x) for x in p0]), dtype=float)
    s = (np.arange(n + 1)) / n
    pts = p0[:, None] + s[None, :] * (p1 - p0)[:, None]
    return _sign_changes(ds.evaluate(*pts))


def sign_map_nonempty(ds, n: int = 512) -> bool:
    """True when a dense grid shows both signs, so a zero curve must exist."""
    g = (np.arange(n) + _SHIFT) / n
    v = ds.evaluate(g[:, None], g[None, :])
    return bool(np.any(v > 0) and np.any(v < 0))


def preimage_count_1d(emb, coord: int, b: float, n: int = DENSE) -> int:
    """Crossings of the base coordinate through b along a closed curve."""
    t = (np.arange(n + 1) + _SHIFT) / n
    x = emb.points(t)[coord] - b
    x = x - np.round(x)
    a, c = x[:-1], x[1:]
    jump = np.abs(c - a) > 0.25
    return int(np.count_nonzero(~jump & (a * c < 0)))


@dataclass
class OracleReport:
    agree: bool
    zero_count: dict = field(default_factory=dict)
    crossings: dict = field(default_factory=dict)
    preimages: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {
            "agree": self.agree,
            "zero_count": self.zero_count,
            "crossings": self.crossings,
            "preimages": self.preimages,
            "notes": list(self.notes),
        }


def compare(locus, pd=None, degree=None, fol=None, n: int = DENSE) -> OracleReport:
    """Compare a located tangency set (and optional degree data) with dense scans."""
    ds = locus.section
    rep = OracleReport(True)
    if ds.dim == 1:
        dense = zero_count_1d(ds, n)
        main = len(locus.zeros)
        rep.zero_count = {"main": main, "oracle": dense, "agree": main == dense}
        rep.agree &= main == dense
    else:
        nonempty = sign_map_nonempty(ds)
        main = not locus.empty
        rep.zero_count = {"main_nonempty": main, "oracle_nonempty": nonempty, "agree": main == nonempty}
        rep.agree &= main == nonempty
        rows = (pd.details.get("loops") if pd is not None else None) or {}
        for gi, loop in enumerate(generator_loops(ds.domain)):
            row = rows.get(loop.name)
            off = row["offset"] if row else next(loop_offsets())
            dense = loop_crossings(ds, gi, off, n)
            entry = {"oracle": dense, "oracle_parity": dense % 2, "offset": off}
            if row:
                entry.update(main=row["crossings"], main_parity=row["parity"])
                entry["agree"] = dense % 2 == row["parity"]
                rep.agree &= entry["agree"]
                if dense != row["crossings"]:
                    rep.notes.append(f"{loop.name}: crossing counts differ ({row['crossings']} vs {dense}); parities compared")
            rep.crossings[loop.name] = entry
    if degree is not None and fol is not None and ds.dim == 1 and len(fol.base) == 1:
        b = degree.regular_value[0]
        dense = preimage_count_1d(locus.embedding, fol.base[0], b, n)
        ok = dense == degree.preimage_count
        rep.preimages = {"value": b, "main": degree.preimage_count, "oracle": dense, "agree": ok}
        rep.agree &= ok
    return rep
