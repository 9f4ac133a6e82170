"""Degree of the projection f = pi|_S for foliations presented by a submersion.

The base is read off the foliation: one flat coordinate gives a circle, a
sphere block gives RP^2.  Preimages of a regular value are found by a grid
scan of the parameter domain followed by Newton refinement, using a chart
centred at the regular value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import Config, default_config
from .detline import det_section
from .errors import FoliCheckError, NoRegularValue, NotTransverse
from .fields import Embedding, Foliation, _sphere_frame, jacobian_grid
from .modelspace import deck_sign
from .tangency import Verdict, locate

_GOLDEN = 0.6180339887498949
UNDEFINED = "undefined (nonorientable/twisted)"
NOT_COVERING = "not a covering"


# -- the base of a submersion --------------------------------------------------


@dataclass(frozen=True)
class Base:
    kind: str  # circle | rp2
    coords: tuple  # cover indices of the base coordinates
    deck: object = None  # antipodal element for rp2

    @property
    def dim(self) -> int:
        return 1 if self.kind == "circle" else 2

    @property
    def orientable(self) -> bool:
        return self.kind == "circle"


def base_of(fol: Foliation) -> Base:
    if not fol.is_submersion:
        raise FoliCheckError(f"foliation {fol.name!r} is not presented by a submersion; degree is not defined")
    blocks = [b for b in fol.model.sphere_blocks if b[0] in fol.base]
    if blocks:
        if len(fol.base) != 3 or len(blocks) != 1:
            raise FoliCheckError("sphere bases must be a single RP^2 factor")
        anti = next(g for g in fol.model.generators if g.name == "antipodal")
        return Base("rp2", tuple(blocks[0]), anti)
    if len(fol.base) != 1:
        raise FoliCheckError("flat bases of dimension above one are not in the catalog")
    return Base("circle", tuple(fol.base))


def candidates(base: Base, k: int = 16) -> list:
    """Deterministic candidate regular values."""
    if base.kind == "circle":
        return [((0.1234567 + i * _GOLDEN) % 1.0,) for i in range(k)]
    out = []
    for i in range(k):
        z = 1.0 - (2 * i + 1.3) / (k + 0.6)  # spherical Fibonacci, nudged off symmetric spots
        r = math.sqrt(max(0.0, 1.0 - z * z))
        phi = 2.399963229728653 * i + 0.3141
        v = np.array([r * math.cos(phi), r * math.sin(phi), z])
        out.append(tuple(v / np.linalg.norm(v)))
    return out


class _Chart:
    """Affine chart at b: cover point -> local coordinates vanishing over b."""

    def __init__(self, base: Base, b, cover_dim: int):
        self.base = base
        if base.kind == "circle":
            (i,) = base.coords
            self.b0 = float(b[0])
            self.lin = np.zeros((1, cover_dim))
            self.lin[0, i] = 1.0
        else:
            e1, e2 = _sphere_frame([np.float64(c) for c in b])
            self.lin = np.zeros((2, cover_dim))
            self.lin[0, list(base.coords)] = [float(c) for c in e1]
            self.lin[1, list(base.coords)] = [float(c) for c in e2]

    def __call__(self, X):
        """X has the cover index first."""
        g = np.tensordot(self.lin, X, axes=(1, 0))
        if self.base.kind == "circle":
            g = g - self.b0
            g = g - np.round(g)
        return g


# -- winding degree --------------------------------------------------------------


def winding_degree(emb: Embedding, fol: Foliation, samples: int = 64, max_samples: int = 1 << 20) -> int:
    """Turns of the circle map t -> pi(S(t)), from wrapped increments.

    The sample count doubles until two consecutive estimates agree.
    """
    base = base_of(fol)
    if base.kind != "circle" or emb.param_dim != 1:
        raise FoliCheckError("winding degree needs a circle S over a circle base")
    (i,) = base.coords
    prev = None
    n = samples
    while n <= max_samples:
        t = np.arange(n + 1) / n
        theta = emb.points(t)[i] % 1.0
        d = np.diff(theta)
        d -= np.round(d)
        est = int(round(float(np.sum(d))))
        if est == prev:
            return est
        prev = est
        n *= 2
    raise FoliCheckError("winding degree did not stabilise")


# -- preimages --------------------------------------------------------------------


@dataclass
class Preimages:
    value: tuple
    params: np.ndarray  # (m, n)
    dets: np.ndarray  # det d-perp at each preimage
    antipodal: np.ndarray  # rp2: preimage lies over -b in the cover
    regular: bool
    reason: str = ""

    @property
    def count(self) -> int:
        return len(self.params)


def _grid_points(emb: Embedding, n: int):
    g = np.arange(n + 1) / n
    if emb.param_dim == 1:
        return (g,), emb.points(g), 0.0
    A, T = g[:, None], g[None, :]
    X = emb.points(A, T)
    # largest image step between adjacent nodes bounds how far a cell can reach
    step = max(np.max(np.linalg.norm(np.diff(X, axis=k), axis=0)) for k in (1, 2))
    return (A, T), X, float(step)


def _dedupe(params, tol):
    out = []
    for p in params:
        if all(np.max(np.abs(((p - q) + 0.5) % 1.0 - 0.5)) >= tol for q in out):
            out.append(p)
    return out


def preimages(emb: Embedding, fol: Foliation, b, cfg: Config | None = None, ds=None, _cache=None) -> Preimages:
    """All parameter values mapping to the base point ``b``.

    ``regular`` is False when a preimage has |det d-perp| < tau_nd or the scan
    found a near-miss it could not resolve.
    """
    cfg = cfg or default_config()
    base = base_of(fol)
    n = int(cfg.preimage_grid)
    chart = _Chart(base, b, emb.target.cover_dim)
    U, X, step = _cache if _cache is not None else _grid_points(emb, n)
    G = chart(X)
    h = 1.0 / n
    if emb.param_dim == 1:
        g = G[0]
        a, c = g[:-1], g[1:]
        cont = np.abs(c - a) < 0.25
        hit = cont & ((a * c < 0) | (a == 0))
        near = cont & ~hit & (np.minimum(np.abs(a), np.abs(c)) < np.abs(c - a))
        idx = np.flatnonzero(hit | near)
        seeds = ((idx + 0.5) * h)[:, None]
    else:
        reach = 2.0 * step
        near = np.all(np.abs(G[:, :-1, :-1]) <= reach, axis=0)
        I, J = np.nonzero(near)
        mask = np.ones(len(I), dtype=bool)
        for g in G:
            c = np.stack([g[I, J], g[I + 1, J], g[I + 1, J + 1], g[I, J + 1]])
            lo, hi = c.min(axis=0), c.max(axis=0)
            mask &= ((lo <= 0) & (hi >= 0)) | (np.minimum(np.abs(lo), np.abs(hi)) < hi - lo)
        seeds = np.stack([I[mask] + 0.5, J[mask] + 0.5], axis=1) * h
    found = _dedupe(list(_newton(emb, chart, seeds, h) % 1.0), cfg.delta_sep)
    params = np.array(found).reshape(-1, emb.param_dim)
    ds = ds or det_section(emb, fol, check=False)
    dets = ds.evaluate(*params.T) if len(params) else np.zeros(0)
    anti = np.zeros(len(params), dtype=bool)
    if base.kind == "rp2" and len(params):
        pts = emb.points(*params.T)
        anti = np.einsum("ij,i->j", pts[list(base.coords)], np.asarray(b)) < 0
    regular = bool(np.all(np.abs(dets) >= cfg.tau_nd))
    reason = "" if regular else f"|det| = {np.min(np.abs(dets)):.3g} < tau_nd at a preimage"
    return Preimages(tuple(float(c) for c in b), params, dets, anti, regular, reason)


def _newton(emb, chart, seeds, h, iters=30):
    """Batched Newton from many seeds; rows that wander off or fail are dropped."""
    u0 = np.asarray(seeds, dtype=float).reshape(-1, emb.param_dim)
    if not len(u0):
        return u0
    u = u0.copy()
    alive = np.ones(len(u), dtype=bool)
    for _ in range(iters):
        g = chart(emb.points(*u.T)).T  # (m, k)
        J = jacobian_grid(emb, *u.T)  # (param, cover, m)
        M = np.einsum("kc,pcm->mkp", chart.lin, J)
        ok = np.abs(np.linalg.det(M)) > 1e-300
        alive &= ok
        M[~ok] = np.eye(M.shape[1])
        step = np.linalg.solve(M, -g[..., None])[..., 0]
        u = u + step
        alive &= np.max(np.abs(u - u0), axis=1) <= 4 * h
        if np.max(np.abs(step[alive]), initial=0.0) < 1e-14:
            break
    resid = np.max(np.abs(chart(emb.points(*u.T))), axis=0)
    return u[alive & (resid <= 1e-10)]


# -- degree report ----------------------------------------------------------------


@dataclass
class DegreeReport:
    integer_degree: object  # int or UNDEFINED
    mod2_degree: int
    sheet_count: object  # int or NOT_COVERING
    regular_value: tuple
    covering_checked: bool
    preimage_count: int = 0
    chart_signed_count: int = 0
    accepted_values: int = 0
    notes: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)

    def as_dict(self):
        return {
            "integer_degree": self.integer_degree,
            "mod2_degree": self.mod2_degree,
            "sheet_count": self.sheet_count,
            "regular_value": list(self.regular_value),
            "covering_checked": self.covering_checked,
            "preimage_count": self.preimage_count,
            "chart_signed_count": self.chart_signed_count,
            "accepted_regular_values": self.accepted_values,
            "notes": list(self.notes),
            "witness_intervals": [list(w) for w in self.witnesses],
        }


def mod2_degree(emb: Embedding, fol: Foliation, regular_value=None, cfg: Config | None = None, n_candidates: int = 16):
    """Parity of the preimage count at a regular value.

    Returns ``(bit, Preimages, accepted)``.  With no value given, every one of
    the candidates is tried; all accepted candidates must agree.
    """
    cfg = cfg or default_config()
    base = base_of(fol)
    cache = _grid_points(emb, int(cfg.preimage_grid))
    ds = det_section(emb, fol, check=False)
    if regular_value is not None:
        pre = preimages(emb, fol, regular_value, cfg, ds, cache)
        if pre.regular:
            return pre.count % 2, pre, 1
        # fall through to the candidates
    accepted = []
    for b in candidates(base, n_candidates):
        pre = preimages(emb, fol, b, cfg, ds, cache)
        if pre.regular:
            accepted.append(pre)
    if not accepted:
        raise NoRegularValue(f"none of {n_candidates} candidate base points is a regular value")
    bits = {p.count % 2 for p in accepted}
    if len(bits) != 1:
        raise FoliCheckError(f"mod-2 degree depends on the regular value: counts {[p.count for p in accepted]}")
    return bits.pop(), accepted[0], len(accepted)


def chart_signed_count(pre: Preimages, base: Base) -> int:
    """Signed preimage count in the chart at b; over -b the antipodal transport
    contributes its base orientation character."""
    s = 0
    for d, anti in zip(pre.dets, pre.antipodal):
        sign = 1 if d > 0 else -1
        if anti:
            sign *= deck_sign(base.deck, "det_base")
        s += sign
    return s


def covering_check(emb: Embedding, fol: Foliation, cfg: Config | None = None, samples: int = 8, locus=None) -> dict:
    """Verify pi|_S is a covering: transverse everywhere, constant sheet count."""
    cfg = cfg or default_config()
    base = base_of(fol)
    if locus is None:
        ds = det_section(emb, fol)
        zeros, curves, cert = locate(ds, cfg)
        if zeros or curves:
            where = f"t={zeros[0].t:.6g}" if zeros else "along a curve"
            raise NotTransverse(f"S is tangent to {fol.name!r} ({where}); the covering claim does not apply")
        if not cert.holds:
            raise NotTransverse("transversality could not be certified")
    elif not locus.empty:
        raise NotTransverse("tangency locus is nonempty; the covering claim does not apply")
    cache = _grid_points(emb, int(cfg.preimage_grid))
    ds = det_section(emb, fol, check=False)
    counts, witnesses = [], []
    for b in candidates(base, samples):
        c = preimages(emb, fol, b, cfg, ds, cache).count
        counts.append(c)
        if base.kind == "circle":
            delta = 0.01
            lo = preimages(emb, fol, ((b[0] - delta) % 1.0,), cfg, ds, cache).count
            hi = preimages(emb, fol, ((b[0] + delta) % 1.0,), cfg, ds, cache).count
            if lo == hi == c:
                witnesses.append((round(b[0] - delta, 12), round(b[0] + delta, 12), c))
    if len(set(counts)) != 1:
        raise FoliCheckError(f"sheet counts differ across base points: {counts}")
    return {"sheet_count": counts[0], "counts": counts, "witnesses": witnesses}


def degree_report(emb: Embedding, fol: Foliation, locus=None, cfg: Config | None = None) -> DegreeReport:
    cfg = cfg or default_config()
    base = base_of(fol)
    notes = ["properness is automatic: S is compact", "the base is connected: the pushforward has a single summand"]
    integer = UNDEFINED
    if base.orientable and emb.param_dim == 1:
        integer = winding_degree(emb, fol)
    bit, pre, accepted = mod2_degree(emb, fol, cfg=cfg)
    if integer != UNDEFINED and bit != abs(integer) % 2:
        raise FoliCheckError(f"mod-2 degree {bit} disagrees with integer degree {integer}")
    sheets, checked, witnesses = NOT_COVERING, False, []
    if locus is not None and locus.empty:
        cov = covering_check(emb, fol, cfg, locus=locus)
        sheets, checked, witnesses = cov["sheet_count"], True, cov["witnesses"]
    if not base.orientable:
        notes.append("base is nonorientable: only the mod-2 degree is reported")
    return DegreeReport(
        integer_degree=integer,
        mod2_degree=bit,
        sheet_count=sheets,
        regular_value=tuple(round(c, 12) for c in pre.value),
        covering_checked=checked,
        preimage_count=pre.count,
        chart_signed_count=chart_signed_count(pre, base),
        accepted_values=accepted,
        notes=notes,
        witnesses=witnesses,
    )


# -- the degree criterion -------------------------------------------------------------

CONFIRMED = "criterion confirmed"
SILENT = "transverse covering (criterion silent)"
SILENT_TANGENT = "criterion silent (tangencies present)"
INCONSISTENT = "INCONSISTENT"
NOT_APPLICABLE = "not applicable"


def degree_criterion_verdict(fol: Foliation, degree: DegreeReport | None, locus) -> Verdict:
    """A zero degree forces a tangency; a nonzero one says nothing."""
    if not fol.is_submersion or degree is None:
        return Verdict(
            "degree_criterion",
            None,
            {"outcome": NOT_APPLICABLE, "reason": "foliation is not presented by a submersion; see the parity check"},
        )
    datum = degree.integer_degree if degree.integer_degree != UNDEFINED else degree.mod2_degree
    empty = locus.empty
    if datum == 0 and empty:
        outcome, ok = INCONSISTENT, False
    elif datum == 0:
        outcome, ok = CONFIRMED, True
    elif empty:
        outcome, ok = SILENT, True
    else:
        outcome, ok = SILENT_TANGENT, True
    details = {"outcome": outcome, "degree_datum": datum, "locus_empty": empty}
    if datum != 0 and empty:
        details["note"] = "a transverse S of nonzero degree meets every leaf"
    return Verdict("degree_criterion", ok, details)
