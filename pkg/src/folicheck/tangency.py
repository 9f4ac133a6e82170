"""Tangency loci of S: perturbation, zero extraction, and the mod-2 checks.

For one-dimensional S the locus is a finite set of parameter values; for
two-dimensional S it is a union of closed curves in the parameter surface,
extracted by marching squares on the quotient grid (seams glued with the
section's transition signs).  Each extraction returns a certificate that
bounds what the sampling could have missed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exprdsl as X
from .config import Config, default_config
from .detline import Section, det_section, generator_loops, w1_pairing
from .errors import (
    DegenerateSection,
    GenericityFailed,
    NonGenericLoopPlacement,
    OpenChainError,
    SuspectedDegenerate,
    ValidationError,
)
from .fields import Embedding, Foliation, make_embedding, sample_params

_TINY = np.nextafter(0.0, 1.0)
_GOLDEN = 0.6180339887498949


# -- perturbations ------------------------------------------------------------


@dataclass(frozen=True)
class BasisField:
    """Displacement ``B(u) * e_coord`` with harmonic indices per parameter axis."""

    coord: int
    harmonics: tuple  # ((k, "cos"|"sin"), ...) one per axis; argument pi*k*u
    c1_norm: float

    def label(self, names) -> str:
        parts = []
        for (k, kind), n in zip(self.harmonics, names):
            parts.append("1" if k == 0 else f"{kind}({k}*pi*{n})")
        return "*".join(parts)


def _harmonic_node(cache, name, k, kind):
    key = (name, k, kind)
    if key not in cache:
        if k == 0:
            cache[key] = X.Num(1.0)
        else:
            arg = X.Bin("*", X.Bin("*", X.Num(float(k)), X.Pi()), X.Name(name))
            cache[key] = X.Call(kind, arg)
    return cache[key]


def _axis_harmonics(degree):
    out = [(0, "cos")]
    for k in range(1, 2 * degree + 1):
        out += [(k, "cos"), (k, "sin")]
    return out


def _parity(kind, k, flip):
    """Factor picked up by cos/sin(pi k x) under x -> x + shift (flip=False) or x -> -x."""
    if flip:
        return 1 if kind == "cos" else -1
    return 1 if k % 2 == 0 else -1


def equivariant_basis(emb: Embedding, degree: int = 3) -> tuple:
    """Trig-product displacements that commute with every seam.

    A displacement V is admissible when V(sigma u) = A V(u) for each seam
    sigma with deck linear part A; this keeps the perturbed map closed.
    Averaging a harmonic over the seam either returns it or kills it, so the
    basis is the set of survivors.
    """
    dom = emb.domain
    A = [np.asarray(g.A) for g in emb.seams]
    for M in A:
        if not np.array_equal(M, np.diag(np.diag(M))):
            raise ValidationError("perturbation", "seam deck elements must have diagonal linear part")
    per_axis = [_axis_harmonics(degree) for _ in dom.names]
    combos = [()]
    for hs in per_axis:
        combos = [c + (h,) for c in combos for h in hs]
    out = []
    for coord in range(emb.target.cover_dim):
        for combo in combos:
            ok = True
            for gen, M in zip(dom.generators, A):
                factor = 1
                for ax, (k, kind) in enumerate(combo):
                    if ax == gen.axis:
                        factor *= _parity(kind, k, False)
                    elif gen.flip == ax and k:
                        factor *= _parity(kind, k, True)
                if factor != M[coord, coord]:
                    ok = False
                    break
            if ok:
                c1 = 1.0 + sum(math.pi * k for k, _ in combo)
                out.append(BasisField(coord, combo, c1))
    return tuple(out)


@dataclass(frozen=True)
class PerturbationFamily:
    """C^1-bounded equivariant perturbations.

    Attempt ``k`` draws coefficients in [-1, 1] from ``seed + k``; each
    coordinate's displacement is scaled so its C^1 norm is at most ``eps``.
    """

    basis: tuple
    eps: float
    seed: int
    degree: int = 3

    @property
    def c1_bound(self) -> float:
        return self.eps

    def coefficients(self, attempt: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed + attempt)
        return rng.uniform(-1.0, 1.0, size=len(self.basis))

    def apply(self, emb: Embedding, attempt: int = 0, cfg: Config | None = None) -> Embedding:
        if self.eps == 0 or not self.basis:
            return emb
        c = self.coefficients(attempt)
        names = emb.domain.names
        cache = {}
        exprs = list(emb.component_exprs)
        for coord in range(emb.target.cover_dim):
            idx = [i for i, b in enumerate(self.basis) if b.coord == coord]
            if not idx:
                continue
            bound = sum(abs(c[i]) * self.basis[i].c1_norm for i in idx)
            if bound == 0:
                continue
            # factor by the first-axis harmonic: sum_h0 h0(u0) * (sum c * rest)
            groups = {}
            for i in idx:
                groups.setdefault(self.basis[i].harmonics[0], []).append(i)
            terms = []
            for h0, members in groups.items():
                inner = []
                for i in members:
                    rest = [_harmonic_node(cache, names[ax], k, kind) for ax, (k, kind) in enumerate(self.basis[i].harmonics) if ax > 0]
                    node = X.num(c[i])
                    for r in rest:
                        if not (isinstance(r, X.Num) and r.value == 1.0):
                            node = X.Bin("*", node, r)
                    inner.append(node)
                head = _harmonic_node(cache, names[0], *h0)
                s = X.total(inner)
                terms.append(s if isinstance(head, X.Num) else X.Bin("*", head, s))
            disp = X.Bin("*", X.num(self.eps / bound), X.total(terms))
            exprs[coord] = X.Bin("+", exprs[coord], disp)
        cfg = cfg or default_config()
        return make_embedding(
            emb.target, emb.domain, exprs, dict(emb.params), seams=emb.seams, cfg=cfg, validate=True
        )


def make_family(emb: Embedding, eps: float, seed: int, degree: int = 3) -> PerturbationFamily:
    basis = equivariant_basis(emb, degree) if eps else ()
    return PerturbationFamily(basis, float(eps), int(seed), degree)


# -- certificates ---------------------------------------------------------------


@dataclass
class GenericityCertificate:
    grid: int
    min_abs_off: float  # min |det| over grid nodes away from the zero set
    min_grad_on_z: float  # min |d det| at located zeros (inf if none)
    lipschitz: float
    lipschitz_grad: float
    uncertified_cells: int
    attempts: int = 1
    reasons: list = field(default_factory=list)
    bad_cells: list = field(default_factory=list)  # first few uncertified cells

    @property
    def holds(self) -> bool:
        return self.uncertified_cells == 0 and not self.reasons

    def as_dict(self):
        return {
            "grid": self.grid,
            "min_abs_off_Z": self.min_abs_off,
            "min_grad_on_Z": self.min_grad_on_z if math.isfinite(self.min_grad_on_z) else None,
            "lipschitz": self.lipschitz,
            "lipschitz_grad": self.lipschitz_grad,
            "uncertified_cells": self.uncertified_cells,
            "attempts": self.attempts,
            "holds": self.holds,
            "reasons": list(self.reasons),
        }


# -- one-dimensional zeros ---------------------------------------------------------


@dataclass(frozen=True)
class Zero:
    t: float
    derivative: float


@dataclass
class ZeroSet:
    zeros: list
    certificate: GenericityCertificate


def _circ_dist(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def _bisect(f, lo, hi, flo, tol):
    """Vectorized bisection; ``flo`` are the values at ``lo`` (nonzero)."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    slo = np.sign(flo)
    while True:
        width = np.max(np.abs(hi - lo)) if lo.size else 0.0
        if width <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        same = np.sign(fm) == slo
        exact = fm == 0
        lo = np.where(same & ~exact, mid, lo)
        hi = np.where(same & ~exact, hi, mid)
        lo = np.where(exact, mid, lo)
        if np.all(np.abs(hi - lo) == 0):
            break
    return 0.5 * (lo + hi)


def _illinois(f, lo, hi, flo, fhi, tol, maxit=100):
    """Vectorized bracketed regula falsi (Illinois variant) on [lo, hi]."""
    lo, hi = np.array(lo, dtype=float), np.array(hi, dtype=float)
    flo, fhi = np.array(flo, dtype=float), np.array(fhi, dtype=float)
    x = lo.copy()
    side = np.zeros(lo.shape, dtype=int)
    for _ in range(maxit):
        x_new = (lo * fhi - hi * flo) / (fhi - flo)
        x_new = np.where(np.isfinite(x_new), x_new, 0.5 * (lo + hi))
        fx = f(x_new)
        done = (np.abs(x_new - x) <= tol) | (fx == 0)
        x = x_new
        if np.all(done):
            break
        left = np.sign(fx) == np.sign(flo)  # root lies in [x, hi]
        lo, flo = np.where(left, x, lo), np.where(left, fx, flo)
        hi, fhi = np.where(left, hi, x), np.where(left, fhi, fx)
        # halve the stale endpoint when the same side moves twice in a row
        fhi = np.where(left & (side == 1), 0.5 * fhi, fhi)
        flo = np.where(~left & (side == -1), 0.5 * flo, flo)
        side = np.where(left, 1, -1)
    return x


def find_zeros_1d(ds: Section, grid_n: int | None = None, refine_tol: float | None = None, cfg: Config | None = None) -> ZeroSet:
    """Zeros of a section over the circle, with seam signs at the wrap cell."""
    cfg = cfg or default_config()
    N = int(grid_n or cfg.grid_1d)
    if N < 64:
        raise ValueError("grid_n must be at least 64")
    tol = refine_tol if refine_tol is not None else cfg.refine_tol
    s = ds.seam_signs[0]
    t = np.arange(N) / N
    v, (g,) = ds.evaluate_with_grad(t)
    vx = np.append(v, s * v[0])
    gx = np.append(g, s * g[0])
    h = 1.0 / N
    node_zero = v == 0
    a, b = vx[:-1], vx[1:]
    change = (a * b) < 0
    quiet = (np.abs(a) < cfg.tau_nd * h) & (np.abs(b) < cfg.tau_nd * h) & ~change
    quiet &= ~(node_zero | np.roll(node_zero, -1))
    if np.any(quiet):
        i = int(np.flatnonzero(quiet)[0])
        raise SuspectedDegenerate(f"|det| below tau_nd*h at both ends of cell {i} without a sign change")

    cells = np.flatnonzero(change)
    ts = list(t[node_zero])
    if cells.size:
        roots = _bisect(lambda x: ds.evaluate(x), t[cells], t[cells] + h, a[cells], tol)
        ts += list(roots % 1.0)
    ts = np.sort(np.array(ts, dtype=float))

    reasons = []
    merged = []
    for z in ts:
        if merged and _circ_dist(z, merged[-1]) < cfg.delta_sep:
            reasons.append(f"zeros closer than delta_sep near t={z:.6f}")
            continue
        merged.append(z)
    if len(merged) > 1 and _circ_dist(merged[0], merged[-1]) < cfg.delta_sep:
        reasons.append("zeros closer than delta_sep across the seam")
        merged.pop()
    merged = np.array(merged)
    derivs = ds.evaluate_with_grad(merged)[1][0] if merged.size else np.array([])
    zeros = [Zero(float(z), float(d)) for z, d in zip(merged, derivs)]

    # certificate: each cell is either Lipschitz-clear of zeros or monotone
    lip = 1.25 * float(np.max(np.abs(gx)))
    lip2 = 1.25 * float(np.max(np.abs(np.diff(gx)))) / h
    clear = np.minimum(np.abs(a), np.abs(b)) >= 2 * lip * h
    ga, gb = gx[:-1], gx[1:]
    monotone = (ga * gb > 0) & (np.minimum(np.abs(ga), np.abs(gb)) >= 0.5 * lip2 * h)
    # a node zero is fine if the slope there is nonzero and the cell is monotone
    ok = clear | monotone
    uncertified = int(np.count_nonzero(~ok))
    off = clear & ~change
    min_off = float(np.min(np.minimum(np.abs(a), np.abs(b))[off])) if np.any(off) else float("inf")
    min_grad = float(np.min(np.abs(derivs))) if len(zeros) else float("inf")
    if len(zeros) and min_grad < cfg.tau_nd:
        reasons.append(f"|d det| = {min_grad:.3g} < tau_nd at a zero")
    cert = GenericityCertificate(N, min_off, min_grad, lip, lip2, uncertified, 1, reasons)
    return ZeroSet(zeros, cert)


# -- two-dimensional zero curves -------------------------------------------------


class _QuotientGrid:
    """Index arithmetic on the (N+1)^2 node grid of the closed fundamental square.

    Points are kept in doubled integer coordinates so that edge midpoints are
    integral.  ``reduce`` brings a point into [0, 2N)^2 using the seam maps and
    returns the affine map used together with the accumulated seam sign.
    """

    def __init__(self, domain, seam_signs, N):
        self.N = N
        self.M2 = 2 * N
        self.gens = []
        for g, s in zip(domain.generators, seam_signs):
            M = np.eye(2, dtype=int)
            if g.flip is not None:
                M[g.flip, g.flip] = -1
            c = np.zeros(2, dtype=int)
            c[g.axis] = self.M2
            self.gens.append((M, c, s, g.name))

    def reduce(self, p):
        p = np.array(p, dtype=int)
        M_tot = np.eye(2, dtype=int)
        c_tot = np.zeros(2, dtype=int)
        sign = 1
        for _ in range(64):
            moved = False
            for M, c, s, _name in reversed(self.gens):
                ax = int(np.flatnonzero(c)[0])
                if p[ax] >= self.M2:
                    # apply sigma^-1: x -> M^-1 (x - c); M is its own inverse
                    p = M @ (p - c)
                    M_tot, c_tot = M @ M_tot, M @ (c_tot - c)
                    sign *= s
                    moved = True
                elif p[ax] < 0:
                    p = M @ p + c
                    M_tot, c_tot = M @ M_tot, M @ c_tot + c
                    sign *= s
                    moved = True
            if not moved:
                return p, M_tot, c_tot, sign
        raise RuntimeError("seam reduction did not terminate")


@dataclass
class ZeroCurve:
    vertices: np.ndarray  # (m, 2) canonical points in [0, 1)^2, closed cyclically
    segments: np.ndarray  # (m, 2, 2) each segment in the coordinates of its grid cell
    seam_crossings: list  # (vertex index, generator name, direction)

    @property
    def n_vertices(self):
        return len(self.vertices)

    def length(self):
        d = self.segments[:, 1] - self.segments[:, 0]
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))


@dataclass
class CurveSet:
    curves: list
    certificate: GenericityCertificate
    grid_n: int
    section: Section = None

    @property
    def all_segments(self):
        if not self.curves:
            return np.zeros((0, 2, 2))
        return np.concatenate([c.segments for c in self.curves])


# edges: 0 bottom (c0-c1), 1 right (c1-c2), 2 top (c3-c2), 3 left (c0-c3)
_EDGE_CORNERS = ((0, 1), (1, 2), (3, 2), (0, 3))
_CORNER_OFF = ((0, 0), (1, 0), (1, 1), (0, 1))


def _grid_values(ds: Section, N: int):
    x = np.arange(N + 1) / N
    v, g = ds.evaluate_with_grad(x[:, None], x[None, :])
    return v, g


def extract_zero_curve_2d(
    ds: Section, grid_n: int | None = None, cfg: Config | None = None, certify: bool = True
) -> CurveSet:
    """Marching squares for det = 0 over the parameter quotient.

    ``certify=False`` skips the gradient grid and the certificate, for cheap
    cross-checks at a second resolution.
    """
    cfg = cfg or default_config()
    N = int(grid_n or cfg.grid_2d)
    if N < 64:
        raise ValueError("grid_n must be at least 64")
    h = 1.0 / N
    Q = _QuotientGrid(ds.domain, ds.seam_signs, N)
    if certify:
        raw, (gxa, gxt) = _grid_values(ds, N)
    else:
        x = np.arange(N + 1) / N
        raw = ds.evaluate(x[:, None], x[None, :])
    base = raw[:N, :N].copy()
    base[base == 0] = _TINY  # fixed tie-break keeps classes consistent across seams
    ext = np.empty((N + 1, N + 1))
    ext[:N, :N] = base
    for i in range(N + 1):
        for j in range(N + 1):
            if i < N and j < N:
                continue
            p, _, _, s = Q.reduce((2 * i, 2 * j))
            ext[i, j] = s * base[p[0] // 2, p[1] // 2]
    pos = ext > 0
    code = (
        pos[:-1, :-1].astype(int)
        | (pos[1:, :-1].astype(int) << 1)
        | (pos[1:, 1:].astype(int) << 2)
        | (pos[:-1, 1:].astype(int) << 3)
    )
    active = np.argwhere((code != 0) & (code != 15))

    # canonical edges that carry a crossing
    def edge_endpoints(i, j, e):
        a, b = _EDGE_CORNERS[e]
        return (i + _CORNER_OFF[a][0], j + _CORNER_OFF[a][1]), (i + _CORNER_OFF[b][0], j + _CORNER_OFF[b][1])

    keys = {}
    cell_edges = []
    for i, j in active:
        bits = [pos[i + o[0], j + o[1]] for o in _CORNER_OFF]
        crossing = [e for e, (a, b) in enumerate(_EDGE_CORNERS) if bits[a] != bits[b]]
        entry = []
        for e in crossing:
            P, R = edge_endpoints(i, j, e)
            mid = (P[0] + R[0], P[1] + R[1])
            red, M, c, _ = Q.reduce(mid)
            key = (int(red[0]), int(red[1]))
            keys.setdefault(key, None)
            entry.append((e, key, M, c))
        cell_edges.append((i, j, bits, entry))

    # locate crossings on canonical edges
    key_list = list(keys)
    if key_list:
        K = np.array(key_list)
        horiz = (K[:, 0] % 2) == 1
        p0 = np.where(horiz[:, None], np.stack([K[:, 0] - 1, K[:, 1]], 1), np.stack([K[:, 0], K[:, 1] - 1], 1))
        p1 = np.where(horiz[:, None], np.stack([K[:, 0] + 1, K[:, 1]], 1), np.stack([K[:, 0], K[:, 1] + 1], 1))
        v0 = ext[p0[:, 0] // 2, p0[:, 1] // 2]
        x0 = p0 / (2.0 * N)
        x1 = p1 / (2.0 * N)

        def along(s):
            pts = x0 + s[:, None] * (x1 - x0)
            return ds.evaluate(pts[:, 0], pts[:, 1])

        v1 = ext[p1[:, 0] // 2, p1[:, 1] // 2]
        s = _illinois(along, np.zeros(len(K)), np.ones(len(K)), v0, v1, 1e-12)
        pts = x0 + s[:, None] * (x1 - x0)
        for k, p in zip(key_list, pts):
            keys[k] = p
        if certify:
            _, zg = ds.evaluate_with_grad(pts[:, 0], pts[:, 1])
            grad_on_z = np.hypot(zg[0], zg[1])
        else:
            grad_on_z = np.array([])
    else:
        grad_on_z = np.array([])

    def local(key, M, c):
        # canonical doubled point -> cell coordinates: x = M^-1 (canon - c)
        canon = keys[key] * 2.0 * N
        return (M.T @ (canon - c)) / (2.0 * N)

    # saddle cells: resolve with the centre value
    saddles = [idx for idx, (_, _, bits, entry) in enumerate(cell_edges) if len(entry) == 4]
    centre_pos = {}
    if saddles:
        ci = np.array([cell_edges[k][0] for k in saddles])
        cj = np.array([cell_edges[k][1] for k in saddles])
        cv = ds.evaluate((ci + 0.5) * h, (cj + 0.5) * h)
        centre_pos = {k: bool(v > 0) for k, v in zip(saddles, cv)}

    segments = []  # (key_a, key_b, local_a, local_b)
    for idx, (i, j, bits, entry) in enumerate(cell_edges):
        by_edge = {e: (key, M, c) for e, key, M, c in entry}
        if len(entry) == 2:
            pairs = [(entry[0][0], entry[1][0])]
        elif len(entry) == 4:
            if centre_pos[idx] == bits[0]:
                pairs = [(0, 1), (2, 3)]  # corners 1 and 3 cut off
            else:
                pairs = [(0, 3), (1, 2)]  # corners 0 and 2 cut off
        else:
            raise OpenChainError(f"cell ({i},{j}) has {len(entry)} crossings")
        for ea, eb in pairs:
            ka, Ma, ca = by_edge[ea]
            kb, Mb, cb = by_edge[eb]
            segments.append((ka, kb, local(ka, Ma, ca), local(kb, Mb, cb)))

    curves = _chain(segments, keys, ds.domain)
    cert = _certificate_2d(ds, gxa, gxt, ext, N, grad_on_z, cfg) if certify else None
    return CurveSet(curves, cert, N, ds)


def _chain(segments, keys, domain):
    adj = {}
    for sid, (ka, kb, _, _) in enumerate(segments):
        adj.setdefault(ka, []).append(sid)
        adj.setdefault(kb, []).append(sid)
    for k, lst in adj.items():
        if len(lst) != 2:
            raise OpenChainError(f"edge {k} has {len(lst)} incident segments; refine the grid")
    used = np.zeros(len(segments), dtype=bool)
    curves = []
    names = [g.name for g in domain.generators]
    for start in range(len(segments)):
        if used[start]:
            continue
        ka, kb, la, lb = segments[start]
        verts, segs, crossings = [keys[ka]], [(la, lb)], []
        used[start] = True
        cur_key, cur_local = kb, lb
        while True:
            nxt = [s for s in adj[cur_key] if not used[s]]
            if not nxt:
                # closed if we returned to the start key
                if cur_key != ka:
                    raise OpenChainError("zero curve does not close; refine the grid")
                _record_crossing(crossings, cur_local, segs[0][0], names, 0)
                break
            s = nxt[0]
            used[s] = True
            a, b, la2, lb2 = segments[s]
            if a == cur_key:
                enter, out_key, out_local = la2, b, lb2
            else:
                enter, out_key, out_local = lb2, a, la2
            _record_crossing(crossings, cur_local, enter, names, len(verts))
            verts.append(keys[cur_key])
            segs.append((enter, out_local))
            cur_key, cur_local = out_key, out_local
        curves.append(ZeroCurve(np.array(verts), np.array(segs), crossings))
    return curves


def _record_crossing(crossings, leaving, entering, names, vertex_index):
    """Note a seam passage when consecutive segments meet at different lifts."""
    if np.allclose(leaving, entering, atol=1e-12):
        return
    for ax, name in enumerate(names):
        if abs(leaving[ax] - 1.0) < 1e-9 and abs(entering[ax]) < 1e-9:
            crossings.append((vertex_index, name, 1))
            return
        if abs(entering[ax] - 1.0) < 1e-9 and abs(leaving[ax]) < 1e-9:
            crossings.append((vertex_index, name, -1))
            return
    crossings.append((vertex_index, "seam", 0))


def _cell_stack(a):
    """Corner values of every cell, ordered c0..c3."""
    return np.stack([a[:-1, :-1], a[1:, :-1], a[1:, 1:], a[:-1, 1:]])


def _certificate_2d(ds, gxa, gxt, ext, N, grad_on_z, cfg):
    """Per-cell evidence that marching squares saw every zero.

    Lipschitz constants are estimated per cell (inflated by 1.25) because the
    gradient of det varies by orders of magnitude over S.  A cell passes when
    it is clear of zeros (min corner |det| >= 2 L h, or a second-order bound
    from the corners) or when det has no critical point there and every edge
    is monotone or provably zero-free.  Leftover cells are subdivided.
    """
    h = 1.0 / N
    av = np.abs(ext)
    ga, gt = _cell_stack(gxa), _cell_stack(gxt)
    gnorm = np.hypot(ga, gt)
    # second-order estimate from gradient changes along the four edges
    dg = np.stack([np.hypot(ga[p] - ga[q], gt[p] - gt[q]) for p, q in _EDGE_CORNERS]).max(axis=0) / h
    lip2 = 1.25 * dg
    lip = 1.25 * (gnorm.max(axis=0) + lip2 * h)
    fv = _cell_stack(av)
    cmin = fv.min(axis=0)
    sa = _cell_stack(ext)
    same = np.all(np.sign(sa) == np.sign(sa[0]), axis=0)
    d = h / math.sqrt(2)
    taylor = (fv - gnorm * d - 0.5 * lip2 * d * d).min(axis=0)
    clear = same & ((cmin >= 2 * lip * h) | (taylor > 0))
    ok = clear.copy()

    # remaining cells only, flattened
    idx = np.nonzero(~clear)
    ga_, gt_, sa_, l2 = ga[:, idx[0], idx[1]], gt[:, idx[0], idx[1]], sa[:, idx[0], idx[1]], lip2[idx]
    agree = np.ones(l2.shape, dtype=bool)
    for p in range(4):
        for q in range(p + 1, 4):
            agree &= ga_[p] * ga_[q] + gt_[p] * gt_[q] > 0
    regular = agree & (np.hypot(ga_, gt_).min(axis=0) > l2 * h / math.sqrt(2))
    # second derivative along each edge direction, from the two parallel edges
    m2a = 1.25 * np.maximum(np.abs(ga_[1] - ga_[0]), np.abs(ga_[2] - ga_[3])) / h
    m2t = 1.25 * np.maximum(np.abs(gt_[2] - gt_[1]), np.abs(gt_[3] - gt_[0])) / h
    s = np.linspace(0.0, h, 33)[:, None]
    edge_ok = np.ones(l2.shape, dtype=bool)
    for e, (pa, pb) in enumerate(_EDGE_CORNERS):
        comp, m2 = (ga_, m2a) if e % 2 == 0 else (gt_, m2t)
        da, db = comp[pa], comp[pb]
        # slope along the edge cannot vanish: one crossing at most
        mono = (da * db > 0) & (np.abs(da) + np.abs(db) > m2 * h)
        # same-sign edge: Hermite lower bound from both ends stays positive
        sg = np.sign(sa_[pa])
        fa_, fb_ = sg * sa_[pa], sg * sa_[pb]
        lo = np.maximum(fa_ + sg * da * s - 0.5 * m2 * s * s, fb_ - sg * db * (h - s) - 0.5 * m2 * (h - s) ** 2)
        sep = (sa_[pa] * sa_[pb] > 0) & (lo.min(axis=0) > 0)
        edge_ok &= mono | sep
    ok[idx] = regular & edge_ok
    flagged = np.argwhere(~ok)
    if 0 < len(flagged) <= 256:
        ok[tuple(flagged.T)] = _refine_cells(ds, flagged, h, sa[:, flagged[:, 0], flagged[:, 1]] > 0)
    uncertified = int(np.count_nonzero(~ok))
    min_off = float(np.min(cmin[clear])) if np.any(clear) else float("inf")
    min_grad = float(np.min(grad_on_z)) if len(grad_on_z) else float("inf")
    reasons = []
    if len(grad_on_z) and min_grad < cfg.tau_nd:
        reasons.append(f"|grad det| = {min_grad:.3g} < tau_nd on Z")
    bad = [tuple(int(k) for k in c) for c in np.argwhere(~ok)[:8]]
    return GenericityCertificate(N, min_off, min_grad, float(lip.max()), float(lip2.max()), uncertified, 1, reasons, bad)


def _refine_cells(ds, cells, h, coarse_signs, m=16):
    """Re-examine flagged cells on an m x m subgrid, all cells in one evaluation.

    A cell passes if the subgrid proves it zero-free, or proves that det has
    no critical point in it and that each cell edge carries exactly the
    crossings implied by the corner signs.
    """
    cells = np.asarray(cells)
    s = np.arange(m + 1) / m
    X = (cells[:, 0, None, None] + s[None, :, None]) * h + 0.0 * s[None, None, :]
    Y = (cells[:, 1, None, None] + s[None, None, :]) * h + 0.0 * s[None, :, None]
    v, (ga, gt) = ds.evaluate_with_grad(X, Y)
    hs = h / m

    def stack(a):
        return np.stack([a[:, :-1, :-1], a[:, 1:, :-1], a[:, 1:, 1:], a[:, :-1, 1:]])

    fv, fa, ft = stack(v), stack(ga), stack(gt)
    g = np.hypot(fa, ft)
    m2 = 1.25 * np.stack([np.hypot(fa[p] - fa[q], ft[p] - ft[q]) for p, q in _EDGE_CORNERS]).max(axis=0) / hs
    same = np.all(np.sign(fv) == np.sign(fv[0]), axis=0)
    d = hs / math.sqrt(2)
    zero_free = same & ((np.abs(fv) - g * d - 0.5 * m2 * d * d).min(axis=0) > 0)
    agree = np.ones(zero_free.shape, dtype=bool)
    for p in range(4):
        for q in range(p + 1, 4):
            agree &= fa[p] * fa[q] + ft[p] * ft[q] > 0
    regular = agree & (g.min(axis=0) > m2 * hs / math.sqrt(2))

    ok = zero_free.all(axis=(1, 2))
    no_crit = regular.all(axis=(1, 2))
    # cell edges as fine node sequences with slopes along them
    edges = (
        (v[:, :, 0], ga[:, :, 0]),
        (v[:, m, :], gt[:, m, :]),
        (v[:, :, m], ga[:, :, m]),
        (v[:, 0, :], gt[:, 0, :]),
    )
    counts_ok = np.ones(len(cells), dtype=bool)
    for e, ((pa, pb), (fvals, slope)) in enumerate(zip(_EDGE_CORNERS, edges)):
        f0, f1, d0, d1 = fvals[:, :-1], fvals[:, 1:], slope[:, :-1], slope[:, 1:]
        mm = 2.5 * np.abs(d1 - d0) / hs
        change = f0 * f1 < 0
        mono = (d0 * d1 > 0) & (np.abs(d0) + np.abs(d1) > mm * hs)
        sg = np.sign(f0)
        t = np.linspace(0.0, hs, 17)[:, None, None]
        lo = np.maximum(sg * f0 + sg * d0 * t - 0.5 * mm * t * t, sg * f1 - sg * d1 * (hs - t) - 0.5 * mm * (hs - t) ** 2)
        sep = (f0 * f1 > 0) & (lo.min(axis=0) > 0)
        sub_ok = np.where(change, mono, sep).all(axis=1)
        want = (coarse_signs[pa] != coarse_signs[pb]).astype(int)
        ends = (np.sign(fvals[:, 0]) == np.where(coarse_signs[pa], 1, -1)) & (np.sign(fvals[:, -1]) == np.where(coarse_signs[pb], 1, -1))
        counts_ok &= sub_ok & ends & (change.sum(axis=1) == want)
    return ok | (no_crit & counts_ok)


# -- loops and crossing counts -----------------------------------------------------


LOOP_START = 0.3819660112501051  # generic spot along the generator's own axis


def loop_basepoint(domain, gen_index: int, offset: float) -> np.ndarray:
    """Start of the loop for a generator: generic along its axis, ``offset`` across it."""
    gen = domain.generators[gen_index]
    p0 = np.zeros(domain.dim)
    p0[gen.axis] = LOOP_START
    if domain.dim == 2:
        p0[1 - gen.axis] = offset
    return p0


def _reduce(domain, m, pts):
    """Move ``pts`` by the deck map that takes ``m`` into the unit square."""
    m = np.array(m, dtype=float)
    pts = [np.array(q, dtype=float) for q in pts]
    # flipping generators first; plain translations afterwards fix up the flipped axis
    order = sorted(domain.generators, key=lambda g: g.flip is None)
    for gen in order:
        k = math.floor(m[gen.axis])
        for _ in range(abs(k)):
            for q in (m, *pts):
                q[gen.axis] += -1.0 if k > 0 else 1.0
                if gen.flip is not None:
                    q[gen.flip] = -q[gen.flip]
    return pts


def loop_path(domain, gen_index: int, offset: float):
    """Straight cover path from p0 to sigma(p0), cut into pieces inside [0, 1]^2."""
    gen = domain.generators[gen_index]
    if domain.dim == 1:
        return [(np.array([0.0]), np.array([1.0]))]
    a = loop_basepoint(domain, gen_index, offset)
    b = np.array(gen.apply(list(a)), dtype=float)
    cuts = {0.0, 1.0}
    for ax in range(2):
        lo, hi = sorted((a[ax], b[ax]))
        for k in range(math.floor(lo) + 1, math.ceil(hi)):
            cuts.add((k - a[ax]) / (b[ax] - a[ax]))
    cuts = sorted(cuts)
    pieces = []
    for s0, s1 in zip(cuts[:-1], cuts[1:]):
        q0, q1 = a + s0 * (b - a), a + s1 * (b - a)
        pieces.append(tuple(_reduce(domain, 0.5 * (q0 + q1), (q0, q1))))
    return pieces


def _orient(p, q, r):
    return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (q[..., 1] - p[..., 1]) * (r[..., 0] - p[..., 0])


def count_crossings(segments: np.ndarray, pieces, near: float = 1e-6):
    """Transverse intersections of curve segments with a piecewise-straight loop.

    Returns ``None`` when a crossing is too close to tangential or a vertex
    sits on the loop, so the caller can move the loop.
    """
    if len(segments) == 0:
        return 0
    P, Q = segments[:, 0], segments[:, 1]
    total = 0
    # crossings through a junction between pieces, seen from either side
    at_end = [0] * len(pieces)
    at_start = [0] * len(pieces)
    for i, (a, b) in enumerate(pieces):
        d = b - a
        L = float(np.hypot(*d))
        # signed distances of segment endpoints to the loop line
        dp = _orient(a, b, P) / L
        dq = _orient(a, b, Q) / L
        seg_len = np.hypot(*(Q - P).T)
        straddle = dp * dq < 0
        if not np.any(straddle):
            if np.any((np.abs(dp) < near) | (np.abs(dq) < near)):
                return None
            continue
        # where along the loop piece does the intersection fall
        denom = dp - dq
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = dp / denom
            X_ = P + lam[:, None] * (Q - P)
            along = ((X_ - a) @ d) / (L * L)
        edge = 1e-9
        inside = straddle & (along > edge) & (along < 1 - edge)
        at_start[i] = int(np.count_nonzero(straddle & (np.abs(along) <= edge)))
        at_end[i] = int(np.count_nonzero(straddle & (np.abs(along - 1) <= edge)))
        close = ((np.abs(dp) < near) | (np.abs(dq) < near)) & (along > -1e-9) & (along < 1 + 1e-9)
        if np.any(close):
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            sin_angle = np.abs(denom) / np.maximum(seg_len, 1e-300)
        if np.any(straddle & (along > -edge) & (along < 1 + edge) & (sin_angle < near)):
            return None
        total += int(np.count_nonzero(inside))
    n = len(pieces)
    return total + sum(max(at_end[i], at_start[(i + 1) % n]) for i in range(n))


def loop_offsets():
    k = 0
    while True:
        yield (0.2371 + k * _GOLDEN) % 1.0
        k += 1


# -- pipeline ---------------------------------------------------------------------


@dataclass
class TangencyLocus:
    n: int
    zeros: list
    curves: list
    certificate: GenericityCertificate
    section: Section
    embedding: Embedding
    attempt: int = 0
    grid_n: int = 0

    @property
    def empty(self) -> bool:
        return not (self.zeros or self.curves)

    @property
    def count(self) -> int:
        return len(self.zeros) if self.n == 1 else len(self.curves)


def locate(ds: Section, cfg: Config, grid_n=None):
    if ds.dim == 1:
        zs = find_zeros_1d(ds, grid_n or cfg.grid_1d, cfg=cfg)
        return zs.zeros, [], zs.certificate
    cs = extract_zero_curve_2d(ds, grid_n or cfg.grid_2d, cfg=cfg)
    return [], cs.curves, cs.certificate


def grid_ladder(n: int) -> tuple:
    """Grids tried per attempt: the requested one, then one whose nodes sit elsewhere."""
    return (n, n + n // 2 + 1)


def perturb_until_generic(
    emb: Embedding,
    fol: Foliation,
    fam: PerturbationFamily,
    max_tries: int | None = None,
    cfg: Config | None = None,
    grid_n: int | None = None,
):
    """Perturb S until det(d-perp) is certified transverse to zero.

    Returns ``(embedding, locus)``.  Attempt ``k`` uses seed ``fam.seed + k``.
    An attempt whose certificate fails only because a zero passes awkwardly
    close to grid nodes is re-examined once on an offset grid before the next
    draw.
    """
    cfg = cfg or default_config()
    tries = int(max_tries or cfg.max_tries)
    if tries < 1:
        raise ValueError("max_tries must be at least 1")
    best = None
    last_err = None
    for k in range(tries):
        cand = fam.apply(emb, k, cfg)
        ds = det_section(cand, fol)
        if fam.eps == 0:
            probe = ds.evaluate(*np.meshgrid(*[np.linspace(0, 1, 33)] * ds.dim, indexing="ij"))
            if np.all(probe == 0):
                raise DegenerateSection("det(d-perp) vanishes identically; supply eps > 0")
        n0 = grid_n or (cfg.grid_1d if ds.dim == 1 else cfg.grid_2d)
        for n in grid_ladder(n0):
            try:
                zeros, curves, cert = locate(ds, cfg, n)
            except (SuspectedDegenerate, OpenChainError) as exc:
                last_err = exc
                continue
            cert.attempts = k + 1
            locus = TangencyLocus(ds.dim, zeros, curves, cert, ds, cand, k, n)
            if cert.holds:
                return cand, locus
            if best is None or cert.uncertified_cells < best.certificate.uncertified_cells:
                best = locus
        if fam.eps == 0:
            break
    msg = f"no certified-generic perturbation after {k + 1} attempt(s)"
    if best is not None:
        c = best.certificate
        msg += f"; best attempt {best.attempt} (grid {c.grid}) has {c.uncertified_cells} uncertified cells"
        if c.reasons:
            msg += f" ({'; '.join(c.reasons)})"
    elif last_err is not None:
        msg += f"; last error: {last_err}"
    raise GenericityFailed(msg, best)


# -- verdicts -----------------------------------------------------------------------


@dataclass
class Verdict:
    name: str
    passed: bool | None  # None: not applicable
    details: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        return "n/a" if self.passed is None else ("pass" if self.passed else "FAIL")

    def as_dict(self):
        return {"status": self.label, **self.details}


def parity_check(locus, ds: Section) -> Verdict:
    """#Z mod 2 against <w1(L), [S]> for one-dimensional S."""
    zeros = locus.zeros if isinstance(locus, (TangencyLocus, ZeroSet)) else list(locus)
    if ds.dim != 1:
        return Verdict("parity", None, {"reason": "parity applies to one-dimensional S"})
    pairing = w1_pairing(ds, generator_loops(ds.domain)[0])
    count = len(zeros)
    return Verdict("parity", count % 2 == pairing, {"zero_count": count, "count_mod2": count % 2, "w1_pairing": pairing})


def crossing_parities(curves, ds: Section, max_retries: int = 8):
    """Mod-2 crossing count of Z with each generator loop, moving loops off tangencies."""
    segs = np.concatenate([c.segments for c in curves]) if curves else np.zeros((0, 2, 2))
    out = {}
    for gi, loop in enumerate(generator_loops(ds.domain)):
        offsets = loop_offsets()
        for attempt in range(max_retries + 1):
            off = next(offsets)
            n = count_crossings(segs, loop_path(ds.domain, gi, off))
            if n is not None:
                out[loop.name] = {"crossings": n, "parity": n % 2, "offset": off, "retries": attempt}
                break
        else:
            raise NonGenericLoopPlacement(f"loop {loop.name!r} stayed non-generic after {max_retries} offset retries")
    return out


def pd_class_check(curves, ds: Section, loops=None) -> Verdict:
    """[Z] mod 2 against PD(w1(L)) via crossing parities with generator loops."""
    if isinstance(curves, (CurveSet, TangencyLocus)):
        curves = curves.curves
    if ds.dim != 2:
        return Verdict("pd_class", None, {"reason": "PD check applies to two-dimensional S"})
    table = crossing_parities(curves, ds)
    rows = {}
    ok = True
    for loop in loops or generator_loops(ds.domain):
        w = w1_pairing(ds, loop)
        row = dict(table[loop.name])
        row["w1_pairing"] = w
        row["agree"] = row["parity"] == w
        ok &= row["agree"]
        rows[loop.name] = row
    return Verdict("pd_class", bool(ok), {"loops": rows})
