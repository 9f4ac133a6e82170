"""Embeddings of S, catalog foliations, and the d-perp matrix.

The d-perp matrix at a parameter value has one row per tangent vector of S
(the Jacobian columns of the embedding) and one column per normal frame
vector of the foliation: entry (i, j) is the j-th normal coefficient of the
i-th tangent vector, leafwise components dropped.  Its determinant vanishes
exactly where S is tangent to the foliation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import dual as D
from .errors import FrameError, ValidationError
from .exprdsl import Expr, evaluate_with, names, parse, to_string
from .modelspace import DeckElement, ModelSpace, infer_deck

TAU = 2 * np.pi


@dataclass(frozen=True)
class ParamGenerator:
    name: str
    axis: int
    flip: int | None = None  # axis negated by the seam (Klein parameter domain)

    def apply(self, u):
        u = [np.asarray(x, dtype=float) for x in u]
        out = list(u)
        out[self.axis] = u[self.axis] + 1.0
        if self.flip is not None:
            out[self.flip] = -u[self.flip]
        return out

    def linear_sign(self) -> int:
        return -1 if self.flip is not None else 1


@dataclass(frozen=True)
class ParamDomain:
    kind: str  # circle | torus | klein
    names: tuple
    generators: tuple

    @property
    def dim(self) -> int:
        return len(self.names)


def circle_domain(name="t", loop="S") -> ParamDomain:
    return ParamDomain("circle", (name,), (ParamGenerator(loop, 0),))


def torus_domain(names=("a", "t"), loops=("Sigma", "gamma")) -> ParamDomain:
    return ParamDomain("torus", tuple(names), (ParamGenerator(loops[0], 0), ParamGenerator(loops[1], 1)))


def klein_domain(names=("a", "t"), loops=("alpha", "beta")) -> ParamDomain:
    """(a, t) ~ (a + 1, t) ~ (-a, t + 1)."""
    return ParamDomain("klein", tuple(names), (ParamGenerator(loops[0], 0), ParamGenerator(loops[1], 1, flip=0)))


def make_domain(kind: str, names=None) -> ParamDomain:
    if kind == "circle":
        return circle_domain(*(names or ("t",)))
    if kind == "torus":
        return torus_domain(tuple(names or ("a", "t")))
    if kind == "klein":
        return klein_domain(tuple(names or ("a", "t")))
    raise ValueError(f"unknown parameter domain {kind!r}")


def sample_params(dim: int, n: int = 32, seed: int = 12345) -> list:
    rng = np.random.default_rng(seed)
    return list(rng.uniform(0.0, 1.0, size=(dim, n)))


def _normalize_blocks(coords: list, target: ModelSpace) -> list:
    out = list(coords)
    for blk in target.sphere_blocks:
        r = D.sqrt(sum(coords[i] * coords[i] for i in blk))
        for i in blk:
            out[i] = coords[i] / r
    return out


@dataclass(frozen=True)
class Embedding:
    target: ModelSpace
    domain: ParamDomain
    component_exprs: tuple
    params: tuple = ()  # sorted (name, value) pairs
    seams: tuple = ()  # DeckElement per domain generator

    @property
    def param_dim(self) -> int:
        return self.domain.dim

    @property
    def param_values(self) -> dict:
        return dict(self.params)

    def _bindings(self, values):
        b = dict(self.params)
        b.update(zip(self.domain.names, values))
        return b

    def coords(self, values) -> list:
        """Cover coordinates over any number type (sphere blocks normalized)."""
        b = self._bindings(values)
        raw = [evaluate_with(e, b) for e in self.component_exprs]
        return _normalize_blocks(raw, self.target)

    def points(self, *u) -> np.ndarray:
        u = [np.asarray(x, dtype=float) for x in u]
        shape = np.broadcast(*u).shape
        return np.array([np.broadcast_to(np.asarray(c, dtype=float), shape) for c in self.coords(u)])

    def jet(self, u, nested=False):
        """Coordinates and Jacobian columns as (possibly nested) duals.

        Returns ``(x, J)`` where ``x[k]`` is coordinate k and ``J[i][k]`` is
        the derivative of coordinate k along parameter i.
        """
        seeded = D.seed([np.asarray(x, dtype=float) for x in u], nested=nested)
        cs = self.coords(seeded)
        k = self.param_dim
        x, J = [], [[None] * len(cs) for _ in range(k)]
        for c_idx, c in enumerate(cs):
            if not isinstance(c, D.Dual):
                c = D.Dual.const(c, k)
            x.append(c.val)
            for i in range(k):
                J[i][c_idx] = c.grad[i]
        return x, J

    def describe(self) -> dict:
        return {
            "domain": self.domain.kind,
            "params": list(self.domain.names),
            "components": {n: to_string(e) for n, e in zip(self.target.coord_names, self.component_exprs)},
            "constants": {k: v for k, v in self.params},
        }


def _dense(v, shape):
    return np.broadcast_to(np.asarray(D.real(v), dtype=float), shape)


def jacobian(emb: Embedding, u) -> list:
    """Tangent vectors d(map)/du_i at a single parameter value, via dual numbers."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    _, J = emb.jet(list(u))
    return [np.array([float(D.real(c)) for c in col]) for col in J]


def jacobian_grid(emb: Embedding, *u) -> np.ndarray:
    """Jacobian at many parameter values: shape (param_dim, cover_dim, *shape)."""
    u = [np.asarray(x, dtype=float) for x in u]
    shape = np.broadcast(*u).shape
    _, J = emb.jet(u)
    return np.array([[_dense(c, shape) for c in col] for col in J])


def check_closure(emb: Embedding, tol: float = 1e-9, samples: int = 32) -> float:
    """Max cover-space mismatch of map(sigma u) against g(map u); raises on failure."""
    U = sample_params(emb.param_dim, samples)
    base = emb.points(*U)
    worst = 0.0
    for gen, g in zip(emb.domain.generators, emb.seams):
        moved = emb.points(*gen.apply(U))
        err = float(np.max(np.abs(moved - g.apply(base))))
        worst = max(worst, err)
        if not err <= tol:
            raise ValidationError(
                "closure", f"embedding does not close across seam {gen.name!r} (mismatch {err:.3g} > {tol:g})"
            )
    return worst


def check_immersion(emb: Embedding, tol: float = 1e-8, samples: int = 64) -> float:
    U = sample_params(emb.param_dim, samples, seed=777)
    J = jacobian_grid(emb, *U)  # (d, k, n)
    mats = np.moveaxis(J, -1, 0)  # (n, d, k)
    smin = float(np.min(np.linalg.svd(mats, compute_uv=False)[:, -1]))
    if not smin >= tol:
        raise ValidationError("immersion", f"Jacobian loses rank (smallest singular value {smin:.3g} < {tol:g})")
    return smin


def infer_seams(target: ModelSpace, domain: ParamDomain, exprs, params) -> tuple:
    """Find the deck element closing each parameter seam from one generic sample."""
    probe = Embedding(target, domain, tuple(exprs), tuple(sorted(params.items())), ())
    u0 = [np.array([0.1234567 + 0.0713 * i]) for i in range(domain.dim)]
    x = probe.points(*u0)[:, 0]
    out = []
    for gen in domain.generators:
        y = probe.points(*gen.apply(u0))[:, 0]
        g = infer_deck(x, y, target)
        out.append(replace(g, name=f"seam_{gen.name}"))
    return tuple(out)


def make_embedding(target, domain, exprs, params=None, seams=None, cfg=None, validate=True) -> Embedding:
    """Build and validate an embedding.

    ``exprs`` maps coordinate names to expressions (strings or trees), or is a
    sequence in coordinate order.  Missing seam data is inferred.
    """
    params = dict(params or {})
    if isinstance(exprs, dict):
        missing = [c for c in target.coord_names if c not in exprs]
        extra = [c for c in exprs if c not in target.coord_names]
        if missing or extra:
            raise ValidationError(
                "embedding", f"components must be exactly {list(target.coord_names)} (missing {missing}, unknown {extra})"
            )
        exprs = [exprs[c] for c in target.coord_names]
    trees = []
    for e in exprs:
        trees.append(parse(e) if isinstance(e, str) else e)
    if len(trees) != target.cover_dim:
        raise ValidationError("embedding", f"expected {target.cover_dim} components, got {len(trees)}")
    allowed = set(domain.names) | set(params)
    for c, t in zip(target.coord_names, trees):
        unknown = names(t) - allowed
        if unknown:
            raise ValidationError("embedding", f"component {c!r} uses unbound names {sorted(unknown)}")
    if seams is None:
        seams = infer_seams(target, domain, trees, params)
    emb = Embedding(target, domain, tuple(trees), tuple(sorted(params.items())), tuple(seams))
    if validate:
        closure_tol = cfg.closure_tol if cfg else 1e-9
        imm_tol = cfg.immersion_tol if cfg else 1e-8
        check_closure(emb, closure_tol)
        check_immersion(emb, imm_tol)
    return emb


# -- foliations ---------------------------------------------------------------


@dataclass(frozen=True)
class Foliation:
    """A catalog foliation with explicit normal frame.

    ``submersion``: leaves are fibers of the projection onto ``base`` coords.
    ``line_field``: leaves are integral lines of a constant direction.
    """

    name: str
    model: ModelSpace
    kind: str
    base: tuple = ()
    direction: tuple = ()
    nu_tag: str = "det_base"
    description: str = field(default="", compare=False)

    @property
    def codim(self) -> int:
        if self.kind == "line_field":
            return self.model.cover_dim - 1
        n = 0
        for i in self.base:
            if not any(i in blk for blk in self.model.sphere_blocks):
                n += 1
        n += 2 * sum(1 for blk in self.model.sphere_blocks if blk[0] in self.base)
        return n

    @property
    def is_submersion(self) -> bool:
        return self.kind == "submersion"


def _sphere_frame(u):
    """Positively oriented orthonormal tangent frame (e1, e2) at u, e1 x e2 = u."""
    u1, u2, u3 = u
    use_x = np.abs(np.asarray(D.real(u3), dtype=float)) > 0.9
    # ez x u and ex x u; pick the one that is safely nonzero
    za, zb, zc = -u2, u1, 0.0 * u1
    xa, xb, xc = 0.0 * u1, -u3, u2
    ca = D.where(use_x, xa, za)
    cb = D.where(use_x, xb, zb)
    cc = D.where(use_x, xc, zc)
    r = D.sqrt(ca * ca + cb * cb + cc * cc)
    e1 = (ca / r, cb / r, cc / r)
    e2 = (u2 * e1[2] - u3 * e1[1], u3 * e1[0] - u1 * e1[2], u1 * e1[1] - u2 * e1[0])
    return e1, e2


def nu_coeffs(fol: Foliation, x: list, v: list) -> list:
    """Normal-frame coefficients of tangent vector ``v`` at cover point ``x``."""
    if fol.kind == "line_field":
        d = np.asarray(fol.direction, dtype=float)
        j = int(np.argmax(np.abs(d)))
        return [v[i] - (v[j] / d[j]) * d[i] for i in range(len(d)) if i != j]
    out = []
    done = set()
    for i in fol.base:
        if i in done:
            continue
        blk = next((b for b in fol.model.sphere_blocks if i in b), None)
        if blk is None:
            out.append(v[i])
            done.add(i)
            continue
        e1, e2 = _sphere_frame([x[k] for k in blk])
        vb = [v[k] for k in blk]
        out.append(sum(a * b for a, b in zip(vb, e1)))
        out.append(sum(a * b for a, b in zip(vb, e2)))
        done.update(blk)
    return out


def nu_frame(fol: Foliation, x) -> np.ndarray:
    """Cover vectors whose normal coefficients are the identity; shape (n, cover_dim)."""
    x = np.asarray(x, dtype=float)
    k = fol.model.cover_dim
    if fol.kind == "line_field":
        d = np.asarray(fol.direction, dtype=float)
        j = int(np.argmax(np.abs(d)))
        return np.array([np.eye(k)[i] for i in range(k) if i != j])
    rows = []
    done = set()
    for i in fol.base:
        if i in done:
            continue
        blk = next((b for b in fol.model.sphere_blocks if i in b), None)
        if blk is None:
            rows.append(np.eye(k)[i])
            done.add(i)
            continue
        e1, e2 = _sphere_frame([x[m] for m in blk])
        for e in (e1, e2):
            r = np.zeros(k)
            r[list(blk)] = [float(c) for c in e]
            rows.append(r)
        done.update(blk)
    return np.array(rows)


def nu_sign_numeric(fol: Foliation, g: DeckElement, x) -> int:
    """Sign by which ``g`` acts on the normal determinant at ``x``, from the frames."""
    F = nu_frame(fol, x)
    gx = g.apply(x)
    pushed = [g.push(f) for f in F]
    R = np.array([[float(c) for c in nu_coeffs(fol, list(gx), list(p))] for p in pushed])
    det = np.linalg.det(R)
    if abs(abs(det) - 1.0) > 1e-6 and fol.kind != "line_field":
        raise FrameError(f"deck element {g} does not preserve the normal frame up to sign (det {det:.6g})")
    if abs(det) < 1e-12:
        raise FrameError(f"deck element {g} collapses the normal frame")
    return 1 if det > 0 else -1


def submersion_fibers(model, base_coords, name, nu_tag="det_base", description="") -> Foliation:
    idx = tuple(model.index(c) if isinstance(c, str) else int(c) for c in base_coords)
    return Foliation(name, model, "submersion", base=idx, nu_tag=nu_tag, description=description)


def invariant_line_field(model, direction, name, nu_tag="det_fiber", description="") -> Foliation:
    d = tuple(float(c) for c in direction)
    if len(d) != model.cover_dim or model.sphere_blocks:
        raise ValidationError("foliation", "line fields are supported on flat models only")
    if not any(d):
        raise ValidationError("foliation", "line field direction must be nonzero")
    for g in model.generators:
        Ad = g.A @ np.array(d)
        if not (np.allclose(Ad, d) or np.allclose(Ad, -np.array(d))):
            raise ValidationError("foliation", f"direction {d} is not invariant under deck generator {g}")
    return Foliation(name, model, "line_field", direction=d, nu_tag=nu_tag, description=description)


@dataclass(frozen=True)
class DPerpMatrix:
    u: tuple
    entries: np.ndarray
    frames_used: tuple

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.entries)) if self.entries.size else 1.0


def dperp_entries(emb: Embedding, fol: Foliation, u, nested=False):
    """d-perp entries as numbers (arrays or duals); rows are tangent vectors."""
    x, J = emb.jet(u, nested=nested)
    if nested:
        x = list(x)  # inner duals: positions carry their own derivatives
    return [nu_coeffs(fol, x, col) for col in J]


def det_of(rows):
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    raise ValueError("codimension above 2 is not supported")


def check_compatible(emb: Embedding, fol: Foliation):
    if emb.target != fol.model:
        raise ValidationError("foliation", f"foliation lives on {fol.model.label}, embedding targets {emb.target.label}")
    if emb.param_dim != fol.codim:
        raise ValidationError(
            "foliation", f"S has dimension {emb.param_dim} but the foliation has codimension {fol.codim}"
        )


def dperp(emb: Embedding, fol: Foliation, u) -> DPerpMatrix:
    """d-perp at one parameter value."""
    check_compatible(emb, fol)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    rows = dperp_entries(emb, fol, [np.float64(c) for c in u])
    entries = np.array([[float(D.real(c)) for c in row] for row in rows])
    if not np.all(np.isfinite(entries)):
        raise FrameError("normal frame is singular at this point")
    frames = (f"jacobian[{','.join(emb.domain.names)}]", f"nu[{fol.name}]")
    return DPerpMatrix(tuple(float(c) for c in u), entries, frames)
