"""Model manifolds presented as an orientable cover modulo a deck group.

Flat kinds (circle, torus, Klein bottle) live on R^k with affine deck maps
``x -> A x + b`` where ``A`` is a signed permutation.  RP^2 lives on the unit
sphere in R^3 with the antipodal map.  Products concatenate coordinates.

Every deck element carries a sign character on three orientation line
bundles (``det_base``, ``det_fiber``, ``det_ambient``).  Monodromy of any
determinant line along a loop is a product of these signs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPoint, InvalidTag

TAGS = ("det_base", "det_fiber", "det_ambient")

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class DeckElement:
    linear: tuple  # signed permutation matrix, rows as tuples of ints
    translation: tuple
    signs: tuple  # (det_base, det_fiber, det_ambient)
    name: str = ""

    @property
    def A(self) -> np.ndarray:
        return np.array(self.linear, dtype=float)

    @property
    def b(self) -> np.ndarray:
        return np.array(self.translation, dtype=float)

    @property
    def dim(self) -> int:
        return len(self.translation)

    def sign(self, tag: str) -> int:
        try:
            return self.signs[TAGS.index(tag)]
        except ValueError:
            raise InvalidTag(f"unknown bundle tag {tag!r}; expected one of {TAGS}") from None

    def apply(self, x):
        """Apply to a point (or stack of points along axis 0)."""
        x = np.asarray(x, dtype=float)
        out = np.tensordot(self.A, x, axes=(1, 0))
        return out + self.b.reshape((-1,) + (1,) * (x.ndim - 1))

    def push(self, v):
        """Differential: deck maps are affine, so this is just the linear part."""
        v = np.asarray(v, dtype=float)
        return np.tensordot(self.A, v, axes=(1, 0))

    def compose(self, other: "DeckElement") -> "DeckElement":
        """``self o other``."""
        A = self.A @ other.A
        b = self.A @ other.b + self.b
        signs = tuple(s * t for s, t in zip(self.signs, other.signs))
        parts = [n for n in (self.name, other.name) if n and n != "id"]
        name = "*".join(parts) or "id"
        return DeckElement(_as_int_rows(A), _clean(b), signs, name)

    def inverse(self) -> "DeckElement":
        Ainv = self.A.T  # signed permutations are orthogonal
        return DeckElement(_as_int_rows(Ainv), _clean(-Ainv @ self.b), self.signs, f"{self.name}^-1" if self.name else "")

    def power(self, k: int) -> "DeckElement":
        out = identity_element(self.dim)
        step = self if k >= 0 else self.inverse()
        for _ in range(abs(k)):
            out = step.compose(out)
        return out

    def close_to(self, other: "DeckElement", tol: float = 1e-9) -> bool:
        return (
            np.array_equal(self.A, other.A)
            and np.allclose(self.b, other.b, atol=tol, rtol=0)
            and self.signs == other.signs
        )

    def describe(self) -> str:
        """Affine formula, e.g. ``x -> diag(1,-1) x + (1, 0)``."""
        A = self.A
        if np.array_equal(A, np.diag(np.diag(A))):
            lin = "diag(" + ",".join(str(int(v)) for v in np.diag(A)) + ")"
        else:
            lin = str([list(r) for r in self.linear])
        tr = "(" + ", ".join(f"{v:g}" for v in self.translation) + ")"
        return f"x -> {lin} x + {tr}"

    def __str__(self):
        return self.name or self.describe()


def _as_int_rows(A) -> tuple:
    return tuple(tuple(int(round(v)) for v in row) for row in np.asarray(A))


def _clean(b) -> tuple:
    # translations are integer combinations in every catalog group; keep exact ints where possible
    out = []
    for v in np.asarray(b, dtype=float):
        r = round(v)
        out.append(float(r) if abs(v - r) < 1e-12 else float(v))
    return tuple(out)


def identity_element(dim: int) -> DeckElement:
    return DeckElement(_as_int_rows(np.eye(dim)), (0.0,) * dim, (1, 1, 1), "id")


def deck_sign(g: DeckElement, tag: str) -> int:
    """Sign of ``g`` on the orientation line named by ``tag``."""
    return g.sign(tag)


def _block_det(A, idx) -> int:
    if not idx:
        return 1
    sub = np.asarray(A, dtype=float)[np.ix_(idx, idx)]
    return int(round(np.linalg.det(sub)))


def flat_element(A, b, base, fiber, name="") -> DeckElement:
    """Deck element of a flat kind; signs are read off the linear part."""
    A = np.asarray(A, dtype=float)
    signs = (_block_det(A, list(base)), _block_det(A, list(fiber)), int(round(np.linalg.det(A))))
    return DeckElement(_as_int_rows(A), _clean(b), signs, name)


@dataclass(frozen=True)
class Point:
    coords: np.ndarray
    canonical: bool = False

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=float))


@dataclass(frozen=True)
class ModelSpace:
    kind: str  # circle | torus2 | klein | rp2 | product
    cover_dim: int
    generators: tuple
    coord_names: tuple
    base_coords: tuple = ()
    fiber_coords: tuple = ()
    sphere_blocks: tuple = ()
    factors: tuple = field(default=())
    roles: tuple = field(default=())

    def generator(self, name: str) -> DeckElement:
        for g in self.generators:
            if g.name == name:
                return g
        raise KeyError(name)

    def index(self, coord: str) -> int:
        try:
            return self.coord_names.index(coord)
        except ValueError:
            raise KeyError(f"{self.kind} has no coordinate {coord!r}") from None

    @property
    def label(self) -> str:
        if self.kind == "product":
            return "product(" + ", ".join(f"{f.label}:{r}" for f, r in zip(self.factors, self.roles)) + ")"
        return self.kind

    def __repr__(self):
        return f"ModelSpace({self.label})"


def circle(name: str = "s") -> ModelSpace:
    g = flat_element([[1]], [1.0], base=[0], fiber=[], name=f"T_{name}")
    return ModelSpace("circle", 1, (g,), (name,), base_coords=(0,))


def torus2() -> ModelSpace:
    """Flat torus, coordinates (theta, phi) in turns; theta is the base."""
    gt = flat_element(np.eye(2), [1, 0], base=[0], fiber=[1], name="T_theta")
    gp = flat_element(np.eye(2), [0, 1], base=[0], fiber=[1], name="T_phi")
    return ModelSpace("torus2", 2, (gt, gp), ("theta", "phi"), base_coords=(0,), fiber_coords=(1,))


def klein_bottle() -> ModelSpace:
    """Klein bottle from R^2 with (x, phi) -> (x - 1, -phi) and phi -> phi + 1."""
    glue = flat_element(np.diag([1.0, -1.0]), [-1, 0], base=[0], fiber=[1], name="G_x")
    gp = flat_element(np.eye(2), [0, 1], base=[0], fiber=[1], name="T_phi")
    return ModelSpace("klein", 2, (glue, gp), ("x", "phi"), base_coords=(0,), fiber_coords=(1,))


def rp2() -> ModelSpace:
    """RP^2 as the unit sphere modulo the antipodal map."""
    anti = DeckElement(_as_int_rows(-np.eye(3)), (0.0, 0.0, 0.0), (-1, 1, -1), "antipodal")
    return ModelSpace(
        "rp2", 3, (anti,), ("u1", "u2", "u3"), base_coords=(0, 1, 2), sphere_blocks=((0, 1, 2),)
    )


def product(*factors_with_roles) -> ModelSpace:
    """Product of (space, role) pairs, role in {"base", "fiber"}."""
    spaces = [s for s, _ in factors_with_roles]
    roles = tuple(r for _, r in factors_with_roles)
    if any(r not in ("base", "fiber") for r in roles):
        raise ValueError("product roles must be 'base' or 'fiber'")
    dim = sum(s.cover_dim for s in spaces)
    gens, names, base, fiber, spheres = [], [], [], [], []
    off = 0
    for s, role in zip(spaces, roles):
        idx = list(range(off, off + s.cover_dim))
        (base if role == "base" else fiber).extend(idx)
        names.extend(s.coord_names)
        spheres.extend(tuple(off + i for i in blk) for blk in s.sphere_blocks)
        for g in s.generators:
            A = np.eye(dim)
            A[off : off + s.cover_dim, off : off + s.cover_dim] = g.A
            b = np.zeros(dim)
            b[off : off + s.cover_dim] = g.b
            amb = g.sign("det_ambient")
            signs = (amb if role == "base" else 1, amb if role == "fiber" else 1, amb)
            gens.append(DeckElement(_as_int_rows(A), _clean(b), signs, g.name))
        off += s.cover_dim
    return ModelSpace(
        "product",
        dim,
        tuple(gens),
        tuple(names),
        base_coords=tuple(base),
        fiber_coords=tuple(fiber),
        sphere_blocks=tuple(spheres),
        factors=tuple(spaces),
        roles=roles,
    )


def _canon_flat_torus(x, m: ModelSpace):
    k = np.floor(x)
    out = x - k
    # floor can leave 1.0 after subtraction for tiny negatives
    wrap = out >= 1.0
    out = np.where(wrap, out - 1.0, out)
    k = k + wrap
    g = flat_element(np.eye(len(x)), -k, m.base_coords, m.fiber_coords)
    return out, g


def _canon_klein(x, m: ModelSpace):
    glue, tphi = m.generators
    k = int(np.floor(x[0]))
    g = glue.power(k)
    y = g.apply(x)
    if y[0] >= 1.0:
        g = glue.compose(g)
        y = g.apply(x)
    j = int(np.floor(y[1]))
    g2 = tphi.power(-j)
    g = g2.compose(g)
    y = g.apply(x)
    if y[1] >= 1.0:
        g = tphi.inverse().compose(g)
        y = g.apply(x)
    # a rounding-level negative would land on 1.0 if shifted; snap it to the cut
    y = np.where(y < 0.0, 0.0, y)
    return y, g


def _canon_sphere(x, m: ModelSpace):
    norm = float(np.linalg.norm(x))
    if abs(norm - 1.0) > _UNIT_TOL:
        raise InvalidPoint(f"RP^2 point must be a unit vector, got norm {norm!r}")
    nz = np.flatnonzero(x != 0.0)
    anti = m.generators[0]
    if x[nz[-1]] < 0:
        return anti.apply(x), anti
    return x.copy(), identity_element(3)


def canonicalize(p, m: ModelSpace):
    """Reduce ``p`` into the fundamental domain.

    Returns ``(point, g)`` with ``g.apply(p.coords) == point.coords``.
    Flat kinds use ``[0, 1)^k``; RP^2 uses the representative whose last
    nonzero coordinate is positive.
    """
    x = p.coords if isinstance(p, Point) else np.asarray(p, dtype=float)
    if x.shape != (m.cover_dim,):
        raise InvalidPoint(f"expected {m.cover_dim} cover coordinates, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidPoint("non-finite coordinates")
    if m.kind in ("circle", "torus2"):
        y, g = _canon_flat_torus(x, m)
    elif m.kind == "klein":
        y, g = _canon_klein(x, m)
    elif m.kind == "rp2":
        y, g = _canon_sphere(x, m)
    elif m.kind == "product":
        g = identity_element(m.cover_dim)
        off = 0
        for fac, role in zip(m.factors, m.roles):
            sl = slice(off, off + fac.cover_dim)
            _, gf = canonicalize(x[sl], fac)
            A = np.eye(m.cover_dim)
            A[sl, sl] = gf.A
            b = np.zeros(m.cover_dim)
            b[sl] = gf.b
            amb = gf.sign("det_ambient")
            lifted = DeckElement(
                _as_int_rows(A), _clean(b), (amb if role == "base" else 1, amb if role == "fiber" else 1, amb)
            )
            g = lifted.compose(g)
            off += fac.cover_dim
        y = g.apply(x)
    else:
        raise InvalidPoint(f"unsupported model kind {m.kind!r}")
    return Point(y, canonical=True), g


def same_point(x, y, m: ModelSpace, tol: float = 1e-9) -> bool:
    """True when two cover points project to the same point of the quotient."""
    cx, _ = canonicalize(x, m)
    cy, _ = canonicalize(y, m)
    d = np.abs(cx.coords - cy.coords)
    if m.kind != "rp2" and not m.sphere_blocks:
        d = np.minimum(d, 1.0 - d)  # points straddling the 0/1 cut
    return bool(np.all(d <= tol))


def infer_deck(x, y, m: ModelSpace) -> DeckElement:
    """The deck element ``g`` with ``g(x) == y`` (both given in the cover)."""
    cx, gx = canonicalize(x, m)
    cy, gy = canonicalize(y, m)
    return gy.inverse().compose(gx)


def catalog(kind: str, **kw) -> ModelSpace:
    builders = {"circle": circle, "torus2": torus2, "klein": klein_bottle, "rp2": rp2}
    if kind not in builders:
        raise KeyError(kind)
    return builders[kind](**kw)

