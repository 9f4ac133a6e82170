"""det(d-perp) as a section of the determinant line, and its monodromy.

The line in question is det(TS)^* (x) det(nu F)|_S.  Across each parameter
seam the section picks up a sign which is the product of a tangent-frame
sign (from the Jacobian frames) and a normal-frame sign (from the deck
element).  First Stiefel-Whitney classes are handled as these monodromy
characters evaluated on generator loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dual as D
from .errors import FrameError, ValidationError
from .exprdsl import Expr, evaluate_with, parse
from .fields import (
    Embedding,
    Foliation,
    ParamDomain,
    check_compatible,
    det_of,
    dperp_entries,
    jacobian_grid,
    nu_sign_numeric,
    sample_params,
)
from .modelspace import deck_sign

BUNDLES = ("TS", "nu", "L")


def _broadcast(u):
    u = [np.asarray(x, dtype=float) for x in u]
    return u, np.broadcast(*u).shape


class Section:
    """A scalar function on the parameter cover that is a section of a line bundle.

    Subclasses provide ``_value(u)`` and ``_value_grad(u)``.  ``seam_signs[i]``
    is the factor picked up across ``domain.generators[i]``.
    """

    domain: ParamDomain
    seam_signs: tuple
    ts_signs: tuple
    nu_signs: tuple

    @property
    def dim(self) -> int:
        return self.domain.dim

    def evaluate(self, *u) -> np.ndarray:
        u, shape = _broadcast(u)
        return np.broadcast_to(np.asarray(D.real(self._value(u)), dtype=float), shape).copy()

    def evaluate_with_grad(self, *u):
        """Value and exact gradient (list of arrays, one per parameter)."""
        u, shape = _broadcast(u)
        v = self._value_grad(u)
        if not isinstance(v, D.Dual):
            v = D.Dual.const(v, self.dim)
        val = np.broadcast_to(np.asarray(D.real(v.val), dtype=float), shape).copy()
        grad = [np.broadcast_to(np.asarray(D.real(g), dtype=float), shape).copy() for g in v.grad]
        return val, grad

    def __call__(self, *u):
        return self.evaluate(*u)

    def equivariance_error(self, samples: int = 32) -> float:
        U = sample_params(self.dim, samples, seed=4242)
        base = self.evaluate(*U)
        worst = 0.0
        for gen, s in zip(self.domain.generators, self.seam_signs):
            moved = self.evaluate(*gen.apply(U))
            worst = max(worst, float(np.max(np.abs(moved - s * base))))
        return worst

    def check_equivariance(self, tol: float = 1e-9, samples: int = 32):
        err = self.equivariance_error(samples)
        if not err <= tol:
            raise ValidationError("section", f"section is not equivariant across seams (error {err:.3g})")
        return err


class DetSection(Section):
    """det(d-perp) for an embedding and a foliation."""

    def __init__(self, emb: Embedding, fol: Foliation, ts_signs, nu_signs):
        self.emb = emb
        self.fol = fol
        self.domain = emb.domain
        self.ts_signs = tuple(ts_signs)
        self.nu_signs = tuple(nu_signs)
        self.seam_signs = tuple(a * b for a, b in zip(self.ts_signs, self.nu_signs))

    def _value(self, u):
        return det_of(dperp_entries(self.emb, self.fol, u))

    def _value_grad(self, u):
        return det_of(dperp_entries(self.emb, self.fol, u, nested=True))


class ExprSection(Section):
    """A section given directly by an expression; for synthetic tests and demos."""

    def __init__(self, expr, domain: ParamDomain, seam_signs, params=None):
        self.expr = parse(expr) if isinstance(expr, str) else expr
        self.domain = domain
        self.params = dict(params or {})
        self.seam_signs = tuple(seam_signs)
        self.ts_signs = tuple(g.linear_sign() for g in domain.generators)
        self.nu_signs = tuple(a * b for a, b in zip(self.seam_signs, self.ts_signs))

    def _bind(self, vals):
        b = dict(self.params)
        b.update(zip(self.domain.names, vals))
        return b

    def _value(self, u):
        return evaluate_with(self.expr, self._bind(u))

    def _value_grad(self, u):
        return evaluate_with(self.expr, self._bind(D.seed(u)))


def tangent_seam_sign(emb: Embedding, gen_index: int, samples: int = 32) -> int:
    """Sign of the change of basis from the deck-pushed Jacobian frame at u to
    the Jacobian frame at sigma(u); must be constant along the seam."""
    gen = emb.domain.generators[gen_index]
    g = emb.seams[gen_index]
    U = sample_params(emb.param_dim, samples, seed=99)
    J0 = jacobian_grid(emb, *U)  # (d, k, n)
    J1 = jacobian_grid(emb, *gen.apply(U))
    signs = set()
    for i in range(J0.shape[-1]):
        pushed = np.array([g.push(J0[j, :, i]) for j in range(J0.shape[0])]).T  # (k, d)
        target = J1[:, :, i].T
        C, *_ = np.linalg.lstsq(pushed, target, rcond=None)
        dC = np.linalg.det(C)
        if abs(dC) < 1e-9:
            raise FrameError(f"tangent frames degenerate across seam {gen.name!r}")
        signs.add(1 if dC > 0 else -1)
    if len(signs) != 1:
        raise FrameError(f"tangent seam sign is not constant along seam {gen.name!r}")
    return signs.pop()


def normal_seam_sign(emb: Embedding, fol: Foliation, gen_index: int, samples: int = 32) -> int:
    """Normal-frame sign from the deck character, cross-checked against the frames."""
    g = emb.seams[gen_index]
    s = deck_sign(g, fol.nu_tag)
    U = sample_params(emb.param_dim, samples, seed=123)
    pts = emb.points(*U)
    for i in range(pts.shape[1]):
        if nu_sign_numeric(fol, g, pts[:, i]) != s:
            raise FrameError(
                f"deck character {fol.nu_tag}={s} of {g} disagrees with the normal frame of {fol.name!r}"
            )
    return s


def det_section(emb: Embedding, fol: Foliation, samples: int = 32, check: bool = True) -> DetSection:
    """Assemble det(d-perp) with its seam signs."""
    check_compatible(emb, fol)
    ts = [tangent_seam_sign(emb, i, samples) for i in range(emb.param_dim)]
    nu = [normal_seam_sign(emb, fol, i, samples) for i in range(emb.param_dim)]
    ds = DetSection(emb, fol, ts, nu)
    if check:
        ds.check_equivariance(samples=samples)
    return ds


@dataclass(frozen=True)
class LoopClass:
    """A word in the parameter-domain generators: ((index, exponent), ...)."""

    word: tuple
    name: str = ""

    def __post_init__(self):
        reduced = []
        for idx, e in self.word:
            if e == 0:
                continue
            if reduced and reduced[-1][0] == idx:
                tot = reduced[-1][1] + e
                reduced.pop()
                if tot:
                    reduced.append((idx, tot))
            else:
                reduced.append((idx, e))
        object.__setattr__(self, "word", tuple(reduced))


def generator_loops(domain: ParamDomain) -> list:
    return [LoopClass(((i, 1),), g.name) for i, g in enumerate(domain.generators)]


def _signs_for(ds: Section, bundle: str):
    if bundle == "L":
        return ds.seam_signs
    if bundle == "TS":
        return ds.ts_signs
    if bundle == "nu":
        return ds.nu_signs
    raise ValueError(f"bundle must be one of {BUNDLES}")


def w1_pairing(ds: Section, loop: LoopClass, bundle: str = "L") -> int:
    """<w1(bundle), loop> as a bit: 0 when the monodromy along the word is +1."""
    signs = _signs_for(ds, bundle)
    prod = 1
    for idx, e in loop.word:
        if e % 2:
            prod *= signs[idx]
    return 0 if prod == 1 else 1


@dataclass(frozen=True)
class IdentityVerdict:
    passed: bool
    rows: tuple  # (loop name, TS bit, nu bit, L bit)

    def as_dict(self):
        return {
            "pass": self.passed,
            "rows": [{"loop": n, "TS": a, "nu": b, "L": c} for n, a, b, c in self.rows],
        }


def w1_identity_check(ds: Section) -> IdentityVerdict:
    """Check w1(L) = w1(TS) + w1(nu F)|_S on every generator loop."""
    rows = []
    ok = True
    for loop in generator_loops(ds.domain):
        a = w1_pairing(ds, loop, "TS")
        b = w1_pairing(ds, loop, "nu")
        c = w1_pairing(ds, loop, "L")
        ok &= c == (a ^ b)
        rows.append((loop.name, a, b, c))
    return IdentityVerdict(bool(ok), tuple(rows))


__all__ = [
    "Section",
    "DetSection",
    "ExprSection",
    "LoopClass",
    "det_section",
    "generator_loops",
    "w1_pairing",
    "w1_identity_check",
    "IdentityVerdict",
    "Expr",
]
