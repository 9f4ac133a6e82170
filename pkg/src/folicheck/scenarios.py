"""Built-in scenarios and the scenario-file format.

File format (UTF-8, line oriented)::

    # comment
    [scenario]
    id = my_torus
    description = free text

    [model]
    space = torus2                    # circle | torus2 | klein | rp2 | product
    factors = circle:s:fiber, rp2:base   # product only: kind[:name]:role, ...

    [foliation]
    id = vertical_circles             # catalog id for the model, or:
    kind = submersion                 # submersion | line_field
    base = theta                      # submersion: base coordinates
    direction = 1, 0                  # line_field: constant direction
    nu_tag = det_base                 # deck character of the normal bundle

    [embedding]
    domain = circle                   # circle | torus | klein
    params = t                        # parameter names, comma separated
    theta = 3*t; phi = 2*t            # one expression per cover coordinate
    amp = 0.25                        # any other key is a numeric constant

    [perturbation]
    eps = 0.05
    seed = 1
    degree = 3

    [expect]
    zero_count = 1
    w1.S.L = 1
    verdict.parity = pass

Several ``key = value`` pairs may share a line when separated by ``;``.
Expectation keys are listed in :data:`EXPECT_KEYS`; ``<loop>`` stands for a
generator loop name of the parameter domain.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace

from . import exprdsl as X
from .errors import BadParams, ParseError, UnknownScenario, ValidationError
from .fields import (
    Embedding,
    Foliation,
    invariant_line_field,
    make_domain,
    make_embedding,
    submersion_fibers,
)
from .modelspace import ModelSpace, catalog, circle, klein_bottle, product, rp2, torus2

SECTIONS = ("scenario", "model", "foliation", "embedding", "perturbation", "expect")

# expectation key -> kind of value; "<loop>" is replaced by a loop name
EXPECT_KEYS = {
    "transverse_everywhere": "bool",
    "locus_nonempty": "bool",
    "zero_count": "int",
    "zero_count_mod2": "bit",
    "curve_count_min": "int",
    "winding_degree": "int",
    "mod2_degree": "bit",
    "sheet_count": "int",
    "w1.<loop>.TS": "bit",
    "w1.<loop>.nu": "bit",
    "w1.<loop>.L": "bit",
    "crossing_parity.<loop>": "bit",
    "verdict.w1_identity": "status",
    "verdict.parity": "status",
    "verdict.pd_class": "status",
    "verdict.degree_criterion": "status",
}
_STATUSES = ("pass", "FAIL", "n/a")


@dataclass(frozen=True)
class Scenario:
    id: str
    model: ModelSpace
    foliation: Foliation
    embedding: Embedding
    eps: float = 0.0
    seed: int = 0
    degree: int = 3
    expected: dict = field(default_factory=dict)
    description: str = ""
    foliation_id: str = ""
    model_spec: tuple = ()  # how the model was named, for printing
    requires_eps: bool = False

    @property
    def n(self) -> int:
        return self.embedding.param_dim

    def family(self, eps: float | None = None, seed: int | None = None):
        from .tangency import make_family

        e = self.eps if eps is None else float(eps)
        if self.requires_eps and e <= 0:
            raise BadParams(f"scenario {self.id!r} needs eps > 0 (det vanishes identically without perturbation)")
        return make_family(self.embedding, e, self.seed if seed is None else int(seed), self.degree)

    @property
    def perturbation(self):
        return self.family()


# -- catalog foliations --------------------------------------------------------


def _model_key(model: ModelSpace) -> str:
    return model.label


def catalog_foliations(model: ModelSpace) -> dict:
    """Foliation ids available on a catalog model."""
    key = _model_key(model)
    if key == "torus2":
        return {
            "vertical_circles": submersion_fibers(model, ["theta"], "vertical_circles", "det_base", "fibers of (theta, phi) -> theta"),
            "horizontal_circles": submersion_fibers(model, ["phi"], "horizontal_circles", "det_base", "fibers of (theta, phi) -> phi"),
        }
    if key == "klein":
        return {
            "horizontal_lines": invariant_line_field(model, (1.0, 0.0), "horizontal_lines", "det_fiber", "lines phi = const"),
            "vertical_circles": submersion_fibers(model, ["x"], "vertical_circles", "det_base", "fibers of the circle bundle over x"),
        }
    if model.kind == "product" and [f.kind for f in model.factors] == ["circle", "rp2"] and model.roles == ("fiber", "base"):
        base = tuple(model.coord_names[i] for i in model.base_coords)
        return {"circle_fibers": submersion_fibers(model, base, "circle_fibers", "det_base", "fibers of S^1 x RP^2 -> RP^2")}
    return {}


# -- builtins -----------------------------------------------------------------


def _torus_pq(p=2, q=3, **_):
    p, q = _int_param("p", p), _int_param("q", q)
    if q == 0:
        raise BadParams("q must be nonzero")
    if math.gcd(p, q) != 1:
        raise BadParams(f"gcd(p, q) = {math.gcd(p, q)}; p and q must be coprime")
    m = torus2()
    emb = make_embedding(m, make_domain("circle"), {"theta": f"{q}*t", "phi": f"{p}*t"})
    exp = {
        "transverse_everywhere": True,
        "zero_count": 0,
        "winding_degree": q,
        "mod2_degree": abs(q) % 2,
        "sheet_count": abs(q),
        "w1.S.L": 0,
        "verdict.w1_identity": "pass",
        "verdict.parity": "pass",
        "verdict.degree_criterion": "pass",
    }
    return dict(model=m, fid="vertical_circles", emb=emb, eps=0.0, expected=exp,
                description=f"curve of slope {p}/{q} on the flat torus, fibration by vertical circles")


def _torus_zero_winding(amp=0.25, **_):
    amp = _float_param("amp", amp)
    if not amp > 0:
        raise BadParams("amp must be positive")
    m = torus2()
    emb = make_embedding(m, make_domain("circle"), {"theta": "amp*sin(2*pi*t)", "phi": "t"}, {"amp": amp})
    exp = {
        "locus_nonempty": True,
        "zero_count_mod2": 0,
        "winding_degree": 0,
        "mod2_degree": 0,
        "w1.S.L": 0,
        "verdict.parity": "pass",
        "verdict.degree_criterion": "pass",
    }
    return dict(model=m, fid="vertical_circles", emb=emb, eps=0.0, expected=exp,
                description="degree-zero curve on the torus: wiggles in theta, winds once in phi")


def _klein_nonto(**_):
    m = klein_bottle()
    emb = make_embedding(m, make_domain("circle"), {"x": "t", "phi": "0.5*cos(pi*t)"})
    exp = {
        "zero_count_mod2": 1,
        "w1.S.TS": 0,
        "w1.S.nu": 1,
        "w1.S.L": 1,
        "verdict.w1_identity": "pass",
        "verdict.parity": "pass",
    }
    return dict(model=m, fid="horizontal_lines", emb=emb, eps=0.0, expected=exp,
                description="section of the Klein bottle against the non-transversely-orientable line foliation")


def _rp2_product(**_):
    m = product((circle("s"), "fiber"), (rp2(), "base"))
    emb = make_embedding(
        m, make_domain("torus"), {"s": "a", "u1": "cos(pi*t)", "u2": "0", "u3": "sin(pi*t)"}
    )
    exp = {
        "locus_nonempty": True,
        "w1.Sigma.L": 0,
        "w1.gamma.L": 1,
        "crossing_parity.Sigma": 0,
        "crossing_parity.gamma": 1,
        "verdict.w1_identity": "pass",
        "verdict.pd_class": "pass",
    }
    return dict(model=m, fid="circle_fibers", emb=emb, eps=0.05, expected=exp, requires_eps=True,
                description="S^1 x (half great circle) in S^1 x RP^2, fibration by circles")


def _oriented_null(r=0.2, **_):
    r = _float_param("r", r)
    if not 0 < r < 0.5:
        raise BadParams("r must lie in (0, 0.5)")
    m = torus2()
    emb = make_embedding(
        m, make_domain("circle"), {"theta": "0.5 + r*cos(2*pi*t)", "phi": "0.5 + r*sin(2*pi*t)"}, {"r": r}
    )
    exp = {
        "zero_count_mod2": 0,
        "winding_degree": 0,
        "w1.S.TS": 0,
        "w1.S.nu": 0,
        "w1.S.L": 0,
        "verdict.w1_identity": "pass",
        "verdict.parity": "pass",
        "verdict.degree_criterion": "pass",
    }
    return dict(model=m, fid="vertical_circles", emb=emb, eps=0.0, expected=exp,
                description="contractible circle on the torus against vertical circles")


_BUILTINS = {
    "torus_pq": (_torus_pq, ("p", "q")),
    "torus_zero_winding": (_torus_zero_winding, ("amp",)),
    "klein_nonTO": (_klein_nonto, ()),
    "rp2_product": (_rp2_product, ()),
    "oriented_null": (_oriented_null, ("r",)),
}

BUILTIN_IDS = tuple(_BUILTINS)


def _int_param(name, v):
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise BadParams(f"{name} must be an integer, got {v!r}") from None
    if not f.is_integer():
        raise BadParams(f"{name} must be an integer, got {v!r}")
    return int(f)


def _float_param(name, v):
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise BadParams(f"{name} must be a number, got {v!r}") from None
    if not math.isfinite(f):
        raise BadParams(f"{name} must be finite")
    return f


def builtin_params(sid: str) -> tuple:
    if sid not in _BUILTINS:
        raise UnknownScenario(f"unknown scenario {sid!r}; choose from {', '.join(BUILTIN_IDS)}")
    return _BUILTINS[sid][1]


def builtin(sid: str, params: dict | None = None, **kw) -> Scenario:
    """A catalog scenario.  ``eps`` and ``seed`` set the default perturbation."""
    params = dict(params or {}, **kw)
    names = builtin_params(sid)
    eps = params.pop("eps", None)
    seed = params.pop("seed", 0)
    unknown = set(params) - set(names)
    if unknown:
        raise BadParams(f"scenario {sid!r} takes parameters {list(names)}, got {sorted(unknown)}")
    parts = _BUILTINS[sid][0](**params)
    model = parts["model"]
    fol = catalog_foliations(model)[parts["fid"]]
    e = parts["eps"] if eps is None else _float_param("eps", eps)
    if e < 0:
        raise BadParams("eps must be non-negative")
    sc = Scenario(
        id=sid,
        model=model,
        foliation=fol,
        embedding=parts["emb"],
        eps=e,
        seed=_int_param("seed", seed),
        expected=parts["expected"],
        description=parts["description"],
        foliation_id=parts["fid"],
        model_spec=_model_spec(model),
        requires_eps=parts.get("requires_eps", False),
    )
    if sc.requires_eps and e <= 0:
        raise BadParams(f"scenario {sid!r} needs eps > 0")
    return sc


def _model_spec(model: ModelSpace) -> tuple:
    if model.kind != "product":
        return (model.kind,)
    out = []
    for f, role in zip(model.factors, model.roles):
        out.append(f"circle:{f.coord_names[0]}:{role}" if f.kind == "circle" else f"{f.kind}:{role}")
    return ("product", ", ".join(out))


# -- parsing ----------------------------------------------------------------------


_KEY = re.compile(r"^[A-Za-z_][A-Za-z_0-9.]*$")


def _split_lines(text: str):
    section = None
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError("unterminated section header", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ParseError(f"unknown section [{section}]; expected one of {', '.join(SECTIONS)}", lineno)
            if section in seen:
                raise ParseError(f"section [{section}] appears twice", lineno)
            seen[section] = {}
            continue
        if section is None:
            raise ParseError("key outside of any section", lineno)
        for part in line.split(";"):
            part = part.strip()
            if not part:
                continue
            if "=" not in part:
                raise ParseError(f"expected 'key = value', got {part!r}", lineno)
            k, v = (s.strip() for s in part.split("=", 1))
            if not _KEY.match(k):
                raise ParseError(f"bad key {k!r}", lineno)
            if k in seen[section]:
                raise ParseError(f"duplicate key {k!r} in [{section}]", lineno)
            seen[section][k] = (v, lineno)
    return seen


def _model_from(sec) -> ModelSpace:
    if "space" not in sec:
        raise ValidationError("model.space", "missing")
    space = sec["space"][0]
    if space == "product":
        if "factors" not in sec:
            raise ValidationError("model.factors", "product models need a factors list")
        parts = []
        for item in sec["factors"][0].split(","):
            bits = [b.strip() for b in item.split(":")]
            if len(bits) == 3 and bits[0] == "circle":
                parts.append((circle(bits[1]), bits[2]))
            elif len(bits) == 2:
                try:
                    parts.append((catalog(bits[0]), bits[1]))
                except KeyError:
                    raise ValidationError("model.factors", f"unknown space {bits[0]!r}") from None
            else:
                raise ValidationError("model.factors", f"cannot read factor {item.strip()!r}")
        try:
            return product(*parts)
        except ValueError as exc:
            raise ValidationError("model.factors", str(exc)) from None
    try:
        return catalog(space)
    except KeyError:
        raise ValidationError("model.space", f"unknown space {space!r}") from None


def _foliation_from(sec, model) -> tuple:
    known = catalog_foliations(model)
    if "id" in sec:
        fid = sec["id"][0]
        if fid not in known:
            raise ValidationError("foliation", f"unknown foliation {fid!r} for {model.label}; known: {sorted(known) or 'none'}")
        return known[fid], fid
    kind = sec.get("kind", (None,))[0]
    tag = sec.get("nu_tag", (None,))[0]
    try:
        if kind == "submersion":
            base = [b.strip() for b in sec.get("base", ("",))[0].split(",") if b.strip()]
            return submersion_fibers(model, base, "custom", tag or "det_base"), ""
        if kind == "line_field":
            d = [float(x) for x in sec.get("direction", ("",))[0].split(",")]
            return invariant_line_field(model, d, "custom", tag or "det_fiber"), ""
    except (KeyError, ValueError) as exc:
        raise ValidationError("foliation", str(exc)) from None
    raise ValidationError("foliation", "give a catalog id or kind = submersion | line_field")


def _embedding_from(sec, model, cfg=None) -> Embedding:
    dom_kind = sec.get("domain", ("circle",))[0]
    pnames = [p.strip() for p in sec.get("params", ("",))[0].split(",") if p.strip()] or None
    try:
        domain = make_domain(dom_kind, pnames)
    except (ValueError, TypeError) as exc:
        raise ValidationError("embedding.domain", str(exc)) from None
    exprs, consts = {}, {}
    for k, (v, lineno) in sec.items():
        if k in ("domain", "params"):
            continue
        if k in model.coord_names:
            try:
                exprs[k] = X.parse(v)
            except X.ExprSyntaxError as exc:
                raise ParseError(f"embedding.{k}: {exc}", lineno) from None
        else:
            try:
                consts[k] = float(v)
            except ValueError:
                raise ValidationError(f"embedding.{k}", f"{k!r} is not a coordinate of {model.label} and not a number") from None
    return make_embedding(model, domain, exprs, consts, cfg=cfg)


def _coerce(kind, key, v):
    if kind == "bool":
        if v.lower() not in ("true", "false"):
            raise ValidationError(f"expect.{key}", "expected true or false")
        return v.lower() == "true"
    if kind in ("int", "bit"):
        try:
            n = int(v)
        except ValueError:
            raise ValidationError(f"expect.{key}", "expected an integer") from None
        if kind == "bit" and n not in (0, 1):
            raise ValidationError(f"expect.{key}", "expected 0 or 1")
        return n
    if v not in _STATUSES:
        raise ValidationError(f"expect.{key}", f"expected one of {_STATUSES}")
    return v


def expect_kind(key: str, loops) -> str:
    if key in EXPECT_KEYS:
        return EXPECT_KEYS[key]
    for pat, kind in EXPECT_KEYS.items():
        if "<loop>" in pat:
            pre, post = pat.split("<loop>")
            if key.startswith(pre) and key.endswith(post):
                loop = key[len(pre) : len(key) - len(post)]
                if loop in loops:
                    return kind
                raise ValidationError(f"expect.{key}", f"unknown loop {loop!r}; loops are {list(loops)}")
    raise ValidationError(f"expect.{key}", "not a report field")


def validate_expectations(expected: dict, emb: Embedding) -> dict:
    loops = [g.name for g in emb.domain.generators]
    out = {}
    for k, v in expected.items():
        kind = expect_kind(k, loops)
        out[k] = _coerce(kind, k, v) if isinstance(v, str) else v
    return out


def load_scenario(text: str, cfg=None) -> Scenario:
    secs = _split_lines(text)
    for req in ("model", "foliation", "embedding"):
        if req not in secs:
            raise ParseError(f"missing section [{req}]")
    meta = secs.get("scenario", {})
    model = _model_from(secs["model"])
    fol, fid = _foliation_from(secs["foliation"], model)
    emb = _embedding_from(secs["embedding"], model, cfg)
    pert = secs.get("perturbation", {})
    try:
        eps = float(pert.get("eps", ("0",))[0])
        seed = int(pert.get("seed", ("0",))[0])
        degree = int(pert.get("degree", ("3",))[0])
    except ValueError as exc:
        raise ValidationError("perturbation", str(exc)) from None
    if eps < 0 or not math.isfinite(eps):
        raise ValidationError("perturbation.eps", "must be finite and non-negative")
    if not 0 <= degree <= 3:
        raise ValidationError("perturbation.degree", "must lie in 0..3")
    expected = validate_expectations({k: v for k, (v, _) in secs.get("expect", {}).items()}, emb)
    spec = (secs["model"]["space"][0],) + ((secs["model"]["factors"][0],) if "factors" in secs["model"] else ())
    return Scenario(
        id=meta.get("id", ("custom",))[0],
        model=model,
        foliation=fol,
        embedding=emb,
        eps=eps,
        seed=seed,
        degree=degree,
        expected=expected,
        description=meta.get("description", ("",))[0],
        foliation_id=fid,
        model_spec=spec,
    )


def _fmt_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def dump_scenario(sc: Scenario) -> str:
    """Scenario-file text that loads back to an equivalent scenario."""
    out = ["[scenario]", f"id = {sc.id}"]
    if sc.description:
        out.append(f"description = {sc.description}")
    out += ["", "[model]", f"space = {sc.model_spec[0]}"]
    if len(sc.model_spec) > 1:
        out.append(f"factors = {sc.model_spec[1]}")
    out += ["", "[foliation]"]
    f = sc.foliation
    if sc.foliation_id:
        out.append(f"id = {sc.foliation_id}")
    elif f.kind == "submersion":
        out += ["kind = submersion", "base = " + ", ".join(sc.model.coord_names[i] for i in f.base), f"nu_tag = {f.nu_tag}"]
    else:
        out += ["kind = line_field", "direction = " + ", ".join(repr(c) for c in f.direction), f"nu_tag = {f.nu_tag}"]
    emb = sc.embedding
    out += ["", "[embedding]", f"domain = {emb.domain.kind}", "params = " + ", ".join(emb.domain.names)]
    for name, e in zip(sc.model.coord_names, emb.component_exprs):
        out.append(f"{name} = {X.to_string(e)}")
    for k, v in emb.params:
        out.append(f"{k} = {v!r}")
    out += ["", "[perturbation]", f"eps = {sc.eps!r}", f"seed = {sc.seed}", f"degree = {sc.degree}"]
    if sc.expected:
        out += ["", "[expect]"] + [f"{k} = {_fmt_value(v)}" for k, v in sorted(sc.expected.items())]
    return "\n".join(out) + "\n"


def equivalent(a: Scenario, b: Scenario, ignore_id: bool = True) -> bool:
    """Same model, foliation, embedding, perturbation and expectations."""
    if not ignore_id and a.id != b.id:
        return False
    ea, eb = a.embedding, b.embedding
    same_emb = (
        ea.domain == eb.domain
        and ea.component_exprs == eb.component_exprs
        and ea.params == eb.params
        and all(x.close_to(y) for x, y in zip(ea.seams, eb.seams))
    )
    return (
        a.model == b.model
        and a.foliation == b.foliation
        and same_emb
        and a.eps == b.eps
        and a.seed == b.seed
        and a.degree == b.degree
        and a.expected == b.expected
    )


def resolve(spec: str, params: dict | None = None, cfg=None) -> Scenario:
    """A builtin id or a path to a scenario file."""
    if spec in _BUILTINS:
        return builtin(spec, params)
    try:
        with open(spec, encoding="utf-8") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise UnknownScenario(f"{spec!r} is neither a builtin scenario ({', '.join(BUILTIN_IDS)}) nor a file") from None
    sc = load_scenario(text, cfg)
    if params:
        over = {k: v for k, v in params.items() if k in ("eps", "seed")}
        if set(params) - set(over):
            raise BadParams("scenario files accept only eps and seed overrides")
        sc = replace(sc, **{k: (float(v) if k == "eps" else int(v)) for k, v in over.items()})
    return sc
