"""Formula mini-language for model specification.

The grammar is a strict subset of the R-style network-model formula syntax:
an optional ``lhs ~`` prefix (ignored), then terms joined by ``+``. A term
is a bare name, a call ``name(args)``, or ``offset(term)``. Arguments are
positional literals or ``key = value`` pairs; literals are numbers, quoted
strings, ``TRUE``/``FALSE``, integer ranges ``a:b`` and vectors
``c(x, y, ...)``. Anything outside this subset is a parse error.

Supported terms: edges, mutual, nodematch, nodefactor, absdiff, gwesp
(fixed decay only), idegree, odegree, degree.

Conventions that fix the statistic coordinate order:
  * coordinates follow term order, then sorted level order within a term;
  * nodefactor drops the first level (sorted) as the baseline;
  * numeric attributes sort numerically, categorical ones lexically.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

import numpy as np

from .graph import Graph

TERM_KINDS = ("edges", "mutual", "nodematch", "nodefactor", "absdiff",
              "gwesp", "idegree", "odegree", "degree")

DIRECTED_ONLY = {"mutual", "idegree", "odegree"}
UNDIRECTED_ONLY = {"degree"}
# change statistics for these terms do not depend on the rest of the graph
DYAD_INDEPENDENT = {"edges", "nodematch", "nodefactor", "absdiff"}


class FormulaError(ValueError):
    """Formula syntax or schema violation, with source position."""

    def __init__(self, message: str, pos: int | None = None):
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)
        self.pos = pos


class SpecError(ValueError):
    """Model specification invalid against a concrete graph."""


@dataclass(frozen=True)
class Term:
    kind: str
    attr: str | None = None
    diff: bool = False
    levels: tuple | None = None
    decay: float = 0.0
    fixed: bool = False
    degrees: tuple[int, ...] | None = None
    offset: bool = False


@dataclass(frozen=True)
class Coord:
    """One expanded statistic coordinate."""

    name: str
    kind: str
    attr: str | None = None
    level: object | None = None        # single level (diff nodematch / nodefactor)
    level_set: tuple | None = None     # filter for pooled nodematch
    decay: float = 0.0
    degree: int = 0
    offset: bool = False


@dataclass
class ModelSpec:
    """Ordered terms plus, after validation, the expanded coordinate map."""

    terms: list[Term]
    d: int | None = None
    coords: list[Coord] | None = None
    offset_values: np.ndarray | None = None

    @property
    def validated(self) -> bool:
        return self.coords is not None

    @property
    def coord_names(self) -> list[str]:
        self._require_validated()
        return [c.name for c in self.coords]

    @property
    def free_index(self) -> np.ndarray:
        self._require_validated()
        return np.array([k for k, c in enumerate(self.coords) if not c.offset], dtype=np.int64)

    @property
    def offset_index(self) -> np.ndarray:
        self._require_validated()
        return np.array([k for k, c in enumerate(self.coords) if c.offset], dtype=np.int64)

    @property
    def n_free(self) -> int:
        return len(self.free_index)

    def full_theta(self, theta_free: np.ndarray) -> np.ndarray:
        """Embed free coordinates into the full vector, offsets at their fixed values."""
        self._require_validated()
        theta_free = np.asarray(theta_free, dtype=np.float64)
        if theta_free.shape != (self.n_free,):
            raise SpecError(f"theta has length {theta_free.shape}, expected {self.n_free} free coordinates")
        full = np.empty(self.d, dtype=np.float64)
        full[self.free_index] = theta_free
        if len(self.offset_index):
            full[self.offset_index] = self.offset_values
        return full

    def dyad_independent(self) -> bool:
        return all(t.kind in DYAD_INDEPENDENT for t in self.terms)

    def _require_validated(self):
        if not self.validated:
            raise SpecError("model spec has not been validated against a graph")


# -- tokenizer ---------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>\s+)
  | (?P<number>[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<string>"[^"]*"|'[^']*')
  | (?P<op>[~+(),=:])
""", re.VERBOSE)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group(), pos))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.k = 0

    def peek(self):
        return self.toks[self.k]

    def next(self):
        tok = self.toks[self.k]
        self.k += 1
        return tok

    def expect(self, kind, value=None):
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise FormulaError(f"expected {want!r}, found {tok[1]!r}", tok[2])
        return tok

    # grammar ----------------------------------------------------------

    def parse(self) -> list[Term]:
        # optional "<lhs> ~"
        if (self.peek()[0] == "name" and self.toks[self.k + 1][0] == "op"
                and self.toks[self.k + 1][1] == "~"):
            self.next()
            self.next()
        terms = [self.term()]
        while self.peek() == ("op", "+", self.peek()[2]):
            self.next()
            terms.append(self.term())
        tok = self.peek()
        if tok[0] != "end":
            raise FormulaError(f"unexpected token {tok[1]!r}", tok[2])
        return terms

    def term(self) -> Term:
        kind, name, pos = self.expect("name")
        if name == "offset":
            self.expect("op", "(")
            inner = self.term()
            self.expect("op", ")")
            return replace(inner, offset=True)
        if name not in TERM_KINDS:
            raise FormulaError(f"unknown term {name!r}", pos)
        args, kwargs = [], {}
        if self.peek()[:2] == ("op", "("):
            self.next()
            if self.peek()[:2] != ("op", ")"):
                self.argument(args, kwargs)
                while self.peek()[:2] == ("op", ","):
                    self.next()
                    self.argument(args, kwargs)
            self.expect("op", ")")
        return _build_term(name, args, kwargs, pos)

    def argument(self, args: list, kwargs: dict):
        tok = self.peek()
        if tok[0] == "name" and self.toks[self.k + 1][:2] == ("op", "="):
            key = self.next()[1]
            self.next()
            kwargs[key] = (self.value(), tok[2])
        else:
            args.append((self.value(), tok[2]))

    def value(self):
        tok = self.next()
        if tok[0] == "number":
            v = _as_number(tok[1])
            if self.peek()[:2] == ("op", ":"):
                self.next()
                hi_tok = self.expect("number")
                lo, hi = v, _as_number(hi_tok[1])
                if not (float(lo).is_integer() and float(hi).is_integer() and lo <= hi):
                    raise FormulaError(f"invalid integer range {lo}:{hi}", tok[2])
                return tuple(range(int(lo), int(hi) + 1))
            return v
        if tok[0] == "string":
            return tok[1][1:-1]
        if tok[0] == "name":
            if tok[1] in ("TRUE", "T"):
                return True
            if tok[1] in ("FALSE", "F"):
                return False
            if tok[1] == "c":
                self.expect("op", "(")
                items = [self.value()]
                while self.peek()[:2] == ("op", ","):
                    self.next()
                    items.append(self.value())
                self.expect("op", ")")
                return tuple(items)
            raise FormulaError(f"unexpected name {tok[1]!r} in argument", tok[2])
        raise FormulaError(f"expected a value, found {tok[1]!r}", tok[2])


def _as_number(text: str):
    v = float(text)
    return int(v) if v.is_integer() and "." not in text and "e" not in text.lower() else v


# -- term schemas ------------------------------------------------------

def _build_term(name: str, args: list, kwargs: dict, pos: int) -> Term:
    def no_more_args():
        if args:
            raise FormulaError(f"{name} takes no positional argument here", args[0][1])
        if kwargs:
            key = next(iter(kwargs))
            raise FormulaError(f"unknown argument {key!r} for {name}", kwargs[key][1])

    if name in ("edges", "mutual"):
        no_more_args()
        return Term(kind=name)

    if name in ("nodematch", "nodefactor", "absdiff"):
        if not args or not isinstance(args[0][0], str):
            raise FormulaError(f"{name} needs an attribute name as first argument", pos)
        attr = args.pop(0)[0]
        diff = False
        levels = None
        if name == "nodematch" and "diff" in kwargs:
            v, p = kwargs.pop("diff")
            if not isinstance(v, bool):
                raise FormulaError("diff must be TRUE or FALSE", p)
            diff = v
        if name in ("nodematch", "nodefactor") and "levels" in kwargs:
            v, p = kwargs.pop("levels")
            levels = v if isinstance(v, tuple) else (v,)
            if not levels:
                raise FormulaError("levels must be non-empty", p)
        no_more_args()
        return Term(kind=name, attr=attr, diff=diff, levels=levels)

    if name == "gwesp":
        if not args or not isinstance(args[0][0], (int, float)) or isinstance(args[0][0], bool):
            raise FormulaError("gwesp needs a numeric decay as first argument", pos)
        decay = float(args.pop(0)[0])
        if decay < 0:
            raise FormulaError("gwesp decay must be nonnegative", pos)
        fixed = False
        if "fixed" in kwargs:
            v, p = kwargs.pop("fixed")
            if not isinstance(v, bool):
                raise FormulaError("fixed must be TRUE or FALSE", p)
            fixed = v
        no_more_args()
        if not fixed:
            raise FormulaError("gwesp requires fixed = TRUE (curved models unsupported)", pos)
        return Term(kind="gwesp", decay=decay, fixed=True)

    if name in ("idegree", "odegree", "degree"):
        if not args:
            raise FormulaError(f"{name} needs a degree value, range or vector", pos)
        v, p = args.pop(0)
        if isinstance(v, bool) or isinstance(v, str):
            raise FormulaError(f"{name} degrees must be integers", p)
        degs = v if isinstance(v, tuple) else (v,)
        if not all(isinstance(x, int) and x >= 0 for x in degs):
            raise FormulaError(f"{name} degrees must be nonnegative integers", p)
        no_more_args()
        return Term(kind=name, degrees=tuple(sorted(set(degs))))

    raise FormulaError(f"unknown term {name!r}", pos)


def _min_dim(term: Term) -> int:
    if term.kind in ("idegree", "odegree", "degree"):
        return len(term.degrees)
    if term.kind == "nodematch" and term.diff:
        return len(term.levels) if term.levels else 1
    return 1


def parse_formula(text: str) -> ModelSpec:
    """Parse a formula into an (unvalidated) ModelSpec.

    Fitting requires at least two statistic coordinates; formulas that can
    never reach that are rejected here.
    """
    terms = _Parser(text).parse()
    lower = sum(_min_dim(t) for t in terms)
    expandable = any(t.kind in ("nodematch", "nodefactor") and t.levels is None
                     and (t.kind == "nodefactor" or t.diff) for t in terms)
    if lower < 2 and not expandable:
        raise FormulaError(f"model dimension {lower} < 2")
    return ModelSpec(terms=terms)


# -- pretty printer ----------------------------------------------------

def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _fmt_term(t: Term) -> str:
    if t.kind in ("edges", "mutual"):
        body = t.kind
    elif t.kind in ("nodematch", "nodefactor", "absdiff"):
        parts = [f'"{t.attr}"']
        if t.kind == "nodematch" and t.diff:
            parts.append("diff = TRUE")
        if t.levels is not None:
            inner = ", ".join(_fmt_value(v) for v in t.levels)
            parts.append(f"levels = c({inner})")
        body = f"{t.kind}({', '.join(parts)})"
    elif t.kind == "gwesp":
        body = f"gwesp({_fmt_value(t.decay)}, fixed = TRUE)"
    else:
        degs = t.degrees
        if len(degs) > 1 and degs == tuple(range(degs[0], degs[-1] + 1)):
            arg = f"{degs[0]}:{degs[-1]}"
        elif len(degs) == 1:
            arg = str(degs[0])
        else:
            arg = "c(" + ", ".join(str(x) for x in degs) + ")"
        body = f"{t.kind}({arg})"
    return f"offset({body})" if t.offset else body


def format_formula(spec: ModelSpec) -> str:
    return " + ".join(_fmt_term(t) for t in spec.terms)


# -- validation --------------------------------------------------------

def _level_label(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


def _observed_levels(vals: np.ndarray) -> list:
    if vals.dtype == np.float64:
        return sorted(set(float(v) for v in vals))
    return sorted(set(str(v) for v in vals))


def _coerce_levels(requested: tuple, observed: list, attr: str) -> list:
    out = []
    obs_by_label = {_level_label(v): v for v in observed}
    for r in requested:
        key = _level_label(float(r)) if isinstance(r, (int, float)) and not isinstance(r, bool) else str(r)
        if key not in obs_by_label:
            raise SpecError(f"level {r!r} not observed for attribute {attr!r}")
        out.append(obs_by_label[key])
    return sorted(out, key=lambda v: (str(v) if isinstance(v, str) else v))


def validate(spec: ModelSpec, g: Graph, offset_coef=None) -> ModelSpec:
    """Check a parsed spec against a graph and resolve coordinate expansion.

    Returns a new ModelSpec bound to g's attribute levels. `offset_coef`
    supplies the fixed coefficients for offset coordinates, in coordinate
    order; it is required exactly when the model has offset terms.
    """
    coords: list[Coord] = []
    for t in spec.terms:
        if t.kind in DIRECTED_ONLY and not g.directed:
            raise SpecError(f"term {t.kind!r} needs a directed graph")
        if t.kind in UNDIRECTED_ONLY and g.directed:
            raise SpecError(f"term {t.kind!r} needs an undirected graph")
        if t.attr is not None:
            if t.attr not in g.attributes:
                raise SpecError(f"attribute {t.attr!r} not present on the graph")
            vals = g.attributes[t.attr]
            if t.kind == "absdiff" and vals.dtype != np.float64:
                raise SpecError(f"absdiff needs a numeric attribute, {t.attr!r} is categorical")

        if t.kind == "edges":
            coords.append(Coord("edges", "edges", offset=t.offset))
        elif t.kind == "mutual":
            coords.append(Coord("mutual", "mutual", offset=t.offset))
        elif t.kind == "absdiff":
            coords.append(Coord(f"absdiff.{t.attr}", "absdiff", attr=t.attr, offset=t.offset))
        elif t.kind == "gwesp":
            coords.append(Coord(f"gwesp.fixed.{_fmt_value(t.decay)}", "gwesp",
                                decay=t.decay, offset=t.offset))
        elif t.kind == "nodematch":
            observed = _observed_levels(g.attributes[t.attr])
            if t.diff:
                lvls = _coerce_levels(t.levels, observed, t.attr) if t.levels else observed
                for v in lvls:
                    coords.append(Coord(f"nodematch.{t.attr}.{_level_label(v)}", "nodematch",
                                        attr=t.attr, level=v, offset=t.offset))
            else:
                lvl_set = tuple(_coerce_levels(t.levels, observed, t.attr)) if t.levels else None
                coords.append(Coord(f"nodematch.{t.attr}", "nodematch", attr=t.attr,
                                    level_set=lvl_set, offset=t.offset))
        elif t.kind == "nodefactor":
            observed = _observed_levels(g.attributes[t.attr])
            if t.levels is not None:
                lvls = _coerce_levels(t.levels, observed, t.attr)
            else:
                # first sorted level is the baseline and is dropped
                lvls = observed[1:]
            if not lvls:
                raise SpecError(f"nodefactor({t.attr!r}) has no non-baseline level")
            for v in lvls:
                coords.append(Coord(f"nodefactor.{t.attr}.{_level_label(v)}", "nodefactor",
                                    attr=t.attr, level=v, offset=t.offset))
        else:  # degree family
            for k in t.degrees:
                coords.append(Coord(f"{t.kind}{k}", t.kind, degree=k, offset=t.offset))

    d = len(coords)
    n_off = sum(c.offset for c in coords)
    if offset_coef is None:
        offset_values = np.zeros(0, dtype=np.float64)
        if n_off:
            raise SpecError(f"model has {n_off} offset coordinate(s) but no offset coefficients were given")
    else:
        offset_values = np.asarray(offset_coef, dtype=np.float64).reshape(-1)
        if offset_values.shape[0] != n_off:
            raise SpecError(f"{offset_values.shape[0]} offset coefficient(s) for {n_off} offset coordinate(s)")
        if not np.all(np.isfinite(offset_values)):
            raise SpecError("offset coefficients must be finite (use extreme values instead of infinities)")
    return ModelSpec(terms=list(spec.terms), d=d, coords=coords, offset_values=offset_values)


def build_model(formula: str, g: Graph, offset_coef=None) -> ModelSpec:
    """parse_formula + validate in one step."""
    return validate(parse_formula(formula), g, offset_coef=offset_coef)
