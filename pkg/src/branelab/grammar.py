"""Text grammar for fields, vectors and forms.

Fields are sums like ``1.5*x1^2*cos(2*pi*(q - x2))``; vectors use ``d_x1``
basis symbols; forms use wedge chains like ``dx1^dy2`` with field
coefficients in front.  The ``2*pi`` token is explicit so integer
frequencies round-trip without floating-point noise.  Serialization is
canonical: parse(serialize(x)) reproduces x exactly.
"""

from __future__ import annotations

import re

from .fields import COS, SIN, ScalarField, VectorField
from .forms import DifferentialForm
from .model import ManifoldModel

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*^()@])"
    r")")


class ParseError(ValueError):
    def __init__(self, msg, pos):
        super().__init__(f"{msg} (at offset {pos})")
        self.pos = pos


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip() == "":
                    break
                raise ParseError(f"bad character {text[pos]!r}", pos)
            for kind in ("num", "name", "op"):
                if m.group(kind) is not None:
                    self.items.append((kind, m.group(kind), m.start(kind)))
                    break
            pos = m.end()
        self.i = 0

    def peek(self):
        if self.i < len(self.items):
            return self.items[self.i]
        return ("eof", "", len(self.text))

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def accept(self, kind, value=None):
        k, v, _ = self.peek()
        if k == kind and (value is None or v == value):
            self.i += 1
            return v
        return None

    def expect(self, kind, value=None):
        k, v, pos = self.peek()
        if k != kind or (value is not None and v != value):
            want = value if value is not None else kind
            raise ParseError(f"expected {want!r}, found {v!r}", pos)
        self.i += 1
        return v


def _is_int(text: str) -> bool:
    return re.fullmatch(r"\d+", text) is not None


def _parse_int(toks: _Tokens) -> int:
    k, v, pos = toks.next()
    if k != "num" or not _is_int(v):
        raise ParseError(f"expected integer, found {v!r}", pos)
    return int(v)


def _parse_trig(toks: _Tokens, model: ManifoldModel, which: str) -> ScalarField:
    toks.expect("op", "(")
    k, v, pos = toks.next()
    if not (k == "num" and v == "2"):
        raise ParseError("trig argument must start with 2*pi*", pos)
    toks.expect("op", "*")
    toks.expect("name", "pi")
    toks.expect("op", "*")
    freqs = [0] * model.dim

    def add_part(sign):
        mult = 1
        k, v, pos = toks.peek()
        if k == "num":
            mult = _parse_int(toks)
            toks.expect("op", "*")
        name = toks.expect("name")
        freqs[model.index(name)] += sign * mult

    if toks.accept("op", "("):
        sign = -1 if toks.accept("op", "-") else 1
        toks.accept("op", "+")
        add_part(sign)
        while True:
            if toks.accept("op", "+"):
                add_part(1)
            elif toks.accept("op", "-"):
                add_part(-1)
            else:
                break
        toks.expect("op", ")")
    else:
        add_part(1)
    toks.expect("op", ")")
    phase = COS if which == "cos" else SIN
    if phase == SIN:
        return ScalarField.sine(model, freqs)
    return ScalarField.cosine(model, freqs)


def _parse_atom(toks: _Tokens, model: ManifoldModel, env) -> ScalarField:
    k, v, pos = toks.peek()
    if k == "num":
        toks.next()
        return ScalarField.constant(model, float(v))
    if k == "op" and v == "(":
        toks.next()
        f = _parse_sum(toks, model, env)
        toks.expect("op", ")")
        return f
    if k == "name":
        toks.next()
        if v in ("cos", "sin"):
            return _parse_trig(toks, model, v)
        if env and v in env:
            f = env[v]
            if f.model != model:
                raise ParseError(f"{v!r} lives on a different model", pos)
            return f
        try:
            return ScalarField.coordinate(model, model.index(v))
        except KeyError:
            raise ParseError(f"unknown name {v!r}", pos) from None
    raise ParseError(f"unexpected token {v!r}", pos)


def _parse_factor(toks: _Tokens, model: ManifoldModel, env) -> ScalarField:
    f = _parse_atom(toks, model, env)
    if toks.accept("op", "^"):
        n = _parse_int(toks)
        out = ScalarField.constant(model, 1.0)
        for _ in range(n):
            out = out * f
        return out
    return f


def _parse_term(toks: _Tokens, model: ManifoldModel, env) -> ScalarField:
    f = _parse_factor(toks, model, env)
    while toks.accept("op", "*"):
        f = f * _parse_factor(toks, model, env)
    return f


def _parse_sum(toks: _Tokens, model: ManifoldModel, env) -> ScalarField:
    sign = -1.0 if toks.accept("op", "-") else 1.0
    toks.accept("op", "+")
    f = _parse_term(toks, model, env) * sign
    while True:
        if toks.accept("op", "+"):
            f = f + _parse_term(toks, model, env)
        elif toks.accept("op", "-"):
            f = f - _parse_term(toks, model, env)
        else:
            return f


def parse_field(text: str, model: ManifoldModel, env=None) -> ScalarField:
    toks = _Tokens(text)
    f = _parse_sum(toks, model, env)
    k, v, pos = toks.peek()
    if k != "eof":
        raise ParseError(f"trailing input {v!r}", pos)
    return f


def parse_vector(text: str, model: ManifoldModel, env=None) -> VectorField:
    """Sums of scalar-coefficient multiples of d_<coord> basis symbols."""
    toks = _Tokens(text)
    comps = [ScalarField.zero(model) for _ in range(model.dim)]
    if toks.peek()[:2] == ("num", "0") and len(toks.items) == 1:
        return VectorField(model, tuple(comps))

    def term(sign):
        coeff = ScalarField.constant(model, sign)
        direction = None
        while True:
            k, v, pos = toks.peek()
            if k == "name" and v.startswith("d_"):
                toks.next()
                if direction is not None:
                    raise ParseError("two basis symbols in one term", pos)
                direction = model.index(v[2:])
            else:
                coeff = coeff * _parse_factor(toks, model, env)
            if not toks.accept("op", "*"):
                break
        if direction is None:
            raise ParseError("vector term lacks a d_<coord> symbol",
                             toks.peek()[2])
        comps[direction] = comps[direction] + coeff

    sign = -1.0 if toks.accept("op", "-") else 1.0
    term(sign)
    while True:
        if toks.accept("op", "+"):
            term(1.0)
        elif toks.accept("op", "-"):
            term(-1.0)
        else:
            break
    k, v, pos = toks.peek()
    if k != "eof":
        raise ParseError(f"trailing input {v!r}", pos)
    return VectorField(model, tuple(comps))


def _covector_index(name: str, model: ManifoldModel):
    if name.startswith("d") and len(name) > 1:
        try:
            return model.index(name[1:])
        except KeyError:
            return None
    return None


def parse_form(text: str, model: ManifoldModel, env=None) -> DifferentialForm:
    """Sums of field coefficients times wedge chains like dx1^dy2.

    The zero form needs an explicit degree: ``0@2``.
    """
    toks = _Tokens(text)
    if toks.peek()[:2] == ("num", "0"):
        save = toks.i
        toks.next()
        if toks.accept("op", "@"):
            deg = _parse_int(toks)
            if toks.peek()[0] != "eof":
                raise ParseError("trailing input after zero form", toks.peek()[2])
            return DifferentialForm.zero(model, deg)
        toks.i = save

    raw: dict[tuple[int, ...], ScalarField] = {}
    degree = None

    def term(sign):
        nonlocal degree
        coeff = ScalarField.constant(model, sign)
        chain: tuple[int, ...] | None = None
        while True:
            k, v, pos = toks.peek()
            ci = _covector_index(v, model) if k == "name" else None
            if ci is not None:
                toks.next()
                idx = [ci]
                while toks.accept("op", "^"):
                    nm = toks.expect("name")
                    cj = _covector_index(nm, model)
                    if cj is None:
                        raise ParseError(f"{nm!r} is not a basis covector",
                                         toks.peek()[2])
                    idx.append(cj)
                if chain is not None:
                    raise ParseError("two wedge chains in one term", pos)
                chain = tuple(idx)
            else:
                coeff = coeff * _parse_factor(toks, model, env)
            if not toks.accept("op", "*"):
                break
        if chain is None:
            raise ParseError("form term lacks a wedge chain", toks.peek()[2])
        if degree is None:
            degree = len(chain)
        elif degree != len(chain):
            raise ParseError("mixed degrees in form", toks.peek()[2])
        raw[chain] = raw[chain] + coeff if chain in raw else coeff

    sign = -1.0 if toks.accept("op", "-") else 1.0
    term(sign)
    while True:
        if toks.accept("op", "+"):
            term(1.0)
        elif toks.accept("op", "-"):
            term(-1.0)
        else:
            break
    k, v, pos = toks.peek()
    if k != "eof":
        raise ParseError(f"trailing input {v!r}", pos)
    acc: dict[tuple[int, ...], ScalarField] = {}
    for idx, f in raw.items():
        acc[idx] = acc[idx] + f if idx in acc else f
    return DifferentialForm.build(model, degree, acc)


# -- serialization -------------------------------------------------------


def _num_text(c: float) -> str:
    if c == int(c) and abs(c) < 1e15:
        return repr(float(c))
    return repr(c)


def _freq_text(model: ManifoldModel, freqs) -> str:
    parts = []
    for i, k in enumerate(freqs):
        if k == 0:
            continue
        parts.append((i, k))
    if len(parts) == 1 and parts[0][1] > 0:
        i, k = parts[0]
        name = model.names[i]
        return name if k == 1 else f"{k}*{name}"
    bits = []
    for n, (i, k) in enumerate(parts):
        name = model.names[i]
        mag = abs(k)
        body = name if mag == 1 else f"{mag}*{name}"
        if n == 0:
            bits.append(body if k > 0 else f"-{body}")
        else:
            bits.append((" + " if k > 0 else " - ") + body)
    return "(" + "".join(bits) + ")"


def _term_body(model: ManifoldModel, key, coeff: float) -> str:
    powers, freqs, phase = key
    factors = []
    a = abs(coeff)
    if a != 1.0:
        factors.append(_num_text(a))
    for i, p in enumerate(powers):
        if p == 0:
            continue
        factors.append(model.names[i] if p == 1 else f"{model.names[i]}^{p}")
    if any(freqs):
        trig = "cos" if phase == COS else "sin"
        factors.append(f"{trig}(2*pi*{_freq_text(model, freqs)})")
    if not factors:
        factors.append(_num_text(a))
    return "*".join(factors)


def _join_signed(parts: list[tuple[float, str]]) -> str:
    out = []
    for n, (c, body) in enumerate(parts):
        if n == 0:
            out.append(("-" if c < 0 else "") + body)
        else:
            out.append((" - " if c < 0 else " + ") + body)
    return "".join(out)


def field_to_text(f: ScalarField) -> str:
    if not f.terms:
        return "0"
    return _join_signed(
        [(c, _term_body(f.model, key, c)) for key, c in f.terms])


def vector_to_text(v: VectorField) -> str:
    parts = []
    for i, comp in enumerate(v.components):
        if not comp.terms:
            continue
        sym = f"d_{v.model.names[i]}"
        if len(comp.terms) == 1:
            key, c = comp.terms[0]
            body = _term_body(v.model, key, c)
            parts.append((c, sym if body == "1.0" else f"{body}*{sym}"))
        else:
            parts.append((1.0, f"({field_to_text(comp)})*{sym}"))
    if not parts:
        return "0"
    return _join_signed(parts)


def form_to_text(a: DifferentialForm) -> str:
    if not a.coeffs:
        return f"0@{a.degree}"
    parts = []
    for idx, f in a.coeffs:
        chain = "^".join(f"d{a.model.names[i]}" for i in idx)
        if len(f.terms) == 1:
            key, c = f.terms[0]
            body = _term_body(a.model, key, c)
            parts.append((c, chain if body == "1.0" else f"{body}*{chain}"))
        else:
            parts.append((1.0, f"({field_to_text(f)})*{chain}"))
    return _join_signed(parts)
