"""Model-specification strings: ``response ~ s(x) + s(z, k=12) + w + re(g)``.

``s(x)`` declares a penalized smooth of x (basis size k, default 10),
``re(g)`` a random-effect factor (ridge-penalized level coefficients), and a
bare identifier a linear term.  ``y ~ 1`` is the intercept-only model.
"""

from __future__ import annotations

import re as _re
from dataclasses import dataclass
from typing import List, Tuple

DEFAULT_BASIS_SIZE = 10


class FormulaError(Exception):
    pass


class FormulaSyntaxError(FormulaError):
    def __init__(self, position: int, message: str):
        self.position = position
        super().__init__(f"position {position}: {message}")


class DuplicateTerm(FormulaError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name!r} appears in more than one term")


class ResponseInPredictors(FormulaError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"response {name!r} may not appear among the predictors")


@dataclass(frozen=True)
class ModelFormula:
    response: str
    smooth_terms: Tuple[Tuple[str, int], ...] = ()
    random_terms: Tuple[str, ...] = ()
    linear_terms: Tuple[str, ...] = ()

    def predictor_names(self) -> List[str]:
        return ([v for v, _ in self.smooth_terms]
                + list(self.linear_terms) + list(self.random_terms))

    def __post_init__(self):
        seen = set()
        for name in self.predictor_names():
            if name == self.response:
                raise ResponseInPredictors(name)
            if name in seen:
                raise DuplicateTerm(name)
            seen.add(name)
        for var, k in self.smooth_terms:
            if k < 3:
                raise FormulaError(f"smooth s({var}): basis size k={k} must be >= 3")


_TOKEN = _re.compile(r"\s*(?:(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>\d+)"
                     r"|(?P<sym>[~+(),=]))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped)
            raise FormulaSyntaxError(at, f"unexpected character {text[at]!r}")
        if m.lastgroup == "ident":
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        elif m.lastgroup == "int":
            tokens.append(("int", m.group("int"), m.start("int")))
        else:
            tokens.append(("sym", m.group("sym"), m.start("sym")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind, value=None):
        tok = self.tokens[self.i]
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value if value is not None else kind
            raise FormulaSyntaxError(tok[2], f"expected {want!r}, found {tok[1]!r}" if tok[1]
                                     else f"expected {want!r} at end of input")
        self.i += 1
        return tok

    def parse(self) -> ModelFormula:
        response = self.take("ident")[1]
        self.take("sym", "~")
        smooths: list = []
        randoms: list = []
        linears: list = []
        if self.peek()[:2] == ("int", "1"):
            # intercept-only model: '1' must stand alone
            self.take("int")
            self.take("end")
            return ModelFormula(response)
        self._term(smooths, randoms, linears)
        while self.peek()[:2] == ("sym", "+"):
            self.take("sym", "+")
            self._term(smooths, randoms, linears)
        self.take("end")
        return ModelFormula(response, tuple(smooths), tuple(randoms), tuple(linears))

    def _term(self, smooths, randoms, linears):
        tok = self.take("ident")
        name = tok[1]
        if self.peek()[:2] != ("sym", "("):
            linears.append(name)
            return
        if name not in ("s", "re"):
            raise FormulaSyntaxError(tok[2], f"unknown term function {name!r} (use s or re)")
        self.take("sym", "(")
        var = self.take("ident")[1]
        if name == "re":
            self.take("sym", ")")
            randoms.append(var)
            return
        k = DEFAULT_BASIS_SIZE
        if self.peek()[:2] == ("sym", ","):
            self.take("sym", ",")
            key = self.take("ident")
            if key[1] != "k":
                raise FormulaSyntaxError(key[2], f"only 'k=' is accepted here, got {key[1]!r}")
            self.take("sym", "=")
            ktok = self.take("int")
            k = int(ktok[1])
            if k < 3:
                raise FormulaSyntaxError(ktok[2], f"basis size k={k} must be >= 3")
        self.take("sym", ")")
        smooths.append((var, k))


def parse_formula(text: str) -> ModelFormula:
    """Parse a formula string; errors carry the offending position."""
    return _Parser(text).parse()


def render_formula(f: ModelFormula) -> str:
    """Canonical string form; parse_formula(render_formula(f)) == f."""
    terms = []
    for var, k in f.smooth_terms:
        terms.append(f"s({var})" if k == DEFAULT_BASIS_SIZE else f"s({var}, k={k})")
    terms.extend(f.linear_terms)
    terms.extend(f"re({g})" for g in f.random_terms)
    rhs = " + ".join(terms) if terms else "1"
    return f"{f.response} ~ {rhs}"
