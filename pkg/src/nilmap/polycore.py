"""Exact sparse multivariate polynomials over the rationals.

Coefficients are stored as ``gmpy2.mpq``; exponent vectors are dense tuples
of length ``nvars``. Every value is immutable and canonical, so ``==`` is an
exact test of polynomial identity.
"""

from __future__ import annotations

import operator
import os
import re
from math import lcm
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpq

__all__ = [
    "Polynomial",
    "PolyMap",
    "TermCapExceeded",
    "to_rational",
    "get_term_cap",
    "set_term_cap",
    "set_engine",
    "get_engine",
    "add",
    "mul",
    "partial",
    "compose",
    "eval_exact",
    "eval_float",
    "degree",
]

DEFAULT_TERM_CAP = 10**6
_term_cap = int(os.environ.get("NILMAP_TERM_CAP", DEFAULT_TERM_CAP))


class TermCapExceeded(RuntimeError):
    """An intermediate polynomial grew past the configured term cap."""


def get_term_cap() -> int:
    return _term_cap


def set_term_cap(cap: int | None) -> None:
    """Set the term guard; ``None`` restores ``NILMAP_TERM_CAP`` or the default."""
    global _term_cap
    if cap is None:
        cap = int(os.environ.get("NILMAP_TERM_CAP", DEFAULT_TERM_CAP))
    if cap < 1:
        raise ValueError("term cap must be positive")
    _term_cap = int(cap)


def to_rational(value) -> mpq:
    """Coerce int / Fraction / mpq / ``"p/q"`` strings to an exact rational.

    Floats are rejected: the symbolic layer never takes inexact input.
    """
    if isinstance(value, bool):
        raise TypeError("bool is not a rational coefficient")
    if isinstance(value, mpq):
        return value
    if isinstance(value, int):
        return mpq(value)
    if isinstance(value, Fraction):
        return mpq(value.numerator, value.denominator)
    if isinstance(value, str):
        try:
            return mpq(value.strip())
        except ValueError as exc:
            raise ValueError(f"not a rational literal: {value!r}") from exc
    if isinstance(value, float):
        raise TypeError("floats are not accepted as exact coefficients; pass a Fraction or 'p/q' string")
    raise TypeError(f"cannot interpret {type(value).__name__} as a rational")


def _check_cap(n: int) -> None:
    if n > _term_cap:
        raise TermCapExceeded(f"intermediate polynomial has {n} terms (cap {_term_cap})")


def _pack(terms: dict, nv: int, width: int) -> tuple[list[tuple[int, int]], int]:
    """Packed exponent keys with integer coefficients over a common denominator."""
    den = 1
    for c in terms.values():
        d = c.denominator
        if d != 1:
            den = lcm(den, int(d))
    shifts = [width * i for i in range(nv)]
    top = width * nv
    out = []
    for e, c in terms.items():
        k = sum(x << sh for x, sh in zip(e, shifts)) + (sum(e) << top)
        out.append((k, int(c.numerator) * (den // int(c.denominator))))
    return out, den


def _grlex_key(exp: tuple[int, ...]):
    return (sum(exp), exp)


class _Engine:
    """Optional FLINT backend for large products and substitutions.

    Small operands stay on the dict implementation, where conversion would
    cost more than it saves. ``NILMAP_ENGINE=python`` disables the backend.
    """

    def __init__(self):
        self.threshold = 4096
        self._ctx: dict[int, object] = {}
        try:
            import flint
        except ImportError:  # pragma: no cover - flint is a declared dependency
            flint = None
        self.flint = flint
        self.enabled = flint is not None and os.environ.get("NILMAP_ENGINE", "flint") != "python"

    def context(self, nvars: int):
        ctx = self._ctx.get(nvars)
        if ctx is None:
            names = tuple(f"x{i + 1}" for i in range(nvars))
            ctx = self._ctx[nvars] = self.flint.fmpq_mpoly_ctx.get(names, "deglex")
        return ctx

    def from_terms(self, terms: dict, nvars: int):
        fmpq = self.flint.fmpq
        return self.context(nvars).from_dict(
            {e: fmpq(int(c.numerator), int(c.denominator)) for e, c in terms.items()}
        )

    @staticmethod
    def to_terms(fp) -> dict:
        return {tuple(map(int, e)): mpq(int(c.p), int(c.q)) for e, c in fp.to_dict().items()}

    def worth_it(self, p: "Polynomial", q: "Polynomial", max_degree: int | None) -> bool:
        if not self.enabled:
            return False
        if max_degree is not None and p.degree() + q.degree() > max_degree:
            return False
        if p._d is None or q._d is None:
            return True
        return len(p) * len(q) >= self.threshold

    def compose_worth_it(self, p: "Polynomial", subst: list, max_degree: int | None) -> bool:
        if not self.enabled:
            return False
        if max_degree is not None and p.degree() * max(s.degree() for s in subst) > max_degree:
            return False
        return len(p) * max(len(s) for s in subst) >= self.threshold // 8


_engine = _Engine()


def set_engine(name: str) -> None:
    """Select ``"flint"`` or ``"python"`` arithmetic (results are identical)."""
    if name not in ("flint", "python"):
        raise ValueError("engine must be 'flint' or 'python'")
    if name == "flint" and _engine.flint is None:
        raise RuntimeError("python-flint is not installed")
    _engine.enabled = name == "flint"


def get_engine() -> str:
    return "flint" if _engine.enabled else "python"


class Polynomial:
    """Sparse polynomial in ``x1 .. x_nvars`` with rational coefficients.

    ``terms`` maps exponent tuples to nonzero coefficients. Construct via
    the classmethods or from a term mapping; arithmetic operators return new
    polynomials.
    """

    __slots__ = ("_d", "_fl", "nvars", "_hash")

    def __init__(self, terms: Mapping[Sequence[int], object] | None = None, nvars: int = 1):
        if nvars < 1:
            raise ValueError("nvars must be a positive integer")
        clean: dict[tuple[int, ...], mpq] = {}
        for exp, coef in (terms or {}).items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != nvars:
                raise ValueError(f"exponent {exp} does not have length {nvars}")
            if any(e < 0 for e in exp):
                raise ValueError(f"negative exponent in {exp}")
            c = to_rational(coef)
            if c:
                clean[exp] = clean.get(exp, 0) + c
                if not clean[exp]:
                    del clean[exp]
        self._d = clean
        self._fl = None
        self.nvars = nvars
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict, nvars: int) -> "Polynomial":
        # caller guarantees canonical terms (no zero coefficients)
        p = object.__new__(cls)
        p._d = terms
        p._fl = None
        p.nvars = nvars
        p._hash = None
        return p

    @classmethod
    def _from_flint(cls, fp, nvars: int) -> "Polynomial":
        p = object.__new__(cls)
        p._d = None
        p._fl = fp
        p.nvars = nvars
        p._hash = None
        if len(fp) > _term_cap:
            _check_cap(len(fp))
        return p

    @property
    def _terms(self) -> dict:
        if self._d is None:
            self._d = _engine.to_terms(self._fl)
        return self._d

    def _flint(self):
        if self._fl is None:
            self._fl = _engine.from_terms(self._d, self.nvars)
        return self._fl

    # -- constructors ---------------------------------------------------
    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls._raw({}, nvars)

    @classmethod
    def constant(cls, value, nvars: int) -> "Polynomial":
        c = to_rational(value)
        return cls._raw({(0,) * nvars: c} if c else {}, nvars)

    @classmethod
    def var(cls, i: int, nvars: int) -> "Polynomial":
        """The coordinate ``x_{i+1}`` (0-based index ``i``)."""
        if not 0 <= i < nvars:
            raise IndexError(f"variable index {i} out of range for {nvars} variables")
        exp = [0] * nvars
        exp[i] = 1
        return cls._raw({tuple(exp): mpq(1)}, nvars)

    @classmethod
    def univariate(cls, coeffs: Sequence) -> "Polynomial":
        """Polynomial in one variable from ascending coefficients ``c0, c1, ...``."""
        return cls({(k,): c for k, c in enumerate(coeffs)}, 1)

    # -- basic queries --------------------------------------------------
    @property
    def terms(self) -> dict[tuple[int, ...], mpq]:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def __len__(self) -> int:
        return len(self._d) if self._d is not None else len(self._fl)

    def is_zero(self) -> bool:
        return len(self) == 0

    def __bool__(self) -> bool:
        return len(self) != 0

    def is_constant(self) -> bool:
        return all(not any(e) for e in self._terms)

    def constant_term(self) -> mpq:
        return self._terms.get((0,) * self.nvars, mpq(0))

    def coeff(self, exp: Sequence[int]) -> mpq:
        return self._terms.get(tuple(exp), mpq(0))

    def degree(self) -> int:
        """Total degree; ``-1`` for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self._terms), default=-1)

    def variables(self) -> set[int]:
        """0-based indices of the variables that actually occur."""
        used = set()
        for e in self._terms:
            used.update(i for i, k in enumerate(e) if k)
        return used

    def homogeneous_part(self, d: int) -> "Polynomial":
        return Polynomial._raw({e: c for e, c in self._terms.items() if sum(e) == d}, self.nvars)

    def truncate(self, max_degree: int) -> "Polynomial":
        return Polynomial._raw({e: c for e, c in self._terms.items() if sum(e) <= max_degree}, self.nvars)

    # -- ring operations ------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"dimension mismatch: {self.nvars} vs {other.nvars} variables")
            return other
        return Polynomial.constant(other, self.nvars)

    def __add__(self, other) -> "Polynomial":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if self._d is None or other._d is None:
            return Polynomial._from_flint(self._flint() + other._flint(), self.nvars)
        if len(other._terms) > len(self._terms):
            big, small = other._terms, self._terms
        else:
            big, small = self._terms, other._terms
        out = dict(big)
        for e, c in small.items():
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s = s + c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return Polynomial._raw(out, self.nvars)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        if self._d is None:
            return Polynomial._from_flint(-self._fl, self.nvars)
        return Polynomial._raw({e: -c for e, c in self._terms.items()}, self.nvars)

    def __sub__(self, other) -> "Polynomial":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def scale(self, c) -> "Polynomial":
        c = to_rational(c)
        if not c:
            return Polynomial.zero(self.nvars)
        if self._d is None:
            fc = _engine.flint.fmpq(int(c.numerator), int(c.denominator))
            return Polynomial._from_flint(self._fl * fc, self.nvars)
        return Polynomial._raw({e: v * c for e, v in self._terms.items()}, self.nvars)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            try:
                return self.scale(other)
            except TypeError:
                return NotImplemented
        return self.mul(other)

    def __rmul__(self, other) -> "Polynomial":
        try:
            return self.scale(other)
        except TypeError:
            return NotImplemented

    def __truediv__(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if not other.is_constant() or other.is_zero():
                return NotImplemented
            other = other.constant_term()
        c = to_rational(other)
        if not c:
            raise ZeroDivisionError("polynomial division by zero")
        return self.scale(1 / c)

    def mul(self, other: "Polynomial", max_degree: int | None = None) -> "Polynomial":
        """Exact product, optionally dropping every term above ``max_degree``."""
        other = self._coerce(other)
        if not self or not other:
            return Polynomial.zero(self.nvars)
        if _engine.worth_it(self, other, max_degree):
            return Polynomial._from_flint(self._flint() * other._flint(), self.nvars)
        a, b = self._terms, other._terms
        if len(a) < len(b):
            a, b = b, a
        nv = self.nvars
        # Kronecker packing: exponents become bit fields of one int, with the
        # total degree in the top field, so monomial product is int addition
        da = max(map(sum, a))
        db = max(map(sum, b))
        width = (da + db + 1).bit_length()
        pa, dena = _pack(a, nv, width)
        pb, denb = _pack(b, nv, width)
        out: dict = {}
        get = out.get
        if max_degree is None:
            for k1, c1 in pa:
                for k2, c2 in pb:
                    k = k1 + k2
                    s = get(k)
                    out[k] = c1 * c2 if s is None else s + c1 * c2
                if len(out) > _term_cap:
                    _check_cap(len(out))
        else:
            shift = width * nv
            pb.sort()
            for k1, c1 in pa:
                room = max_degree - (k1 >> shift)
                if room < 0:
                    continue
                limit = (room + 1) << shift
                for k2, c2 in pb:
                    if k2 >= limit:
                        break
                    k = k1 + k2
                    s = get(k)
                    out[k] = c1 * c2 if s is None else s + c1 * c2
                if len(out) > _term_cap:
                    _check_cap(len(out))
        den = dena * denb
        mask = (1 << width) - 1
        shifts = [width * i for i in range(nv)]
        res = {}
        for k, c in out.items():
            if c:
                res[tuple((k >> sh) & mask for sh in shifts)] = mpq(c, den)
        return Polynomial._raw(res, nv)

    @staticmethod
    def dot(left: Sequence["Polynomial"], right: Sequence["Polynomial"]) -> "Polynomial":
        """``sum(l * r)`` accumulated in one packed table (used by matrix products)."""
        if not left:
            raise ValueError("empty dot product")
        nv = left[0].nvars
        live = [(p, q) for p, q in zip(left, right) if p and q]
        if _engine.enabled and sum(len(p) * len(q) for p, q in live) >= _engine.threshold:
            acc = None
            for p, q in live:
                prod = p._flint() * q._flint()
                acc = prod if acc is None else acc + prod
            return Polynomial._from_flint(acc, nv) if acc is not None else Polynomial.zero(nv)
        pairs = [(p._terms, q._terms) for p, q in live]
        if not pairs:
            return Polynomial.zero(nv)
        width = (max(max(map(sum, a)) + max(map(sum, b)) for a, b in pairs) + 1).bit_length()
        packed = []
        den = 1
        for a, b in pairs:
            pa, dena = _pack(a, nv, width)
            pb, denb = _pack(b, nv, width)
            packed.append((pa, pb, dena * denb))
            den = lcm(den, dena * denb)
        out: dict = {}
        get = out.get
        for pa, pb, d in packed:
            f = den // d
            if len(pa) < len(pb):
                pa, pb = pb, pa
            for k1, c1 in pa:
                c1 *= f
                for k2, c2 in pb:
                    k = k1 + k2
                    s = get(k)
                    out[k] = c1 * c2 if s is None else s + c1 * c2
                if len(out) > _term_cap:
                    _check_cap(len(out))
        mask = (1 << width) - 1
        shifts = [width * i for i in range(nv)]
        res = {}
        for k, c in out.items():
            if c:
                res[tuple((k >> sh) & mask for sh in shifts)] = mpq(c, den)
        return Polynomial._raw(res, nv)

    def __pow__(self, k: int) -> "Polynomial":
        return self.pow(k)

    def pow(self, k: int, max_degree: int | None = None) -> "Polynomial":
        if not isinstance(k, int) or k < 0:
            raise ValueError("exponent must be a nonnegative integer")
        result = Polynomial.constant(1, self.nvars)
        base = self
        while k:
            if k & 1:
                result = result.mul(base, max_degree)
            k >>= 1
            if k:
                base = base.mul(base, max_degree)
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            if self.nvars != other.nvars or len(self) != len(other):
                return False
            if self._fl is not None and other._fl is not None:
                return self._fl == other._fl
            return self._terms == other._terms
        try:
            return self == Polynomial.constant(other, self.nvars)
        except TypeError:
            return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self._terms.items())))
        return self._hash

    # -- calculus and substitution -------------------------------------
    def partial(self, i: int) -> "Polynomial":
        if not 0 <= i < self.nvars:
            raise IndexError(f"variable index {i} out of range for {self.nvars} variables")
        out = {}
        for e, c in self._terms.items():
            k = e[i]
            if k:
                out[e[:i] + (k - 1,) + e[i + 1:]] = c * k
        return Polynomial._raw(out, self.nvars)

    def compose(self, subst: Sequence["Polynomial"], max_degree: int | None = None) -> "Polynomial":
        """Substitute ``subst[i]`` for ``x_{i+1}``; result lives in the substitutes' ring."""
        subst = list(subst.components) if isinstance(subst, PolyMap) else list(subst)
        if len(subst) != self.nvars:
            raise ValueError(f"arity mismatch: {len(subst)} substitutes for {self.nvars} variables")
        if not subst:
            raise ValueError("empty substitution")
        m = subst[0].nvars
        if any(s.nvars != m for s in subst):
            raise ValueError("substitutes must share the same number of variables")
        if not self:
            return Polynomial.zero(m)
        if _engine.compose_worth_it(self, subst, max_degree):
            ctx = _engine.context(m)
            fp = self._flint().compose(*(t._flint() for t in subst), ctx=ctx)
            return Polynomial._from_flint(fp, m)
        powers: list[list[Polynomial]] = [[Polynomial.constant(1, m)] for _ in subst]

        def power(i: int, k: int) -> Polynomial:
            cache = powers[i]
            while len(cache) <= k:
                cache.append(cache[-1].mul(subst[i], max_degree))
            return cache[k]

        # multivariate Horner: p = sum_k x_i^k q_k(x_{i+1}, ...), recursively
        def rec(terms: list, i: int) -> Polynomial:
            if i == self.nvars:
                return Polynomial.constant(terms[0][1], m)
            groups: dict[int, list] = {}
            for e, c in terms:
                groups.setdefault(e[i], []).append((e, c))
            acc: Polynomial | None = None
            for k in sorted(groups):
                part = rec(groups[k], i + 1)
                if k:
                    part = part.mul(power(i, k), max_degree)
                acc = part if acc is None else acc + part
                _check_cap(len(acc))
            return acc

        if not self._terms:
            return Polynomial.zero(m)
        return rec(list(self._terms.items()), 0)

    def __call__(self, *args):
        if len(args) == 1 and isinstance(args[0], (list, tuple, PolyMap)):
            args = args[0]
        args = list(args)
        if args and all(isinstance(a, Polynomial) for a in args):
            return self.compose(args)
        return self.eval_exact(args)

    def eval_exact(self, point: Sequence) -> mpq:
        if len(point) != self.nvars:
            raise ValueError(f"point has length {len(point)}, expected {self.nvars}")
        pt = [to_rational(v) for v in point]
        total = mpq(0)
        for e, c in self._terms.items():
            t = c
            for v, k in zip(pt, e):
                if k:
                    t *= v**k
            total += t
        return total

    def eval_float(self, point: Sequence[float]) -> float:
        if len(point) != self.nvars:
            raise ValueError(f"point has length {len(point)}, expected {self.nvars}")
        pt = [float(v) for v in point]
        total = 0.0
        for e, c in self._terms.items():
            t = float(c)
            for v, k in zip(pt, e):
                if k:
                    t *= v**k
            total += t
        return total

    def embed(self, nvars: int, offset: int = 0) -> "Polynomial":
        """Reinterpret in a larger ring, placing ``x_{i+1}`` at index ``i + offset``."""
        if offset < 0 or offset + self.nvars > nvars:
            raise ValueError("embedding does not fit")
        pad_l, pad_r = (0,) * offset, (0,) * (nvars - offset - self.nvars)
        return Polynomial._raw({pad_l + e + pad_r: c for e, c in self._terms.items()}, nvars)

    def restrict(self, i: int, value) -> "Polynomial":
        """Substitute the constant ``value`` for variable ``i`` (ring size unchanged)."""
        v = to_rational(value)
        out: dict = {}
        for e, c in self._terms.items():
            k = e[i]
            cc = c * v**k if k else c
            if not cc:
                continue
            ne = e[:i] + (0,) + e[i + 1:]
            out[ne] = out.get(ne, 0) + cc
        return Polynomial._raw({e: c for e, c in out.items() if c}, self.nvars)

    # -- text / JSON ----------------------------------------------------
    def sorted_terms(self) -> list[tuple[tuple[int, ...], mpq]]:
        """Terms in descending graded-lexicographic order."""
        return sorted(self._terms.items(), key=lambda t: _grlex_key(t[0]), reverse=True)

    def to_text(self, names: Sequence[str] | None = None) -> str:
        if not self._terms:
            return "0"
        names = list(names) if names else [f"x{i + 1}" for i in range(self.nvars)]
        parts = []
        for idx, (e, c) in enumerate(self.sorted_terms()):
            mono = "*".join(
                names[i] if k == 1 else f"{names[i]}^{k}" for i, k in enumerate(e) if k
            )
            mag = abs(c)
            if not mono:
                body = str(mag)
            elif mag == 1:
                body = mono
            else:
                body = f"{mag}*{mono}"
            if idx == 0:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append((" - " if c < 0 else " + ") + body)
        return "".join(parts)

    __str__ = to_text

    def __repr__(self) -> str:
        return f"Polynomial({self.to_text()!r}, nvars={self.nvars})"

    @classmethod
    def parse(cls, text: str, nvars: int, names: Sequence[str] | None = None) -> "Polynomial":
        return _Parser(text, nvars, names).parse()

    def to_json(self) -> list[dict]:
        return [{"coef": str(c), "exp": list(e)} for e, c in self.sorted_terms()]

    @classmethod
    def from_json(cls, data: Sequence[Mapping], nvars: int | None = None) -> "Polynomial":
        data = list(data)
        if nvars is None:
            if not data:
                raise ValueError("cannot infer nvars from an empty term list")
            nvars = len(data[0]["exp"])
        terms: dict = {}
        for item in data:
            exp = tuple(int(k) for k in item["exp"])
            coef = item["coef"]
            if isinstance(coef, float):
                raise TypeError("JSON coefficients must be strings or integers, not floats")
            if exp in terms:
                raise ValueError(f"duplicate exponent {list(exp)} in term list")
            terms[exp] = coef
        return cls(terms, nvars)


_TOKEN = re.compile(r"\s*(?:(\d+(?:/\d+)?)|([A-Za-z_]\w*)|(\*\*|[-+*/^()]))")


class _Parser:
    """Recursive-descent parser for the canonical text form and simple extensions."""

    def __init__(self, text: str, nvars: int, names: Sequence[str] | None):
        self.nvars = nvars
        names = list(names) if names else [f"x{i + 1}" for i in range(nvars)]
        self.index = {n: i for i, n in enumerate(names)}
        self.tokens = self._tokenize(text)
        self.pos = 0

    @staticmethod
    def _tokenize(text: str) -> list[tuple[str, str]]:
        out, pos = [], 0
        text = text.rstrip()
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                raise ValueError(f"unexpected character at {pos} in {text!r}")
            num, name, op = m.groups()
            if num is not None:
                out.append(("num", num))
            elif name is not None:
                out.append(("name", name))
            else:
                out.append(("op", "^" if op == "**" else op))
            pos = m.end()
        return out

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse(self) -> Polynomial:
        if not self.tokens:
            raise ValueError("empty polynomial text")
        p = self.expr()
        if self.pos != len(self.tokens):
            raise ValueError(f"trailing input near token {self.peek()[1]!r}")
        return p

    def expr(self) -> Polynomial:
        sign = 1
        if self.peek() == ("op", "-"):
            self.take()
            sign = -1
        elif self.peek() == ("op", "+"):
            self.take()
        p = self.term() * sign
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            t = self.term()
            p = p + t if op == "+" else p - t
        return p

    def term(self) -> Polynomial:
        p = self.factor()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            f = self.factor()
            p = p * f if op == "*" else p / f
        return p

    def factor(self) -> Polynomial:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, val = self.take()
            if kind != "num" or "/" in val:
                raise ValueError("exponent must be a nonnegative integer")
            base = base ** int(val)
        return base

    def atom(self) -> Polynomial:
        kind, val = self.take()
        if kind == "num":
            return Polynomial.constant(mpq(val), self.nvars)
        if kind == "name":
            if val not in self.index:
                raise ValueError(f"unknown variable {val!r}")
            return Polynomial.var(self.index[val], self.nvars)
        if (kind, val) == ("op", "("):
            p = self.expr()
            if self.take() != ("op", ")"):
                raise ValueError("unbalanced parenthesis")
            return p
        if (kind, val) == ("op", "-"):
            return -self.factor()
        raise ValueError(f"unexpected token {val!r}")


class PolyMap:
    """Square polynomial map ``R^n -> R^n``: ``n`` components in ``n`` variables."""

    __slots__ = ("components", "nvars")

    def __init__(self, components: Iterable[Polynomial]):
        comps = tuple(components)
        if not comps:
            raise ValueError("a map needs at least one component")
        n = comps[0].nvars
        if any(not isinstance(c, Polynomial) or c.nvars != n for c in comps):
            raise ValueError("all components must be polynomials in the same number of variables")
        if len(comps) != n:
            raise ValueError(f"map is not square: {len(comps)} components in {n} variables")
        self.components = comps
        self.nvars = n

    @property
    def arity(self) -> int:
        return self.nvars

    @classmethod
    def identity(cls, n: int) -> "PolyMap":
        return cls(Polynomial.var(i, n) for i in range(n))

    @classmethod
    def scaled_identity(cls, lam, n: int) -> "PolyMap":
        lam = to_rational(lam)
        return cls(Polynomial.var(i, n).scale(lam) for i in range(n))

    def __len__(self) -> int:
        return self.nvars

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, i: int) -> Polynomial:
        return self.components[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyMap) and self.components == other.components

    def __hash__(self) -> int:
        return hash(self.components)

    def __add__(self, other: "PolyMap") -> "PolyMap":
        return PolyMap(a + b for a, b in zip(self, other, strict=True))

    def __sub__(self, other: "PolyMap") -> "PolyMap":
        return PolyMap(a - b for a, b in zip(self, other, strict=True))

    def __neg__(self) -> "PolyMap":
        return PolyMap(-a for a in self)

    def scale(self, c) -> "PolyMap":
        return PolyMap(a.scale(c) for a in self)

    def compose(self, inner: "PolyMap", max_degree: int | None = None) -> "PolyMap":
        """``self ∘ inner``."""
        if inner.nvars != self.nvars:
            raise ValueError(f"arity mismatch: {self.nvars} vs {inner.nvars}")
        return PolyMap(c.compose(inner.components, max_degree) for c in self)

    def is_identity(self) -> bool:
        return self == PolyMap.identity(self.nvars)

    def degree(self) -> int:
        return max(c.degree() for c in self)

    def eval_exact(self, point: Sequence) -> list[mpq]:
        return [c.eval_exact(point) for c in self]

    def eval_float(self, point: Sequence[float]) -> list[float]:
        return [c.eval_float(point) for c in self]

    def truncate(self, max_degree: int) -> "PolyMap":
        return PolyMap(c.truncate(max_degree) for c in self)

    def to_json(self) -> list[list[dict]]:
        return [c.to_json() for c in self]

    @classmethod
    def from_json(cls, data: Sequence, nvars: int | None = None) -> "PolyMap":
        data = list(data)
        return cls(Polynomial.from_json(c, nvars if nvars is not None else len(data)) for c in data)

    def to_text(self) -> list[str]:
        return [c.to_text() for c in self]

    def __repr__(self) -> str:
        return "PolyMap([" + ", ".join(repr(c.to_text()) for c in self) + "])"


# functional aliases used throughout the package and its tests
def add(p: Polynomial, q: Polynomial) -> Polynomial:
    return p + q


def mul(p: Polynomial, q: Polynomial) -> Polynomial:
    return p.mul(q)


def partial(p: Polynomial, i: int) -> Polynomial:
    return p.partial(i)


def compose(p: Polynomial, subst) -> Polynomial:
    return p.compose(subst)


def eval_exact(p: Polynomial, point: Sequence) -> mpq:
    return p.eval_exact(point)


def eval_float(p: Polynomial, point: Sequence[float]) -> float:
    return p.eval_float(point)


def degree(p: Polynomial) -> int:
    return p.degree()
