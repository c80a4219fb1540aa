"""Core data model: terms, atoms, rules, programs, streams, substitutions.

Representation choices (everything downstream relies on these):

* A ground term is a ``float`` (numeric constant, always stored as a 64-bit
  real so ``3`` and ``3.0`` are the same value) or a ``str`` (symbolic
  constant).  Variables are ``Var`` instances and appear only in patterns,
  never in stream data.
* An atom is a plain tuple ``(predicate, arg0, arg1, ...)``.  Tuples hash
  and compare at C speed, which matters: the evaluators key large sets and
  dicts by atoms in their inner loops.
* A substitution is a plain dict mapping variable *names* to ground terms.
  Substitutions are never mutated after they are handed out; ``match``
  copies on write.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union

VARIABLE_RE = re.compile(r"[A-Z][A-Za-z0-9_]*\Z")
SYMBOL_RE = re.compile(r"[a-z][A-Za-z0-9_]*\Z")


class Var:
    """A logic variable; identified by name (uppercase-initial)."""

    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name

    def __repr__(self) -> str:
        return self.name

    def __eq__(self, other: object) -> bool:
        return type(other) is Var and other.name == self.name

    def __hash__(self) -> int:
        return hash(("Var", self.name))


GroundTerm = Union[float, str]
Term = Union[Var, float, str]
Atom = tuple  # (pred: str, *args: Term)
Substitution = dict


def make_atom(pred: str, *args: Term) -> Atom:
    """Build an atom, normalizing ints to floats."""
    return (pred,) + tuple(
        float(a) if type(a) is int else a for a in args
    )


def atom_pred(atom: Atom) -> str:
    return atom[0]


def atom_args(atom: Atom) -> tuple:
    return atom[1:]


def is_ground(atom: Atom) -> bool:
    for a in atom:
        if type(a) is Var:
            return False
    return True


def atom_vars(atom: Atom) -> Iterator[str]:
    for a in atom:
        if type(a) is Var:
            yield a.name


def term_sort_key(t: GroundTerm):
    # Numbers sort before symbols; within a kind, natural order.
    if type(t) is str:
        return (1, t)
    return (0, t)


def atom_sort_key(atom: Atom):
    return (atom[0],) + tuple(term_sort_key(a) for a in atom[1:])


_MISS = object()


def substitute(atom: Atom, s: Mapping[str, GroundTerm]) -> Atom:
    """Replace every variable of `atom` bound in `s`; unbound ones remain."""
    if not s:
        return atom
    out = None
    for i in range(1, len(atom)):
        a = atom[i]
        if type(a) is Var:
            v = s.get(a.name, _MISS)
            if v is not _MISS:
                if out is None:
                    out = list(atom)
                out[i] = v
    return atom if out is None else tuple(out)


def match(pattern: Atom, fact: Atom, s: Substitution) -> Optional[Substitution]:
    """One-sided unification of `pattern` against a ground `fact`.

    Returns an extension of `s` (possibly `s` itself when nothing new is
    bound), or None when predicates/arities differ or a binding conflicts.
    The result is consistent with `s` and satisfies
    ``substitute(pattern, result) == fact``.
    """
    n = len(pattern)
    if n != len(fact) or pattern[0] != fact[0]:
        return None
    out = s
    copied = False
    for i in range(1, n):
        p = pattern[i]
        f = fact[i]
        if type(p) is Var:
            b = out.get(p.name, _MISS)
            if b is _MISS:
                if not copied:
                    out = dict(out)
                    copied = True
                out[p.name] = f
            elif b != f:
                return None
        elif p != f:
            return None
    return out


def _pattern_shape(pattern: Atom, s0: Substitution):
    """Split pattern positions by role for indexed joins: constants,
    bound variables, first occurrences of free variables, and equality
    checks for repeated free variables."""
    bound_idx = []
    const_idx = []
    unbound = []  # (position, var name), first occurrence
    checks = []  # (position, earlier position of same free var)
    seen: dict = {}
    for i in range(1, len(pattern)):
        p = pattern[i]
        if type(p) is Var:
            if p.name in s0:
                bound_idx.append(i)
            elif p.name in seen:
                checks.append((i, seen[p.name]))
            else:
                seen[p.name] = i
                unbound.append((i, p.name))
        else:
            const_idx.append(i)
    return bound_idx, const_idx, unbound, checks


def _admit(atom: Atom, pattern: Atom, npat: int, const_idx, checks) -> bool:
    if len(atom) != npat or atom[0] != pattern[0]:
        return False
    for i in const_idx:
        if pattern[i] != atom[i]:
            return False
    for i, j in checks:
        if atom[i] != atom[j]:
            return False
    return True


def bound_sig(pattern: Atom, s0: Substitution) -> tuple:
    """Names of the pattern's variables already bound in s0, in position
    order; identifies which join index layout applies."""
    return tuple(
        p.name
        for p in pattern[1:]
        if type(p) is Var and p.name in s0
    )


def join_prepare(candidates: Iterable[Atom], pattern: Atom, s0: Substitution):
    """Index `candidates` for repeated probes against `pattern` by batches
    of substitutions that share s0's bound-variable set."""
    shape = _pattern_shape(pattern, s0)
    bound_idx, const_idx, unbound, checks = shape
    npat = len(pattern)
    if bound_idx:
        index: dict = {}
        for atom in candidates:
            if _admit(atom, pattern, npat, const_idx, checks):
                index.setdefault(tuple(atom[i] for i in bound_idx), []).append(atom)
        return shape, index
    admitted = [
        atom for atom in candidates if _admit(atom, pattern, npat, const_idx, checks)
    ]
    return shape, admitted


def join_probe(prepared, pattern: Atom, subs: list, with_atoms: bool = False) -> list:
    """Extend every substitution in `subs` using a prepared join index.
    With `with_atoms`, results are (substitution, witness atom) pairs."""
    (bound_idx, _const_idx, unbound, _checks), index = prepared
    out: list = []
    if not subs:
        return out
    if bound_idx:
        if not index:
            return out
        if not unbound and not with_atoms:
            # Fully determined: each substitution has at most one witness.
            for s in subs:
                if tuple(s[pattern[i].name] for i in bound_idx) in index:
                    out.append(s)
            return out
        for s in subs:
            bucket = index.get(tuple(s[pattern[i].name] for i in bound_idx))
            if not bucket:
                continue
            if not unbound:
                out.append((s, bucket[0]) if with_atoms else s)
                continue
            for atom in bucket:
                s2 = dict(s)
                for i, name in unbound:
                    s2[name] = atom[i]
                out.append((s2, atom) if with_atoms else s2)
        return out
    admitted = index
    if not admitted:
        return out
    if not unbound:
        if with_atoms:
            return [(s, admitted[0]) for s in subs]
        return list(subs)
    for s in subs:
        for atom in admitted:
            s2 = dict(s)
            for i, name in unbound:
                s2[name] = atom[i]
            out.append((s2, atom) if with_atoms else s2)
    return out


def join_atoms(candidates: Iterable[Atom], pattern: Atom, subs: list) -> list:
    """Extend every substitution in `subs` by matching `pattern` against
    `candidates`, using a hash index on the pattern positions that are
    already bound.  All substitutions in `subs` bind the same variable set
    (they come from the same body prefix), so the bound positions are
    uniform across the batch.
    """
    if not subs:
        return []
    return join_probe(join_prepare(candidates, pattern, subs[0]), pattern, subs)


def join_prepare_timed(candidates_by_time, pattern: Atom, s0: Substitution):
    """Index (time, atoms) groups for probes where each substitution names
    one specific time."""
    shape = _pattern_shape(pattern, s0)
    bound_idx, const_idx, unbound, checks = shape
    npat = len(pattern)
    index: dict = {}
    for t, atoms in candidates_by_time:
        for atom in atoms:
            if _admit(atom, pattern, npat, const_idx, checks):
                index.setdefault((t,) + tuple(atom[i] for i in bound_idx), []).append(atom)
    return shape, index


def join_probe_timed(prepared, pattern: Atom, subs: list, time_of) -> list:
    (bound_idx, _const_idx, unbound, _checks), index = prepared
    out: list = []
    if not subs or not index:
        return out
    if not unbound:
        for s in subs:
            t = time_of(s)
            if t is None:
                continue
            if ((t,) + tuple(s[pattern[i].name] for i in bound_idx)) in index:
                out.append(s)
        return out
    for s in subs:
        t = time_of(s)
        if t is None:
            continue
        key = (t,) + tuple(s[pattern[i].name] for i in bound_idx)
        for atom in index.get(key, ()):
            s2 = dict(s)
            for i, name in unbound:
                s2[name] = atom[i]
            out.append(s2)
    return out


def join_atoms_at_times(candidates_by_time, pattern: Atom, subs: list, time_of) -> list:
    """Like join_atoms, but candidates come as (time, atoms) groups and each
    substitution names one specific time via `time_of(s)` (returns an int
    time point or None to drop the substitution)."""
    if not subs:
        return []
    return join_probe_timed(
        join_prepare_timed(candidates_by_time, pattern, subs[0]), pattern, subs, time_of
    )


@dataclass(frozen=True)
class WindowSpec:
    """A sliding window: `past` time points (or tuples) back from now.

    `future` and `step` exist for surface-syntax completeness; evaluation
    only supports future=0, step=1 (checked at evaluation time).
    """

    kind: str  # "time" | "tuple"
    past: int
    future: int = 0
    step: int = 1

    def __post_init__(self):
        if self.kind not in ("time", "tuple"):
            raise ValueError(f"unknown window kind {self.kind!r}")
        if self.past < 0 or self.future < 0:
            raise ValueError("window lengths must be nonnegative")
        if self.step < 1:
            raise ValueError("window step must be positive")
        if self.kind == "tuple" and self.future != 0:
            raise ValueError("tuple windows cannot reach into the future")


@dataclass(frozen=True)
class Plain:
    atom: Atom


@dataclass(frozen=True)
class At:
    time: Term
    atom: Atom


@dataclass(frozen=True)
class Windowed:
    spec: WindowSpec
    op: str  # "diamond" | "box" | "at"
    time: Optional[Term]  # set only for op == "at"
    atom: Atom


@dataclass(frozen=True)
class Comp:
    op: str  # == != > < >= <= s!=
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class Math:
    op: str  # + - * /
    result: Term
    a: Term
    b: Term


BodyItem = Union[Plain, At, Windowed, Comp, Math]
Head = Union[Plain, At]


@dataclass(frozen=True)
class Rule:
    head: Head
    body: tuple  # of BodyItem

    def is_fact(self) -> bool:
        return not self.body

    def head_pred(self) -> str:
        return self.head.atom[0]


def body_item_vars(item: BodyItem) -> set:
    """Variables an item can *bind* (atoms and window time terms)."""
    out = set()
    if isinstance(item, (Plain, At, Windowed)):
        out.update(atom_vars(item.atom))
        t = getattr(item, "time", None)
        if type(t) is Var:
            out.add(t.name)
    elif isinstance(item, Math):
        if type(item.result) is Var:
            out.add(item.result.name)
    return out


def builtin_needs(item: BodyItem) -> set:
    """Variables a builtin requires bound before it can run."""
    out = set()
    if isinstance(item, Comp):
        for t in (item.lhs, item.rhs):
            if type(t) is Var:
                out.add(t.name)
    elif isinstance(item, Math):
        for t in (item.a, item.b):
            if type(t) is Var:
                out.add(t.name)
    return out


class Program:
    """A parsed rule program plus its predicate arity table."""

    def __init__(self, rules: Iterable[Rule], predicates: Optional[dict] = None):
        self.rules = list(rules)
        if predicates is None:
            predicates = {}
            for r in self.rules:
                for atom in _program_atoms(r):
                    predicates.setdefault(atom[0], len(atom) - 1)
        self.predicates = dict(predicates)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Program)
            and self.rules == other.rules
            and self.predicates == other.predicates
        )

    def __repr__(self) -> str:
        return f"Program({len(self.rules)} rules)"

    def max_window(self) -> int:
        """Largest window length appearing in any rule (0 if none)."""
        best = 0
        for r in self.rules:
            for item in r.body:
                if isinstance(item, Windowed) and item.spec.past > best:
                    best = item.spec.past
        return best

    def head_predicates(self) -> set:
        return {r.head_pred() for r in self.rules}


def _program_atoms(rule: Rule):
    yield rule.head.atom
    for item in rule.body:
        if isinstance(item, (Plain, At, Windowed)):
            yield item.atom


_EMPTY: frozenset = frozenset()


class Stream:
    """A timeline [tmin, tmax] with a set of ground atoms per time point.

    Immutable after construction; an empty timeline is represented as
    tmax == tmin - 1.  Construction rejects non-ground atoms and ticks
    outside the timeline.
    """

    __slots__ = ("tmin", "tmax", "_v", "_by_pred")

    def __init__(self, tmin: int, tmax: int, ticks: Mapping[int, Iterable[Atom]]):
        if tmax < tmin - 1:
            raise ValueError(f"bad timeline [{tmin}, {tmax}]")
        v = {}
        for t, atoms in ticks.items():
            if not (tmin <= t <= tmax):
                raise ValueError(f"tick {t} outside timeline [{tmin}, {tmax}]")
            fs = frozenset(atoms)
            for a in fs:
                if not is_ground(a):
                    raise ValueError(f"non-ground atom in stream at t={t}: {a}")
            if fs:
                v[t] = fs
        self.tmin = tmin
        self.tmax = tmax
        self._v = v
        self._by_pred: dict = {}

    @classmethod
    def empty(cls) -> "Stream":
        return cls(0, -1, {})

    @classmethod
    def from_ticks(cls, pairs: Iterable[tuple]) -> "Stream":
        ticks = {t: atoms for t, atoms in pairs}
        if not ticks:
            return cls.empty()
        return cls(min(ticks), max(ticks), ticks)

    def at(self, t: int) -> frozenset:
        return self._v.get(t, _EMPTY)

    def pred_groups_at(self, t: int) -> dict:
        groups = self._by_pred.get(t)
        if groups is None:
            groups = {}
            for a in self._v.get(t, _EMPTY):
                groups.setdefault(a[0], []).append(a)
            groups = {p: frozenset(v) for p, v in groups.items()}
            self._by_pred[t] = groups
        return groups

    def pred_atoms_at(self, t: int, pred: str) -> frozenset:
        return self.pred_groups_at(t).get(pred, _EMPTY)

    def times(self) -> range:
        return range(self.tmin, self.tmax + 1)

    def num_ticks(self) -> int:
        return self.tmax - self.tmin + 1

    def fact_count(self) -> int:
        return sum(len(v) for v in self._v.values())

    def restricted(self, preds: set) -> "Stream":
        """A copy containing only atoms of the given predicates."""
        return Stream(
            self.tmin,
            self.tmax,
            {
                t: [a for a in atoms if a[0] in preds]
                for t, atoms in self._v.items()
            },
        )

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Stream)
            and self.tmin == other.tmin
            and self.tmax == other.tmax
            and self._v == other._v
        )

    def __repr__(self) -> str:
        return f"Stream([{self.tmin}, {self.tmax}], {self.fact_count()} facts)"
