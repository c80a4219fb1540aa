"""Reference evaluation: per-tick least-model computation, done naively.

At every tick the whole rule set is re-fired over the visible stream
(input facts plus everything derived so far) until nothing new is
derivable.  Derivations at past time points (from @-headed rules) land in
the derivation history and are re-fixpointed within the tick.  This
evaluator is deliberately simple; it serves as the ground truth the
incremental engine is checked against.

Programs are positive (no negation), so the per-tick fixpoint is the
unique least model of the rules over the visible stream.
"""

from __future__ import annotations

import logging
import operator
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from .model import (
    At,
    Atom,
    Comp,
    Math,
    Plain,
    Program,
    Rule,
    Stream,
    Substitution,
    Var,
    Windowed,
    body_item_vars,
    builtin_needs,
    join_atoms,
    substitute,
)
from .windows import WindowView, eval_temporal_batch, window_view

logger = logging.getLogger(__name__)


class UnboundArgumentError(Exception):
    """A builtin was evaluated before its arguments were bound; with body
    reordering this only happens when no body atom binds the variable."""


class BuiltinTypeError(Exception):
    """A builtin got arguments of the wrong kind (symbol where a number is
    needed, or vice versa)."""


@dataclass
class EvalStats:
    """Instrumentation shared by both engines."""

    rules_fired: int = 0
    rules_skipped: int = 0
    ticks: int = 0


@dataclass(frozen=True)
class TickResult:
    """Outcome of one tick.

    `derived` maps each predicate to the atoms derived at `time` by rules
    (@-headed derivations landing at `time` included).  `at_derivations`
    holds the (t, atom) pairs newly recorded this tick by @-headed rules at
    strictly past times t < `time`; such times always lie inside the
    deriving rule's window.  Pairs already recorded at an earlier tick do
    not reappear."""

    time: int
    derived: dict
    at_derivations: frozenset

    def all_derived(self) -> frozenset:
        out = set()
        for atoms in self.derived.values():
            out |= atoms
        return frozenset(out)


def _resolve(term, s: Substitution):
    if type(term) is Var:
        value = s.get(term.name)
        if value is None:
            raise UnboundArgumentError(
                f"variable {term.name} unbound when builtin was evaluated"
            )
        return value
    return term


def eval_builtin(builtin, s: Substitution) -> list:
    """Evaluate one COMP/MATH under a substitution; returns the surviving
    (possibly extended) substitutions."""
    if isinstance(builtin, Comp):
        lhs = _resolve(builtin.lhs, s)
        rhs = _resolve(builtin.rhs, s)
        op = builtin.op
        if op == "s!=":
            if type(lhs) is not str or type(rhs) is not str:
                raise BuiltinTypeError("s!= compares symbolic constants")
            return [s] if lhs != rhs else []
        if op == "==":
            return [s] if lhs == rhs else []
        if op == "!=":
            return [s] if lhs != rhs else []
        if type(lhs) is str or type(rhs) is str:
            raise BuiltinTypeError(f"COMP({op}, ...) needs numeric arguments")
        if op == ">=":
            ok = lhs >= rhs
        elif op == "<=":
            ok = lhs <= rhs
        elif op == ">":
            ok = lhs > rhs
        else:
            ok = lhs < rhs
        return [s] if ok else []

    a = _resolve(builtin.a, s)
    b = _resolve(builtin.b, s)
    if type(a) is str or type(b) is str:
        raise BuiltinTypeError("MATH needs numeric arguments")
    op = builtin.op
    if op == "+":
        value = a + b
    elif op == "-":
        value = a - b
    elif op == "*":
        value = a * b
    else:
        if b == 0:
            logger.warning("division by zero in MATH(/, ...); no solutions")
            return []
        value = a / b
    result = builtin.result
    if type(result) is Var:
        bound = s.get(result.name)
        if bound is None:
            out = dict(s)
            out[result.name] = value
            return [out]
        result = bound
    if type(result) is str:
        raise BuiltinTypeError("MATH result must be numeric")
    return [s] if result == value else []


def _term_var(term) -> Optional[str]:
    return term.name if type(term) is Var else None


def _comp_placeable(item: Comp, bound: set) -> bool:
    lv, rv = _term_var(item.lhs), _term_var(item.rhs)
    if item.op == "==":
        # An equality with one side known binds the other side, so it is
        # placeable as soon as either side is available.
        return (lv is None or lv in bound) or (rv is None or rv in bound)
    return (lv is None or lv in bound) and (rv is None or rv in bound)


def _is_known(term, bound: set) -> bool:
    return type(term) is not Var or term.name in bound


def _math_placeable(item: Math, bound: set) -> bool:
    a_ok = _is_known(item.a, bound)
    b_ok = _is_known(item.b, bound)
    if a_ok and b_ok:
        return True
    # Inverse form: result known, one operand free -> solve for it.
    # Multiplication only inverts against a nonzero constant (a variable
    # could be zero at runtime); division only for a free divisor.
    if not _is_known(item.result, bound) or (a_ok == b_ok):
        return False
    if item.op in ("+", "-"):
        return True
    if item.op == "*":
        known = item.b if a_ok else item.a
        return type(known) is float and known != 0.0
    return item.op == "/" and a_ok  # free divisor: b = a / result


def _math_binds(item: Math, bound: set):
    """The variable this Math placement binds (None for a pure check)."""
    if _is_known(item.a, bound) and _is_known(item.b, bound):
        if not _is_known(item.result, bound):
            return item.result.name
        return None
    return (item.b if _is_known(item.a, bound) else item.a).name


def _schedule_items(body: tuple) -> tuple:
    """Body items in evaluation order, each paired with the variable set
    bound before it runs.  Atoms keep their relative order; every builtin
    runs as early as its inputs allow, even ahead of atoms that appear
    before it in the source (builtins are pure constraints, so hoisting
    them only prunes sooner; == with one side known binds the other, and
    MATH with a known result solves for a free operand, which turns later
    joins into indexed lookups).  Raises UnboundArgumentError when a
    builtin can never run."""
    plan = []
    bound: set = set()
    pending = [item for item in body if isinstance(item, (Comp, Math))]

    def flush():
        progress = True
        while progress:
            progress = False
            for item in list(pending):
                if isinstance(item, Comp):
                    ok = _comp_placeable(item, bound)
                else:
                    ok = _math_placeable(item, bound)
                if ok:
                    pending.remove(item)
                    plan.append((item, frozenset(bound)))
                    if isinstance(item, Math):
                        binds = _math_binds(item, bound)
                        if binds is not None:
                            bound.add(binds)
                    elif item.op == "==":
                        for t in (item.lhs, item.rhs):
                            if type(t) is Var:
                                bound.add(t.name)
                    progress = True

    for item in body:
        if isinstance(item, (Comp, Math)):
            continue
        flush()
        plan.append((item, frozenset(bound)))
        bound |= body_item_vars(item)
    flush()
    if pending:
        missing = sorted(builtin_needs(pending[0]) - bound)
        raise UnboundArgumentError(
            f"builtin argument(s) {', '.join(missing)} bound by no body atom"
        )
    return tuple(plan)


@lru_cache(maxsize=None)
def _scheduled(rule: Rule) -> tuple:
    return _schedule_items(rule.body)


def schedule_body(body: tuple) -> tuple:
    """(item, bound-before) pairs in evaluation order; see _schedule_items."""
    return _schedule_items(tuple(body))


def rule_plan(rule: Rule) -> tuple:
    """Body items in evaluation order (see _schedule_items)."""
    return tuple(item for item, _ in _scheduled(rule))


def _getter(term, bound: set):
    """Compile a term into (fetch, is_bound): fetch(s) -> value."""
    name = _term_var(term)
    if name is None:
        value = term
        return (lambda s: value), True
    if name in bound:
        return (lambda s: s[name]), True
    return name, False  # unbound: caller decides (bind target)


def _compile_comp(item: Comp, bound: set):
    op = item.op
    get_l, l_ok = _getter(item.lhs, bound)
    get_r, r_ok = _getter(item.rhs, bound)
    if op == "==" and not (l_ok and r_ok):
        if l_ok:
            target, get = get_r, get_l  # bind rhs from lhs
        else:
            target, get = get_l, get_r
        def bind(subs, _t=target, _g=get):
            out = []
            for s in subs:
                s2 = dict(s)
                s2[_t] = _g(s)
                out.append(s2)
            return out
        return bind
    if not (l_ok and r_ok):
        raise UnboundArgumentError(
            f"COMP({op}, ...) scheduled before its arguments are bound"
        )
    if op == "==":
        return lambda subs: [s for s in subs if get_l(s) == get_r(s)]
    if op == "!=":
        return lambda subs: [s for s in subs if get_l(s) != get_r(s)]
    if op == "s!=":
        def sneq(subs):
            out = []
            for s in subs:
                a, b = get_l(s), get_r(s)
                if type(a) is not str or type(b) is not str:
                    raise BuiltinTypeError("s!= compares symbolic constants")
                if a != b:
                    out.append(s)
            return out
        return sneq
    cmp = {"<": operator.lt, ">": operator.gt, "<=": operator.le, ">=": operator.ge}[op]
    def ordered(subs):
        out = []
        for s in subs:
            a, b = get_l(s), get_r(s)
            if type(a) is str or type(b) is str:
                raise BuiltinTypeError(f"COMP({op}, ...) needs numeric arguments")
            if cmp(a, b):
                out.append(s)
        return out
    return ordered


def _compile_math(item: Math, bound: set):
    op = item.op
    get_a, a_ok = _getter(item.a, bound)
    get_b, b_ok = _getter(item.b, bound)
    fn = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": operator.truediv}[op]
    get_res, res_ok = _getter(item.result, bound)
    is_div = op == "/"

    if a_ok and b_ok:
        if res_ok:
            def check(subs):
                out = []
                for s in subs:
                    a, b = get_a(s), get_b(s)
                    if type(a) is str or type(b) is str:
                        raise BuiltinTypeError("MATH needs numeric arguments")
                    if is_div and b == 0:
                        logger.warning("division by zero in MATH(/, ...); no solutions")
                        continue
                    r = get_res(s)
                    if type(r) is str:
                        raise BuiltinTypeError("MATH result must be numeric")
                    if r == fn(a, b):
                        out.append(s)
                return out
            return check
        target = get_res  # unbound var name
        def bind(subs):
            out = []
            for s in subs:
                a, b = get_a(s), get_b(s)
                if type(a) is str or type(b) is str:
                    raise BuiltinTypeError("MATH needs numeric arguments")
                if is_div and b == 0:
                    logger.warning("division by zero in MATH(/, ...); no solutions")
                    continue
                s2 = dict(s)
                s2[target] = fn(a, b)
                out.append(s2)
            return out
        return bind

    # Inverse form: result known, solve for the single free operand.
    if not res_ok or (a_ok == b_ok):
        raise UnboundArgumentError("MATH scheduled before its arguments are bound")
    get_known = get_b if not a_ok else get_a
    target = get_a if not a_ok else get_b  # unbound var name
    solve_a = not a_ok
    if op == "+":
        inv = lambda r, k: r - k  # r = x + k  or  r = k + x
    elif op == "-":
        inv = (lambda r, k: r + k) if solve_a else (lambda r, k: k - r)
    elif op == "*":
        inv = lambda r, k: r / k  # known side checked nonzero at planning
    else:  # "/": r = a / x  ->  x = a / r
        def inv(r, k):
            if r == 0:
                return None
            return k / r
    def bind_inverse(subs):
        out = []
        for s in subs:
            r = get_res(s)
            k = get_known(s)
            if type(r) is str or type(k) is str:
                raise BuiltinTypeError("MATH needs numeric arguments")
            v = inv(r, k)
            if v is None:
                logger.warning("division by zero solving MATH(/, ...); no solutions")
                continue
            s2 = dict(s)
            s2[target] = v
            out.append(s2)
        return out
    return bind_inverse


class BuiltinStep:
    """A builtin compiled into a batch transformer over substitutions."""

    __slots__ = ("item", "fn")

    def __init__(self, item, fn):
        self.item = item
        self.fn = fn


def compile_items(body: tuple) -> tuple:
    """Evaluation plan for a body-item sequence, builtins compiled to
    batch closures."""
    out = []
    for item, bound in _schedule_items(body):
        if isinstance(item, Comp):
            out.append(BuiltinStep(item, _compile_comp(item, bound)))
        elif isinstance(item, Math):
            out.append(BuiltinStep(item, _compile_math(item, bound)))
        else:
            out.append(item)
    return tuple(out)


@lru_cache(maxsize=None)
def compiled_plan(rule: Rule) -> tuple:
    """Evaluation plan with builtins compiled to batch closures."""
    return compile_items(rule.body)


class _History:
    """Mutable derivation history: time point -> set of derived atoms."""

    __slots__ = ("_v",)

    def __init__(self):
        self._v: dict = {}

    def at(self, t: int):
        return self._v.get(t, ())

    def insert(self, t: int, atom: Atom) -> bool:
        atoms = self._v.get(t)
        if atoms is None:
            self._v[t] = {atom}
            return True
        if atom in atoms:
            return False
        atoms.add(atom)
        return True


class _TickEval:
    """Evaluates rule bodies at one tick over stream + history, caching
    window materializations; caches are invalidated per predicate as new
    derivations arrive within the tick."""

    def __init__(self, program: Program, stream: Stream, history: _History, now: int):
        self.program = program
        self.stream = stream
        self.history = history
        self.now = now
        self._union: dict = {}  # t -> frozenset of visible atoms
        self._groups: dict = {}  # t -> {pred: frozenset}
        self._join_cache: dict = {}  # pred -> {signature: prepared index}

    # visible atoms at a time point (inputs + derivations)
    def at(self, t: int) -> frozenset:
        hist = self.history.at(t)
        if not hist:
            return self.stream.at(t)
        got = self._union.get(t)
        if got is None:
            got = self.stream.at(t) | hist
            self._union[t] = got
        return got

    def pred_atoms_at(self, t: int, pred: str) -> frozenset:
        hist = self.history.at(t)
        if not hist:
            return self.stream.pred_atoms_at(t, pred)
        groups = self._groups.get(t)
        if groups is None:
            groups = dict(self.stream.pred_groups_at(t))
            extra: dict = {}
            for a in hist:
                extra.setdefault(a[0], []).append(a)
            for p, atoms in extra.items():
                base = groups.get(p)
                groups[p] = frozenset(atoms) if base is None else base | frozenset(atoms)
            self._groups[t] = groups
        return groups.get(pred, frozenset())

    @property
    def tmin(self) -> int:
        return self.stream.tmin

    @property
    def tmax(self) -> int:
        return self.stream.tmax

    def invalidate(self, pred: str, t: int) -> None:
        self._union.pop(t, None)
        self._groups.pop(t, None)
        self._join_cache.pop(pred, None)

    def fire(self, rule: Rule) -> set:
        """All (time, ground atom) head derivations of `rule` at `now`."""
        subs = [{}]
        for item in compiled_plan(rule):
            if not subs:
                return set()
            if type(item) is BuiltinStep:
                subs = item.fn(subs)
            elif isinstance(item, Plain):
                subs = join_atoms(
                    self.pred_atoms_at(self.now, item.atom[0]), item.atom, subs
                )
            elif isinstance(item, At):
                view = WindowView(self.tmin, self.now, self)
                subs = eval_temporal_batch(
                    view, "at", item.atom, subs, item.time, cache=self._join_cache
                )
            else:  # Windowed
                view = window_view(self, self.now, item.spec, item.atom[0])
                subs = eval_temporal_batch(
                    view, item.op, item.atom, subs, item.time, cache=self._join_cache
                )
        head = rule.head
        out = set()
        if isinstance(head, Plain):
            for s in subs:
                out.add((self.now, substitute(head.atom, s)))
        else:
            for s in subs:
                t = head.time if type(head.time) is not Var else s[head.time.name]
                if type(t) is str or not float(t).is_integer():
                    logger.warning("@-head time %r is not a time point; dropped", t)
                    continue
                ti = int(t)
                if ti < self.tmin or ti > self.now:
                    logger.warning("@-head time %s outside [tmin, now]; dropped", ti)
                    continue
                out.add((ti, substitute(head.atom, s)))
        return out


def fire_rule(rule: Rule, stream: Stream, history, now: int) -> set:
    """One-shot body evaluation of a single rule (see _TickEval.fire)."""
    if not isinstance(history, _History):
        h = _History()
        if isinstance(history, Stream):
            items = ((t, history.at(t)) for t in history.times())
        else:
            items = dict(history).items()
        for t, atoms in items:
            for a in atoms:
                h.insert(t, a)
        history = h
    program = Program([rule])
    return _TickEval(program, stream, history, now).fire(rule)


def evaluate_tick_naive(
    program: Program,
    stream: Stream,
    history: _History,
    now: int,
    stats: Optional[EvalStats] = None,
) -> TickResult:
    """Fixpoint over all rules at `now`; mutates `history` with the new
    derivations (including @-headed ones at past times)."""
    ev = _TickEval(program, stream, history, now)
    derived: dict = {}
    new_at_pairs: set = set()

    # Rules whose bodies mention only input predicates cannot change across
    # fixpoint passes within one tick; fire them once.
    head_preds = program.head_predicates()
    single_pass = []
    for rule in program.rules:
        preds = set()
        for item in rule.body:
            if isinstance(item, (Plain, At, Windowed)):
                preds.add(item.atom[0])
        single_pass.append(not (preds & head_preds))

    changed = True
    first_pass = True
    while changed:
        changed = False
        for idx, rule in enumerate(program.rules):
            if single_pass[idx] and not first_pass:
                continue
            if stats is not None:
                stats.rules_fired += 1
            at_head = isinstance(rule.head, At)
            for t, atom in ev.fire(rule):
                if history.insert(t, atom):
                    ev.invalidate(atom[0], t)
                    changed = True
                    if t == now:
                        derived.setdefault(atom[0], set()).add(atom)
                    elif at_head:
                        new_at_pairs.add((t, atom))
        first_pass = False
    if stats is not None:
        stats.ticks += 1
    return TickResult(
        now,
        {p: frozenset(v) for p, v in derived.items()},
        frozenset(new_at_pairs),
    )


def new_history() -> _History:
    return _History()


def run_stream_naive(
    program: Program,
    stream: Stream,
    outputs,
    stats: Optional[EvalStats] = None,
    collect_results: Optional[list] = None,
) -> list:
    """Evaluate every tick of `stream` in order; returns, per tick, the
    atoms of the output predicates true at that tick."""
    outputs = set(outputs)
    unknown = outputs - set(program.predicates)
    if unknown:
        raise ValueError(f"output predicates not in program: {sorted(unknown)}")
    history = _History()
    answers = []
    for t in stream.times():
        result = evaluate_tick_naive(program, stream, history, t, stats)
        if collect_results is not None:
            collect_results.append(result)
        visible = set(stream.at(t)) | set(history.at(t))
        answers.append((t, frozenset(a for a in visible if a[0] in outputs)))
    return answers
