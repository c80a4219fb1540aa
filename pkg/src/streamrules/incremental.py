"""Incremental tick-by-tick evaluation, equivalent to the naive engine.

The state keeps, per windowed body formula, an annotation index of the
matching atoms together with the time points they occur at; a match made
at time t satisfies a window of length w for every evaluation time in
[t, t + w], so entries expire exactly when `now` passes that horizon.
Box formulas are served by run trackers (the start of each atom's current
unbroken run of ticks).  Rules re-fire only when one of their body
formulas' answer sets actually changed this tick; otherwise the rule's
previous head derivations are replayed for the new tick.

Rule processing is ordered by predicate dependency strata, so when a rule
is examined every producer of its body predicates has already settled.
Programs whose predicate dependencies are cyclic are evaluated from
scratch within each cycle every tick (replaying cached derivations inside
a cycle could manufacture unfounded support); all shipped query programs
are acyclic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
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
    Var,
    Windowed,
    bound_sig,
    is_ground,
    join_prepare,
    join_prepare_timed,
    join_probe,
    join_probe_timed,
    match,
    substitute,
)
from .naive import (
    BuiltinStep,
    EvalStats,
    TickResult,
    UnboundArgumentError,
    compile_items,
    compiled_plan,
    evaluate_tick_naive,
    new_history,
    schedule_body,
)

logger = logging.getLogger(__name__)


class OutOfOrderTickError(ValueError):
    """Ticks must arrive as consecutive successors."""


class UnsupportedProgramError(ValueError):
    """The incremental engine cannot evaluate this program shape."""


@dataclass(frozen=True)
class Annotation:
    """Introspection view of one stored match: the atom holds at time
    `derived_at` and keeps satisfying its window until `horizon`."""

    atom: Atom
    binding: dict
    kind: str  # "diamond" | "at"
    derived_at: int
    horizon: float  # int, or +inf for unwindowed @-formulas


class _WinStore:
    """Presence index for (predicate, window length): which atoms occur at
    which times of the current window.  Serves diamond and @ formulas.

    `gained`/`lost` are net alive-set transitions relative to the start of
    the current tick (an atom that expires and re-enters within one tick
    flags neither), so consumers can maintain exact derived views."""

    __slots__ = ("w", "by_atom", "by_time", "gained", "lost", "touched")

    def __init__(self, w: Optional[int]):
        self.w = w  # None = unbounded (unwindowed @)
        self.by_atom: dict = {}  # atom -> set of times
        self.by_time: dict = {}  # time -> set of atoms
        self.gained: set = set()
        self.lost: set = set()
        self.touched = False

    def clear_flags(self) -> None:
        self.gained = set()
        self.lost = set()
        self.touched = False

    def _flag_dead(self, atom: Atom) -> None:
        if atom in self.gained:
            self.gained.discard(atom)
        else:
            self.lost.add(atom)

    def _flag_alive(self, atom: Atom) -> None:
        if atom in self.lost:
            self.lost.discard(atom)
        else:
            self.gained.add(atom)

    def slide(self, now: int) -> None:
        if self.w is None:
            return
        t0 = now - self.w - 1
        atoms = self.by_time.pop(t0, None)
        if not atoms:
            return
        self.touched = True
        for a in atoms:
            times = self.by_atom[a]
            times.discard(t0)
            if not times:
                del self.by_atom[a]
                self._flag_dead(a)

    def add(self, atom: Atom, t: int, now: int) -> None:
        if self.w is not None and t < now - self.w:
            return
        times = self.by_atom.get(atom)
        if times is None:
            self.by_atom[atom] = {t}
            self._flag_alive(atom)
        elif t in times:
            return
        else:
            times.add(t)
        self.by_time.setdefault(t, set()).add(atom)
        self.touched = True

    def remove(self, atom: Atom, t: int) -> None:
        times = self.by_atom.get(atom)
        if times is None or t not in times:
            return
        times.discard(t)
        self.by_time[t].discard(atom)
        self.touched = True
        if not times:
            del self.by_atom[atom]
            self._flag_dead(atom)

    def size(self) -> int:
        return sum(len(v) for v in self.by_atom.values())


class _BoxStore:
    """Run tracker for one predicate: atoms present at `now`, mapped to the
    start of their current unbroken run of consecutive ticks."""

    __slots__ = ("prev", "cur")

    def __init__(self):
        self.prev: dict = {}
        self.cur: dict = {}

    def begin_tick(self) -> None:
        self.prev = self.cur
        self.cur = {}

    def on_present(self, atom: Atom, now: int) -> None:
        self.cur[atom] = self.prev.get(atom, now)

    def on_absent(self, atom: Atom) -> None:
        self.cur.pop(atom, None)

    def on_retro(self, atom: Atom, ring: "_PredRing", now: int) -> None:
        # A past time point gained this atom; if it is part of the current
        # run, the run may now extend further back.
        if atom not in self.cur:
            return
        s = now
        while ring.present(s - 1, atom):
            s -= 1
        self.cur[atom] = min(self.cur[atom], s)

    def size(self) -> int:
        return len(self.cur)


class _Slot:
    __slots__ = ("inputs", "derived", "sticky")

    def __init__(self):
        self.inputs: frozenset = frozenset()
        self.derived: dict = {}  # atom -> contribution count (replayable)
        self.sticky: set = set()  # @-headed derivations (never retracted)


class _PredRing:
    """Recent per-tick visibility for one predicate: input facts plus
    derived atoms (reference counted), bounded to the largest window."""

    __slots__ = ("slots",)

    def __init__(self):
        self.slots: dict = {}  # time -> _Slot

    def slot(self, t: int) -> _Slot:
        s = self.slots.get(t)
        if s is None:
            s = _Slot()
            self.slots[t] = s
        return s

    def present(self, t: int, atom: Atom) -> bool:
        s = self.slots.get(t)
        return s is not None and (
            atom in s.inputs or atom in s.derived or atom in s.sticky
        )

    def present_set(self, t: int) -> frozenset:
        s = self.slots.get(t)
        if s is None:
            return frozenset()
        if not s.derived and not s.sticky:
            return s.inputs
        return s.inputs | frozenset(s.derived) | s.sticky

    def derived_set(self, t: int) -> frozenset:
        s = self.slots.get(t)
        if s is None:
            return frozenset()
        return frozenset(s.derived) | s.sticky

    def drop_older_than(self, t: int) -> None:
        for k in [k for k in self.slots if k < t]:
            del self.slots[k]

    def size(self) -> int:
        return sum(
            len(s.inputs) + len(s.derived) + len(s.sticky)
            for s in self.slots.values()
        )


@dataclass
class _RuleState:
    rule: Rule
    plan: tuple
    checks: tuple  # occurrence checks: ("plain", pred) | ("diamond"|"at", key) | ("box", key)
    cache: set = field(default_factory=set)  # plain-head derivations of last fire
    force_fire: bool = False
    # Delta-evaluation modes ("band" / "joinwin" / None); see _classify_rule.
    mode: str = ""
    band_steps: tuple = ()  # compiled filter steps for band mode
    band_support: dict = field(default_factory=dict)  # head atom -> live count
    join_variants: tuple = ()  # (restricted item, variant plan) per window item
    join_items: tuple = ()  # the window items, for witness expiry computation
    join_alive: dict = field(default_factory=dict)  # head atom -> best expiry


class DerivationState:
    """All mutable state of one incremental evaluation session."""

    def __init__(self, program: Program):
        self.program = program
        self.now: Optional[int] = None
        self.tmin: Optional[int] = None
        self.started = False
        self.stats = EvalStats()
        self.ring_window = program.max_window()
        self.rings: dict = {}  # pred -> _PredRing
        self.win_stores: dict = {}  # (pred, w|None) -> _WinStore
        self.win_kinds: dict = {}  # (pred, w|None) -> set of op kinds
        self.win_patterns: dict = {}  # (pred, w|None) -> a sample pattern
        self.stores_by_pred: dict = {}  # pred -> [_WinStore, ...]
        self.box_stores: dict = {}  # pred -> _BoxStore
        self.box_keys: set = set()  # (pred, w) used by box occurrences
        self.box_keys_by_pred: dict = {}  # pred -> [(pred, w), ...]
        self.plain_preds: set = set()
        self.plain_prev: dict = {}  # pred -> frozenset
        self.box_prev: dict = {}  # (pred, w) -> frozenset
        self._plain_memo: dict = {}
        self._box_memo: dict = {}
        self._join_memo: dict = {}  # pred -> {signature: prepared index}
        self.tick_new_at_pairs: set = set()
        self.rule_states: list = []
        self.strata: list = []  # list of (cyclic: bool, [rule indexes])
        self._build()

    # -- construction --------------------------------------------------------

    def _build(self) -> None:
        program = self.program
        self._stratify()
        cyclic_rules = set()
        for cyclic, rule_idxs in self.strata:
            if cyclic:
                cyclic_rules.update(rule_idxs)
        head_preds = program.head_predicates()
        for rule_idx, rule in enumerate(program.rules):
            plan = compiled_plan(rule)
            checks = []
            at_time_vars = set()
            for item in plan:
                if type(item) is BuiltinStep:
                    continue
                if isinstance(item, Plain):
                    self.plain_preds.add(item.atom[0])
                    checks.append(("plain", item.atom[0]))
                elif isinstance(item, At):
                    key = (item.atom[0], None)
                    self._register_window(key, "at", item.atom)
                    checks.append(("at", key))
                    if type(item.time) is Var:
                        at_time_vars.add(item.time.name)
                elif isinstance(item, Windowed):
                    if item.spec.kind != "time":
                        raise UnsupportedProgramError(
                            "the incremental engine supports time windows only "
                            "(use the naive engine for tuple windows)"
                        )
                    key = (item.atom[0], item.spec.past)
                    if item.op == "box":
                        self.box_stores.setdefault(item.atom[0], _BoxStore())
                        if key not in self.box_keys:
                            self.box_keys.add(key)
                            self.box_keys_by_pred.setdefault(key[0], []).append(key)
                        checks.append(("box", key))
                    else:
                        self._register_window(key, item.op, item.atom)
                        checks.append((item.op, key))
                        if item.op == "at" and type(item.time) is Var:
                            at_time_vars.add(item.time.name)
            force = False
            if isinstance(rule.head, At):
                t = rule.head.time
                if type(t) is not Var or t.name not in at_time_vars:
                    # Head time comes from arithmetic or a constant; its
                    # value can reach `now` without any store event, so the
                    # rule cannot be skipped safely.
                    force = True
                if any(
                    isinstance(item, At) and type(item.time) is Var
                    and type(rule.head.time) is Var
                    and item.time.name == rule.head.time.name
                    for item in plan
                ):
                    raise UnsupportedProgramError(
                        "@-headed rule fed by an unwindowed @ formula may "
                        "derive outside the retained history"
                    )
            rs = _RuleState(
                rule=rule, plan=plan, checks=tuple(checks), force_fire=force
            )
            if rule_idx not in cyclic_rules:
                _classify_rule(rs, head_preds)
            self.rule_states.append(rs)

    def _register_window(self, key, kind: str, pattern: Atom) -> None:
        if key not in self.win_stores:
            store = _WinStore(key[1])
            self.win_stores[key] = store
            self.win_kinds[key] = set()
            self.win_patterns[key] = pattern
            self.stores_by_pred.setdefault(key[0], []).append(store)
        self.win_kinds[key].add(kind)

    def _stratify(self) -> None:
        """Group rules by the SCCs of the predicate dependency graph, in
        topological order."""
        edges: dict = {}
        preds = set()
        for rule in self.program.rules:
            head = rule.head_pred()
            preds.add(head)
            for item in rule.body:
                if isinstance(item, (Plain, At, Windowed)):
                    preds.add(item.atom[0])
                    edges.setdefault(item.atom[0], set()).add(head)
        order, components = _tarjan_sccs(preds, edges)
        by_head: dict = {}
        for idx, rule in enumerate(self.program.rules):
            by_head.setdefault(rule.head_pred(), []).append(idx)
        for comp in order:
            rule_idxs = []
            for pred in comp:
                rule_idxs.extend(by_head.get(pred, ()))
            if not rule_idxs:
                continue
            rule_idxs.sort()
            cyclic = len(comp) > 1 or (
                comp[0] in edges.get(comp[0], ())
            )
            self.strata.append((cyclic, rule_idxs))

    # -- presence bookkeeping ------------------------------------------------

    def ring(self, pred: str) -> _PredRing:
        r = self.rings.get(pred)
        if r is None:
            r = _PredRing()
            self.rings[pred] = r
        return r

    def _invalidate_memos(self, pred: str) -> None:
        self._plain_memo.pop(pred, None)
        self._join_memo.pop(pred, None)
        for key in self.box_keys_by_pred.get(pred, ()):
            self._box_memo.pop(key, None)

    def _on_present(self, pred: str, t: int, atom: Atom) -> None:
        now = self.now
        for store in self.stores_by_pred.get(pred, ()):
            store.add(atom, t, now)
        box = self.box_stores.get(pred)
        if box is not None:
            if t == now:
                box.on_present(atom, now)
            else:
                box.on_retro(atom, self.ring(pred), now)
        self._invalidate_memos(pred)

    def _on_absent_now(self, pred: str, atom: Atom) -> None:
        for store in self.stores_by_pred.get(pred, ()):
            store.remove(atom, self.now)
        box = self.box_stores.get(pred)
        if box is not None:
            box.on_absent(atom)
        self._invalidate_memos(pred)

    def _add_inputs(self, pred: str, atoms: set) -> None:
        slot = self.ring(pred).slot(self.now)
        slot.inputs = frozenset(atoms)
        for atom in slot.inputs:
            if atom not in slot.derived:
                self._on_present(pred, self.now, atom)

    def _add_derived(self, pred: str, t: int, atom: Atom) -> None:
        slot = self.ring(pred).slot(t)
        count = slot.derived.get(atom, 0)
        slot.derived[atom] = count + 1
        if count == 0 and atom not in slot.inputs and atom not in slot.sticky:
            self._on_present(pred, t, atom)

    def _remove_derived_now(self, pred: str, atom: Atom) -> None:
        slot = self.ring(pred).slot(self.now)
        count = slot.derived.get(atom, 0)
        if count <= 1:
            slot.derived.pop(atom, None)
            if atom not in slot.inputs and atom not in slot.sticky:
                self._on_absent_now(pred, atom)
        else:
            slot.derived[atom] = count - 1

    # -- per-tick memoized views ----------------------------------------------

    def _plain_now(self, pred: str) -> frozenset:
        got = self._plain_memo.get(pred)
        if got is None:
            got = self.ring(pred).present_set(self.now)
            self._plain_memo[pred] = got
        return got

    def _box_truth(self, key) -> frozenset:
        got = self._box_memo.get(key)
        if got is None:
            pred, w = key
            lo = max(self.tmin, self.now - w)
            box = self.box_stores[pred]
            got = frozenset(a for a, s in box.cur.items() if s <= lo)
            self._box_memo[key] = got
        return got

    # -- introspection ---------------------------------------------------------

    def annotations(self) -> list:
        out = []
        for key, store in self.win_stores.items():
            kinds = self.win_kinds[key]
            kind = "diamond" if "diamond" in kinds else "at"
            pattern = self.win_patterns[key]
            for atom, times in store.by_atom.items():
                binding = match(pattern, atom, {}) or {}
                for t in sorted(times):
                    horizon = float("inf") if store.w is None else t + store.w
                    out.append(Annotation(atom, dict(binding), kind, t, horizon))
        return out

    def size(self) -> int:
        """Rough state size: annotation entries + ring entries + trackers."""
        return (
            sum(s.size() for s in self.win_stores.values())
            + sum(b.size() for b in self.box_stores.values())
            + sum(r.size() for r in self.rings.values())
            + sum(
                len(rs.cache) + len(rs.band_support) + len(rs.join_alive)
                for rs in self.rule_states
            )
        )


def _tarjan_sccs(nodes, edges):
    """Iterative Tarjan; returns (components in topological order, comps)."""
    index = {}
    low = {}
    on_stack = set()
    stack = []
    result = []
    counter = [0]
    for root in sorted(nodes):
        if root in index:
            continue
        work = [(root, iter(sorted(edges.get(root, ()))))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for nxt in it:
                if nxt not in index:
                    index[nxt] = low[nxt] = counter[0]
                    counter[0] += 1
                    stack.append(nxt)
                    on_stack.add(nxt)
                    work.append((nxt, iter(sorted(edges.get(nxt, ())))))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    top = stack.pop()
                    on_stack.discard(top)
                    comp.append(top)
                    if top == node:
                        break
                result.append(comp)
    # Tarjan emits components in reverse topological order.
    result.reverse()
    return result, result


def init_state(program: Program) -> DerivationState:
    """Create an empty incremental session for a parsed program."""
    return DerivationState(program)


def push_tick(state: DerivationState, t: int, facts) -> TickResult:
    """Advance the session to tick `t` with the given input facts; returns
    the same TickResult the naive evaluator would produce."""
    first_tick = not state.started
    if first_tick:
        state.tmin = t
        state.started = True
    elif t != state.now + 1:
        raise OutOfOrderTickError(f"expected tick {state.now + 1}, got {t}")
    state.now = t
    now = t
    facts = list(facts)
    for atom in facts:
        if not is_ground(atom):
            raise ValueError(f"non-ground input fact {atom}")

    # Phase 1: expire.  Ring slots and window stores slide; box trackers
    # restart their presence picture for the new tick.
    keep_from = now - state.ring_window - 1
    for ring in state.rings.values():
        ring.drop_older_than(keep_from)
    for store in state.win_stores.values():
        store.clear_flags()
        store.slide(now)
    for box in state.box_stores.values():
        box.begin_tick()
    state._plain_memo = {}
    state._box_memo = {}
    state._join_memo = {}
    state.tick_new_at_pairs = set()

    # Phase 2: new input facts.
    by_pred: dict = {}
    for atom in facts:
        by_pred.setdefault(atom[0], set()).add(atom)
    for pred, atoms in by_pred.items():
        state._add_inputs(pred, atoms)

    # Phase 3: replay every rule's previous derivations for the new tick.
    # Rules that turn out to have changed bodies will overwrite theirs.
    for rs in state.rule_states:
        pred = rs.rule.head_pred()
        for atom in rs.cache:
            state._add_derived(pred, now, atom)

    # Phase 4: process rules in dependency order.
    for cyclic, rule_idxs in state.strata:
        if not cyclic:
            for idx in rule_idxs:
                rs = state.rule_states[idx]
                if rs.mode == "band":
                    _band_tick(state, rs)
                elif rs.mode == "joinwin":
                    _joinwin_tick(state, rs)
                elif first_tick or rs.force_fire or _occurrences_changed(state, rs):
                    _fire_rule(state, rs)
                else:
                    state.stats.rules_skipped += 1
        else:
            # Evaluate the cycle from scratch: retract replayed derivations,
            # then iterate its rules to a local fixpoint.
            for idx in rule_idxs:
                rs = state.rule_states[idx]
                pred = rs.rule.head_pred()
                for atom in rs.cache:
                    state._remove_derived_now(pred, atom)
                rs.cache = set()
            changed = True
            while changed:
                changed = False
                for idx in rule_idxs:
                    rs = state.rule_states[idx]
                    if _fire_rule(state, rs, grow_only=True):
                        changed = True

    # Phase 5: snapshot plain/box baselines for next tick's change checks.
    for pred in state.plain_preds:
        state.plain_prev[pred] = state._plain_now(pred)
    for key in state.box_keys:
        state.box_prev[key] = state._box_truth(key)

    state.stats.ticks += 1

    derived: dict = {}
    for pred, ring in state.rings.items():
        atoms = ring.derived_set(now)
        if atoms:
            derived[pred] = atoms
    return TickResult(now, derived, frozenset(state.tick_new_at_pairs))


def _occurrences_changed(state: DerivationState, rs: _RuleState) -> bool:
    for kind, key in rs.checks:
        if kind == "plain":
            if state._plain_now(key) != state.plain_prev.get(key, frozenset()):
                return True
        elif kind == "diamond":
            store = state.win_stores[key]
            if store.gained or store.lost:
                return True
        elif kind == "at":
            store = state.win_stores[key]
            if store.touched:
                return True
        else:  # box
            if state._box_truth(key) != state.box_prev.get(key, frozenset()):
                return True
    return False


def _fire_rule(state: DerivationState, rs: _RuleState, grow_only: bool = False) -> bool:
    """Evaluate a rule's body against the stores and commit its head
    derivations; returns True when any derivation was added or removed."""
    state.stats.rules_fired += 1
    now = state.now
    subs = [{}]
    for item in rs.plan:
        if not subs:
            subs = []
            break
        subs = _eval_entry(state, item, subs)

    head = rs.rule.head
    pred = rs.rule.head_pred()
    if isinstance(head, Plain):
        new_set = {substitute(head.atom, s) for s in subs}
        if grow_only:
            new_set |= rs.cache
        old = rs.cache
        if new_set == old:
            return False
        for atom in old - new_set:
            state._remove_derived_now(pred, atom)
        for atom in new_set - old:
            state._add_derived(pred, now, atom)
        rs.cache = new_set
        return True

    # @-headed rule: derivations land at their own time points and stay
    # (once recorded, a derivation at time t is history, like the naive
    # evaluator's; later body changes never retract it).
    ring = state.ring(pred)
    changed = False
    for s in subs:
        t = head.time if type(head.time) is not Var else s[head.time.name]
        if type(t) is str or not float(t).is_integer():
            logger.warning("@-head time %r is not a time point; dropped", t)
            continue
        ti = int(t)
        if ti < state.tmin or ti > now:
            logger.warning("@-head time %s outside [tmin, now]; dropped", ti)
            continue
        atom = substitute(head.atom, s)
        slot = ring.slot(ti)
        if atom in slot.sticky:
            continue
        if ti < now:
            # Past slots are frozen: any derivation already there is final.
            if atom in slot.derived:
                continue
            slot.sticky.add(atom)
            changed = True
            state.tick_new_at_pairs.add((ti, atom))
            if atom not in slot.inputs:
                state._on_present(pred, ti, atom)
        else:
            # The `now` slot still evolves; mark sticky even when a replayed
            # contribution covers the atom, so a later retraction of that
            # contribution cannot take this derivation with it.
            fresh = atom not in slot.derived and atom not in slot.inputs
            slot.sticky.add(atom)
            if fresh:
                changed = True
                state._on_present(pred, ti, atom)
    return changed


def _join_cached(state: DerivationState, pred: str, key, build):
    per_pred = state._join_memo.get(pred)
    if per_pred is None:
        per_pred = state._join_memo[pred] = {}
    got = per_pred.get(key)
    if got is None:
        got = per_pred[key] = build()
    return got


def _eval_entry(state: DerivationState, item, subs: list) -> list:
    """Evaluate one plan entry against the incremental stores."""
    if type(item) is BuiltinStep:
        return item.fn(subs)
    if isinstance(item, Plain):
        pred = item.atom[0]
        prepared = _join_cached(
            state, pred, ("plain", item.atom, bound_sig(item.atom, subs[0])),
            lambda: join_prepare(state._plain_now(pred), item.atom, subs[0]),
        )
        return join_probe(prepared, item.atom, subs)
    if isinstance(item, At):
        store = state.win_stores[(item.atom[0], None)]
        return _eval_store_at(state, store, None, item.atom, subs, item.time)
    if item.op == "diamond":
        key = (item.atom[0], item.spec.past)
        store = state.win_stores[key]
        prepared = _join_cached(
            state, key[0], ("dia", item.atom, key[1], bound_sig(item.atom, subs[0])),
            lambda: join_prepare(store.by_atom, item.atom, subs[0]),
        )
        return join_probe(prepared, item.atom, subs)
    if item.op == "at":
        store = state.win_stores[(item.atom[0], item.spec.past)]
        return _eval_store_at(state, store, item.spec.past, item.atom, subs, item.time)
    # box
    key = (item.atom[0], item.spec.past)
    truth = state._box_truth(key)
    prepared = _join_cached(
        state, key[0], ("box", item.atom, key[1], bound_sig(item.atom, subs[0])),
        lambda: join_prepare(truth, item.atom, subs[0]),
    )
    return join_probe(prepared, item.atom, subs)


def _eval_restricted(item, atoms_now, subs: list, now: int) -> list:
    """Evaluate a windowed diamond/@ item against only the atoms occurring
    at time `now` (the delta of its window)."""
    pattern = item.atom
    if item.op == "diamond":
        return join_probe(join_prepare(atoms_now, pattern, subs[0]), pattern, subs)
    time_term = item.time
    bound_name = time_term.name if type(time_term) is Var else None
    if bound_name is not None and bound_name not in subs[0]:
        fnow = float(now)
        out = []
        for e in join_probe(join_prepare(atoms_now, pattern, subs[0]), pattern, subs):
            already = e.get(bound_name)
            if already is not None:
                if already == fnow:
                    out.append(e)
                continue
            m = dict(e)
            m[bound_name] = fnow
            out.append(m)
        return out

    def time_of(s):
        value = s[bound_name] if bound_name is not None else time_term
        if type(value) is str or not float(value).is_integer():
            return None
        return int(value)

    return join_probe_timed(
        join_prepare_timed([(now, atoms_now)], pattern, subs[0]), pattern, subs, time_of
    )


def _band_tick(state: DerivationState, rs: _RuleState) -> None:
    """Event-driven maintenance for single-diamond filter rules: apply the
    window store's net gains and losses to a per-head support count."""
    item = rs.join_items[0]
    store = state.win_stores[(item.atom[0], item.spec.past)]
    if not store.gained and not store.lost:
        state.stats.rules_skipped += 1
        return
    state.stats.rules_fired += 1
    pattern = item.atom
    head_atom = rs.rule.head.atom
    support = rs.band_support

    def survivors(atoms):
        out = []
        for a in atoms:
            theta = match(pattern, a, {})
            if theta is None:
                continue
            batch = [theta]
            for fn in rs.band_steps:
                batch = fn(batch)
                if not batch:
                    break
            if batch:
                out.append(theta)
        return out

    for theta in survivors(store.gained):
        h = substitute(head_atom, theta)
        support[h] = support.get(h, 0) + 1
    for theta in survivors(store.lost):
        h = substitute(head_atom, theta)
        count = support.get(h, 0) - 1
        if count <= 0:
            support.pop(h, None)
        else:
            support[h] = count
    new_cache = set(support)
    pred = rs.rule.head_pred()
    for atom in rs.cache - new_cache:
        state._remove_derived_now(pred, atom)
    for atom in new_cache - rs.cache:
        state._add_derived(pred, state.now, atom)
    rs.cache = new_cache


def _joinwin_tick(state: DerivationState, rs: _RuleState) -> None:
    """Witness-expiry maintenance for join rules over windowed diamond/@
    formulas: per tick, evaluate only matches anchored at `now` (once per
    body item) and keep, per head atom, the latest witness expiry.

    A witness (a full body match) is valid for the contiguous span from
    the newest of its matched times through min_i(t_i + w_i); it is
    discovered exactly at the start of that span by the evaluation that
    restricts its newest item to the new time point."""
    now = state.now
    alive = rs.join_alive
    expired = [h for h, e in alive.items() if e < now]
    for h in expired:
        del alive[h]
    head_atom = rs.rule.head.atom
    ran = False
    for item, plan, rpos in rs.join_variants:
        store = state.win_stores[(item.atom[0], item.spec.past)]
        atoms_now = store.by_time.get(now)
        if not atoms_now:
            continue
        ran = True
        subs = [{}]
        for idx, entry in enumerate(plan):
            if not subs:
                break
            if idx == rpos:
                subs = _eval_restricted(entry, atoms_now, subs, now)
            else:
                subs = _eval_entry(state, entry, subs)
        for theta in subs:
            expiry = None
            for it in rs.join_items:
                w = it.spec.past
                if it.op == "at":
                    tv = it.time if type(it.time) is not Var else theta[it.time.name]
                    horizon = int(tv) + w
                else:
                    st = state.win_stores[(it.atom[0], w)]
                    horizon = max(st.by_atom[substitute(it.atom, theta)]) + w
                if expiry is None or horizon < expiry:
                    expiry = horizon
            h = substitute(head_atom, theta)
            if alive.get(h, -1) < expiry:
                alive[h] = expiry
    if ran:
        state.stats.rules_fired += 1
    else:
        state.stats.rules_skipped += 1
    new_cache = set(alive)
    if new_cache != rs.cache:
        pred = rs.rule.head_pred()
        for atom in rs.cache - new_cache:
            state._remove_derived_now(pred, atom)
        for atom in new_cache - rs.cache:
            state._add_derived(pred, now, atom)
        rs.cache = new_cache


def _classify_rule(rs: _RuleState, head_preds: set) -> None:
    """Pick a delta-evaluation mode for rules whose bodies are windowed
    diamond/@ formulas over input predicates only.

    band:    a single diamond plus pure comparison filters; maintained
             exactly from the window store's net gain/loss events.
    joinwin: any number of diamond/@ items (plus builtins); per tick only
             matches anchored at the new time point are evaluated, and
             every head atom tracks its best witness expiry.
    """
    rule = rs.rule
    if not isinstance(rule.head, Plain) or not rule.body:
        return
    window_items = []
    for item in rule.body:
        if isinstance(item, (Comp, Math)):
            continue
        if (
            isinstance(item, Windowed)
            and item.spec.kind == "time"
            and item.op in ("diamond", "at")
            and item.atom[0] not in head_preds
        ):
            window_items.append(item)
        else:
            return
    if not window_items:
        return

    if len(window_items) == 1 and window_items[0].op == "diamond":
        def _is_binder(item, bound):
            if isinstance(item, Math):
                return True
            if isinstance(item, Comp) and item.op == "==":
                return any(
                    type(t) is Var and t.name not in bound
                    for t in (item.lhs, item.rhs)
                )
            return False

        binderless = not any(
            _is_binder(item, bound)
            for item, bound in schedule_body(rule.body)
            if isinstance(item, (Comp, Math))
        )
        if binderless:
            rs.mode = "band"
            rs.join_items = (window_items[0],)
            rs.band_steps = tuple(
                e.fn for e in rs.plan if type(e) is BuiltinStep
            )
            return

    variants = []
    for i, item in enumerate(window_items):
        seen = False
        rest = []
        for b in rule.body:
            if not seen and b is item:
                seen = True
                continue
            rest.append(b)
        try:
            plan = compile_items((item,) + tuple(rest))
        except UnboundArgumentError:
            return  # variant not plannable; stay on full evaluation
        rpos = next(
            idx for idx, e in enumerate(plan) if type(e) is not BuiltinStep and e == item
        )
        variants.append((item, plan, rpos))
    rs.mode = "joinwin"
    rs.join_items = tuple(window_items)
    rs.join_variants = tuple(variants)


def _eval_store_at(
    state: DerivationState,
    store: _WinStore,
    w,
    pattern: Atom,
    subs: list,
    time_term,
) -> list:
    if not subs:
        return []
    pred = pattern[0]
    sig = bound_sig(pattern, subs[0])
    bound_name = time_term.name if type(time_term) is Var else None
    if bound_name is not None and bound_name not in subs[0]:
        prepared = _join_cached(
            state, pred, ("at*", pattern, w, sig),
            lambda: join_prepare(store.by_atom, pattern, subs[0]),
        )
        out = []
        by_atom = store.by_atom
        for e, atom in join_probe(prepared, pattern, subs, with_atoms=True):
            already = e.get(bound_name)
            for t in by_atom[atom]:
                if already is not None:
                    if already == float(t):
                        out.append(e)
                    continue
                m = dict(e)
                m[bound_name] = float(t)
                out.append(m)
        return out

    def time_of(s):
        value = s[bound_name] if bound_name is not None else time_term
        if type(value) is str or not float(value).is_integer():
            return None
        return int(value)

    prepared = _join_cached(
        state, pred, ("at", pattern, w, sig),
        lambda: join_prepare_timed(store.by_time.items(), pattern, subs[0]),
    )
    return join_probe_timed(prepared, pattern, subs, time_of)


def answers_at(state: DerivationState, outputs) -> frozenset:
    """Atoms of the output predicates true at the current tick."""
    if state.now is None:
        raise ValueError("no tick pushed yet")
    outputs = set(outputs)
    unknown = outputs - set(state.program.predicates)
    if unknown:
        raise ValueError(f"output predicates not in program: {sorted(unknown)}")
    out = set()
    for pred in outputs:
        ring = state.rings.get(pred)
        if ring is not None:
            out |= ring.present_set(state.now)
    return frozenset(out)


def run_stream_incremental(
    program: Program,
    stream: Stream,
    outputs,
    stats: Optional[EvalStats] = None,
    collect_results: Optional[list] = None,
) -> list:
    """Drive an incremental session over a whole stream; same output shape
    as run_stream_naive."""
    outputs = set(outputs)
    unknown = outputs - set(program.predicates)
    if unknown:
        raise ValueError(f"output predicates not in program: {sorted(unknown)}")
    state = init_state(program)
    if stats is not None:
        state.stats = stats
    answers = []
    for t in stream.times():
        result = push_tick(state, t, stream.at(t))
        if collect_results is not None:
            collect_results.append(result)
        answers.append((t, answers_at(state, outputs)))
    return answers


def check_equivalence(program: Program, stream: Stream, outputs=None, max_diffs: int = 5) -> list:
    """Run both engines over `stream` and compare tick results exactly;
    returns human-readable mismatch descriptions (empty = equivalent)."""
    diffs = []
    history = new_history()
    state = init_state(program)
    for t in stream.times():
        naive_result = evaluate_tick_naive(program, stream, history, t)
        inc_result = push_tick(state, t, stream.at(t))
        if naive_result != inc_result:
            diffs.append(_describe_diff(t, naive_result, inc_result))
            if len(diffs) >= max_diffs:
                return diffs
        if outputs:
            visible = set(stream.at(t)) | set(history.at(t))
            naive_ans = frozenset(a for a in visible if a[0] in outputs)
            inc_ans = answers_at(state, outputs)
            if naive_ans != inc_ans:
                diffs.append(
                    f"t={t}: answers differ: naive-only={sorted(naive_ans - inc_ans)} "
                    f"incremental-only={sorted(inc_ans - naive_ans)}"
                )
                if len(diffs) >= max_diffs:
                    return diffs
    return diffs


def _describe_diff(t: int, naive_result: TickResult, inc_result: TickResult) -> str:
    parts = [f"t={t}:"]
    preds = set(naive_result.derived) | set(inc_result.derived)
    for p in sorted(preds):
        a = naive_result.derived.get(p, frozenset())
        b = inc_result.derived.get(p, frozenset())
        if a != b:
            parts.append(
                f"  {p}: naive-only={sorted(a - b)} incremental-only={sorted(b - a)}"
            )
    if naive_result.at_derivations != inc_result.at_derivations:
        a, b = naive_result.at_derivations, inc_result.at_derivations
        parts.append(
            f"  @: naive-only={sorted(a - b)} incremental-only={sorted(b - a)}"
        )
    return "\n".join(parts)
