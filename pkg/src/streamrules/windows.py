"""Window application and temporal-operator evaluation over a stream.

A window restricts evaluation at time `now` to a closed interval of time
points ending at `now`.  Time windows keep the last `past` points (clipped
at the stream start); tuple windows keep the smallest suffix interval
holding at least `n` atoms, with only the newest `n` atoms visible.  The
temporal operators quantify over the restricted substream:

* diamond -- the pattern holds at some time of the window,
* box     -- the pattern holds at every time of the window,
* at      -- the pattern holds at one specific time (binding it if free).
"""

from __future__ import annotations

from typing import Optional

from .model import (
    Atom,
    Substitution,
    Var,
    WindowSpec,
    atom_sort_key,
    bound_sig,
    join_atoms,
    join_atoms_at_times,
    join_prepare,
    join_prepare_timed,
    join_probe,
    join_probe_timed,
    match,
    substitute,
)


class UnsupportedWindowError(ValueError):
    """Raised for window parameters the evaluator does not support."""


class WindowView:
    """A stream restricted to [lo, hi]; tuple windows may additionally hide
    all but the newest atoms of the oldest visible time point (when the
    window was counted per predicate, the trim applies only to it)."""

    __slots__ = ("lo", "hi", "_source", "_opred", "_odict")

    def __init__(self, lo: int, hi: int, source, opred=None, odict: Optional[dict] = None):
        self.lo = lo
        self.hi = hi
        self._source = source
        self._opred = opred
        self._odict = odict

    @property
    def timeline(self):
        return (self.lo, self.hi)

    def _source_pred_atoms(self, t: int, pred: str) -> frozenset:
        src = self._source
        if hasattr(src, "pred_atoms_at"):
            return src.pred_atoms_at(t, pred)
        return frozenset(a for a in src.at(t) if a[0] == pred)

    def atoms_at(self, t: int) -> frozenset:
        if t < self.lo or t > self.hi:
            return frozenset()
        if self._odict is not None and t in self._odict:
            kept = self._odict[t]
            if self._opred is None:
                return kept
            rest = frozenset(
                a for a in self._source.at(t) if a[0] != self._opred
            )
            return kept | rest
        return self._source.at(t)

    def pred_atoms_at(self, t: int, pred: str) -> frozenset:
        if t < self.lo or t > self.hi:
            return frozenset()
        if self._odict is not None and t in self._odict:
            if self._opred is None:
                return frozenset(a for a in self._odict[t] if a[0] == pred)
            if pred == self._opred:
                return self._odict[t]
        return self._source_pred_atoms(t, pred)


def window_view(stream, now: int, spec: WindowSpec, pred: Optional[str] = None) -> WindowView:
    """Apply a window operator to `stream` at evaluation time `now`.

    Tuple windows count the last `past` atoms; with `pred` given, only
    atoms of that predicate are counted and trimmed (the evaluators pass
    the windowed formula's predicate, so unrelated facts cannot shift the
    boundary)."""
    if spec.future > 0:
        raise UnsupportedWindowError("future-reaching windows are not supported")
    if spec.step != 1:
        raise UnsupportedWindowError("window step must be 1")
    if not (stream.tmin <= now <= stream.tmax):
        raise ValueError(f"now={now} outside stream timeline [{stream.tmin}, {stream.tmax}]")
    if spec.kind == "time":
        lo = max(stream.tmin, now - spec.past)
        return WindowView(lo, now, stream)
    # Tuple window: walk back from `now` until at least `past` atoms are
    # covered.  If the boundary point contributes more atoms than needed,
    # only the newest ones (in canonical atom order) stay visible.
    scratch = WindowView(stream.tmin, now, stream)

    def count_at(t):
        if pred is None:
            return stream.at(t)
        return scratch._source_pred_atoms(t, pred)

    need = spec.past
    total = 0
    t = now
    while t >= stream.tmin:
        total += len(count_at(t))
        if total >= need:
            break
        t -= 1
    if t < stream.tmin:
        return WindowView(stream.tmin, now, stream)
    excess = total - need
    if excess == 0:
        return WindowView(t, now, stream)
    kept = sorted(count_at(t), key=atom_sort_key)[excess:]
    return WindowView(t, now, stream, pred, {t: frozenset(kept)})


def eval_temporal(
    view: WindowView,
    op: str,
    pattern: Atom,
    s: Substitution,
    time_term=None,
) -> list:
    """Evaluate a temporal operator for one substitution; returns the list
    of extensions of `s` that satisfy it (deduplicated)."""
    return eval_temporal_batch(view, op, pattern, [s], time_term)


def _cached(cache, pred, key, build):
    if cache is None:
        return build()
    per_pred = cache.get(pred)
    if per_pred is None:
        per_pred = cache[pred] = {}
    got = per_pred.get(key)
    if got is None:
        got = per_pred[key] = build()
    return got


def eval_temporal_batch(
    view: WindowView,
    op: str,
    pattern: Atom,
    subs: list,
    time_term=None,
    cache=None,
) -> list:
    """Batched form of eval_temporal: threads a whole set of substitutions
    through one window, sharing the candidate index.  `cache` (optional,
    keyed by predicate) reuses prepared indexes across calls with the same
    window and binding signature; the caller owns its invalidation."""
    if not subs:
        return []
    lo, hi = view.lo, view.hi
    pred = pattern[0]
    if view._odict is not None:
        cache = None  # tuple-window boundary slices are view-specific
    sig = bound_sig(pattern, subs[0])

    if op == "box":
        prepared = _cached(
            cache,
            pred,
            ("box", pattern, lo, hi, sig),
            lambda: join_prepare(view.pred_atoms_at(lo, pred), pattern, subs[0]),
        )
        exts = join_probe(prepared, pattern, subs)
        for t in range(lo + 1, hi + 1):
            if not exts:
                break
            atoms = view.pred_atoms_at(t, pred)
            exts = [e for e in exts if substitute(pattern, e) in atoms]
        return exts

    if op == "diamond":
        def build():
            seen_atoms = set()
            candidates = []
            for t in range(lo, hi + 1):
                for a in view.pred_atoms_at(t, pred):
                    if a not in seen_atoms:
                        seen_atoms.add(a)
                        candidates.append(a)
            return join_prepare(candidates, pattern, subs[0])

        prepared = _cached(cache, pred, ("dia", pattern, lo, hi, sig), build)
        return join_probe(prepared, pattern, subs)

    if op == "at":
        if time_term is None:
            raise ValueError("at-operator needs a time term")
        bound_name = time_term.name if type(time_term) is Var else None
        if bound_name is not None and bound_name not in subs[0]:
            # Free time variable: match on distinct atoms, then fan each
            # extension out over the times its atom occurs at.
            def build():
                atom_times: dict = {}
                for t in range(lo, hi + 1):
                    for a in view.pred_atoms_at(t, pred):
                        atom_times.setdefault(a, []).append(t)
                return join_prepare(atom_times, pattern, subs[0]), atom_times

            prepared, atom_times = _cached(
                cache, pred, ("at*", pattern, lo, hi, sig), build
            )
            out = []
            for e, atom in join_probe(prepared, pattern, subs, with_atoms=True):
                already = e.get(bound_name)
                for t in atom_times[atom]:
                    if already is not None:
                        # Time var also occurs inside the atom; keep only
                        # the occurrence time consistent with that binding.
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
            t = int(value)
            return t if lo <= t <= hi else None

        prepared = _cached(
            cache,
            pred,
            ("at", pattern, lo, hi, sig),
            lambda: join_prepare_timed(
                ((t, view.pred_atoms_at(t, pred)) for t in range(lo, hi + 1)),
                pattern,
                subs[0],
            ),
        )
        return join_probe_timed(prepared, pattern, subs, time_of)

    raise ValueError(f"unknown temporal operator {op!r}")
