"""Finite-state machinery: DFAs, NFAs, generalized automata and padded
two-tape automata, plus the regular-language algebra the rest of the
package is built on.

Automata are value objects: every constructor and operation returns a new
machine and never mutates its inputs, so they are safe to share freely.
Symbols are arbitrary hashables; their order inside ``Dfa.alphabet`` is the
order used for shortlex enumeration and canonical state numbering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Iterator, Sequence


class FsaError(ValueError):
    pass


@dataclass(frozen=True)
class Letter:
    """Interned alphabet symbol.

    ``vertex_tags`` names the vertex alphabets A_V the letter belongs to and
    ``edge_tags`` the edge alphabets A_E; ``stable`` marks stable letters.
    Inverses are resolved by name through the owning Alphabet.
    """

    name: str
    inv_name: str
    stable: bool = False
    vertex_tags: frozenset[str] = frozenset()
    edge_tags: frozenset[str] = frozenset()

    def __repr__(self) -> str:
        return f"Letter({self.name})"


class _Pad:
    """Padding symbol for two-tape automata (prints as ``_``)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "_"


PAD = _Pad()


class Alphabet:
    """A finite involutive alphabet with a distinguished identity letter.

    Letter order is declaration order and is the global shortlex order.
    ``by_name`` also resolves alias names of letters that were merged when a
    convenient alphabet identifies duplicates across edge groups.
    """

    def __init__(self, letters: Sequence[Letter], identity: str, aliases: dict[str, str] | None = None):
        self.letters: tuple[Letter, ...] = tuple(letters)
        names = [l.name for l in self.letters]
        if len(set(names)) != len(names):
            raise FsaError("duplicate letter names")
        self.by_name: dict[str, Letter] = {l.name: l for l in self.letters}
        for alias, target in (aliases or {}).items():
            if alias not in self.by_name:
                self.by_name[alias] = self.by_name[target]
        self.identity: Letter = self.by_name[identity]
        if self.inverse(self.identity) is not self.identity:
            raise FsaError("identity letter must be its own inverse")
        for l in self.letters:
            if self.inverse(self.inverse(l)) is not l:
                raise FsaError(f"involution is not an involution at {l.name}")
        self._index = {l: i for i, l in enumerate(self.letters)}

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[str, str]], identity: str = "e") -> "Alphabet":
        """Build a bare alphabet from (name, inverse-name) pairs; the identity
        letter is added automatically if absent."""
        seen: dict[str, Letter] = {}
        order: list[Letter] = []
        if identity not in [n for p in pairs for n in p]:
            l = Letter(identity, identity)
            seen[identity] = l
            order.append(l)
        for name, inv in pairs:
            if name not in seen:
                l = Letter(name, inv)
                seen[name] = l
                order.append(l)
            if inv not in seen:
                l = Letter(inv, name)
                seen[inv] = l
                order.append(l)
        return cls(order, identity)

    def inverse(self, l: Letter) -> Letter:
        return self.by_name[l.inv_name]

    def index(self, l: Letter) -> int:
        return self._index[l]

    def word(self, text: str) -> tuple[Letter, ...]:
        """Parse a whitespace-separated word; the empty string is ε."""
        out = []
        for tok in text.split():
            if tok not in self.by_name:
                raise FsaError(f"unknown letter {tok!r}")
            out.append(self.by_name[tok])
        return tuple(out)

    def format(self, word: Sequence[Letter]) -> str:
        return " ".join(l.name for l in word) if word else "ε"

    def inverse_word(self, word: Sequence[Letter]) -> tuple[Letter, ...]:
        return tuple(self.inverse(l) for l in reversed(word))

    def __iter__(self) -> Iterator[Letter]:
        return iter(self.letters)

    def __len__(self) -> int:
        return len(self.letters)


def symbol_name(sym: Any) -> str:
    """Printable name of a symbol (letters, pads, pair symbols)."""
    if isinstance(sym, Letter):
        return sym.name
    if sym is PAD:
        return "_"
    if isinstance(sym, tuple) and len(sym) == 2:
        return f"{symbol_name(sym[0])}:{symbol_name(sym[1])}"
    return str(sym)


@dataclass
class Dfa:
    """Deterministic automaton over an ordered symbol tuple.

    Transitions are partial; missing entries are a dead sink. States are
    ``range(n)``. Constructions in this module prune dead states, so every
    state of a built Dfa lies on some accepting path.
    """

    alphabet: tuple[Any, ...]
    n: int
    start: int
    accepts: frozenset[int]
    trans: dict[int, dict[Any, int]]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dfa):
            return NotImplemented
        return (
            self.alphabet == other.alphabet
            and self.n == other.n
            and self.start == other.start
            and self.accepts == other.accepts
            and self.trans == other.trans
        )

    def step(self, state: int, sym: Any) -> int | None:
        return self.trans.get(state, {}).get(sym)

    def accepts_word(self, word: Sequence[Any]) -> bool:
        s: int | None = self.start
        for sym in word:
            s = self.step(s, sym)
            if s is None:
                return False
        return s in self.accepts

    def is_empty(self) -> bool:
        return not self.accepts

    def state_count(self) -> int:
        return self.n


@dataclass
class Nfa:
    """Nondeterministic automaton with ε-transitions and multiple starts.

    ``None`` is the ε label. ε-closures are computed once on first use.
    """

    alphabet: tuple[Any, ...]
    n: int
    starts: frozenset[int]
    accepts: frozenset[int]
    trans: dict[int, dict[Any, frozenset[int]]]
    _closures: list[frozenset[int]] | None = field(default=None, repr=False, compare=False)

    def closure(self, states: Iterable[int]) -> frozenset[int]:
        if self._closures is None:
            closures = []
            for s in range(self.n):
                seen = {s}
                stack = [s]
                while stack:
                    q = stack.pop()
                    for r in self.trans.get(q, {}).get(None, ()):
                        if r not in seen:
                            seen.add(r)
                            stack.append(r)
                closures.append(frozenset(seen))
            self._closures = closures
        out: set[int] = set()
        for s in states:
            out |= self._closures[s]
        return frozenset(out)

    def accepts_word(self, word: Sequence[Any]) -> bool:
        cur = self.closure(self.starts)
        for sym in word:
            nxt: set[int] = set()
            for s in cur:
                nxt |= self.trans.get(s, {}).get(sym, frozenset())
            cur = self.closure(nxt)
            if not cur:
                return False
        return bool(cur & self.accepts)


@dataclass
class Gfsa:
    """Generalized automaton: edges carry whole regular languages (Dfas)."""

    alphabet: tuple[Any, ...]
    n: int
    starts: frozenset[int]
    accepts: frozenset[int]
    edges: tuple[tuple[int, Dfa, int], ...]

    def validate(self) -> None:
        for src, label, dst in self.edges:
            if label.is_empty():
                raise FsaError(f"empty language on edge {src}->{dst}")


@dataclass
class TwoTapeDfa:
    """Synchronous automaton over the padded pair alphabet
    (A ∪ {PAD})² minus (PAD, PAD); padding may occur only as a suffix on one
    tape, which the constructors here guarantee."""

    base: tuple[Any, ...]
    dfa: Dfa

    def accepts_pair(self, u: Sequence[Any], v: Sequence[Any]) -> bool:
        m = max(len(u), len(v))
        word = [
            (u[i] if i < len(u) else PAD, v[i] if i < len(v) else PAD)
            for i in range(m)
        ]
        return self.dfa.accepts_word(word)


def pair_symbols(base: Sequence[Any]) -> tuple[tuple[Any, Any], ...]:
    """Padded pair alphabet in deterministic order (PAD sorts last)."""
    ext = list(base) + [PAD]
    out = []
    for x in ext:
        for y in ext:
            if x is PAD and y is PAD:
                continue
            out.append((x, y))
    return tuple(out)


# ---------------------------------------------------------------------------
# Core constructions


def _reachable(n: int, starts: Iterable[int], fwd: Callable[[int], Iterable[int]]) -> set[int]:
    seen = set(starts)
    stack = list(seen)
    while stack:
        s = stack.pop()
        for t in fwd(s):
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def prune(d: Dfa) -> Dfa:
    """Drop states not reachable from the start or not co-reachable to an
    accept state, renumbering by BFS in alphabet order."""
    fwd = _reachable(d.n, [d.start], lambda s: d.trans.get(s, {}).values())
    back: dict[int, set[int]] = {s: set() for s in range(d.n)}
    for s, row in d.trans.items():
        for t in row.values():
            back[t].add(s)
    bwd = _reachable(d.n, d.accepts, lambda s: back[s])
    live = fwd & bwd
    if d.start not in live:
        return Dfa(d.alphabet, 1, 0, frozenset(), {})
    order: dict[int, int] = {}
    queue = [d.start]
    order[d.start] = 0
    qi = 0
    while qi < len(queue):
        s = queue[qi]
        qi += 1
        for sym in d.alphabet:
            t = d.trans.get(s, {}).get(sym)
            if t is not None and t in live and t not in order:
                order[t] = len(order)
                queue.append(t)
    trans: dict[int, dict[Any, int]] = {}
    for s in queue:
        row = {sym: order[t] for sym, t in d.trans.get(s, {}).items() if t in order}
        if row:
            trans[order[s]] = row
    accepts = frozenset(order[s] for s in d.accepts if s in order)
    return Dfa(d.alphabet, len(order), 0, accepts, trans)


def complete(d: Dfa) -> tuple[Dfa, int]:
    """Total version of ``d``; returns (dfa, sink). The sink may be fresh."""
    sink = d.n
    trans = {s: dict(row) for s, row in d.trans.items()}
    needed = False
    for s in range(d.n):
        row = trans.setdefault(s, {})
        for sym in d.alphabet:
            if sym not in row:
                row[sym] = sink
                needed = True
    if needed:
        trans[sink] = {sym: sink for sym in d.alphabet}
        return Dfa(d.alphabet, d.n + 1, d.start, d.accepts, trans), sink
    return Dfa(d.alphabet, d.n, d.start, d.accepts, trans), -1


def determinize(n: Nfa) -> Dfa:
    """Subset construction; the result is pruned."""
    start = n.closure(n.starts)
    if not start:
        return Dfa(n.alphabet, 1, 0, frozenset(), {})
    index: dict[frozenset[int], int] = {start: 0}
    queue = [start]
    trans: dict[int, dict[Any, int]] = {}
    qi = 0
    while qi < len(queue):
        cur = queue[qi]
        qi += 1
        row: dict[Any, int] = {}
        for sym in n.alphabet:
            nxt: set[int] = set()
            for s in cur:
                nxt |= n.trans.get(s, {}).get(sym, frozenset())
            if not nxt:
                continue
            tgt = n.closure(nxt)
            if tgt not in index:
                index[tgt] = len(index)
                queue.append(tgt)
            row[sym] = index[tgt]
        if row:
            trans[index[cur]] = row
    accepts = frozenset(index[ss] for ss in index if ss & n.accepts)
    return prune(Dfa(n.alphabet, len(index), 0, accepts, trans))


def nfa_of_dfa(d: Dfa) -> Nfa:
    trans = {
        s: {sym: frozenset([t]) for sym, t in row.items()}
        for s, row in d.trans.items()
    }
    return Nfa(d.alphabet, d.n, frozenset([d.start]), d.accepts, trans)


def minimize(d: Dfa) -> Dfa:
    """Partition-refinement minimization returning a canonically numbered
    automaton: language-equal inputs over the same alphabet minimize to
    equal values."""
    d = prune(d)
    if not d.accepts:
        return d
    total, sink = complete(d)
    parts: list[set[int]] = []
    acc = set(total.accepts)
    non = set(range(total.n)) - acc
    if acc:
        parts.append(acc)
    if non:
        parts.append(non)
    part_of = {}
    for i, p in enumerate(parts):
        for s in p:
            part_of[s] = i
    changed = True
    while changed:
        changed = False
        new_parts: list[set[int]] = []
        for p in parts:
            buckets: dict[tuple[int, ...], set[int]] = {}
            for s in p:
                key = tuple(part_of[total.trans[s][sym]] for sym in total.alphabet)
                buckets.setdefault(key, set()).add(s)
            new_parts.extend(buckets.values())
        if len(new_parts) != len(parts):
            changed = True
        parts = new_parts
        part_of = {}
        for i, p in enumerate(parts):
            for s in p:
                part_of[s] = i
    trans: dict[int, dict[Any, int]] = {}
    for i, p in enumerate(parts):
        s = next(iter(p))
        trans[i] = {sym: part_of[total.trans[s][sym]] for sym in total.alphabet}
    accepts = frozenset(part_of[s] for s in total.accepts)
    merged = Dfa(total.alphabet, len(parts), part_of[total.start], accepts, trans)
    return prune(merged)


def equal_languages(a: Dfa, b: Dfa) -> bool:
    return minimize(a) == minimize(b)


def product_boolean(x: Dfa, y: Dfa, op: str) -> Dfa:
    """Boolean combination of two languages over the same alphabet;
    ``op`` is one of and / or / diff."""
    if x.alphabet != y.alphabet:
        raise FsaError("alphabet mismatch")
    if op not in ("and", "or", "diff"):
        raise FsaError(f"unknown boolean op {op!r}")
    xt, _ = complete(x)
    yt, _ = complete(y)
    index: dict[tuple[int, int], int] = {(xt.start, yt.start): 0}
    queue = [(xt.start, yt.start)]
    trans: dict[int, dict[Any, int]] = {}
    qi = 0
    while qi < len(queue):
        sx, sy = queue[qi]
        qi += 1
        row = {}
        for sym in x.alphabet:
            t = (xt.trans[sx][sym], yt.trans[sy][sym])
            if t not in index:
                index[t] = len(index)
                queue.append(t)
            row[sym] = index[t]
        trans[index[(sx, sy)]] = row
    accepts = set()
    for (sx, sy), i in index.items():
        ax, ay = sx in xt.accepts, sy in yt.accepts
        ok = {"and": ax and ay, "or": ax or ay, "diff": ax and not ay}[op]
        if ok:
            accepts.add(i)
    return prune(Dfa(x.alphabet, len(index), 0, frozenset(accepts), trans))


def union(x: Dfa, y: Dfa) -> Dfa:
    return product_boolean(x, y, "or")


def intersect(x: Dfa, y: Dfa) -> Dfa:
    return product_boolean(x, y, "and")


def difference(x: Dfa, y: Dfa) -> Dfa:
    return product_boolean(x, y, "diff")


def empty_dfa(alphabet: Sequence[Any]) -> Dfa:
    return Dfa(tuple(alphabet), 1, 0, frozenset(), {})


def epsilon_dfa(alphabet: Sequence[Any]) -> Dfa:
    return Dfa(tuple(alphabet), 1, 0, frozenset([0]), {})


def universal_dfa(alphabet: Sequence[Any]) -> Dfa:
    alphabet = tuple(alphabet)
    return Dfa(alphabet, 1, 0, frozenset([0]), {0: {sym: 0 for sym in alphabet}})


def word_set_dfa(alphabet: Sequence[Any], words: Iterable[Sequence[Any]]) -> Dfa:
    """Dfa for a finite set of words (trie)."""
    alphabet = tuple(alphabet)
    nodes: dict[tuple[Any, ...], int] = {(): 0}
    accepts: set[int] = set()
    trans: dict[int, dict[Any, int]] = {}
    for w in words:
        w = tuple(w)
        for i in range(len(w)):
            p, sym, q = w[:i], w[i], w[: i + 1]
            if q not in nodes:
                nodes[q] = len(nodes)
            trans.setdefault(nodes[p], {})[sym] = nodes[q]
        accepts.add(nodes[w])
    return prune(Dfa(alphabet, len(nodes), 0, frozenset(accepts), trans))


def concat_word(prefix: Sequence[Any], d: Dfa) -> Dfa:
    """Language {prefix · w : w in L(d)}."""
    k = len(prefix)
    if k == 0:
        return prune(d)
    trans: dict[int, dict[Any, int]] = {}
    for i, sym in enumerate(prefix):
        trans[i] = {sym: i + 1 if i + 1 < k else k + d.start}
    for s, row in d.trans.items():
        trans[k + s] = {sym: k + t for sym, t in row.items()}
    accepts = frozenset(k + s for s in d.accepts)
    return prune(Dfa(d.alphabet, k + d.n, 0, accepts, trans))


def concat(x: Dfa, y: Dfa) -> Dfa:
    """Language L(x)·L(y) via an ε-glued Nfa."""
    trans: dict[int, dict[Any, frozenset[int]]] = {}
    for s, row in x.trans.items():
        trans[s] = {sym: frozenset([t]) for sym, t in row.items()}
    off = x.n
    for s, row in y.trans.items():
        trans[off + s] = {sym: frozenset([off + t]) for sym, t in row.items()}
    for s in x.accepts:
        trans.setdefault(s, {})[None] = trans.get(s, {}).get(None, frozenset()) | frozenset([off + y.start])
    return determinize(
        Nfa(x.alphabet, x.n + y.n, frozenset([x.start]), frozenset(off + s for s in y.accepts), trans)
    )


def expand_gfsa(g: Gfsa) -> Nfa:
    """Inline every edge label as a copy of its Dfa glued with ε-transitions."""
    g.validate()
    n = g.n
    trans: dict[int, dict[Any, frozenset[int]]] = {}

    def add(src: int, sym: Any, dst: int) -> None:
        row = trans.setdefault(src, {})
        row[sym] = row.get(sym, frozenset()) | frozenset([dst])

    for src, label, dst in g.edges:
        off = n
        n += label.n
        for s, row in label.trans.items():
            for sym, t in row.items():
                add(off + s, sym, off + t)
        add(src, None, off + label.start)
        for s in label.accepts:
            add(off + s, None, dst)
    return Nfa(g.alphabet, n, g.starts, g.accepts, trans)


def prohibit_subwords(x: Dfa, bad: Sequence[Sequence[Any]]) -> Dfa:
    """Words of L(x) containing no element of ``bad`` as a factor."""
    bad = [tuple(w) for w in bad if len(w) > 0]
    if not bad:
        return prune(x)
    # Nondeterministic matcher for Σ* bad Σ*, determinized on the fly by the
    # subset construction inside `determinize`.
    nodes: dict[tuple[int, int], int] = {}  # (word index, position) -> state
    trans: dict[int, dict[Any, frozenset[int]]] = {}
    start = 0
    hit = 1
    count = 2

    def add(src: int, sym: Any, dst: int) -> None:
        row = trans.setdefault(src, {})
        row[sym] = row.get(sym, frozenset()) | frozenset([dst])

    for sym in x.alphabet:
        add(start, sym, start)
        add(hit, sym, hit)
    for wi, w in enumerate(bad):
        prev = start
        for i, sym in enumerate(w):
            nxt = hit if i == len(w) - 1 else nodes.setdefault((wi, i), count)
            if nxt == count:
                count += 1
            add(prev, sym, nxt)
            prev = nxt
    matcher = determinize(Nfa(x.alphabet, count, frozenset([start]), frozenset([hit]), trans))
    return difference(x, matcher)


def enumerate_words(m: Dfa | Nfa, maxlen: int) -> list[tuple[Any, ...]]:
    """All accepted words of length ≤ maxlen in shortlex order (alphabet
    order = symbol order of the machine)."""
    if isinstance(m, Nfa):
        m = determinize(m)
    out: list[tuple[Any, ...]] = []
    level: list[tuple[tuple[Any, ...], int]] = [((), m.start)]
    if m.start in m.accepts:
        out.append(())
    for _ in range(maxlen):
        nxt: list[tuple[tuple[Any, ...], int]] = []
        for word, s in level:
            for sym in m.alphabet:
                t = m.step(s, sym)
                if t is None:
                    continue
                w2 = word + (sym,)
                if t in m.accepts:
                    out.append(w2)
                nxt.append((w2, t))
        level = nxt
        if not level:
            break
    return out


def count_words(m: Dfa, maxlen: int) -> int:
    """Number of accepted words of length ≤ maxlen (dynamic count, no
    materialization)."""
    vec = {m.start: 1}
    total = 1 if m.start in m.accepts else 0
    for _ in range(maxlen):
        nxt: dict[int, int] = {}
        for s, c in vec.items():
            for sym, t in m.trans.get(s, {}).items():
                nxt[t] = nxt.get(t, 0) + c
        vec = nxt
        total += sum(c for s, c in vec.items() if s in m.accepts)
        if not vec:
            break
    return total


# ---------------------------------------------------------------------------
# Two-tape machinery


def shortlex_less_dfa(base: Sequence[Any]) -> TwoTapeDfa:
    """Pairs (u, v) with u ≺ v in shortlex, over the padded pair alphabet.

    States track the lexicographic comparison of the consumed prefixes and
    which tape (if any) has started padding.
    """
    base = tuple(base)
    rank = {sym: i for i, sym in enumerate(base)}
    syms = pair_symbols(base)
    EQ, LT, GT, USHORT, VSHORT = range(5)
    trans: dict[int, dict[Any, int]] = {s: {} for s in range(5)}
    for x, y in syms:
        if x is PAD and y is not PAD:
            for s in (EQ, LT, GT):
                trans[s][(x, y)] = USHORT
            trans[USHORT][(x, y)] = USHORT
        elif x is not PAD and y is PAD:
            for s in (EQ, LT, GT):
                trans[s][(x, y)] = VSHORT
            trans[VSHORT][(x, y)] = VSHORT
        else:
            if rank[x] == rank[y]:
                nxt = {EQ: EQ, LT: LT, GT: GT}
            elif rank[x] < rank[y]:
                nxt = {EQ: LT, LT: LT, GT: GT}
            else:
                nxt = {EQ: GT, LT: LT, GT: GT}
            for s, t in nxt.items():
                trans[s][(x, y)] = t
    accepts = frozenset([LT, USHORT])
    return TwoTapeDfa(base, prune(Dfa(syms, 5, EQ, accepts, trans)))


def project_second(t: TwoTapeDfa) -> Dfa:
    """Second projections {v : (u, v) accepted for some u}."""
    base = tuple(t.base)
    d = t.dfa
    trans: dict[int, dict[Any, frozenset[int]]] = {}

    def add(src: int, sym: Any, dst: int) -> None:
        row = trans.setdefault(src, {})
        row[sym] = row.get(sym, frozenset()) | frozenset([dst])

    for s, row in d.trans.items():
        for (x, y), q in row.items():
            add(s, None if y is PAD else y, q)
    return determinize(Nfa(base, d.n, frozenset([d.start]), d.accepts, trans))


def intersect_two_tape(a: TwoTapeDfa, b: TwoTapeDfa) -> TwoTapeDfa:
    if tuple(a.base) != tuple(b.base):
        raise FsaError("two-tape base alphabet mismatch")
    return TwoTapeDfa(a.base, intersect(a.dfa, b.dfa))


def shortlex_filter(L: Dfa, relation: TwoTapeDfa) -> Dfa:
    """Words of L that are shortlex-least within their relation class:
    L minus the second projections of {(u, v) related : u ≺ v}."""
    if tuple(relation.base) != L.alphabet:
        raise FsaError("relation is not over the language's alphabet")
    less = shortlex_less_dfa(L.alphabet)
    beaten = project_second(intersect_two_tape(relation, less))
    return difference(L, beaten)


# ---------------------------------------------------------------------------
# Exchange format (line-oriented text)


def write_fsa(m: Dfa | Nfa) -> str:
    """Serialize in the exchange format:
    ``fsa <nstates> <start-list> <accept-list>`` then ``src letter dst``
    lines (ε written as ``@eps``), transitions sorted. Bit-exact round trip
    with :func:`read_fsa` given the same alphabet."""
    if isinstance(m, Dfa):
        starts = [m.start]
        rows = [(s, sym, t) for s, row in m.trans.items() for sym, t in row.items()]
    else:
        starts = sorted(m.starts)
        rows = [
            (s, sym, t)
            for s, row in m.trans.items()
            for sym, ts in row.items()
            for t in ts
        ]
    order = {sym: i for i, sym in enumerate(m.alphabet)}
    rows.sort(key=lambda r: (r[0], -1 if r[1] is None else order[r[1]], r[2]))
    head = "fsa {} {} {}".format(
        m.n,
        ",".join(map(str, starts)),
        ",".join(map(str, sorted(m.accepts))) or "-",
    )
    lines = [head]
    for s, sym, t in rows:
        lines.append(f"{s} {'@eps' if sym is None else symbol_name(sym)} {t}")
    return "\n".join(lines) + "\n"


def read_fsa(text: str, alphabet: Sequence[Any]) -> Dfa | Nfa:
    """Parse the exchange format. Returns a Dfa when the machine is
    deterministic (single start, no ε, no duplicate-label edges)."""
    alphabet = tuple(alphabet)
    by_name = {symbol_name(sym): sym for sym in alphabet}
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("fsa "):
        raise FsaError("missing fsa header")
    parts = lines[0].split()
    if len(parts) != 4:
        raise FsaError("malformed fsa header")
    n = int(parts[1])
    starts = frozenset(int(x) for x in parts[2].split(","))
    accepts = frozenset(int(x) for x in parts[3].split(",")) if parts[3] != "-" else frozenset()
    rows: list[tuple[int, Any, int]] = []
    deterministic = len(starts) == 1
    seen: set[tuple[int, Any]] = set()
    for ln in lines[1:]:
        toks = ln.split()
        if len(toks) != 3:
            raise FsaError(f"malformed transition line {ln!r}")
        src, name, dst = int(toks[0]), toks[1], int(toks[2])
        if name == "@eps":
            sym = None
            deterministic = False
        elif name in by_name:
            sym = by_name[name]
        else:
            raise FsaError(f"unknown symbol {name!r}")
        if (src, sym) in seen:
            deterministic = False
        seen.add((src, sym))
        rows.append((src, sym, dst))
    if deterministic:
        trans: dict[int, dict[Any, int]] = {}
        for src, sym, dst in rows:
            trans.setdefault(src, {})[sym] = dst
        return Dfa(alphabet, n, next(iter(starts)), accepts, trans)
    ntrans: dict[int, dict[Any, frozenset[int]]] = {}
    for src, sym, dst in rows:
        row = ntrans.setdefault(src, {})
        row[sym] = row.get(sym, frozenset()) | frozenset([dst])
    return Nfa(alphabet, n, starts, accepts, ntrans)
