"""Pluggable vertex-group structures: concrete groups with word evaluation,
canonical forms, word acceptors and multiplier automata.

Two kinds ship: finite groups given by multiplication tables, and free
groups with the shortlex (freely reduced) structure. Both carry the
uniqueness flag: the acceptor language is exactly the set of canonical
words, one per group element.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .fsa import (
    PAD,
    Dfa,
    Letter,
    TwoTapeDfa,
    pair_symbols,
    prune,
)


class GroupError(ValueError):
    pass


Word = tuple[Letter, ...]


@dataclass(frozen=True)
class FiniteGroupTable:
    """A finite group as element names plus a row-major multiplication table.

    Group laws are checked exhaustively at construction.
    """

    names: tuple[str, ...]
    mul: tuple[tuple[int, ...], ...]
    identity: int = 0
    inv: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        n = len(self.names)
        if len(set(self.names)) != n:
            raise GroupError("duplicate element names")
        if len(self.mul) != n or any(len(r) != n for r in self.mul):
            raise GroupError("table is not square")
        e = self.identity
        for i in range(n):
            if self.mul[e][i] != i or self.mul[i][e] != i:
                raise GroupError("identity law fails")
        inv = [-1] * n
        for i in range(n):
            for j in range(n):
                if self.mul[i][j] == e and self.mul[j][i] == e:
                    inv[i] = j
        if any(v < 0 for v in inv):
            raise GroupError("inverse law fails")
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if self.mul[self.mul[i][j]][k] != self.mul[i][self.mul[j][k]]:
                        raise GroupError("associativity fails")
        object.__setattr__(self, "inv", tuple(inv))

    @classmethod
    def cyclic(cls, n: int, names: Sequence[str] | None = None) -> "FiniteGroupTable":
        if names is None:
            names = ["1"] + [f"g{i}" for i in range(1, n)]
        mul = tuple(tuple((i + j) % n for j in range(n)) for i in range(n))
        return cls(tuple(names), mul, 0)

    @classmethod
    def from_names(cls, names: Sequence[str], rows: Sequence[str]) -> "FiniteGroupTable":
        """Table given row-major by element names."""
        names = tuple(names)
        index = {nm: i for i, nm in enumerate(names)}
        if len(rows) != len(names) * len(names):
            raise GroupError("table size mismatch")
        n = len(names)
        mul = tuple(
            tuple(index[rows[i * n + j]] for j in range(n)) for i in range(n)
        )
        return cls(names, mul, 0)

    def size(self) -> int:
        return len(self.names)


@dataclass
class VertexGroupStructure:
    """An automatic structure on a vertex group.

    ``letters`` maps group data to alphabet letters; ``acceptor`` is the word
    acceptor over exactly those letters, with ``unique`` set when accepted
    words biject to canonical forms. ``class_label`` is an opaque token
    naming the structure's equivalence class.
    """

    kind: str  # "finite-table" | "shortlex-free"
    name: str
    alphabet: tuple[Letter, ...]
    identity_letter: Letter
    acceptor: Dfa
    unique: bool
    class_label: str
    table: FiniteGroupTable | None = None
    elem_letter: dict[int, Letter] | None = None  # finite kind: nontrivial elt -> letter
    letter_elem: dict[str, int] | None = None  # letter name -> elt index (incl. identity)
    rank: int = 0
    _multipliers: dict[Word, TwoTapeDfa] = field(default_factory=dict, repr=False)

    # -- canonical word arithmetic -------------------------------------

    def check_letters(self, w: Iterable[Letter]) -> None:
        allowed = set(self.alphabet)
        for l in w:
            if l not in allowed:
                raise GroupError(f"letter {l.name} is not in A_{self.name}")

    def evaluate(self, w: Sequence[Letter]) -> Word:
        """Canonical word with the same value; idempotent on canonical words."""
        self.check_letters(w)
        if self.kind == "finite-table":
            assert self.table and self.letter_elem is not None
            cur = self.table.identity
            for l in w:
                cur = self.table.mul[cur][self.letter_elem[l.name]]
            return self.element_word(cur)
        out: list[Letter] = []
        for l in w:
            if l is self.identity_letter:
                continue
            if out and out[-1].inv_name == l.name:
                out.pop()
            else:
                out.append(l)
        return tuple(out)

    def multiply(self, x: Sequence[Letter], y: Sequence[Letter]) -> Word:
        self._require_canonical(x)
        self._require_canonical(y)
        return self.evaluate(tuple(x) + tuple(y))

    def invert(self, x: Sequence[Letter]) -> Word:
        self._require_canonical(x)
        inv_by_name = {l.name: l for l in self.alphabet}
        return self.evaluate(tuple(inv_by_name[l.inv_name] for l in reversed(x)))

    def _require_canonical(self, x: Sequence[Letter]) -> None:
        if tuple(x) != self.evaluate(x):
            raise GroupError(f"word {' '.join(l.name for l in x)} is not canonical")

    def is_identity(self, x: Sequence[Letter]) -> bool:
        return len(tuple(x)) == 0

    # -- finite-kind helpers -------------------------------------------

    def element_word(self, idx: int) -> Word:
        """Canonical word of a table element (finite kind only)."""
        assert self.table is not None and self.elem_letter is not None
        if idx == self.table.identity:
            return ()
        return (self.elem_letter[idx],)

    def word_element(self, w: Sequence[Letter]) -> int:
        assert self.table is not None and self.letter_elem is not None
        cur = self.table.identity
        for l in w:
            cur = self.table.mul[cur][self.letter_elem[l.name]]
        return cur

    def all_elements(self) -> list[Word]:
        """Canonical words of all elements (finite kind only)."""
        assert self.table is not None
        return [self.element_word(i) for i in range(self.table.size())]

    # -- multipliers -----------------------------------------------------

    def multiplier(self, g: Sequence[Letter]) -> TwoTapeDfa:
        """Two-tape automaton accepting padded (u, v) with both accepted and
        value(u)·value(g) = value(v)."""
        g = self.evaluate(g)
        if g not in self._multipliers:
            self._multipliers[g] = relation_dfa(self, [g])
        return self._multipliers[g]

    def coset_relation(self, subgroup_values: Iterable[Sequence[Letter]]) -> TwoTapeDfa:
        """Pairs (u, v) with value(u)⁻¹·value(v) in the given finite subgroup."""
        return relation_dfa(self, list(subgroup_values))


def make_finite_group(table: FiniteGroupTable, letters: Sequence[Letter] | None = None,
                      class_label: str | None = None, name: str = "") -> VertexGroupStructure:
    """The unique structure on a finite group: the acceptor accepts ε and one
    letter per nontrivial element.

    ``letters`` may supply pre-built letters (identity first, then one per
    nontrivial element in table order), as the graph builder does when
    letters are shared across edges.
    """
    n = table.size()
    name = name or "G"
    if letters is None:
        built: list[Letter] = [Letter("e", "e", vertex_tags=frozenset([name]))]
        for i in range(n):
            if i == table.identity:
                continue
            built.append(
                Letter(table.names[i], table.names[table.inv[i]], vertex_tags=frozenset([name]))
            )
        letters = built
    letters = tuple(letters)
    if len(letters) != n:
        raise GroupError("need exactly one letter per element (identity first)")
    identity_letter = letters[0]
    nontrivial = [i for i in range(n) if i != table.identity]
    elem_letter = {i: letters[k + 1] for k, i in enumerate(nontrivial)}
    letter_elem = {identity_letter.name: table.identity}
    for i, l in elem_letter.items():
        letter_elem[l.name] = i
    alphabet = letters
    # acceptor: start state accepting, one accepting state per nontrivial letter
    trans = {0: {l: 1 + k for k, l in enumerate(elem_letter.values())}}
    acceptor = prune(
        Dfa(tuple(alphabet), 1 + len(nontrivial), 0, frozenset(range(1 + len(nontrivial))), trans)
    )
    return VertexGroupStructure(
        kind="finite-table",
        name=name,
        alphabet=alphabet,
        identity_letter=identity_letter,
        acceptor=acceptor,
        unique=True,
        class_label=class_label or f"[{name}]",
        table=table,
        elem_letter=elem_letter,
        letter_elem=letter_elem,
    )


def make_free_group(rank: int, letters: Sequence[Letter] | None = None,
                    class_label: str | None = None, name: str = "") -> VertexGroupStructure:
    """Shortlex structure on the free group of the given rank: the acceptor
    accepts exactly the freely reduced words."""
    if rank < 1:
        raise GroupError("rank must be >= 1 (use a trivial finite group instead)")
    name = name or f"F{rank}"
    if letters is None:
        base = ["c"] if rank == 1 else [f"c{i}" for i in range(1, rank + 1)]
        built = [Letter("e", "e", vertex_tags=frozenset([name]))]
        for nm in base:
            built.append(Letter(nm, nm + "^-1", vertex_tags=frozenset([name])))
            built.append(Letter(nm + "^-1", nm, vertex_tags=frozenset([name])))
        letters = built
    letters = tuple(letters)
    if len(letters) != 1 + 2 * rank:
        raise GroupError("free structure needs identity plus generator pairs")
    identity_letter = letters[0]
    gens = letters[1:]
    # states: 0 = start, 1+i = last letter was gens[i]
    trans: dict[int, dict[Letter, int]] = {0: {g: 1 + i for i, g in enumerate(gens)}}
    for i, g in enumerate(gens):
        trans[1 + i] = {h: 1 + j for j, h in enumerate(gens) if h.name != g.inv_name}
    acceptor = prune(
        Dfa(tuple(letters), 1 + 2 * rank, 0, frozenset(range(1 + 2 * rank)), trans)
    )
    return VertexGroupStructure(
        kind="shortlex-free",
        name=name,
        alphabet=letters,
        identity_letter=identity_letter,
        acceptor=acceptor,
        unique=True,
        class_label=class_label or f"[{name}]",
        rank=rank,
    )


def relation_dfa(s: VertexGroupStructure, targets: Sequence[Sequence[Letter]],
                 extra_radius: int = 1) -> TwoTapeDfa:
    """Two-tape automaton for {(u, v) padded : u, v accepted,
    value(u)⁻¹·value(v) in targets}.

    The word-difference states are tracked inside a finite domain that the
    valid pairs never leave: the whole group for the finite kind, the ball
    of radius max(len(target)) + extra_radius for the free kind.
    """
    targets = [s.evaluate(t) for t in targets]
    target_set = set(targets)
    if s.kind == "finite-table":
        domain = set(tuple(w) for w in s.all_elements())
    else:
        radius = max([len(t) for t in targets] + [0]) + extra_radius
        domain = set()
        frontier = {()}
        domain.add(())
        for _ in range(radius):
            nxt = set()
            for w in frontier:
                for l in s.alphabet:
                    if l is s.identity_letter:
                        continue
                    w2 = s.multiply(w, (l,))
                    if w2 not in domain:
                        domain.add(w2)
                        nxt.add(w2)
            frontier = nxt
    syms = pair_symbols(s.acceptor.alphabet)
    acc = s.acceptor
    by_name = {l.name: l for l in s.alphabet}
    # state: (u-state or None when padded, v-state or None, difference word)
    start = (acc.start, acc.start, ())
    index: dict[tuple, int] = {start: 0}
    queue = [start]
    trans: dict[int, dict] = {}
    qi = 0
    while qi < len(queue):
        su, sv, d = queue[qi]
        qi += 1
        row = {}
        for x, y in syms:
            if x is PAD and su is not None and su not in acc.accepts:
                continue
            if y is PAD and sv is not None and sv not in acc.accepts:
                continue
            nu = su
            nv = sv
            nd = d
            if x is PAD:
                nu = None
            else:
                if su is None:
                    continue  # padding is suffix-only
                nu = acc.step(su, x)
                if nu is None:
                    continue
                nd = s.multiply(s.evaluate((by_name[x.inv_name],)), nd)
            if y is PAD:
                nv = None
            else:
                if sv is None:
                    continue
                nv = acc.step(sv, y)
                if nv is None:
                    continue
                nd = s.multiply(nd, s.evaluate((y,)))
            if nd not in domain:
                continue
            key = (nu, nv, nd)
            if key not in index:
                index[key] = len(index)
                queue.append(key)
            row[(x, y)] = index[key]
        if row:
            trans[index[(su, sv, d)]] = row
    accepts = set()
    for (su, sv, d), i in index.items():
        u_ok = su is None or su in acc.accepts
        v_ok = sv is None or sv in acc.accepts
        if u_ok and v_ok and d in target_set:
            accepts.add(i)
    dfa = prune(Dfa(syms, len(index), 0, frozenset(accepts), trans))
    return TwoTapeDfa(acc.alphabet, dfa)


@dataclass(frozen=True)
class SubgroupEmbedding:
    """A validated injection of a finite group into a vertex group, with
    images given as canonical words."""

    table: FiniteGroupTable
    images: tuple[Word, ...]  # indexed by table element

    def image(self, idx: int) -> Word:
        return self.images[idx]

    def image_values(self) -> tuple[Word, ...]:
        return self.images

    def element_of_value(self, w: Word) -> int | None:
        for i, im in enumerate(self.images):
            if im == w:
                return i
        return None


def finite_subgroup_embedding(s: VertexGroupStructure, table: FiniteGroupTable,
                              images: dict[str, Sequence[Letter]]) -> SubgroupEmbedding:
    """Validate element-name -> word as an injective homomorphism into ``s``
    (exhaustive over the finite group)."""
    ims: list[Word] = []
    for nm in table.names:
        if nm not in images:
            raise GroupError(f"no image for element {nm}")
        ims.append(s.evaluate(images[nm]))
    if ims[table.identity] != ():
        raise GroupError("identity must map to the identity")
    n = table.size()
    for i in range(n):
        for j in range(n):
            if s.multiply(ims[i], ims[j]) != ims[table.mul[i][j]]:
                raise GroupError(
                    f"not a homomorphism at {table.names[i]}·{table.names[j]}"
                )
    if len(set(ims)) != n:
        raise GroupError("not injective")
    return SubgroupEmbedding(table, tuple(ims))


def trivial_table() -> FiniteGroupTable:
    return FiniteGroupTable(("1",), ((0,),), 0)
