"""Y-graphs: finite labelled graphs that mimic the underlying graph of a
graph of groups and classify its asynchronous automatic structures.

A Y-graph carries, per vertex, a structure class and a concrete normal-form
language on the corresponding vertex group, and per edge a rational subset
of that group, represented by the sublanguage of vertex-language words
evaluating into it.  Compilation turns a Y-graph into a regular language
over the convenient alphabet by two independent routes: subdividing into a
generalized automaton and prohibiting the finitely many pinch factors, or
building the pinch-aware machine whose states remember the incoming edge
type.

Class labels are tokens (base name, translating edge-group element); the
concrete language chosen for every orbit member is the same vertex
language, which lies in the translated class because right/left translates
by bounded elements are equivalent structures.  With the partition cells

    S( (E', g) --E--> (E, f) )  =  d1'(g)^-1 · S_1 · d0(f)

a prefix whose path ends just after an (E, f)-crossing has value
h0·d1(f), h0 the coset representative with shortlex-least inner
syllables; this is what makes the orbit actions (E, f) -> (E, f·f0^-1)
respect both edge-label equivariance axioms exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .fsa import (
    Dfa,
    Gfsa,
    Letter,
    Nfa,
    determinize,
    difference,
    empty_dfa,
    enumerate_words,
    epsilon_dfa,
    equal_languages,
    expand_gfsa,
    intersect,
    minimize,
    prohibit_subwords,
    prune,
    shortlex_filter,
    union,
    word_set_dfa,
)
from .gog import BASE_EDGE, GraphOfGroups
from .vgroups import SubgroupEmbedding, VertexGroupStructure, Word


class YGraphError(ValueError):
    pass


@dataclass(frozen=True)
class ClassLabel:
    """Structure-class token: an opaque base name plus the canonical word of
    the translating edge-group element; compared syntactically."""

    base: str
    translate: Word = ()


@dataclass
class YVertex:
    id: str
    ytype: str
    label: ClassLabel
    lang: Dfa  # concrete normal-form language over the vertex alphabet


@dataclass
class YEdge:
    id: str
    src: str
    dst: str
    ytype: str  # oriented edge of Y
    label: Dfa  # sublanguage of the source vertex language


@dataclass
class YGraph:
    g: GraphOfGroups
    vertices: dict[str, YVertex]
    vertex_order: list[str]
    edges: dict[str, YEdge]
    edge_order: list[str]
    start: str
    # (vertex id, Y-edge type out of its image, edge-group element index)
    # -> sparse permutation of X-vertices (missing keys are identity)
    actions: dict[tuple[str, str, int], dict[str, str]] = field(default_factory=dict)

    def out_edges(self, vid: str, ytype: str | None = None) -> list[YEdge]:
        return [
            self.edges[eid]
            for eid in self.edge_order
            if self.edges[eid].src == vid
            and (ytype is None or self.edges[eid].ytype == ytype)
        ]

    def incoming_types(self, vid: str) -> set[str]:
        return {self.edges[eid].ytype for eid in self.edge_order if self.edges[eid].dst == vid}

    def action_image(self, v: str, ytype: str, f: int, vid: str) -> str:
        return self.actions.get((v, ytype, f), {}).get(vid, vid)

    def structure_at(self, vid: str) -> VertexGroupStructure:
        return self.g.structures[self.vertices[vid].ytype]


# ---------------------------------------------------------------------------
# Language helpers


def is_finite_language(d: Dfa) -> bool:
    d = prune(d)
    if not d.accepts:
        return True
    color: dict[int, int] = {}

    def visit(s: int) -> bool:
        color[s] = 1
        for t in d.trans.get(s, {}).values():
            if color.get(t) == 1:
                return False
            if color.get(t) is None and not visit(t):
                return False
        color[s] = 2
        return True

    return visit(d.start)


def all_words(d: Dfa, cap: int = 64) -> list[Word]:
    """Every word of a finite language (error when the language is infinite)."""
    if not is_finite_language(d):
        raise YGraphError("language is not finite")
    return [tuple(w) for w in enumerate_words(d, cap)]


def value_set(s: VertexGroupStructure, d: Dfa) -> frozenset[Word]:
    """Values (as canonical words) of a finite-language Dfa."""
    return frozenset(s.evaluate(w) for w in all_words(d))


def lang_of_values(s: VertexGroupStructure, values: Iterable[Word]) -> Dfa:
    """The sublanguage of canonical words with the given values."""
    return word_set_dfa(s.acceptor.alphabet, sorted(set(values), key=len))


def translate_label(g: GraphOfGroups, vertex: str, f_image: Sequence[Letter],
                    label: ClassLabel) -> ClassLabel:
    s = g.structures[vertex]
    return ClassLabel(label.base, s.multiply(s.evaluate(f_image), label.translate))


def labels_equivalent(g: GraphOfGroups, vertex: str, a: ClassLabel, b: ClassLabel) -> bool:
    """Syntactic class equality, except that translates collapse over finite
    vertex groups, whose structure set is a single point."""
    if a.base != b.base:
        return False
    if a.translate == b.translate:
        return True
    return g.structures[vertex].kind == "finite-table"


# ---------------------------------------------------------------------------
# Validation


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str) -> None:
        self.violations.append(msg)

    def __str__(self) -> str:
        return "\n".join(self.violations) if self.violations else "ok"


def _required_union(g: GraphOfGroups, X: YGraph, vid: str, ytype: str) -> tuple[Dfa, str]:
    """Required union of the E-type edge labels out of ``vid``: the whole
    vertex group, or the group minus the d0-image of E."""
    v = X.vertices[vid]
    s = g.structures[v.ytype]
    incoming = X.incoming_types(vid)
    full = s.acceptor
    if vid == X.start or any(t != g.edges[ytype].reverse for t in incoming):
        return full, "G_V"
    e = g.edges[ytype]
    image_words = sorted(set(e.emb0.image_values()), key=len)
    return difference(full, word_set_dfa(full.alphabet, image_words)), "G_V minus d0-image"


def validate_ygraph(g: GraphOfGroups, X: YGraph) -> ValidationReport:
    """Check every Y-graph axiom; the report lists each violation with a
    witness.  Partition checks are exact: exhaustive for finite vertex
    groups, automata identities for free ones."""
    rep = ValidationReport()
    seen = {X.start}
    stack = [X.start]
    while stack:
        v = stack.pop()
        for e in X.out_edges(v):
            if e.dst not in seen:
                seen.add(e.dst)
                stack.append(e.dst)
    for vid in X.vertex_order:
        if vid not in seen:
            rep.add(f"vertex {vid} unreachable from start")
    for eid in X.edge_order:
        e = X.edges[eid]
        ye = g.edges[e.ytype]
        if X.vertices[e.src].ytype != ye.v0 or X.vertices[e.dst].ytype != ye.v1:
            rep.add(f"edge {eid} does not respect incidence of {e.ytype}")
        if e.label.is_empty():
            rep.add(f"edge {eid} has empty label")
    for vid in X.vertex_order:
        v = X.vertices[vid]
        s = g.structures[v.ytype]
        for ytype in g.edges_out_of(v.ytype):
            ee = X.out_edges(vid, ytype)
            required, reqname = _required_union(g, X, vid, ytype)
            if s.kind == "finite-table":
                sets = [value_set(s, e.label) for e in ee]
                for i in range(len(ee)):
                    for j in range(i + 1, len(ee)):
                        inter = sets[i] & sets[j]
                        if inter:
                            w = next(iter(inter))
                            rep.add(
                                f"{vid}/{ytype}: labels of {ee[i].id} and {ee[j].id} "
                                f"overlap at {g.alphabet.format(w)}"
                            )
                got = frozenset().union(*sets) if sets else frozenset()
                want = value_set(s, required)
                if got != want:
                    w = next(iter(got ^ want))
                    rep.add(
                        f"{vid}/{ytype}: union of labels is not {reqname} "
                        f"(differs at {g.alphabet.format(w)})"
                    )
            else:
                for i in range(len(ee)):
                    for j in range(i + 1, len(ee)):
                        both = intersect(ee[i].label, ee[j].label)
                        if not both.is_empty():
                            w = enumerate_words(both, 8)[0]
                            rep.add(
                                f"{vid}/{ytype}: labels of {ee[i].id} and {ee[j].id} "
                                f"overlap at {g.alphabet.format(w)}"
                            )
                got_d = empty_dfa(s.acceptor.alphabet)
                for e in ee:
                    got_d = union(got_d, e.label)
                if not equal_languages(got_d, required):
                    rep.add(f"{vid}/{ytype}: union of labels is not {reqname}")
    _validate_actions(g, X, rep)
    return rep


def _validate_actions(g: GraphOfGroups, X: YGraph, rep: ValidationReport) -> None:
    for vid in X.vertex_order:
        v = X.vertices[vid]
        s = g.structures[v.ytype]
        for ytype in g.edges_out_of(v.ytype):
            ye = g.edges[ytype]
            heads = {e.dst for e in X.out_edges(vid, ytype)}
            perms = {
                f: {x: X.action_image(vid, ytype, f, x) for x in X.vertex_order}
                for f in range(ye.group.size())
            }
            ident = perms[ye.group.identity]
            if any(ident[x] != x for x in X.vertex_order):
                rep.add(f"action ({vid},{ytype}) does not fix the identity element")
            for f, perm in perms.items():
                if sorted(perm.values()) != sorted(X.vertex_order):
                    rep.add(f"action ({vid},{ytype},{ye.group.names[f]}) is not a permutation")
                    return
                moved = [x for x, y in perm.items() if x != y]
                for x in moved:
                    if x not in heads:
                        rep.add(
                            f"action ({vid},{ytype},{ye.group.names[f]}) moves {x}, "
                            f"which is not an {ytype}-head of {vid}"
                        )
            for f in range(ye.group.size()):
                for h in range(ye.group.size()):
                    fh = ye.group.mul[f][h]
                    for x in heads:
                        if perms[f][perms[h][x]] != perms[fh][x]:
                            rep.add(f"action at ({vid},{ytype}) is not a homomorphism at {x}")
            # label equivariance on heads: token translates compose; the
            # concrete languages are compared through their value sets
            for f in range(ye.group.size()):
                fw1 = ye.emb1.image(f)
                for x in heads:
                    y = perms[f][x]
                    lx, ly = X.vertices[x], X.vertices[y]
                    want = translate_label(g, lx.ytype, fw1, lx.label)
                    if not labels_equivalent(g, lx.ytype, ly.label, want):
                        rep.add(
                            f"label of {y} is not f·label({x}) for f={ye.group.names[f]}"
                        )
                        continue
                    sh = g.structures[lx.ytype]
                    if sh.kind == "finite-table":
                        fv = sh.evaluate(fw1)
                        vx = {sh.multiply(fv, w) for w in value_set(sh, lx.lang)}
                        if vx != set(value_set(sh, ly.lang)):
                            rep.add(f"language of {y} is not the f-translate of {x}")
                    elif f != ye.group.identity and not equal_languages(lx.lang, ly.lang):
                        rep.add(f"language of {y} is not the f-translate of {x}")
            # S_{f e} = S_e f^-1 for e out of vid; S_{f e} = f S_e for e out
            # of a moved head
            for f in range(ye.group.size()):
                if f == ye.group.identity or s.kind != "finite-table":
                    continue
                fw0_inv = s.invert(s.evaluate(ye.emb0.image(f)))
                for e in X.out_edges(vid, ytype):
                    want = {s.multiply(w, fw0_inv) for w in value_set(s, e.label)}
                    mates = [e2 for e2 in X.out_edges(vid, ytype) if e2.dst == perms[f][e.dst]]
                    if not any(value_set(s, e2.label) == want for e2 in mates):
                        rep.add(
                            f"no {ytype}-edge out of {vid} carries S_e·f^-1 for "
                            f"e={e.id}, f={ye.group.names[f]}"
                        )
                for x in heads:
                    y = perms[f][x]
                    if y == x:
                        continue
                    sh = g.structures[X.vertices[x].ytype]
                    if sh.kind != "finite-table":
                        continue
                    fw1v = sh.evaluate(ye.emb1.image(f))
                    for e in X.out_edges(x):
                        want = {sh.multiply(fw1v, w) for w in value_set(sh, e.label)}
                        mates = [
                            e2
                            for e2 in X.out_edges(y, e.ytype)
                            if e2.dst == perms[f].get(e.dst, e.dst)
                        ]
                        if not any(value_set(sh, e2.label) == want for e2 in mates):
                            rep.add(
                                f"no {e.ytype}-edge out of {y} carries f·S_e for "
                                f"e={e.id}, f={ye.group.names[f]}"
                            )


# ---------------------------------------------------------------------------
# Shortlex coset partition (Lemma-style rational partition by right cosets)


def shortlex_coset_partition(s: VertexGroupStructure,
                             emb: SubgroupEmbedding) -> list[tuple[int, Dfa]]:
    """Cells S_f = S_1·f for f in the subgroup, where S_1 collects the values
    of the shortlex-least acceptor words per right coset.  Cells partition
    the group and the right action permutes them."""
    if not s.unique:
        raise YGraphError("coset partition needs a structure with uniqueness")
    relation = s.coset_relation([emb.image(i) for i in range(emb.table.size())])
    least = shortlex_filter(s.acceptor, relation)
    if s.kind == "finite-table":
        base = value_set(s, least)
        out = []
        for f in range(emb.table.size()):
            fw = s.evaluate(emb.image(f))
            cell = {s.multiply(w, fw) for w in base}
            out.append((f, lang_of_values(s, cell)))
        return out
    if emb.table.size() != 1:
        raise YGraphError("free vertex groups admit only the trivial edge group")
    return [(emb.table.identity, minimize(least))]


# ---------------------------------------------------------------------------
# Construction of Y-graphs


def default_ygraph(g: GraphOfGroups) -> YGraph:
    """The special Y-graph with one vertex per (edge E of the extended
    graph, edge-group element f), start at the base-edge vertex.  Labels are
    the d1(f^-1)-translate tokens of the vertex structures; edge labels are
    the translated shortlex partition cells."""
    vertices: dict[str, YVertex] = {}
    vertex_order: list[str] = []
    edges: dict[str, YEdge] = {}
    edge_order: list[str] = []
    actions: dict[tuple[str, str, int], dict[str, str]] = {}

    def vid(ename: str, f: int) -> str:
        fname = "1" if ename == BASE_EDGE else g.edges[ename].group.names[f]
        return f"{ename}|{fname}"

    for ename in g.edges_hat():
        if ename == BASE_EDGE:
            V, fs = g.base, [0]
        else:
            e = g.edges[ename]
            V, fs = e.v1, list(range(e.group.size()))
        s = g.structures[V]
        for f in fs:
            tr: Word = ()
            if ename != BASE_EDGE:
                e = g.edges[ename]
                tr = s.evaluate(e.emb1.image(e.group.inv[f]))
            vertices[vid(ename, f)] = YVertex(
                vid(ename, f), V, ClassLabel(s.class_label, tr), s.acceptor
            )
            vertex_order.append(vid(ename, f))

    cells: dict[tuple[str, str], list[tuple[int, Dfa]]] = {}
    for V in g.vertices():
        s = g.structures[V]
        for ytype in g.edges_out_of(V):
            cells[(V, ytype)] = shortlex_coset_partition(s, g.edges[ytype].emb0)

    count = 0
    for src_ename in g.edges_hat():
        e_in = None if src_ename == BASE_EDGE else g.edges[src_ename]
        V = g.base if e_in is None else e_in.v1
        s = g.structures[V]
        fs_src = [0] if e_in is None else list(range(e_in.group.size()))
        for fsrc in fs_src:
            src = vid(src_ename, fsrc)
            shift = vertices[src].label.translate  # value of d1'(fsrc^-1)
            for ytype in g.edges_out_of(V):
                e_out = g.edges[ytype]
                backtrack = e_in is not None and ytype == e_in.reverse
                removed = (
                    frozenset(s.evaluate(w) for w in e_out.emb0.image_values())
                    if backtrack
                    else frozenset()
                )
                for fdst, cell in cells[(V, ytype)]:
                    if s.kind == "finite-table":
                        # the cell already carries the right f-translation
                        vals = frozenset(
                            s.multiply(shift, w) for w in value_set(s, cell)
                        ) - removed
                        if not vals:
                            continue
                        label = lang_of_values(s, vals)
                    else:
                        label = cell
                        if removed or backtrack:
                            label = difference(label, epsilon_dfa(label.alphabet))
                        if label.is_empty():
                            continue
                    eid = f"x{count}"
                    count += 1
                    edges[eid] = YEdge(eid, src, vid(ytype, fdst), ytype, label)
                    edge_order.append(eid)
                # orbit action on the heads: f0 sends (E, f) to (E, f·f0^-1)
                for f0 in range(e_out.group.size()):
                    if f0 == e_out.group.identity:
                        continue
                    inv0 = e_out.group.inv[f0]
                    perm = {
                        vid(ytype, fd): vid(ytype, e_out.group.mul[fd][inv0])
                        for fd in range(e_out.group.size())
                    }
                    actions[(src, ytype, f0)] = perm
    return YGraph(g, vertices, vertex_order, edges, edge_order, vid(BASE_EDGE, 0), actions)


def biautomatic_ygraph(g: GraphOfGroups) -> YGraph:
    """The Y-graph isomorphic to the underlying graph itself: one vertex per
    vertex of Y, full permitted sets on edges, trivial orbit actions.  The
    caller asserts biautomaticity of the vertex structures; the translate
    fellow-traveller property is verified empirically downstream."""
    vertices: dict[str, YVertex] = {}
    vertex_order: list[str] = []
    for V in g.vertices():
        s = g.structures[V]
        vertices[V] = YVertex(V, V, ClassLabel(s.class_label), s.acceptor)
        vertex_order.append(V)
    edges: dict[str, YEdge] = {}
    edge_order: list[str] = []
    incoming: dict[str, set[str]] = {V: set() for V in g.vertices()}
    for ename in g.edge_order:
        incoming[g.edges[ename].v1].add(ename)
    for ename in g.edge_order:
        e = g.edges[ename]
        V = e.v0
        s = g.structures[V]
        full = V == g.base or any(t != e.reverse for t in incoming[V])
        label = s.acceptor
        if not full:
            image_words = sorted(set(e.emb0.image_values()), key=len)
            label = difference(label, word_set_dfa(label.alphabet, image_words))
        if label.is_empty():
            continue
        edges[ename] = YEdge(ename, V, e.v1, ename, label)
        edge_order.append(ename)
    return YGraph(g, vertices, vertex_order, edges, edge_order, g.base, {})


# ---------------------------------------------------------------------------
# Compilation to regular languages


VIS_PREFIX = "@r:"


def visible_letters(g: GraphOfGroups) -> dict[str, Letter]:
    """One crossing marker per oriented edge: the stable letter for non-tree
    edges, a synthetic r-letter for tree edges."""
    out: dict[str, Letter] = {}
    for ename in g.edge_order:
        e = g.edges[ename]
        out[ename] = e.stable if e.stable is not None else Letter(
            VIS_PREFIX + ename, VIS_PREFIX + e.reverse
        )
    return out


def visible_alphabet(g: GraphOfGroups) -> tuple[Letter, ...]:
    vl = visible_letters(g)
    extra = [vl[ename] for ename in g.edge_order if g.edges[ename].stable is None]
    return tuple(g.alphabet.letters) + tuple(extra)


def _widen(d: Dfa, alphabet: tuple) -> Dfa:
    """Reinterpret a Dfa over a larger alphabet (transitions unchanged)."""
    return Dfa(alphabet, d.n, d.start, d.accepts, {s: dict(r) for s, r in d.trans.items()})


def _subdivision_gfsa(X: YGraph, alphabet: tuple,
                      crossing: dict[str, Letter | None]) -> Gfsa:
    index = {v: i for i, v in enumerate(X.vertex_order)}
    n = len(index)
    edges: list[tuple[int, Dfa, int]] = []
    for eid in X.edge_order:
        e = X.edges[eid]
        mid = n
        n += 1
        edges.append((index[e.src], _widen(e.label, alphabet), mid))
        cl = crossing[e.ytype]
        second = word_set_dfa(alphabet, [(cl,)]) if cl is not None else epsilon_dfa(alphabet)
        edges.append((mid, second, index[e.dst]))
    return Gfsa(alphabet, n, frozenset([index[X.start]]), frozenset(range(n)), tuple(edges))


def language_gfsa(X: YGraph) -> Gfsa:
    """The subdivision machine over the convenient alphabet: each Y-graph
    edge becomes its segment label followed by the crossing ({stable
    letter}, or {ε} for tree edges); all states accept.  Its language, after
    prohibiting the pinch factors, is the structure language."""
    g = X.g
    crossing: dict[str, Letter | None] = {
        ename: g.edges[ename].stable for ename in g.edge_order
    }
    return _subdivision_gfsa(X, tuple(g.alphabet.letters), crossing)


def pinch_factors(g: GraphOfGroups, crossing: dict[str, Letter]) -> list[tuple[Letter, ...]]:
    """Prohibited substrings s_E u s_{E^-1} with u nothing or a single letter
    valuing into the d1-image of E."""
    bad: list[tuple[Letter, ...]] = []
    for ename in g.edge_order:
        e = g.edges[ename]
        s_in, s_out = crossing[ename], crossing[e.reverse]
        bad.append((s_in, s_out))
        s1 = g.structures[e.v1]
        for f in range(e.group.size()):
            if f == e.group.identity:
                continue
            w = s1.evaluate(e.emb1.image(f))
            if len(w) == 1:
                bad.append((s_in, w[0], s_out))
    return bad


def visible_dfa(X: YGraph) -> Dfa:
    """Deterministic machine for the crossing-decorated structure language:
    tree-edge crossings are explicit r-letters, so edge-path decompositions
    are visible as machine paths."""
    g = X.g
    vl = visible_letters(g)
    gf = _subdivision_gfsa(X, visible_alphabet(g), dict(vl))
    raw = determinize(expand_gfsa(gf))
    return prohibit_subwords(raw, pinch_factors(g, vl))


def erase_visible(d: Dfa, g: GraphOfGroups) -> Dfa:
    """Erase the synthetic r-letters (tree crossings become invisible)."""
    A = tuple(g.alphabet.letters)
    keep = set(A)
    trans: dict[int, dict] = {}
    for s, row in d.trans.items():
        for sym, t in row.items():
            r = trans.setdefault(s, {})
            key = sym if sym in keep else None
            r[key] = r.get(key, frozenset()) | frozenset([t])
    return determinize(Nfa(A, d.n, frozenset([d.start]), d.accepts, trans))


@dataclass
class StructureHandle:
    """A compiled structure language together with its Y-graph of origin and
    the crossing-decorated deterministic machine."""

    dfa: Dfa  # minimized, over the convenient alphabet
    visible: Dfa  # over the r-decorated alphabet
    ygraph: YGraph
    origin: str = "language"

    @property
    def g(self) -> GraphOfGroups:
        return self.ygraph.g


def language_dfa(X: YGraph) -> StructureHandle:
    vis = visible_dfa(X)
    dfa = minimize(erase_visible(vis, X.g))
    if dfa.is_empty():
        raise YGraphError("structure language is empty")
    return StructureHandle(dfa, vis, X, "language")


def _pinch_aware_gfsa(X: YGraph, *, visible: bool, least_rep: bool,
                      strip_finals: bool, start: str | None = None) -> Gfsa:
    """The machine of the closing compilation remark: states are (vertex,
    incoming Y-type); backtracking labels drop edge-group-image values; a
    final transition reads the last syllable.  With ``least_rep`` the inner
    syllables are restricted to shortlex coset representatives; with
    ``strip_finals`` final syllables that would leave a strippable tree-edge
    tail are dropped, making the language biject to the group."""
    g = X.g
    vl = visible_letters(g)
    A = visible_alphabet(g) if visible else tuple(g.alphabet.letters)
    crossing: dict[str, Letter | None] = {
        ename: (vl[ename] if visible or g.edges[ename].stable is not None else None)
        for ename in g.edge_order
    }
    start_vid = start if start is not None else X.start
    states: dict[tuple[str, str | None], int] = {}
    order: list[tuple[str, str | None]] = []

    def state(vid: str, in_type: str | None) -> int:
        key = (vid, in_type)
        if key not in states:
            states[key] = len(order)
            order.append(key)
        return states[key]

    least_cache: dict[tuple[str, str], Dfa] = {}

    def least_lang(vid: str, ytype: str) -> Dfa:
        key = (vid, ytype)
        if key not in least_cache:
            s = X.structure_at(vid)
            e = g.edges[ytype]
            rel = s.coset_relation([e.emb0.image(i) for i in range(e.group.size())])
            least_cache[key] = shortlex_filter(X.vertices[vid].lang, rel)
        return least_cache[key]

    state(start_vid, None)
    queue: list[tuple[str, str | None]] = [(start_vid, None)]
    seen = {(start_vid, None)}
    edges: list[tuple[int, Dfa, int]] = []
    finals: list[tuple[int, Dfa]] = []
    while queue:
        vid_, in_type = queue.pop(0)
        src = state(vid_, in_type)
        v = X.vertices[vid_]
        s = g.structures[v.ytype]
        for e in X.out_edges(vid_):
            lab = e.label
            if in_type is not None and e.ytype == g.edges[in_type].reverse:
                ye_in = g.edges[in_type]
                image_words = sorted(
                    {s.evaluate(w) for w in ye_in.emb1.image_values()}, key=len
                )
                lab = difference(lab, word_set_dfa(lab.alphabet, image_words))
            if least_rep:
                lab = intersect(lab, least_lang(vid_, e.ytype))
            if lab.is_empty():
                continue
            lab = _widen(lab, A)
            cl = crossing[e.ytype]
            if cl is not None:
                lab = _concat_letter(lab, cl)
            key = (e.dst, e.ytype)
            if key not in seen:
                seen.add(key)
                queue.append(key)
            edges.append((src, lab, state(e.dst, e.ytype)))
        # final segments range over the union of the raw outgoing labels (a
        # word may end inside a subdivided edge, before any crossing), plus ε
        if strip_finals:
            final = v.lang
            if in_type is not None and g.edges[in_type].in_tree:
                ye_in = g.edges[in_type]
                image_words = sorted(
                    {s.evaluate(w) for w in ye_in.emb1.image_values()}, key=len
                )
                final = difference(final, word_set_dfa(final.alphabet, image_words))
        else:
            final = empty_dfa(s.acceptor.alphabet)
            for e in X.out_edges(vid_):
                final = union(final, e.label)
        final = union(final, epsilon_dfa(final.alphabet))
        finals.append((src, _widen(final, A)))
    fin = len(order)
    all_edges = tuple(edges) + tuple((src, lab, fin) for src, lab in finals)
    return Gfsa(A, fin + 1, frozenset([states[(start_vid, None)]]), frozenset([fin]), all_edges)


def _concat_letter(d: Dfa, letter: Letter) -> Dfa:
    trans = {s: dict(row) for s, row in d.trans.items()}
    new = d.n
    for s in list(d.accepts):
        row = trans.setdefault(s, {})
        if letter in row:
            raise YGraphError("crossing letter collides with label language")
        row[letter] = new
    return prune(Dfa(d.alphabet, d.n + 1, d.start, frozenset([new]), trans))


def bx_dfa(X: YGraph) -> Dfa:
    """Compilation by the pinch-aware route (no prohibition step); must be
    language-equal to :func:`language_dfa`'s result."""
    gf = _pinch_aware_gfsa(X, visible=False, least_rep=False, strip_finals=False)
    return minimize(determinize(expand_gfsa(gf)))


def synchronize(X: YGraph) -> StructureHandle:
    """Restrict every non-final syllable to its shortlex coset representative
    and drop strippable final syllables; the result bijects to the group
    when the vertex structures have uniqueness."""
    for vid in X.vertex_order:
        if not X.structure_at(vid).unique:
            raise YGraphError("synchronize requires uniqueness structures")
    gf = _pinch_aware_gfsa(X, visible=False, least_rep=True, strip_finals=True)
    dfa = minimize(determinize(expand_gfsa(gf)))
    gfv = _pinch_aware_gfsa(X, visible=True, least_rep=True, strip_finals=True)
    vis = prune(determinize(expand_gfsa(gfv)))
    return StructureHandle(dfa, vis, X, "synchronize")


# ---------------------------------------------------------------------------
# Suffix languages, collapse, split


def suffix_language(X: YGraph, vid: str) -> Dfa:
    """Words labelling paths starting at a vertex (the first crossing has no
    incoming context)."""
    gf = _pinch_aware_gfsa(X, visible=False, least_rep=False, strip_finals=False,
                           start=vid)
    return minimize(determinize(expand_gfsa(gf)))


@dataclass
class CollapseResult:
    ok: bool
    ygraph: YGraph | None
    witness: tuple[tuple, tuple] | None
    classes: list[list[str]]
    scope: dict


def collapse(X: YGraph, v: str, vprime: str, K: int, maxlen: int) -> CollapseResult:
    """Identify two vertices of the same Y-type equivariantly.  Every pair of
    vertices forced together must have suffix languages whose union passes
    the asynchronous fellow-traveller test to (K, maxlen); on failure the
    witness pair of words is returned.  Success is certified only to the
    stated bounds."""
    from .deploy import equivalent_upto

    g = X.g
    if X.vertices[v].ytype != X.vertices[vprime].ytype:
        raise YGraphError("collapse requires vertices of the same Y-type")
    parent = {x: x for x in X.vertex_order}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def join(a: str, b: str) -> bool:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        ra, rb = sorted((ra, rb))
        parent[rb] = ra
        return True

    join(v, vprime)
    changed = True
    while changed:
        changed = False
        for (_, _, _), perm in X.actions.items():
            for x in X.vertex_order:
                for y in X.vertex_order:
                    if x < y and find(x) == find(y):
                        if join(perm.get(x, x), perm.get(y, y)):
                            changed = True
    classes: dict[str, list[str]] = {}
    for x in X.vertex_order:
        classes.setdefault(find(x), []).append(x)
    nontrivial = [c for c in classes.values() if len(c) > 1]
    scope = {"K": K, "maxlen": maxlen}
    for cls in nontrivial:
        if len({X.vertices[x].ytype for x in cls}) != 1:
            raise YGraphError("equivariant closure merges different Y-types")
        suf = {x: suffix_language(X, x) for x in cls}
        for i in range(len(cls)):
            for j in range(i + 1, len(cls)):
                verdict = equivalent_upto(g, suf[cls[i]], suf[cls[j]], maxlen, K)
                if not verdict.ok:
                    return CollapseResult(False, None, verdict.witness, nontrivial, scope)
    vertices: dict[str, YVertex] = {}
    vertex_order: list[str] = []
    for root in sorted(classes):
        base = X.vertices[root]
        lang = base.lang
        for x in classes[root]:
            lang = union(lang, X.vertices[x].lang)
        vertices[root] = YVertex(root, base.ytype, base.label, minimize(lang))
        vertex_order.append(root)
    merged: dict[tuple[str, str, str], Dfa] = {}
    order: list[tuple[str, str, str]] = []
    for eid in X.edge_order:
        e = X.edges[eid]
        key = (find(e.src), find(e.dst), e.ytype)
        if key not in merged:
            merged[key] = e.label
            order.append(key)
        else:
            merged[key] = union(merged[key], e.label)
    edges: dict[str, YEdge] = {}
    edge_order: list[str] = []
    for i, (src, dst, ytype) in enumerate(order):
        eid = f"c{i}"
        edges[eid] = YEdge(eid, src, dst, ytype, minimize(merged[(src, dst, ytype)]))
        edge_order.append(eid)
    actions: dict[tuple[str, str, int], dict[str, str]] = {}
    for (av, aty, f), perm in X.actions.items():
        quo = {find(x): find(y) for x, y in perm.items() if find(x) != find(y)}
        if quo:
            key = (find(av), aty, f)
            if key in actions and actions[key] != quo:
                raise YGraphError("actions do not descend to the quotient")
            actions[key] = quo
    Xq = YGraph(g, vertices, vertex_order, edges, edge_order, find(X.start), actions)
    return CollapseResult(True, Xq, None, nontrivial, scope)


def _label_has_value(X: YGraph, e: YEdge, value: Word) -> bool:
    s = X.structure_at(e.src)
    if s.kind == "finite-table":
        return value in value_set(s, e.label)
    return e.label.accepts_word(value)


def follow_path(X: YGraph, segments: Sequence[Word], path: Sequence[str]) -> list[YEdge]:
    """The X-edges traversed when reading the given decomposition; each
    segment value must lie in exactly one cell."""
    g = X.g
    cur = X.start
    out: list[YEdge] = []
    for i, ename in enumerate(path):
        s = g.structures[X.vertices[cur].ytype]
        seg = s.evaluate(segments[i])
        matches = [e for e in X.out_edges(cur, ename) if _label_has_value(X, e, seg)]
        if len(matches) != 1:
            raise YGraphError(
                f"segment {g.alphabet.format(seg)} lies in {len(matches)} "
                f"{ename}-cells at {cur}"
            )
        out.append(matches[0])
        cur = matches[0].dst
    return out


def split_for_element(X: YGraph, u: Sequence[Letter] | str, target_base: str,
                      target_lang: Dfa) -> YGraph:
    """Prescribe the structure induced on the conjugate determined by an
    accepted prefix ``u`` ending with an edge crossing: the value of the
    penultimate segment is deleted from its cell and rerouted, orbit-wide,
    to fresh vertices carrying the target structure."""
    from .gog import decompose_word

    g = X.g
    if isinstance(u, str):
        u = g.word(u)
    dec = decompose_word(g, u)
    if dec is None or not dec[1]:
        raise YGraphError("u must decompose with at least one edge crossing")
    segments, path = dec
    visited = [g.base] + [g.edges[e].v1 for e in path]
    if len(set(visited)) != len(visited):
        raise YGraphError("the Y-path of u is not embedded")
    xedges = follow_path(X, segments, path)
    e_last = xedges[-1]
    E = e_last.ytype
    ye = g.edges[E]
    sW = g.structures[ye.v0]
    sV = g.structures[ye.v1]
    if sW.kind != "finite-table" and ye.group.size() != 1:
        raise YGraphError("split at a free vertex needs a trivial edge group")
    useg = sW.evaluate(segments[len(path) - 1])
    if not _label_has_value(X, e_last, useg):
        raise YGraphError("u's value is not in the final edge label")

    new_vertices = dict(X.vertices)
    new_vertex_order = list(X.vertex_order)
    new_edges = dict(X.edges)
    new_edge_order = list(X.edge_order)
    new_actions = {k: dict(v) for k, v in X.actions.items()}

    fresh: dict[int, str] = {}
    for f in range(ye.group.size()):
        nid = f"split{len(new_vertex_order)}|{ye.group.names[f]}"
        tr = sV.evaluate(ye.emb1.image(ye.group.inv[f]))
        new_vertices[nid] = YVertex(nid, ye.v1, ClassLabel(target_base, tr), target_lang)
        new_vertex_order.append(nid)
        fresh[f] = nid
    # the fresh vertices duplicate the outgoing edges of the displaced head
    head = e_last.dst
    counter = 0
    for f, nid in fresh.items():
        for e in X.out_edges(head):
            eid = f"s{counter}"
            counter += 1
            new_edges[eid] = YEdge(eid, nid, e.dst, e.ytype, e.label)
            new_edge_order.append(eid)
    # reroute the deleted values at the whole orbit of the junction vertex
    w_vid = e_last.src
    if len(path) >= 2:
        e_prev = g.edges[path[-2]]
        prev_tail = xedges[-2].src
        w_orbit = {
            X.action_image(prev_tail, path[-2], f, w_vid)
            for f in range(e_prev.group.size())
        }
    else:
        w_orbit = {w_vid}
    for wv in sorted(w_orbit):
        # the orbit translate of u's segment value at this copy
        tr_w = sW.evaluate(X.vertices[w_vid].label.translate)
        tr_v = sW.evaluate(X.vertices[wv].label.translate)
        base_here = sW.multiply(tr_v, sW.multiply(sW.invert(tr_w), useg))
        for f in range(ye.group.size()):
            val = sW.multiply(base_here, sW.evaluate(ye.emb0.image(f)))
            hit = None
            for e in list(X.out_edges(wv, E)):
                if e.id in new_edges and _label_has_value(X, new_edges[e.id], val):
                    hit = e.id
                    break
            if hit is None:
                raise YGraphError("orbit translate of u's value is not in any cell")
            cur = new_edges[hit]
            vs = value_set(sW, cur.label) - {val}
            if vs:
                new_edges[hit] = YEdge(cur.id, cur.src, cur.dst, cur.ytype,
                                       lang_of_values(sW, vs))
            else:
                del new_edges[hit]
                new_edge_order.remove(hit)
            eid = f"s{counter}"
            counter += 1
            new_edges[eid] = YEdge(eid, wv, fresh[f], E, lang_of_values(sW, [val]))
            new_edge_order.append(eid)
            for f0 in range(ye.group.size()):
                if f0 == ye.group.identity:
                    continue
                perm = new_actions.setdefault((wv, E, f0), {})
                inv0 = ye.group.inv[f0]
                perm[fresh[f]] = fresh[ye.group.mul[f][inv0]]
    return YGraph(X.g, new_vertices, new_vertex_order, new_edges, new_edge_order,
                  X.start, new_actions)


# ---------------------------------------------------------------------------
# File format and DOT export


def write_ygraph(X: YGraph) -> tuple[str, dict[str, str]]:
    """Serialize as the line-oriented format plus one fsa file per label.
    Returns (main text, {fsa file name: fsa text})."""
    from .fsa import write_fsa

    files: dict[str, str] = {}
    lines: list[str] = []
    for vid in X.vertex_order:
        v = X.vertices[vid]
        fname = f"v_{_safe(vid)}.fsa"
        files[fname] = write_fsa(v.lang)
        tr = X.g.alphabet.format(v.label.translate) if v.label.translate else "-"
        lines.append(
            f"yvertex {vid} type={v.ytype} class={v.label.base} translate={tr} lang={fname}"
        )
    for eid in X.edge_order:
        e = X.edges[eid]
        fname = f"e_{_safe(eid)}.fsa"
        files[fname] = write_fsa(e.label)
        lines.append(f"yedge {eid} {e.src} {e.dst} type={e.ytype} set={fname}")
    lines.append(f"ystart {X.start}")
    for (v, ytype, f), perm in sorted(X.actions.items()):
        cyc = " ".join(f"{a}>{b}" for a, b in sorted(perm.items()))
        lines.append(
            f"yaction vertex={v} edge-type={ytype} "
            f"f={X.g.edges[ytype].group.names[f]} perm={cyc}"
        )
    return "\n".join(lines) + "\n", files


def _safe(s: str) -> str:
    return "".join(c if c.isalnum() else "_" for c in s)


def read_ygraph(g: GraphOfGroups, text: str, files: dict[str, str]) -> YGraph:
    from .fsa import read_fsa

    vertices: dict[str, YVertex] = {}
    vertex_order: list[str] = []
    edges: dict[str, YEdge] = {}
    edge_order: list[str] = []
    start: str | None = None
    actions: dict[tuple[str, str, int], dict[str, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        kind = toks[0]
        if kind == "yvertex":
            vid = toks[1]
            kv = dict(t.split("=", 1) for t in toks[2:])
            s = g.structures[kv["type"]]
            lang = read_fsa(files[kv["lang"]], s.acceptor.alphabet)
            assert isinstance(lang, Dfa)
            tr: Word = ()
            if kv.get("translate", "-") != "-":
                tr = tuple(g.alphabet.word(kv["translate"]))
            vertices[vid] = YVertex(vid, kv["type"], ClassLabel(kv["class"], tr), lang)
            vertex_order.append(vid)
        elif kind == "yedge":
            eid, src, dst = toks[1], toks[2], toks[3]
            kv = dict(t.split("=", 1) for t in toks[4:])
            s = g.structures[g.edges[kv["type"]].v0]
            label = read_fsa(files[kv["set"]], s.acceptor.alphabet)
            assert isinstance(label, Dfa)
            edges[eid] = YEdge(eid, src, dst, kv["type"], label)
            edge_order.append(eid)
        elif kind == "ystart":
            start = toks[1]
        elif kind == "yaction":
            kv = dict(t.split("=", 1) for t in toks[1:])
            ye = g.edges[kv["edge-type"]]
            f = list(ye.group.names).index(kv["f"])
            perm = dict(pair.split(">") for pair in kv["perm"].split())
            actions[(kv["vertex"], kv["edge-type"], f)] = perm
        else:
            raise YGraphError(f"line {lineno}: unknown directive {kind}")
    if start is None:
        raise YGraphError("missing ystart")
    return YGraph(g, vertices, vertex_order, edges, edge_order, start, actions)


_COLORS = ["lightblue", "lightsalmon", "palegreen", "plum", "khaki", "lightgray"]


def ygraph_dot(X: YGraph) -> str:
    """DOT rendering with Y-types as colors."""
    g = X.g
    color = {V: _COLORS[i % len(_COLORS)] for i, V in enumerate(g.vertices())}
    lines = ["digraph ygraph {"]
    for vid in X.vertex_order:
        v = X.vertices[vid]
        shape = "doublecircle" if vid == X.start else "ellipse"
        label = f"{vid}\\n{v.ytype}:{v.label.base}"
        if v.label.translate:
            label += "." + g.alphabet.format(v.label.translate)
        lines.append(
            f'  "{vid}" [label="{label}", style=filled, '
            f"fillcolor={color[v.ytype]}, shape={shape}];"
        )
    for eid in X.edge_order:
        e = X.edges[eid]
        words = enumerate_words(e.label, 2)
        txt = ",".join(g.alphabet.format(w) for w in words[:4])
        if len(words) > 4:
            txt += ",..."
        lines.append(f'  "{e.src}" -> "{e.dst}" [label="{e.ytype}: {txt}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
