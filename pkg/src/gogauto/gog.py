"""Graphs of groups with finite edge groups: the convenient alphabet, the
canonical normal form, the word problem and the Cayley metric of the
fundamental group.

The canonical normal form of a group element is the alternating sequence
(g0, E1, g1, ..., Em, gm) that is pinch-free, maximally stripped of
terminal tree-edge segments whose syllable lies in the edge-group image,
and whose inner syllables are the shortlex-least representatives of their
right edge-group cosets. Two words are equal in the group iff their
canonical forms are identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .fsa import Alphabet, Letter
from .vgroups import (
    FiniteGroupTable,
    GroupError,
    SubgroupEmbedding,
    VertexGroupStructure,
    Word,
    finite_subgroup_embedding,
    make_finite_group,
    make_free_group,
)

BASE_EDGE = "@E0"


class SpecError(ValueError):
    """Spec-file problem; carries a line number when one is known."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


# ---------------------------------------------------------------------------
# Raw definitions (what a spec file declares)


@dataclass
class GroupDef:
    name: str
    kind: str  # "finite" | "free"
    table: FiniteGroupTable | None = None
    rank: int = 0


@dataclass
class EdgeDef:
    name: str
    v0: str
    v1: str
    group: str
    d0: dict[str, list[str]]
    d1: dict[str, list[str]]
    tree: bool


@dataclass
class SpecDefs:
    groups: dict[str, GroupDef] = field(default_factory=dict)
    group_order: list[str] = field(default_factory=list)
    vertices: dict[str, str] = field(default_factory=dict)  # vertex -> group name
    vertex_order: list[str] = field(default_factory=list)
    edges: dict[str, EdgeDef] = field(default_factory=dict)
    edge_order: list[str] = field(default_factory=list)
    base: str | None = None


@dataclass
class OrientedEdge:
    name: str
    reverse: str
    v0: str
    v1: str
    group: FiniteGroupTable
    emb0: SubgroupEmbedding
    emb1: SubgroupEmbedding
    in_tree: bool
    stable: Letter | None  # None exactly for tree edges and the base edge


@dataclass(frozen=True)
class NormalForm:
    """Canonical representative (g0, E1, g1, ..., Em, gm); ``syllables`` has
    one more entry than ``edges``."""

    syllables: tuple[Word, ...]
    edges: tuple[str, ...]

    def __post_init__(self):
        assert len(self.syllables) == len(self.edges) + 1

    @property
    def m(self) -> int:
        return len(self.edges)


# ---------------------------------------------------------------------------
# Spec parsing


def _parse_block(body: str, line: int) -> dict[str, str]:
    out: dict[str, str] = {}
    for part in body.split(";"):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise SpecError(f"expected key=value in {part!r}", line)
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _split_fields(rest: str, line: int) -> dict[str, str]:
    """Split ``k=v`` fields where v may be a {...} block."""
    out: dict[str, str] = {}
    i = 0
    while i < len(rest):
        if rest[i].isspace():
            i += 1
            continue
        j = rest.index("=", i)
        key = rest[i:j].strip()
        if j + 1 < len(rest) and rest[j + 1] == "{":
            k = rest.index("}", j + 1)
            out[key] = rest[j + 2 : k]
            i = k + 1
        else:
            k = j + 1
            while k < len(rest) and not rest[k].isspace():
                k += 1
            out[key] = rest[j + 1 : k]
            i = k
    return out


def parse_defs(text: str) -> SpecDefs:
    defs = SpecDefs()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split(None, 1)
        head = tokens[0]
        rest = tokens[1] if len(tokens) > 1 else ""
        if head == "group":
            name, rest = (rest.split(None, 1) + [""])[:2]
            kind, rest = (rest.split(None, 1) + [""])[:2]
            if not name or kind not in ("finite", "free"):
                raise SpecError("group <name> finite|free { ... }", lineno)
            if name in defs.groups:
                raise SpecError(f"duplicate group {name}", lineno)
            body = rest.strip()
            if not (body.startswith("{") and body.endswith("}")):
                raise SpecError("missing { ... } block", lineno)
            fields = _parse_block(body[1:-1], lineno)
            if kind == "finite":
                if "elements" not in fields or "table" not in fields:
                    raise SpecError("finite group needs elements= and table=", lineno)
                names = [s.strip() for s in fields["elements"].split(",")]
                rows = [s.strip() for s in fields["table"].split(",")]
                for nm in names:
                    if nm.endswith("^-1"):
                        raise SpecError(f"element name {nm!r} may not end in ^-1", lineno)
                try:
                    table = FiniteGroupTable.from_names(names, rows)
                except GroupError as exc:
                    raise SpecError(str(exc), lineno) from exc
                defs.groups[name] = GroupDef(name, "finite", table=table)
            else:
                if "rank" not in fields:
                    raise SpecError("free group needs rank=", lineno)
                rank = int(fields["rank"])
                if rank < 1:
                    raise SpecError("free rank must be >= 1", lineno)
                defs.groups[name] = GroupDef(name, "free", rank=rank)
            defs.group_order.append(name)
        elif head == "vertex":
            name, rest2 = (rest.split(None, 1) + [""])[:2]
            fields = _split_fields(rest2, lineno)
            if "group" not in fields:
                raise SpecError("vertex needs group=", lineno)
            if name in defs.vertices:
                raise SpecError(f"duplicate vertex {name}", lineno)
            if fields["group"] not in defs.groups:
                raise SpecError(f"unknown group {fields['group']}", lineno)
            defs.vertices[name] = fields["group"]
            defs.vertex_order.append(name)
        elif head == "edge":
            name, rest2 = (rest.split(None, 1) + [""])[:2]
            if name.endswith("^-1"):
                raise SpecError("edge names may not end in ^-1", lineno)
            fields = _split_fields(rest2, lineno)
            for key in ("from", "to", "group", "d0", "d1", "tree"):
                if key not in fields:
                    raise SpecError(f"edge needs {key}=", lineno)
            for v in (fields["from"], fields["to"]):
                if v not in defs.vertices:
                    raise SpecError(f"unknown vertex {v}", lineno)
            if fields["group"] not in defs.groups:
                raise SpecError(f"unknown group {fields['group']}", lineno)
            if defs.groups[fields["group"]].kind != "finite":
                raise SpecError("edge groups must be finite", lineno)
            d0 = {k: v.split() for k, v in _parse_block(fields["d0"], lineno).items()}
            d1 = {k: v.split() for k, v in _parse_block(fields["d1"], lineno).items()}
            if fields["tree"] not in ("yes", "no"):
                raise SpecError("tree= must be yes or no", lineno)
            if name in defs.edges:
                raise SpecError(f"duplicate edge {name}", lineno)
            defs.edges[name] = EdgeDef(
                name, fields["from"], fields["to"], fields["group"], d0, d1,
                fields["tree"] == "yes",
            )
            defs.edge_order.append(name)
        elif head == "base":
            if rest.strip() not in defs.vertices:
                raise SpecError(f"unknown base vertex {rest.strip()!r}", lineno)
            defs.base = rest.strip()
        else:
            raise SpecError(f"unknown directive {head!r}", lineno)
    if defs.base is None:
        raise SpecError("no base vertex declared")
    if not defs.vertices:
        raise SpecError("no vertices declared")
    return defs


# ---------------------------------------------------------------------------
# Graph construction


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


class GraphOfGroups:
    """A validated graph of groups over its convenient alphabet."""

    def __init__(self, defs: SpecDefs):
        self.defs = defs
        self.base = defs.base
        self._build()

    # -- construction -----------------------------------------------------

    def _local_elt(self, vertex: str, word: list[str], lineno: int | None = None) -> object:
        """Resolve a defs-level image word at ``vertex`` to an element key:
        an element index for finite vertices, a letter-name tuple for free."""
        gdef = self.defs.groups[self.defs.vertices[vertex]]
        if gdef.kind == "finite":
            table = gdef.table
            assert table is not None
            idx = {nm: i for i, nm in enumerate(table.names)}
            cur = table.identity
            for nm in word:
                if nm not in idx:
                    raise SpecError(f"unknown element {nm!r} of vertex {vertex}", lineno)
                cur = table.mul[cur][idx[nm]]
            return cur
        if word:
            raise SpecError(
                f"free vertex {vertex} admits only the trivial edge group", lineno
            )
        return ()

    def _build(self) -> None:
        defs = self.defs
        # identify letters across tree edges and the shared identity
        uf = _UnionFind()
        for v in defs.vertex_order:
            gdef = defs.groups[defs.vertices[v]]
            if gdef.kind == "finite":
                uf.union(("id",), (v, gdef.table.identity))
            else:
                uf.union(("id",), (v, ()))
        for ename in defs.edge_order:
            ed = defs.edges[ename]
            table = defs.groups[ed.group].table
            assert table is not None
            if not ed.tree:
                continue
            for i, nm in enumerate(table.names):
                if nm not in ed.d0 or nm not in ed.d1:
                    raise SpecError(f"edge {ename}: missing image for {nm}")
                a = self._local_elt(ed.v0, ed.d0[nm])
                b = self._local_elt(ed.v1, ed.d1[nm])
                uf.union((ed.v0, a), (ed.v1, b))

        # one letter per class, named after the first slot in declaration order
        class_name: dict = {}
        class_slots: dict = {}
        order: list = []
        for v in defs.vertex_order:
            gdef = defs.groups[defs.vertices[v]]
            if gdef.kind != "finite":
                continue
            table = gdef.table
            for i in range(table.size()):
                if i == table.identity:
                    continue
                root = uf.find((v, i))
                if root == uf.find(("id",)):
                    raise SpecError(f"nontrivial element of {v} identified with 1")
                if root not in class_name:
                    class_name[root] = table.names[i]
                    order.append(root)
                class_slots.setdefault(root, []).append((v, i))

        inv_of_class: dict = {}
        for root, slots in class_slots.items():
            v, i = slots[0]
            table = defs.groups[defs.vertices[v]].table
            inv_of_class[root] = uf.find((v, table.inv[i]))

        # edge tags: A_E = letters valuing into the d1-image of E (both orientations)
        edge_tags_of_class: dict = {root: set() for root in order}
        id_edge_tags: set[str] = set()
        for ename in defs.edge_order:
            ed = defs.edges[ename]
            table = defs.groups[ed.group].table
            for oriented, vend, dmap in ((ename, ed.v1, ed.d1), (ename + "^-1", ed.v0, ed.d0)):
                id_edge_tags.add(oriented)
                for i, nm in enumerate(table.names):
                    if i == table.identity:
                        continue
                    elt = self._local_elt(vend, dmap[nm])
                    root = uf.find((vend, elt))
                    if root not in edge_tags_of_class:
                        raise SpecError(
                            f"edge {ename}: image of {nm} at {vend} is not a single element letter"
                        )
                    edge_tags_of_class[root].add(oriented)
        id_edge_tags.add(BASE_EDGE)

        all_vertices = frozenset(defs.vertex_order)
        letters: list[Letter] = []
        aliases: dict[str, str] = {}
        identity = Letter(
            "e", "e", vertex_tags=all_vertices, edge_tags=frozenset(id_edge_tags)
        )
        letters.append(identity)
        letter_of_class: dict = {}
        for root in order:
            nm = class_name[root]
            inv_nm = class_name[inv_of_class[root]]
            vtags = frozenset(v for v, _ in class_slots[root])
            letter = Letter(nm, inv_nm, vertex_tags=vtags,
                            edge_tags=frozenset(edge_tags_of_class[root]))
            letters.append(letter)
            letter_of_class[root] = letter
            for v, i in class_slots[root]:
                table = defs.groups[defs.vertices[v]].table
                if table.names[i] != nm:
                    aliases[table.names[i]] = nm

        free_letters: dict[str, list[Letter]] = {}
        for v in defs.vertex_order:
            gdef = defs.groups[defs.vertices[v]]
            if gdef.kind != "free":
                continue
            base_names = ["c"] if gdef.rank == 1 else [f"c{i}" for i in range(1, gdef.rank + 1)]
            ls = []
            for nm in base_names:
                ls.append(Letter(nm, nm + "^-1", vertex_tags=frozenset([v])))
                ls.append(Letter(nm + "^-1", nm, vertex_tags=frozenset([v])))
            free_letters[v] = ls
            letters.extend(ls)

        stable_letters: dict[str, Letter] = {}
        for ename in defs.edge_order:
            ed = defs.edges[ename]
            if ed.tree:
                continue
            t = Letter(ename, ename + "^-1", stable=True)
            ti = Letter(ename + "^-1", ename, stable=True)
            stable_letters[ename] = t
            stable_letters[ename + "^-1"] = ti
            letters.extend([t, ti])

        self.alphabet = Alphabet(letters, "e", aliases)

        # rebuild vertex structures over the shared letters
        self.structures: dict[str, VertexGroupStructure] = {}
        for v in defs.vertex_order:
            gdef = defs.groups[defs.vertices[v]]
            if gdef.kind == "finite":
                table = gdef.table
                ls = [identity] + [
                    letter_of_class[uf.find((v, i))]
                    for i in range(table.size())
                    if i != table.identity
                ]
                self.structures[v] = make_finite_group(table, ls, name=v)
            else:
                self.structures[v] = make_free_group(
                    gdef.rank, [identity] + free_letters[v], name=v
                )

        # oriented edges with validated embeddings
        self.edges: dict[str, OrientedEdge] = {}
        self.edge_order: list[str] = []
        for ename in defs.edge_order:
            ed = defs.edges[ename]
            table = defs.groups[ed.group].table
            assert table is not None
            emb0 = self._embedding(ed.v0, table, ed.d0)
            emb1 = self._embedding(ed.v1, table, ed.d1)
            fwd = OrientedEdge(
                ename, ename + "^-1", ed.v0, ed.v1, table, emb0, emb1,
                ed.tree, stable_letters.get(ename),
            )
            rev = OrientedEdge(
                ename + "^-1", ename, ed.v1, ed.v0, table, emb1, emb0,
                ed.tree, stable_letters.get(ename + "^-1"),
            )
            self.edges[fwd.name] = fwd
            self.edges[rev.name] = rev
            self.edge_order.extend([fwd.name, rev.name])

        self._check_graph()
        self._tree_index()
        self._identity_nf = NormalForm(((),), ())

    def _embedding(self, vertex: str, table: FiniteGroupTable,
                   images: dict[str, list[str]]) -> SubgroupEmbedding:
        s = self.structures[vertex]
        gdef = self.defs.groups[self.defs.vertices[vertex]]
        img: dict[str, Sequence[Letter]] = {}
        for nm in table.names:
            if nm not in images:
                raise SpecError(f"missing embedding image for {nm} at {vertex}")
            word = images[nm]
            if gdef.kind == "finite":
                elt = self._local_elt(vertex, word)
                img[nm] = s.element_word(elt)
            else:
                img[nm] = s.evaluate([self.alphabet.by_name[w] for w in word])
        return finite_subgroup_embedding(s, table, img)

    def _check_graph(self) -> None:
        verts = set(self.defs.vertex_order)
        adj: dict[str, set[str]] = {v: set() for v in verts}
        tadj: dict[str, set[str]] = {v: set() for v in verts}
        for ename in self.defs.edge_order:
            ed = self.defs.edges[ename]
            adj[ed.v0].add(ed.v1)
            adj[ed.v1].add(ed.v0)
            if ed.tree:
                tadj[ed.v0].add(ed.v1)
                tadj[ed.v1].add(ed.v0)
        seen = {self.base}
        stack = [self.base]
        while stack:
            v = stack.pop()
            for w in adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if seen != verts:
            raise SpecError("underlying graph is not connected")
        n_tree = sum(1 for e in self.defs.edges.values() if e.tree)
        seen = {self.base}
        stack = [self.base]
        while stack:
            v = stack.pop()
            for w in tadj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        if seen != verts or n_tree != len(verts) - 1:
            raise SpecError("tree=yes edges do not form a spanning tree")

    def _tree_index(self) -> None:
        # geodesics in the maximal tree, by BFS parents from every vertex
        out: dict[str, list[str]] = {v: [] for v in self.defs.vertex_order}
        for name, e in self.edges.items():
            if e.in_tree:
                out[e.v0].append(name)
        self._tree_out = out
        self._paths: dict[tuple[str, str], tuple[str, ...]] = {}
        for src in self.defs.vertex_order:
            parent: dict[str, str | None] = {src: None}
            queue = [src]
            qi = 0
            while qi < len(queue):
                v = queue[qi]
                qi += 1
                for ename in out[v]:
                    w = self.edges[ename].v1
                    if w not in parent:
                        parent[w] = ename
                        queue.append(w)
            for dst in self.defs.vertex_order:
                path: list[str] = []
                cur = dst
                while parent.get(cur) is not None:
                    ename = parent[cur]
                    path.append(ename)
                    cur = self.edges[ename].v0
                self._paths[(src, dst)] = tuple(reversed(path))

    # -- basic views -------------------------------------------------------

    def vertices(self) -> list[str]:
        return list(self.defs.vertex_order)

    def structure(self, v: str) -> VertexGroupStructure:
        return self.structures[v]

    def edge(self, name: str) -> OrientedEdge:
        return self.edges[name]

    def edges_hat(self) -> list[str]:
        """Oriented edges of the extended graph: the base edge first."""
        return [BASE_EDGE] + list(self.edge_order)

    def edges_out_of(self, v: str) -> list[str]:
        return [name for name in self.edge_order if self.edges[name].v0 == v]

    def tree_path(self, u: str, v: str) -> tuple[str, ...]:
        return self._paths[(u, v)]

    def is_reduced(self) -> bool:
        for name in self.edge_order:
            e = self.edges[name]
            s1 = self.structures[e.v1]
            if s1.kind == "finite-table" and e.group.size() == s1.table.size():
                return False
        return True

    def word(self, text: str) -> Word:
        return self.alphabet.word(text)

    def word_key(self, w: Sequence[Letter]) -> tuple:
        return (len(w), tuple(self.alphabet.index(l) for l in w))

    # -- normal forms --------------------------------------------------

    def identity_nf(self) -> NormalForm:
        return self._identity_nf

    def syllable_vertex(self, nf: NormalForm, i: int) -> str:
        return self.base if i == 0 else self.edges[nf.edges[i - 1]].v1

    def end_vertex(self, nf: NormalForm) -> str:
        return self.syllable_vertex(nf, nf.m)

    def _append_edge(self, syl: list[Word], eds: list[str], ename: str) -> None:
        """Append an edge crossing, collapsing the pinch E g E^-1 with
        g in the edge-group image when one arises."""
        if eds and ename == self.edges[eds[-1]].reverse:
            last = self.edges[eds[-1]]
            f = last.emb1.element_of_value(syl[-1])
            if f is not None:
                syl.pop()
                eds.pop()
                prev = self.structures[last.v0]
                syl[-1] = prev.multiply(syl[-1], last.emb0.image(f))
                return
        eds.append(ename)
        syl.append(())

    def _route(self, syl: list[Word], eds: list[str], target: str) -> None:
        while True:
            cur = self.base if not eds else self.edges[eds[-1]].v1
            if cur == target:
                return
            path = self._paths[(cur, target)]
            self._append_edge(syl, eds, path[0])

    def _append_letter(self, syl: list[Word], eds: list[str], l: Letter) -> None:
        if l is self.alphabet.identity:
            return
        if l.stable:
            e = self.edges[l.name]
            self._route(syl, eds, e.v0)
            self._append_edge(syl, eds, l.name)
            return
        cur = self.base if not eds else self.edges[eds[-1]].v1
        if cur in l.vertex_tags:
            target = cur
        else:
            target = min(
                l.vertex_tags, key=lambda v: (len(self._paths[(cur, v)]), v)
            )
            self._route(syl, eds, target)
        s = self.structures[target]
        syl[-1] = s.multiply(syl[-1], s.evaluate((l,)))

    def _canonicalize(self, syl: list[Word], eds: list[str]) -> NormalForm:
        # pinch reduction (left to right, restarting after each splice)
        changed = True
        while changed:
            changed = False
            for i in range(1, len(eds)):
                e_prev = self.edges[eds[i - 1]]
                if eds[i] != e_prev.reverse:
                    continue
                f = e_prev.emb1.element_of_value(syl[i])
                if f is None:
                    continue
                prev = self.structures[e_prev.v0]
                merged = prev.multiply(syl[i - 1], e_prev.emb0.image(f))
                merged = prev.multiply(merged, syl[i + 1])
                syl[i - 1 : i + 2] = [merged]
                del eds[i - 1 : i + 1]
                changed = True
                break
        # strip terminal tree edges whose syllable lies in the d1-image
        while eds:
            e = self.edges[eds[-1]]
            if not e.in_tree:
                break
            f = e.emb1.element_of_value(syl[-1])
            if f is None:
                break
            syl.pop()
            eds.pop()
            prev = self.structures[e.v0]
            syl[-1] = prev.multiply(syl[-1], e.emb0.image(f))
        # shortlex-least right-coset representatives for inner syllables
        for i in range(len(eds)):
            e = self.edges[eds[i]]
            s_here = self.structures[e.v0]
            s_next = self.structures[e.v1]
            best = None
            best_f = None
            for fi in range(e.group.size()):
                cand = s_here.multiply(syl[i], e.emb0.image(fi))
                key = self.word_key(cand)
                if best is None or key < best[0]:
                    best = (key, cand)
                    best_f = fi
            assert best is not None and best_f is not None
            syl[i] = best[1]
            inv_f = e.group.inv[best_f]
            syl[i + 1] = s_next.multiply(e.emb1.image(inv_f), syl[i + 1])
        return NormalForm(tuple(syl), tuple(eds))

    def normal_form(self, w: Sequence[Letter] | str) -> NormalForm:
        if isinstance(w, str):
            w = self.word(w)
        syl: list[Word] = [()]
        eds: list[str] = []
        for l in w:
            self._append_letter(syl, eds, l)
        return self._canonicalize(syl, eds)

    def nf_multiply_letter(self, nf: NormalForm, l: Letter) -> NormalForm:
        syl = list(nf.syllables)
        eds = list(nf.edges)
        self._append_letter(syl, eds, l)
        return self._canonicalize(syl, eds)

    def nf_multiply_word(self, nf: NormalForm, w: Sequence[Letter]) -> NormalForm:
        syl = list(nf.syllables)
        eds = list(nf.edges)
        for l in w:
            self._append_letter(syl, eds, l)
        return self._canonicalize(syl, eds)

    def nf_value_word(self, nf: NormalForm) -> Word:
        out: list[Letter] = list(nf.syllables[0])
        for i, ename in enumerate(nf.edges):
            e = self.edges[ename]
            if e.stable is not None:
                out.append(e.stable)
            out.extend(nf.syllables[i + 1])
        return tuple(out)

    def nf_repr(self, nf: NormalForm) -> str:
        parts = [self.alphabet.format(nf.syllables[0])]
        for i, ename in enumerate(nf.edges):
            parts.append(f"[{ename}]")
            parts.append(self.alphabet.format(nf.syllables[i + 1]))
        return " ".join(parts)

    def equals(self, w1: Sequence[Letter] | str, w2: Sequence[Letter] | str) -> bool:
        return self.normal_form(w1) == self.normal_form(w2)

    def is_identity_word(self, w: Sequence[Letter] | str) -> bool:
        return self.normal_form(w) == self._identity_nf

    def inverse_word(self, w: Sequence[Letter]) -> Word:
        return self.alphabet.inverse_word(w)

    # -- script-G membership and conjugate representatives ---------------

    def in_script_ge(self, w: Sequence[Letter] | str | NormalForm, ename: str) -> bool:
        """Does the canonical decomposition end with ``ename`` and a final
        syllable in the d1-image?  (For the base edge: is the value 1.)
        NormalForm inputs are checked literally as given."""
        nf = w if isinstance(w, NormalForm) else self.normal_form(w)
        if ename == BASE_EDGE:
            return nf == self._identity_nf
        if nf.m == 0 or nf.edges[-1] != ename:
            return False
        return self.edges[ename].emb1.element_of_value(nf.syllables[-1]) is not None

    def script_ge_witness(self, value: NormalForm, ename: str) -> NormalForm | None:
        """A canonical witness form of the value ending with ``ename`` and an
        empty final syllable, when the value lies in script-G_E; None
        otherwise.  This is full membership, terminal tree-edge padding
        included, and indexes Bass-Serre tree vertices by (E, h F_E)."""
        if ename == BASE_EDGE:
            return self._identity_nf if value == self._identity_nf else None
        e = self.edges[ename]
        syl = list(value.syllables)
        eds = list(value.edges)
        if eds and eds[-1] == ename:
            f = e.emb1.element_of_value(syl[-1])
            if f is None:
                return None
            syl[-1] = ()
        else:
            if not e.in_tree:
                return None
            cur = self.end_vertex(value)
            path = self._paths[(cur, e.v1)]
            if not path or path[-1] != ename:
                return None
            first = self.edges[path[0]]
            if eds and path[0] == self.edges[eds[-1]].reverse:
                prev = self.edges[eds[-1]]
                if prev.emb1.element_of_value(syl[-1]) is not None:
                    return None
            for p in path:
                eds.append(p)
                syl.append(())
        # canonical coset representative: reduce inner syllables, empty tail
        for i in range(len(eds)):
            ee = self.edges[eds[i]]
            s_here = self.structures[ee.v0]
            s_next = self.structures[ee.v1]
            best = None
            best_f = None
            for fi in range(ee.group.size()):
                cand = s_here.multiply(syl[i], ee.emb0.image(fi))
                key = self.word_key(cand)
                if best is None or key < best[0]:
                    best = (key, cand)
                    best_f = fi
            syl[i] = best[1]
            inv_f = ee.group.inv[best_f]
            syl[i + 1] = s_next.multiply(ee.emb1.image(inv_f), syl[i + 1])
        syl[-1] = ()
        return NormalForm(tuple(syl), tuple(eds))

    def find_conjugate_rep(self, w: Sequence[Letter] | str, vertex: str) -> tuple[str, NormalForm]:
        """Lemma-style representative: the edge E of the extended graph with
        terminal vertex ``vertex`` and the canonical witness h in script-G_E
        with h G_V h^-1 = value(w) G_V value(w)^-1."""
        if not self.is_reduced():
            raise GroupError("graph is not reduced")
        nf = self.normal_form(w) if not isinstance(w, NormalForm) else w
        while self.end_vertex(nf) == vertex and nf.syllables[-1] != ():
            syl = list(nf.syllables)
            eds = list(nf.edges)
            syl[-1] = ()
            nf = self._canonicalize(syl, eds)
        if self.end_vertex(nf) == vertex:
            if nf.m == 0:
                if vertex == self.base:
                    return (BASE_EDGE, self._identity_nf)
            else:
                w_nf = self.script_ge_witness(nf, nf.edges[-1])
                assert w_nf is not None
                return (nf.edges[-1], w_nf)
        cur = self.end_vertex(nf)
        path = self._paths[(cur, vertex)]
        ename = path[-1]
        w_nf = self.script_ge_witness(nf, ename)
        if w_nf is None:
            raise GroupError("no conjugate representative (unexpected)")
        return (ename, w_nf)

    def is_in_vertex_group(self, w: Sequence[Letter] | str, vertex: str,
                           free_len: int = 8) -> bool:
        """Is the value of ``w`` in the (embedded) vertex group?  Exhaustive
        for finite vertices, bounded-length scan for free ones."""
        nf = self.normal_form(w)
        s = self.structures[vertex]
        if s.kind == "finite-table":
            return any(
                nf == self.normal_form(s.element_word(i))
                for i in range(s.table.size())
            )
        from .fsa import enumerate_words

        for cand in enumerate_words(s.acceptor, free_len):
            if nf == self.normal_form(cand):
                return True
        return False

    # -- metric ----------------------------------------------------------

    def generator_letters(self) -> list[Letter]:
        return [l for l in self.alphabet.letters if l is not self.alphabet.identity]

    def cayley_ball(self, radius: int, node_cap: int = 2_000_000) -> dict[NormalForm, int]:
        """Exact word-metric distances d(1, x) for all x with d <= radius."""
        dist: dict[NormalForm, int] = {self._identity_nf: 0}
        frontier = [self._identity_nf]
        gens = self.generator_letters()
        for d in range(1, radius + 1):
            nxt: list[NormalForm] = []
            for nf in frontier:
                for l in gens:
                    nb = self.nf_multiply_letter(nf, l)
                    if nb not in dist:
                        dist[nb] = d
                        nxt.append(nb)
                        if len(dist) > node_cap:
                            raise GroupError("cayley ball node cap exceeded")
            frontier = nxt
            if not frontier:
                break
        return dist

    def distance(self, w1: Sequence[Letter] | str, w2: Sequence[Letter] | str,
                 radius: int = 8, node_cap: int = 2_000_000) -> int | None:
        """d(value(w1), value(w2)) if it is <= radius, else None."""
        if isinstance(w1, str):
            w1 = self.word(w1)
        if isinstance(w2, str):
            w2 = self.word(w2)
        delta = self.normal_form(self.inverse_word(w1) + tuple(w2))
        ball = self.cayley_ball(radius, node_cap)
        return ball.get(delta)


def parse_spec(text: str) -> GraphOfGroups:
    return GraphOfGroups(parse_defs(text))


def decompose_word(g: GraphOfGroups, word: Sequence[Letter],
                   require_final_crossing: bool = False,
                   ) -> tuple[list[Word], list[str]] | None:
    """Edge-path decomposition of a word over the convenient alphabet:
    the segment words u0..um and the crossed path E1..Em.  Tree-edge
    crossings are invisible, so cut positions are a choice; crossings are
    preferred over letter consumption, which places every cut at the
    earliest valid position.  Returns None when the word has no valid
    decomposition (with ``require_final_crossing``: none ending in a
    crossing)."""
    word = tuple(word)
    n = len(word)
    seen: set[tuple] = set()

    def search(pos: int, vertex: str, path: tuple[str, ...],
               segs: tuple[Word, ...], seg: Word):
        key = (pos, path[-1] if path else None, vertex, seg)
        if key in seen:
            return None
        seen.add(key)
        if pos == n and not require_final_crossing:
            return (list(segs) + [seg], list(path))
        if pos == n and require_final_crossing and path and seg == ():
            return (list(segs) + [seg], list(path))
        # crossings first: earliest valid cut
        for ename in g.edge_order:
            e = g.edges[ename]
            if e.v0 != vertex:
                continue
            if e.stable is not None:
                if pos >= n or word[pos] is not e.stable:
                    continue
                npos = pos + 1
            else:
                npos = pos
            if path:
                prev = g.edges[path[-1]]
                if ename == prev.reverse:
                    s = g.structures[vertex]
                    if prev.emb1.element_of_value(s.evaluate(seg)) is not None:
                        continue
            res = search(npos, e.v1, path + (ename,), segs + (seg,), ())
            if res is not None:
                return res
        if pos < n:
            l = word[pos]
            if not l.stable and vertex in l.vertex_tags:
                return search(pos + 1, vertex, path, segs, seg + (l,))
        return None

    return search(0, g.base, (), (), ())


# ---------------------------------------------------------------------------
# Reduction


def reduce_graph(g: GraphOfGroups) -> tuple[GraphOfGroups, dict[str, str]]:
    """Collapse non-loop edges whose d1-image is the whole terminal vertex
    group, until the graph is reduced.  Returns the reduced graph and a map
    from collapsed-vertex element names to words over the new spec.

    A loop edge with full edge group is rejected: eliminating it would
    replace the vertex group by a semidirect product with Z, which this
    artifact does not model.
    """
    import copy

    defs = copy.deepcopy(g.defs)
    letter_map: dict[str, str] = {}
    while True:
        target = None
        graph = GraphOfGroups(defs)
        for name in graph.edge_order:
            e = graph.edges[name]
            s1 = graph.structures[e.v1]
            if s1.kind != "finite-table":
                continue
            if e.group.size() != s1.table.size():
                continue
            if e.v0 == e.v1:
                raise GroupError(
                    f"edge {name} is a loop with full edge group; "
                    "replace the vertex group by G_V x| Z by hand"
                )
            target = name
            break
        if target is None:
            return graph, letter_map
        e = graph.edges[target]
        base_name = target[:-3] if target.endswith("^-1") else target
        ed = defs.edges[base_name]
        if not ed.tree:
            # swap the collapsing edge into the maximal tree first: un-flag
            # the last tree edge on the tree path between its endpoints
            path = graph.tree_path(e.v0, e.v1)
            swap = path[-1]
            swap_base = swap[:-3] if swap.endswith("^-1") else swap
            defs.edges[swap_base].tree = False
            defs.edges[base_name].tree = True
            continue
        dead, live = e.v1, e.v0
        # element names of the dead vertex, written as words at the live one
        table1 = graph.structures[dead].table
        assert table1 is not None
        subst: dict[str, list[str]] = {}
        for i, nm in enumerate(table1.names):
            f = e.emb1.element_of_value(graph.structures[dead].element_word(i))
            assert f is not None
            img = e.emb0.image(f)
            subst[nm] = [l.name for l in img]
            letter_map[nm] = " ".join(subst[nm]) or "e"
        del defs.edges[base_name]
        defs.edge_order.remove(base_name)
        del defs.vertices[dead]
        defs.vertex_order.remove(dead)
        if defs.base == dead:
            defs.base = live
        for other in defs.edges.values():
            for attr, dmap in (("v0", other.d0), ("v1", other.d1)):
                if getattr(other, attr) == dead:
                    setattr(other, attr, live)
                    for k in dmap:
                        dmap[k] = [x for nm in dmap[k] for x in subst[nm]]
