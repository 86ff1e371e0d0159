"""Deployment machinery: edge-path decomposition, the state-set languages
behind induced structures on tree positions, deployment extraction,
fellow-traveller checking, bounded equivalence, and the tracker machine.

Everything here works on the crossing-decorated deterministic machine of a
StructureHandle, where edge-path decompositions are visible as paths and
"ends with t_E" is a property of the last letter.  Verdicts are desk-scale
certificates: results carry their (maxlen, K) scope and witnesses, never a
global claim.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .fsa import (
    Dfa,
    Letter,
    Nfa,
    concat_word,
    determinize,
    difference,
    empty_dfa,
    enumerate_words,
    minimize,
    prune,
    union,
)
from .gog import BASE_EDGE, GraphOfGroups, NormalForm, decompose_word
from .vgroups import Word
from .ygraph import VIS_PREFIX, StructureHandle


class DeployError(ValueError):
    pass


class CapExceeded(DeployError):
    pass


# ---------------------------------------------------------------------------
# Edge path decomposition


@dataclass(frozen=True)
class EdgePathDecomposition:
    """Segments u0..um with the crossed Y-path E1..Em and the cut positions
    into the original word (cuts[i] = index just after segment i, including
    consumed stable letters)."""

    segments: tuple[Word, ...]
    path: tuple[str, ...]
    cuts: tuple[int, ...]


def edge_path_decompose(handle: StructureHandle, w: Sequence[Letter] | str) -> EdgePathDecomposition:
    """Canonical (earliest-cut) edge path decomposition of an accepted word
    or accepted-word prefix."""
    g = handle.g
    if isinstance(w, str):
        w = g.word(w)
    s = handle.dfa.start
    for l in w:
        s = handle.dfa.step(s, l)
        if s is None:
            raise DeployError("word is not an accepted-word prefix")
    dec = decompose_word(g, w)
    if dec is None:
        raise DeployError("word admits no edge path decomposition")
    segments, path = dec
    cuts = []
    pos = 0
    for i, seg in enumerate(segments[:-1]):
        pos += len(seg)
        if g.edges[path[i]].stable is not None:
            pos += 1
        cuts.append(pos)
    cuts.append(pos + len(segments[-1]))
    return EdgePathDecomposition(tuple(tuple(x) for x in segments), tuple(path), tuple(cuts))


# ---------------------------------------------------------------------------
# Visible-machine views


def crossing_edge_of(sym: Letter) -> str | None:
    """The oriented edge name when the symbol is a crossing marker."""
    if sym.stable:
        return sym.name
    if sym.name.startswith(VIS_PREFIX):
        return sym.name[len(VIS_PREFIX):]
    return None


def _value_of_visible(g: GraphOfGroups, nf: NormalForm, sym: Letter) -> NormalForm:
    if sym.name.startswith(VIS_PREFIX):
        return nf
    return g.nf_multiply_letter(nf, sym)


def state_sets(handle: StructureHandle, ename: str, h: Sequence[Letter] | str | NormalForm,
               maxlen: int | None = None, node_cap: int = 200_000) -> frozenset[int]:
    """S_h: the visible-machine states reached by prefixes that evaluate to h
    and end with the crossing of ``ename``.  The search walks (prefix state,
    value) pairs breadth-first to the length bound."""
    g = handle.g
    h_nf = h if isinstance(h, NormalForm) else g.normal_form(h)
    if ename == BASE_EDGE:
        if h_nf == g.identity_nf():
            return frozenset([handle.visible.start])
        return frozenset()
    if maxlen is None:
        maxlen = 2 * len(g.nf_value_word(h_nf)) + 2 * len(g.vertices()) + 4
    vis = handle.visible
    out: set[int] = set()
    layer: dict[tuple[int, NormalForm], None] = {(vis.start, g.identity_nf()): None}
    seen: set[tuple[int, NormalForm]] = set(layer)
    for _ in range(maxlen):
        nxt: dict[tuple[int, NormalForm], None] = {}
        for (s, val) in layer:
            for sym, t in vis.trans.get(s, {}).items():
                val2 = _value_of_visible(g, val, sym)
                key = (t, val2)
                if key not in seen:
                    seen.add(key)
                    nxt[key] = None
                    if len(seen) > node_cap:
                        raise CapExceeded("state_sets node cap exceeded")
                if crossing_edge_of(sym) == ename and val2 == h_nf:
                    out.add(t)
        layer = nxt
        if not layer:
            break
    return frozenset(out)


def _continuation_sets(handle: StructureHandle, ename: str) -> tuple[frozenset[int], frozenset[int]]:
    """R'_E: accept states plus states with an immediate crossing of some
    edge out of term(E) other than E^-1; R''_E: states with an immediate
    E^-1 crossing.  Immediate crossings witness continuations whose edge
    path decomposition starts with that crossing."""
    g = handle.g
    vis = handle.visible
    term = g.edges[ename].v1
    rev = g.edges[ename].reverse
    r1 = set(vis.accepts)
    r2 = set()
    for s, row in vis.trans.items():
        for sym in row:
            ecross = crossing_edge_of(sym)
            if ecross is None:
                continue
            if g.edges[ecross].v0 != term:
                continue
            if ecross == rev:
                r2.add(s)
            else:
                r1.add(s)
    return frozenset(r1), frozenset(r2)


def _restrict_to_vertex(handle: StructureHandle, vertex: str,
                        starts: frozenset[int], accepts: frozenset[int]) -> Dfa:
    """The visible machine with the given starts/accepts, keeping only
    transitions labelled by letters of the vertex alphabet."""
    g = handle.g
    s = g.structures[vertex]
    allowed = set(s.acceptor.alphabet)
    vis = handle.visible
    trans: dict[int, dict] = {}
    for st, row in vis.trans.items():
        keep = {sym: frozenset([t]) for sym, t in row.items() if sym in allowed}
        if keep:
            trans[st] = keep
    nfa = Nfa(s.acceptor.alphabet, vis.n, starts, accepts, trans)
    return determinize(nfa)


def _e_pattern(structure_alphabet: tuple, edge_letters: list[Letter], e: Letter) -> Dfa:
    """{e}* A_E {e}*: nonempty all-e words (the centre letter may be e) and
    single nontrivial A_E letters padded by e's."""
    nontrivial = [x for x in edge_letters if x is not e]
    # states: 0 start, 1 only-e's so far (>=1), 2 one nontrivial letter seen
    trans: dict[int, dict] = {
        0: {e: 1, **{x: 2 for x in nontrivial}},
        1: {e: 1, **{x: 2 for x in nontrivial}},
        2: {e: 2},
    }
    return prune(Dfa(structure_alphabet, 3, 0, frozenset([1, 2]), trans))


def edge_letters_at(g: GraphOfGroups, ename: str) -> list[Letter]:
    """The letters of A_E (identity letter first)."""
    out = [g.alphabet.identity]
    for l in g.alphabet.letters:
        if l is g.alphabet.identity:
            continue
        if ename in l.edge_tags:
            out.append(l)
    return out


def induced_language(handle: StructureHandle, ename: str,
                     h: Sequence[Letter] | str | NormalForm,
                     maxlen: int | None = None, node_cap: int = 200_000) -> Dfa:
    """L_h: the structure induced on the terminal vertex group of ``ename``
    at the position of h: the union over edge letters f of f·N_{hf}, where
    N_h splits into the straight-ahead continuations and the backtracking
    ones minus edge-group-valued words.  Minimized, over the vertex
    alphabet."""
    g = handle.g
    if ename == BASE_EDGE:
        vertex = g.base
        rev = None
    else:
        vertex = g.edges[ename].v1
        rev = g.edges[ename].reverse
    s = g.structures[vertex]
    h_nf = h if isinstance(h, NormalForm) else g.normal_form(h)
    if ename == BASE_EDGE:
        r1, r2 = frozenset(handle.visible.accepts), frozenset()
        for st, row in handle.visible.trans.items():
            for sym in row:
                ecross = crossing_edge_of(sym)
                if ecross is not None and g.edges[ecross].v0 == vertex:
                    r1 = r1 | frozenset([st])
    else:
        r1, r2 = _continuation_sets(handle, ename)
    e_letters = edge_letters_at(g, ename) if ename != BASE_EDGE else [g.alphabet.identity]
    result = empty_dfa(s.acceptor.alphabet)
    for fl in e_letters:
        if fl is g.alphabet.identity:
            hf = h_nf
            prefix: Word = ()
        else:
            hf = g.nf_multiply_letter(h_nf, fl)
            prefix = (fl,)
        sh = state_sets(handle, ename, hf, maxlen, node_cap)
        if not sh:
            continue
        n1 = _restrict_to_vertex(handle, vertex, sh, r1)
        n2 = _restrict_to_vertex(handle, vertex, sh, r2)
        if ename != BASE_EDGE:
            pat = _e_pattern(s.acceptor.alphabet, edge_letters_at(g, ename), g.alphabet.identity)
            n2 = difference(n2, pat)
        else:
            n2 = empty_dfa(s.acceptor.alphabet)
        nh = union(n1, n2)
        result = union(result, concat_word(prefix, nh))
    return minimize(result)


# ---------------------------------------------------------------------------
# Deployments


def _nf_key(g: GraphOfGroups, nf: NormalForm) -> tuple:
    return tuple(g.alphabet.index(l) for l in g.nf_value_word(nf))


@dataclass
class Deployment:
    """Lazily evaluated map from tree positions (edge of the extended graph,
    element of script-G_E) to induced-language Dfas, with a finite image
    cache keyed by the minimized machine."""

    handle: StructureHandle
    maxlen: int | None = None
    node_cap: int = 200_000
    cache: dict[tuple[str, tuple], Dfa] = field(default_factory=dict)

    def at(self, ename: str, h: Sequence[Letter] | str | NormalForm) -> Dfa:
        g = self.handle.g
        h_nf = h if isinstance(h, NormalForm) else g.normal_form(h)
        if g.script_ge_witness(h_nf, ename) is None:
            raise DeployError(f"value is not in script-G for edge {ename}")
        key = (ename, _nf_key(g, h_nf))
        if key not in self.cache:
            self.cache[key] = induced_language(
                self.handle, ename, h_nf, self.maxlen, self.node_cap
            )
        return self.cache[key]

    def image(self) -> list[Dfa]:
        """Distinct cached languages (minimized machines compare equal)."""
        out: list[Dfa] = []
        for d in self.cache.values():
            if not any(d == o for o in out):
                out.append(d)
        return out

    def equivariant_at(self, ename: str, h: Sequence[Letter] | str | NormalForm) -> bool:
        """psi(h) = f·psi(hf) as exact language equality: the language at h
        must equal the one reassembled from hf's state-set family with the
        letter prefixes shifted by f."""
        g = self.handle.g
        if ename == BASE_EDGE:
            return True
        h_nf = h if isinstance(h, NormalForm) else g.normal_form(h)
        lh = self.at(ename, h_nf)
        e = g.edges[ename]
        s1 = g.structures[e.v1]
        for fl in edge_letters_at(g, ename):
            if fl is g.alphabet.identity:
                continue
            hf = g.nf_multiply_letter(h_nf, fl)
            shifted = _assemble_shifted(self.handle, ename, hf, fl,
                                        self.maxlen, self.node_cap)
            if shifted != lh:
                return False
        return True


def _assemble_shifted(handle: StructureHandle, ename: str, hf: NormalForm,
                      f_letter: Letter, maxlen: int | None, node_cap: int) -> Dfa:
    """f·L_{hf}: reassemble the induced language of hf with every leading
    edge-group letter multiplied by f on the left."""
    g = handle.g
    e = g.edges[ename]
    vertex = e.v1
    s = g.structures[vertex]
    r1, r2 = _continuation_sets(handle, ename)
    pat = _e_pattern(s.acceptor.alphabet, edge_letters_at(g, ename), g.alphabet.identity)
    result = empty_dfa(s.acceptor.alphabet)
    f_val = s.evaluate((f_letter,))
    for fl in edge_letters_at(g, ename):
        hff = g.nf_multiply_letter(hf, fl) if fl is not g.alphabet.identity else hf
        sh = state_sets(handle, ename, hff, maxlen, node_cap)
        if not sh:
            continue
        n1 = _restrict_to_vertex(handle, vertex, sh, r1)
        n2 = difference(_restrict_to_vertex(handle, vertex, sh, r2), pat)
        nh = union(n1, n2)
        shifted_val = s.multiply(f_val, s.evaluate((fl,)))
        result = union(result, concat_word(shifted_val, nh))
    return minimize(result)


def deployment_of(handle: StructureHandle, maxlen: int | None = None,
                  node_cap: int = 200_000) -> Deployment:
    return Deployment(handle, maxlen, node_cap)


# ---------------------------------------------------------------------------
# Fellow-traveller machinery


class Metric:
    """Word-metric distances through a cached ball around the identity."""

    def __init__(self, g: GraphOfGroups, radius: int, node_cap: int = 2_000_000):
        self.g = g
        self.radius = radius
        self.ball = g.cayley_ball(radius, node_cap)

    def dist(self, nf: NormalForm) -> int | None:
        return self.ball.get(nf)


def _delta_grid(g: GraphOfGroups, w1: Sequence[Letter], w2: Sequence[Letter]):
    """delta[i][j] = value(w1[:i])^-1 · value(w2[:j]) as normal forms."""
    n, m = len(w1), len(w2)
    rows = []
    for i in range(n + 1):
        row = [g.normal_form(g.inverse_word(w1[:i]))]
        for j in range(m):
            row.append(g.nf_multiply_letter(row[-1], w2[j]))
        rows.append(row)
    return rows


@dataclass
class FtVerdict:
    ok: bool
    witness: tuple | None
    scope: dict


def async_fellow_travel(g: GraphOfGroups, w1: Sequence[Letter] | str,
                        w2: Sequence[Letter] | str, K: int,
                        metric: Metric | None = None) -> FtVerdict:
    """Monotone reparameterizations staying K-close exist iff the grid DAG
    with moves (i+1,j), (i,j+1), (i+1,j+1) and node constraint
    d(w1(i), w2(j)) <= K reaches the far corner.  The witness is the grid
    path."""
    if isinstance(w1, str):
        w1 = g.word(w1)
    if isinstance(w2, str):
        w2 = g.word(w2)
    metric = metric or Metric(g, K)
    delta = _delta_grid(g, w1, w2)
    n, m = len(w1), len(w2)
    ok = [[False] * (m + 1) for _ in range(n + 1)]
    par: dict[tuple[int, int], tuple[int, int]] = {}
    d0 = metric.dist(delta[0][0])
    ok[0][0] = d0 is not None and d0 <= K
    for i in range(n + 1):
        for j in range(m + 1):
            if i == 0 and j == 0:
                continue
            d = metric.dist(delta[i][j])
            if d is None or d > K:
                continue
            for pi, pj in ((i - 1, j), (i, j - 1), (i - 1, j - 1)):
                if pi >= 0 and pj >= 0 and ok[pi][pj]:
                    ok[i][j] = True
                    par[(i, j)] = (pi, pj)
                    break
    scope = {"K": K}
    if not ok[n][m]:
        return FtVerdict(False, None, scope)
    path = [(n, m)]
    while path[-1] != (0, 0):
        path.append(par.get(path[-1], (0, 0)))
    return FtVerdict(True, tuple(reversed(path)), scope)


def sync_fellow_travel(g: GraphOfGroups, w1: Sequence[Letter] | str,
                       w2: Sequence[Letter] | str, K: int,
                       metric: Metric | None = None) -> FtVerdict:
    """d(w1(t), w2(t)) <= K for every integer t, with terminal padding."""
    if isinstance(w1, str):
        w1 = g.word(w1)
    if isinstance(w2, str):
        w2 = g.word(w2)
    metric = metric or Metric(g, K)
    delta = _delta_grid(g, w1, w2)
    n, m = len(w1), len(w2)
    for t in range(max(n, m) + 1):
        d = metric.dist(delta[min(t, n)][min(t, m)])
        if d is None or d > K:
            return FtVerdict(False, (t,), {"K": K})
    return FtVerdict(True, None, {"K": K})


def minimax_k(g: GraphOfGroups, w1: Sequence[Letter], w2: Sequence[Letter],
              metric: Metric, sync: bool = False) -> int | None:
    """The least K for which the pair fellow travels (None when some value
    leaves the metric's ball)."""
    delta = _delta_grid(g, w1, w2)
    n, m = len(w1), len(w2)
    if sync:
        worst = 0
        for t in range(max(n, m) + 1):
            d = metric.dist(delta[min(t, n)][min(t, m)])
            if d is None:
                return None
            worst = max(worst, d)
        return worst
    INF = float("inf")
    best = [[INF] * (m + 1) for _ in range(n + 1)]
    d0 = metric.dist(delta[0][0])
    if d0 is None:
        return None
    best[0][0] = d0
    for i in range(n + 1):
        for j in range(m + 1):
            if i == 0 and j == 0:
                continue
            d = metric.dist(delta[i][j])
            if d is None:
                continue
            prev = min(
                best[pi][pj]
                for pi, pj in ((i - 1, j), (i, j - 1), (i - 1, j - 1))
                if pi >= 0 and pj >= 0
            )
            best[i][j] = max(d, prev)
    return None if best[n][m] == INF else int(best[n][m])


def _value_buckets(g: GraphOfGroups, words: Iterable[tuple]) -> dict[NormalForm, list[tuple]]:
    buckets: dict[NormalForm, list[tuple]] = {}
    for w in words:
        buckets.setdefault(g.normal_form(w), []).append(w)
    return buckets


def close_pairs(g: GraphOfGroups, words: list[tuple]) -> list[tuple[tuple, tuple]]:
    """Unordered pairs of words whose values are at distance <= 1."""
    buckets = _value_buckets(g, words)
    keys = list(buckets)
    index = {k: i for i, k in enumerate(keys)}
    pairs: list[tuple[tuple, tuple]] = []
    for k in keys:
        ws = buckets[k]
        for i in range(len(ws)):
            for j in range(i + 1, len(ws)):
                pairs.append((ws[i], ws[j]))
    gens = g.generator_letters()
    for k in keys:
        for l in gens:
            k2 = g.nf_multiply_letter(k, l)
            if k2 in index and index[k2] > index[k]:
                for w1 in buckets[k]:
                    for w2 in buckets[k2]:
                        pairs.append((w1, w2))
    return pairs


@dataclass
class FtConstant:
    k: int | None
    worst: tuple | None
    scope: dict

    @property
    def ok(self) -> bool:
        return self.k is not None


def ft_constant(handle_or_dfa, g: GraphOfGroups | None = None, maxlen: int = 6,
                sync: bool = False, radius: int = 6, k_bound: int | None = None,
                node_cap: int = 2_000_000) -> FtConstant:
    """Empirical minimal fellow-traveller constant over all accepted pairs
    with value distance <= 1 and length <= maxlen; fails with the worst pair
    when K exceeds the ball radius or the configured bound."""
    if isinstance(handle_or_dfa, StructureHandle):
        dfa = handle_or_dfa.dfa
        g = handle_or_dfa.g
    else:
        dfa = handle_or_dfa
        assert g is not None
    metric = Metric(g, radius, node_cap)
    words = enumerate_words(dfa, maxlen)
    worst_k = 0
    worst_pair = None
    for w1, w2 in close_pairs(g, words):
        k = minimax_k(g, w1, w2, metric, sync)
        if k is None:
            return FtConstant(None, (w1, w2), {"maxlen": maxlen, "radius": radius})
        if k > worst_k:
            worst_k, worst_pair = k, (w1, w2)
    if k_bound is not None and worst_k > k_bound:
        return FtConstant(None, worst_pair, {"maxlen": maxlen, "k_bound": k_bound})
    return FtConstant(worst_k, worst_pair, {"maxlen": maxlen, "radius": radius})


@dataclass
class EquivVerdict:
    ok: bool
    witness: tuple[tuple, tuple] | None
    scope: dict


def equivalent_upto(g: GraphOfGroups, L1: Dfa, L2: Dfa, maxlen: int, K: int,
                    metric: Metric | None = None) -> EquivVerdict:
    """Bounded-scope equivalence: every close pair from the union language
    passes the asynchronous fellow-traveller test at K.  Never a theorem;
    the verdict carries its scope."""
    metric = metric or Metric(g, max(K, 2))
    words = sorted(set(enumerate_words(L1, maxlen)) | set(enumerate_words(L2, maxlen)))
    for w1, w2 in close_pairs(g, words):
        v = async_fellow_travel(g, w1, w2, K, metric)
        if not v.ok:
            return EquivVerdict(False, (w1, w2), {"maxlen": maxlen, "K": K})
    return EquivVerdict(True, None, {"maxlen": maxlen, "K": K})


# ---------------------------------------------------------------------------
# The tracker machine


@dataclass(frozen=True)
class TrackerState:
    """Map from ball positions to sets of (visible state, last crossing)."""

    table: tuple[tuple[tuple, frozenset], ...]  # (position key, pairs)

    def get(self, poskey: tuple) -> frozenset:
        for k, v in self.table:
            if k == poskey:
                return v
        return frozenset()


class TrackerMachine:
    """Lazy machine that accepts every word and whose state, for words that
    fellow-travel an accepted word of the same value, reports for each edge
    whether the value lies in script-G_E and which induced language it
    carries.  States are materialized on demand under a hard cap."""

    def __init__(self, handle: StructureHandle, K: int, state_cap: int = 20_000):
        self.handle = handle
        self.g = handle.g
        self.K = K
        self.state_cap = state_cap
        self.metric = Metric(self.g, K)
        self.ball = sorted(self.metric.ball, key=lambda nf: _nf_key(self.g, nf))
        self._states: dict[TrackerState, int] = {}
        self._by_id: dict[int, TrackerState] = {}
        self._trans: dict[tuple[int, Letter], int] = {}
        self.start = self._intern(self._start_state())

    def _poskey(self, nf: NormalForm) -> tuple:
        return _nf_key(self.g, nf)

    def _intern(self, st: TrackerState) -> int:
        if st not in self._states:
            if len(self._states) >= self.state_cap:
                raise CapExceeded("tracker state cap exceeded")
            self._states[st] = len(self._states)
            self._by_id[self._states[st]] = st
        return self._states[st]

    def state_of(self, sid: int) -> TrackerState:
        return self._by_id[sid]

    def _start_state(self) -> TrackerState:
        vis = self.handle.visible
        reach: dict[tuple[NormalForm, int, str | None], None] = {
            (self.g.identity_nf(), vis.start, None): None
        }
        queue = list(reach)
        while queue:
            pos, s, _last = queue.pop()
            for sym, t in vis.trans.get(s, {}).items():
                pos2 = _value_of_visible(self.g, pos, sym)
                if pos2 not in self.metric.ball:
                    continue
                key = (pos2, t, crossing_edge_of(sym))
                if key not in reach:
                    reach[key] = None
                    queue.append(key)
        table: dict[tuple, set] = {}
        for (pos, s, last) in reach:
            table.setdefault(self._poskey(pos), set()).add((s, last))
        return TrackerState(tuple(sorted((k, frozenset(v)) for k, v in table.items())))

    def step(self, sid: int, letter: Letter) -> int:
        key = (sid, letter)
        if key in self._trans:
            return self._trans[key]
        alpha = self.state_of(sid)
        g = self.g
        vis = self.handle.visible
        inv = g.alphabet.inverse(letter)
        # allowed positions: the old ball and its letter-translate, expressed
        # relative to the old center
        ball_nfs = list(self.metric.ball)
        shifted = {g.nf_multiply_word(g.normal_form((letter,)), g.nf_value_word(nf)): nf
                   for nf in ball_nfs}
        allowed: set[NormalForm] = set(ball_nfs) | set(shifted)
        reach: dict[tuple[NormalForm, int, str | None], None] = {}
        queue = []
        for nf in ball_nfs:
            k = self._poskey(nf)
            for (s, last) in alpha.get(k):
                key2 = (nf, s, last)
                if key2 not in reach:
                    reach[key2] = None
                    queue.append(key2)
        while queue:
            pos, s, _last = queue.pop()
            for sym, t in vis.trans.get(s, {}).items():
                pos2 = _value_of_visible(g, pos, sym)
                if pos2 not in allowed:
                    continue
                key2 = (pos2, t, crossing_edge_of(sym))
                if key2 not in reach:
                    reach[key2] = None
                    queue.append(key2)
        table: dict[tuple, set] = {}
        for (pos, s, last) in reach:
            for new_rel, old_rel in shifted.items():
                if new_rel == pos:
                    table.setdefault(self._poskey(old_rel), set()).add((s, last))
        beta = TrackerState(tuple(sorted((k, frozenset(v)) for k, v in table.items())))
        tid = self._intern(beta)
        self._trans[key] = tid
        return tid

    def run(self, word: Sequence[Letter]) -> int:
        sid = self.start
        for l in word:
            sid = self.step(sid, l)
        return sid

    def report(self, sid: int, ename: str) -> dict[str, frozenset[int]]:
        """For each edge letter f of A_E: the machine states s with
        (s, ename) in alpha(f) — the tracker's rendering of S_{value·f}."""
        g = self.g
        alpha = self.state_of(sid)
        out: dict[str, frozenset[int]] = {}
        for fl in edge_letters_at(g, ename):
            pos = g.normal_form((fl,))
            pairs = alpha.get(self._poskey(pos))
            out[fl.name] = frozenset(s for (s, last) in pairs if last == ename)
        return out

    def in_script_ge(self, sid: int, ename: str) -> bool:
        return any(self.report(sid, ename).values())


def tracker_machine(handle: StructureHandle, K: int, state_cap: int = 20_000) -> TrackerMachine:
    return TrackerMachine(handle, K, state_cap)
