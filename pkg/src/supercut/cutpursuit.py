"""Piecewise-constant graph-signal approximation by l0 cut pursuit.

Minimizes

    sum_p d(x_p, y_comp(p))  +  lambda * sum_{(u,v) in E} w_uv [comp(u) != comp(v)]

where d combines a cross-entropy term on class probabilities with a
weighted squared distance on positions.  The solver alternates binary
min-cut splits of the current components with greedy merges of adjacent
components, accepting a move only when it strictly lowers the energy, so
the energy is non-increasing by construction.

The same engine also runs with zero class channels and a pure quadratic
fidelity, which is how superpoint oversegmentation reuses it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, maximum_flow

from .core import ClusteringParams, NodeSignal
from .errors import DataError, ParameterError
from .graphs import AdjacencyGraph

LOG_CLAMP = 1e-12
_ACCEPT_TOL = 1e-12


@dataclass(frozen=True)
class Partition:
    """Assignment of nodes to connected constant components.

    class_values rows live on the probability simplex (empty when the
    signal has no class channels); pos_values are the component centroids
    in the quadratic channels.  energy is the full objective of the stored
    state; energy_history records the accepted value after each outer
    iteration.
    """

    assignment: np.ndarray
    class_values: np.ndarray
    pos_values: np.ndarray
    energy: float
    energy_history: tuple = ()

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.assignment, dtype=np.int64))
        a.setflags(write=False)
        object.__setattr__(self, "assignment", a)
        for name in ("class_values", "pos_values"):
            v = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def num_components(self) -> int:
        return len(self.pos_values)

    def components(self) -> list:
        """Member arrays per component id, each sorted ascending."""
        order = np.argsort(self.assignment, kind="stable")
        counts = np.bincount(self.assignment, minlength=self.num_components)
        return np.split(order, np.cumsum(counts)[:-1])

    def component_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.num_components)


# ---------------------------------------------------------------------------
# Elementary quantities


def dissimilarity(x_class, x_pos, y_class, y_pos, eta: float):
    """Mixed dissimilarity: cross-entropy of the class parts plus
    eta * squared Euclidean distance of the positions.

    Class entries of y are clamped to >= 1e-12 inside the log, so one-hot
    component values are legal.  Broadcasts over rows.
    """
    x_class = np.asarray(x_class, dtype=np.float64)
    y_class = np.asarray(y_class, dtype=np.float64)
    x_pos = np.asarray(x_pos, dtype=np.float64)
    y_pos = np.asarray(y_pos, dtype=np.float64)
    if x_class.size:
        ce = -(x_class * np.log(np.maximum(y_class, LOG_CLAMP))).sum(axis=-1)
    else:
        ce = 0.0
    sq = ((x_pos - y_pos) ** 2).sum(axis=-1)
    return ce + eta * sq


def optimal_component_value(members, signal: NodeSignal, eta: float = 0.0):
    """Best constant value for one component: mean class row, mean position.

    The arithmetic mean minimizes both the summed cross-entropy over the
    simplex and the summed squared distance, for any eta.
    """
    members = np.asarray(members, dtype=np.int64)
    if len(members) == 0:
        raise ParameterError("component members must be nonempty")
    return (signal.class_scores[members].mean(axis=0),
            signal.position[members].mean(axis=0))


def energy(partition: Partition, signal: NodeSignal, graph: AdjacencyGraph,
           params: ClusteringParams) -> float:
    """Recompute the full objective of a partition state."""
    if len(partition.assignment) != graph.node_count:
        raise DataError("partition and graph disagree on the node count")
    if signal.num_nodes != graph.node_count:
        raise DataError("signal and graph disagree on the node count")
    a = partition.assignment
    fid = dissimilarity(signal.class_scores, signal.position,
                        partition.class_values[a], partition.pos_values[a],
                        params.eta).sum()
    eu, ev = graph.edges[:, 0], graph.edges[:, 1]
    cut = graph.weight[a[eu] != a[ev]].sum() if graph.edge_count else 0.0
    return float(fid + params.lam * cut)


# ---------------------------------------------------------------------------
# Exact binary min-cut labeling


def _min_cut_labels(n, A, B, pu, pv, pair_cap):
    """Minimize sum_p ([b_p=0] A_p + [b_p=1] B_p) + sum pair_cap [b_u != b_v].

    The pairwise term is submodular for binary labels, so an s-t min cut is
    exact.  Capacities are scaled into int32; pairwise capacities above the
    total unary mass act as infinite and are clipped there first.  Ties are
    resolved toward label 0 (the source-maximal minimum cut).
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    # Shared unary mass is constant: only the differences matter.
    base = np.minimum(A, B)
    Ar, Br = A - base, B - base
    total = Ar.sum() + Br.sum()
    if total <= 1e-300:
        if len(pu) == 0:
            return np.zeros(n, dtype=bool)
        total = 1.0
    scale = (2.0**30) / total
    cap_pair = np.minimum(np.asarray(pair_cap, dtype=np.float64), total + 1.0)
    Ai = np.round(Ar * scale).astype(np.int64)
    Bi = np.round(Br * scale).astype(np.int64)
    Pi = np.round(cap_pair * scale).astype(np.int64)
    s, t = n, n + 1
    rows = np.concatenate([np.full(n, s), np.arange(n), pu, pv])
    cols = np.concatenate([np.arange(n), np.full(n, t), pv, pu])
    caps = np.concatenate([Bi, Ai, Pi, Pi])
    keep = caps > 0
    if not np.any(keep):
        return np.zeros(n, dtype=bool)
    m = coo_matrix((caps[keep].astype(np.int32), (rows[keep], cols[keep])),
                   shape=(n + 2, n + 2)).tocsr()
    res = maximum_flow(m, s, t)
    residual = m - res.flow
    residual.data = (residual.data > 0).astype(np.int8)
    residual.eliminate_zeros()
    # Nodes that can still reach the sink take label 1; everything else,
    # including tie nodes, takes label 0.
    reach = breadth_first_order(residual.T, t, directed=True,
                                return_predecessors=False)
    labels = np.zeros(n, dtype=bool)
    reach = reach[reach < n]
    labels[reach] = True
    return labels


def binary_split(members, graph: AdjacencyGraph, candidates, signal: NodeSignal,
                 params: ClusteringParams) -> np.ndarray:
    """Optimal binary labeling of one component between two candidate values.

    Returns a bool array aligned with ``members`` (False -> candidate 0).
    Edges of ``graph`` with an endpoint outside ``members`` are ignored.
    """
    members = np.asarray(members, dtype=np.int64)
    (y0c, y0q), (y1c, y1q) = candidates
    A = dissimilarity(signal.class_scores[members], signal.position[members],
                      y0c, y0q, params.eta)
    B = dissimilarity(signal.class_scores[members], signal.position[members],
                      y1c, y1q, params.eta)
    local = np.full(graph.node_count, -1, dtype=np.int64)
    local[members] = np.arange(len(members))
    lu = local[graph.edges[:, 0]]
    lv = local[graph.edges[:, 1]]
    keep = (lu >= 0) & (lv >= 0)
    caps = params.lam * graph.weight[keep]
    return _min_cut_labels(len(members), np.atleast_1d(A), np.atleast_1d(B),
                           lu[keep], lv[keep], caps)


# ---------------------------------------------------------------------------
# Solver engine (generic over class + quadratic channels)


def _dense_relabel(labels):
    """Relabel so component ids appear in order of first node occurrence."""
    uniq, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq))
    return rank[inverse.reshape(labels.shape)], len(uniq)


def _connected(n, edges):
    if len(edges) == 0:
        return np.arange(n, dtype=np.int64), n
    m = coo_matrix((np.ones(len(edges), dtype=np.int8),
                    (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, labels = connected_components(m, directed=False)
    return _dense_relabel(labels.astype(np.int64))


class _Signal:
    """Internal view: optional class channels + weighted quadratic channels."""

    def __init__(self, XC, XQ, eta):
        self.XC = None if XC is None or XC.shape[1] == 0 else np.asarray(XC, np.float64)
        self.XQ = np.asarray(XQ, dtype=np.float64)
        self.eta = float(eta)
        self.n = len(self.XQ)
        self.q_norm2 = (self.XQ ** 2).sum(axis=1)
        if self.XC is not None:
            # Entropy lower bound of each row; used to make self-distance zero
            # during candidate seeding.
            self.row_entropy = -(self.XC * np.log(np.maximum(self.XC, LOG_CLAMP))).sum(1)
        else:
            self.row_entropy = np.zeros(self.n)

    @property
    def C(self):
        return 0 if self.XC is None else self.XC.shape[1]

    def d_to(self, nodes, yc, yq):
        """Dissimilarity of given nodes to per-node values yc, yq."""
        sq = ((self.XQ[nodes] - yq) ** 2).sum(axis=1)
        if self.XC is None:
            return self.eta * sq
        ce = -(self.XC[nodes] * np.log(np.maximum(yc, LOG_CLAMP))).sum(axis=1)
        return ce + self.eta * sq


def _stats(sig: _Signal, assign, K):
    n = np.bincount(assign, minlength=K).astype(np.float64)
    SQ = np.empty((K, sig.XQ.shape[1]))
    for j in range(sig.XQ.shape[1]):
        SQ[:, j] = np.bincount(assign, weights=sig.XQ[:, j], minlength=K)
    Q = np.bincount(assign, weights=sig.q_norm2, minlength=K)
    if sig.XC is not None:
        SC = np.empty((K, sig.C))
        for j in range(sig.C):
            SC[:, j] = np.bincount(assign, weights=sig.XC[:, j], minlength=K)
    else:
        SC = np.zeros((K, 0))
    return n, SC, SQ, Q


def _fidelity(sig: _Signal, n, SC, SQ, Q):
    """Per-component fidelity at the optimal (mean) value."""
    safe_n = np.maximum(n, 1.0)
    quad = sig.eta * np.maximum(Q - (SQ ** 2).sum(axis=1) / safe_n, 0.0)
    if sig.XC is None:
        return quad
    Y = SC / safe_n[:, None]
    ce = -(SC * np.log(np.maximum(Y, LOG_CLAMP))).sum(axis=1)
    return ce + quad


def _values(n, SC, SQ):
    safe_n = np.maximum(n, 1.0)[:, None]
    return SC / safe_n, SQ / safe_n


def _seed_component(sig: _Signal, members, rng):
    """2-means++ style seeding under the dissimilarity (self-distance zeroed)."""
    m = len(members)
    i0 = members[int(rng.integers(m))]
    yc0 = sig.XC[i0] if sig.XC is not None else None
    dist = sig.d_to(members, yc0, sig.XQ[i0]) - sig.row_entropy[members]
    dist = np.maximum(dist, 0.0)
    tot = dist.sum()
    if tot <= 0.0:
        return None  # constant component, nothing to split
    i1 = members[int(rng.choice(m, p=dist / tot))]
    return i0, i1


def _merge_pass(sig, assign, K, n, SC, SQ, Q, fid, edges, w, lam):
    """One greedy merge sweep over adjacent component pairs.

    Pairs are visited in ascending (min id, max id) order; a merge is taken
    when the fidelity increase is strictly below lambda times the boundary
    weight currently between the two groups.  Returns the updated
    assignment (possibly the input) and whether anything merged.
    """
    cu, cv = assign[edges[:, 0]], assign[edges[:, 1]]
    mask = cu != cv
    if not np.any(mask):
        return assign, False, np.zeros(K, dtype=bool)
    lo = np.minimum(cu[mask], cv[mask])
    hi = np.maximum(cu[mask], cv[mask])
    pairs, inv = np.unique(np.column_stack([lo, hi]), axis=0, return_inverse=True)
    pw = np.bincount(inv, weights=w[mask])
    nbr = [dict() for _ in range(K)]
    for (a, b), weight in zip(pairs, pw):
        nbr[a][int(b)] = weight
        nbr[b][int(a)] = weight
    parent = np.arange(K, dtype=np.int64)

    def find(x):
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    n = n.copy(); SC = SC.copy(); SQ = SQ.copy(); Q = Q.copy(); fid = fid.copy()
    merged_any = False
    touched = np.zeros(K, dtype=bool)
    for a, b in pairs:
        ra, rb = find(int(a)), find(int(b))
        if ra == rb:
            continue
        wab = nbr[ra].get(rb, 0.0)
        nm = n[ra] + n[rb]
        sc = SC[ra] + SC[rb]
        sq = SQ[ra] + SQ[rb]
        qm = Q[ra] + Q[rb]
        quad = sig.eta * max(qm - float(sq @ sq) / nm, 0.0)
        if sig.XC is not None:
            ym = np.maximum(sc / nm, LOG_CLAMP)
            fm = -(sc * np.log(ym)).sum() + quad
        else:
            fm = quad
        if fm - fid[ra] - fid[rb] < lam * wab - _ACCEPT_TOL:
            keep, drop = (ra, rb) if ra < rb else (rb, ra)
            touched[keep] = touched[drop] = True
            parent[drop] = keep
            n[keep], SC[keep], SQ[keep], Q[keep], fid[keep] = nm, sc, sq, qm, fm
            dk = nbr[drop]
            nk = nbr[keep]
            nk.pop(drop, None)
            dk.pop(keep, None)
            for other, weight in dk.items():
                ro = find(other)
                if ro == keep:
                    continue
                nk[ro] = nk.get(ro, 0.0) + weight
                nbr[ro].pop(drop, None)
                nbr[ro][keep] = nk[ro]
            nbr[drop] = {}
            merged_any = True
    if not merged_any:
        return assign, False, touched
    roots = np.array([find(int(k)) for k in range(K)], dtype=np.int64)
    return roots[assign], True, touched


def solve_piecewise_constant(class_part, quad_part, eta, graph: AdjacencyGraph,
                             lam: float, params: ClusteringParams):
    """Generic cut-pursuit driver; returns (assignment, class_values,
    quad_values, energy, history)."""
    if graph.node_count == 0:
        raise ParameterError("cannot cluster an empty graph")
    XQ = np.asarray(quad_part, dtype=np.float64)
    if XQ.ndim != 2 or len(XQ) != graph.node_count:
        raise DataError("quadratic channels must be N x D over the graph nodes")
    XC = None if class_part is None else np.asarray(class_part, dtype=np.float64)
    if XC is not None and len(XC) != graph.node_count:
        raise DataError("class channels must have one row per graph node")
    sig = _Signal(XC, XQ, eta)
    N = graph.node_count
    edges, w = graph.edges, graph.weight
    eu, ev = edges[:, 0], edges[:, 1]
    total_w = w.sum()

    assign, K = _connected(N, edges)
    saturated = np.zeros(N, dtype=bool)
    n, SC, SQ, Q = _stats(sig, assign, K)
    fid = _fidelity(sig, n, SC, SQ, Q)
    cur_energy = float(fid.sum())  # all edges intra at the start
    history = [cur_energy]

    for it in range(params.max_outer_iterations):
        sizes = np.bincount(assign, minlength=K)
        comp_sat = np.zeros(K, dtype=bool)
        first = np.full(K, -1, dtype=np.int64)
        seen = np.unique(assign, return_index=True)
        first[seen[0]] = seen[1]
        comp_sat[seen[0]] = saturated[seen[1]]
        active = np.nonzero((sizes >= 2) & ~comp_sat)[0]
        improved = False
        if len(active):
            b = _split_round(sig, assign, K, active, edges, w, eu, ev, lam,
                             params, it)
            # Tentative refinement: keep edges joining same component + label.
            keep = (assign[eu] == assign[ev]) & (b[eu] == b[ev])
            new_assign, newK = _connected(N, edges[keep])
            # Local accept test per old component.
            nn, nSC, nSQ, nQ = _stats(sig, new_assign, newK)
            nfid = _fidelity(sig, nn, nSC, nSQ, nQ)
            owner = np.full(newK, -1, dtype=np.int64)
            owner[new_assign] = assign
            new_fid_per_old = np.bincount(owner, weights=nfid, minlength=K)
            intra_mask = (assign[eu] == assign[ev]) & (new_assign[eu] != new_assign[ev])
            intra_cut = np.bincount(assign[eu][intra_mask],
                                    weights=w[intra_mask], minlength=K)
            gain = fid - (new_fid_per_old + lam * intra_cut)
            accept = gain > _ACCEPT_TOL
            rejected = np.zeros(K, dtype=bool)
            rejected[active] = ~accept[active]
            saturated[rejected[assign]] = True
            if np.any(accept):
                node_accept = accept[assign]
                merged = np.where(node_accept, new_assign + K, assign)
                assign, K = _dense_relabel(merged)
                saturated[node_accept] = False
                improved = True
                n, SC, SQ, Q = _stats(sig, assign, K)
                fid = _fidelity(sig, n, SC, SQ, Q)
        # Merge sweep on the reduced graph.
        assign2, merged_any, touched = _merge_pass(sig, assign, K, n, SC, SQ,
                                                   Q, fid, edges, w, lam)
        if merged_any:
            # Merged components changed, so they may split again later.
            saturated[touched[assign]] = False
            assign, K = _dense_relabel(assign2)
            n, SC, SQ, Q = _stats(sig, assign, K)
            fid = _fidelity(sig, n, SC, SQ, Q)
            improved = True
        cut = w[assign[eu] != assign[ev]].sum() if len(edges) else 0.0
        new_energy = float(fid.sum() + lam * cut)
        history.append(new_energy)
        rel = (cur_energy - new_energy) / max(abs(cur_energy), 1e-300)
        cur_energy = new_energy
        if not improved or rel < params.relative_energy_tolerance:
            break

    # Never return worse than the all-singleton partition.
    singleton_energy = float(sig.row_entropy.sum() + lam * total_w)
    if singleton_energy < cur_energy - _ACCEPT_TOL:
        assign = np.arange(N, dtype=np.int64)
        K = N
        n, SC, SQ, Q = _stats(sig, assign, K)
        fid = _fidelity(sig, n, SC, SQ, Q)
        cur_energy = singleton_energy
        history.append(cur_energy)
    yc, yq = _values(n, SC, SQ)
    return assign, yc, yq, cur_energy, tuple(history)


def _split_round(sig, assign, K, active, edges, w, eu, ev, lam, params, it):
    """One global split round: seed two candidates per active component,
    then alternate exact binary min-cut assignment and candidate refits."""
    N = len(assign)
    C = sig.C
    D = sig.XQ.shape[1]
    Y0c = np.zeros((K, C)); Y1c = np.zeros((K, C))
    Y0q = np.zeros((K, D)); Y1q = np.zeros((K, D))
    splittable = np.zeros(K, dtype=bool)

    order = np.argsort(assign, kind="stable")
    counts = np.bincount(assign, minlength=K)
    offsets = np.concatenate([[0], np.cumsum(counts)])

    def seed_one(k):
        members = order[offsets[k]:offsets[k + 1]]
        rng = np.random.default_rng([params.seed, it, int(k)])
        picked = _seed_component(sig, members, rng)
        if picked is None:
            return
        i0, i1 = picked
        if C:
            Y0c[k] = sig.XC[i0]
            Y1c[k] = sig.XC[i1]
        Y0q[k] = sig.XQ[i0]
        Y1q[k] = sig.XQ[i1]
        splittable[k] = True

    if params.workers > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as ex:
            list(ex.map(seed_one, active))
    else:
        for k in active:
            seed_one(k)

    in_split = splittable[assign]
    split_edges = (assign[eu] == assign[ev]) & splittable[assign[eu]]
    pu, pv = eu[split_edges], ev[split_edges]
    pcap = lam * w[split_edges]
    nodes = np.nonzero(in_split)[0]
    b = np.zeros(N, dtype=bool)
    if len(nodes) == 0:
        return b
    for _ in range(params.split_iterations):
        A = np.zeros(N)
        B = np.zeros(N)
        comp = assign[nodes]
        A[nodes] = sig.d_to(nodes, Y0c[comp] if C else None, Y0q[comp])
        B[nodes] = sig.d_to(nodes, Y1c[comp] if C else None, Y1q[comp])
        b = _min_cut_labels(N, A, B, pu, pv, pcap)
        b[~in_split] = False
        # Refit candidates as the optimal value of each side.
        key = assign * 2 + b
        kn, kSC, kSQ, kQ = _stats(sig, key, 2 * K)
        kyc, kyq = _values(kn, kSC, kSQ)
        for k in np.nonzero(splittable)[0]:
            if kn[2 * k] > 0:
                Y0q[k] = kyq[2 * k]
                if C:
                    Y0c[k] = kyc[2 * k]
            if kn[2 * k + 1] > 0:
                Y1q[k] = kyq[2 * k + 1]
                if C:
                    Y1c[k] = kyc[2 * k + 1]
    return b


def solve_gmp(signal: NodeSignal, graph: AdjacencyGraph,
              params: ClusteringParams) -> Partition:
    """Solve the clustering problem for a class+position node signal.

    The returned components are connected, the stored values are optimal
    for the final assignment, and the energy history is non-increasing.
    Deterministic for fixed inputs and seed, independent of worker count.
    """
    if signal.num_nodes != graph.node_count:
        raise DataError("signal and graph disagree on the node count")
    assign, yc, yq, e, hist = solve_piecewise_constant(
        signal.class_scores, signal.position, params.eta, graph,
        params.lam, params)
    return Partition(assign, yc, yq, e, hist)
