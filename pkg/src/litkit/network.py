"""Entity counting, collaboration graphs, community detection, and exports.

Counting rules: an entity is credited at most once per document. Countries
come from every affiliation of every author; institutions only from each
author's first-listed affiliation; authors are keyed "last, first"
(case-folded). An edge (a, b) gains weight 1 for each document in which both
entities appear.
"""
from __future__ import annotations

import csv
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .records import BiblioRecord
from .topicmodel import TopicAssignment

log = logging.getLogger(__name__)

KINDS = ("country", "institution", "author")
EXPORT_FORMATS = ("gexf", "graphml", "edge_csv")

_GEXF_NS = "http://gexf.net/1.3"
_GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"


class EmptyGraph(Exception):
    """Community detection needs a non-empty graph."""


class UnknownTopic(Exception):
    """Requested a topic id absent from the assignment."""


class IoError(Exception):
    """Graph export/import failed at the filesystem level."""


def _canon(text: str) -> str:
    return " ".join(text.split()).casefold()


def load_alias_map(path) -> dict[str, str]:
    """CSV ``alias,canonical`` rows merging entity spellings after case-fold."""
    aliases: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header and [h.strip().lower() for h in header[:2]] != ["alias", "canonical"]:
            raise ValueError(f"{path}: expected header alias,canonical")
        for row in reader:
            if len(row) >= 2 and row[0].strip():
                aliases[_canon(row[0])] = _canon(row[1])
    return aliases


def entities_in_record(
    record: BiblioRecord, kind: str, aliases: dict[str, str] | None = None
) -> list[str]:
    """Distinct canonical entities credited by one document, in first-seen order."""
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    aliases = aliases or {}
    seen: dict[str, None] = {}

    def add(key: str) -> None:
        if key:
            seen.setdefault(aliases.get(key, key), None)

    if kind == "author":
        for author in record.authors:
            last, first = author.identity_key()
            if last or first:
                add(f"{last}, {first}")
    elif kind == "institution":
        for author in record.authors:
            if author.affiliations:
                add(_canon(author.affiliations[0][0]))
    else:
        for author in record.authors:
            for _, country in author.affiliations:
                add(_canon(country))
    return list(seen)


def count_entities(
    records: list[BiblioRecord], kind: str, aliases: dict[str, str] | None = None
) -> dict[str, int]:
    """Per-entity document counts; records without usable data are skipped."""
    counts: dict[str, int] = {}
    skipped = 0
    for record in records:
        entities = entities_in_record(record, kind, aliases)
        if not entities:
            skipped += 1
            continue
        for e in entities:
            counts[e] = counts.get(e, 0) + 1
    if skipped:
        log.warning("%d records had no %s data and were skipped", skipped, kind)
    return counts


@dataclass
class CollabGraph:
    kind: str
    nodes: dict[str, int] = field(default_factory=dict)
    edges: dict[tuple[str, str], int] = field(default_factory=dict)
    doc_basis: list[str] = field(default_factory=list)

    def edge_key(self, a: str, b: str) -> tuple[str, str]:
        return (a, b) if a <= b else (b, a)

    def weight(self, a: str, b: str) -> int:
        return self.edges.get(self.edge_key(a, b), 0)

    def degree_weights(self) -> dict[str, float]:
        deg = {n: 0.0 for n in self.nodes}
        for (a, b), w in self.edges.items():
            deg[a] += w
            deg[b] += w
        return deg

    def total_edge_weight(self) -> float:
        return float(sum(self.edges.values()))


def build_graph(
    records: list[BiblioRecord], kind: str, aliases: dict[str, str] | None = None
) -> CollabGraph:
    g = CollabGraph(kind=kind)
    g.nodes = count_entities(records, kind, aliases)
    for record in records:
        entities = sorted(set(entities_in_record(record, kind, aliases)))
        for i in range(len(entities)):
            for j in range(i + 1, len(entities)):
                key = (entities[i], entities[j])
                g.edges[key] = g.edges.get(key, 0) + 1
        g.doc_basis.append(record.record_id)
    return g


def filter_graph(g: CollabGraph, min_publications: int) -> CollabGraph:
    """Drop nodes below the publication threshold along with their edges."""
    nodes = {n: c for n, c in g.nodes.items() if c >= min_publications}
    edges = {(a, b): w for (a, b), w in g.edges.items() if a in nodes and b in nodes}
    return CollabGraph(kind=g.kind, nodes=nodes, edges=edges, doc_basis=list(g.doc_basis))


@dataclass
class CommunityPartition:
    assignment: dict[str, int]
    modularity: float


def modularity(g: CollabGraph, assignment: dict[str, int]) -> float:
    """Weighted modularity Q of a partition (community-aggregated sums)."""
    m = g.total_edge_weight()
    if m == 0.0:
        return 0.0
    intra: dict[int, float] = {}
    degree: dict[int, float] = {}
    deg = g.degree_weights()
    for node, c in assignment.items():
        degree[c] = degree.get(c, 0.0) + deg[node]
    for (a, b), w in g.edges.items():
        if assignment[a] == assignment[b]:
            intra[assignment[a]] = intra.get(assignment[a], 0.0) + w
    q = 0.0
    for c, k in degree.items():
        q += intra.get(c, 0.0) / m - (k / (2.0 * m)) ** 2
    return q


def detect_communities(g: CollabGraph, seed: int = 0) -> CommunityPartition:
    """Greedy modularity optimization with deterministic sorted visiting.

    Local moves run until no move gains more than 1e-9, then communities are
    aggregated into supernodes and the process repeats to a fixpoint. The seed
    is accepted for interface parity; visiting order is always sorted keys.
    """
    del seed
    if not g.nodes:
        raise EmptyGraph("no nodes")
    m = g.total_edge_weight()
    node_order = sorted(g.nodes)
    if m == 0.0:
        return CommunityPartition({n: i for i, n in enumerate(node_order)}, 0.0)

    # level state: inter-supernode adjacency (each edge stored from both
    # ends), intra-supernode weight, and original node -> supernode map
    membership = {n: i for i, n in enumerate(node_order)}
    adjacency: dict[int, dict[int, float]] = {i: {} for i in range(len(node_order))}
    self_loops: dict[int, float] = {i: 0.0 for i in range(len(node_order))}
    for (a, b), w in g.edges.items():
        ia, ib = membership[a], membership[b]
        adjacency[ia][ib] = adjacency[ia].get(ib, 0.0) + w
        adjacency[ib][ia] = adjacency[ib].get(ia, 0.0) + w

    while True:
        nodes = sorted(adjacency)
        community = {u: u for u in nodes}
        k = {u: sum(adjacency[u].values()) + 2.0 * self_loops[u] for u in nodes}
        sigma = dict(k)  # total degree per community
        moved_any = False
        while True:
            moved = False
            for u in nodes:
                cu = community[u]
                links: dict[int, float] = {}
                for v, w in adjacency[u].items():
                    links[community[v]] = links.get(community[v], 0.0) + w
                sigma[cu] -= k[u]
                base = links.get(cu, 0.0) - sigma[cu] * k[u] / (2.0 * m)
                best_c, best_gain = cu, 0.0
                for c in sorted(links):
                    if c == cu:
                        continue
                    gain = (links[c] - sigma[c] * k[u] / (2.0 * m)) - base
                    if gain > best_gain + 1e-9:
                        best_c, best_gain = c, gain
                sigma[best_c] += k[u]
                if best_c != cu:
                    community[u] = best_c
                    moved = True
                    moved_any = True
            if not moved:
                break
        if not moved_any:
            break

        comm_ids = sorted(set(community.values()))
        remap = {c: i for i, c in enumerate(comm_ids)}
        new_adj: dict[int, dict[int, float]] = {i: {} for i in range(len(comm_ids))}
        new_self: dict[int, float] = {i: 0.0 for i in range(len(comm_ids))}
        intra_double: dict[int, float] = {i: 0.0 for i in range(len(comm_ids))}
        for u in nodes:
            cu = remap[community[u]]
            new_self[cu] += self_loops[u]
            for v, w in adjacency[u].items():
                cv = remap[community[v]]
                if cu == cv:
                    intra_double[cu] += w  # counted once from each end
                else:
                    new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
        for c, doubled in intra_double.items():
            new_self[c] += doubled / 2.0
        membership = {n: remap[community[membership[n]]] for n in membership}
        adjacency, self_loops = new_adj, new_self
        if len(comm_ids) == len(nodes):
            break

    # densify community ids in first-seen order over sorted node names
    final: dict[str, int] = {}
    relabel: dict[int, int] = {}
    for n in node_order:
        c = membership[n]
        if c not in relabel:
            relabel[c] = len(relabel)
        final[n] = relabel[c]
    return CommunityPartition(assignment=final, modularity=modularity(g, final))


def export_graph(
    g: CollabGraph,
    partition: CommunityPartition | None,
    path,
    format: str,
) -> None:
    """Write the graph as GEXF 1.3, GraphML, or an edge CSV.

    Node attributes carry the publication count and, when a partition is
    given, the community id; edges carry their weight.
    """
    if format not in EXPORT_FORMATS:
        raise ValueError(f"format must be one of {EXPORT_FORMATS}")
    if partition is not None:
        missing = [n for n in g.nodes if n not in partition.assignment]
        if missing:
            raise ValueError(f"partition does not cover {len(missing)} nodes")
    try:
        if format == "gexf":
            _write_gexf(g, partition, path)
        elif format == "graphml":
            _write_graphml(g, partition, path)
        else:
            _write_edge_csv(g, path)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _sorted_nodes(g: CollabGraph) -> list[str]:
    return sorted(g.nodes)


def _sorted_edges(g: CollabGraph) -> list[tuple[str, str, int]]:
    return [(a, b, w) for (a, b), w in sorted(g.edges.items())]


def _write_gexf(g, partition, path) -> None:
    ET.register_namespace("", _GEXF_NS)
    root = ET.Element(f"{{{_GEXF_NS}}}gexf", {"version": "1.3"})
    graph = ET.SubElement(root, f"{{{_GEXF_NS}}}graph", {"defaultedgetype": "undirected"})
    attrs = ET.SubElement(graph, f"{{{_GEXF_NS}}}attributes", {"class": "node"})
    ET.SubElement(attrs, f"{{{_GEXF_NS}}}attribute",
                  {"id": "0", "title": "publications", "type": "integer"})
    if partition is not None:
        ET.SubElement(attrs, f"{{{_GEXF_NS}}}attribute",
                      {"id": "1", "title": "community", "type": "integer"})
    nodes_el = ET.SubElement(graph, f"{{{_GEXF_NS}}}nodes")
    for n in _sorted_nodes(g):
        node_el = ET.SubElement(nodes_el, f"{{{_GEXF_NS}}}node", {"id": n, "label": n})
        values = ET.SubElement(node_el, f"{{{_GEXF_NS}}}attvalues")
        ET.SubElement(values, f"{{{_GEXF_NS}}}attvalue",
                      {"for": "0", "value": str(g.nodes[n])})
        if partition is not None:
            ET.SubElement(values, f"{{{_GEXF_NS}}}attvalue",
                          {"for": "1", "value": str(partition.assignment[n])})
    edges_el = ET.SubElement(graph, f"{{{_GEXF_NS}}}edges")
    for i, (a, b, w) in enumerate(_sorted_edges(g)):
        ET.SubElement(edges_el, f"{{{_GEXF_NS}}}edge",
                      {"id": str(i), "source": a, "target": b, "weight": str(w)})
    ET.indent(root)
    ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)


def _write_graphml(g, partition, path) -> None:
    ET.register_namespace("", _GRAPHML_NS)
    root = ET.Element(f"{{{_GRAPHML_NS}}}graphml")
    ET.SubElement(root, f"{{{_GRAPHML_NS}}}key",
                  {"id": "d0", "for": "node", "attr.name": "publications", "attr.type": "int"})
    if partition is not None:
        ET.SubElement(root, f"{{{_GRAPHML_NS}}}key",
                      {"id": "d1", "for": "node", "attr.name": "community", "attr.type": "int"})
    ET.SubElement(root, f"{{{_GRAPHML_NS}}}key",
                  {"id": "d2", "for": "edge", "attr.name": "weight", "attr.type": "int"})
    graph = ET.SubElement(root, f"{{{_GRAPHML_NS}}}graph",
                          {"id": "G", "edgedefault": "undirected"})
    for n in _sorted_nodes(g):
        node_el = ET.SubElement(graph, f"{{{_GRAPHML_NS}}}node", {"id": n})
        d0 = ET.SubElement(node_el, f"{{{_GRAPHML_NS}}}data", {"key": "d0"})
        d0.text = str(g.nodes[n])
        if partition is not None:
            d1 = ET.SubElement(node_el, f"{{{_GRAPHML_NS}}}data", {"key": "d1"})
            d1.text = str(partition.assignment[n])
    for a, b, w in _sorted_edges(g):
        edge_el = ET.SubElement(graph, f"{{{_GRAPHML_NS}}}edge", {"source": a, "target": b})
        d2 = ET.SubElement(edge_el, f"{{{_GRAPHML_NS}}}data", {"key": "d2"})
        d2.text = str(w)
    ET.indent(root)
    ET.ElementTree(root).write(path, encoding="utf-8", xml_declaration=True)


def _write_edge_csv(g, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "target", "weight"])
        for a, b, w in _sorted_edges(g):
            writer.writerow([a, b, w])


def load_graph(path, format: str, kind: str = "country") -> tuple[CollabGraph, dict[str, int] | None]:
    """Re-parse an exported graph; returns the graph and any community map."""
    if format not in EXPORT_FORMATS:
        raise ValueError(f"format must be one of {EXPORT_FORMATS}")
    g = CollabGraph(kind=kind)
    communities: dict[str, int] = {}
    if format == "edge_csv":
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for a, b, w in reader:
                g.nodes.setdefault(a, 0)
                g.nodes.setdefault(b, 0)
                g.edges[g.edge_key(a, b)] = int(w)
        return g, None
    tree = ET.parse(path)
    root = tree.getroot()
    ns = _GEXF_NS if format == "gexf" else _GRAPHML_NS
    if format == "gexf":
        for node_el in root.iter(f"{{{ns}}}node"):
            n = node_el.get("id")
            count = 0
            for av in node_el.iter(f"{{{ns}}}attvalue"):
                if av.get("for") == "0":
                    count = int(av.get("value"))
                elif av.get("for") == "1":
                    communities[n] = int(av.get("value"))
            g.nodes[n] = count
        for edge_el in root.iter(f"{{{ns}}}edge"):
            a, b = edge_el.get("source"), edge_el.get("target")
            g.edges[g.edge_key(a, b)] = int(float(edge_el.get("weight", "1")))
    else:
        for node_el in root.iter(f"{{{ns}}}node"):
            n = node_el.get("id")
            count = 0
            for data in node_el.findall(f"{{{ns}}}data"):
                if data.get("key") == "d0":
                    count = int(data.text)
                elif data.get("key") == "d1":
                    communities[n] = int(data.text)
            g.nodes[n] = count
        for edge_el in root.iter(f"{{{ns}}}edge"):
            a, b = edge_el.get("source"), edge_el.get("target")
            w = 1
            for data in edge_el.findall(f"{{{ns}}}data"):
                if data.get("key") == "d2":
                    w = int(data.text)
            g.edges[g.edge_key(a, b)] = w
    return g, communities or None


def write_rankings_csv(counts: dict[str, int], path) -> None:
    """entity,count sorted by count descending, then name."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "count"])
        for entity, count in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            writer.writerow([entity, count])


def topicwise(
    records: list[BiblioRecord],
    assignment: TopicAssignment,
    topic_ids: list[int],
    kind: str,
    aliases: dict[str, str] | None = None,
) -> dict[int, CollabGraph]:
    """Per-topic collaboration graphs over each topic's documents."""
    known = set(assignment.topic_ids())
    by_id = {r.record_id: r for r in records}
    out: dict[int, CollabGraph] = {}
    for t in topic_ids:
        if t not in known:
            raise UnknownTopic(f"topic {t} not present in assignment")
        doc_ids = assignment.doc_ids(t)
        subset = [by_id[rid] for rid in doc_ids if rid in by_id]
        out[t] = build_graph(subset, kind, aliases)
    return out


def write_topicwise_counts_csv(graphs: dict[int, CollabGraph], path) -> None:
    """entity,topic_id,count rows for stacked per-topic entity counts."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["entity", "topic_id", "count"])
        rows = []
        for t, g in graphs.items():
            for entity, count in g.nodes.items():
                rows.append((entity, t, count))
        rows.sort(key=lambda r: (r[0], r[1]))
        for row in rows:
            writer.writerow(row)
