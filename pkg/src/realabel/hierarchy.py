"""Is-a class hierarchy with LCA and subtree queries.

The hierarchy is a DAG over node tokens (wnids); edges point child to
parent and multiple parents are allowed. Classes attach to nodes through
the class manifest's ``wnid`` column.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import networkx as nx

from .errors import ContractError, IngestError, UnknownIdError


class ClassHierarchy:
    def __init__(self, edges: list[tuple[str, str]]):
        graph = nx.DiGraph()
        for child, parent in edges:
            graph.add_edge(child, parent)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            raise ContractError(f"hierarchy contains a cycle through {cycle[0][0]!r}")
        self.graph = graph
        self.class_to_node: dict[int, str] = {}
        # Distance assigned to node pairs with no common ancestor, and to
        # classes without a hierarchy node: larger than any real path.
        self.unrelated_distance = 2 * (graph.number_of_nodes() + 1)
        self._updists = lru_cache(maxsize=None)(self._updists_uncached)

    def __contains__(self, node: str) -> bool:
        return node in self.graph

    @property
    def node_count(self) -> int:
        return self.graph.number_of_nodes()

    def _require(self, node: str) -> None:
        if node not in self.graph:
            raise UnknownIdError(f"unknown hierarchy node {node!r}")

    def _updists_uncached(self, node: str) -> dict[str, int]:
        """Shortest edge counts from a node to each of its ancestors (incl. itself)."""
        return dict(nx.single_source_shortest_path_length(self.graph, node))

    def subtree(self, node: str) -> frozenset[str]:
        """The node and everything below it."""
        self._require(node)
        return frozenset(nx.ancestors(self.graph, node)) | {node}

    def lca(self, a: str, b: str) -> str | None:
        """Common ancestor minimizing the connecting path length.

        Ties break toward the ancestor nearer to ``a``, then by node token,
        so the result is deterministic. Returns None for disjoint trees.
        """
        self._require(a)
        self._require(b)
        da, db = self._updists(a), self._updists(b)
        common = da.keys() & db.keys()
        if not common:
            return None
        return min(common, key=lambda n: (da[n] + db[n], da[n], n))

    def distance(self, a: str, b: str) -> int:
        """Path length between two nodes through their LCA."""
        node = self.lca(a, b)
        if node is None:
            return self.unrelated_distance
        return self._updists(a)[node] + self._updists(b)[node]

    # -- class attachment -------------------------------------------------

    def map_classes(self, manifest) -> None:
        """Resolve every manifest wnid to a node; unknown wnids are an error."""
        mapping: dict[int, str] = {}
        for info in manifest.classes:
            if info.wnid is None:
                continue
            if info.wnid not in self.graph:
                raise ContractError(
                    f"class {info.class_id} ({info.display_name!r}) maps to "
                    f"missing hierarchy node {info.wnid!r}"
                )
            mapping[info.class_id] = info.wnid
        self.class_to_node = mapping

    def class_distance(self, a: int, b: int) -> int:
        """Hierarchy distance between two classes; unmapped classes are unrelated."""
        if a == b:
            return 0
        na = self.class_to_node.get(a)
        nb = self.class_to_node.get(b)
        if na is None or nb is None:
            return self.unrelated_distance
        return self.distance(na, nb)


def load_hierarchy(path) -> ClassHierarchy:
    """Load an edge list, one ``child_wnid,parent_wnid`` pair per line."""
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path=path)
    edges: list[tuple[str, str]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2 or not all(parts):
                raise IngestError(
                    "expected child_wnid,parent_wnid", path=path, line=lineno
                )
            edges.append((parts[0], parts[1]))
    if not edges:
        raise IngestError("no edges", path=path)
    try:
        return ClassHierarchy(edges)
    except ContractError as exc:
        raise IngestError(str(exc), path=path) from None
