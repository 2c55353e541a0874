"""Graph encoder: categories, locations and relations to per-object embeddings.

Each object node is a 163-dim vector (128-dim learned category embedding
concatenated with the 35 location bits).  For every relation the edge network
consumes [subject node | predicate embedding | object node] (454 dims) and
emits 1152 dims, split into three 384-dim segments: a candidate for the
subject, a new edge vector (computed but unused; a single round is run) and a
candidate for the object.  Per object, candidates are averaged and passed
through the vertex network to yield the final 128-dim embedding.

Objects without any incident relation go through a learned 163->384 linear map
and then the same vertex network, so every object always gets an embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .graphs import LOCATION_BITS, PREDICATES, CategoryVocabulary, LayoutGraph


@dataclass
class GraphTensors:
    """A layout graph lowered to index tensors, ready for the encoder.

    Edges are canonically sorted by (subject id, predicate, object id) so the
    encoder's arithmetic is bit-identical regardless of the order objects or
    relations were listed in.
    """

    category_ids: torch.Tensor  # (O,) long
    location_bits: torch.Tensor  # (O, 35) float
    edge_index: torch.Tensor  # (E, 2) long: subject, object positions
    predicate_ids: torch.Tensor  # (E,) long

    @property
    def num_objects(self) -> int:
        return self.category_ids.shape[0]

    @property
    def num_edges(self) -> int:
        return self.predicate_ids.shape[0]


def graph_tensors(graph: LayoutGraph, vocab: CategoryVocabulary) -> GraphTensors:
    index = {obj.id: i for i, obj in enumerate(graph.objects)}
    cats = torch.tensor([vocab.index(o.category) for o in graph.objects], dtype=torch.long)
    bits = torch.tensor(
        np.stack([o.location.bits() for o in graph.objects]) if graph.objects else np.zeros((0, LOCATION_BITS)),
        dtype=torch.float32,
    )
    ordered = sorted(graph.relations, key=lambda r: (r.subject, r.predicate, r.object))
    edges = torch.tensor([[index[r.subject], index[r.object]] for r in ordered], dtype=torch.long).reshape(-1, 2)
    preds = torch.tensor([PREDICATES.index(r.predicate) for r in ordered], dtype=torch.long)
    return GraphTensors(cats, bits, edges, preds)


def collate_graph_tensors(items: list[GraphTensors]) -> tuple[GraphTensors, torch.Tensor]:
    """Merge per-graph tensors into one disjoint multi-graph batch.

    Edge indices are offset to keep pointing at their own graph's objects, so
    the encoder runs unchanged on the result.  Also returns obj_to_img, a
    (O_total,) long tensor mapping each object row to its source graph.
    """
    cats, bits, edges, preds, owner = [], [], [], [], []
    offset = 0
    for img, t in enumerate(items):
        cats.append(t.category_ids)
        bits.append(t.location_bits)
        edges.append(t.edge_index + offset)
        preds.append(t.predicate_ids)
        owner.append(torch.full((t.num_objects,), img, dtype=torch.long))
        offset += t.num_objects
    merged = GraphTensors(
        torch.cat(cats), torch.cat(bits), torch.cat(edges), torch.cat(preds)
    )
    return merged, torch.cat(owner)


class GraphEncoder(nn.Module):
    def __init__(
        self,
        num_categories: int,
        embedding_dim: int = 128,
        hidden_dim: int = 512,
        candidate_dim: int = 384,
    ):
        super().__init__()
        self.embedding_dim = embedding_dim
        self.node_dim = embedding_dim + LOCATION_BITS
        self.candidate_dim = candidate_dim
        self.category_table = nn.Embedding(num_categories, embedding_dim)
        self.predicate_table = nn.Embedding(len(PREDICATES), embedding_dim)
        edge_in = 2 * self.node_dim + embedding_dim
        self.edge_net = nn.Sequential(
            nn.Linear(edge_in, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, 3 * candidate_dim),
            nn.ReLU(),
        )
        self.vertex_net = nn.Sequential(
            nn.Linear(candidate_dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, embedding_dim),
            nn.ReLU(),
        )
        self.isolated_map = nn.Linear(self.node_dim, candidate_dim)

    def node_vectors(self, tensors: GraphTensors) -> torch.Tensor:
        return torch.cat([self.category_table(tensors.category_ids), tensors.location_bits], dim=1)

    def build_edge_inputs(self, tensors: GraphTensors) -> torch.Tensor:
        """One 454-dim vector per relation (at default dims)."""
        nodes = self.node_vectors(tensors)
        if tensors.num_edges == 0:
            return nodes.new_zeros((0, 2 * self.node_dim + self.embedding_dim))
        subj = nodes[tensors.edge_index[:, 0]]
        obj = nodes[tensors.edge_index[:, 1]]
        pred = self.predicate_table(tensors.predicate_ids)
        return torch.cat([subj, pred, obj], dim=1)

    def edge_pass(self, v: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
        """Split the edge network output into (subject candidate, new edge,
        object candidate) segments of candidate_dim each."""
        out = self.edge_net(v)
        return torch.split(out, self.candidate_dim, dim=1)

    def vertex_pool(self, tensors: GraphTensors, subj_cand: torch.Tensor, obj_cand: torch.Tensor) -> torch.Tensor:
        """Average each object's candidate segments, then run the vertex net.

        Isolated objects are mapped straight from their node vector instead.
        """
        n = tensors.num_objects
        pooled = subj_cand.new_zeros((n, self.candidate_dim))
        counts = subj_cand.new_zeros(n)
        if tensors.num_edges > 0:
            pooled = pooled.index_add(0, tensors.edge_index[:, 0], subj_cand)
            pooled = pooled.index_add(0, tensors.edge_index[:, 1], obj_cand)
            ones = subj_cand.new_ones(tensors.num_edges)
            counts = counts.index_add(0, tensors.edge_index[:, 0], ones)
            counts = counts.index_add(0, tensors.edge_index[:, 1], ones)
        isolated = counts == 0
        pooled = pooled / counts.clamp(min=1).unsqueeze(1)
        if isolated.any():
            nodes = self.node_vectors(tensors)
            fallback = self.isolated_map(nodes)
            pooled = torch.where(isolated.unsqueeze(1), fallback, pooled)
        return self.vertex_net(pooled)

    def forward(self, tensors: GraphTensors) -> torch.Tensor:
        """Embeddings (O, 128), order-aligned with the graph's object list."""
        v = self.build_edge_inputs(tensors)
        subj_cand, _new_edge, obj_cand = self.edge_pass(v)
        return self.vertex_pool(tensors, subj_cand, obj_cand)
