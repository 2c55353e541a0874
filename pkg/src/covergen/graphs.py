"""Layout graphs: the user-facing design input.

A layout graph is a directed graph of cover elements (scene objects, solid
color regions, one title) with six-way spatial relation edges.  Each object
carries a coarse position/size code on a 5x5 grid with 10 size levels,
expressed as a 35-bit two-hot vector (25 grid bits + 10 size bits).

Everything in this module is a pure value type or a pure function; nothing
here touches the neural networks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

GRID_SIDE = 5
GRID_CELLS = GRID_SIDE * GRID_SIDE
SIZE_LEVELS = 10
LOCATION_BITS = GRID_CELLS + SIZE_LEVELS

# Reserved categories, always present in a vocabulary.
SOLID_CATEGORY = "solid"
TITLE_CATEGORY = "title"

PREDICATES = ("right_of", "left_of", "above", "below", "surrounding", "inside")

_INVERSE = {
    "right_of": "left_of",
    "left_of": "right_of",
    "above": "below",
    "below": "above",
    "surrounding": "inside",
    "inside": "surrounding",
}

APPEARANCE_MODES = ("random", "seed", "explicit")


class GraphError(ValueError):
    """Raised for malformed location codes or graph documents."""


def encode_location(grid_cell: int, size_level: int) -> np.ndarray:
    """Two-hot 35-bit code: bit[grid_cell] and bit[25 + size_level - 1].

    Grid cells are row-major from the top-left (cell 0 = top-left,
    cell 4 = top-right).  Size levels run 1..10.
    """
    if not 0 <= grid_cell < GRID_CELLS:
        raise GraphError(f"grid_cell must be in [0, {GRID_CELLS - 1}], got {grid_cell}")
    if not 1 <= size_level <= SIZE_LEVELS:
        raise GraphError(f"size_level must be in [1, {SIZE_LEVELS}], got {size_level}")
    bits = np.zeros(LOCATION_BITS, dtype=np.uint8)
    bits[grid_cell] = 1
    bits[GRID_CELLS + size_level - 1] = 1
    return bits


def decode_location(bits: np.ndarray) -> tuple[int, int]:
    """Inverse of :func:`encode_location`; rejects anything not two-hot."""
    bits = np.asarray(bits)
    if bits.shape != (LOCATION_BITS,):
        raise GraphError(f"location vector must have {LOCATION_BITS} entries, got shape {bits.shape}")
    grid_part = np.flatnonzero(bits[:GRID_CELLS])
    size_part = np.flatnonzero(bits[GRID_CELLS:])
    if len(grid_part) != 1:
        raise GraphError(f"malformed location: {len(grid_part)} bits set in grid segment, expected 1")
    if len(size_part) != 1:
        raise GraphError(f"malformed location: {len(size_part)} bits set in size segment, expected 1")
    return int(grid_part[0]), int(size_part[0]) + 1


def inverse_predicate(predicate: str) -> str:
    if predicate not in _INVERSE:
        raise GraphError(f"unknown predicate {predicate!r}")
    return _INVERSE[predicate]


@dataclass(frozen=True)
class LocationVector:
    grid_cell: int
    size_level: int

    def __post_init__(self):
        encode_location(self.grid_cell, self.size_level)  # range check

    def bits(self) -> np.ndarray:
        return encode_location(self.grid_cell, self.size_level)

    @classmethod
    def from_bits(cls, bits: np.ndarray) -> "LocationVector":
        cell, size = decode_location(bits)
        return cls(cell, size)


@dataclass(frozen=True)
class Appearance:
    """How the object's appearance vector is chosen at generation time."""

    mode: str = "random"
    seed: int | None = None
    vector: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.mode not in APPEARANCE_MODES:
            raise GraphError(f"appearance mode must be one of {APPEARANCE_MODES}, got {self.mode!r}")
        if self.mode == "seed" and self.seed is None:
            raise GraphError("appearance mode 'seed' requires a seed")
        if self.mode == "explicit" and not self.vector:
            raise GraphError("appearance mode 'explicit' requires a vector")


@dataclass(frozen=True)
class LayoutObject:
    id: str
    category: str
    location: LocationVector
    appearance: Appearance = field(default_factory=Appearance)
    title_text: str | None = None


@dataclass(frozen=True)
class Relation:
    subject: str
    predicate: str
    object: str


@dataclass(frozen=True)
class LayoutGraph:
    objects: tuple[LayoutObject, ...]
    relations: tuple[Relation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))
        object.__setattr__(self, "relations", tuple(self.relations))

    def object_by_id(self, obj_id: str) -> LayoutObject:
        for obj in self.objects:
            if obj.id == obj_id:
                return obj
        raise KeyError(obj_id)

    @property
    def title_object(self) -> LayoutObject | None:
        for obj in self.objects:
            if obj.category == TITLE_CATEGORY:
                return obj
        return None


class CategoryVocabulary:
    """Ordered category names with dense 0-based ids.

    The reserved categories "solid" and "title" are always present exactly
    once; scene categories come from the ingested dataset.
    """

    def __init__(self, scene_categories: list[str] | tuple[str, ...] = ()):
        entries: list[str] = []
        for name in scene_categories:
            if name in (SOLID_CATEGORY, TITLE_CATEGORY):
                continue
            if name not in entries:
                entries.append(name)
        entries.extend([SOLID_CATEGORY, TITLE_CATEGORY])
        self.entries: tuple[str, ...] = tuple(entries)
        self._index = {name: i for i, name in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        if name not in self._index:
            raise KeyError(f"unknown category {name!r}")
        return self._index[name]

    def name(self, idx: int) -> str:
        return self.entries[idx]

    def __eq__(self, other) -> bool:
        return isinstance(other, CategoryVocabulary) and self.entries == other.entries

    def __repr__(self) -> str:
        return f"CategoryVocabulary({len(self)} categories)"


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_graph(graph: LayoutGraph, vocab: CategoryVocabulary | None = None) -> ValidationReport:
    """Collect *all* violations rather than stopping at the first."""
    report = ValidationReport()
    add = report.violations.append

    if not graph.objects:
        add("graph has no objects")

    seen_ids: set[str] = set()
    titles = 0
    for i, obj in enumerate(graph.objects):
        where = f"object {obj.id!r}"
        if obj.id in seen_ids:
            add(f"duplicate object id {obj.id!r}")
        seen_ids.add(obj.id)
        if vocab is not None and obj.category not in vocab:
            add(f"{where}: unknown category {obj.category!r}")
        if obj.category == TITLE_CATEGORY:
            titles += 1
            if not obj.title_text:
                add(f"{where}: title object requires non-empty text")
        elif obj.title_text is not None:
            add(f"{where}: text is only allowed on title objects")
        try:
            encode_location(obj.location.grid_cell, obj.location.size_level)
        except GraphError as exc:
            add(f"{where}: {exc}")
    if titles > 1:
        add(f"multiple title objects ({titles}); at most one is allowed")

    seen_triples: set[tuple[str, str, str]] = set()
    for rel in graph.relations:
        triple = (rel.subject, rel.predicate, rel.object)
        where = f"relation ({rel.subject!r}, {rel.predicate!r}, {rel.object!r})"
        if rel.predicate not in PREDICATES:
            add(f"{where}: unknown predicate")
        if rel.subject == rel.object:
            add(f"{where}: subject and object are the same id")
        for end in (rel.subject, rel.object):
            if end not in seen_ids:
                add(f"{where}: unknown object id {end!r}")
        if triple in seen_triples:
            add(f"{where}: duplicate triple")
        seen_triples.add(triple)

    return report


# ---------------------------------------------------------------------------
# Canonical document format.
#
# {"objects": [{"id", "category", "grid_cell", "size", "appearance", "text"?}],
#  "relations": [{"subject", "predicate", "object"}]}
#
# serialize_graph emits keys in this fixed order; parse_graph rejects unknown
# fields with path-qualified messages, so parse(serialize(g)) == g and
# serializing again is byte-identical.
# ---------------------------------------------------------------------------


def _object_to_doc(obj: LayoutObject) -> dict:
    doc: dict = {
        "id": obj.id,
        "category": obj.category,
        "grid_cell": obj.location.grid_cell,
        "size": obj.location.size_level,
    }
    app: dict = {"mode": obj.appearance.mode}
    if obj.appearance.mode == "seed":
        app["seed"] = obj.appearance.seed
    elif obj.appearance.mode == "explicit":
        app["vector"] = list(obj.appearance.vector)
    doc["appearance"] = app
    if obj.title_text is not None:
        doc["text"] = obj.title_text
    return doc


def graph_to_doc(graph: LayoutGraph) -> dict:
    return {
        "objects": [_object_to_doc(o) for o in graph.objects],
        "relations": [
            {"subject": r.subject, "predicate": r.predicate, "object": r.object}
            for r in graph.relations
        ],
    }


def serialize_graph(graph: LayoutGraph) -> str:
    return json.dumps(graph_to_doc(graph), indent=2) + "\n"


def _expect(doc, path: str, keys: dict[str, type | tuple[type, ...]], optional: set[str] = frozenset()):
    if not isinstance(doc, dict):
        raise GraphError(f"{path}: expected an object")
    for key in doc:
        if key not in keys:
            raise GraphError(f"{path}/{key}: unknown field")
    for key, typ in keys.items():
        if key in optional and key not in doc:
            continue
        if key not in doc:
            raise GraphError(f"{path}/{key}: missing field")
        if not isinstance(doc[key], typ) or isinstance(doc[key], bool):
            raise GraphError(f"{path}/{key}: wrong type")


def _parse_appearance(doc, path: str) -> Appearance:
    _expect(doc, path, {"mode": str, "seed": int, "vector": list}, optional={"seed", "vector"})
    mode = doc["mode"]
    if mode not in APPEARANCE_MODES:
        raise GraphError(f"{path}/mode: must be one of {APPEARANCE_MODES}")
    if mode == "seed":
        if "seed" not in doc:
            raise GraphError(f"{path}/seed: missing field")
        if "vector" in doc:
            raise GraphError(f"{path}/vector: not allowed for mode 'seed'")
        return Appearance(mode="seed", seed=doc["seed"])
    if mode == "explicit":
        if "vector" not in doc:
            raise GraphError(f"{path}/vector: missing field")
        if "seed" in doc:
            raise GraphError(f"{path}/seed: not allowed for mode 'explicit'")
        vec = doc["vector"]
        if not vec or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in vec):
            raise GraphError(f"{path}/vector: must be a non-empty list of numbers")
        return Appearance(mode="explicit", vector=tuple(float(v) for v in vec))
    if "seed" in doc or "vector" in doc:
        extra = "seed" if "seed" in doc else "vector"
        raise GraphError(f"{path}/{extra}: not allowed for mode 'random'")
    return Appearance()


def _parse_object(doc, path: str) -> LayoutObject:
    _expect(
        doc,
        path,
        {"id": str, "category": str, "grid_cell": int, "size": int, "appearance": dict, "text": str},
        optional={"text"},
    )
    try:
        location = LocationVector(doc["grid_cell"], doc["size"])
    except GraphError as exc:
        raise GraphError(f"{path}: {exc}") from None
    return LayoutObject(
        id=doc["id"],
        category=doc["category"],
        location=location,
        appearance=_parse_appearance(doc["appearance"], f"{path}/appearance"),
        title_text=doc.get("text"),
    )


def parse_graph_doc(doc) -> LayoutGraph:
    _expect(doc, "", {"objects": list, "relations": list})
    objects = [_parse_object(o, f"/objects/{i}") for i, o in enumerate(doc["objects"])]
    relations = []
    for i, rel in enumerate(doc["relations"]):
        path = f"/relations/{i}"
        _expect(rel, path, {"subject": str, "predicate": str, "object": str})
        if rel["predicate"] not in PREDICATES:
            raise GraphError(f"{path}/predicate: must be one of {PREDICATES}")
        relations.append(Relation(rel["subject"], rel["predicate"], rel["object"]))
    return LayoutGraph(tuple(objects), tuple(relations))


def parse_graph(text: str) -> LayoutGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"document is not valid JSON: {exc}") from None
    return parse_graph_doc(doc)
