"""Author a layout graph, validate it, and round-trip it through JSON.

A graph is a list of objects (category, 5x5 grid cell, size level 0-9,
appearance control) plus pairwise spatial relations.  This demo builds one by
hand, shows what the validator reports for a broken variant, and writes the
serialized document next to the script.
"""

from pathlib import Path

from covergen import (
    CategoryVocabulary,
    parse_graph_doc,
    serialize_graph,
    validate_graph,
)

OUT = Path(__file__).parent / "out"


def main() -> None:
    vocab = CategoryVocabulary(("disc", "panel", "wedge"))
    print("categories:", vocab.entries)

    doc = {
        "objects": [
            {"id": "moon", "category": "disc", "grid_cell": 7, "size": 6,
             "appearance": {"mode": "seed", "seed": 3}},
            {"id": "banner", "category": "solid", "grid_cell": 22, "size": 8,
             "appearance": {"mode": "random"}},
            {"id": "name", "category": "title", "grid_cell": 2, "size": 7,
             "appearance": {"mode": "random"}, "text": "Meridian"},
        ],
        "relations": [
            {"subject": "moon", "predicate": "above", "object": "banner"},
            {"subject": "name", "predicate": "above", "object": "moon"},
        ],
    }
    graph = parse_graph_doc(doc)
    report = validate_graph(graph, vocab)
    print("valid graph ->", "ok" if report.ok else report.violations)

    # The validator collects every violation instead of stopping at the first.
    broken = parse_graph_doc(
        {
            "objects": [
                {"id": "a", "category": "title", "grid_cell": 0, "size": 5,
                 "appearance": {"mode": "random"}, "text": "One"},
                {"id": "b", "category": "title", "grid_cell": 24, "size": 5,
                 "appearance": {"mode": "random"}},
            ],
            "relations": [],
        }
    )
    report = validate_graph(broken, vocab)
    print("broken graph ->")
    for line in report.violations:
        print("  -", line)

    OUT.mkdir(exist_ok=True)
    path = OUT / "graph.json"
    path.write_text(serialize_graph(graph))
    print("wrote", path)


if __name__ == "__main__":
    main()
