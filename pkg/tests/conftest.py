import numpy as np
import pytest
import torch

from covergen import (
    Appearance,
    CategoryVocabulary,
    LayoutGraph,
    LayoutObject,
    LocationVector,
    Relation,
    load_training_set,
    make_cover_corpus,
    make_scene_dataset,
    profile,
)

torch.set_num_threads(1)

SCENE_CATS = ("disc", "panel", "wedge")


@pytest.fixture(scope="session")
def vocab():
    return CategoryVocabulary(SCENE_CATS)


def make_object(obj_id, category, cell=12, size=5, appearance=None, text=None):
    return LayoutObject(
        id=obj_id,
        category=category,
        location=LocationVector(cell, size),
        appearance=appearance or Appearance(),
        title_text=text,
    )


def simple_graph():
    """Two scene objects, a solid, and a title, with a couple of relations."""
    objects = (
        make_object("a", "disc", cell=6, size=4),
        make_object("b", "panel", cell=18, size=6),
        make_object("s0", "solid", cell=2, size=3),
        make_object("t0", "title", cell=22, size=4, text="Lorem Ipsum"),
    )
    relations = (
        Relation("a", "above", "b"),
        Relation("s0", "left_of", "b"),
        Relation("t0", "below", "b"),
    )
    return LayoutGraph(objects, relations)


def random_graph(rng: np.random.Generator, num_objects=4, num_relations=3, with_title=False):
    cats = [SCENE_CATS[rng.integers(len(SCENE_CATS))] for _ in range(num_objects)]
    objects = [
        make_object(
            f"obj{i}",
            cats[i],
            cell=int(rng.integers(25)),
            size=int(rng.integers(1, 11)),
        )
        for i in range(num_objects)
    ]
    if with_title:
        objects.append(
            make_object(
                "title0",
                "title",
                cell=int(rng.integers(25)),
                size=int(rng.integers(1, 11)),
                text="Lorem Ipsum",
            )
        )
    ids = [o.id for o in objects]
    preds = ("right_of", "left_of", "above", "below", "surrounding", "inside")
    triples = set()
    relations = []
    if len(ids) < 2:
        num_relations = 0
    tries = 0
    while len(relations) < num_relations and tries < 50:
        tries += 1
        s, o = rng.choice(len(ids), 2, replace=False)
        p = preds[rng.integers(len(preds))]
        if (ids[s], p, ids[o]) in triples:
            continue
        triples.add((ids[s], p, ids[o]))
        relations.append(Relation(ids[s], p, ids[o]))
    return LayoutGraph(tuple(objects), tuple(relations))


@pytest.fixture(scope="session")
def corpus_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    make_scene_dataset(root / "scenes", num_images=6, seed=11, size=64)
    make_cover_corpus(root / "covers", num_covers=6, seed=11, size=64)
    return root / "scenes", root / "covers"


@pytest.fixture(scope="session")
def training_setup(corpus_dirs):
    """(samples, covers, vocab) on the small synthetic corpus at canvas 64."""
    cfg = profile("overfit10")
    cfg.data.limit = 6
    scenes, covers = corpus_dirs
    return load_training_set(scenes, covers, cfg)


@pytest.fixture(scope="session")
def small_config():
    """Desk-scale run config with narrow networks.

    Trainer-mechanics tests exercise batching, phase isolation and
    checkpointing, none of which depend on layer widths, and the full-width
    cover generator alone costs ~4 GB per live trainer.
    """
    cfg = profile("overfit10")
    cfg.data.limit = 6
    cfg.model.cover_base = 16
    cfg.model.cover_blocks = 2
    cfg.model.disc_base = 16
    return cfg
