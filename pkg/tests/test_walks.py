import numpy as np
import pytest

from graphprobe.graph import from_edges, load_edge_list, neighbors
from graphprobe.walks import (
    UNIFORM,
    WalkStrategy,
    biased_step,
    biased_walk,
    biased_weights,
    context_pairs,
    generate_corpus,
    uniform_walk,
    write_corpus,
)


def test_uniform_walk_forced_path():
    g = load_edge_list("a b\n")
    walk = uniform_walk(g, 0, 4, np.random.default_rng(0))
    assert list(walk) == [0, 1, 0, 1]


def test_uniform_walk_isolated_vertex_halts():
    g = from_edges([(0, 1)], vertex_count=3)
    walk = uniform_walk(g, 2, 5, np.random.default_rng(0))
    assert list(walk) == [2]


def test_uniform_walk_empirical_distribution(triangle):
    rng = np.random.default_rng(123)
    walk = uniform_walk(triangle, 0, 100_001, rng)
    # next-step choice from each vertex should be uniform over its 2 neighbors
    for v in range(3):
        here = np.flatnonzero(walk[:-1] == v)
        nxt = walk[here + 1]
        others = [u for u in range(3) if u != v]
        share = np.mean(nxt == others[0])
        assert abs(share - 0.5) < 0.01


def test_biased_weights_p3(path3):
    a, b, c = (path3.labels.index(x) for x in "abc")
    w = biased_weights(path3, prev=a, cur=b, p=0.5, q=2.0)
    nbrs = list(neighbors(path3, b))
    expected = {a: 2.0, c: 0.5}
    assert w.tolist() == [expected[v] for v in nbrs]
    probs = w / w.sum()
    assert probs[nbrs.index(a)] == pytest.approx(0.8)
    assert probs[nbrs.index(c)] == pytest.approx(0.2)


def test_biased_weights_triangle_with_pendant():
    # triangle 0-1-2 plus pendant 3 hanging off 0; standing at 0 having
    # arrived from 1: returning to 1 costs 1/p, moving to 2 (adjacent to
    # the previous vertex) costs 1, and 3 (two hops from it) costs 1/q
    g = from_edges([(0, 1), (1, 2), (0, 2), (0, 3)])
    w = biased_weights(g, prev=1, cur=0, p=4.0, q=0.25)
    nbrs = list(neighbors(g, 0))
    expected = {1: 0.25, 2: 1.0, 3: 4.0}
    assert w.tolist() == [expected[v] for v in nbrs]


def test_biased_step_matches_analytic_distribution(path3):
    a, b, c = (path3.labels.index(x) for x in "abc")
    rng = np.random.default_rng(7)
    draws = np.array([biased_step(path3, a, b, 0.5, 2.0, rng) for _ in range(20_000)])
    assert abs(np.mean(draws == a) - 0.8) < 0.01


def test_biased_degenerate_params_match_uniform():
    g = from_edges([(0, 1), (0, 2), (0, 3), (1, 2)])
    rng = np.random.default_rng(11)
    draws = np.array([biased_step(g, 1, 0, 1.0, 1.0, rng) for _ in range(30_000)])
    for v in (1, 2, 3):
        assert abs(np.mean(draws == v) - 1 / 3) < 0.01


def test_biased_walk_edges_valid(karate):
    walk = biased_walk(karate, 5, 60, p=0.5, q=2.0, rng=np.random.default_rng(3))
    for u, v in zip(walk[:-1], walk[1:]):
        assert v in neighbors(karate, int(u))


def test_corpus_shape_and_validity(karate):
    corpus = generate_corpus(karate, walks_per_vertex=10, length=80, seed=0)
    assert len(corpus) == 10 * karate.vertex_count
    for walk in corpus.walks:
        assert len(walk) == 80
        assert int(walk[0]) in range(karate.vertex_count)
        for u, v in zip(walk[:-1], walk[1:]):
            assert v in neighbors(karate, int(u))


def test_corpus_each_vertex_rooted_per_pass(karate):
    corpus = generate_corpus(karate, walks_per_vertex=3, length=5, seed=9)
    roots = [int(w[0]) for w in corpus.walks]
    for pass_idx in range(3):
        chunk = roots[pass_idx * 34:(pass_idx + 1) * 34]
        assert sorted(chunk) == list(range(34))


def test_corpus_deterministic(karate):
    c1 = generate_corpus(karate, 4, 20, WalkStrategy("biased", 0.5, 2.0), seed=5)
    c2 = generate_corpus(karate, 4, 20, WalkStrategy("biased", 0.5, 2.0), seed=5)
    assert all(np.array_equal(a, b) for a, b in zip(c1.walks, c2.walks))
    c3 = generate_corpus(karate, 4, 20, WalkStrategy("biased", 0.5, 2.0), seed=6)
    assert any(not np.array_equal(a, b) for a, b in zip(c1.walks, c3.walks))


def test_corpus_singletons(triangle):
    corpus = generate_corpus(triangle, walks_per_vertex=1, length=1, seed=0)
    assert len(corpus) == 3
    assert all(len(w) == 1 for w in corpus.walks)


def test_context_pairs_enumeration(triangle):
    corpus = generate_corpus(triangle, 1, 1, seed=0)
    walk = np.array([0, 1, 2], dtype=np.int32)
    corpus = corpus.__class__([walk], 3, 1, UNIFORM, 0)
    pairs = context_pairs(corpus, window=1)
    assert pairs.pairs() == [(0, 1), (1, 0), (1, 2), (2, 1)]


def test_context_pairs_singleton_walk():
    from graphprobe.walks import WalkCorpus

    corpus = WalkCorpus([np.array([4], dtype=np.int32)], 1, 1, UNIFORM, 0)
    assert len(context_pairs(corpus, window=3)) == 0


def test_context_pairs_count_closed_form():
    from graphprobe.walks import WalkCorpus

    rng = np.random.default_rng(0)
    for length in (2, 5, 17, 80):
        for window in (1, 2, 10):
            walk = rng.integers(0, 100, size=length).astype(np.int32)
            corpus = WalkCorpus([walk], length, 1, UNIFORM, 0)
            expected = sum(
                min(i, window) + min(length - 1 - i, window) for i in range(length)
            )
            assert len(context_pairs(corpus, window)) == expected


def test_context_pairs_within_window(karate):
    corpus = generate_corpus(karate, 2, 30, seed=1)
    pairs = context_pairs(corpus, window=4)
    positions = {}
    for walk in corpus.walks:
        for i in range(len(walk)):
            positions.setdefault(int(walk[i]), [])
    # spot-check: every emitted pair occurs within distance <= window in some walk
    sample = np.random.default_rng(2).integers(0, len(pairs), size=200)
    arrs = [np.asarray(w) for w in corpus.walks]
    for t in sample:
        c, x = int(pairs.centers[t]), int(pairs.contexts[t])
        ok = False
        for w in arrs:
            ci = np.flatnonzero(w == c)
            xi = np.flatnonzero(w == x)
            if len(ci) and len(xi):
                d = np.abs(ci[:, None] - xi[None, :])
                if np.any((d >= 1) & (d <= 4)):
                    ok = True
                    break
        assert ok


def test_corpus_dump_uses_labels(path3, tmp_path):
    corpus = generate_corpus(path3, 1, 3, seed=0)
    out = tmp_path / "walks.txt"
    with open(out, "w") as fh:
        write_corpus(corpus, path3, fh)
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert all(tok in ("a", "b", "c") for line in lines for tok in line.split())


def test_strategy_validation():
    with pytest.raises(ValueError):
        WalkStrategy("biased", p=0.0, q=1.0)
    with pytest.raises(ValueError):
        WalkStrategy("hop")
