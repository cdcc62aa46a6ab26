"""Two-stage search: coarse recall, fused rerank, metrics, parallelism."""

import json

import numpy as np
import pytest

from eercf import (
    EmptyGallery,
    EmptyInput,
    Gallery,
    InvalidConfig,
    InvalidParams,
    Metrics,
    MissingGroundTruth,
    RankedList,
    SearchConfig,
    SynthConfig,
    TextRecord,
    THREADS_ENV_VAR,
    UnknownId,
    VideoRecord,
    brute_force_rank,
    evaluate,
    fused_score,
    generate,
    recall_topk,
    rerank,
    resolve_workers,
    search,
    search_many,
    to_json_line,
    tib_aggregate,
    normalize,
)


def _flat_video(record_id: str, direction: np.ndarray) -> VideoRecord:
    """A video whose frames and patches all point along ``direction``."""
    d = len(direction)
    frames = np.tile(direction, (2, 1)).astype(np.float32)
    patches = np.tile(direction, (2, 2, 1)).reshape(2, 2, d).astype(np.float32)
    return VideoRecord(id=record_id, frames=frames, patches=patches)


def _query(vec: np.ndarray, text_id: str = "q") -> TextRecord:
    return TextRecord.from_vector(text_id, vec)


# ---------------------------------------------------------------------------
# Config and result types
# ---------------------------------------------------------------------------

def test_config_normalizes_fusion_weights():
    config = SearchConfig(fusion_weights=(5.0, 5.0, 1.0))
    np.testing.assert_allclose(config.fusion_weights, (5 / 11, 5 / 11, 1 / 11), rtol=1e-12)
    assert abs(sum(config.fusion_weights) - 1.0) < 1e-9


def test_config_rejects_bad_values():
    with pytest.raises(InvalidConfig):
        SearchConfig(top_k=0)
    with pytest.raises(InvalidConfig):
        SearchConfig(top_k=-3)
    with pytest.raises(InvalidConfig):
        SearchConfig(fusion_weights=(-1.0, 1.0, 1.0))
    with pytest.raises(InvalidConfig):
        SearchConfig(fusion_weights=(0.0, 0.0, 0.0))


def test_ranked_list_invariants():
    RankedList(entries=(("a", 2.0), ("b", 2.0), ("c", 1.0)), stage="final")
    with pytest.raises(InvalidParams):
        RankedList(entries=(("a", 1.0), ("b", 2.0)), stage="final")
    with pytest.raises(InvalidParams):
        RankedList(entries=(("a", 2.0), ("a", 1.0)), stage="recall")


def test_metrics_from_ranks_and_invariants():
    metrics = Metrics.from_ranks([1, 2, 7, None, 11])
    assert metrics.r_at_1 == 20.0
    assert metrics.r_at_5 == 40.0
    assert metrics.r_at_10 == 60.0
    assert metrics.mean == pytest.approx((20 + 40 + 60) / 3, abs=1e-9)
    assert metrics.as_dict()["mean"] == metrics.mean
    with pytest.raises(InvalidParams):
        Metrics(r_at_1=50.0, r_at_5=40.0, r_at_10=60.0)
    with pytest.raises(InvalidParams):
        Metrics(r_at_1=-1.0, r_at_5=40.0, r_at_10=60.0)
    with pytest.raises(EmptyInput):
        Metrics.from_ranks([])


# ---------------------------------------------------------------------------
# Stage one: coarse recall
# ---------------------------------------------------------------------------

def test_recall_orders_by_coarse_similarity():
    gallery = Gallery([
        _flat_video("best", np.array([1.0, 0.0])),
        _flat_video("mid", np.array([0.8, 0.6])),
        _flat_video("worst", np.array([0.0, 1.0])),
    ])
    result = recall_topk(_query(np.array([1.0, 0.0])), gallery, 3)
    assert result.ids() == ["best", "mid", "worst"]
    assert result.stage == "recall"
    scores = [score for _, score in result.entries]
    np.testing.assert_allclose(scores, [1.0, 0.8, 0.0], rtol=0, atol=1e-6)


def test_recall_clamps_k_to_gallery_size():
    gallery = Gallery([_flat_video(f"v{i}", np.eye(4)[i]) for i in range(4)])
    result = recall_topk(_query(np.eye(4)[2]), gallery, 100)
    assert len(result) == 4
    assert result.ids()[0] == "v2"


def test_recall_planted_winner_scores_one():
    rng = np.random.default_rng(0)
    target = normalize(rng.standard_normal(8))
    videos = [_flat_video(f"v{i}", normalize(rng.standard_normal(8))) for i in range(9)]
    videos.append(_flat_video("planted", target))
    result = recall_topk(_query(target), Gallery(videos), 10)
    assert result.ids()[0] == "planted"
    assert result.entries[0][1] == pytest.approx(1.0, abs=1e-6)


def test_recall_matches_full_sort_oracle():
    rng = np.random.default_rng(1)
    videos = [_flat_video(f"v{i:02d}", rng.standard_normal(6)) for i in range(20)]
    gallery = Gallery(videos)
    text = _query(rng.standard_normal(6))
    result = recall_topk(text, gallery, 20)
    query64 = np.asarray(text.feature, dtype=np.float64)
    oracle = sorted(
        ((float(video.v_l1 @ query64), pos, video.id) for pos, video in enumerate(videos)),
        key=lambda item: (-item[0], item[1]),
    )
    assert result.ids() == [video_id for _, _, video_id in oracle]


def test_recall_rejects_empty_gallery_and_bad_k():
    gallery = Gallery([_flat_video("v", np.array([1.0, 0.0]))])
    with pytest.raises(EmptyGallery):
        recall_topk(_query(np.array([1.0, 0.0])), Gallery([]), 5)
    with pytest.raises(InvalidConfig):
        recall_topk(_query(np.array([1.0, 0.0])), gallery, 0)


# ---------------------------------------------------------------------------
# Stage two: fused rerank
# ---------------------------------------------------------------------------

def test_coarse_only_weights_preserve_recall_order():
    rng = np.random.default_rng(2)
    videos = [
        VideoRecord(id=f"v{i}",
                    frames=rng.standard_normal((3, 5)).astype(np.float32),
                    patches=rng.standard_normal((3, 2, 5)).astype(np.float32))
        for i in range(8)
    ]
    gallery = Gallery(videos)
    text = _query(rng.standard_normal(5))
    config = SearchConfig(top_k=8, fusion_weights=(1.0, 0.0, 0.0))
    coarse = recall_topk(text, gallery, 8)
    fused = rerank(text, coarse, gallery, config)
    assert fused.ids() == coarse.ids()


def test_single_candidate_keeps_its_fused_score():
    gallery = Gallery([_flat_video("only", np.array([0.6, 0.8]))])
    text = _query(np.array([1.0, 0.0]))
    config = SearchConfig(top_k=1)
    candidates = recall_topk(text, gallery, 1)
    result = rerank(text, candidates, gallery, config)
    assert result.ids() == ["only"]
    assert result.entries[0][1] == pytest.approx(fused_score(text, "only", gallery, config))


def test_rerank_unknown_candidate_rejected():
    gallery = Gallery([_flat_video("known", np.array([1.0, 0.0]))])
    ghost = RankedList(entries=(("ghost", 1.0),), stage="recall")
    with pytest.raises(UnknownId):
        rerank(_query(np.array([1.0, 0.0])), ghost, gallery, SearchConfig())


def test_rerank_matches_componentwise_recomputation():
    rng = np.random.default_rng(3)
    videos = [
        VideoRecord(id=f"v{i}",
                    frames=rng.standard_normal((4, 6)).astype(np.float32),
                    patches=rng.standard_normal((4, 3, 6)).astype(np.float32))
        for i in range(10)
    ]
    gallery = Gallery(videos)
    text = _query(rng.standard_normal(6))
    config = SearchConfig(top_k=10)
    result = search(text, gallery, config)
    query = np.asarray(text.feature, dtype=np.float64)
    w1, w2, w3 = config.fusion_weights
    for video_id, score in result.entries:
        video = gallery.get(video_id)
        s1 = float(video.v_l1 @ query)
        frame_vec = normalize(tib_aggregate(video.frames.astype(np.float64), query, 0.1))
        patch_vec = normalize(
            tib_aggregate(video.patches.astype(np.float64).reshape(-1, 6), query, 0.01))
        expected = w1 * s1 + w2 * float(frame_vec @ query) + w3 * float(patch_vec @ query)
        assert score == pytest.approx(expected, abs=1e-9)


# ---------------------------------------------------------------------------
# Composed search
# ---------------------------------------------------------------------------

def test_full_depth_search_equals_brute_force():
    gallery, texts, _ = generate(SynthConfig(
        n_videos=40, n_queries=5, dim=12, frames=3, patches_per_frame=2, seed=17))
    config = SearchConfig(top_k=40)
    for text in texts:
        fast = search(text, gallery, config)
        slow = brute_force_rank(text, gallery, config)
        assert fast.ids() == slow.ids()
        for (_, a), (_, b) in zip(fast.entries, slow.entries):
            assert a == pytest.approx(b, abs=1e-6)


def test_top1_search_returns_the_coarse_winner():
    gallery, texts, _ = generate(SynthConfig(
        n_videos=25, n_queries=5, dim=8, frames=3, patches_per_frame=2, seed=19))
    for text in texts:
        final = search(text, gallery, SearchConfig(top_k=1))
        assert len(final) == 1
        assert final.ids() == recall_topk(text, gallery, 1).ids()


def test_final_ids_are_subset_of_recall_ids():
    gallery, texts, _ = generate(SynthConfig(
        n_videos=60, n_queries=6, dim=10, frames=3, patches_per_frame=2, seed=23))
    config = SearchConfig(top_k=15)
    for text in texts:
        recall_ids = set(recall_topk(text, gallery, 15).ids())
        final_ids = set(search(text, gallery, config).ids())
        assert final_ids == recall_ids


def test_fine_features_lift_planted_match_from_coarse_rank3_to_final_rank1():
    e0 = np.array([1.0, 0.0, 0.0, 0.0])
    e1 = np.array([0.0, 1.0, 0.0, 0.0])
    # Truth: only one frame (and its patches) matches the query direction.
    truth_frames = np.stack([e0, e1, e1, e1]).astype(np.float32)
    truth_patches = np.stack([np.tile(f, (2, 1)) for f in truth_frames]).astype(np.float32)
    truth = VideoRecord(id="truth", frames=truth_frames, patches=truth_patches)
    distractor = _flat_video("distractor", 0.6 * e0 + 0.8 * e1)
    filler = _flat_video("filler", 0.45 * e0 + np.sqrt(1 - 0.45 ** 2) * e1)
    gallery = Gallery([distractor, filler, truth])
    text = _query(e0)

    coarse = recall_topk(text, gallery, 3)
    assert coarse.ids().index("truth") == 2
    final = search(text, gallery, SearchConfig(top_k=3))
    assert final.ids()[0] == "truth"
    oracle = brute_force_rank(text, gallery, SearchConfig(top_k=3))
    assert oracle.ids()[0] == "truth"


def test_scaling_all_fusion_weights_leaves_order_unchanged():
    gallery, texts, _ = generate(SynthConfig(
        n_videos=30, n_queries=6, dim=8, frames=3, patches_per_frame=2, seed=29))
    for text in texts:
        base = search(text, gallery, SearchConfig(top_k=30, fusion_weights=(5, 5, 1)))
        scaled = search(text, gallery, SearchConfig(top_k=30, fusion_weights=(10, 10, 2)))
        assert base.ids() == scaled.ids()


# ---------------------------------------------------------------------------
# Metrics over a benchmark
# ---------------------------------------------------------------------------

def test_perfect_alignment_gives_full_marks():
    rng = np.random.default_rng(31)
    directions = [normalize(rng.standard_normal(16)) for _ in range(12)]
    gallery = Gallery([_flat_video(f"v{i}", d) for i, d in enumerate(directions)])
    texts = [_query(d, f"t{i}") for i, d in enumerate(directions)]
    truth = {f"t{i}": f"v{i}" for i in range(12)}
    metrics = evaluate(texts, truth, gallery, SearchConfig(top_k=12))
    assert metrics.r_at_1 == 100.0
    assert metrics.r_at_5 == 100.0
    assert metrics.r_at_10 == 100.0


def test_ground_truth_outside_top10_scores_zero():
    d = 20
    gallery = Gallery([_flat_video(f"v{i}", np.eye(d)[i]) for i in range(d)])
    texts = [_query(np.eye(d)[q], f"t{q}") for q in range(9)]
    truth = {t.id: "v19" for t in texts}  # target is always the last gallery position
    metrics = evaluate(texts, truth, gallery, SearchConfig(top_k=d))
    assert metrics.r_at_1 == 0.0
    assert metrics.r_at_5 == 0.0
    assert metrics.r_at_10 == 0.0


def test_metrics_match_rescan_of_final_lists():
    gallery, texts, manifest = generate(SynthConfig(
        n_videos=50, n_queries=50, dim=12, frames=3, patches_per_frame=2,
        seed=37, noise=0.3))
    truth = manifest.ground_truth()
    config = SearchConfig(top_k=20)
    metrics = evaluate(texts, truth, gallery, config)
    hits = {1: 0, 5: 0, 10: 0}
    for text in texts:
        ids = search(text, gallery, config).ids()
        for depth in hits:
            if truth[text.id] in ids[:depth]:
                hits[depth] += 1
    assert metrics.r_at_1 == pytest.approx(100.0 * hits[1] / len(texts), abs=1e-9)
    assert metrics.r_at_5 == pytest.approx(100.0 * hits[5] / len(texts), abs=1e-9)
    assert metrics.r_at_10 == pytest.approx(100.0 * hits[10] / len(texts), abs=1e-9)


def test_rank_beyond_top_k_counts_as_miss():
    # With top_k=1 only the coarse winner is ranked, so R@5/R@10 cannot
    # rescue a ground truth that exists in the gallery but not in the list.
    e = np.eye(4)
    gallery = Gallery([_flat_video("a", e[0]), _flat_video("b", e[1])])
    text = _query(normalize(0.9 * e[0] + 0.1 * e[1]), "t")
    metrics = evaluate([text], {"t": "b"}, gallery, SearchConfig(top_k=1))
    assert metrics.r_at_10 == 0.0


def test_missing_ground_truth_rejected():
    gallery = Gallery([_flat_video("v", np.array([1.0, 0.0]))])
    text = _query(np.array([1.0, 0.0]), "t")
    with pytest.raises(MissingGroundTruth):
        evaluate([text], {}, gallery, SearchConfig(top_k=1))
    with pytest.raises(MissingGroundTruth):
        evaluate([text], {"t": "ghost"}, gallery, SearchConfig(top_k=1))
    with pytest.raises(EmptyInput):
        evaluate([], {}, gallery, SearchConfig(top_k=1))


# ---------------------------------------------------------------------------
# Parallelism
# ---------------------------------------------------------------------------

def test_parallel_evaluation_matches_sequential():
    gallery, texts, manifest = generate(SynthConfig(
        n_videos=40, n_queries=24, dim=10, frames=3, patches_per_frame=2,
        seed=41, noise=0.2))
    truth = manifest.ground_truth()
    config = SearchConfig(top_k=10)
    sequential = evaluate(texts, truth, gallery, config, workers=1)
    parallel = evaluate(texts, truth, gallery, config, workers=4)
    assert sequential == parallel


def test_search_many_preserves_input_order():
    gallery, texts, _ = generate(SynthConfig(
        n_videos=30, n_queries=12, dim=8, frames=2, patches_per_frame=2, seed=43))
    config = SearchConfig(top_k=5)
    serial = [search(t, gallery, config) for t in texts]
    fanned = search_many(texts, gallery, config, workers=4)
    assert [r.entries for r in fanned] == [r.entries for r in serial]


def test_worker_resolution_respects_environment_cap(monkeypatch):
    monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
    assert resolve_workers(4) == 4
    monkeypatch.setenv(THREADS_ENV_VAR, "2")
    assert resolve_workers(8) == 2
    assert resolve_workers(1) == 1
    monkeypatch.setenv(THREADS_ENV_VAR, "banana")
    with pytest.raises(InvalidConfig):
        resolve_workers(4)
    monkeypatch.setenv(THREADS_ENV_VAR, "0")
    with pytest.raises(InvalidConfig):
        resolve_workers(4)
    monkeypatch.delenv(THREADS_ENV_VAR)
    with pytest.raises(InvalidConfig):
        resolve_workers(0)


# ---------------------------------------------------------------------------
# Export format
# ---------------------------------------------------------------------------

def test_json_line_round_trips():
    ranked = RankedList(entries=(("v1", 0.9), ("v0", 0.5)), stage="final")
    parsed = json.loads(to_json_line("t7", ranked))
    assert parsed["text_id"] == "t7"
    assert parsed["ranking"] == [
        {"video_id": "v1", "score": 0.9},
        {"video_id": "v0", "score": 0.5},
    ]
