import math

import numpy as np
import pytest

from dpmepf import (DomainError, FeatureMap, MeanEmbedding, NoiseCovariance, ShapeError, embed,
                    embed_labeled, noise_covariance_terms, privatize, sensitivity)


def brute_force_mean(fmap, X):
    total1, total2 = np.zeros(fmap.total_dim), np.zeros(fmap.total_dim)
    for x in X:
        raw = fmap.raw_features(x)
        total1 += raw / np.linalg.norm(raw)
        total2 += raw**2 / np.linalg.norm(raw**2)
    return total1 / len(X), total2 / len(X)


def test_single_point_embedding(small_map):
    x = np.array([0.3, -1.0, 2.0])
    emb = embed(small_map, x)
    p1, p2 = small_map.phi(x)
    np.testing.assert_array_equal(emb.part1, p1)
    np.testing.assert_array_equal(emb.part2, p2)
    assert emb.sample_count == 1


def test_antipodal_points_cancel():
    fmap = FeatureMap.identity(2, moments=1)
    emb = embed(fmap, [[1.0, 2.0], [-1.0, -2.0]])
    np.testing.assert_allclose(emb.part1, 0.0, atol=1e-16)


def test_embedding_matches_summation_oracle(rng):
    fmap = FeatureMap.identity(3, moments=2)
    X = rng.standard_normal((100, 3))
    emb = embed(fmap, X)
    o1, o2 = brute_force_mean(fmap, X)
    np.testing.assert_allclose(emb.part1, o1, atol=1e-14)
    np.testing.assert_allclose(emb.part2, o2, atol=1e-14)
    assert np.linalg.norm(emb.part1) <= 1 and np.linalg.norm(emb.part2) <= 1


def test_chunked_accumulation_matches_oracle(rng, monkeypatch):
    import dpmepf.embedding as E

    monkeypatch.setattr(E, "CHUNK_ROWS", 7)
    fmap = FeatureMap.random(2, (4, 3), seed=1)
    X = rng.standard_normal((50, 2))
    o1, o2 = brute_force_mean(fmap, X)
    emb = embed(fmap, X)
    np.testing.assert_allclose(emb.part1, o1, atol=1e-14)
    np.testing.assert_allclose(emb.part2, o2, atol=1e-14)


def test_empty_dataset(small_map):
    with pytest.raises(DomainError):
        embed(small_map, np.zeros((0, 3)))
    with pytest.raises(ShapeError):
        embed(small_map, np.zeros((4, 2)))


def test_labeled_single_class_equals_unlabeled(small_map, rng):
    X = rng.standard_normal((30, 3))
    a = embed(small_map, X)
    b = embed_labeled(small_map, X, np.zeros(30, dtype=int), 1)
    assert a.part1.tobytes() == b.part1.tobytes()
    assert a.part2.tobytes() == b.part2.tobytes()


def test_labeled_empty_class(small_map, rng):
    X = rng.standard_normal((10, 3))
    emb = embed_labeled(small_map, X, np.zeros(10, dtype=int), 2)
    np.testing.assert_array_equal(emb.blocks(1)[1], 0.0)
    np.testing.assert_array_equal(emb.blocks(2)[1], 0.0)
    assert emb.class_counts == (10, 0)


def test_labeled_blocks_brute_force(small_map, rng):
    X = rng.standard_normal((40, 3))
    y = np.arange(40) % 2
    emb = embed_labeled(small_map, X, y, 2)
    assert emb.part1.size == small_map.total_dim * 2
    for k in range(2):
        s1 = sum(small_map.phi(x)[0] for x, lab in zip(X, y) if lab == k) / 40
        s2 = sum(small_map.phi(x)[1] for x, lab in zip(X, y) if lab == k) / 40
        np.testing.assert_allclose(emb.blocks(1)[k], s1, atol=1e-14)
        np.testing.assert_allclose(emb.blocks(2)[k], s2, atol=1e-14)
        assert np.linalg.norm(emb.blocks(1)[k]) <= emb.class_counts[k] / 40 + 1e-12


def test_labeled_bad_labels(small_map):
    X = np.ones((3, 3))
    with pytest.raises(DomainError):
        embed_labeled(small_map, X, [0, 1, 2], 2)
    with pytest.raises(DomainError):
        embed_labeled(small_map, X, [0, -1, 0], 2)
    with pytest.raises(ShapeError):
        embed_labeled(small_map, X, [0, 1], 2)


def test_sensitivity_values():
    assert sensitivity(50_000) == 4e-5
    assert sensitivity(1) == 2.0
    with pytest.raises(DomainError):
        sensitivity(0)


def test_sensitivity_bruteforce_neighbors():
    rng = np.random.default_rng(0)
    fmap = FeatureMap.random(3, (6, 5), seed=2, moments=2)
    m = 10
    worst1 = worst2 = 0.0
    for _ in range(1000):
        X = rng.standard_normal((m, 3))
        Xp = X.copy()
        Xp[rng.integers(m)] = 3 * rng.standard_normal(3)
        a, b = embed(fmap, X), embed(fmap, Xp)
        worst1 = max(worst1, np.linalg.norm(a.part1 - b.part1))
        worst2 = max(worst2, np.linalg.norm(a.part2 - b.part2))
    assert worst1 <= 0.2 + 1e-15 and worst2 <= 0.2 + 1e-15
    ident = FeatureMap.identity(3, moments=1)
    X = rng.standard_normal((m, 3))
    Xp = X.copy()
    Xp[0] = -X[0]
    gap = np.linalg.norm(embed(ident, X).part1 - embed(ident, Xp).part1)
    assert gap == pytest.approx(0.2, rel=1e-12)


def test_privatize_zero_noise_identity(small_map, rng):
    emb = embed(small_map, rng.standard_normal((5, 3)))
    out = privatize(emb, 0.0, 3)
    assert out.part1.tobytes() == emb.part1.tobytes()
    assert out.part2.tobytes() == emb.part2.tobytes()
    assert out.private and out.sigma == 0.0


def test_privatize_deterministic(small_map, rng):
    emb = embed(small_map, rng.standard_normal((5, 3)))
    a, b = privatize(emb, 2.0, 7), privatize(emb, 2.0, 7)
    assert a.vector.tobytes() == b.vector.tobytes()
    assert a.vector.tobytes() != privatize(emb, 2.0, 8).vector.tobytes()


def test_privatize_noise_scale_m4():
    # m = 4, sigma = 1 gives per-coordinate std 2 sigma / m = 0.5
    emb = MeanEmbedding(np.zeros(50_000), np.zeros(50_000), 4)
    out = privatize(emb, 1.0, 0)
    assert np.std(out.part1) == pytest.approx(0.5, rel=0.01)
    assert np.std(out.part2) == pytest.approx(0.5, rel=0.01)


def test_privatize_unbiased_and_scaled():
    base = np.array([0.1, -0.2, 0.3, 0.05])
    emb = MeanEmbedding(base, None, 8)
    sigma, draws = 1.5, 100_000
    samples = np.stack([privatize(emb, sigma, s).part1 for s in range(draws)])
    std = 2 * sigma / 8
    assert np.all(np.abs(samples.mean(axis=0) - base) <= 4 * std / math.sqrt(draws))
    np.testing.assert_allclose(samples.std(axis=0), std, rtol=0.01)


def test_privatize_rejects_negative(small_map):
    with pytest.raises(DomainError):
        privatize(MeanEmbedding(np.zeros(3), None, 2), -1.0, 0)


def test_noise_covariance_one_moment():
    tr, fro, op = noise_covariance_terms(NoiseCovariance(1.0, 10, 5, moments=1))
    assert tr == pytest.approx(0.2, rel=1e-15)
    assert fro == pytest.approx(4 * math.sqrt(5) / 100, rel=1e-15)
    assert op == pytest.approx(0.04, rel=1e-15)


def test_noise_covariance_two_moment_closed_forms():
    cov = NoiseCovariance(2.0, 20, 7, moments=2, part_scales=(1.0, 3.0))
    unit = 4 * 4.0 / 400
    assert cov.trace == pytest.approx(unit * 10 * 7)
    assert cov.frobenius == pytest.approx(unit * 10 * math.sqrt(7))
    assert cov.operator_norm == pytest.approx(unit * 9)
    np.testing.assert_allclose(cov.std_vector()[:7], 2 * 2.0 / 20)
    np.testing.assert_allclose(cov.std_vector()[7:], 3 * 2 * 2.0 / 20)
    # ||Sigma^{1/2} a|| for a = [a1, a2]
    a1, a2 = np.full(7, 0.1), np.full(7, -0.2)
    direct = math.sqrt(np.sum(cov.std_vector() ** 2 * np.concatenate([a1, a2]) ** 2))
    assert cov.sqrt_quadratic((np.linalg.norm(a1), np.linalg.norm(a2))) == pytest.approx(direct, rel=1e-13)


def test_noise_covariance_zero_sigma():
    assert noise_covariance_terms(NoiseCovariance(0.0, 10, 5, 1)) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("seed", range(20))
def test_psd_norm_chain(seed):
    rng = np.random.default_rng(seed)
    cov = NoiseCovariance(rng.uniform(0, 10), int(rng.integers(1, 1000)), int(rng.integers(1, 200)),
                          int(rng.integers(1, 3)), tuple(rng.uniform(0.1, 3, 2)))
    tr, fro, op = noise_covariance_terms(cov)
    assert tr >= fro >= op >= 0
