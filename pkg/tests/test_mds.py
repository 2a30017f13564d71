"""Stress majorization: stress, Guttman transform, both solvers, alignment."""

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from ppda.datagen import Dataset, split_anchors
from ppda.mds import (
    EmbeddingResult,
    MdsConfig,
    aligned_error,
    classical_mds,
    estimate_distances,
    guttman_b,
    mask_laplacian,
    smacof_anchored,
    smacof_full,
    stress,
)
from ppda.protocol import NoiseSpec, WeightMask, assemble, client_distances


def _random_case(n=10, m=4, dim=3, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    data = Dataset(features=rng.standard_normal((n + m, dim)), labels=None, name="t")
    split = split_anchors(data, count=m, seed=seed)
    pdm = client_distances(split, NoiseSpec(c=noise, seed=seed))
    return split, pdm


class TestStress:
    def test_zero_at_exact_configuration(self):
        rng = np.random.default_rng(0)
        coords = rng.standard_normal((6, 2))
        dist = cdist(coords, coords)
        assert stress(coords, dist, 1.0 - np.eye(6)) == pytest.approx(0.0, abs=1e-18)

    def test_hand_value_single_pair(self):
        # two coincident points with target distance 1: residual 1 on both
        # ordered pairs, halved once -> stress 1
        coords = np.zeros((2, 1))
        dist = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert stress(coords, dist, 1.0 - np.eye(2)) == pytest.approx(1.0)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(1)
        for trial in range(20):
            n = rng.integers(3, 9)
            coords = rng.standard_normal((n, 2))
            dist = np.abs(rng.standard_normal((n, n)))
            dist = (dist + dist.T) / 2.0
            np.fill_diagonal(dist, 0.0)
            w = (rng.random((n, n)) < 0.6).astype(float)
            w = np.minimum(w, w.T)
            np.fill_diagonal(w, 0.0)
            expected = 0.0
            for i in range(n):
                for j in range(i + 1, n):
                    if w[i, j] > 0.0:
                        expected += (dist[i, j] - np.linalg.norm(coords[i] - coords[j])) ** 2
            assert stress(coords, dist, w) == pytest.approx(expected, rel=1e-12)

    def test_masked_entries_ignored_even_if_nan(self):
        coords = np.array([[0.0], [1.0], [5.0]])
        dist = np.array([[0.0, 1.0, np.nan], [1.0, 0.0, 4.0], [np.nan, 4.0, 0.0]])
        w = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        assert stress(coords, dist, w) == pytest.approx(0.0, abs=1e-18)


class TestGuttmanB:
    def test_hand_case_with_coincident_pair(self):
        # nodes: client at 0, anchors at 0 and 2 (1-D); targets 1, 1, 2.
        # The coincident client/anchor pair contributes zero by convention.
        coords = np.array([[0.0], [0.0], [2.0]])
        dist = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 2.0], [1.0, 2.0, 0.0]])
        w = 1.0 - np.eye(3)
        b = guttman_b(coords, dist, w)
        assert b[0, 1] == 0.0  # coincident pair dropped
        assert b[0, 2] == pytest.approx(-0.5)  # -1 * (1 / 2)
        assert b[1, 2] == pytest.approx(-1.0)  # -1 * (2 / 2)
        assert b[0, 0] == pytest.approx(0.5)
        assert np.allclose(b.sum(axis=1), 0.0, atol=1e-15)
        assert np.allclose(b, b.T)

    def test_row_sums_zero_on_random_cases(self):
        rng = np.random.default_rng(2)
        coords = rng.standard_normal((8, 3))
        dist = cdist(coords, coords) * rng.uniform(0.5, 1.5)
        w = (rng.random((8, 8)) < 0.7).astype(float)
        w = np.minimum(w, w.T)
        np.fill_diagonal(w, 0.0)
        b = guttman_b(coords, dist, w)
        assert np.allclose(b.sum(axis=1), 0.0, atol=1e-12)

    def test_duplicate_rows_contribute_zero(self):
        coords = np.array([[1.0, 1.0], [1.0, 1.0], [3.0, 0.0]])
        dist = np.full((3, 3), 2.0)
        np.fill_diagonal(dist, 0.0)
        b = guttman_b(coords, dist, 1.0 - np.eye(3))
        assert b[0, 1] == 0.0 and b[1, 0] == 0.0


class TestMaskLaplacian:
    def test_protocol_mask_client_block_is_m_identity(self):
        split, pdm = _random_case(n=6, m=3, seed=4)
        _, mask = assemble(pdm)
        v = mask_laplacian(mask)
        assert np.array_equal(v[:6, :6], 3.0 * np.eye(6))
        assert np.allclose(v.sum(axis=1), 0.0)

    def test_hand_laplacian(self):
        w = np.array([[0.0, 1.0], [1.0, 0.0]])
        assert np.array_equal(mask_laplacian(w), [[1.0, -1.0], [-1.0, 1.0]])


class TestSmacofFull:
    def test_recovers_full_mask_planar_configuration(self):
        rng = np.random.default_rng(5)
        truth = rng.standard_normal((12, 2))
        dist = cdist(truth, truth)
        mask = WeightMask(1.0 - np.eye(12))
        res = smacof_full(dist, mask, MdsConfig(dim=2, tol=1e-12, max_epochs=5000, seed=0))
        assert aligned_error(res.coords, truth) < 1e-3
        assert res.converged

    def test_stress_trace_monotone_nonincreasing(self):
        split, pdm = _random_case(n=8, m=4, seed=6, noise=0.3)
        dist, mask = assemble(pdm)
        res = smacof_full(dist, mask, MdsConfig(dim=3, tol=0.0, max_epochs=60, seed=1))
        assert np.all(np.diff(res.stress_trace) <= 1e-9)

    def test_zero_epochs_returns_initial_configuration(self):
        dist = np.array([[0.0, 1.0], [1.0, 0.0]])
        mask = WeightMask(1.0 - np.eye(2))
        init = np.array([[3.0], [-1.0]])
        res = smacof_full(dist, mask, MdsConfig(dim=1, max_epochs=0), init=init)
        assert np.array_equal(res.coords, init)
        assert not res.converged
        assert res.epochs_run == 0
        assert res.stress_trace.shape == (1,)

    def test_truth_is_fixed_point(self):
        rng = np.random.default_rng(7)
        truth = rng.standard_normal((7, 2))
        dist = cdist(truth, truth)
        mask = WeightMask(1.0 - np.eye(7))
        res = smacof_full(dist, mask, MdsConfig(dim=2, tol=0.0, max_epochs=5), init=truth)
        assert res.stress_trace[-1] == pytest.approx(0.0, abs=1e-20)
        assert aligned_error(res.coords, truth) < 1e-12

    def test_isolated_row_rejected(self):
        w = np.zeros((3, 3))
        w[0, 1] = w[1, 0] = 1.0
        dist = np.ones((3, 3))
        np.fill_diagonal(dist, 0.0)
        with pytest.raises(ValueError, match="row 2"):
            smacof_full(dist, WeightMask(w), MdsConfig(dim=1))

    def test_clamped_rows_do_not_move(self):
        split, pdm = _random_case(n=5, m=3, dim=2, seed=8)
        dist, mask = assemble(pdm)
        fixed_idx = np.arange(5, 8)
        res = smacof_full(
            dist,
            mask,
            MdsConfig(dim=2, tol=1e-10, max_epochs=500, seed=2),
            fixed_indices=fixed_idx,
            fixed_coords=split.anchors,
        )
        assert np.array_equal(res.coords[5:], split.anchors)

    def test_fixed_arguments_must_pair(self):
        dist = np.array([[0.0, 1.0], [1.0, 0.0]])
        mask = WeightMask(1.0 - np.eye(2))
        with pytest.raises(ValueError, match="together"):
            smacof_full(dist, mask, MdsConfig(dim=1), fixed_indices=np.array([0]))

    def test_init_shape_validated(self):
        dist = np.array([[0.0, 1.0], [1.0, 0.0]])
        mask = WeightMask(1.0 - np.eye(2))
        with pytest.raises(ValueError, match="init shape"):
            smacof_full(dist, mask, MdsConfig(dim=1), init=np.zeros((3, 1)))


class TestSmacofAnchored:
    def test_first_iterate_from_origin_hand_case(self):
        # one client between anchors 0 and 2 with unit targets: the first
        # Guttman step from the origin lands at the midpoint contribution 0.5
        from ppda.protocol import PartialDistanceMatrix

        pdm = PartialDistanceMatrix(
            d12=np.array([[1.0, 1.0]]), d22=np.array([[0.0, 2.0], [2.0, 0.0]])
        )
        anchors = np.array([[0.0], [2.0]])
        res = smacof_anchored(
            pdm, anchors, MdsConfig(dim=1, max_epochs=1, tol=0.0), init=np.array([[0.0]])
        )
        assert res.coords[0, 0] == pytest.approx(0.5)

    def test_truth_is_fixed_point(self):
        split, pdm = _random_case(n=6, m=4, dim=2, seed=9)
        truth = split.non_anchors.features
        res = smacof_anchored(
            pdm, split.anchors, MdsConfig(dim=2, tol=0.0, max_epochs=10), init=truth
        )
        assert res.stress_trace[-1] == pytest.approx(0.0, abs=1e-18)
        assert np.allclose(res.coords, truth, atol=1e-10)

    def test_matches_clamped_full_solver_iterate_for_iterate(self):
        # with an identical start and a zero tolerance both engines run in
        # lockstep; client iterates must agree to numerical precision
        rng = np.random.default_rng(10)
        for seed in range(4):
            n = int(rng.integers(3, 21))
            m = int(rng.integers(2, 11))
            dim = int(rng.integers(1, 4))
            split, pdm = _random_case(n=n, m=m, dim=dim, seed=100 + seed, noise=0.2)
            dist, mask = assemble(pdm)
            dist = np.where(np.isnan(dist), 0.0, dist)
            fixed_idx = np.arange(n, n + m)
            xa = np.random.default_rng(seed).standard_normal((n, dim))
            xf = np.vstack([xa, split.anchors])
            for _ in range(10):
                res_a = smacof_anchored(
                    pdm, split.anchors, MdsConfig(dim=dim, tol=0.0, max_epochs=1), init=xa
                )
                res_f = smacof_full(
                    dist,
                    mask,
                    MdsConfig(dim=dim, tol=0.0, max_epochs=1),
                    fixed_indices=fixed_idx,
                    fixed_coords=split.anchors,
                    init=xf,
                )
                xa, xf = res_a.coords, res_f.coords
                assert np.max(np.abs(xa - xf[:n])) <= 1e-8
                assert res_a.stress_trace[-1] == pytest.approx(
                    res_f.stress_trace[-1], abs=1e-8
                )

    def test_stress_trace_monotone(self):
        split, pdm = _random_case(n=10, m=5, dim=3, seed=11, noise=0.5)
        res = smacof_anchored(pdm, split.anchors, MdsConfig(dim=3, tol=0.0, max_epochs=80))
        assert np.all(np.diff(res.stress_trace) <= 1e-9)

    def test_revealed_entries_rejected(self):
        split, pdm = _random_case(n=5, m=2, seed=12)
        from ppda.protocol import reveal_blocks

        revealed = reveal_blocks(pdm, split, ratio=0.5, seed=0)
        with pytest.raises(ValueError, match="full mode"):
            smacof_anchored(revealed, split.anchors, MdsConfig(dim=2))

    def test_anchor_shape_validated(self):
        split, pdm = _random_case(n=4, m=3, dim=2, seed=13)
        with pytest.raises(ValueError, match="anchor coordinates shape"):
            smacof_anchored(pdm, split.anchors[:2], MdsConfig(dim=2))

    def test_localization_with_enough_anchors(self):
        # M = dim + 1 exact anchors pin every client up to numerical error
        split, pdm = _random_case(n=20, m=4, dim=3, seed=14)
        best = None
        for restart in range(8):
            res = smacof_anchored(
                pdm,
                split.anchors,
                MdsConfig(dim=3, tol=1e-14, max_epochs=4000, seed=restart),
            )
            if best is None or res.stress_trace[-1] < best.stress_trace[-1]:
                best = res
        err = np.linalg.norm(best.coords - split.non_anchors.features, axis=1).max()
        assert err < 1e-4


class TestAnchorCountThreshold:
    """Identifiability boundary: exact recovery needs anchors > target dim."""

    def _min_stress_coords(self, pdm, anchors, dim, restarts=8):
        per_client = None
        per_stress = None
        for r in range(restarts):
            res = smacof_anchored(
                pdm, anchors, MdsConfig(dim=dim, tol=1e-14, max_epochs=3000, seed=r)
            )
            d12 = cdist(res.coords, anchors)
            s = ((pdm.d12 - d12) ** 2).sum(axis=1)
            if per_client is None:
                per_client, per_stress = res.coords.copy(), s
            else:
                better = s < per_stress
                per_client[better] = res.coords[better]
                per_stress = np.minimum(per_stress, s)
        return per_client

    def test_enough_anchors_recover_exactly(self):
        split, pdm = _random_case(n=15, m=4, dim=3, seed=15)
        coords = self._min_stress_coords(pdm, split.anchors, dim=3)
        err = np.linalg.norm(coords - split.non_anchors.features, axis=1).max()
        assert err < 1e-3

    def test_too_few_anchors_leave_positions_ambiguous(self):
        split, pdm = _random_case(n=15, m=2, dim=3, seed=16)
        coords = self._min_stress_coords(pdm, split.anchors, dim=3)
        err = np.linalg.norm(coords - split.non_anchors.features, axis=1)
        assert np.median(err) > 0.1


class TestClassicalMds:
    def test_recovers_distances_exactly(self):
        rng = np.random.default_rng(17)
        truth = rng.standard_normal((9, 3))
        coords = classical_mds(cdist(truth, truth), dim=3)
        assert aligned_error(coords, truth) < 1e-10

    def test_zero_pads_when_rank_deficient(self):
        truth = np.array([[0.0], [1.0], [2.5]])
        coords = classical_mds(cdist(truth, truth), dim=3)
        assert coords.shape == (3, 3)
        # trailing columns carry only sqrt-of-roundoff eigen noise
        assert np.allclose(coords[:, 1:], 0.0, atol=1e-6)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            classical_mds(np.ones((2, 3)), dim=1)
        with pytest.raises(ValueError):
            classical_mds(np.zeros((3, 3)), dim=0)


class TestEstimateDistances:
    def test_uses_client_rows_only(self):
        coords = np.array([[0.0, 0.0], [3.0, 4.0], [100.0, 100.0]])
        emb = EmbeddingResult(
            coords=coords,
            stress_trace=np.zeros(1),
            epochs_run=0,
            converged=True,
            n_clients=2,
        )
        k_hat = estimate_distances(emb)
        assert k_hat.shape == (2, 2)
        assert k_hat[0, 1] == pytest.approx(5.0)
        assert np.array_equal(k_hat, k_hat.T)
        assert np.all(np.diagonal(k_hat) == 0.0)


class TestConfigAndAlignment:
    def test_config_validation(self):
        with pytest.raises(ValueError):
            MdsConfig(dim=0)
        with pytest.raises(ValueError):
            MdsConfig(dim=2, tol=-1.0)
        with pytest.raises(ValueError):
            MdsConfig(dim=2, max_epochs=-1)
        with pytest.raises(ValueError):
            MdsConfig(dim=2, mode="fast")

    def test_aligned_error_invariant_to_rigid_motion(self):
        rng = np.random.default_rng(18)
        truth = rng.standard_normal((10, 3))
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        moved = truth @ q + rng.standard_normal(3)
        assert aligned_error(moved, truth) < 1e-12

    def test_aligned_error_detects_distortion(self):
        rng = np.random.default_rng(19)
        truth = rng.standard_normal((10, 2))
        assert aligned_error(2.0 * truth, truth) > 0.5

    def test_aligned_error_validation(self):
        with pytest.raises(ValueError):
            aligned_error(np.zeros((3, 2)), np.zeros((2, 2)))
        with pytest.raises(ValueError, match="zero spread"):
            aligned_error(np.ones((3, 2)), np.ones((3, 2)))

    def test_nonfinite_coordinates_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingResult(
                coords=np.array([[np.nan]]),
                stress_trace=np.zeros(1),
                epochs_run=0,
                converged=False,
                n_clients=1,
            )
