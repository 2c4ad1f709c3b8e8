"""Token arithmetic, packing, rotary phases, and flow sample tests."""

import numpy as np
import pytest

from curate.errors import (
    IndivisibleDimensions,
    IndivisibleHeadDim,
    NonFiniteInput,
    SequenceTooLong,
)
from curate.packing import (
    FlowSample,
    LatentShape,
    TokenSequence,
    latent_token_count,
    make_flow_sample,
    pack_sequences,
    read_flow_sidecar,
    rope_axis_groups,
    rope_phases,
    synthetic_latent,
    write_flow_sidecar,
)


class TestLatentTokenCount:
    def test_image_256(self):
        shape, n = latent_token_count(1, 256, 256, modality="image", patch=2)
        assert (shape.lt, shape.lh, shape.lw) == (1, 32, 32)
        # oracle: explicit enumeration of the token grid
        grid = [
            (t, h, w)
            for t in range(shape.grid[0])
            for h in range(shape.grid[1])
            for w in range(shape.grid[2])
        ]
        assert n == len(grid) == 256

    def test_single_frame_video_equals_image(self):
        img = latent_token_count(1, 256, 256, modality="image")
        vid = latent_token_count(1, 256, 256, modality="video")
        assert img == vid

    def test_long_sequence_crosses_220k(self):
        shape, n = latent_token_count(245, 720, 1280, modality="video", patch=2)
        assert shape.lt == 62
        assert shape.grid == (62, 45, 80)
        assert n == 223_200
        assert n > 220_000

    def test_indivisible_pixels(self):
        with pytest.raises(IndivisibleDimensions):
            latent_token_count(1, 250, 256)

    def test_indivisible_patch(self):
        # 8px stride gives lh=31, not divisible by patch 2
        with pytest.raises(IndivisibleDimensions):
            latent_token_count(1, 248, 256, patch=2)

    def test_image_must_be_single_frame(self):
        with pytest.raises(ValueError):
            latent_token_count(5, 256, 256, modality="image")

    def test_temporal_stride_keeps_first_frame(self):
        for frames, lt in [(1, 1), (2, 1), (4, 1), (5, 2), (8, 2), (9, 3), (245, 62)]:
            shape, _ = latent_token_count(frames, 64, 64)
            assert shape.lt == lt, frames

    def test_coords_enumerate_grid_bijectively(self):
        shape, n = latent_token_count(9, 64, 96)
        seq = TokenSequence("c", shape, "video")
        coords = seq.coords()
        assert coords.shape == (n, 3)
        assert len({tuple(c) for c in coords.tolist()}) == n
        t, h, w = shape.grid
        assert coords[:, 0].max() == t - 1
        assert coords[:, 1].max() == h - 1
        assert coords[:, 2].max() == w - 1
        # row-major: t outermost, then h, then w
        assert coords[0].tolist() == [0, 0, 0]
        assert coords[1].tolist() == [0, 0, 1]
        assert coords[w].tolist() == [0, 1, 0]
        assert coords[h * w].tolist() == [1, 0, 0]


def seq(clip_id: str, n_tokens: int) -> TokenSequence:
    # n_tokens 1:1 with lt since the spatial grid is 1x1 (patch 2 on 16x16)
    return TokenSequence(clip_id, LatentShape(lt=n_tokens, lh=2, lw=2, patch=2), "video")


def oracle_min_bins(sizes: list[int], cap: int) -> int:
    """Exact minimum bin count by branch-and-bound over assignments."""
    sizes = sorted(sizes, reverse=True)
    best = len(sizes)

    def place(i: int, bins: list[int]):
        nonlocal best
        if len(bins) >= best:
            return
        if i == len(sizes):
            best = min(best, len(bins))
            return
        seen = set()
        for bi in range(len(bins)):
            room = cap - bins[bi]
            if sizes[i] <= room and room not in seen:
                seen.add(room)
                bins[bi] += sizes[i]
                place(i + 1, bins)
                bins[bi] -= sizes[i]
        bins.append(sizes[i])
        place(i + 1, bins)
        bins.pop()

    place(0, [])
    return best


class TestPackSequences:
    def test_ffd_trace(self):
        seqs = [seq("a", 100), seq("b", 50), seq("c", 60)]
        batches = pack_sequences(seqs, 128)
        assert [[s.sequence.clip_id for s in b.segments] for b in batches] == [
            ["a"],
            ["c", "b"],
        ]
        assert oracle_min_bins([100, 50, 60], 128) == 2

    def test_too_long(self):
        with pytest.raises(SequenceTooLong):
            pack_sequences([seq("a", 130)], 128)

    def test_full_batches(self):
        batches = pack_sequences([seq("a", 128), seq("b", 128)], 128)
        assert len(batches) == 2
        assert all(b.occupancy == 1.0 for b in batches)

    def test_offsets_contiguous_from_zero(self):
        batches = pack_sequences([seq(c, n) for c, n in [("a", 40), ("b", 40), ("c", 40)]], 128)
        batch = batches[0]
        pos = 0
        for s in batch.segments:
            assert s.offset == pos
            pos += s.sequence.n_tokens

    def test_segment_ids_mask(self):
        batches = pack_sequences([seq("a", 5), seq("b", 3)], 10)
        ids = batches[0].segment_ids()
        assert ids.tolist() == [0] * 5 + [1] * 3 + [-1] * 2

    def test_clip_id_multiset_preserved(self):
        rng = np.random.default_rng(5)
        seqs = [seq(f"c{i}", int(rng.integers(1, 100))) for i in range(50)]
        seqs += [seq("c0", seqs[0].n_tokens)]  # duplicate id allowed
        batches = pack_sequences(seqs, 128)
        packed = sorted(s.sequence.clip_id for b in batches for s in b.segments)
        assert packed == sorted(s.clip_id for s in seqs)

    def test_ffd_within_one_of_optimal_small_instances(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            k = int(rng.integers(1, 9))
            sizes = [int(rng.integers(1, 129)) for _ in range(k)]
            batches = pack_sequences([seq(f"s{i}", n) for i, n in enumerate(sizes)], 128)
            assert len(batches) <= oracle_min_bins(sizes, 128) + 1

    def test_deterministic_tie_order(self):
        seqs = [seq("b", 64), seq("a", 64), seq("c", 64)]
        batches = pack_sequences(seqs, 128)
        ordered = [s.sequence.clip_id for b in batches for s in b.segments]
        assert ordered == ["a", "b", "c"]


def rotate(vec: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Apply pairwise rotations (the consumer-side op) for the oracle."""
    out = vec.copy()
    for j, theta in enumerate(phases):
        c, s = np.cos(theta), np.sin(theta)
        x, y = vec[2 * j], vec[2 * j + 1]
        out[2 * j] = c * x - s * y
        out[2 * j + 1] = s * x + c * y
    return out


class TestRopePhases:
    def test_zero_coords_zero_phases(self):
        assert np.all(rope_phases((0, 0, 0), 64) == 0.0)

    def test_linear_in_each_coordinate(self):
        p1 = rope_phases((1, 0, 0), 64)
        p2 = rope_phases((2, 0, 0), 64)
        assert np.allclose(p2, 2 * p1)
        q1 = rope_phases((0, 3, 5), 64)
        q2 = rope_phases((0, 6, 10), 64)
        assert np.allclose(q2, 2 * q1)

    def test_axis_group_sizes(self):
        assert rope_axis_groups(64) == (16, 24, 24)
        assert rope_axis_groups(16) == (4, 6, 6)

    def test_head_dim_eight_rejected_for_odd_groups(self):
        with pytest.raises(IndivisibleHeadDim):
            rope_axis_groups(8)
        with pytest.raises(IndivisibleHeadDim):
            rope_axis_groups(12)

    def test_phase_vector_length(self):
        assert rope_phases((1, 2, 3), 64).shape == (32,)

    def test_relative_position_property(self):
        """Rotated dot product depends only on the coordinate difference."""
        rng = np.random.default_rng(99)
        head_dim = 64
        max_err = 0.0
        for _ in range(1000):
            c1 = tuple(int(x) for x in rng.integers(0, 64, size=3))
            c2 = tuple(int(x) for x in rng.integers(0, 64, size=3))
            q = rng.standard_normal(head_dim)
            k = rng.standard_normal(head_dim)
            q /= np.linalg.norm(q)
            k /= np.linalg.norm(k)
            lhs = float(np.dot(rotate(q, rope_phases(c1, head_dim)),
                               rotate(k, rope_phases(c2, head_dim))))
            diff = tuple(a - b for a, b in zip(c1, c2))
            rhs = float(np.dot(rotate(q, rope_phases(diff, head_dim)), k))
            max_err = max(max_err, abs(lhs - rhs))
        assert max_err < 1e-9


class TestFlowSamples:
    def test_endpoints_exact(self):
        x1 = np.linspace(-3, 3, 24).reshape(4, 6)
        s0 = make_flow_sample(x1, 0.0, rng_seed=5)
        assert np.array_equal(s0.xt, s0.x0)
        s1 = make_flow_sample(x1, 1.0, rng_seed=5)
        assert np.array_equal(s1.xt, s1.x1)

    def test_midpoint_average_and_velocity(self):
        x1 = np.arange(12, dtype=np.float64)
        s = make_flow_sample(x1, 0.5, rng_seed=9)
        assert np.allclose(s.xt, (s.x0 + s.x1) / 2)
        assert np.array_equal(s.v, s.x1 - s.x0)

    def test_finite_difference_velocity(self):
        rng = np.random.default_rng(10)
        x1 = rng.standard_normal(100)
        eps = 1e-4
        for t in (0.1, 0.5, 0.9):
            a = make_flow_sample(x1, t, rng_seed=3)
            b = make_flow_sample(x1, t + eps, rng_seed=3)
            fd = (b.xt - a.xt) / eps
            assert np.max(np.abs(fd - a.v)) < 1e-6

    def test_same_seed_same_noise(self):
        x1 = np.ones(16)
        a = make_flow_sample(x1, 0.3, rng_seed=77)
        b = make_flow_sample(x1, 0.7, rng_seed=77)
        assert np.array_equal(a.x0, b.x0)

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteInput):
            make_flow_sample(np.array([1.0, np.nan]), 0.5, 1)

    def test_t_out_of_range(self):
        with pytest.raises(ValueError):
            make_flow_sample(np.ones(3), 1.5, 1)

    def test_synthetic_latent_deterministic(self):
        a = synthetic_latent("clip-1", 10, 4, seed=1)
        b = synthetic_latent("clip-1", 10, 4, seed=1)
        c = synthetic_latent("clip-2", 10, 4, seed=1)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert a.shape == (10, 4)


class TestFlowSidecar:
    def test_round_trip(self, tmp_path):
        arr = np.random.default_rng(4).standard_normal((3, 5, 2)).astype(np.float32)
        path = str(tmp_path / "flow.bin")
        write_flow_sidecar(path, arr)
        back = read_flow_sidecar(path)
        assert back.dtype == np.float32
        assert np.array_equal(back, arr)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(ValueError):
            read_flow_sidecar(str(path))
