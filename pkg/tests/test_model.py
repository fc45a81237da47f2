"""Tests for the position-decoupled encoder, its parameters and checkpoints."""

import json
import math
import struct
from pathlib import Path

import numpy as np
import pytest

from pdmrec.errors import CheckpointError, DataError
from pdmrec.model.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from pdmrec.model.encoder import (
    attention_mask,
    cab_forward,
    embed_sequence,
    encode,
    item_attention_head,
    item_attention_weights,
    positional_attention_head,
    positional_attention_weights,
    score_all,
)
from pdmrec.model.params import (
    ITEM_EMBEDDINGS,
    POSITIONAL_EMBEDDINGS,
    ModelParams,
    ModelSpec,
)
from pdmrec.numerics import ops
from pdmrec.numerics.autograd import Tensor


def _loop_attention(
    q_in: np.ndarray,
    k_in: np.ndarray,
    v_in: np.ndarray,
    weights: dict[str, np.ndarray],
    prefix: str,
    visible: list[list[bool]],
) -> np.ndarray:
    """One attention head written as scalar loops over positions and features."""
    w_q, w_k, w_v = weights[f"{prefix}_q"], weights[f"{prefix}_k"], weights["w_v"]
    length, d = v_in.shape
    dh = w_q.shape[1]

    def project(row: np.ndarray, w: np.ndarray, c: int) -> float:
        return sum(float(row[j]) * float(w[j, c]) for j in range(d))

    out = np.zeros((length, dh))
    for t in range(length):
        keys = [s for s in range(length) if visible[t][s]]
        if not keys:
            continue
        logits = [
            sum(project(q_in[t], w_q, c) * project(k_in[s], w_k, c) for c in range(dh)) / math.sqrt(dh)
            for s in keys
        ]
        top = max(logits)
        exps = [math.exp(x - top) for x in logits]
        total = sum(exps)
        for c in range(dh):
            out[t, c] = sum(e / total * project(v_in[s], w_v, c) for e, s in zip(exps, keys, strict=True))
    return out


def _uniform_rows(mask: np.ndarray) -> np.ndarray:
    counts = mask.sum(axis=-1, keepdims=True)
    return np.divide(mask, counts, out=np.zeros(mask.shape), where=counts > 0)


def _write_raw_checkpoint(path: Path, header: dict[str, object]) -> None:
    header_bytes = json.dumps(header).encode("utf-8")
    path.write_bytes(struct.pack("<8sIQ", MAGIC, 1, len(header_bytes)) + header_bytes)


class TestModelParams:
    """Tests for the parameter layout."""

    def test_full_model_layout(self, toy_params: ModelParams) -> None:
        spec = toy_params.spec
        assert toy_params[ITEM_EMBEDDINGS].shape == (21, 8)
        assert toy_params[POSITIONAL_EMBEDDINGS].shape == (8, 8)
        for block in (1, 2):
            for head in (1, 2):
                names = spec.head_names(block, head)
                assert set(names) == {"w_q", "w_k", "w_v", "wp_q", "wp_k"}
                assert all(toy_params[n].shape == (8, 4) for n in names.values())

    def test_no_positional_mode_has_no_positional_tensors(self) -> None:
        spec = ModelSpec(num_items=5, d=4, hd=2, max_len=3, inner_dim=4, positional_mode="none")
        names = set(spec.shapes())
        assert POSITIONAL_EMBEDDINGS not in names
        assert not any(".wp_" in n for n in names)

    def test_mask_token_adds_a_row(self) -> None:
        spec = ModelSpec(num_items=5, d=4, hd=2, max_len=3, inner_dim=4, mask_token=True)
        assert spec.vocab_rows == 7
        assert spec.mask_index == 6

    def test_separate_value_projection(self) -> None:
        spec = ModelSpec(num_items=5, d=4, hd=2, max_len=3, inner_dim=4, separate_value_projection=True)
        assert "blocks.1.heads.1.wp_v" in spec.shapes()

    def test_initialization(self, toy_params: ModelParams) -> None:
        np.testing.assert_array_equal(toy_params["blocks.1.norm.gain"].data, np.ones(8))
        np.testing.assert_array_equal(toy_params["blocks.2.mlp.b1"].data, np.zeros(8))
        assert toy_params.dtype == np.float64
        assert all(t.requires_grad for t in toy_params.values())

    def test_mismatched_shapes_rejected(self, toy_params: ModelParams) -> None:
        arrays = toy_params.arrays()
        arrays[ITEM_EMBEDDINGS] = np.zeros((3, 8))
        with pytest.raises(CheckpointError):
            ModelParams.from_arrays(toy_params.spec, arrays)

    def test_copy_is_deep(self, toy_params: ModelParams) -> None:
        snapshot = toy_params.copy()
        toy_params.item_embeddings.data[1, 0] += 1.0
        assert snapshot.item_embeddings.data[1, 0] != toy_params.item_embeddings.data[1, 0]


class TestEncoder:
    """Shape and masking behaviour of the encoder."""

    def test_shapes(self, toy_params: ModelParams, toy_batch_seqs: np.ndarray) -> None:
        rep = encode(toy_batch_seqs, toy_params)
        assert rep.hidden.shape == (4, 8, 8)
        assert rep.user_vector.shape == (4, 8)
        np.testing.assert_array_equal(rep.user_vector.data, rep.hidden.data[:, -1])

    def test_single_sequence(self, toy_params: ModelParams, toy_batch_seqs: np.ndarray) -> None:
        single = encode(toy_batch_seqs[0], toy_params).user_vector.data[0]
        batched = encode(toy_batch_seqs, toy_params).user_vector.data[0]
        np.testing.assert_allclose(single, batched, atol=1e-12)

    def test_attention_mask(self) -> None:
        mask = attention_mask(np.array([[0, 3, 4]]), causal=True)
        expected = np.array([[False, False, False], [False, True, False], [False, True, True]])
        np.testing.assert_array_equal(mask[0], expected)
        bidirectional = attention_mask(np.array([[0, 3, 4]]), causal=False)
        np.testing.assert_array_equal(bidirectional[0, 0], [False, True, True])

    def test_attention_rows_sum_to_one_on_real_slots(
        self, toy_params: ModelParams, toy_batch_seqs: np.ndarray
    ) -> None:
        mask = attention_mask(toy_batch_seqs, causal=True)
        e = embed_sequence(toy_batch_seqs, toy_params)
        weights = item_attention_weights(e, 1, 1, toy_params, mask).data
        real = toy_batch_seqs != 0
        np.testing.assert_allclose(weights.sum(axis=-1)[real], 1.0)
        np.testing.assert_array_equal(weights.sum(axis=-1)[~real], 0.0)
        assert np.all(weights[~mask] == 0.0)

    def test_heads_match_scalar_loops(self) -> None:
        spec = ModelSpec(num_items=5, d=4, hd=2, max_len=3, inner_dim=4, dropout=0.0)
        params = ModelParams.initialize(spec, np.random.default_rng(8), std=0.5, dtype="float64")
        positions = params.positional_embeddings
        assert positions is not None
        seqs = np.array([[2, 5, 1], [0, 4, 3]])
        mask = attention_mask(seqs, causal=True)
        e = embed_sequence(seqs, params)
        for head in (1, 2):
            weights = {k: params[name].data for k, name in spec.head_names(1, head).items()}
            item = item_attention_head(e, 1, head, params, mask).data
            pos = positional_attention_head(e, positions, 1, head, params, mask).data
            for b, seq in enumerate(seqs):
                visible = [[bool(seq[s] != 0 and s <= t) for s in range(3)] for t in range(3)]
                rows = params.item_embeddings.data[seq]
                expected_item = _loop_attention(rows, rows, rows, weights, "w", visible)
                expected_pos = _loop_attention(
                    positions.data, positions.data, rows, weights, "wp", visible
                )
                assert np.max(np.abs(item[b] - expected_item)) < 1e-6
                assert np.max(np.abs(pos[b] - expected_pos)) < 1e-6

    def test_item_branch_is_permutation_equivariant_without_causal_mask(
        self, toy_params: ModelParams
    ) -> None:
        seqs = np.array([[3, 7, 1, 9, 2, 5, 6, 20]])
        rng = np.random.default_rng(9)
        e = embed_sequence(seqs, toy_params)
        mask = attention_mask(seqs, causal=False)
        for _ in range(5):
            perm = rng.permutation(8)
            permuted = seqs[:, perm]
            e_perm = embed_sequence(permuted, toy_params)
            mask_perm = attention_mask(permuted, causal=False)
            for head in (1, 2):
                out = item_attention_head(e, 1, head, toy_params, mask).data
                out_perm = item_attention_head(e_perm, 1, head, toy_params, mask_perm).data
                np.testing.assert_allclose(out_perm[0], out[0][perm], atol=1e-12)

    def test_zero_query_projection_gives_uniform_item_attention(
        self, toy_params: ModelParams, toy_batch_seqs: np.ndarray
    ) -> None:
        names = toy_params.spec.head_names(1, 1)
        toy_params[names["w_q"]].data[...] = 0.0
        mask = attention_mask(toy_batch_seqs, causal=True)
        e = embed_sequence(toy_batch_seqs, toy_params)
        weights = item_attention_weights(e, 1, 1, toy_params, mask).data
        np.testing.assert_allclose(weights, _uniform_rows(mask), atol=1e-12)

    def test_zero_positions_give_uniform_positional_attention(
        self, toy_params: ModelParams, toy_batch_seqs: np.ndarray
    ) -> None:
        positions = toy_params.positional_embeddings
        assert positions is not None
        positions.data[...] = 0.0
        mask = attention_mask(toy_batch_seqs, causal=True)
        for head in (1, 2):
            weights = positional_attention_weights(positions, 1, head, toy_params, mask).data
            np.testing.assert_allclose(weights, _uniform_rows(mask), atol=1e-12)

    def test_out_of_range_item(self, toy_params: ModelParams) -> None:
        with pytest.raises(DataError):
            encode(np.array([[0, 0, 0, 0, 0, 0, 1, 21]]), toy_params)

    def test_causal_prefix_locality(self, toy_params: ModelParams) -> None:
        a = np.array([[0, 0, 3, 4, 5, 6, 7, 8]])
        b = a.copy()
        b[0, -1] = 17
        ha = encode(a, toy_params).hidden.data
        hb = encode(b, toy_params).hidden.data
        np.testing.assert_allclose(ha[0, :-1], hb[0, :-1], atol=1e-12)
        assert not np.allclose(ha[0, -1], hb[0, -1])

    def test_padding_row_does_not_leak(self, toy_params: ModelParams, toy_batch_seqs: np.ndarray) -> None:
        before = encode(toy_batch_seqs, toy_params).user_vector.data.copy()
        toy_params.item_embeddings.data[0] = 5.0
        after = encode(toy_batch_seqs, toy_params).user_vector.data
        np.testing.assert_allclose(before, after, atol=1e-12)

    def test_dropout_only_in_training(self, toy_spec: ModelSpec, toy_batch_seqs: np.ndarray) -> None:
        spec = toy_spec.model_copy(update={"dropout": 0.5})
        params = ModelParams.initialize(spec, np.random.default_rng(0), dtype="float64")
        eval_a = encode(toy_batch_seqs, params).hidden.data
        eval_b = encode(toy_batch_seqs, params).hidden.data
        np.testing.assert_array_equal(eval_a, eval_b)
        train = encode(toy_batch_seqs, params, training=True, rng=np.random.default_rng(1))
        assert not np.allclose(train.hidden.data, eval_a)

    def test_score_all_excludes_padding_and_mask(self) -> None:
        spec = ModelSpec(num_items=5, d=4, hd=2, max_len=3, inner_dim=4, mask_token=True)
        params = ModelParams.initialize(spec, np.random.default_rng(2), dtype="float64")
        user = params.item_embeddings.data[3].copy()
        scores = score_all(Tensor(user), params).data
        assert scores.shape == (5,)
        np.testing.assert_allclose(scores, params.item_embeddings.data[1:6] @ user)


class TestPositionalSeparation:
    """The two attention branches never read each other's inputs."""

    def test_item_perturbation_leaves_positional_weights(
        self, toy_params: ModelParams, toy_batch_seqs: np.ndarray
    ) -> None:
        mask = attention_mask(toy_batch_seqs, causal=True)
        rng = np.random.default_rng(5)
        for _ in range(100):
            before = [
                positional_attention_weights(toy_params.positional_embeddings, n, h, toy_params, mask).data
                for n in (1, 2)
                for h in (1, 2)
            ]
            toy_params.item_embeddings.data += rng.normal(size=toy_params.item_embeddings.shape)
            after = [
                positional_attention_weights(toy_params.positional_embeddings, n, h, toy_params, mask).data
                for n in (1, 2)
                for h in (1, 2)
            ]
            for x, y in zip(before, after, strict=True):
                assert np.array_equal(x, y)

    def test_position_perturbation_leaves_item_weights(
        self, toy_params: ModelParams, toy_batch_seqs: np.ndarray
    ) -> None:
        mask = attention_mask(toy_batch_seqs, causal=True)
        rng = np.random.default_rng(6)
        positions = toy_params.positional_embeddings
        assert positions is not None
        for _ in range(100):
            e = embed_sequence(toy_batch_seqs, toy_params)
            before = [item_attention_weights(e, 1, h, toy_params, mask).data for h in (1, 2)]
            positions.data += rng.normal(size=positions.shape)
            e = embed_sequence(toy_batch_seqs, toy_params)
            after = [item_attention_weights(e, 1, h, toy_params, mask).data for h in (1, 2)]
            for x, y in zip(before, after, strict=True):
                assert np.array_equal(x, y)

    def test_positional_weights_ignore_item_order(
        self, toy_params: ModelParams
    ) -> None:
        seqs = np.array([[1, 2, 3, 4, 5, 6, 7, 8], [8, 7, 6, 5, 4, 3, 2, 1]])
        mask = attention_mask(seqs, causal=True)
        w = positional_attention_weights(toy_params.positional_embeddings, 1, 1, toy_params, mask).data
        assert np.array_equal(w[0], w[1])

    def test_concat_of_sums_equals_sum_of_concats(self, toy_batch_seqs: np.ndarray) -> None:
        for seed in range(100):
            spec = ModelSpec(num_items=20, d=8, hd=2, n_blocks=1, max_len=8, inner_dim=8, dropout=0.0)
            params = ModelParams.initialize(spec, np.random.default_rng(seed), std=0.5, dtype="float64")
            mask = attention_mask(toy_batch_seqs, causal=True)
            e = embed_sequence(toy_batch_seqs, params)
            p = params.positional_embeddings
            assert p is not None
            item_heads = [item_attention_head(e, 1, h, params, mask) for h in (1, 2)]
            pos_heads = [positional_attention_head(e, p, 1, h, params, mask) for h in (1, 2)]
            concat_of_sums = ops.concat(
                [ops.add(a, b) for a, b in zip(item_heads, pos_heads, strict=True)]
            ).data
            sum_of_concats = ops.add(ops.concat(item_heads), ops.concat(pos_heads)).data
            assert np.array_equal(concat_of_sums, sum_of_concats)


class TestVariantsInEncoder:
    """Additive and position-free wiring."""

    def test_additive_input_is_embedding_plus_position(self, toy_batch_seqs: np.ndarray) -> None:
        spec = ModelSpec(num_items=20, d=8, hd=2, max_len=8, inner_dim=8, dropout=0.0, positional_mode="additive")
        params = ModelParams.initialize(spec, np.random.default_rng(3), std=0.3, dtype="float64")
        p = params.positional_embeddings
        assert p is not None
        mask = attention_mask(toy_batch_seqs, causal=True)
        s = ops.add(embed_sequence(toy_batch_seqs, params), p)
        for block in (1, 2):
            s = cab_forward(s, None, block, params, mask)
        np.testing.assert_allclose(encode(toy_batch_seqs, params).hidden.data, s.data, atol=1e-12)

    def test_use_positional_false_matches_position_free_model(
        self, toy_params: ModelParams, toy_batch_seqs: np.ndarray
    ) -> None:
        mask = attention_mask(toy_batch_seqs, causal=True)
        s = embed_sequence(toy_batch_seqs, toy_params)
        for block in (1, 2):
            s = cab_forward(s, None, block, toy_params, mask)
        basic = encode(toy_batch_seqs, toy_params, use_positional=False).hidden.data
        np.testing.assert_allclose(basic, s.data, atol=1e-12)
        full = encode(toy_batch_seqs, toy_params).hidden.data
        assert not np.allclose(basic, full)


class TestCheckpoint:
    """Tests for the binary checkpoint format."""

    def test_round_trip(self, tmp_path: Path, toy_params: ModelParams) -> None:
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, toy_params, {"d": 8}, {"epoch": 3})
        loaded, header = load_checkpoint(path, expected_spec=toy_params.spec)
        assert header["config"] == {"d": 8}
        assert header["extra"] == {"epoch": 3}
        for name, tensor in toy_params.items():
            assert np.array_equal(loaded[name].data, tensor.data)
            assert loaded[name].dtype == tensor.dtype

    def test_identical_params_identical_bytes(self, tmp_path: Path, toy_params: ModelParams) -> None:
        save_checkpoint(tmp_path / "a.ckpt", toy_params, {"seed": 1})
        save_checkpoint(tmp_path / "b.ckpt", toy_params.copy(), {"seed": 1})
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()
        assert (tmp_path / "a.ckpt").read_bytes().startswith(MAGIC)

    def test_float32_round_trip(self, tmp_path: Path, toy_spec: ModelSpec) -> None:
        params = ModelParams.initialize(toy_spec, np.random.default_rng(0))
        save_checkpoint(tmp_path / "m.ckpt", params)
        loaded, _ = load_checkpoint(tmp_path / "m.ckpt")
        assert loaded.dtype == np.float32
        assert np.array_equal(loaded.item_embeddings.data, params.item_embeddings.data)

    def test_bad_magic(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.ckpt"
        path.write_bytes(b"NOTACKPT" + bytes(20))
        with pytest.raises(CheckpointError, match="not a pdmrec checkpoint"):
            load_checkpoint(path)

    def test_truncated(self, tmp_path: Path, toy_params: ModelParams) -> None:
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, toy_params)
        path.write_bytes(path.read_bytes()[:-16])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_architecture_mismatch(self, tmp_path: Path, toy_params: ModelParams) -> None:
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, toy_params)
        other = toy_params.spec.model_copy(update={"n_blocks": 3})
        with pytest.raises(CheckpointError, match="does not match"):
            load_checkpoint(path, expected_spec=other)

    @pytest.mark.parametrize(
        "tensors",
        [
            [{"name": "item_embeddings", "shape": [21, 8]}],
            [{"name": "item_embeddings", "shape": [21, 8], "dtype": "notadtype"}],
            [{"name": "item_embeddings", "shape": 21, "dtype": "f8"}],
            [{"name": "item_embeddings", "shape": ["many"], "dtype": "f8"}],
            7,
        ],
    )
    def test_corrupt_tensor_table(self, tmp_path: Path, toy_params: ModelParams, tensors: object) -> None:
        path = tmp_path / "model.ckpt"
        _write_raw_checkpoint(path, {"spec": toy_params.spec.model_dump(mode="json"), "tensors": tensors})
        with pytest.raises(CheckpointError, match="corrupt tensor table"):
            load_checkpoint(path)

    def test_missing_tensor_table(self, tmp_path: Path, toy_params: ModelParams) -> None:
        path = tmp_path / "model.ckpt"
        _write_raw_checkpoint(path, {"spec": toy_params.spec.model_dump(mode="json")})
        with pytest.raises(CheckpointError):
            load_checkpoint(path)
