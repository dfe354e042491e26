"""Label masking, dataset round-trips, and the reference masked loss."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqaforge.chatform import RenderedSample, load_template, render_training_sample
from cqaforge.errors import DatasetError, TokenizationError
from cqaforge.tokenizers import ByteTokenizer, build_tokenizer
from cqaforge.tokmask import (
    IGNORE_INDEX,
    TokenizedSample,
    masked_cross_entropy,
    masked_cross_entropy_terms,
    read_dataset,
    tokenize_and_mask,
    unmasked_positions,
    write_dataset,
)

from conftest import make_triplet

# frozen by an independent high-precision computation of
# mean(-log softmax) over rows [1,2,3] (label 2) and [.5,-.5,0] (label 0)
HAND_ORACLE_ROWS = [[0.2, -1.1, 0.7], [1.0, 2.0, 3.0], [0.5, -0.5, 0.0]]
HAND_ORACLE_LABELS = [IGNORE_INDEX, 2, 0]
HAND_ORACLE_MEAN = 0.5439378175430574
HAND_ORACLE_TERMS = (0.40760596444438030, 0.68026967064173458)


class SymbolTokenizer:
    """Maps single letters/digit groups to fixed ids; for schematic tests."""

    name = "symbol"

    def __init__(self):
        self.vocab: dict[str, int] = {}

    def encode(self, text):
        ids = []
        for symbol in text.split():
            if symbol not in self.vocab:
                self.vocab[symbol] = len(self.vocab)
            ids.append(self.vocab[symbol])
        return ids

    def decode(self, ids):
        reverse = {i: s for s, i in self.vocab.items()}
        return " ".join(reverse[i] for i in ids)


class TestTokenizeAndMask:
    def test_schematic_six_tokens(self):
        # instruction [A B C], response [R1 R2 E] -> labels
        # [IGNORE, IGNORE, R1, R2, E, IGNORE]
        tok = SymbolTokenizer()
        sample = RenderedSample(sample_id="s", instruction_text="A B C", response_text=" R1 R2 E")
        tokenized = tokenize_and_mask(sample, tok)
        r1, r2, e = tok.vocab["R1"], tok.vocab["R2"], tok.vocab["E"]
        assert tokenized.labels == [IGNORE_INDEX, IGNORE_INDEX, r1, r2, e, IGNORE_INDEX]
        assert tokenized.instruction_len == 3

    def test_empty_response_rejected(self):
        tok = ByteTokenizer()
        sample = RenderedSample(sample_id="empty", instruction_text="abc", response_text="")
        with pytest.raises(TokenizationError, match="no trainable positions"):
            tokenize_and_mask(sample, tok)

    def test_boundary_violation_names_sample(self):
        # a marker straddling the cut makes encode(full) differ from the parts
        tok = ByteTokenizer(special_tokens=["<|eot|>"])
        sample = RenderedSample(sample_id="bad-boundary", instruction_text="x<|", response_text="eot|>y")
        with pytest.raises(TokenizationError, match="bad-boundary"):
            tokenize_and_mask(sample, tok)

    def test_too_long_rejected_never_truncated(self):
        tok = ByteTokenizer()
        sample = RenderedSample(sample_id="long", instruction_text="i" * 30, response_text="r" * 30)
        with pytest.raises(TokenizationError, match="exceeds"):
            tokenize_and_mask(sample, tok, max_tokens=50)

    def test_unmasked_count_matches_response_reencoding(self):
        rng = random.Random(11)
        template = load_template("llama31")
        tok = build_tokenizer("byte", special_tokens=template.markers)
        for i in range(50):
            triplet = make_triplet(
                i=i,
                context=" ".join(f"w{rng.randrange(500)}" for _ in range(rng.randrange(1, 60))),
                question=f"Question number {rng.randrange(500)}?",
                answer=" ".join(f"a{rng.randrange(500)}" for _ in range(rng.randrange(1, 30))),
            )
            rendered = render_training_sample(triplet, template)
            tokenized = tokenize_and_mask(rendered, tok)
            independent = ByteTokenizer(special_tokens=template.markers)
            assert len(unmasked_positions(tokenized.labels)) == len(independent.encode(rendered.response_text))

    def test_unmasked_labels_decode_to_response(self):
        template = load_template("llama31")
        tok = build_tokenizer("byte", special_tokens=template.markers)
        rendered = render_training_sample(make_triplet(answer="The answer is 42 euros."), template)
        tokenized = tokenize_and_mask(rendered, tok)
        label_ids = [tokenized.labels[i] for i in unmasked_positions(tokenized.labels)]
        assert tok.decode(label_ids) == rendered.response_text

    @given(instr=st.integers(min_value=1, max_value=40), resp=st.integers(min_value=1, max_value=40))
    @settings(max_examples=100)
    def test_mask_properties(self, instr, resp):
        tok = ByteTokenizer()
        sample = RenderedSample(sample_id="p", instruction_text="i" * instr, response_text="r" * resp)
        tokenized = tokenize_and_mask(sample, tok)
        n = len(tokenized.input_ids)
        assert n == instr + resp
        assert tokenized.labels[-1] == IGNORE_INDEX
        # label-shift property
        for i, label in enumerate(tokenized.labels[:-1]):
            if label != IGNORE_INDEX:
                assert label == tokenized.input_ids[i + 1]
        # mask-exactness: contiguous suffix of [0, n-1) starting at instruction_len - 1
        assert unmasked_positions(tokenized.labels) == list(range(tokenized.instruction_len - 1, n - 1))


class TestDatasetIO:
    def _samples(self, count):
        tok = ByteTokenizer()
        samples = []
        for i in range(count):
            rendered = RenderedSample(sample_id=f"s{i:03d}", instruction_text=f"instruction {i}: ", response_text=f"response {i}")
            samples.append(tokenize_and_mask(rendered, tok))
        return samples

    def test_empty_dataset(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        manifest = write_dataset([], path)
        assert manifest == {"sample_count": 0, "token_count": 0, "ignore_index": IGNORE_INDEX}
        assert path.read_text(encoding="utf-8") == ""
        assert read_dataset(path) == []

    def test_roundtrip_identity(self, tmp_path):
        samples = self._samples(10)
        path = tmp_path / "data.jsonl"
        manifest = write_dataset(samples, path)
        assert manifest["sample_count"] == 10
        assert manifest["token_count"] == sum(len(s.input_ids) for s in samples)
        read_back = read_dataset(path)
        assert [s.to_record() for s in read_back] == [s.to_record() for s in samples]

    def test_corrupt_record_names_index(self, tmp_path):
        samples = self._samples(3)
        path = tmp_path / "data.jsonl"
        write_dataset(samples, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        lines[1] = lines[1][:-20]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(DatasetError, match="line 1"):
            read_dataset(path)

    def test_inconsistent_labels_rejected(self, tmp_path):
        sample = self._samples(1)[0]
        sample.labels[-1] = 7  # violates the final-IGNORE invariant
        with pytest.raises(DatasetError, match="final label"):
            write_dataset([sample], tmp_path / "x.jsonl")


class TestMaskedCrossEntropy:
    def test_uniform_logits_ln_v(self):
        loss = masked_cross_entropy(np.zeros((1, 4)), [2])
        assert loss == pytest.approx(math.log(4), abs=1e-9)

    def test_hand_oracle(self):
        loss = masked_cross_entropy(np.array(HAND_ORACLE_ROWS), HAND_ORACLE_LABELS)
        assert loss == pytest.approx(HAND_ORACLE_MEAN, abs=1e-9)
        terms = masked_cross_entropy_terms(np.array(HAND_ORACLE_ROWS), HAND_ORACLE_LABELS)
        assert [i for i, _ in terms] == [1, 2]
        for (_, got), expected in zip(terms, HAND_ORACLE_TERMS):
            assert got == pytest.approx(expected, abs=1e-9)

    def test_masked_rows_do_not_matter_bitwise(self):
        rng = np.random.default_rng(0)
        logits = rng.normal(size=(8, 5))
        labels = [IGNORE_INDEX, 1, IGNORE_INDEX, 0, 4, IGNORE_INDEX, 2, IGNORE_INDEX]
        base = masked_cross_entropy(logits, labels)
        perturbed = logits.copy()
        for i, label in enumerate(labels):
            if label == IGNORE_INDEX:
                perturbed[i] = rng.normal(size=5) * 1e6
        assert masked_cross_entropy(perturbed, labels) == base  # bit-identical

    def test_all_ignore_is_error(self):
        with pytest.raises(DatasetError, match="no trainable positions"):
            masked_cross_entropy(np.zeros((3, 4)), [IGNORE_INDEX] * 3)

    def test_label_out_of_vocab(self):
        with pytest.raises(DatasetError, match="outside vocabulary"):
            masked_cross_entropy(np.zeros((1, 4)), [4])

    def test_length_mismatch(self):
        with pytest.raises(DatasetError, match="labels"):
            masked_cross_entropy(np.zeros((2, 4)), [1])

    def test_monotone_mask(self):
        rng = np.random.default_rng(3)
        logits = rng.normal(size=(6, 7))
        labels = [3, 1, 4, 1, 5, IGNORE_INDEX]
        full_terms = masked_cross_entropy_terms(logits, labels)
        # masking strictly more positions never increases the term count
        fewer = list(labels)
        fewer[0] = IGNORE_INDEX
        assert len(masked_cross_entropy_terms(logits, fewer)) < len(full_terms)
        # all-but-one masked: loss equals that position's term exactly
        single = [IGNORE_INDEX] * 6
        single[2] = 4
        assert masked_cross_entropy(logits, single) == dict(full_terms)[2]

    @given(st.integers(min_value=0, max_value=6))
    def test_loss_invariant_under_masked_perturbation(self, row):
        rng = np.random.default_rng(17)
        logits = rng.normal(size=(7, 4))
        labels = [IGNORE_INDEX if i % 2 else i % 4 for i in range(7)]
        base = masked_cross_entropy(logits, labels)
        modified = logits.copy()
        if labels[row] == IGNORE_INDEX:
            modified[row] += 1234.5
            assert masked_cross_entropy(modified, labels) == base
        else:
            modified[row] += 1234.5
            assert masked_cross_entropy(modified, labels) != base
