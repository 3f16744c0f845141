"""Aligned input construction: the marked realization sequence and the
masked expectation sequence for one annotated target.

The realization input brackets the target's subwords with a reserved marker
token; the expectation input replaces each target subword with the mask
token. Removing the two markers from the former and unmasking the latter
yields identical sequences, so local vectors on both sides refer to the same
slot.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import torch

from .corpus import TargetInstance
from .errors import EncodingError, TargetTruncatedError

MAX_SEQUENCE_LENGTH = 150

PAD_TOKEN = "<pad>"
CLS_TOKEN = "<cls>"
MASK_TOKEN = "<mask>"
MARKER_TOKEN = "<tgt>"
UNK_TOKEN = "<unk>"
SPECIAL_TOKENS = (PAD_TOKEN, CLS_TOKEN, MASK_TOKEN, MARKER_TOKEN, UNK_TOKEN)


class SimpleSubwordTokenizer:
    """Greedy longest-match subword tokenizer over an explicit piece list.

    Self-contained replacement for a pretrained tokenizer: pieces are whole
    words plus their characters, so any word over the training alphabet
    tokenizes (unknown characters map to <unk>).
    """

    def __init__(self, pieces: list[str]):
        cleaned = sorted({p for p in pieces if p and p not in SPECIAL_TOKENS})
        self._id_to_piece = list(SPECIAL_TOKENS) + cleaned
        self._piece_to_id = {p: i for i, p in enumerate(self._id_to_piece)}
        self._max_piece_len = max((len(p) for p in cleaned), default=1)

    @classmethod
    def from_instances(cls, instances: list[TargetInstance]) -> "SimpleSubwordTokenizer":
        pieces: set[str] = set()
        for inst in instances:
            for word in inst.sentence:
                pieces.add(word)
                pieces.update(word)  # character fallback for unseen words
        return cls(sorted(pieces))

    @property
    def vocab_size(self) -> int:
        return len(self._id_to_piece)

    @property
    def pad_id(self) -> int:
        return self._piece_to_id[PAD_TOKEN]

    @property
    def cls_id(self) -> int:
        return self._piece_to_id[CLS_TOKEN]

    @property
    def mask_id(self) -> int:
        return self._piece_to_id[MASK_TOKEN]

    @property
    def marker_id(self) -> int:
        return self._piece_to_id[MARKER_TOKEN]

    @property
    def unk_id(self) -> int:
        return self._piece_to_id[UNK_TOKEN]

    def encode_word(self, word: str, first: bool = False) -> list[int]:
        del first  # no leading-space convention in this tokenizer
        ids = []
        pos = 0
        while pos < len(word):
            end = min(len(word), pos + self._max_piece_len)
            while end > pos and word[pos:end] not in self._piece_to_id:
                end -= 1
            if end == pos:  # unknown character
                ids.append(self.unk_id)
                pos += 1
            else:
                ids.append(self._piece_to_id[word[pos:end]])
                pos = end
        return ids

    def decode(self, ids: list[int]) -> list[str]:
        return [self._id_to_piece[i] for i in ids]

    def vocabulary_hash(self) -> str:
        digest = hashlib.sha256("\n".join(self._id_to_piece).encode("utf-8"))
        return digest.hexdigest()


class HFTokenizerAdapter:
    """Adapter giving a Hugging Face tokenizer the same word-level surface.

    Adds the reserved marker token to the vocabulary; callers must resize the
    encoder's embedding matrix accordingly.
    """

    def __init__(self, tokenizer):
        for attr in ("mask_token_id", "cls_token_id", "pad_token_id"):
            if getattr(tokenizer, attr, None) is None:
                raise EncodingError(f"tokenizer lacks {attr}; cannot build pairs")
        self._tok = tokenizer
        if MARKER_TOKEN not in tokenizer.get_vocab():
            tokenizer.add_tokens([MARKER_TOKEN])
        self._marker_id = tokenizer.convert_tokens_to_ids(MARKER_TOKEN)

    @classmethod
    def from_pretrained(cls, name: str) -> "HFTokenizerAdapter":
        from transformers import AutoTokenizer

        return cls(AutoTokenizer.from_pretrained(name))

    @property
    def tokenizer(self):
        return self._tok

    @property
    def vocab_size(self) -> int:
        return len(self._tok)

    @property
    def pad_id(self) -> int:
        return self._tok.pad_token_id

    @property
    def cls_id(self) -> int:
        return self._tok.cls_token_id

    @property
    def mask_id(self) -> int:
        return self._tok.mask_token_id

    @property
    def marker_id(self) -> int:
        return self._marker_id

    def encode_word(self, word: str, first: bool = False) -> list[int]:
        # mid-sentence words carry a leading space for BPE vocabularies
        text = word if first else " " + word
        ids = self._tok(text, add_special_tokens=False)["input_ids"]
        if not ids:
            ids = self._tok(word, add_special_tokens=False)["input_ids"]
        return list(ids)

    def vocabulary_hash(self) -> str:
        vocab = self._tok.get_vocab()
        payload = "\n".join(f"{t}\t{i}" for t, i in sorted(vocab.items()))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class EncodedPair:
    """Token ids for the marked input and the masked input of one target."""

    instance_id: str
    realization_ids: tuple[int, ...]
    expectation_ids: tuple[int, ...]
    realization_span: tuple[int, int]  # [start, end) of target subwords
    expectation_span: tuple[int, int]  # [start, end) of mask positions

    @property
    def realization_len(self) -> int:
        return len(self.realization_ids)

    @property
    def expectation_len(self) -> int:
        return len(self.expectation_ids)

    @property
    def n_target_subwords(self) -> int:
        return self.realization_span[1] - self.realization_span[0]


def encode_pair(
    instance: TargetInstance,
    tokenizer,
    max_len: int = MAX_SEQUENCE_LENGTH,
) -> EncodedPair:
    """Build the aligned (realization, expectation) id sequences.

    Content is right-truncated so that the realization sequence, which is two
    marker tokens longer, still fits max_len. An instance whose target does
    not survive truncation raises TargetTruncatedError so exclusions stay
    auditable instead of silent.
    """
    if max_len < 4:
        raise EncodingError(f"max_len {max_len} cannot hold a marked target")
    word_ids = []
    for i, word in enumerate(instance.sentence):
        ids = tokenizer.encode_word(word, first=(i == 0))
        if i == instance.target_index and not ids:
            raise EncodingError(
                f"{instance.instance_id}: target word {word!r} tokenized to nothing"
            )
        word_ids.append(ids)

    content: list[int] = [tokenizer.cls_id]
    span_start = span_end = None
    for i, ids in enumerate(word_ids):
        if i == instance.target_index:
            span_start = len(content)
            span_end = span_start + len(ids)
        content.extend(ids)
    assert span_start is not None and span_end is not None

    budget = max_len - 2  # room for the two markers in the realization input
    if span_end > budget:
        raise TargetTruncatedError(
            f"{instance.instance_id}: target subwords end at {span_end}, "
            f"beyond the truncation budget of {budget}"
        )
    content = content[:budget]
    span = (span_start, span_end)

    expectation = list(content)
    n_sub = span[1] - span[0]
    expectation[span[0]:span[1]] = [tokenizer.mask_id] * n_sub

    realization = (
        content[: span[0]]
        + [tokenizer.marker_id]
        + content[span[0]:span[1]]
        + [tokenizer.marker_id]
        + content[span[1]:]
    )
    return EncodedPair(
        instance_id=instance.instance_id,
        realization_ids=tuple(realization),
        expectation_ids=tuple(expectation),
        realization_span=(span[0] + 1, span[1] + 1),
        expectation_span=span,
    )


def strip_markers(pair: EncodedPair, marker_id: int) -> tuple[int, ...]:
    """Realization ids with the two marker tokens removed."""
    return tuple(i for i in pair.realization_ids if i != marker_id)


def unmask(pair: EncodedPair, target_subword_ids: list[int]) -> tuple[int, ...]:
    """Expectation ids with the masks replaced by the given subword ids."""
    start, end = pair.expectation_span
    ids = list(pair.expectation_ids)
    if len(target_subword_ids) != end - start:
        raise EncodingError("target subword count does not match the mask span")
    ids[start:end] = target_subword_ids
    return tuple(ids)


def encode_instances(
    instances,
    tokenizer,
    max_len: int = MAX_SEQUENCE_LENGTH,
) -> tuple[list[EncodedPair], list[int], list[tuple[str, str]]]:
    """Encode a corpus slice, excluding unencodable instances with a reason.

    Returns aligned (pairs, labels) plus an audit list of
    (instance_id, reason) for every exclusion.
    """
    pairs: list[EncodedPair] = []
    labels: list[int] = []
    excluded: list[tuple[str, str]] = []
    for inst in instances:
        try:
            pairs.append(encode_pair(inst, tokenizer, max_len))
        except EncodingError as exc:
            excluded.append((inst.instance_id, str(exc)))
            continue
        labels.append(inst.label)
    return pairs, labels, excluded


def collate_pairs(pairs: list[EncodedPair], pad_id: int) -> dict[str, torch.Tensor]:
    """Pad a batch of pairs into the tensors the networks consume.

    Span masks are 1.0 on target subword positions so span mean-pooling is a
    masked average.
    """
    if not pairs:
        raise EncodingError("cannot collate an empty batch")
    r_len = max(p.realization_len for p in pairs)
    e_len = max(p.expectation_len for p in pairs)
    batch = {
        "realization_ids": torch.full((len(pairs), r_len), pad_id, dtype=torch.long),
        "realization_attn": torch.zeros(len(pairs), r_len, dtype=torch.long),
        "realization_span_mask": torch.zeros(len(pairs), r_len),
        "expectation_ids": torch.full((len(pairs), e_len), pad_id, dtype=torch.long),
        "expectation_attn": torch.zeros(len(pairs), e_len, dtype=torch.long),
        "expectation_span_mask": torch.zeros(len(pairs), e_len),
    }
    for row, pair in enumerate(pairs):
        batch["realization_ids"][row, : pair.realization_len] = torch.tensor(
            pair.realization_ids, dtype=torch.long
        )
        batch["realization_attn"][row, : pair.realization_len] = 1
        rs, re = pair.realization_span
        batch["realization_span_mask"][row, rs:re] = 1.0
        batch["expectation_ids"][row, : pair.expectation_len] = torch.tensor(
            pair.expectation_ids, dtype=torch.long
        )
        batch["expectation_attn"][row, : pair.expectation_len] = 1
        es, ee = pair.expectation_span
        batch["expectation_span_mask"][row, es:ee] = 1.0
    return batch
