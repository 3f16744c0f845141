from __future__ import annotations

import random
from pathlib import Path

import pytest
import torch

from erdetect.corpus import TargetInstance
from erdetect.encoding import SimpleSubwordTokenizer
from erdetect.model import EncoderConfig, TransformerEncoder

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


def make_instance(
    instance_id: str,
    sentence,
    target_index: int = 0,
    label: int = 0,
    dataset_id: str = "LCC",
    lemma: str | None = None,
    metaphoricity: float | None = None,
    pos: str | None = None,
) -> TargetInstance:
    words = tuple(sentence.split()) if isinstance(sentence, str) else tuple(sentence)
    if metaphoricity is None and dataset_id == "LCC":
        metaphoricity = 3.0 if label == 1 else 0.0
    if lemma is None:
        lemma = words[target_index].lower() if 0 <= target_index < len(words) else "x"
    return TargetInstance(
        instance_id=instance_id,
        sentence=words,
        target_index=target_index,
        label=label,
        lemma=lemma,
        dataset_id=dataset_id,
        pos=pos,
        metaphoricity=metaphoricity,
    )


def random_corpus(n: int, seed: int, n_lemmas: int = 20, dataset_id: str = "LCC"):
    """Small synthetic corpus with controllable lemma diversity."""
    rng = random.Random(seed)
    words = [f"w{i}" for i in range(30)]
    instances = []
    for i in range(n):
        length = rng.randint(3, 9)
        sentence = [rng.choice(words) for _ in range(length)]
        target_index = rng.randrange(length)
        label = rng.randint(0, 1)
        instances.append(
            make_instance(
                f"inst{i:04d}",
                sentence,
                target_index=target_index,
                label=label,
                dataset_id=dataset_id,
                lemma=f"lemma{rng.randrange(n_lemmas)}",
            )
        )
    return instances


@pytest.fixture
def tiny_tokenizer() -> SimpleSubwordTokenizer:
    pieces = [f"w{i}" for i in range(30)] + ["sun", "walk", "ed", "cloud", "s", "the", "."]
    return SimpleSubwordTokenizer(pieces)


def tiny_encoder(tokenizer, hidden_size: int = 32, num_layers: int = 2, seed: int = 0):
    torch.manual_seed(seed)
    return TransformerEncoder(
        EncoderConfig(
            vocab_size=tokenizer.vocab_size,
            hidden_size=hidden_size,
            num_layers=num_layers,
            num_heads=4,
            max_positions=160,
            pad_id=tokenizer.pad_id,
        )
    )
