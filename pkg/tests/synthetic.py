"""Constructed corpus where the label is a deterministic function of
target/context compatibility.

Each sentence is built from the context vocabulary of one domain; the target
word is a composed token (domain stem + suffix) whose stem may or may not
match the sentence's domain. label = 1 when the domains disagree, so solving
the task needs exactly the comparison between what the context предicts at
the target slot and what the target actually is.

Context words are ambiguous on purpose: every word belongs to two domains,
and only the sentence-level majority identifies the true domain.
"""

from __future__ import annotations

import random

from erdetect.corpus import TargetInstance
from erdetect.encoding import SimpleSubwordTokenizer


def make_compatibility_corpus(
    n: int = 600,
    seed: int = 0,
    n_domains: int = 6,
    words_per_domain: int = 6,
    n_suffixes: int = 30,
    min_len: int = 7,
    max_len: int = 11,
) -> tuple[list[TargetInstance], SimpleSubwordTokenizer]:
    rng = random.Random(seed)
    # word i of domain d is shared with domain (d + 1 + i % (n_domains - 1)),
    # so single words never identify the domain
    shared_with = {}
    context_words: dict[int, list[str]] = {d: [] for d in range(n_domains)}
    for d in range(n_domains):
        for i in range(words_per_domain):
            other = (d + 1 + i % (n_domains - 1)) % n_domains
            word = f"q{min(d, other)}x{max(d, other)}n{i}"
            context_words[d].append(word)
            shared_with[word] = (d, other)
            context_words[other].append(word)
    stems = [f"dom{d}" for d in range(n_domains)]
    suffixes = [f"fix{j:02d}" for j in range(n_suffixes)]
    fillers = ["so", "it", "very", "and", "then"]

    instances = []
    for i in range(n):
        context_domain = rng.randrange(n_domains)
        if rng.random() < 0.5:
            target_domain = context_domain
        else:
            target_domain = rng.choice(
                [d for d in range(n_domains) if d != context_domain]
            )
        label = int(target_domain != context_domain)
        length = rng.randint(min_len, max_len)
        words = [rng.choice(context_words[context_domain]) for _ in range(length)]
        for pos in range(length):
            if rng.random() < 0.15:
                words[pos] = rng.choice(fillers)
        target_word = stems[target_domain] + rng.choice(suffixes)
        target_index = rng.randrange(length + 1)
        words.insert(target_index, target_word)
        instances.append(
            TargetInstance(
                instance_id=f"syn{i:04d}",
                sentence=tuple(words),
                target_index=target_index,
                label=label,
                lemma=target_word,
                dataset_id="LCC",
                metaphoricity=3.0 if label else 0.0,
            )
        )
    pieces = sorted(
        {w for ws in context_words.values() for w in ws}
        | set(stems) | set(suffixes) | set(fillers)
    )
    return instances, SimpleSubwordTokenizer(pieces)
