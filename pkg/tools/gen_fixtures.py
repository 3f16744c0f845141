"""Deterministically generate the packaged corpus fixtures.

Outputs (committed under tests/data/):
  trofi_fixture.txt   cluster-format file: 3737 sentences, 50 verbs,
                      1626 nonliteral (43.5%), mean sentence length 28.3
  lcc_fixture.tsv     score-column export: 5646 usable targets over 5390
                      sentences, 1632 positives (28.9%), mean length 28.9,
                      plus 150 mid-score rows that ingestion must exclude
  lcc_novel_ids.txt   237 ids of score-3 rows (novel-positive input file)
  vua20_mini.tsv      20-row sample in the shared-task column layout

Run from the repository root: python3 tools/gen_fixtures.py
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from erdetect.corpus import lemmatize  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "tests" / "data"

VERBS = [
    "absorb", "assault", "attack", "besiege", "cool", "dance", "destroy",
    "die", "dissolve", "drag", "drink", "drown", "eat", "escape", "evaporate",
    "examine", "fill", "fix", "flourish", "flow", "grab", "grasp", "kick",
    "kill", "knock", "lend", "melt", "miss", "pass", "plague", "plant",
    "play", "pollute", "pour", "pump", "rain", "rest", "ride", "roll",
    "sleep", "smooth", "step", "stick", "strike", "stumble", "target",
    "touch", "vaporize", "wither", "wrestle",
]

FILLERS = """
the a an of to in for on with by from at as but and or not this that these
those it its they their there here when while after before during against
company market price year quarter share stock bond rate percent money bank
report analyst investor profit loss revenue growth decline policy government
official president director chairman executive manager worker employee union
industry sector product service contract agreement deal offer bid plan
project program system network computer technology research development
energy oil gas power plant facility factory output supply demand order
economy economic financial fiscal trade export import tax budget deficit
billion million dollar cent board committee member group team leader head
week month day time period term point level value amount number figure
result effect impact change increase decrease rise fall gain drop problem
issue question answer statement announcement decision ruling court judge
lawyer case law regulation rule standard requirement condition situation
position location region area country state city town street building house
office home family child parent school student teacher doctor hospital
patient treatment drug medicine disease health food water air land field
farm crop grain corn wheat cattle fish bird tree forest river mountain
road bridge car truck train airplane ship port airport station terminal
letter word sentence page book paper article story news press media
television radio film music art museum history culture language people
person man woman friend neighbor customer client visitor guest crowd
public private general special important major minor new old young early
late recent current former future possible likely certain clear strong
weak large small big little high low long short wide narrow deep heavy
light fast slow quick quiet loud bright dark warm cold hot dry wet clean
however although because since though unless until despite toward among
between within without across around behind beyond under over above below
""".split()

SECOND_WORDS = ["nevertheless", "meanwhile", "moreover", "furthermore"]


def usable_fillers(verbs: list[str]) -> list[str]:
    verb_set = set(verbs)
    return [w for w in FILLERS if lemmatize(w) not in verb_set and w not in verb_set]


def inflect(verb: str, rng: random.Random) -> str:
    candidates = [verb]
    if verb.endswith("e"):
        candidates += [verb + "d", verb[:-1] + "ing", verb + "s"]
    else:
        candidates += [verb + "ed", verb + "ing", verb + "s"]
    forms = [c for c in candidates if lemmatize(c) == verb]
    return rng.choice(forms) if forms else verb


def balanced_lengths(n: int, total: int, low: int, high: int, rng: random.Random) -> list[int]:
    lengths = [rng.randint(low, high) for _ in range(n)]
    delta = total - sum(lengths)
    while delta != 0:
        i = rng.randrange(n)
        step = 1 if delta > 0 else -1
        if low <= lengths[i] + step <= high:
            lengths[i] += step
            delta -= step
    return lengths


def make_sentence(length: int, fillers: list[str], rng: random.Random,
                  seen: set[tuple[str, ...]]) -> list[str]:
    while True:
        words = [rng.choice(fillers) for _ in range(length)]
        if tuple(words) not in seen:
            seen.add(tuple(words))
            return words


def gen_trofi() -> None:
    rng = random.Random(20240201)
    fillers = usable_fillers(VERBS)
    n_total, n_pos, total_words = 3737, 1626, 105757
    per_verb = [75] * 37 + [74] * 13
    assert sum(per_verb) == n_total
    labels = [1] * n_pos + [0] * (n_total - n_pos)
    rng.shuffle(labels)
    lengths = balanced_lengths(n_total, total_words, 20, 37, rng)
    seen: set[tuple[str, ...]] = set()
    lines = []
    cursor = 0
    for verb, count in zip(VERBS, per_verb):
        rows = []
        for _ in range(count):
            words = make_sentence(lengths[cursor] - 1, fillers, rng, seen)
            form = inflect(verb, rng)
            position = rng.randrange(len(words) + 1)
            words.insert(position, form)
            seen.add(tuple(words))
            sid = f"wsj{rng.randint(1, 99):02d}:{cursor + 1:05d}"
            rows.append((labels[cursor], sid, " ".join(words)))
            cursor += 1
        lines.append(f"*{verb}*")
        lines.append("*literal cluster*")
        lines.extend(f"{sid}\t{text}" for lab, sid, text in rows if lab == 0)
        lines.append("*nonliteral cluster*")
        lines.extend(f"{sid}\t{text}" for lab, sid, text in rows if lab == 1)
    (OUT / "trofi_fixture.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def gen_lcc() -> None:
    rng = random.Random(20240202)
    fillers = usable_fillers([])
    n_sent, n_targets, n_pos, total_words = 5390, 5646, 1632, 155771
    n_second = n_targets - n_sent
    n_excluded = 150
    lengths = balanced_lengths(n_sent, total_words, 21, 37, rng)
    seen: set[tuple[str, ...]] = set()
    sentences = [make_sentence(length, fillers, rng, seen) for length in lengths]
    labels = [3.0] * n_pos + [0.0] * (n_targets - n_pos)
    rng.shuffle(labels)
    second_hosts = rng.sample(range(n_sent), n_second)
    rows = []
    pos_tags = ["VERB", "NOUN", "ADJ", "ADV"]
    target_slots = []
    for sent_idx in range(n_sent):
        target_slots.append((sent_idx, rng.randrange(len(sentences[sent_idx]))))
    for sent_idx in second_hosts:
        first = next(t for s, t in target_slots if s == sent_idx)
        choices = [i for i in range(len(sentences[sent_idx])) if i != first]
        target_slots.append((sent_idx, rng.choice(choices)))
    for row_idx, (sent_idx, target_idx) in enumerate(target_slots):
        rows.append((
            f"lcc{row_idx + 1:05d}",
            " ".join(sentences[sent_idx]),
            target_idx,
            labels[row_idx],
            rng.choice(pos_tags),
        ))
    for extra in range(n_excluded):
        words = make_sentence(rng.randint(21, 37), fillers, rng, seen)
        rows.append((
            f"lccmid{extra + 1:04d}",
            " ".join(words),
            rng.randrange(len(words)),
            float(rng.choice([1, 2])),
            rng.choice(pos_tags),
        ))
    rng.shuffle(rows)
    with open(OUT / "lcc_fixture.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("instance_id\tsentence\ttarget_index\tmetaphoricity\tpos\n")
        for instance_id, text, target_idx, score, pos in rows:
            fh.write(f"{instance_id}\t{text}\t{target_idx}\t{score:g}\t{pos}\n")
    positives = [r[0] for r in rows if r[3] == 3.0]
    novel = random.Random(20240203).sample(positives, 237)
    (OUT / "lcc_novel_ids.txt").write_text("\n".join(novel) + "\n", encoding="utf-8")


def gen_vua_mini() -> None:
    rng = random.Random(20240204)
    fillers = usable_fillers([])
    seen: set[tuple[str, ...]] = set()
    with open(OUT / "vua20_mini.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index\tlabel\tsentence\tPOS\tFGPOS\tw_index\n")
        for i in range(20):
            words = make_sentence(rng.randint(6, 14), fillers, rng, seen)
            fh.write(
                f"vua{i + 1:03d}\t{i % 2}\t{' '.join(words)}\tVERB\tVVD\t"
                f"{rng.randrange(len(words))}\n"
            )


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    gen_trofi()
    gen_lcc()
    gen_vua_mini()
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
