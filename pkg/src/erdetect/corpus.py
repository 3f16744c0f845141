"""Dataset ingestion into one canonical annotated-target record type.

Three source formats (VUA-20 shared-task CSV/TSV, LCC exports with a
metaphoricity score column, TroFi literal/nonliteral cluster files) are
normalized into TargetInstance records. All dataset quirks live in the
adapters; everything downstream consumes the canonical form.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from .errors import CorpusError, ParseError

DATASET_IDS = ("VUA20", "LCC", "TROFI")
ADAPTERS = ("vua20", "lcc", "trofi", "canonical")

# Canonical on-disk format: TSV, UTF-8, LF. Sentence tokens are space-joined.
# derived_lemma records whether the lemma came from the source file or from
# the fallback lemmatizer, so OOD fold provenance stays auditable.
CANONICAL_COLUMNS = (
    "instance_id",
    "dataset",
    "sentence",
    "target_index",
    "label",
    "lemma",
    "pos",
    "metaphoricity",
    "derived_lemma",
)


@dataclass(frozen=True)
class TargetInstance:
    """One annotated target word in a sentence, the unit of classification."""

    instance_id: str
    sentence: tuple[str, ...]
    target_index: int
    label: int
    lemma: str
    dataset_id: str
    pos: str | None = None
    metaphoricity: float | None = None
    derived_lemma: bool = False

    def __post_init__(self):
        if not self.instance_id:
            raise ValueError("instance_id must be non-empty")
        if self.dataset_id not in DATASET_IDS:
            raise ValueError(f"unknown dataset_id {self.dataset_id!r}")
        if not self.sentence or any(not w for w in self.sentence):
            raise ValueError("sentence must be a non-empty sequence of non-empty tokens")
        if not (0 <= self.target_index < len(self.sentence)):
            raise ValueError(
                f"target_index {self.target_index} out of bounds for sentence of "
                f"length {len(self.sentence)}"
            )
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if not self.lemma:
            raise ValueError("lemma must be non-empty")
        if self.metaphoricity is not None:
            if not (0.0 <= self.metaphoricity <= 3.0):
                raise ValueError(f"metaphoricity {self.metaphoricity} outside [0, 3]")
            if self.dataset_id == "LCC":
                if self.label == 1 and self.metaphoricity != 3.0:
                    raise ValueError("LCC positives must have metaphoricity 3")
                if self.label == 0 and self.metaphoricity != 0.0:
                    raise ValueError("LCC negatives must have metaphoricity 0")

    @property
    def target_word(self) -> str:
        return self.sentence[self.target_index]


@dataclass(frozen=True)
class RowIssue:
    """A rejected source row: where it was and why it failed."""

    row: int
    reason: str


@dataclass
class IngestResult:
    instances: list[TargetInstance]
    rejections: list[RowIssue] = field(default_factory=list)
    n_excluded_scores: int = 0  # LCC rows with mid-range metaphoricity (1 or 2)


@dataclass(frozen=True)
class DatasetStats:
    n_targets: int
    pct_metaphor: float
    n_sentences: int
    avg_sentence_len: float


# ---------------------------------------------------------------------------
# Lemmatization fallback for sources that do not provide lemmas.
# Deterministic suffix stripping plus a small irregular table; approximate on
# purpose -- it only has to group inflected forms consistently.
# ---------------------------------------------------------------------------

_IRREGULAR = {
    "am": "be", "is": "be", "are": "be", "was": "be", "were": "be", "been": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do",
    "goes": "go", "went": "go", "gone": "go",
    "ran": "run", "took": "take", "taken": "take", "made": "make", "said": "say",
    "got": "get", "gotten": "get", "gave": "give", "given": "give",
    "came": "come", "saw": "see", "seen": "see", "knew": "know", "known": "know",
    "thought": "think", "found": "find", "told": "tell", "became": "become",
    "left": "leave", "felt": "feel", "brought": "bring", "began": "begin",
    "begun": "begin", "kept": "keep", "held": "hold", "stood": "stand",
    "heard": "hear", "meant": "mean", "met": "meet", "paid": "pay",
    "sat": "sit", "spoke": "speak", "spoken": "speak", "wrote": "write",
    "written": "write", "drove": "drive", "driven": "drive", "ate": "eat",
    "eaten": "eat", "fell": "fall", "fallen": "fall", "flew": "fly",
    "flown": "fly", "grew": "grow", "grown": "grow", "drew": "draw",
    "drawn": "draw", "threw": "throw", "thrown": "throw", "broke": "break",
    "broken": "break", "chose": "choose", "chosen": "choose", "rose": "rise",
    "risen": "rise", "wore": "wear", "worn": "wear", "won": "win",
    "lost": "lose", "sold": "sell", "sent": "send", "built": "build",
    "bought": "buy", "caught": "catch", "taught": "teach", "fought": "fight",
    "sought": "seek", "struck": "strike", "spent": "spend", "lay": "lie",
    "lain": "lie", "led": "lead", "shot": "shoot", "slid": "slide",
    "spun": "spin", "swept": "sweep", "swam": "swim", "swum": "swim",
    "sank": "sink", "sunk": "sink", "children": "child", "men": "man",
    "women": "woman", "feet": "foot", "teeth": "tooth",
}

_VOWELS = set("aeiou")


def lemmatize(word: str) -> str:
    """Lowercased rule-based lemma of a word; total and deterministic."""
    w = word.lower()
    if w in _IRREGULAR:
        return _IRREGULAR[w]
    if w.endswith("'s"):
        w = w[:-2]
    if w in _IRREGULAR:
        return _IRREGULAR[w]
    if len(w) > 4 and w.endswith("ies"):
        return w[:-3] + "y"
    if len(w) > 4 and w.endswith("ied"):
        return w[:-3] + "y"
    if len(w) > 3 and w.endswith("es") and w[-3] in "sxzo":
        return w[:-2]
    if len(w) > 4 and (w.endswith("ches") or w.endswith("shes")):
        return w[:-2]
    if len(w) > 4 and w.endswith("ing"):
        return _undouble(w[:-3])
    if len(w) > 3 and w.endswith("ed"):
        return _undouble(w[:-2])
    if len(w) > 3 and w.endswith("s") and not w.endswith("ss") and not w.endswith("us"):
        return w[:-1]
    return w or word.lower()


def _undouble(stem: str) -> str:
    # running -> run, stopped -> stop; keep -ll/-ss (falling -> fall)
    if (
        len(stem) >= 3
        and stem[-1] == stem[-2]
        and stem[-1] not in _VOWELS
        and stem[-1] not in "ls"
    ):
        return stem[:-1]
    return stem


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


def ingest(path: str | Path, adapter: str, dataset_id: str | None = None) -> IngestResult:
    """Read a source file into canonical records.

    Rows that violate record invariants become RowIssue entries with their
    1-based row numbers; they are never silently dropped. LCC rows with a
    mid-range metaphoricity score are excluded by design and only counted.
    """
    path = Path(path)
    if adapter not in ADAPTERS:
        raise CorpusError(f"unknown adapter {adapter!r}; expected one of {ADAPTERS}")
    if not path.exists():
        raise CorpusError(f"input file not found: {path}")
    if adapter == "vua20":
        rows = _read_vua20(path)
        dataset_id = dataset_id or "VUA20"
    elif adapter == "lcc":
        rows = _read_lcc(path)
        dataset_id = dataset_id or "LCC"
    elif adapter == "trofi":
        rows = _read_trofi(path)
        dataset_id = dataset_id or "TROFI"
    else:
        rows = _read_canonical(path)
    result = IngestResult(instances=[])
    seen_ids: set[str] = set()
    for row_no, payload in rows:
        if payload is EXCLUDED_SCORE:
            result.n_excluded_scores += 1
            continue
        if isinstance(payload, str):  # adapter-level rejection reason
            result.rejections.append(RowIssue(row=row_no, reason=payload))
            continue
        if adapter != "canonical":
            payload.setdefault("dataset_id", dataset_id)
        if payload.get("lemma") is None:
            words = payload["sentence"]
            idx = payload["target_index"]
            if 0 <= idx < len(words):
                payload["lemma"] = lemmatize(words[idx])
                payload["derived_lemma"] = True
            else:
                payload["lemma"] = ""  # forced invariant failure below
        try:
            inst = TargetInstance(**payload)
        except (ValueError, TypeError) as exc:
            result.rejections.append(RowIssue(row=row_no, reason=str(exc)))
            continue
        if inst.instance_id in seen_ids:
            result.rejections.append(
                RowIssue(row=row_no, reason=f"duplicate instance_id {inst.instance_id!r}")
            )
            continue
        seen_ids.add(inst.instance_id)
        result.instances.append(inst)
    return result


EXCLUDED_SCORE = object()  # sentinel yielded by the LCC reader for scores 1/2


def _open(path: Path) -> io.TextIOWrapper:
    return open(path, "r", encoding="utf-8", newline="")


def _dict_reader(path: Path):
    with _open(path) as fh:
        sample = fh.readline()
        delimiter = "\t" if "\t" in sample else ","
    fh = _open(path)
    return fh, csv.DictReader(fh, delimiter=delimiter)


def _norm_header(row: dict) -> dict:
    return {(k or "").strip().lower(): (v if v is not None else "") for k, v in row.items()}


def _read_vua20(path: Path):
    """VUA-20 shared-task table: index, label, sentence, POS, FGPOS, w_index."""
    fh, reader = _dict_reader(path)
    with fh:
        header = {h.strip().lower() for h in (reader.fieldnames or [])}
        required = {"index", "label", "sentence", "w_index"}
        missing = required - header
        if missing:
            raise ParseError(1, f"VUA-20 header missing columns {sorted(missing)}")
        for row_no, raw in enumerate(reader, start=2):
            row = _norm_header(raw)
            try:
                words = tuple(row["sentence"].split())
                yield row_no, {
                    "instance_id": row["index"].strip(),
                    "sentence": words,
                    "target_index": int(row["w_index"]),
                    "label": int(row["label"]),
                    "lemma": None,
                    "pos": row.get("pos", "").strip() or None,
                }
            except (KeyError, ValueError) as exc:
                raise ParseError(row_no, f"malformed VUA-20 row: {exc}") from exc


def _read_lcc(path: Path):
    """LCC export: instance_id, sentence, target_index, metaphoricity[, pos]."""
    fh, reader = _dict_reader(path)
    with fh:
        header = {h.strip().lower() for h in (reader.fieldnames or [])}
        required = {"instance_id", "sentence", "target_index", "metaphoricity"}
        missing = required - header
        if missing:
            raise ParseError(1, f"LCC header missing columns {sorted(missing)}")
        for row_no, raw in enumerate(reader, start=2):
            row = _norm_header(raw)
            try:
                score = float(row["metaphoricity"])
                target_index = int(row["target_index"])
                words = tuple(row["sentence"].split())
            except (KeyError, ValueError) as exc:
                raise ParseError(row_no, f"malformed LCC row: {exc}") from exc
            if not (0.0 <= score <= 3.0):
                yield row_no, f"metaphoricity {score} outside [0, 3]"
                continue
            if score not in (0.0, 3.0):
                yield row_no, EXCLUDED_SCORE
                continue
            yield row_no, {
                "instance_id": row["instance_id"].strip(),
                "sentence": words,
                "target_index": target_index,
                "label": 1 if score == 3.0 else 0,
                "lemma": row.get("lemma", "").strip() or None,
                "pos": row.get("pos", "").strip() or None,
                "metaphoricity": score,
            }


def _read_trofi(path: Path):
    """TroFi cluster files: ``*verb*`` sections split into literal and
    nonliteral clusters, one ``sentence_id<TAB>tokens`` line per example.

    The target is the first token whose lemma matches the section verb.
    """
    verb = None
    label = None
    with _open(path) as fh:
        for row_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            stripped = line.strip()
            if stripped.startswith("*") and stripped.endswith("*"):
                tag = stripped.strip("*").strip().lower()
                if tag == "literal cluster":
                    label = 0
                elif tag == "nonliteral cluster":
                    label = 1
                else:
                    verb = tag
                    label = None
                continue
            if verb is None or label is None:
                yield row_no, "sentence line outside a labeled cluster"
                continue
            parts = line.split("\t")
            if len(parts) == 3 and len(parts[1]) == 1:
                parts = [parts[0], parts[2]]  # tolerate a one-letter flag column
            if len(parts) != 2:
                raise ParseError(row_no, "expected 'sentence_id<TAB>tokens'")
            sid, text = parts[0].strip(), parts[1].strip()
            words = tuple(text.split())
            target_index = None
            for i, w in enumerate(words):
                if w.lower() == verb or lemmatize(w) == verb:
                    target_index = i
                    break
            if target_index is None:
                yield row_no, f"target verb {verb!r} not found in sentence"
                continue
            yield row_no, {
                "instance_id": sid,
                "sentence": words,
                "target_index": target_index,
                "label": label,
                "lemma": verb,
                "pos": None,
            }


def _read_canonical(path: Path):
    with _open(path) as fh:
        reader = csv.reader(fh, delimiter="\t")
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise CorpusError(f"empty canonical file: {path}") from None
        if header != CANONICAL_COLUMNS:
            raise ParseError(1, f"bad canonical header {header!r}")
        for row_no, parts in enumerate(reader, start=2):
            if len(parts) != len(CANONICAL_COLUMNS):
                raise ParseError(row_no, f"expected {len(CANONICAL_COLUMNS)} columns, got {len(parts)}")
            rec = dict(zip(CANONICAL_COLUMNS, parts))
            try:
                yield row_no, {
                    "instance_id": rec["instance_id"],
                    "dataset_id": rec["dataset"],
                    "sentence": tuple(rec["sentence"].split()),
                    "target_index": int(rec["target_index"]),
                    "label": int(rec["label"]),
                    "lemma": rec["lemma"],
                    "pos": rec["pos"] or None,
                    "metaphoricity": float(rec["metaphoricity"]) if rec["metaphoricity"] else None,
                    "derived_lemma": rec["derived_lemma"] == "true",
                }
            except ValueError as exc:
                raise ParseError(row_no, f"malformed canonical row: {exc}") from exc


def save_canonical(instances: list[TargetInstance], path: str | Path) -> None:
    """Write records in the canonical TSV format (UTF-8, LF endings)."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(CANONICAL_COLUMNS) + "\n")
        for inst in instances:
            score = "" if inst.metaphoricity is None else format(inst.metaphoricity, "g")
            fh.write(
                "\t".join(
                    (
                        inst.instance_id,
                        inst.dataset_id,
                        " ".join(inst.sentence),
                        str(inst.target_index),
                        str(inst.label),
                        inst.lemma,
                        inst.pos or "",
                        score,
                        "true" if inst.derived_lemma else "false",
                    )
                )
                + "\n"
            )


def load_canonical(path: str | Path) -> list[TargetInstance]:
    result = ingest(path, adapter="canonical")
    if result.rejections:
        first = result.rejections[0]
        raise ParseError(first.row, f"canonical file contains invalid records: {first.reason}")
    return result.instances


def compute_stats(instances: list[TargetInstance]) -> DatasetStats:
    """Counts, metaphor percentage, and mean sentence length in words.

    Sentences are deduplicated by token sequence: several annotated targets
    in one sentence contribute one sentence but several targets.
    """
    if not instances:
        raise CorpusError("cannot compute statistics of an empty instance list")
    sentences = {inst.sentence for inst in instances}
    n = len(instances)
    return DatasetStats(
        n_targets=n,
        pct_metaphor=100.0 * sum(inst.label for inst in instances) / n,
        n_sentences=len(sentences),
        avg_sentence_len=sum(len(s) for s in sentences) / len(sentences),
    )
