"""Zero-shot chat-model baseline: prompt rendering, a cached chat client,
answer parsing, and a logistic-regression classifier over the yes/no answers
to questions 2-14."""

from __future__ import annotations

import ast
import hashlib
import json
import os
import pickle
import re
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests
from sklearn.linear_model import LogisticRegression

from .corpus import TargetInstance
from .errors import LLMCacheMissError, LLMError
from .model import Prediction

N_FEATURES = 13  # questions 2..14

PROMPT_HEADER = (
    "You are a professional linguist. For the text below, answer precisely "
    "the following questions. Only print out a Python list containing your "
    "answers."
)

QUESTION_TEMPLATES = (
    "1. What word is emphasized?",
    '2. Is the emphasized word "{word}" used literally in the text? Yes or No?',
    '3. Is the emphasized word "{word}" used figuratively in the text? Yes or No?',
    '4. Is the emphasized word "{word}" used metaphorically in this text? Yes or No?',
    '5. Is the emphasized word "{word}" used with its literal meaning in the text? Yes or No?',
    '6. Is the emphasized word "{word}" used with its most common literal meaning in this text? Yes or No?',
    '7. Is the emphasized word "{word}" used with a concrete meaning in the text? Yes or No?',
    '8. Is the emphasized word "{word}" used with a physical meaning in the text? Yes or No?',
    '9. Is the emphasized word "{word}" used with its conventional meaning in the text? Yes or No?',
    '10. Is the emphasized word "{word}" used with its most common meaning in this text? Yes or No?',
    '11. Is the emphasized word "{word}" used with its original (oldest) meaning in this text? Yes or No?',
    '12. Is the emphasized word "{word}" part of a metaphorical expression in the text? Yes or No?',
    '13. Is the emphasized word "{word}" part of an idiomatic expression in the text? Yes or No?',
    '14. Is the emphasized word "{word}" part of a multiword expression in the text? Yes or No?',
)


@dataclass(frozen=True)
class PromptInstance:
    instance_id: str
    target_word: str
    text: str

    def __post_init__(self):
        starred = f"*{self.target_word}*"
        if self.text.count(starred) != 1:
            raise LLMError(
                f"{self.instance_id}: prompt must star the target exactly once"
            )


def render_prompt(instance: TargetInstance) -> PromptInstance:
    """Fill the question template with the sentence and its starred target.

    Only the token at target_index is starred, so repeated surface forms stay
    unambiguous.
    """
    word = instance.target_word
    if "*" in word:
        raise LLMError(
            f"{instance.instance_id}: target {word!r} contains an asterisk and "
            "cannot be starred unambiguously"
        )
    tokens = list(instance.sentence)
    tokens[instance.target_index] = f"*{word}*"
    sentence = " ".join(tokens)
    questions = "\n".join(t.format(word=word) for t in QUESTION_TEMPLATES)
    text = f"{PROMPT_HEADER}\n\ntext: {sentence}\n\n{questions}\n"
    return PromptInstance(instance_id=instance.instance_id, target_word=word, text=text)


@dataclass(frozen=True)
class AnswerFeatures:
    """Yes/No answers to questions 2-14 mapped to {1, 0}; 0.5 is abstention."""

    instance_id: str
    values: tuple[float, ...]
    parse_status: str  # clean | partial | failed

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise LLMError(f"expected {N_FEATURES} features, got {len(self.values)}")
        if any(v not in (0.0, 0.5, 1.0) for v in self.values):
            raise LLMError("feature values must be 0, 0.5 or 1")
        if self.parse_status not in ("clean", "partial", "failed"):
            raise LLMError(f"unknown parse status {self.parse_status!r}")
        if self.parse_status == "failed" and any(v != 0.5 for v in self.values):
            raise LLMError("failed parses must abstain on every question")


def failed_features(instance_id: str) -> AnswerFeatures:
    return AnswerFeatures(instance_id, (0.5,) * N_FEATURES, "failed")


_LIST_RE = re.compile(r"\[.*?\]", re.DOTALL)


def _split_items(body: str) -> list[str]:
    try:
        parsed = ast.literal_eval(body)
        if isinstance(parsed, (list, tuple)):
            return [str(x) for x in parsed]
    except (ValueError, SyntaxError):
        pass
    return [part.strip() for part in body.strip("[]").split(",")]


def _as_feature(item: str | None) -> float:
    if item is None:
        return 0.5
    token = item.strip().strip("\"'").strip().rstrip(".!?,;:").lower()
    if token == "yes":
        return 1.0
    if token == "no":
        return 0.0
    return 0.5


def parse_answers(instance_id: str, raw: str) -> AnswerFeatures:
    """Total parser: any response yields features.

    The first bracketed list is taken as the answers; a 14-item list is
    positions 1-14, a 13-item list is assumed to omit the free-text first
    answer. Unmappable items abstain at 0.5.
    """
    match = _LIST_RE.search(raw or "")
    if match is None:
        return failed_features(instance_id)
    items = _split_items(match.group(0))
    if len(items) >= 14:
        candidates = items[1:14]
    elif len(items) == N_FEATURES:
        candidates = items
    else:
        candidates = items[1:] if items else []
    padded = list(candidates[:N_FEATURES]) + [None] * (N_FEATURES - len(candidates))
    values = tuple(_as_feature(item) for item in padded)
    status = "clean" if all(v != 0.5 for v in values) else "partial"
    return AnswerFeatures(instance_id, values, status)


# ---------------------------------------------------------------------------
# Chat client with an append-only response cache
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClientConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "ERDETECT_LLM_API_KEY"
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    cache_only: bool = False


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float):
    response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    return response.status_code, response.text


class ChatClient:
    """Chat-completion client keyed by (instance_id, model, prompt hash).

    Every raw response is stored verbatim in an append-only JSONL cache, so
    runs replay byte-identically with the network disabled (cache_only).
    """

    def __init__(self, config: ClientConfig, cache_path: str | Path,
                 transport=None, sleep=time.sleep):
        self.config = config
        self.cache_path = Path(cache_path)
        self._transport = transport or _requests_transport
        self._sleep = sleep
        self._cache: dict[str, str] = {}
        if self.cache_path.exists():
            with open(self.cache_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    self._cache[record["key"]] = record["response"]

    def cache_key(self, prompt: PromptInstance) -> str:
        prompt_sha = hashlib.sha256(prompt.text.encode("utf-8")).hexdigest()
        raw = f"{prompt.instance_id}\n{self.config.model}\n{prompt_sha}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def _store(self, key: str, prompt: PromptInstance, response: str) -> None:
        record = {
            "key": key,
            "instance_id": prompt.instance_id,
            "model": self.config.model,
            "prompt_sha": hashlib.sha256(prompt.text.encode("utf-8")).hexdigest(),
            "response": response,
            "timestamp": time.time(),
        }
        self.cache_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.cache_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")
        self._cache[key] = response

    def query(self, prompt: PromptInstance) -> str:
        """Raw response text for a prompt; cached calls never hit the network."""
        key = self.cache_key(prompt)
        if key in self._cache:
            return self._cache[key]
        if self.config.cache_only:
            raise LLMCacheMissError(
                f"{prompt.instance_id}: not in cache and network is disabled"
            )
        api_key = os.environ.get(self.config.api_key_env, "")
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt.text}],
            "temperature": self.config.temperature,
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        last_error = "no attempt made"
        for attempt in range(self.config.max_retries):
            if attempt:
                self._sleep(self.config.backoff_base * 2 ** (attempt - 1))
            try:
                status, body = self._transport(url, headers, payload, self.config.timeout)
            except Exception as exc:  # noqa: BLE001 - transport errors retry
                last_error = f"transport error: {exc}"
                continue
            if status != 200:
                last_error = f"HTTP {status}: {body[:200]}"
                continue
            try:
                content = json.loads(body)["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                last_error = f"malformed response body: {exc}"
                continue
            self._store(key, prompt, content)
            return content
        raise LLMError(
            f"{prompt.instance_id}: giving up after {self.config.max_retries} "
            f"attempts ({last_error})"
        )


def collect_features(instances: list[TargetInstance], client: ChatClient) -> list[AnswerFeatures]:
    """Features for every instance; failures abstain but are never dropped."""
    features = []
    for inst in instances:
        prompt = render_prompt(inst)
        try:
            raw = client.query(prompt)
        except LLMError:
            features.append(failed_features(inst.instance_id))
            continue
        features.append(parse_answers(inst.instance_id, raw))
    return features


# ---------------------------------------------------------------------------
# Feature classifier
# ---------------------------------------------------------------------------


def _matrix(features: list[AnswerFeatures]) -> np.ndarray:
    return np.array([f.values for f in features], dtype=float)


class LLMFeatureClassifier:
    """Regularized logistic regression over the 13 answer features."""

    def __init__(self, C: float = 1.0, seed: int = 0):
        self.C = C
        self.seed = seed

    def get_params(self, deep: bool = True) -> dict:
        return {"C": self.C, "seed": self.seed}

    def fit(self, features: list[AnswerFeatures], labels) -> "LLMFeatureClassifier":
        y = np.asarray(labels, dtype=int)
        if len(features) != len(y):
            raise LLMError("features and labels must align")
        if len(set(y.tolist())) < 2:
            raise LLMError("training labels contain a single class")
        self.model_ = LogisticRegression(C=self.C, random_state=self.seed, max_iter=1000)
        self.model_.fit(_matrix(features), y)
        return self

    def predict(self, features: list[AnswerFeatures],
                model_tag: str = "llm-features") -> list[Prediction]:
        if not hasattr(self, "model_"):
            raise LLMError("classifier is not fitted")
        probs = self.model_.predict_proba(_matrix(features))[:, 1]
        return [
            Prediction.from_probability(f.instance_id, float(p), model_tag)
            for f, p in zip(features, probs)
        ]

    def save(self, path: str | Path) -> None:
        with open(path, "wb") as fh:
            pickle.dump({"C": self.C, "seed": self.seed, "model": self.model_}, fh)

    @classmethod
    def load(cls, path: str | Path) -> "LLMFeatureClassifier":
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
        clf = cls(C=payload["C"], seed=payload["seed"])
        clf.model_ = payload["model"]
        return clf
