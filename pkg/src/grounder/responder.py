"""Prompt construction and response generation.

Builds the knowledge-augmented prompt (dialogue history + ranked cell
knowledge + generation cue) and obtains the answer from a provider: either
an OpenAI-compatible HTTP completions endpoint or a deterministic mock
used for offline tests and evaluation. The prompt template is documented
verbatim in docs/prompt.md.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Sequence

import httpx

from .corpus import CellRef, TableDocument, linearize_cell
from .encoder import DualEncoder, encode
from .index import DenseIndex, search
from .ranking import RankedList
from .sparse import Bm25Index, bm25_search
from .text_features import StopwordList, remove_stopwords
from .tracker import DialogueHistory, history_text, rank_cells

DEFAULT_KNOWLEDGE_CHAR_BUDGET = 300
NOK_FALLBACK_ANSWER = "I don't have that information."


class ProviderError(Exception):
    pass


class Mode(str, Enum):
    NOK = "nok"
    TOP1 = "top1"
    TOP3 = "top3"

    @property
    def k(self) -> int:
        return {Mode.NOK: 0, Mode.TOP1: 1, Mode.TOP3: 3}[self]


def load_fewshot_examples() -> list[tuple[str, str]]:
    """The two pinned few-shot (dialogue, answer) exemplars used in NoK mode."""
    raw = resources.files("grounder").joinpath("data/fewshot.json").read_text("utf-8")
    return [(ex["dialogue"], ex["answer"]) for ex in json.loads(raw)]


@dataclass(frozen=True)
class PromptSpec:
    mode: Mode
    history: DialogueHistory
    knowledge: tuple[str, ...] = ()
    few_shot_examples: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if self.mode is Mode.NOK:
            if self.knowledge:
                raise ValueError("NoK mode takes no knowledge")
            if len(self.few_shot_examples) != 2:
                raise ValueError("NoK mode requires exactly 2 few-shot examples")
        elif len(self.knowledge) > self.mode.k:
            raise ValueError(f"{self.mode.value} allows at most {self.mode.k} knowledge lines")


def build_prompt(
    spec: PromptSpec,
    sw: StopwordList,
    knowledge_char_budget: int = DEFAULT_KNOWLEDGE_CHAR_BUDGET,
    max_turns: int = 0,
) -> str:
    """Deterministic prompt assembly; byte-stable for fixed inputs.

    Knowledge lines are stopword-compressed and hard-truncated to the
    per-line character budget (the provider token-limit workaround).
    """
    blocks: list[str] = []
    for dialogue, answer in spec.few_shot_examples:
        blocks.append(f"{dialogue} A: {answer}")
    if spec.mode is not Mode.NOK and spec.knowledge:
        lines = ["Knowledge:"]
        for i, text in enumerate(spec.knowledge, start=1):
            compressed = remove_stopwords(text, sw)[:knowledge_char_budget]
            lines.append(f"K{i}: {compressed}")
        blocks.append("\n".join(lines))
    blocks.append(history_text(spec.history, max_turns))
    blocks.append("A:")
    return "\n".join(blocks)


@dataclass(frozen=True)
class GenerationProvider:
    kind: str  # "http" | "mock"
    base_url: str = ""
    model: str = "gpt-3.5-turbo-instruct"
    max_tokens: int = 256
    temperature: float = 0.0
    timeout: float = 30.0
    max_retries: int = 3

    def __post_init__(self) -> None:
        if self.kind not in ("http", "mock"):
            raise ValueError(f"unknown provider kind {self.kind!r}")
        if self.kind == "http" and not self.base_url:
            raise ValueError("http provider requires a base URL")


def provider_from_env(kind: str) -> GenerationProvider:
    if kind == "mock":
        return GenerationProvider(kind="mock")
    base = os.environ.get("GROUNDER_LLM_BASE_URL", "")
    if not base:
        raise ProviderError("http provider requires GROUNDER_LLM_BASE_URL")
    return GenerationProvider(kind="http", base_url=base)


def _mock_generate(prompt: str) -> str:
    """Deterministic offline answer: echo header and value of the K1 line."""
    for line in prompt.splitlines():
        if line.startswith("K1: "):
            body = line[len("K1: ") :]
            if body.startswith("[CELL] "):
                body = body[len("[CELL] ") :]
            body = body.split(" ; ")[0]
            tokens = body.split()
            if len(tokens) >= 2:
                return f"The {tokens[0]} is {' '.join(tokens[1:])}."
            if tokens:
                return f"The answer is {tokens[0]}."
            break
    return NOK_FALLBACK_ANSWER


def _http_generate(provider: GenerationProvider, prompt: str) -> str:
    url = provider.base_url.rstrip("/") + "/v1/completions"
    headers = {}
    token = os.environ.get("GROUNDER_LLM_API_KEY")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    payload = {
        "model": provider.model,
        "prompt": prompt,
        "max_tokens": provider.max_tokens,
        "temperature": provider.temperature,
    }
    last_error: Exception | None = None
    for attempt in range(provider.max_retries):
        if attempt:
            time.sleep(0.5 * 2 ** (attempt - 1))
        try:
            resp = httpx.post(url, json=payload, headers=headers, timeout=provider.timeout)
            if resp.status_code >= 500:
                last_error = ProviderError(f"provider returned {resp.status_code}")
                continue
            resp.raise_for_status()
            body = resp.json()
            return body["choices"][0]["text"].strip()
        except (httpx.TransportError, httpx.TimeoutException) as exc:
            last_error = exc
        except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc
        except httpx.HTTPStatusError as exc:
            raise ProviderError(f"provider error: {exc}") from exc
    raise ProviderError(f"provider failed after {provider.max_retries} attempts: {last_error}")


def generate(provider: GenerationProvider, prompt: str) -> str:
    """One provider call per turn; transient HTTP failures retry with backoff."""
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if provider.kind == "mock":
        return _mock_generate(prompt)
    return _http_generate(provider, prompt)


@dataclass(frozen=True)
class TurnResult:
    response: str
    table_id: str
    ranked_knowledge: tuple[tuple[CellRef, float, str], ...]  # (ref, score, text)


@dataclass
class Engine:
    """Loaded artifacts shared by the CLI, service, and evaluation runners."""

    encoder: DualEncoder
    corpus: dict[str, TableDocument]
    dense: DenseIndex | None = None
    bm25: Bm25Index | None = None
    stopwords: StopwordList | None = None
    provider: GenerationProvider = field(default_factory=lambda: GenerationProvider(kind="mock"))

    def retrieve_table(self, query: str, k: int = 1, sparse: bool = False) -> RankedList[str]:
        if sparse:
            if self.bm25 is None:
                raise ValueError("BM25 index not loaded")
            return bm25_search(self.bm25, query, k)
        if self.dense is None:
            raise ValueError("dense index not loaded")
        q_emb = encode(self.encoder.query_encoder, query)
        return search(self.dense, q_emb, k)


def answer_turn(
    engine: Engine,
    history: DialogueHistory,
    mode: Mode,
    active_table_id: str | None,
    sparse_retrieval: bool = False,
) -> TurnResult:
    """One pipeline turn.

    The first turn (no active table) retrieves the table from the query and
    answers from it; follow-ups rank the active table's cells, build the
    knowledge-augmented prompt, and call the provider once.
    """
    sw = engine.stopwords
    if sw is None:
        raise ValueError("engine has no stopword list loaded")
    if active_table_id is None:
        ranked = engine.retrieve_table(history.current_query, k=1, sparse=sparse_retrieval)
        active_table_id = ranked.ids()[0]
    table = engine.corpus[active_table_id]

    knowledge: tuple[tuple[CellRef, float, str], ...] = ()
    if mode is not Mode.NOK:
        cells = rank_cells(engine.encoder, table, history, k=mode.k)
        knowledge = tuple(
            (ref, score, linearize_cell(table, ref)) for ref, score in cells
        )
        spec = PromptSpec(
            mode=mode, history=history, knowledge=tuple(text for _, _, text in knowledge)
        )
    else:
        spec = PromptSpec(
            mode=mode, history=history,
            few_shot_examples=tuple(load_fewshot_examples()),
        )
    prompt = build_prompt(spec, sw)
    response = generate(engine.provider, prompt)
    return TurnResult(response=response, table_id=active_table_id, ranked_knowledge=knowledge)
