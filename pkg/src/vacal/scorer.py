"""Client for harvesting answer-token log-probabilities from a completion
endpoint that reports per-token top-L logprobs, producing LogitRecord files.

Logprobs are logits shifted by the per-prompt log normalizer, so two-token
softmax scores computed from them match scores computed from raw logits at
any temperature.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import requests

from .records import LogitRecord


class ScorerError(RuntimeError):
    """Transport failure, malformed response, or missing answer token."""


class CredentialError(ScorerError):
    """The configured credential environment variable is not set."""


@dataclass(frozen=True)
class ScorerConfig:
    """Endpoint, answer tokens, and fetch policy.

    ``missing_token_fill`` is the logit assigned to a configured answer token
    absent from the returned top-L list (a large negative value standing in
    for probability zero); set it to None to error instead. The credential is
    read from the environment variable named by ``auth_token_env``, never
    from flags or files.
    """

    base_url: str
    model: str
    answer_tokens: tuple[str, str]
    auth_token_env: str = "SCORER_API_TOKEN"
    top_logprobs: int = 5
    timeout: float = 30.0
    max_in_flight: int = 4
    max_retries: int = 3
    retry_initial_delay: float = 0.5
    missing_token_fill: float | None = -1e4

    def __post_init__(self) -> None:
        if self.top_logprobs < 2:
            raise ValueError(f"top_logprobs must be at least 2, got {self.top_logprobs}")
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be at least 1, got {self.max_in_flight}")
        if not self.timeout > 0:
            raise ValueError(f"timeout must be positive, got {self.timeout}")
        if self.max_retries < 0:
            raise ValueError(f"max_retries must be non-negative, got {self.max_retries}")
        if len(self.answer_tokens) != 2 or self.answer_tokens[0] == self.answer_tokens[1]:
            raise ValueError(f"answer_tokens must be two distinct tokens, got {self.answer_tokens}")


@dataclass(frozen=True)
class PromptTemplate:
    """Prompt text with {placeholder} fields filled in by build_prompt."""

    text: str


BOOLQ_TEMPLATE = PromptTemplate(
    'Context:\n"{context}"\nQuestion: "{question}"\nYes or No?\nAnswer:'
)
SENTIMENT_TEMPLATE = PromptTemplate(
    'Film review:\n"{review}"\nIs the review positive or negative?\nAnswer:'
)


def build_prompt(fields: Mapping[str, str], template: PromptTemplate) -> str:
    """Substitute placeholders; extra fields are ignored, missing ones error."""
    try:
        return template.text.format_map(dict(fields))
    except KeyError as exc:
        raise ValueError(f"missing placeholder value for {exc.args[0]!r}") from None


def _credential(config: ScorerConfig) -> str:
    token = os.environ.get(config.auth_token_env)
    if not token:
        raise CredentialError(
            f"credential environment variable {config.auth_token_env!r} is not set"
        )
    return token


def fetch_logits(config: ScorerConfig, prompt: str) -> dict[str, float]:
    """Request one generated token with top-L logprobs and extract the
    configured answer tokens' values at the first position.

    Transient transport failures and 5xx responses are retried with
    exponential backoff (factor 2); scoring requests are read-only, so
    retries are safe.
    """
    token = _credential(config)
    body = {
        "model": config.model,
        "prompt": prompt,
        "max_tokens": 1,
        "logprobs": config.top_logprobs,
        "temperature": 0,
    }
    headers = {"Authorization": f"Bearer {token}"}
    delay = config.retry_initial_delay
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(delay)
            delay *= 2.0
        try:
            response = requests.post(
                config.base_url, json=body, headers=headers, timeout=config.timeout
            )
        except requests.RequestException as exc:
            last_error = exc
            continue
        if response.status_code >= 500:
            last_error = ScorerError(f"server error {response.status_code}")
            continue
        if response.status_code != 200:
            raise ScorerError(f"request failed with status {response.status_code}")
        return _extract_answer_logprobs(config, response)
    raise ScorerError(
        f"request failed after {config.max_retries + 1} attempts: {last_error}"
    ) from last_error


def _extract_answer_logprobs(config: ScorerConfig, response) -> dict[str, float]:
    try:
        data = response.json()
        top = data["choices"][0]["logprobs"]["top_logprobs"][0]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise ScorerError(f"malformed response: {exc!r}") from None
    if not isinstance(top, dict):
        raise ScorerError("malformed response: top_logprobs[0] is not a token map")
    out = {}
    for answer_token in config.answer_tokens:
        if answer_token in top:
            out[answer_token] = float(top[answer_token])
        elif config.missing_token_fill is not None:
            out[answer_token] = config.missing_token_fill
        else:
            raise ScorerError(f"answer token {answer_token!r} absent from top-L logprobs")
    return out


def _read_journal(path) -> tuple[dict[str, LogitRecord], set[str]]:
    completed: dict[str, LogitRecord] = {}
    errored: set[str] = set()
    if not os.path.exists(path):
        return completed, errored
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            entry = json.loads(line)
            if "error" in entry:
                errored.add(entry["id"])
            else:
                completed[entry["id"]] = LogitRecord(
                    id=entry["id"],
                    u_pos=entry["u_pos"],
                    u_neg=entry["u_neg"],
                    label=entry["label"],
                )
    return completed, errored


def fetch_dataset(
    config: ScorerConfig,
    examples: Sequence[tuple[str, Mapping[str, str]]],
    template: PromptTemplate,
    out_path,
) -> list[LogitRecord]:
    """Fetch answer-token logits for each (id, fields) example, journaling to
    ``out_path`` so interrupted runs resume without repeating completed ids.

    At most ``max_in_flight`` requests run concurrently; the journal has a
    single writer. Per-example failures are recorded as error entries without
    aborting the batch. Returns the records for all successfully scored
    input ids, in input order.
    """
    _credential(config)  # fail fast before any request
    ids = [ex_id for ex_id, _ in examples]
    if len(set(ids)) != len(ids):
        raise ValueError("example ids must be unique")
    completed, _ = _read_journal(out_path)
    pending = [(ex_id, fields) for ex_id, fields in examples if ex_id not in completed]

    def fetch_one(fields: Mapping[str, str]) -> dict[str, float]:
        prompt = build_prompt(fields, template)
        return fetch_logits(config, prompt)

    if pending:
        pos_token, neg_token = config.answer_tokens
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            futures = [(ex_id, fields, pool.submit(fetch_one, fields)) for ex_id, fields in pending]
            with open(out_path, "a", encoding="utf-8") as journal:
                for ex_id, fields, future in futures:
                    try:
                        logprobs = future.result()
                        record = LogitRecord(
                            id=ex_id,
                            u_pos=logprobs[pos_token],
                            u_neg=logprobs[neg_token],
                            label=int(fields["label"]),
                        )
                    except (ScorerError, KeyError, ValueError) as exc:
                        journal.write(json.dumps({"id": ex_id, "error": str(exc)}))
                        journal.write("\n")
                        journal.flush()
                        continue
                    completed[ex_id] = record
                    journal.write(
                        json.dumps(
                            {
                                "id": record.id,
                                "u_pos": record.u_pos,
                                "u_neg": record.u_neg,
                                "label": record.label,
                            }
                        )
                    )
                    journal.write("\n")
                    journal.flush()
    return [completed[ex_id] for ex_id in ids if ex_id in completed]
