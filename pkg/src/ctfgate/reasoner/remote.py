"""HTTP client for a hosted reasoning model.

Request rendering (versioned; the other side of this contract lives in
whatever service fronts the model):

    POST <endpoint>  content-type: application/json
    {
      "render": 1,
      "system": "<objective + doc-pack condition + queue snapshot>",
      "messages": [ {"role": "user", "content": "<history + last rejection>"} ],
      "tools": [ <tool schema documents, verbatim> ]
    }

Expected reply, either shape:

    {"candidates": [{"tool": ..., "arguments": {...}, "weight": 0.7}, ...],
     "rationale": "...", "plan": ["task", ...]}

or a chat-style {"content": "<text containing exactly one JSON object
of the first shape>"}. Candidates without weights get 1/rank. Anything
else is a ReasonerFailure carrying the sha256 digest of the raw reply
so the trace can identify the offending response without storing it.

Credentials come from the environment (REASONER_API_KEY), never from
argv. Retries: 3 attempts, exponential backoff from 1 s, on transport
errors, 5xx and 429; a final 429 surfaces as RateLimited.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import urllib.error
import urllib.request

from ctfgate.errors import RateLimited, ReasonerFailure
from ctfgate.reasoner.base import (
    CandidateSet,
    PlanProposal,
    ReasonerRequest,
    candidate_from_dict,
)

RENDER_VERSION = 1
MAX_ATTEMPTS = 3
BACKOFF_START_S = 1.0
API_KEY_ENV = "REASONER_API_KEY"


def _doc_pack_text(condition: str) -> str | None:
    # Shipped packs are inlined into the system prompt; an unknown
    # condition name degrades to a bare label rather than failing the
    # whole turn.
    try:
        from ctfgate.reasoner.docpack import load_doc_pack

        pack = load_doc_pack(condition)
    except Exception:
        return None
    parts = []
    for name in pack.names():
        parts.append(f"--- {name} ---\n{pack.document(name)}")
    return "\n".join(parts)


def render_request(request: ReasonerRequest) -> dict:
    """The exact over-the-wire body for one reasoner turn."""
    system_parts = [f"Objective: {request.objective}"]
    if request.doc_pack:
        system_parts.append(f"Guidance condition: {request.doc_pack}")
        text = _doc_pack_text(request.doc_pack)
        if text:
            system_parts.append(text)
    if request.queue_snapshot:
        system_parts.append("Task queue: " + json.dumps(list(request.queue_snapshot)))
    user_parts = []
    if request.history:
        user_parts.append("Observations: " + json.dumps(list(request.history)))
    if request.last_rejection:
        user_parts.append("Last call was rejected: " + json.dumps(request.last_rejection))
    if not user_parts:
        user_parts.append("No observations yet; propose the first action.")
    return {
        "render": RENDER_VERSION,
        "system": "\n".join(system_parts),
        "messages": [{"role": "user", "content": "\n".join(user_parts)}],
        "tools": list(request.tool_catalog),
    }


def _extract_candidate_doc(raw: bytes) -> dict:
    digest = hashlib.sha256(raw).hexdigest()
    try:
        body = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise ReasonerFailure("reply is not a JSON document", reply_digest=digest) from None
    if not isinstance(body, dict):
        raise ReasonerFailure("reply is not a JSON object", reply_digest=digest)
    if isinstance(body.get("candidates"), list):
        return body
    content = body.get("content")
    if isinstance(content, str):
        # chat-style wrapper: find the JSON object inside the text
        decoder = json.JSONDecoder()
        start = content.find("{")
        while start != -1:
            try:
                inner, _ = decoder.raw_decode(content, start)
            except json.JSONDecodeError:
                start = content.find("{", start + 1)
                continue
            if isinstance(inner, dict) and isinstance(inner.get("candidates"), list):
                return inner
            start = content.find("{", start + 1)
    raise ReasonerFailure("no parseable candidate list in reply", reply_digest=digest)


class RemoteReasoner:
    """Blocking request/response client for one configured endpoint."""

    def __init__(self, endpoint: str, timeout_s: float = 60.0,
                 api_key: str | None = None):
        if not endpoint.startswith(("http://", "https://")):
            raise ValueError(f"endpoint must be an http(s) URL, got {endpoint!r}")
        self.endpoint = endpoint
        self.timeout_s = timeout_s
        self._api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        # the endpoint's reported generation defaults, when it sends any
        self.reported_defaults: dict | None = None

    def _post(self, body: dict) -> bytes:
        data = json.dumps(body).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self._api_key:
            headers["Authorization"] = f"Bearer {self._api_key}"
        last_error: Exception | None = None
        rate_limited = False
        for attempt in range(MAX_ATTEMPTS):
            if attempt:
                time.sleep(BACKOFF_START_S * 2 ** (attempt - 1))
            req = urllib.request.Request(self.endpoint, data=data, headers=headers)
            try:
                with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                    return resp.read()
            except urllib.error.HTTPError as exc:
                rate_limited = exc.code == 429
                if exc.code in (429,) or 500 <= exc.code < 600:
                    last_error = exc
                    continue
                raw = exc.read()
                raise ReasonerFailure(
                    f"endpoint returned {exc.code}",
                    reply_digest=hashlib.sha256(raw).hexdigest(),
                ) from exc
            except (urllib.error.URLError, OSError, TimeoutError) as exc:
                rate_limited = False
                last_error = exc
                continue
        if rate_limited:
            raise RateLimited(
                f"endpoint still rate-limiting after {MAX_ATTEMPTS} attempts"
            ) from last_error
        raise ReasonerFailure(
            f"transport failed after {MAX_ATTEMPTS} attempts: {last_error}"
        ) from last_error

    def _round_trip(self, request: ReasonerRequest, mode: str) -> dict:
        body = render_request(request)
        body["mode"] = mode
        raw = self._post(body)
        doc = _extract_candidate_doc(raw) if mode == "act" else self._extract_plan(raw)
        if isinstance(doc.get("defaults"), dict):
            self.reported_defaults = doc["defaults"]
        return doc

    @staticmethod
    def _extract_plan(raw: bytes) -> dict:
        digest = hashlib.sha256(raw).hexdigest()
        try:
            body = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise ReasonerFailure("reply is not a JSON document", reply_digest=digest) from None
        if isinstance(body, dict) and isinstance(body.get("plan"), list):
            return body
        raise ReasonerFailure("no plan list in reply", reply_digest=digest)

    def propose_plan(self, request: ReasonerRequest) -> PlanProposal:
        doc = self._round_trip(request, mode="plan")
        return PlanProposal(
            tasks=[str(t) for t in doc["plan"]],
            rationale=doc.get("rationale"),
        )

    def next_candidates(self, request: ReasonerRequest) -> CandidateSet:
        doc = self._round_trip(request, mode="act")
        raw_candidates = doc["candidates"]
        if not raw_candidates:
            raise ReasonerFailure("endpoint returned an empty candidate list")
        candidates = tuple(
            candidate_from_dict(item, f"remote-{request.step_index:04d}-c{rank:02d}", rank)
            for rank, item in enumerate(raw_candidates, start=1)
        )
        return CandidateSet(candidates=candidates, rationale=doc.get("rationale"))
