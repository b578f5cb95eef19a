"""Hook for learned reference-based metrics (COMET, BLEURT, ...) hosted elsewhere.

No model ships with poetrat. Anyone running such a metric behind a local
HTTP endpoint can plug it in through :class:`HttpScorer`, which POSTs
``{"candidate", "reference", "source"}`` and expects ``{"score": <number>}``.
"""

from __future__ import annotations

import json
import urllib.error
import urllib.request
from typing import Protocol

from ..errors import TransportError


class Scorer(Protocol):
    def score(self, candidate: str, reference: str, source: str) -> float: ...


class HttpScorer:
    def __init__(self, url: str, timeout: float = 60.0):
        self.url = url
        self.timeout = timeout

    def score(self, candidate: str, reference: str, source: str) -> float:
        body = json.dumps({"candidate": candidate, "reference": reference, "source": source},
                          ensure_ascii=False).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            raise TransportError(f"scorer at {self.url} failed: {exc}") from exc
        try:
            return float(payload["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"scorer at {self.url} returned no numeric 'score'") from exc
