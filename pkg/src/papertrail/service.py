"""Minimal JSON-over-HTTP client used by the service-mode providers."""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request

from .errors import ProviderError

ENDPOINT_ENV_VAR = "PAPERTRAIL_SERVER_URL"
DEFAULT_TIMEOUT = 60.0


def default_endpoint() -> str | None:
    return os.environ.get(ENDPOINT_ENV_VAR)


def post_json(url: str, payload: dict, timeout: float = DEFAULT_TIMEOUT) -> dict:
    body = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(
        url, data=body, headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode("utf-8", "replace")[:500]
        raise ProviderError(f"{url} returned HTTP {exc.code}: {detail}") from exc
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise ProviderError(f"provider unreachable at {url}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProviderError(f"{url} returned invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ProviderError(f"{url} returned a non-object JSON payload")
    return data


def get_json(url: str, timeout: float = DEFAULT_TIMEOUT) -> dict:
    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            raw = resp.read()
    except urllib.error.HTTPError as exc:
        raise ProviderError(f"{url} returned HTTP {exc.code}") from exc
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        raise ProviderError(f"provider unreachable at {url}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProviderError(f"{url} returned invalid JSON: {exc}") from exc
    return data
