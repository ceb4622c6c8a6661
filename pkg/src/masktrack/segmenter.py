"""Promptable-segmenter contract, the synthetic oracle, and the HTTP client.

Both backends answer point prompts with ranked candidate masks. The oracle
reads ground truth straight out of a synthetic scene and is the reference
implementation the rest of the pipeline is verified against; the remote
client adapts any server speaking the JSON wire protocol documented on
:func:`encode_segment_request`.
"""

from __future__ import annotations

import json
import math
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, List, Sequence, Tuple

import httpx
import numpy as np

from .errors import (
    BackendUnavailableError,
    NoCandidateError,
    ProtocolError,
)
from .mask import mask_area, rle_decode
from .sampling import Point

_LABELS = ("positive", "negative")
_WIRE_LABELS = {"positive": "pos", "negative": "neg"}
_FRAME_NUMBER = re.compile(r"(\d+)")


@dataclass(frozen=True)
class PointPrompt:
    point: Point
    label: str = "positive"

    def __post_init__(self):
        if self.label not in _LABELS:
            raise ValueError(f"label must be one of {_LABELS}, got {self.label!r}")


@dataclass
class CandidateMask:
    mask: np.ndarray
    predicted_iou: float
    stability: float


def _check_request(prompts: Sequence[PointPrompt], max_candidates: int) -> None:
    if not any(p.label == "positive" for p in prompts):
        raise ValueError("at least one positive prompt is required")
    if max_candidates < 1:
        raise ValueError(f"max_candidates must be >= 1, got {max_candidates}")


def _round_half_away(v: float) -> int:
    if v >= 0:
        return int(math.floor(v + 0.5))
    return int(math.ceil(v - 0.5))


class Segmenter(ABC):
    """Common face of all prompt-to-masks backends."""

    @abstractmethod
    def segment(
        self, frame_ref: Any, prompts: Sequence[PointPrompt], max_candidates: int = 3
    ) -> List[CandidateMask]:
        """Return at most ``max_candidates`` candidates in a total,
        deterministic order; raise NoCandidateError when nothing matches."""


class OracleSegmenter(Segmenter):
    """Perfect-knowledge backend over a synthetic scene.

    Candidates are exactly the ground-truth regions (wholes, parts, and the
    background) containing every positive prompt and none of the negative
    ones, ranked smallest-area-first so a click on a part yields the part
    before its parent shape. Scores are always 1.0.
    """

    def __init__(self, scene):
        self.scene = scene

    def segment(self, frame_ref, prompts, max_candidates=3):
        _check_request(prompts, max_candidates)
        t = self._frame_index(frame_ref)
        h, w = self.scene.height, self.scene.width
        pixels: List[Tuple[int, int, str]] = []
        for p in prompts:
            x = min(max(_round_half_away(p.point.x), 0), w - 1)
            y = min(max(_round_half_away(p.point.y), 0), h - 1)
            pixels.append((y, x, p.label))
        ranked = []
        for order, (region_id, mask) in enumerate(self.scene.regions(t)):
            hit = all(mask[y, x] for y, x, label in pixels if label == "positive")
            vetoed = any(mask[y, x] for y, x, label in pixels if label == "negative")
            if hit and not vetoed:
                ranked.append((mask_area(mask), order, mask))
        if not ranked:
            raise NoCandidateError(f"no region of frame {t} contains all positive prompts")
        ranked.sort(key=lambda item: (item[0], item[1]))
        return [CandidateMask(mask, 1.0, 1.0) for _, _, mask in ranked[:max_candidates]]

    def _frame_index(self, frame_ref) -> int:
        if isinstance(frame_ref, (int, np.integer)):
            t = int(frame_ref)
        else:
            numbers = _FRAME_NUMBER.findall(str(frame_ref))
            if not numbers:
                raise ValueError(f"cannot extract a frame index from {frame_ref!r}")
            t = int(numbers[-1])
        if not 1 <= t <= self.scene.frame_count:
            raise ValueError(f"frame {t} outside scene range 1..{self.scene.frame_count}")
        return t


def encode_segment_request(
    frame_ref: str, prompts: Sequence[PointPrompt], max_candidates: int
) -> bytes:
    """Build the canonical request body for POST {base}/v1/segment.

    The JSON layout is fixed so request bytes are reproducible:
    ``{"frame_ref":s,"prompts":[{"x":f64,"y":f64,"label":"pos"|"neg"}],
    "max_candidates":u32}`` with compact separators and no key reordering.
    """
    body = {
        "frame_ref": str(frame_ref),
        "prompts": [
            {"x": float(p.point.x), "y": float(p.point.y), "label": _WIRE_LABELS[p.label]}
            for p in prompts
        ],
        "max_candidates": int(max_candidates),
    }
    return json.dumps(body, separators=(",", ":")).encode("utf-8")


@dataclass
class RemoteConfig:
    """Connection settings for a segmentation server."""

    base_url: str
    frame_dims: Tuple[int, int]
    timeout: float = 10.0
    max_retries: int = 3
    max_in_flight: int = 4

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError(f"timeout must be > 0, got {self.timeout}")
        if self.max_retries < 1:
            raise ValueError(f"max_retries must be >= 1, got {self.max_retries}")


class RemoteSegmenter(Segmenter):
    """Client for any server implementing the segment wire protocol.

    Transport failures are retried up to ``max_retries`` total attempts;
    non-200 statuses and malformed payloads are protocol errors and are not
    retried. Responses are re-sorted by (predicted_iou desc, stability desc,
    area desc, arrival order) so ordering does not depend on server whims.
    In-flight requests are capped by a semaphore; the client is otherwise
    stateless and thread-safe.
    """

    def __init__(self, config: RemoteConfig, transport: httpx.BaseTransport = None):
        self.config = config
        self._url = config.base_url.rstrip("/") + "/v1/segment"
        self._client = httpx.Client(timeout=config.timeout, transport=transport)
        self._slots = threading.Semaphore(config.max_in_flight)

    def close(self) -> None:
        self._client.close()

    def segment(self, frame_ref, prompts, max_candidates=3):
        _check_request(prompts, max_candidates)
        body = encode_segment_request(frame_ref, prompts, max_candidates)
        with self._slots:
            response = self._post_with_retry(body)
        if response.status_code != 200:
            raise ProtocolError(f"server returned status {response.status_code}")
        candidates = self._parse_response(response)
        if not candidates:
            raise NoCandidateError("server returned an empty candidate list")
        order = sorted(
            range(len(candidates)),
            key=lambda i: (
                -candidates[i].predicted_iou,
                -candidates[i].stability,
                -mask_area(candidates[i].mask),
                i,
            ),
        )
        return [candidates[i] for i in order[:max_candidates]]

    def _post_with_retry(self, body: bytes) -> httpx.Response:
        last_error = None
        for _ in range(self.config.max_retries):
            try:
                return self._client.post(
                    self._url, content=body, headers={"content-type": "application/json"}
                )
            except httpx.TransportError as exc:
                last_error = exc
        raise BackendUnavailableError(
            f"segment server unreachable after {self.config.max_retries} attempts: {last_error}"
        ) from last_error

    def _parse_response(self, response: httpx.Response) -> List[CandidateMask]:
        try:
            payload = response.json()
        except (json.JSONDecodeError, ValueError) as exc:
            raise ProtocolError(f"response is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict) or not isinstance(payload.get("candidates"), list):
            raise ProtocolError("response must be an object with a 'candidates' list")
        h, w = self.config.frame_dims
        out: List[CandidateMask] = []
        for i, item in enumerate(payload["candidates"]):
            if not isinstance(item, dict):
                raise ProtocolError(f"candidates[{i}] is not an object")
            try:
                mask = rle_decode(item["mask"])
            except KeyError as exc:
                raise ProtocolError(f"candidates[{i}] missing 'mask'") from exc
            except Exception as exc:
                raise ProtocolError(f"candidates[{i}].mask does not decode: {exc}") from exc
            if mask.shape != (h, w):
                raise ProtocolError(
                    f"candidates[{i}].mask has size {list(mask.shape)}, expected [{h}, {w}]"
                )
            try:
                predicted_iou = float(item["predicted_iou"])
                stability = float(item["stability"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"candidates[{i}] scores missing or non-numeric") from exc
            if not (0.0 <= predicted_iou <= 1.0 and 0.0 <= stability <= 1.0):
                raise ProtocolError(f"candidates[{i}] scores outside [0, 1]")
            out.append(CandidateMask(mask, predicted_iou, stability))
        return out
