"""HTTP client for the model sidecar (segmentation + embeddings).

The sidecar is an out-of-process server; this client health-checks it before
first use and retries transient failures. All failures surface as
:class:`SidecarError` so callers can distinguish "sidecar problem" from local
errors.
"""

from __future__ import annotations

import numpy as np
import requests

from .embeddings import EmbeddingSet
from .errors import SidecarError
from .masks import RleMask, rle_decode

__all__ = ["SidecarClient", "SidecarEmbedder", "SidecarSegmenter"]

DEFAULT_TIMEOUT = 120.0
DEFAULT_RETRIES = 2


class SidecarClient:
    def __init__(self, base_url: str, timeout: float = DEFAULT_TIMEOUT, retries: int = DEFAULT_RETRIES):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._checked = False

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = f"{self.base_url}{path}"
        last: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.request(method, url, json=payload, timeout=self.timeout)
            except requests.RequestException as exc:
                last = exc
                continue
            if resp.status_code >= 500:
                last = SidecarError(f"sidecar {url} returned {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise SidecarError(
                    f"sidecar {url} returned {resp.status_code}: {resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise SidecarError(f"sidecar {url} returned non-JSON body") from exc
        raise SidecarError(f"sidecar unreachable at {url}: {last}")

    def health(self) -> dict:
        return self._request("GET", "/health")

    def ensure_healthy(self) -> None:
        if self._checked:
            return
        info = self.health()
        if info.get("status") != "ok":
            raise SidecarError(f"sidecar health check failed: {info}")
        self._checked = True

    def segment(self, image_path, prompt: str = "") -> tuple[np.ndarray, float, str]:
        """Request a mask for one image; returns (mask, score, model_id)."""
        self.ensure_healthy()
        body = self._request(
            "POST", "/segment", {"image_path": str(image_path), "text_prompt": prompt}
        )
        try:
            rle = RleMask.from_json_dict(body["mask"])
            mask = rle_decode(rle)
            return mask, float(body.get("score", 0.0)), str(body.get("model_id", "unknown"))
        except (KeyError, TypeError, ValueError) as exc:
            raise SidecarError(f"sidecar returned a malformed segment response: {exc}") from exc

    def embed(self, image_paths, space: str = "stub") -> tuple[EmbeddingSet, str]:
        """Request embeddings for a list of images in the given space."""
        self.ensure_healthy()
        paths = [str(p) for p in image_paths]
        body = self._request("POST", "/embed", {"image_paths": paths, "space": space})
        try:
            data = np.asarray(body["embeddings"], dtype=np.float64)
            if data.ndim != 2 or data.shape[0] != len(paths) or data.shape[1] != int(body["dim"]):
                raise ValueError(f"embedding shape {data.shape} inconsistent with request")
            return (
                EmbeddingSet(data=data, paths=tuple(paths)),
                str(body.get("model_id", "unknown")),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SidecarError(f"sidecar returned a malformed embed response: {exc}") from exc


class SidecarEmbedder:
    """Adapter exposing the metric suite's embedder interface over a sidecar."""

    def __init__(self, client: SidecarClient, space: str = "stub"):
        self.client = client
        self.space = space
        self.model_id = f"sidecar-{space}"

    def embed_images(self, paths) -> EmbeddingSet:
        embeddings, model_id = self.client.embed(paths, space=self.space)
        self.model_id = model_id
        return embeddings


class SidecarSegmenter:
    """Adapter used by the build pipeline to fetch masks from a sidecar."""

    def __init__(self, client: SidecarClient):
        self.client = client

    def segment(self, image_path, prompt: str | None) -> np.ndarray:
        mask, _, _ = self.client.segment(image_path, prompt or "")
        return mask
