"""HTTP client for a remote denoiser service.

The wire protocol is JSON over HTTP/1.1: GET /v1/meta describes the model,
POST /v1/forward scores batches of token sequences in either dense
("full") or sparse ("topk") mode. Sparse responses are reconstructed into
dense logit rows with a uniform floor far below the weakest returned score,
which preserves the returned ordering and keeps top-k statistics exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .denoiser import Denoiser
from .dists import Vocab
from .errors import ConnectivityError, ProtocolError, UpstreamError

# Gap between the weakest returned logit and the floor assigned to
# non-returned tokens; exp(-30) leaves the reconstructed softmax of the
# returned set essentially untouched.
FLOOR_GAP = 30.0

META_FIELDS = ("vocab_size", "mask_id", "max_len", "model_name", "deterministic")


@dataclass(frozen=True)
class RemoteDenoiserConfig:
    endpoint: str
    top_m: int | None = None  # None selects dense "full" responses
    timeout: float = 10.0
    retries: int = 2


def reconstruct_dense(
    token_ids: Sequence[int], logprobs: Sequence[float], vocab_size: int
) -> np.ndarray:
    """Dense logit row from sparse (token_id, logprob) pairs."""
    if len(token_ids) == 0:
        raise ProtocolError("sparse response row carries no entries")
    row = np.full(vocab_size, min(logprobs) - FLOOR_GAP, dtype=np.float64)
    row[np.asarray(token_ids, dtype=np.int64)] = np.asarray(
        logprobs, dtype=np.float64
    )
    return row


class RemoteDenoiser(Denoiser):
    """Denoiser backed by a model server; safe for concurrent requests."""

    def __init__(self, config: RemoteDenoiserConfig):
        self.config = config
        self._base = config.endpoint.rstrip("/")
        meta = self._request("GET", "/v1/meta")
        for f in META_FIELDS:
            if f not in meta:
                raise ProtocolError(f"/v1/meta response missing field '{f}'")
        self._vocab = Vocab(size=int(meta["vocab_size"]), mask_id=int(meta["mask_id"]))
        self._max_len = int(meta["max_len"])
        self.model_name = str(meta["model_name"])
        self.deterministic = bool(meta["deterministic"])
        if config.top_m is not None and not 1 <= config.top_m <= self._vocab.size:
            raise ProtocolError(
                f"top_m {config.top_m} outside [1, vocab_size={self._vocab.size}]"
            )

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        url = self._base + path
        last_exc: Exception | None = None
        for _ in range(self.config.retries + 1):
            try:
                resp = requests.request(
                    method, url, json=body, timeout=self.config.timeout
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_exc = exc
                continue
            if resp.status_code >= 500:
                raise UpstreamError(
                    f"server error from {url}: {_error_message(resp)}"
                )
            if resp.status_code >= 400:
                raise ProtocolError(
                    f"request rejected by {url} "
                    f"({resp.status_code}): {_error_message(resp)}"
                )
            try:
                return resp.json()
            except ValueError as exc:
                raise ProtocolError(f"non-JSON response from {url}") from exc
        raise ConnectivityError(
            f"cannot reach {self._base} after {self.config.retries + 1} attempts: "
            f"{last_exc}"
        )

    def vocab(self) -> Vocab:
        return self._vocab

    def max_len(self) -> int:
        return self._max_len

    def forward(self, tokens: Sequence[int]) -> np.ndarray:
        return self.forward_batch([tokens])[0]

    def forward_batch(self, seqs: Sequence[Sequence[int]]) -> list[np.ndarray]:
        for seq in seqs:
            if len(seq) > self._max_len:
                raise ProtocolError(
                    f"sequence length {len(seq)} exceeds server max_len "
                    f"{self._max_len}"
                )
        mode = "full" if self.config.top_m is None else "topk"
        body: dict = {"tokens": [[int(t) for t in seq] for seq in seqs], "mode": mode}
        if mode == "topk":
            body["top_m"] = int(self.config.top_m)
        doc = self._request("POST", "/v1/forward", body)
        results = doc.get("results")
        if not isinstance(results, list) or len(results) != len(seqs):
            raise ProtocolError(
                f"expected {len(seqs)} result entries, got "
                f"{len(results) if isinstance(results, list) else type(results)}"
            )
        return [self._decode_result(seq, res, mode) for seq, res in zip(seqs, results)]

    def _decode_result(
        self, seq: Sequence[int], res: object, mode: str
    ) -> np.ndarray:
        v = self._vocab.size
        if not isinstance(res, list) or len(res) != len(seq):
            raise ProtocolError("result rows do not match request positions")
        if mode == "full":
            arr = np.asarray(res, dtype=np.float64)
            if arr.shape != (len(seq), v):
                raise ProtocolError(
                    f"dense result shape {arr.shape} != {(len(seq), v)}"
                )
            return arr
        rows = []
        for row in res:
            try:
                ids = [int(pair[0]) for pair in row]
                lps = [float(pair[1]) for pair in row]
            except (TypeError, IndexError, ValueError) as exc:
                raise ProtocolError("malformed sparse result row") from exc
            if len(ids) != self.config.top_m:
                raise ProtocolError(
                    f"sparse row has {len(ids)} entries, expected {self.config.top_m}"
                )
            rows.append(reconstruct_dense(ids, lps, v))
        return np.stack(rows)


def _error_message(resp: requests.Response) -> str:
    try:
        doc = resp.json()
        if isinstance(doc, dict) and "error" in doc:
            return str(doc["error"])
    except ValueError:
        pass
    return resp.text[:200]
