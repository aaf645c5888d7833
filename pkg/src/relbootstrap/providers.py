"""Embedding and translation providers.

Heavy models live behind two small HTTP protocols so the toolkit stays
testable offline:

Embedding provider
    ``GET /v1/info`` -> ``{"dimension": D}``
    ``POST /v1/embed`` body ``{"texts": [...], "granularity": "sentence"|"tokens"}``
    -> ``{"vectors": [[...], ...]}`` or ``{"token_vectors": [[[...], ...], ...]}``

Translation provider
    ``POST /v1/translate`` body ``{"texts": [...], "source_lang": "en", "target_lang": "hi"}``
    -> ``{"translations": [...]}``

Deterministic stubs (hash-token embedder, dictionary translator) ship here
for tests and the bundled demo pipeline, plus FastAPI apps that expose any
in-process provider over the wire protocols.
"""

from __future__ import annotations

import hashlib
from typing import Iterable, Mapping, Protocol, Sequence, runtime_checkable

import numpy as np
from pydantic import BaseModel


class EmbedRequest(BaseModel):
    texts: list[str]
    granularity: str = "sentence"


class TranslateRequest(BaseModel):
    texts: list[str]
    source_lang: str
    target_lang: str


class TransportError(RuntimeError):
    """Provider endpoint unreachable or returned a non-success status."""


class ProtocolError(RuntimeError):
    """Provider response violates the wire protocol (e.g. wrong dimension)."""


# ---------------------------------------------------------------------------
# Embedding


@runtime_checkable
class EmbeddingProvider(Protocol):
    @property
    def dimension(self) -> int: ...

    def embed_sentences(self, texts: Sequence[str]) -> np.ndarray:
        """(len(texts), D) array; one pooled vector per text."""
        ...

    def embed_tokens(self, texts: Sequence[str]) -> list[np.ndarray]:
        """Per text, an (n_tokens, D) array over its whitespace tokens."""
        ...


class HashEmbeddingStub:
    """Deterministic embedder: seeded hash of each token -> unit vector.

    Sentence granularity mean-pools the token vectors; an empty text embeds
    to the zero vector.
    """

    def __init__(self, dimension: int = 16, seed: int = 0):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self._dim = dimension
        self._seed = seed
        self._cache: dict[str, np.ndarray] = {}

    @property
    def dimension(self) -> int:
        return self._dim

    def _token_vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.blake2b(
                token.encode("utf-8"), digest_size=8, key=str(self._seed).encode()
            ).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "big"))
            raw = rng.standard_normal(self._dim)
            vec = raw / np.linalg.norm(raw)
            self._cache[token] = vec
        return vec

    def embed_tokens(self, texts: Sequence[str]) -> list[np.ndarray]:
        out = []
        for text in texts:
            tokens = text.split()
            if tokens:
                out.append(np.stack([self._token_vector(t) for t in tokens]))
            else:
                out.append(np.zeros((0, self._dim)))
        return out

    def embed_sentences(self, texts: Sequence[str]) -> np.ndarray:
        rows = []
        for mat in self.embed_tokens(texts):
            rows.append(mat.mean(axis=0) if len(mat) else np.zeros(self._dim))
        return np.stack(rows) if rows else np.zeros((0, self._dim))


class HttpEmbeddingClient:
    """EmbeddingProvider speaking the wire protocol against a remote endpoint."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        import httpx

        self._client = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout)
        try:
            resp = self._client.get("/v1/info")
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"embedding provider info failed: {exc}") from exc
        info = resp.json()
        if not isinstance(info.get("dimension"), int) or info["dimension"] < 1:
            raise ProtocolError(f"bad /v1/info response: {info!r}")
        self._dim = info["dimension"]

    @property
    def dimension(self) -> int:
        return self._dim

    def _post(self, texts: Sequence[str], granularity: str) -> dict:
        import httpx

        try:
            resp = self._client.post(
                "/v1/embed", json={"texts": list(texts), "granularity": granularity}
            )
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"embed request failed: {exc}") from exc
        return resp.json()

    def embed_sentences(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self._dim))
        body = self._post(texts, "sentence")
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProtocolError("embed response missing 'vectors' of matching length")
        arr = np.asarray(vectors, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != self._dim:
            raise ProtocolError(f"dimension mismatch: expected {self._dim}, got {arr.shape}")
        return arr

    def embed_tokens(self, texts: Sequence[str]) -> list[np.ndarray]:
        if not texts:
            return []
        body = self._post(texts, "tokens")
        tv = body.get("token_vectors")
        if not isinstance(tv, list) or len(tv) != len(texts):
            raise ProtocolError("embed response missing 'token_vectors' of matching length")
        out = []
        for rows in tv:
            arr = np.asarray(rows, dtype=float) if rows else np.zeros((0, self._dim))
            if arr.ndim != 2 or (len(arr) and arr.shape[1] != self._dim):
                raise ProtocolError(f"dimension mismatch: expected {self._dim}, got {arr.shape}")
            out.append(arr)
        return out


def embedding_app(provider: EmbeddingProvider):
    """FastAPI app exposing an in-process embedder over the wire protocol."""
    from fastapi import FastAPI, HTTPException

    app = FastAPI(title="embedding provider")

    @app.get("/v1/info")
    def info():
        return {"dimension": provider.dimension}

    @app.post("/v1/embed")
    def embed(req: EmbedRequest):
        if req.granularity == "sentence":
            return {"vectors": provider.embed_sentences(req.texts).tolist()}
        if req.granularity == "tokens":
            return {"token_vectors": [m.tolist() for m in provider.embed_tokens(req.texts)]}
        raise HTTPException(status_code=422, detail=f"unknown granularity {req.granularity!r}")

    return app


# ---------------------------------------------------------------------------
# Translation


@runtime_checkable
class TranslationProvider(Protocol):
    def supports(self, source_lang: str, target_lang: str) -> bool: ...

    def translate(self, texts: Sequence[str], source_lang: str, target_lang: str) -> list[str]:
        """Exactly one translation per input text, in order."""
        ...


class DictionaryTranslationStub:
    """Word-by-word deterministic translator for tests and demos.

    Looks each whitespace word up in the (source, target) dictionary; unknown
    words fall back to a deterministic tagged form ``word·tgt`` so that a
    sentence and an entity translated separately still agree word-for-word.
    """

    def __init__(
        self,
        lexicon: Mapping[tuple[str, str], Mapping[str, str]] | None = None,
        pairs: Iterable[tuple[str, str]] | None = None,
    ):
        self._lexicon = {k: dict(v) for k, v in (lexicon or {}).items()}
        self._pairs = set(pairs) if pairs is not None else None

    def supports(self, source_lang: str, target_lang: str) -> bool:
        if self._pairs is None:
            return True
        return (source_lang, target_lang) in self._pairs

    def _word(self, word: str, table: Mapping[str, str], target_lang: str) -> str:
        hit = table.get(word)
        if hit is not None:
            return hit
        return f"{word}·{target_lang}"

    def translate(self, texts: Sequence[str], source_lang: str, target_lang: str) -> list[str]:
        if not self.supports(source_lang, target_lang):
            raise ValueError(f"unsupported language pair {source_lang}->{target_lang}")
        if source_lang == target_lang:
            return [" ".join(t.split()) for t in texts]
        table = self._lexicon.get((source_lang, target_lang), {})
        return [
            " ".join(self._word(w, table, target_lang) for w in text.split())
            for text in texts
        ]


class HttpTranslationClient:
    """TranslationProvider speaking the wire protocol against a remote endpoint."""

    def __init__(self, base_url: str, timeout: float = 60.0):
        import httpx

        self._client = httpx.Client(base_url=base_url.rstrip("/"), timeout=timeout)

    def supports(self, source_lang: str, target_lang: str) -> bool:
        return True  # delegated to the endpoint; errors surface on translate

    def translate(self, texts: Sequence[str], source_lang: str, target_lang: str) -> list[str]:
        import httpx

        try:
            resp = self._client.post(
                "/v1/translate",
                json={
                    "texts": list(texts),
                    "source_lang": source_lang,
                    "target_lang": target_lang,
                },
            )
            resp.raise_for_status()
        except httpx.HTTPError as exc:
            raise TransportError(f"translate request failed: {exc}") from exc
        body = resp.json()
        translations = body.get("translations")
        if not isinstance(translations, list) or len(translations) != len(texts):
            raise ProtocolError("translate response missing 'translations' of matching length")
        return [str(t) for t in translations]


def translation_app(provider: TranslationProvider):
    """FastAPI app exposing an in-process translator over the wire protocol."""
    from fastapi import FastAPI, HTTPException

    app = FastAPI(title="translation provider")

    @app.post("/v1/translate")
    def translate(req: TranslateRequest):
        if not provider.supports(req.source_lang, req.target_lang):
            raise HTTPException(
                status_code=422,
                detail=f"unsupported pair {req.source_lang}->{req.target_lang}",
            )
        return {"translations": provider.translate(req.texts, req.source_lang, req.target_lang)}

    return app
