"""Word-vector lookup, remote embedding client with disk cache, and mean pooling."""

import hashlib
import io
import logging
import os
import unicodedata
from dataclasses import dataclass

import numpy as np
import requests
from filelock import FileLock

from .errors import ContractError, FormatError, ProtocolError, ProviderError

logger = logging.getLogger(__name__)


class VectorStore:
    """Immutable token -> vector table.

    Lookups try the token as given first, then a case-folded index built from
    stored tokens whose lowercase form is not itself stored, so ``alaska``
    still finds an ``Alaska`` entry.
    """

    def __init__(self, tokens, matrix, source_name="vectors"):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(tokens):
            raise FormatError("vector matrix must be 2-D with one row per token")
        if matrix.shape[1] < 1:
            raise FormatError("vector dimension must be positive")
        matrix.setflags(write=False)
        self._matrix = matrix
        self._index = {}
        for i, tok in enumerate(tokens):
            self._index.setdefault(tok, i)
        self._folded = {}
        for tok, i in self._index.items():
            low = tok.lower()
            if low not in self._index:
                self._folded.setdefault(low, i)
        self.source_name = source_name

    @property
    def dimension(self):
        return int(self._matrix.shape[1])

    def __len__(self):
        return len(self._index)

    def __contains__(self, token):
        return token in self._index or token in self._folded

    @property
    def vectors(self):
        return {t: self._matrix[i] for t, i in self._index.items()}

    def lookup(self, token):
        i = self._index.get(token)
        if i is None:
            i = self._folded.get(token)
        return None if i is None else self._matrix[i]


def load_vectors(source, source_name="vectors"):
    """Read word2vec text (optional ``count dim`` header) or headerless GloVe text.

    Duplicate tokens keep their first vector.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    stream = io.StringIO(source) if isinstance(source, str) else source
    tokens, rows = [], []
    dim = None
    declared = None
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        parts = line.rstrip("\n").rstrip("\r").split()
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            declared = int(parts[1])
            continue
        token, values = parts[0], parts[1:]
        if dim is None:
            dim = declared if declared is not None else len(values)
        if len(values) != dim or dim == 0:
            raise FormatError(f"token {token!r} has {len(values)} values, expected {dim}")
        try:
            rows.append([float(v) for v in values])
        except ValueError:
            raise FormatError(f"token {token!r} has a non-numeric component") from None
        tokens.append(token)
    if not tokens:
        raise FormatError("vector file contains no vectors")
    return VectorStore(tokens, np.asarray(rows), source_name)


def load_vector_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_vectors(fh, source_name=os.path.basename(path))


@dataclass(frozen=True)
class DailyEmbedding:
    day: object
    vector: np.ndarray
    article_vectors: np.ndarray
    article_index: tuple  # positions in DailyNews.headlines of the covered articles


@dataclass(frozen=True)
class MissingDay:
    """Marker for a day where no headline had any in-vocabulary token."""

    day: object


def embed_headline(tokens, store):
    """Mean of in-vocabulary token vectors, or ``None`` when nothing is covered."""
    hits = [v for v in (store.lookup(t) for t in tokens) if v is not None]
    if not hits:
        return None
    return np.mean(hits, axis=0)


def pool_daily(day, headline_vectors):
    """Average the covered headline vectors of ``day``.

    ``headline_vectors`` lines up with ``day.headlines``; ``None`` entries
    (no coverage) are left out of the mean rather than counted as zeros.
    """
    if len(headline_vectors) != day.count:
        raise ContractError("one vector (or None) is required per headline")
    index = tuple(i for i, v in enumerate(headline_vectors) if v is not None)
    if not index:
        return MissingDay(day.day)
    articles = np.vstack([headline_vectors[i] for i in index])
    return DailyEmbedding(day.day, articles.mean(axis=0), articles, index)


def embed_days(days, store):
    return [pool_daily(dn, [embed_headline(h.tokens, store) for h in dn.headlines]) for dn in days]


# --------------------------------------------------------------------------
# remote provider
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EmbeddingProvider:
    endpoint: str
    model_name: str
    batch_size: int = 32
    cache_path: str = "embeddings.cache"
    timeout: float = 30.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ContractError("batch_size must be at least 1")


def normalize_text(text):
    return " ".join(unicodedata.normalize("NFC", text).split())


def cache_key(model_name, text):
    payload = model_name + "\x00" + normalize_text(text)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Append-only ``hash<TAB>dimension<TAB>floats`` record file.

    A truncated trailing record (from an interrupted write) is ignored.
    """

    def __init__(self, path):
        self.path = path
        self._lock = FileLock(path + ".lock")
        self._entries = {}
        self._read()

    def _read(self):
        if not os.path.exists(self.path):
            return
        with open(self.path, encoding="utf-8") as fh:
            for line in fh:
                if not line.endswith("\n"):
                    break
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 3:
                    continue
                key, dim, floats = parts
                values = np.array(floats.split(), dtype=np.float64)
                if values.shape[0] != int(dim):
                    continue
                self._entries.setdefault(key, values)

    def __contains__(self, key):
        return key in self._entries

    def __len__(self):
        return len(self._entries)

    def get(self, key):
        return self._entries.get(key)

    def put_many(self, items):
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                for key, vec in items:
                    if key in self._entries:
                        continue
                    fh.write(f"{key}\t{vec.shape[0]}\t{' '.join(repr(float(v)) for v in vec)}\n")
                    self._entries[key] = vec
                fh.flush()
                os.fsync(fh.fileno())


def _post_batch(provider, texts, session):
    url = provider.endpoint.rstrip("/") + "/embed"
    try:
        resp = session.post(url, json={"model": provider.model_name, "texts": texts}, timeout=provider.timeout)
    except requests.RequestException as exc:
        raise ProviderError(f"embedding provider unreachable: {exc}") from exc
    if resp.status_code != 200:
        retry = resp.headers.get("Retry-After")
        try:
            retry = float(retry) if retry is not None else None
        except ValueError:
            retry = None
        raise ProviderError(f"embedding provider returned HTTP {resp.status_code}", retry_after=retry)
    try:
        body = resp.json()
        dim = int(body["dimension"])
        vectors = [np.asarray(v, dtype=np.float64) for v in body["vectors"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"malformed provider response: {exc}") from None
    if len(vectors) != len(texts):
        raise ProtocolError(f"asked for {len(texts)} vectors, received {len(vectors)}")
    if any(v.ndim != 1 or v.shape[0] != dim for v in vectors):
        raise ProtocolError("provider vectors do not match the declared dimension")
    return dim, vectors


def remote_embed(texts, provider, session=None, cache=None):
    """Embed ``texts`` through the provider, serving and filling the disk cache.

    Only texts missing from the cache are sent, ``batch_size`` at a time, and
    each batch is persisted before the next request.
    """
    cache = cache if cache is not None else EmbeddingCache(provider.cache_path)
    keys = [cache_key(provider.model_name, t) for t in texts]
    pending = {}
    for key, text in zip(keys, texts):
        if key not in cache and key not in pending:
            pending[key] = normalize_text(text)
    dims = {cache.get(k).shape[0] for k in keys if k in cache}
    if pending:
        own_session = session is None
        session = session or requests.Session()
        try:
            items = list(pending.items())
            for a in range(0, len(items), provider.batch_size):
                batch = items[a:a + provider.batch_size]
                dim, vectors = _post_batch(provider, [t for _, t in batch], session)
                dims.add(dim)
                if len(dims) > 1:
                    raise ProtocolError(f"embedding dimension drift: {sorted(dims)}")
                cache.put_many(zip([k for k, _ in batch], vectors))
        finally:
            if own_session:
                session.close()
    if len(dims) > 1:
        raise ProtocolError(f"embedding dimension drift: {sorted(dims)}")
    return [cache.get(k) for k in keys]


def embed_days_remote(days, provider, session=None):
    """Daily embeddings from a remote provider, one request per uncached headline."""
    texts = [" ".join(h.tokens) for dn in days for h in dn.headlines]
    vectors = iter(remote_embed(texts, provider, session=session)) if texts else iter(())
    return [pool_daily(dn, [next(vectors) for _ in dn.headlines]) for dn in days]
