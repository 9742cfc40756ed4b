"""Denoiser backends: the D(z_t, sigma[, y]) contract, a closed-form
Gaussian-mixture oracle, and a remote HTTP client."""

from __future__ import annotations

import base64
import time
from dataclasses import dataclass
from typing import Protocol

import numpy as np
import requests

from .fields import Field

DEFAULT_POOL_SIZE = 4
DEFAULT_RETRIES = 3
_BACKOFF_BASE = 0.25


@dataclass(frozen=True)
class DenoiseRequest:
    latent: Field
    sigma: float
    condition: object | None = None

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma < 0:
            raise ValueError(f"sigma must be finite and non-negative, got {self.sigma}")


class DenoiserBackend(Protocol):
    def denoise(self, req: DenoiseRequest) -> Field: ...


class GaussianMixture:
    """Isotropic mixture prior; components are (weight, mean field, std)."""

    def __init__(self, components):
        if not components:
            raise ValueError("mixture needs at least one component")
        weights, means, stds = [], [], []
        for w, mu, s in components:
            weights.append(float(w))
            means.append(mu.data if isinstance(mu, Field) else np.asarray(mu, dtype=np.float32))
            stds.append(float(s))
        self.weights = np.asarray(weights, dtype=np.float64)
        self.stds = np.asarray(stds, dtype=np.float64)
        if (self.weights <= 0).any():
            raise ValueError("weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got {self.weights.sum()}")
        if (self.stds <= 0).any():
            raise ValueError("stds must be positive")
        shapes = {m.shape for m in means}
        if len(shapes) != 1:
            raise ValueError(f"means must share one shape, got {sorted(shapes)}")
        self.means = np.stack(means).astype(np.float64)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def mean_shape(self) -> tuple[int, int, int]:
        return self.means.shape[1:]


def gmm_posterior_mean(gmm: GaussianMixture, z: Field, sigma: float, condition=None) -> Field:
    """Exact E[x | z] under the mixture corrupted by N(0, sigma^2 I).

    Unconditional: sum_i r_i (s_i^2 z + sigma^2 mu_i) / (s_i^2 + sigma^2)
    with responsibilities r_i computed in the log domain.  Conditional:
    the single indexed component's posterior mean.
    """
    zd = z.data.astype(np.float64)
    sigma = float(sigma)
    if condition is not None:
        idx = int(condition)
        if not 0 <= idx < gmm.n_components:
            raise IndexError(f"condition {idx} out of range for {gmm.n_components} components")
        v = gmm.stds[idx] ** 2 + sigma**2
        out = (gmm.stds[idx] ** 2 * zd + sigma**2 * gmm.means[idx]) / v
        return Field(out.astype(np.float32))
    r = gmm_responsibilities(gmm, zd, sigma)
    v = gmm.stds**2 + sigma**2
    post = (gmm.stds[:, None, None, None] ** 2 * zd[None] + sigma**2 * gmm.means) / v[
        :, None, None, None
    ]
    out = np.einsum("k,kchw->chw", r, post)
    return Field(out.astype(np.float32))


def gmm_responsibilities(gmm: GaussianMixture, zd: np.ndarray, sigma: float) -> np.ndarray:
    """Posterior component weights r_i(z), log-sum-exp stabilized."""
    v = gmm.stds**2 + sigma**2
    d = zd.size
    sq = ((zd[None] - gmm.means) ** 2).sum(axis=(1, 2, 3))
    logp = np.log(gmm.weights) - 0.5 * (d * np.log(2.0 * np.pi * v) + sq / v)
    logp -= logp.max()
    r = np.exp(logp)
    return r / r.sum()


class AnalyticBackend:
    """Closed-form oracle over a GaussianMixture.

    The condition identifier is a mixture component index (the analytic
    stand-in for a text prompt); it is accepted as an int or a string of
    digits.  Latents are pixel-valued: encode/decode is the fixed affine
    map [0,1] <-> [-1,1].
    """

    def __init__(self, gmm: GaussianMixture):
        self.gmm = gmm

    def describe(self) -> str:
        return f"analytic-gmm(k={self.gmm.n_components}, shape={self.gmm.mean_shape})"

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        return self.gmm.mean_shape

    def resolve_condition(self, condition) -> int | None:
        if condition is None:
            return None
        return int(condition)

    def denoise(self, req: DenoiseRequest) -> Field:
        return gmm_posterior_mean(
            self.gmm, req.latent, req.sigma, self.resolve_condition(req.condition)
        )

    def encode(self, pixels: Field) -> Field:
        return Field(2.0 * pixels.data - 1.0)

    def decode(self, z: Field) -> Field:
        return Field(np.clip((z.data + 1.0) / 2.0, 0.0, 1.0))


class RemoteError(RuntimeError):
    """Transport or protocol failure, annotated with retry metadata."""

    def __init__(self, message: str, attempts: int, last_status: int | None = None):
        super().__init__(f"{message} (attempts={attempts}, last_status={last_status})")
        self.attempts = attempts
        self.last_status = last_status


def field_to_b64(f: Field) -> str:
    return base64.b64encode(np.ascontiguousarray(f.data, dtype="<f4").tobytes()).decode("ascii")


def b64_to_field(payload: str, shape) -> Field:
    c, h, w = (int(v) for v in shape)
    raw = base64.b64decode(payload.encode("ascii"), validate=True)
    if len(raw) != 4 * c * h * w:
        raise ValueError(f"payload holds {len(raw)} bytes, shape {(c, h, w)} needs {4 * c * h * w}")
    return Field(np.frombuffer(raw, dtype="<f4").reshape(c, h, w).copy())


class RemoteBackend:
    """Synchronous client for the denoiser service protocol.

    Requests retry up to `retries` times with exponential backoff; the
    session multiplexes over a bounded connection pool so concurrent
    denoise calls from patch workers stay within `pool_size` sockets.
    """

    def __init__(
        self,
        base_url: str,
        pool_size: int = DEFAULT_POOL_SIZE,
        retries: int = DEFAULT_RETRIES,
        timeout: float = 60.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.retries = int(retries)
        self.timeout = float(timeout)
        self.session = requests.Session()
        adapter = requests.adapters.HTTPAdapter(pool_connections=pool_size, pool_maxsize=pool_size)
        self.session.mount("http://", adapter)
        self.session.mount("https://", adapter)

    def describe(self) -> str:
        return f"remote({self.base_url})"

    def _post(self, path: str, body: dict) -> dict:
        url = f"{self.base_url}{path}"
        last_status = None
        for attempt in range(1, self.retries + 1):
            try:
                resp = self.session.post(url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                if attempt == self.retries:
                    raise RemoteError(f"POST {path} failed: {exc}", attempt) from exc
            else:
                last_status = resp.status_code
                if resp.status_code == 200:
                    return resp.json()
                # 4xx is a contract violation on our side; do not retry
                if 400 <= resp.status_code < 500:
                    raise RemoteError(
                        f"POST {path} rejected: {resp.text[:200]}", attempt, resp.status_code
                    )
                if attempt == self.retries:
                    raise RemoteError(f"POST {path} failed", attempt, resp.status_code)
            time.sleep(_BACKOFF_BASE * 2 ** (attempt - 1))
        raise RemoteError(f"POST {path} failed", self.retries, last_status)

    def health(self) -> dict:
        url = f"{self.base_url}/v1/health"
        try:
            resp = self.session.get(url, timeout=self.timeout)
        except requests.RequestException as exc:
            raise RemoteError(f"GET /v1/health failed: {exc}", 1) from exc
        if resp.status_code != 200:
            raise RemoteError("GET /v1/health failed", 1, resp.status_code)
        return resp.json()

    def denoise(self, req: DenoiseRequest) -> Field:
        body = {
            "shape": list(req.latent.shape),
            "latent_b64": field_to_b64(req.latent),
            "sigma": float(req.sigma),
            "condition": None if req.condition is None else str(req.condition),
        }
        out = self._post("/v1/denoise", body)
        return b64_to_field(out["prediction_b64"], out["shape"])

    def encode(self, pixels: Field) -> Field:
        body = {"shape": list(pixels.shape), "image_b64": field_to_b64(pixels)}
        out = self._post("/v1/encode", body)
        return b64_to_field(out["latent_b64"], out["shape"])

    def decode(self, z: Field) -> Field:
        body = {"shape": list(z.shape), "latent_b64": field_to_b64(z)}
        out = self._post("/v1/decode", body)
        return b64_to_field(out["image_b64"], out["shape"])

    def generate_base(self, prompt: str, seed: int, width: int, height: int) -> Field:
        body = {"prompt": prompt, "seed": int(seed), "width": int(width), "height": int(height)}
        out = self._post("/v1/generate_base", body)
        return b64_to_field(out["image_b64"], out["shape"])
