"""Black-box classifier contract: builtin synthetic scorers with analytic
concept dependence, plus stdio/HTTP adapters for external trained models.

Builtin scorers stand in for a trained network during testing: each is a pure
function of the image with a known sensitivity profile (hue only, stripe
orientation only, luma contrast only), which makes explanation ground truth
checkable at desk scale.
"""

from __future__ import annotations

import json
import shlex
import struct
import subprocess
import threading
from dataclasses import dataclass

import numpy as np
import requests
from scipy import ndimage
from scipy.special import expit

from .errors import ScorerTransportError
from .raster import Raster, encode_png, hsv_planes_from_rgb, resize_bilinear, to_grayscale


@dataclass(frozen=True)
class ProbVector:
    """Class probabilities with labels; must sum to 1 within 1e-6."""

    probs: tuple[float, ...]
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.probs) != len(self.labels) or not self.probs:
            raise ValueError(f"need matching non-empty probs/labels, got {len(self.probs)}/{len(self.labels)}")
        if any(not 0.0 <= p <= 1.0 for p in self.probs):
            raise ValueError(f"probabilities must lie in [0, 1], got {self.probs}")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total!r}, expected 1 within 1e-6")

    def prob(self, label: str) -> float:
        try:
            return self.probs[self.labels.index(label)]
        except ValueError:
            raise ValueError(f"label {label!r} not among scorer labels {self.labels}") from None


@dataclass(frozen=True)
class ScorerDescriptor:
    """What a scorer expects and produces. ``input_size`` of None means
    the scorer takes images at their native size."""

    kind: str  # "builtin" | "external"
    class_labels: tuple[str, ...]
    input_size: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("builtin", "external"):
            raise ValueError(f"kind must be 'builtin' or 'external', got {self.kind!r}")
        if self.input_size is not None and (self.input_size[0] < 1 or self.input_size[1] < 1):
            raise ValueError(f"input_size must be >= 1x1, got {self.input_size}")


def score(scorer, img: Raster) -> ProbVector:
    """Score an image, resizing it first when the scorer declares an input size."""
    descriptor: ScorerDescriptor = scorer.descriptor
    if descriptor.input_size is not None and (img.width, img.height) != descriptor.input_size:
        img = resize_bilinear(img, *descriptor.input_size)
    reply = scorer(img)
    if not isinstance(reply, ProbVector):
        raise TypeError(f"scorer returned {type(reply).__name__}, expected ProbVector")
    return reply


class _TwoClassScorer:
    """Base for builtin 2-class scorers; subclasses provide p(A)."""

    labels = ("A", "B")

    @property
    def descriptor(self) -> ScorerDescriptor:
        return ScorerDescriptor(kind="builtin", class_labels=self.labels, input_size=None)

    def _prob_a(self, img: Raster) -> float:
        raise NotImplementedError

    def __call__(self, img: Raster) -> ProbVector:
        p = float(np.clip(self._prob_a(img), 0.0, 1.0))
        return ProbVector(probs=(p, 1.0 - p), labels=self.labels)


class HueGateScorer(_TwoClassScorer):
    """p(A) = logistic(k * (mean hue - h0)).

    Mean hue is taken over well-exposed chromatic pixels (s >= 32, v >= 64):
    achromatic pixels carry no hue at all, and the hue of dim pixels is
    dominated by 8-bit quantization. With that guard the scorer responds to
    hue tuning and to nothing else on uniform-hue images. An image with no
    qualifying pixels scores the neutral p = 0.5.
    """

    MIN_SATURATION = 32.0
    MIN_VALUE = 64.0

    def __init__(self, k: float, h0: float):
        if k == 0:
            raise ValueError("k must be non-zero")
        self.k = float(k)
        self.h0 = float(h0)

    def _prob_a(self, img: Raster) -> float:
        h, s, v = hsv_planes_from_rgb(img.pixels.astype(np.float64))
        chromatic = (s >= self.MIN_SATURATION) & (v >= self.MIN_VALUE)
        mean_hue = float(h[chromatic].mean()) if chromatic.any() else self.h0
        return float(expit(self.k * (mean_hue - self.h0)))


class StripeOrientationScorer(_TwoClassScorer):
    """p(A) = share of gradient energy in the horizontal direction.

    Vertical stripes put all their luma gradients along x, so p(A) -> 1;
    rotating them by 90 degrees sends p(A) -> 0. ``freq`` records the stripe
    frequency the scorer is meant for; it does not enter the statistic.
    """

    def __init__(self, freq: float):
        if freq <= 0:
            raise ValueError(f"freq must be positive, got {freq}")
        self.freq = float(freq)

    def _prob_a(self, img: Raster) -> float:
        luma = to_grayscale(img).pixels.astype(np.float64)
        gx = ndimage.sobel(luma, axis=1, mode="reflect")
        gy = ndimage.sobel(luma, axis=0, mode="reflect")
        ex = float(np.mean(np.abs(gx)))
        ey = float(np.mean(np.abs(gy)))
        if ex + ey == 0.0:
            return 0.5
        return ex / (ex + ey)


class GrooveContrastScorer(_TwoClassScorer):
    """p(A) = logistic(std(luma) - theta); flattening grooves lowers it."""

    def __init__(self, theta: float):
        if not 0.0 < theta < 255.0:
            raise ValueError(f"theta must lie in (0, 255), got {theta}")
        self.theta = float(theta)

    def _prob_a(self, img: Raster) -> float:
        luma = to_grayscale(img).pixels.astype(np.float64)
        return float(expit(luma.std() - self.theta))


BUILTIN_SCORERS = {
    "hue_gate": (HueGateScorer, ("k", "h0")),
    "stripe_orientation": (StripeOrientationScorer, ("freq",)),
    "groove_contrast": (GrooveContrastScorer, ("theta",)),
}


def make_builtin(name: str, **params: float):
    """Instantiate a builtin scorer by name; raises ValueError on bad names/params."""
    try:
        cls, expected = BUILTIN_SCORERS[name]
    except KeyError:
        raise ValueError(f"unknown builtin scorer {name!r}; valid: {', '.join(sorted(BUILTIN_SCORERS))}") from None
    unknown = set(params) - set(expected)
    if unknown:
        raise ValueError(f"unknown parameter(s) {sorted(unknown)} for scorer {name!r}; expected {expected}")
    missing = set(expected) - set(params)
    if missing:
        raise ValueError(f"missing parameter(s) {sorted(missing)} for scorer {name!r}")
    return cls(**params)


def _parse_reply(payload: bytes | str, source: str) -> ProbVector:
    try:
        obj = json.loads(payload)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ScorerTransportError(f"{source}: reply is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "probs" not in obj or "labels" not in obj:
        raise ScorerTransportError(f"{source}: reply must be an object with 'probs' and 'labels'")
    try:
        return ProbVector(
            probs=tuple(float(p) for p in obj["probs"]),
            labels=tuple(str(name) for name in obj["labels"]),
        )
    except (TypeError, ValueError) as exc:
        raise ScorerTransportError(f"{source}: invalid probability vector: {exc}") from exc


class StdioScorer:
    """Child-process scorer speaking the v1 stdio protocol.

    Request: 4-byte big-endian payload length, then PNG bytes, on the child's
    stdin. Reply: one line of JSON ``{"probs": [...], "labels": [...]}`` on
    its stdout. Requests are serialized per process.
    """

    def __init__(self, command: str | list[str], input_size: tuple[int, int] | None = None):
        self._argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self._argv:
            raise ValueError("empty scorer command")
        self._input_size = input_size
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    @property
    def descriptor(self) -> ScorerDescriptor:
        return ScorerDescriptor(kind="external", class_labels=(), input_size=self._input_size)

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    self._argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE
                )
            except OSError as exc:
                raise ScorerTransportError(f"cannot start scorer {self._argv!r}: {exc}") from exc
        return self._proc

    def __call__(self, img: Raster) -> ProbVector:
        png = encode_png(img)
        with self._lock:
            proc = self._ensure_proc()
            try:
                proc.stdin.write(struct.pack(">I", len(png)) + png)
                proc.stdin.flush()
                line = proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise ScorerTransportError(f"scorer process {self._argv!r} broke the pipe: {exc}") from exc
        if not line:
            raise ScorerTransportError(
                f"scorer process {self._argv!r} closed stdout (exit code {proc.poll()})"
            )
        return _parse_reply(line, source=f"stdio scorer {self._argv[0]!r}")

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()
        self._proc = None

    def __enter__(self) -> "StdioScorer":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class HttpScorer:
    """HTTP scorer: POST PNG bytes to /score, expect the v1 JSON reply."""

    def __init__(self, url: str, timeout: float = 30.0, input_size: tuple[int, int] | None = None):
        self.url = url
        self.timeout = timeout
        self._input_size = input_size

    @property
    def descriptor(self) -> ScorerDescriptor:
        return ScorerDescriptor(kind="external", class_labels=(), input_size=self._input_size)

    def __call__(self, img: Raster) -> ProbVector:
        try:
            resp = requests.post(
                self.url,
                data=encode_png(img),
                headers={"Content-Type": "image/png"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise ScorerTransportError(f"POST {self.url} failed: {exc}") from exc
        if resp.status_code != 200:
            raise ScorerTransportError(f"POST {self.url} returned HTTP {resp.status_code}")
        return _parse_reply(resp.content, source=f"http scorer {self.url}")
