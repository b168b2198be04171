"""Whole-image inference by tiling, plus explanation rendering.

The toolkit never runs a neural network itself. Scores come from a pluggable
scorer (a recorded score file or a subprocess speaking one JSON object per
line), and class-activation tensors come from .camt files written by
whatever produced the model. Everything downstream of those inputs is
deterministic: window enumeration reuses the patch grid, overlays mark
windows whose score strictly exceeds the display threshold, and heatmap
composition takes the per-pixel maximum over windows before one global
normalization.

.camt layout: magic "CAMT", little-endian u32 header length, UTF-8 JSON
header {"k", "hc", "wc", "window": [x, y, w, h], "order":
"activations_then_gradients"}, then 2*k*hc*wc float32 little-endian values
in row-major order, activations first.
"""

from __future__ import annotations

import json
import struct
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import FormatError, ScorerError
from .maskgeom import BBox
from .patchgen import PatchConfig, patch_grid

CAMT_MAGIC = b"CAMT"
CAMT_ORDER = "activations_then_gradients"
BORDER_PX = 3
BORDER_COLOR = (255, 0, 255)
OVERLAY_ALPHA = 0.5

# 5x7 pixel glyphs for confidence text, one int per row, low bit = rightmost.
_GLYPHS = {
    "0": (0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110),
    "1": (0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110),
    "2": (0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111),
    "3": (0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110),
    "4": (0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010),
    "5": (0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110),
    "6": (0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110),
    "7": (0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000),
    "8": (0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110),
    "9": (0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100),
    ".": (0b00000, 0b00000, 0b00000, 0b00000, 0b00000, 0b01100, 0b01100),
}


@dataclass(frozen=True)
class WindowScore:
    window: BBox
    score: float


@dataclass(frozen=True)
class PatchScoreGrid:
    """Scores for every window of one image, in patch-grid order."""

    image: str
    image_size: tuple[int, int]  # (width, height)
    scores: tuple[WindowScore, ...]


class FileScorer:
    """Replays scores recorded as JSONL {image, x, y, w, h, score} lines."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._table: dict[tuple[str, int, int, int, int], float] = {}
        for lineno, line in enumerate(self.path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                key = (raw["image"], int(raw["x"]), int(raw["y"]), int(raw["w"]), int(raw["h"]))
                self._table[key] = float(raw["score"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FormatError(f"{self.path}: line {lineno}: bad score record: {exc}") from exc

    def __call__(self, image: str, window: BBox) -> float:
        key = (image, int(window.x), int(window.y), int(window.w), int(window.h))
        try:
            return self._table[key]
        except KeyError:
            raise ScorerError(
                f"{self.path}: no recorded score for image {image!r} window "
                f"({key[1]}, {key[2]}, {key[3]}, {key[4]})"
            ) from None


class SubprocessScorer:
    """Feeds window requests to a child process, one JSON object per line.

    Request:  {"image": path, "x": int, "y": int, "w": int, "h": int}
    Response: {"score": float}
    Requests are serialized; the child owns any batching it wants to do.
    """

    def __init__(self, command: list[str]):
        self.command = list(command)
        self._proc: subprocess.Popen | None = None

    def _ensure(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        return self._proc

    def __call__(self, image: str, window: BBox) -> float:
        proc = self._ensure()
        request = {"image": image, "x": int(window.x), "y": int(window.y),
                   "w": int(window.w), "h": int(window.h)}
        try:
            proc.stdin.write(json.dumps(request) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerError(f"scorer process {self.command[0]!r} died mid-request") from exc
        if not line:
            raise ScorerError(f"scorer process {self.command[0]!r} closed its output")
        try:
            return float(json.loads(line)["score"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ScorerError(f"scorer returned unparseable response: {line!r}") from exc

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def score_image(image_path: str | Path, scorer, cfg: PatchConfig,
                image_key: str | None = None) -> PatchScoreGrid:
    """Score every window of an image through the given scorer.

    Args:
        image_path: source image file.
        scorer: callable (image_key, window) -> score in [0, 1].
        cfg: window geometry (patch_size, stride, edge_anchored).
        image_key: identifier passed to the scorer; defaults to the file name.
    """
    image_path = Path(image_path)
    key = image_key if image_key is not None else image_path.name
    with Image.open(image_path) as img:
        size = img.size
    scores = []
    for window in patch_grid(size, cfg):
        value = float(scorer(key, window))
        if not 0.0 <= value <= 1.0:
            raise ScorerError(
                f"score {value} outside [0, 1] for window ({int(window.x)}, {int(window.y)})"
            )
        scores.append(WindowScore(window=window, score=value))
    return PatchScoreGrid(image=key, image_size=size, scores=tuple(scores))


def record_scores(grid: PatchScoreGrid, path: str | Path) -> None:
    """Persist a score grid in the replay format FileScorer reads."""
    lines = [
        json.dumps(
            {"image": grid.image, "x": int(ws.window.x), "y": int(ws.window.y),
             "w": int(ws.window.w), "h": int(ws.window.h), "score": ws.score}
        )
        for ws in grid.scores
    ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _draw_glyph(canvas: np.ndarray, ch: str, top: int, left: int, scale: int, color) -> None:
    rows = _GLYPHS.get(ch)
    if rows is None:
        return
    h, w = canvas.shape[:2]
    for gy, bits in enumerate(rows):
        for gx in range(5):
            if bits & (1 << (4 - gx)):
                y0, x0 = top + gy * scale, left + gx * scale
                y1, x1 = min(y0 + scale, h), min(x0 + scale, w)
                if y0 < h and x0 < w:
                    canvas[max(y0, 0):y1, max(x0, 0):x1] = color


def _draw_text(canvas: np.ndarray, text: str, top: int, left: int, scale: int, color) -> None:
    x = left
    for ch in text:
        _draw_glyph(canvas, ch, top, x, scale, color)
        x += 6 * scale  # 5 glyph columns plus 1 of spacing


def render_overlay(image_path: str | Path, grid: PatchScoreGrid, tau: float = 0.5,
                   text_scale: int = 3) -> Image.Image:
    """Mark windows whose score strictly exceeds tau.

    Each such window gets a 3-pixel magenta border drawn just inside its
    bounds and its confidence printed to two decimals in the upper-left
    corner. Pixels outside borders and text are left untouched.
    """
    with Image.open(image_path) as img:
        canvas = np.array(img.convert("RGB"))
    color = np.array(BORDER_COLOR, dtype=np.uint8)
    b = BORDER_PX
    for ws in grid.scores:
        if not ws.score > tau:
            continue
        x0, y0 = int(ws.window.x), int(ws.window.y)
        x1, y1 = x0 + int(ws.window.w), y0 + int(ws.window.h)
        canvas[y0:y0 + b, x0:x1] = color
        canvas[y1 - b:y1, x0:x1] = color
        canvas[y0:y1, x0:x0 + b] = color
        canvas[y0:y1, x1 - b:x1] = color
        _draw_text(canvas, f"{ws.score:.2f}", y0 + b + 2, x0 + b + 2, text_scale, color)
    return Image.fromarray(canvas)


def gradcam_map(activations: np.ndarray, gradients: np.ndarray) -> np.ndarray:
    """Raw class-activation map at feature resolution.

    Each channel is weighted by the spatial mean of its gradient, the
    weighted channels are summed, and negative responses are clipped. The
    result is not normalized; composition handles that globally.

    Args:
        activations: float array (k, hc, wc).
        gradients: float array (k, hc, wc), same shape.
    """
    activations = np.asarray(activations, dtype=np.float64)
    gradients = np.asarray(gradients, dtype=np.float64)
    if activations.shape != gradients.shape or activations.ndim != 3:
        raise FormatError(
            f"activations {activations.shape} and gradients {gradients.shape} "
            "must share a (k, hc, wc) shape"
        )
    weights = gradients.mean(axis=(1, 2))
    cam = np.tensordot(weights, activations, axes=1)
    return np.maximum(cam, 0.0)


def upsample_bilinear(grid: np.ndarray, out_size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize with corner alignment; exact on constant inputs.

    Args:
        grid: 2-D float array.
        out_size: (height, width) of the result.
    """
    src = np.asarray(grid, dtype=np.float64)
    hs, ws = src.shape
    ho, wo = out_size
    if hs == 1 and ws == 1:
        return np.full((ho, wo), src[0, 0])
    ys = np.linspace(0.0, hs - 1.0, ho) if ho > 1 else np.zeros(1)
    xs = np.linspace(0.0, ws - 1.0, wo) if wo > 1 else np.zeros(1)
    y0 = np.clip(np.floor(ys).astype(int), 0, hs - 1)
    x0 = np.clip(np.floor(xs).astype(int), 0, ws - 1)
    y1 = np.clip(y0 + 1, 0, hs - 1)
    x1 = np.clip(x0 + 1, 0, ws - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    # Lerp as a + (b - a) * f so equal endpoints interpolate exactly.
    tl, tr = src[np.ix_(y0, x0)], src[np.ix_(y0, x1)]
    bl, br = src[np.ix_(y1, x0)], src[np.ix_(y1, x1)]
    top = tl + (tr - tl) * fx
    bottom = bl + (br - bl) * fx
    return top + (bottom - top) * fy


@dataclass(frozen=True)
class CamTensors:
    """Activations and gradients for one window, as stored in a .camt file."""

    window: BBox
    activations: np.ndarray  # (k, hc, wc) float32
    gradients: np.ndarray  # same shape

    def heatmap(self) -> np.ndarray:
        """Window-resolution class-activation map (h, w), un-normalized."""
        cam = gradcam_map(self.activations, self.gradients)
        return upsample_bilinear(cam, (int(self.window.h), int(self.window.w)))


def write_camt(path: str | Path, tensors: CamTensors) -> None:
    act = np.ascontiguousarray(tensors.activations, dtype="<f4")
    grad = np.ascontiguousarray(tensors.gradients, dtype="<f4")
    if act.shape != grad.shape or act.ndim != 3:
        raise FormatError(f"tensor shapes disagree: {act.shape} vs {grad.shape}")
    k, hc, wc = act.shape
    header = {
        "k": k,
        "hc": hc,
        "wc": wc,
        "window": [int(tensors.window.x), int(tensors.window.y),
                   int(tensors.window.w), int(tensors.window.h)],
        "order": CAMT_ORDER,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CAMT_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(act.tobytes())
        fh.write(grad.tobytes())


def read_camt(path: str | Path) -> CamTensors:
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != CAMT_MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {CAMT_MAGIC!r}")
    if len(data) < 8:
        raise FormatError(f"{path}: truncated header")
    (header_len,) = struct.unpack("<I", data[4:8])
    try:
        header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header: {exc}") from exc
    if header.get("order") != CAMT_ORDER:
        raise FormatError(f"{path}: unknown tensor order {header.get('order')!r}")
    try:
        k, hc, wc = int(header["k"]), int(header["hc"]), int(header["wc"])
        window = BBox(*(int(v) for v in header["window"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: bad header field: {exc}") from exc
    body = data[8 + header_len :]
    expected = 2 * k * hc * wc * 4
    if len(body) != expected:
        raise FormatError(f"{path}: payload is {len(body)} bytes, header implies {expected}")
    values = np.frombuffer(body, dtype="<f4")
    act = values[: k * hc * wc].reshape((k, hc, wc))
    grad = values[k * hc * wc :].reshape((k, hc, wc))
    return CamTensors(window=window, activations=act, gradients=grad)


def heat_color(t: np.ndarray) -> np.ndarray:
    """Five-stop blue->cyan->green->yellow->red colormap on [0, 1] values."""
    stops = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    reds = np.array([0.0, 0.0, 0.0, 255.0, 255.0])
    greens = np.array([0.0, 255.0, 255.0, 255.0, 0.0])
    blues = np.array([255.0, 255.0, 0.0, 0.0, 0.0])
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    rgb = np.stack(
        [np.interp(t, stops, reds), np.interp(t, stops, greens), np.interp(t, stops, blues)],
        axis=-1,
    )
    return rgb


def combine_heatmaps(size_hw: tuple[int, int], cams: list[CamTensors]) -> np.ndarray:
    """Place window heatmaps on one canvas, overlaps resolved by maximum.

    Returned values are un-normalized; divide by the global peak for display.
    """
    h, w = size_hw
    canvas = np.zeros((h, w), dtype=np.float64)
    for cam in cams:
        x0, y0 = int(cam.window.x), int(cam.window.y)
        x1, y1 = x0 + int(cam.window.w), y0 + int(cam.window.h)
        if x0 < 0 or y0 < 0 or x1 > w or y1 > h:
            raise FormatError(f"cam window ({x0}, {y0}, {x1 - x0}, {y1 - y0}) falls outside image")
        region = canvas[y0:y1, x0:x1]
        np.maximum(region, cam.heatmap(), out=region)
    return canvas


def normalized_composite(size_hw: tuple[int, int], cams: list[CamTensors]) -> np.ndarray:
    """Combined heatmap scaled by its global peak; an all-zero canvas stays zero."""
    canvas = combine_heatmaps(size_hw, cams)
    peak = canvas.max()
    if peak > 0.0:
        canvas = canvas / peak
    return canvas


def composite_cams(image_path: str | Path, cams: list[CamTensors]) -> Image.Image:
    """Blend per-window activation maps over the source image.

    Window heatmaps are placed on a full-image canvas, overlaps resolved by
    per-pixel maximum, then the canvas is normalized once by its global peak
    and colorized with the five-stop map at 50% opacity.
    """
    with Image.open(image_path) as img:
        base = np.array(img.convert("RGB"), dtype=np.float64)
    canvas = normalized_composite(base.shape[:2], cams)
    colored = heat_color(canvas)
    blended = np.rint((1.0 - OVERLAY_ALPHA) * base + OVERLAY_ALPHA * colored)
    return Image.fromarray(blended.astype(np.uint8))
