"""Composite image construction for evidence-based verification.

A composite stacks the news image and one evidence image side by side, each
wrapped in a colored border so a prompt can refer to them unambiguously. The
evidence image is rescaled (aspect ratio preserved up to pixel rounding) so
the shared edge matches the news image, and the stacking direction is the one
whose canvas aspect ratio is closest to square.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from PIL import Image, ImageOps, UnidentifiedImageError

from .core import InputError

ImageSource = Union[Image.Image, bytes, str, Path]

RGB = tuple[int, int, int]


class DecodeError(InputError):
    """An image source could not be decoded."""


class ZeroDimension(InputError):
    """An input image has a zero-sized edge."""


# ---------------------------------------------------------------------------
# Colors
# ---------------------------------------------------------------------------

# Names for border colors that prompts can speak about. Anything outside this
# table renders as "rgb(r,g,b)" which a model is unlikely to ground, so stick
# to named colors for real runs.
_COLOR_NAMES: dict[RGB, str] = {
    (255, 0, 0): "red",
    (0, 0, 255): "blue",
    (0, 255, 0): "green",
    (255, 255, 0): "yellow",
    (255, 165, 0): "orange",
    (128, 0, 128): "purple",
    (0, 255, 255): "cyan",
    (255, 0, 255): "magenta",
    (255, 255, 255): "white",
    (0, 0, 0): "black",
}

_NAME_COLORS = {name: rgb for rgb, name in _COLOR_NAMES.items()}


def color_name(rgb: RGB) -> str:
    return _COLOR_NAMES.get(tuple(rgb), f"rgb({rgb[0]},{rgb[1]},{rgb[2]})")


def parse_color(value: str) -> RGB:
    """Accepts a known color name or a #rrggbb hex string."""

    key = value.strip().lower()
    if key in _NAME_COLORS:
        return _NAME_COLORS[key]
    if key.startswith("#") and len(key) == 7:
        try:
            return (int(key[1:3], 16), int(key[3:5], 16), int(key[5:7], 16))
        except ValueError:
            pass
    raise InputError(f"unknown color {value!r} (use a color name or #rrggbb)")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BorderSpec:
    """Border colors and thickness for a composite. The two colors must
    differ, otherwise the prompt cannot tell the images apart."""

    news_color: RGB = (255, 0, 0)
    evidence_color: RGB = (0, 0, 255)
    thickness_px: int = 5

    def __post_init__(self) -> None:
        if self.thickness_px < 1:
            raise ValueError("border thickness must be at least 1 pixel")
        if tuple(self.news_color) == tuple(self.evidence_color):
            raise ValueError("news and evidence border colors must differ")


class Orientation(str, enum.Enum):
    HORIZONTAL = "horizontal"
    VERTICAL = "vertical"


@dataclass(frozen=True)
class CompositeImage:
    """The composed canvas plus the pixel boxes (left, top, right, bottom)
    of the two inner image regions, borders excluded."""

    image: Image.Image
    orientation: Orientation
    news_box: tuple[int, int, int, int]
    evidence_box: tuple[int, int, int, int]


# ---------------------------------------------------------------------------
# Orientation choice
# ---------------------------------------------------------------------------

def _aspect_distance(width: float, height: float) -> float:
    ratio = width / height
    return max(ratio, 1.0 / ratio)


def _check_size(size: tuple[int, int], label: str) -> None:
    w, h = size
    if w <= 0 or h <= 0:
        raise ZeroDimension(f"{label} image has a zero-sized edge: {w}x{h}")


def choose_orientation(news_size: tuple[int, int], evidence_size: tuple[int, int]) -> Orientation:
    """Pick the stacking direction whose canvas is closest to square.

    The evidence image is notionally rescaled so the shared edge matches the
    news image (height for horizontal stacking, width for vertical); the
    resulting canvas aspect ratios are compared by max(r, 1/r). Ties go to
    horizontal. Borders play no part in the choice.
    """

    _check_size(news_size, "news")
    _check_size(evidence_size, "evidence")
    nw, nh = news_size
    ew, eh = evidence_size

    horiz_w = nw + ew * (nh / eh)
    horiz_d = _aspect_distance(horiz_w, nh)
    vert_h = nh + eh * (nw / ew)
    vert_d = _aspect_distance(nw, vert_h)
    return Orientation.HORIZONTAL if horiz_d <= vert_d else Orientation.VERTICAL


def scaled_evidence_size(
    news_size: tuple[int, int],
    evidence_size: tuple[int, int],
    orientation: Orientation,
) -> tuple[int, int]:
    """Target size for the evidence image: shared edge equal to the news
    image, other edge scaled proportionally and rounded (never below 1)."""

    nw, nh = news_size
    ew, eh = evidence_size
    if orientation is Orientation.HORIZONTAL:
        return (max(1, round(ew * nh / eh)), nh)
    return (nw, max(1, round(eh * nw / ew)))


# ---------------------------------------------------------------------------
# Composition
# ---------------------------------------------------------------------------

def load_image(source: ImageSource) -> Image.Image:
    """Decode an image from a PIL image, raw bytes, or a file path. Always
    returns RGB."""

    if isinstance(source, Image.Image):
        return source.convert("RGB")
    try:
        if isinstance(source, bytes):
            img = Image.open(io.BytesIO(source))
        else:
            img = Image.open(source)
        img.load()
    except (OSError, UnidentifiedImageError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from None
    return img.convert("RGB")


def compose(news: ImageSource, evidence: ImageSource, border: BorderSpec | None = None) -> CompositeImage:
    """Build the composite: scale the evidence image, wrap both in their
    border colors, and stack. News comes first (left or top)."""

    border = border or BorderSpec()
    news_img = load_image(news)
    ev_img = load_image(evidence)
    _check_size(news_img.size, "news")
    _check_size(ev_img.size, "evidence")

    orientation = choose_orientation(news_img.size, ev_img.size)
    target = scaled_evidence_size(news_img.size, ev_img.size, orientation)
    if target != ev_img.size:
        ev_img = ev_img.resize(target, Image.Resampling.LANCZOS)

    t = border.thickness_px
    framed_news = ImageOps.expand(news_img, border=t, fill=tuple(border.news_color))
    framed_ev = ImageOps.expand(ev_img, border=t, fill=tuple(border.evidence_color))

    if orientation is Orientation.HORIZONTAL:
        canvas = Image.new(
            "RGB",
            (framed_news.width + framed_ev.width, max(framed_news.height, framed_ev.height)),
        )
        canvas.paste(framed_news, (0, 0))
        canvas.paste(framed_ev, (framed_news.width, 0))
        news_box = (t, t, t + news_img.width, t + news_img.height)
        ev_left = framed_news.width + t
        evidence_box = (ev_left, t, ev_left + ev_img.width, t + ev_img.height)
    else:
        canvas = Image.new(
            "RGB",
            (max(framed_news.width, framed_ev.width), framed_news.height + framed_ev.height),
        )
        canvas.paste(framed_news, (0, 0))
        canvas.paste(framed_ev, (0, framed_news.height))
        news_box = (t, t, t + news_img.width, t + news_img.height)
        ev_top = framed_news.height + t
        evidence_box = (t, ev_top, t + ev_img.width, ev_top + ev_img.height)

    return CompositeImage(
        image=canvas,
        orientation=orientation,
        news_box=news_box,
        evidence_box=evidence_box,
    )


def save_png(image: Image.Image | CompositeImage, path: str | Path) -> None:
    """Persist losslessly. Composites must survive a disk round trip without
    altering any pixel the model will see."""

    img = image.image if isinstance(image, CompositeImage) else image
    img.save(path, format="PNG")
