"""Composite building: orientation arithmetic, scaling, borders, encoding."""

from __future__ import annotations

import io

import pytest
from PIL import Image

from entivis.compose import (
    BorderSpec,
    DecodeError,
    Orientation,
    ZeroDimension,
    choose_orientation,
    color_name,
    compose,
    load_image,
    parse_color,
    save_png,
    scaled_evidence_size,
)

from conftest import make_image


def aspect_distance(w: float, h: float) -> float:
    r = w / h
    return max(r, 1.0 / r)


class TestChooseOrientation:
    def test_wide_inputs_stack_vertically(self):
        # 600x400 pair: horizontal canvas 1200x400 (3.0) vs vertical 600x800 (1.33).
        assert choose_orientation((600, 400), (600, 400)) is Orientation.VERTICAL

    def test_tall_inputs_stack_horizontally(self):
        # 400x1200 pair: horizontal 800x1200 (1.5) vs vertical 400x2400 (6.0).
        assert choose_orientation((400, 1200), (400, 1200)) is Orientation.HORIZONTAL

    def test_square_tie_breaks_horizontal(self):
        assert choose_orientation((500, 500), (500, 500)) is Orientation.HORIZONTAL

    def test_zero_dimension_rejected(self):
        with pytest.raises(ZeroDimension):
            choose_orientation((0, 5), (3, 3))
        with pytest.raises(ZeroDimension):
            choose_orientation((5, 5), (3, 0))


class TestScaledEvidenceSize:
    def test_horizontal_matches_height(self):
        assert scaled_evidence_size((600, 400), (300, 200), Orientation.HORIZONTAL) == (600, 400)

    def test_vertical_matches_width(self):
        assert scaled_evidence_size((600, 400), (300, 200), Orientation.VERTICAL) == (600, 400)

    def test_rounding_never_hits_zero(self):
        w, h = scaled_evidence_size((1, 1), (1000, 1), Orientation.VERTICAL)
        assert (w, h) == (1, 1)


class TestCompose:
    def test_vertical_example_610x820(self):
        result = compose(make_image(size=(600, 400)), make_image(size=(300, 200)),
                         BorderSpec(thickness_px=5))
        assert result.orientation is Orientation.VERTICAL
        assert result.image.size == (610, 820)
        # News on top: its content box sits above the evidence box.
        assert result.news_box == (5, 5, 605, 405)
        assert result.evidence_box == (5, 415, 605, 815)

    def test_minimal_horizontal_6x3(self):
        result = compose(make_image(size=(1, 1)), make_image(size=(1, 1)),
                         BorderSpec(thickness_px=1))
        assert result.orientation is Orientation.HORIZONTAL
        assert result.image.size == (6, 3)

    def test_border_pixels_exact(self):
        news_color, ev_color = (255, 0, 0), (0, 0, 255)
        spec = BorderSpec(news_color=news_color, evidence_color=ev_color, thickness_px=3)
        result = compose(
            make_image(color=(10, 20, 30), size=(40, 30)),
            make_image(color=(90, 80, 70), size=(20, 20)),
            spec,
        )
        px = result.image.load()
        left, top, right, bottom = result.news_box
        for x in range(left - 3, right + 3):
            assert px[x, top - 1] == news_color
            assert px[x, bottom] == news_color
        for y in range(top - 3, bottom + 3):
            assert px[left - 1, y] == news_color
            assert px[right, y] == news_color
        left, top, right, bottom = result.evidence_box
        for x in range(left, right):
            assert px[x, top - 1] == ev_color
            assert px[x, bottom] == ev_color

    def test_news_pixels_untouched(self):
        result = compose(make_image(color=(10, 20, 30), size=(8, 8)),
                         make_image(color=(200, 200, 200), size=(16, 16)))
        px = result.image.load()
        left, top, right, bottom = result.news_box
        for x in range(left, right):
            for y in range(top, bottom):
                assert px[x, y] == (10, 20, 30)

    def test_aspect_preserved_within_rounding(self):
        result = compose(make_image(size=(123, 77)), make_image(size=(321, 191)))
        left, top, right, bottom = result.evidence_box
        got_w, got_h = right - left, bottom - top
        if result.orientation is Orientation.HORIZONTAL:
            ideal_w = 321 * got_h / 191
            assert abs(got_w - ideal_w) <= 1
        else:
            ideal_h = 191 * got_w / 321
            assert abs(got_h - ideal_h) <= 1

    def test_regions_disjoint(self):
        result = compose(make_image(size=(30, 20)), make_image(size=(20, 30)))
        nl, nt, nr, nb = result.news_box
        el, et, er, eb = result.evidence_box
        overlap_w = min(nr, er) - max(nl, el)
        overlap_h = min(nb, eb) - max(nt, et)
        assert overlap_w <= 0 or overlap_h <= 0

    def test_corrupt_evidence_bytes(self):
        with pytest.raises(DecodeError):
            compose(make_image(), b"definitely not an image")

    def test_zero_dimension_border_spec(self):
        with pytest.raises(Exception):
            BorderSpec(thickness_px=0)

    def test_same_border_colors_rejected(self):
        with pytest.raises(Exception):
            BorderSpec(news_color=(255, 0, 0), evidence_color=(255, 0, 0))


class TestImageIo:
    def test_load_from_path(self, tmp_path):
        p = tmp_path / "a.png"
        make_image(size=(5, 7)).save(p)
        assert load_image(p).size == (5, 7)

    def test_load_from_bytes(self):
        buf = io.BytesIO()
        make_image(size=(4, 4)).save(buf, format="PNG")
        assert load_image(buf.getvalue()).size == (4, 4)

    def test_load_converts_to_rgb(self):
        img = Image.new("L", (3, 3), 128)
        assert load_image(img).mode == "RGB"

    def test_save_png_round_trip(self, tmp_path):
        result = compose(make_image(size=(12, 9)), make_image(size=(9, 12)))
        out = tmp_path / "composite.png"
        save_png(result, out)
        back = Image.open(out).convert("RGB")
        assert back.tobytes() == result.image.tobytes()


class TestColors:
    def test_known_names(self):
        assert color_name((255, 0, 0)) == "red"
        assert color_name((0, 0, 255)) == "blue"

    def test_unknown_color_renders_rgb(self):
        assert color_name((1, 2, 3)) == "rgb(1,2,3)"

    def test_parse_name_and_hex(self):
        assert parse_color("red") == (255, 0, 0)
        assert parse_color("#00ff00") == (0, 255, 0)

    def test_parse_rejects_garbage(self):
        with pytest.raises(Exception):
            parse_color("notacolor")
