#!/usr/bin/env python3
"""Generate test fixture fonts and their reference dumps.

Requires fontTools. Outputs go to crates/glyphformer/tests/fixtures/.

Fixtures:
  triangle.ttf   -- one triangle glyph mapped to 'A' (cmap format 4)
  curves.ttf     -- glyphs exercising off-curve runs, an all-off contour,
                    and a format-12 cmap with a supplementary-plane mapping
  composite.ttf  -- composite glyphs (translated and scaled components)
  style_{angular,rounded,slab,thin}.ttf -- four visually distinct synthetic
                    fonts (520 glyphs each) for end-to-end training runs

Each fixture .ttf gets a sibling .ref.json with the fontTools view of every
glyph: contours as [x, y, on] triples after composite flattening.
"""

import json
import math
import random
import sys
from pathlib import Path

from fontTools.fontBuilder import FontBuilder
from fontTools.pens.ttGlyphPen import TTGlyphPen
from fontTools.ttLib.tables import ttProgram
from fontTools.ttLib.tables._g_l_y_f import Glyph, GlyphComponent, GlyphCoordinates

OUT = Path(__file__).resolve().parent.parent / "crates" / "glyphformer" / "tests" / "fixtures"
UPM = 1000


def simple_glyph(contours):
    """Build a glyf Glyph from [[(x, y, on), ...], ...] without a pen, so
    off-curve runs survive exactly as written."""
    g = Glyph()
    g.numberOfContours = len(contours)
    coords = []
    flags = []
    end_pts = []
    for contour in contours:
        for x, y, on in contour:
            coords.append((x, y))
            flags.append(1 if on else 0)
        end_pts.append(len(coords) - 1)
    g.coordinates = GlyphCoordinates(coords)
    g.flags = bytearray(flags)
    g.endPtsOfContours = end_pts
    g.program = ttProgram.Program()
    g.program.fromBytecode(b"")
    return g


def build_font(path, glyphs, cmap, cmap_format=4):
    order = [".notdef"] + [name for name in glyphs if name != ".notdef"]
    fb = FontBuilder(UPM, isTTF=True)
    fb.setupGlyphOrder(order)
    fb.setupCharacterMap(cmap)
    full = {".notdef": Glyph()}
    full.update(glyphs)
    fb.setupGlyf(full)
    metrics = {name: (600, 50) for name in order}
    fb.setupHorizontalMetrics(metrics)
    fb.setupHorizontalHeader(ascent=800, descent=-200)
    fb.setupNameTable({"familyName": path.stem, "styleName": "Regular"})
    fb.setupOS2(sTypoAscender=800, sTypoDescender=-200)
    fb.setupPost()
    fb.save(str(path))
    return path


def dump_reference(ttf_path):
    from fontTools.ttLib import TTFont

    font = TTFont(str(ttf_path))
    glyf = font["glyf"]
    order = font.getGlyphOrder()
    out = {
        "units_per_em": font["head"].unitsPerEm,
        "num_glyphs": font["maxp"].numGlyphs,
        "cmap": {str(cp): order.index(name) for cp, name in font.getBestCmap().items()},
        "glyphs": [],
    }
    for name in order:
        glyph = glyf[name]
        coords, end_pts, flags = glyph.getCoordinates(glyf)
        contours = []
        start = 0
        for end in end_pts:
            contour = []
            for i in range(start, end + 1):
                x, y = coords[i]
                contour.append([float(x), float(y), int(flags[i] & 1)])
            contours.append(contour)
            start = end + 1
        out["glyphs"].append(contours)
    ref = ttf_path.with_suffix(".ref.json")
    ref.write_text(json.dumps(out))
    return ref


def make_triangle():
    tri = simple_glyph([[(100, 0, 1), (500, 800, 1), (900, 0, 1)]])
    return build_font(OUT / "triangle.ttf", {"A": tri}, {ord("A"): "A"})


def make_curves():
    # adjacent off-curve pair (implicit on-curve midpoint)
    wave = simple_glyph(
        [[(0, 0, 1), (100, 300, 0), (300, 300, 0), (400, 0, 1), (200, -100, 0)]]
    )
    # all-off-curve contour (a "blob" of quadratics)
    blob = simple_glyph(
        [[(200, 0, 0), (400, 200, 0), (200, 400, 0), (0, 200, 0)]]
    )
    # two contours, mixed
    ring = simple_glyph(
        [
            [(50, 0, 1), (450, 0, 1), (450, 400, 1), (50, 400, 1)],
            [(150, 100, 1), (150, 300, 1), (350, 300, 1), (350, 100, 1)],
        ]
    )
    glyphs = {"wave": wave, "blob": blob, "ring": ring}
    cmap = {ord("B"): "wave", ord("C"): "blob", 0x10400: "ring"}
    return build_font(OUT / "curves.ttf", glyphs, cmap)


def make_composite():
    base = simple_glyph([[(0, 0, 1), (200, 400, 0), (400, 0, 1)]])

    def component(name, x, y, transform=None):
        c = GlyphComponent()
        c.glyphName = name
        c.x, c.y = x, y
        c.flags = 0x0004  # ROUND_XY_TO_GRID
        if transform is not None:
            c.transform = transform
        return c

    shifted = Glyph()
    shifted.numberOfContours = -1
    shifted.components = [component("base", 100, 0)]

    doubled = Glyph()
    doubled.numberOfContours = -1
    doubled.components = [
        component("base", 0, 0),
        component("base", 500, 0, [[0.5, 0.0], [0.0, 0.5]]),
    ]

    glyphs = {"base": base, "shifted": shifted, "doubled": doubled}
    cmap = {ord("D"): "base", ord("E"): "shifted", ord("F"): "doubled"}
    return build_font(OUT / "composite.ttf", glyphs, cmap)


def star(cx, cy, r_outer, r_inner, points, phase):
    pts = []
    for k in range(points * 2):
        r = r_outer if k % 2 == 0 else r_inner
        a = phase + math.pi * k / points
        pts.append((round(cx + r * math.cos(a)), round(cy + r * math.sin(a)), 1))
    return pts


def blob_contour(cx, cy, r, lobes, wobble, rng):
    pts = []
    for k in range(lobes):
        a = 2 * math.pi * k / lobes
        rr = r * (1 + wobble * (rng.random() - 0.5))
        pts.append((round(cx + rr * math.cos(a)), round(cy + rr * math.sin(a)), 0))
    return pts


def make_style_font(name, style, n_glyphs=520):
    rng = random.Random(sum(name.encode()))
    glyphs = {}
    cmap = {}
    for k in range(n_glyphs):
        cp = 0x4E00 + k
        gname = f"g{k}"
        cx = 300 + (k % 7) * 50
        cy = 300 + (k % 5) * 40
        if style == "angular":
            contours = [star(cx, cy, 250 + (k % 11) * 10, 100 + (k % 7) * 12, 3 + k % 4, k * 0.13)]
        elif style == "rounded":
            contours = [blob_contour(cx, cy, 220 + (k % 9) * 14, 6 + k % 5, 0.5, rng)]
        elif style == "slab":
            w = 150 + (k % 13) * 25
            h = 500 + (k % 7) * 40
            x0 = cx - w // 2
            contours = [
                [(x0, 0, 1), (x0 + w, 0, 1), (x0 + w, h, 1), (x0, h, 1)],
                [(x0 - 100, 0, 1), (x0 + w + 100, 0, 1), (x0 + w + 100, 60, 1), (x0 - 100, 60, 1)],
            ]
        else:  # thin
            contours = []
            for s in range(2 + k % 3):
                x = 150 + s * 180 + (k % 5) * 10
                contours.append(
                    [(x, 50, 1), (x + 30, 50, 1), (x + 30 + (k % 4) * 8, 750, 1), (x + (k % 4) * 8, 750, 1)]
                )
        glyphs[gname] = simple_glyph(contours)
        cmap[cp] = gname
    return build_font(OUT / f"style_{name}.ttf", glyphs, cmap)


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    fonts = [make_triangle(), make_curves(), make_composite()]
    for style in ["angular", "rounded", "slab", "thin"]:
        fonts.append(make_style_font(style, style))
    for f in fonts:
        dump_reference(f)
        print(f"wrote {f}")


if __name__ == "__main__":
    sys.exit(main())
