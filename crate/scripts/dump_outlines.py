#!/usr/bin/env python3
"""Dump every glyph outline of a TrueType font as JSON via fontTools.

Usage: dump_outlines.py FONT.ttf OUT.json

Output schema matches the .ref.json fixtures: units_per_em, num_glyphs,
cmap (codepoint -> glyph id), and per glyph a list of contours of
[x, y, on] triples after composite flattening.
"""

import json
import sys

from fontTools.ttLib import TTFont


def dump(font_path, out_path):
    font = TTFont(font_path)
    glyf = font["glyf"]
    order = font.getGlyphOrder()
    index = {name: i for i, name in enumerate(order)}
    out = {
        "units_per_em": font["head"].unitsPerEm,
        "num_glyphs": font["maxp"].numGlyphs,
        "cmap": {str(cp): index[name] for cp, name in font.getBestCmap().items()},
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
    with open(out_path, "w") as f:
        json.dump(out, f)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    dump(sys.argv[1], sys.argv[2])
