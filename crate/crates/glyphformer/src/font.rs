//! TrueType font parsing: sfnt table directory, `glyf` outlines, `cmap`
//! character mappings.
//!
//! Only TrueType-flavored fonts are supported. Fonts carrying a `CFF ` table
//! and no `glyf` table are rejected with [`FontError::UnsupportedFont`] so the
//! caller knows to supply TrueType input.

use std::collections::BTreeMap;
use std::ops::Range;

use thiserror::Error;

/// Maximum recursion depth when flattening composite glyphs. Anything deeper
/// is treated as a cyclic component reference.
const MAX_COMPOSITE_DEPTH: usize = 8;

#[derive(Debug, Error)]
pub enum FontError {
    #[error("malformed font: {0}")]
    MalformedFont(String),
    #[error("unsupported font: {0}")]
    UnsupportedFont(String),
    #[error("malformed glyph {glyph_id}: {reason}")]
    MalformedGlyph { glyph_id: u16, reason: String },
    #[error("glyph id {0} out of range (font has {1} glyphs)")]
    GlyphOutOfRange(u16, u16),
    #[error("composite glyph {0} exceeds recursion depth {MAX_COMPOSITE_DEPTH} (cyclic reference?)")]
    CompositeDepthExceeded(u16),
    #[error("no unicode cmap subtable of format 4 or 12")]
    UnsupportedCmap,
}

type Result<T> = std::result::Result<T, FontError>;

/// Whether `loca` stores 16-bit half-offsets or 32-bit offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocaFormat {
    Short,
    Long,
}

/// One outline point in font units.
///
/// Coordinates are `f64` because composite components may apply fractional
/// 2x2 transforms; simple-glyph points are always integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub on_curve: bool,
}

impl Point {
    pub fn new(x: f64, y: f64, on_curve: bool) -> Self {
        Point { x, y, on_curve }
    }
}

/// A glyph outline: zero or more closed contours of flagged points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GlyphOutline {
    pub glyph_id: u16,
    pub contours: Vec<Vec<Point>>,
}

impl GlyphOutline {
    pub fn num_points(&self) -> usize {
        self.contours.iter().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }
}

/// A parsed TrueType font. Read-only after construction; glyph extraction
/// from a shared reference is safe to run concurrently.
pub struct FontFile {
    data: Vec<u8>,
    tables: BTreeMap<[u8; 4], Range<usize>>,
    pub units_per_em: u16,
    pub num_glyphs: u16,
    pub loca_format: LocaFormat,
    loca: Vec<u32>,
    glyf: Range<usize>,
    /// codepoint -> glyph id, from the best unicode subtable (format 12
    /// preferred over format 4). `None` when no such subtable exists.
    char_map: Option<BTreeMap<u32, u16>>,
}

impl std::fmt::Debug for FontFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FontFile")
            .field("units_per_em", &self.units_per_em)
            .field("num_glyphs", &self.num_glyphs)
            .field("loca_format", &self.loca_format)
            .field("tables", &self.tables.keys().collect::<Vec<_>>())
            .finish()
    }
}

fn malformed(msg: impl Into<String>) -> FontError {
    FontError::MalformedFont(msg.into())
}

/// Big-endian reads with bounds checking.
struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    fn at(data: &'a [u8], pos: usize) -> Self {
        Reader { data, pos }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .ok_or_else(|| malformed("offset overflow"))?;
        if end > self.data.len() {
            return Err(malformed(format!(
                "truncated read: need {} bytes at {}, have {}",
                n,
                self.pos,
                self.data.len()
            )));
        }
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn i16(&mut self) -> Result<i16> {
        Ok(self.u16()? as i16)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// F2Dot14 fixed-point to f64 (exact: denominator is a power of two).
    fn f2dot14(&mut self) -> Result<f64> {
        Ok(self.i16()? as f64 / 16384.0)
    }

    fn skip(&mut self, n: usize) -> Result<()> {
        self.take(n).map(|_| ())
    }
}

/// Parse an sfnt container and validate the tables needed for outline and
/// character-map access.
pub fn parse_font(bytes: &[u8]) -> Result<FontFile> {
    let mut r = Reader::new(bytes);
    let version = r.u32()?;
    match version {
        0x0001_0000 | 0x7472_7565 => {} // 1.0 or 'true'
        0x4F54_544F => {}               // 'OTTO': flavor decided by table set below
        0x7474_6366 => {
            return Err(FontError::UnsupportedFont(
                "TrueType collections ('ttcf') are not supported; extract a single face".into(),
            ))
        }
        v => return Err(malformed(format!("bad sfnt magic 0x{v:08X}"))),
    }
    let num_tables = r.u16()?;
    r.skip(6)?; // searchRange, entrySelector, rangeShift

    let mut tables = BTreeMap::new();
    for _ in 0..num_tables {
        let tag_bytes = r.take(4)?;
        let tag = [tag_bytes[0], tag_bytes[1], tag_bytes[2], tag_bytes[3]];
        let _checksum = r.u32()?;
        let offset = r.u32()? as usize;
        let length = r.u32()? as usize;
        let end = offset
            .checked_add(length)
            .ok_or_else(|| malformed("table range overflow"))?;
        if end > bytes.len() {
            return Err(malformed(format!(
                "table {} extends past end of file ({end} > {})",
                String::from_utf8_lossy(&tag),
                bytes.len()
            )));
        }
        tables.insert(tag, offset..end);
    }

    if tables.contains_key(b"CFF ") && !tables.contains_key(b"glyf") {
        return Err(FontError::UnsupportedFont(
            "CFF-flavored font (PostScript charstrings); supply a TrueType-flavored font".into(),
        ));
    }
    let require = |tag: &[u8; 4]| -> Result<Range<usize>> {
        tables
            .get(tag)
            .cloned()
            .ok_or_else(|| malformed(format!("missing {} table", String::from_utf8_lossy(tag))))
    };

    // head
    let head = require(b"head")?;
    let head_data = &bytes[head.clone()];
    let mut hr = Reader::at(head_data, 12);
    let magic = hr.u32()?;
    if magic != 0x5F0F_3CF5 {
        return Err(malformed(format!("bad head magic 0x{magic:08X}")));
    }
    let mut hr = Reader::at(head_data, 18);
    let units_per_em = hr.u16()?;
    if units_per_em == 0 {
        return Err(malformed("unitsPerEm is zero"));
    }
    let mut hr = Reader::at(head_data, 50);
    let loca_format = match hr.i16()? {
        0 => LocaFormat::Short,
        1 => LocaFormat::Long,
        v => return Err(malformed(format!("bad indexToLocFormat {v}"))),
    };

    // maxp
    let maxp = require(b"maxp")?;
    let mut mr = Reader::at(&bytes[maxp], 4);
    let num_glyphs = mr.u16()?;

    // loca
    let loca_range = require(b"loca")?;
    let glyf = require(b"glyf")?;
    let loca_data = &bytes[loca_range];
    let n = num_glyphs as usize + 1;
    let mut loca = Vec::with_capacity(n);
    let mut lr = Reader::new(loca_data);
    for _ in 0..n {
        let v = match loca_format {
            LocaFormat::Short => lr.u16().map(|v| v as u32 * 2),
            LocaFormat::Long => lr.u32(),
        }
        .map_err(|_| malformed("loca table too short"))?;
        loca.push(v);
    }
    let glyf_len = (glyf.end - glyf.start) as u32;
    for w in loca.windows(2) {
        if w[1] < w[0] {
            return Err(malformed("loca offsets decrease"));
        }
    }
    if *loca.last().unwrap() > glyf_len {
        return Err(malformed("loca points past end of glyf"));
    }

    // cmap: best unicode subtable, deferred error if none usable
    let cmap_range = require(b"cmap")?;
    let char_map = parse_cmap(&bytes[cmap_range], num_glyphs)?;

    Ok(FontFile {
        data: bytes.to_vec(),
        tables,
        units_per_em,
        num_glyphs,
        loca_format,
        loca,
        glyf,
        char_map,
    })
}

/// Pick the best unicode subtable (format 12 wins over format 4) and expand
/// it into a codepoint -> glyph map. Returns `None` when no format-4/12
/// unicode subtable is present.
fn parse_cmap(cmap: &[u8], num_glyphs: u16) -> Result<Option<BTreeMap<u32, u16>>> {
    let mut r = Reader::new(cmap);
    let _version = r.u16()?;
    let n_tables = r.u16()?;
    let mut best: Option<(u16, usize)> = None; // (format, offset)
    for _ in 0..n_tables {
        let platform = r.u16()?;
        let encoding = r.u16()?;
        let offset = r.u32()? as usize;
        let unicode = matches!((platform, encoding), (0, _) | (3, 1) | (3, 10));
        if !unicode || offset + 2 > cmap.len() {
            continue;
        }
        let format = u16::from_be_bytes([cmap[offset], cmap[offset + 1]]);
        if format != 4 && format != 12 {
            continue;
        }
        let better = match best {
            None => true,
            Some((f, _)) => format == 12 && f == 4,
        };
        if better {
            best = Some((format, offset));
        }
    }
    let Some((format, offset)) = best else {
        return Ok(None);
    };
    let sub = &cmap[offset..];
    let mut map = BTreeMap::new();
    match format {
        4 => {
            let mut sr = Reader::at(sub, 6);
            let seg_count = sr.u16()? as usize / 2;
            sr.skip(6)?; // searchRange, entrySelector, rangeShift
            let mut end_codes = Vec::with_capacity(seg_count);
            for _ in 0..seg_count {
                end_codes.push(sr.u16()?);
            }
            sr.skip(2)?; // reservedPad
            let mut start_codes = Vec::with_capacity(seg_count);
            for _ in 0..seg_count {
                start_codes.push(sr.u16()?);
            }
            let mut deltas = Vec::with_capacity(seg_count);
            for _ in 0..seg_count {
                deltas.push(sr.u16()?);
            }
            let range_offset_base = sr.pos;
            let mut range_offsets = Vec::with_capacity(seg_count);
            for _ in 0..seg_count {
                range_offsets.push(sr.u16()?);
            }
            for seg in 0..seg_count {
                let (start, end) = (start_codes[seg], end_codes[seg]);
                if start == 0xFFFF && end == 0xFFFF {
                    continue;
                }
                for code in start..=end {
                    let gid = if range_offsets[seg] == 0 {
                        code.wrapping_add(deltas[seg])
                    } else {
                        let idx = range_offset_base
                            + seg * 2
                            + range_offsets[seg] as usize
                            + (code - start) as usize * 2;
                        if idx + 2 > sub.len() {
                            return Err(malformed("cmap format 4 glyphIdArray out of bounds"));
                        }
                        let g = u16::from_be_bytes([sub[idx], sub[idx + 1]]);
                        if g == 0 {
                            0
                        } else {
                            g.wrapping_add(deltas[seg])
                        }
                    };
                    if gid != 0 && gid < num_glyphs {
                        map.insert(code as u32, gid);
                    }
                    if code == 0xFFFF {
                        break;
                    }
                }
            }
        }
        12 => {
            let mut sr = Reader::at(sub, 12);
            let n_groups = sr.u32()?;
            for _ in 0..n_groups {
                let start = sr.u32()?;
                let end = sr.u32()?;
                let start_gid = sr.u32()?;
                if end < start || end > 0x10FFFF {
                    return Err(malformed("cmap format 12 group out of range"));
                }
                for (k, code) in (start..=end).enumerate() {
                    let gid = start_gid + k as u32;
                    if gid != 0 && gid < num_glyphs as u32 {
                        map.insert(code, gid as u16);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(Some(map))
}

impl FontFile {
    /// Map a unicode scalar to its glyph id, `None` when unmapped.
    pub fn char_to_glyph(&self, codepoint: char) -> Result<Option<u16>> {
        let map = self.char_map.as_ref().ok_or(FontError::UnsupportedCmap)?;
        Ok(map.get(&(codepoint as u32)).copied())
    }

    /// All codepoints with a non-zero glyph mapping, ascending.
    pub fn list_codepoints(&self) -> Result<Vec<char>> {
        let map = self.char_map.as_ref().ok_or(FontError::UnsupportedCmap)?;
        Ok(map.keys().filter_map(|&cp| char::from_u32(cp)).collect())
    }

    pub fn table_range(&self, tag: &[u8; 4]) -> Option<Range<usize>> {
        self.tables.get(tag).cloned()
    }

    /// Extract a glyph outline. Composite glyphs are flattened recursively;
    /// empty glyphs yield zero contours.
    pub fn glyph_outline(&self, glyph_id: u16) -> Result<GlyphOutline> {
        if glyph_id >= self.num_glyphs {
            return Err(FontError::GlyphOutOfRange(glyph_id, self.num_glyphs));
        }
        let contours = self.glyph_contours(glyph_id, 0)?;
        Ok(GlyphOutline { glyph_id, contours })
    }

    fn glyph_data(&self, glyph_id: u16) -> &[u8] {
        let start = self.glyf.start + self.loca[glyph_id as usize] as usize;
        let end = self.glyf.start + self.loca[glyph_id as usize + 1] as usize;
        &self.data[start..end]
    }

    fn glyph_contours(&self, glyph_id: u16, depth: usize) -> Result<Vec<Vec<Point>>> {
        if depth > MAX_COMPOSITE_DEPTH {
            return Err(FontError::CompositeDepthExceeded(glyph_id));
        }
        let data = self.glyph_data(glyph_id);
        if data.is_empty() {
            return Ok(Vec::new());
        }
        let glyph_err = |reason: String| FontError::MalformedGlyph { glyph_id, reason };
        let mut r = Reader::new(data);
        let n_contours = r.i16().map_err(|e| glyph_err(e.to_string()))?;
        r.skip(8).map_err(|e| glyph_err(e.to_string()))?; // bbox
        if n_contours >= 0 {
            self.simple_contours(&mut r, n_contours as usize)
                .map_err(|e| glyph_err(e.to_string()))
        } else {
            self.composite_contours(&mut r, glyph_id, depth)
        }
    }

    fn simple_contours(&self, r: &mut Reader, n_contours: usize) -> Result<Vec<Vec<Point>>> {
        let mut end_pts = Vec::with_capacity(n_contours);
        for _ in 0..n_contours {
            end_pts.push(r.u16()? as usize);
        }
        for w in end_pts.windows(2) {
            if w[1] <= w[0] {
                return Err(malformed("contour end indices not increasing"));
            }
        }
        let n_points = match end_pts.last() {
            Some(&last) => last + 1,
            None => return Ok(Vec::new()),
        };
        let instr_len = r.u16()? as usize;
        r.skip(instr_len)?;

        const ON_CURVE: u8 = 0x01;
        const X_SHORT: u8 = 0x02;
        const Y_SHORT: u8 = 0x04;
        const REPEAT: u8 = 0x08;
        const X_SAME_OR_POS: u8 = 0x10;
        const Y_SAME_OR_POS: u8 = 0x20;

        let mut flags = Vec::with_capacity(n_points);
        while flags.len() < n_points {
            let f = r.u8()?;
            flags.push(f);
            if f & REPEAT != 0 {
                let count = r.u8()? as usize;
                for _ in 0..count {
                    if flags.len() >= n_points {
                        return Err(malformed("flag repeat overruns point count"));
                    }
                    flags.push(f);
                }
            }
        }

        let mut xs = Vec::with_capacity(n_points);
        let mut x = 0i32;
        for &f in &flags {
            let dx = if f & X_SHORT != 0 {
                let v = r.u8()? as i32;
                if f & X_SAME_OR_POS != 0 {
                    v
                } else {
                    -v
                }
            } else if f & X_SAME_OR_POS != 0 {
                0
            } else {
                r.i16()? as i32
            };
            x += dx;
            xs.push(x);
        }
        let mut ys = Vec::with_capacity(n_points);
        let mut y = 0i32;
        for &f in &flags {
            let dy = if f & Y_SHORT != 0 {
                let v = r.u8()? as i32;
                if f & Y_SAME_OR_POS != 0 {
                    v
                } else {
                    -v
                }
            } else if f & Y_SAME_OR_POS != 0 {
                0
            } else {
                r.i16()? as i32
            };
            y += dy;
            ys.push(y);
        }

        let mut contours = Vec::with_capacity(n_contours);
        let mut start = 0usize;
        for &end in &end_pts {
            let mut contour = Vec::with_capacity(end + 1 - start);
            for i in start..=end {
                contour.push(Point::new(
                    xs[i] as f64,
                    ys[i] as f64,
                    flags[i] & ON_CURVE != 0,
                ));
            }
            contours.push(contour);
            start = end + 1;
        }
        Ok(contours)
    }

    fn composite_contours(
        &self,
        r: &mut Reader,
        glyph_id: u16,
        depth: usize,
    ) -> Result<Vec<Vec<Point>>> {
        const ARG_1_AND_2_ARE_WORDS: u16 = 0x0001;
        const ARGS_ARE_XY_VALUES: u16 = 0x0002;
        const WE_HAVE_A_SCALE: u16 = 0x0008;
        const MORE_COMPONENTS: u16 = 0x0020;
        const X_AND_Y_SCALE: u16 = 0x0040;
        const TWO_BY_TWO: u16 = 0x0080;
        const SCALED_COMPONENT_OFFSET: u16 = 0x0800;

        let glyph_err = |reason: String| FontError::MalformedGlyph { glyph_id, reason };
        let mut contours: Vec<Vec<Point>> = Vec::new();
        loop {
            let flags = r.u16().map_err(|e| glyph_err(e.to_string()))?;
            let component_id = r.u16().map_err(|e| glyph_err(e.to_string()))?;
            if component_id >= self.num_glyphs {
                return Err(glyph_err(format!("component id {component_id} out of range")));
            }
            let (arg1, arg2) = if flags & ARG_1_AND_2_ARE_WORDS != 0 {
                let a = r.i16().map_err(|e| glyph_err(e.to_string()))?;
                let b = r.i16().map_err(|e| glyph_err(e.to_string()))?;
                (a as i32, b as i32)
            } else {
                let a = r.u8().map_err(|e| glyph_err(e.to_string()))?;
                let b = r.u8().map_err(|e| glyph_err(e.to_string()))?;
                if flags & ARGS_ARE_XY_VALUES != 0 {
                    (a as i8 as i32, b as i8 as i32)
                } else {
                    (a as i32, b as i32)
                }
            };
            // transform rows: px = x*m[0][0] + y*m[1][0], py = x*m[0][1] + y*m[1][1]
            let transform: Option<[[f64; 2]; 2]> = if flags & WE_HAVE_A_SCALE != 0 {
                let s = r.f2dot14().map_err(|e| glyph_err(e.to_string()))?;
                Some([[s, 0.0], [0.0, s]])
            } else if flags & X_AND_Y_SCALE != 0 {
                let sx = r.f2dot14().map_err(|e| glyph_err(e.to_string()))?;
                let sy = r.f2dot14().map_err(|e| glyph_err(e.to_string()))?;
                Some([[sx, 0.0], [0.0, sy]])
            } else if flags & TWO_BY_TWO != 0 {
                let xx = r.f2dot14().map_err(|e| glyph_err(e.to_string()))?;
                let xy = r.f2dot14().map_err(|e| glyph_err(e.to_string()))?;
                let yx = r.f2dot14().map_err(|e| glyph_err(e.to_string()))?;
                let yy = r.f2dot14().map_err(|e| glyph_err(e.to_string()))?;
                Some([[xx, xy], [yx, yy]])
            } else {
                None
            };

            let mut component = self.glyph_contours(component_id, depth + 1)?;
            let apply = |pts: &mut Vec<Vec<Point>>, m: &[[f64; 2]; 2]| {
                for c in pts.iter_mut() {
                    for p in c.iter_mut() {
                        let (x, y) = (p.x, p.y);
                        p.x = x * m[0][0] + y * m[1][0];
                        p.y = x * m[0][1] + y * m[1][1];
                    }
                }
            };
            let translate = |pts: &mut Vec<Vec<Point>>, dx: f64, dy: f64| {
                for c in pts.iter_mut() {
                    for p in c.iter_mut() {
                        p.x += dx;
                        p.y += dy;
                    }
                }
            };

            if flags & ARGS_ARE_XY_VALUES != 0 {
                let (dx, dy) = (arg1 as f64, arg2 as f64);
                match transform {
                    None => translate(&mut component, dx, dy),
                    Some(m) => {
                        if flags & SCALED_COMPONENT_OFFSET != 0 {
                            // Apple convention: the offset is scaled too
                            translate(&mut component, dx, dy);
                            apply(&mut component, &m);
                        } else {
                            apply(&mut component, &m);
                            translate(&mut component, dx, dy);
                        }
                    }
                }
            } else {
                // point-matching: align component point arg2 onto parent point arg1
                if let Some(m) = transform {
                    apply(&mut component, &m);
                }
                let parent_flat: Vec<Point> =
                    contours.iter().flatten().copied().collect();
                let child_flat: Vec<Point> = component.iter().flatten().copied().collect();
                let p1 = parent_flat
                    .get(arg1 as usize)
                    .ok_or_else(|| glyph_err(format!("anchor point {arg1} out of range")))?;
                let p2 = child_flat
                    .get(arg2 as usize)
                    .ok_or_else(|| glyph_err(format!("component point {arg2} out of range")))?;
                let (dx, dy) = (p1.x - p2.x, p1.y - p2.y);
                translate(&mut component, dx, dy);
            }
            contours.extend(component);
            if flags & MORE_COMPONENTS == 0 {
                break;
            }
        }
        Ok(contours)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(name: &str) -> Vec<u8> {
        let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
        std::fs::read(path).unwrap()
    }

    #[test]
    fn empty_bytes_is_malformed() {
        assert!(matches!(parse_font(&[]), Err(FontError::MalformedFont(_))));
    }

    #[test]
    fn garbage_magic_is_malformed() {
        let bytes = [0xDEu8, 0xAD, 0xBE, 0xEF, 0, 0, 0, 0, 0, 0, 0, 0];
        assert!(matches!(parse_font(&bytes), Err(FontError::MalformedFont(_))));
    }

    #[test]
    fn triangle_fixture_parses() {
        let font = parse_font(&fixture("triangle.ttf")).unwrap();
        assert_eq!(font.num_glyphs, 2);
        assert_eq!(font.units_per_em, 1000);
        assert_eq!(font.char_to_glyph('A').unwrap(), Some(1));
        assert_eq!(font.char_to_glyph('Z').unwrap(), None);
        assert_eq!(font.list_codepoints().unwrap(), vec!['A']);
    }

    #[test]
    fn triangle_outline() {
        let font = parse_font(&fixture("triangle.ttf")).unwrap();
        let outline = font.glyph_outline(1).unwrap();
        assert_eq!(outline.contours.len(), 1);
        let c = &outline.contours[0];
        assert_eq!(c.len(), 3);
        assert!(c.iter().all(|p| p.on_curve));
        assert_eq!((c[0].x, c[0].y), (100.0, 0.0));
        assert_eq!((c[1].x, c[1].y), (500.0, 800.0));
        assert_eq!((c[2].x, c[2].y), (900.0, 0.0));
    }

    #[test]
    fn notdef_is_empty() {
        let font = parse_font(&fixture("triangle.ttf")).unwrap();
        let outline = font.glyph_outline(0).unwrap();
        assert!(outline.contours.is_empty());
    }

    #[test]
    fn glyph_id_out_of_range_rejected() {
        let font = parse_font(&fixture("triangle.ttf")).unwrap();
        assert!(matches!(
            font.glyph_outline(2),
            Err(FontError::GlyphOutOfRange(2, 2))
        ));
    }

    #[test]
    fn format12_supplementary_plane_mapping() {
        let font = parse_font(&fixture("curves.ttf")).unwrap();
        let ring = char::from_u32(0x10400).unwrap();
        assert_eq!(font.char_to_glyph(ring).unwrap(), Some(3));
        let cps = font.list_codepoints().unwrap();
        assert_eq!(cps, vec!['B', 'C', ring]);
    }

    #[test]
    fn composite_translation_shifts_points() {
        let font = parse_font(&fixture("composite.ttf")).unwrap();
        let base = font.glyph_outline(1).unwrap();
        let shifted = font.glyph_outline(2).unwrap();
        assert_eq!(base.contours.len(), shifted.contours.len());
        for (cb, cs) in base.contours.iter().zip(&shifted.contours) {
            for (pb, ps) in cb.iter().zip(cs) {
                assert_eq!(ps.x, pb.x + 100.0);
                assert_eq!(ps.y, pb.y);
                assert_eq!(ps.on_curve, pb.on_curve);
            }
        }
    }

    #[test]
    fn composite_scaled_component() {
        let font = parse_font(&fixture("composite.ttf")).unwrap();
        let doubled = font.glyph_outline(3).unwrap();
        assert_eq!(doubled.contours.len(), 2);
        // second component is the base at 0.5 scale, offset (500, 0)
        let c = &doubled.contours[1];
        assert_eq!((c[0].x, c[0].y), (500.0, 0.0));
        assert_eq!((c[1].x, c[1].y), (600.0, 200.0));
        assert_eq!((c[2].x, c[2].y), (700.0, 0.0));
    }

    #[test]
    fn parse_is_deterministic() {
        let bytes = fixture("curves.ttf");
        let a = parse_font(&bytes).unwrap();
        let b = parse_font(&bytes).unwrap();
        assert_eq!(a.num_glyphs, b.num_glyphs);
        for gid in 0..a.num_glyphs {
            assert_eq!(
                a.glyph_outline(gid).unwrap().contours,
                b.glyph_outline(gid).unwrap().contours
            );
        }
    }

    #[test]
    fn all_off_curve_contour_survives() {
        let font = parse_font(&fixture("curves.ttf")).unwrap();
        let blob = font.glyph_outline(2).unwrap();
        assert_eq!(blob.contours.len(), 1);
        assert!(blob.contours[0].iter().all(|p| !p.on_curve));
    }
}
