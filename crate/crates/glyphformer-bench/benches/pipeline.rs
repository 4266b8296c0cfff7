use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use glyphformer::font::parse_font;
use glyphformer::model::{forward, EncoderConfig, ModelParams};
use glyphformer::outline::{convert, Representation};
use glyphformer::token::{
    assemble_batch, encode_commands, QuantizerConfig, TokenSequence, TokenizerLimits,
};

fn fixture_bytes(name: &str) -> Vec<u8> {
    let path = format!(
        "{}/../glyphformer/tests/fixtures/{name}",
        env!("CARGO_MANIFEST_DIR")
    );
    std::fs::read(path).unwrap()
}

fn bench_parse(c: &mut Criterion) {
    let bytes = fixture_bytes("DejaVuSans.ttf");
    c.bench_function("parse_font_dejavu", |b| {
        b.iter(|| parse_font(std::hint::black_box(&bytes)).unwrap())
    });
}

fn bench_ladder(c: &mut Criterion) {
    let bytes = fixture_bytes("DejaVuSans.ttf");
    let font = parse_font(&bytes).unwrap();
    let outlines: Vec<_> = (0..font.num_glyphs.min(200))
        .filter_map(|gid| font.glyph_outline(gid).ok())
        .filter(|o| !o.is_empty())
        .collect();
    c.bench_function("convert_to_postscript_200_glyphs", |b| {
        b.iter(|| {
            for o in &outlines {
                let _ = convert(std::hint::black_box(o), Representation::PostScript);
            }
        })
    });
}

fn bench_forward(c: &mut Criterion) {
    let bytes = fixture_bytes("style_angular.ttf");
    let font = parse_font(&bytes).unwrap();
    let quant = QuantizerConfig::new(font.units_per_em as f64);
    let limits = TokenizerLimits::default();
    let seqs: Vec<TokenSequence> = (0..font.num_glyphs)
        .filter_map(|gid| font.glyph_outline(gid).ok())
        .filter(|o| !o.is_empty())
        .filter_map(|o| match convert(&o, Representation::PostScript).ok()? {
            glyphformer::outline::Converted::Commands(p) => {
                encode_commands(&p, &quant, &limits, 0).ok()
            }
            _ => None,
        })
        .take(32)
        .collect();
    let cfg = EncoderConfig::with_classes(4);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let params = ModelParams::init(&cfg, &quant, &limits, &mut rng);
    c.bench_function("encoder_forward_batch32", |b| {
        b.iter(|| {
            let (x, mask, _) = assemble_batch(std::hint::black_box(&seqs), &params.tables);
            forward(&x, &mask, &params, &cfg).unwrap()
        })
    });
}

criterion_group!(benches, bench_parse, bench_ladder, bench_forward);
criterion_main!(benches);
