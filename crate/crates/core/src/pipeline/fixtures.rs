//! Bundled test data: cartoon expression faces in FER CSV layout and
//! stand-in deep features for them.
//!
//! The deep features come from a fixed, randomly initialized two-layer
//! convolutional network (seeded filters, ReLU, average pooling). They are a
//! placeholder for real pretrained activations so the full pipeline can run
//! without the external exporter; they are not meant to be good features.

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;

use crate::dataset::{write_fer_csv, GrayImage, LabeledDataset, Split, IMAGE_SIDE, NUM_CLASSES};
use crate::error::{AtStage, Error, Result, Stage};
use crate::fusion::{write_deep_features, DeepFeatureTable};
use crate::numerics::Matrix;
use crate::rng::{standard_normal, Rng, SeedStream};

pub const FIXTURE_SEED: u64 = 2024;
pub const FIXTURE_PER_CLASS: usize = 25;
/// Of each class's samples, this many go to the test split.
pub const FIXTURE_TEST_PER_CLASS: usize = 5;

/// Geometry and local detail of one expression. Detail strengths are in [0, 1].
#[derive(Clone, Copy)]
struct Expression {
    /// Positive lowers the inner brow ends.
    brow_tilt: f64,
    brow_raise: f64,
    /// Multiplier on the eye height.
    eye_open: f64,
    mouth_curve: f64,
    mouth_open: f64,
    mouth_asym: f64,
    teeth: f64,
    forehead_lines: f64,
    frown_lines: f64,
    nose_wrinkle: f64,
    crow_feet: f64,
    sclera: f64,
    dimple: f64,
}

const NEUTRAL: Expression = Expression {
    brow_tilt: 0.0,
    brow_raise: 0.0,
    eye_open: 1.0,
    mouth_curve: 0.0,
    mouth_open: 0.0,
    mouth_asym: 0.0,
    teeth: 0.0,
    forehead_lines: 0.0,
    frown_lines: 0.0,
    nose_wrinkle: 0.0,
    crow_feet: 0.0,
    sclera: 0.0,
    dimple: 0.0,
};

/// FER class order: neutral, happiness, surprise, sadness, anger, disgust,
/// fear, contempt.
const EXPRESSIONS: [Expression; NUM_CLASSES] = [
    NEUTRAL,
    Expression {
        brow_raise: 0.5,
        eye_open: 0.8,
        mouth_curve: 0.05,
        mouth_open: 0.35,
        teeth: 1.0,
        crow_feet: 1.0,
        ..NEUTRAL
    },
    Expression {
        brow_raise: 3.5,
        eye_open: 1.6,
        mouth_open: 1.2,
        forehead_lines: 1.0,
        sclera: 1.0,
        ..NEUTRAL
    },
    Expression {
        brow_tilt: -0.5,
        brow_raise: 1.0,
        eye_open: 0.7,
        mouth_curve: -0.04,
        frown_lines: 0.5,
        ..NEUTRAL
    },
    Expression {
        brow_tilt: 0.5,
        brow_raise: -2.0,
        eye_open: 0.7,
        mouth_curve: -0.015,
        frown_lines: 1.0,
        ..NEUTRAL
    },
    Expression {
        brow_tilt: 0.3,
        brow_raise: -1.0,
        eye_open: 0.5,
        mouth_curve: -0.03,
        mouth_open: 0.25,
        teeth: 0.5,
        nose_wrinkle: 1.0,
        ..NEUTRAL
    },
    Expression {
        brow_tilt: -0.3,
        brow_raise: 2.5,
        eye_open: 1.4,
        mouth_curve: -0.02,
        mouth_open: 0.7,
        teeth: 0.3,
        forehead_lines: 0.6,
        sclera: 1.0,
        ..NEUTRAL
    },
    Expression {
        eye_open: 0.9,
        mouth_curve: 0.01,
        mouth_asym: 0.04,
        dimple: 1.0,
        ..NEUTRAL
    },
];

struct FaceParams {
    cx: f64,
    cy: f64,
    scale: f64,
    skin: f64,
    background: f64,
    light: f64,
    expr: Expression,
    noise: f64,
    /// Freckles and moles in face coordinates: (x, y, radius, darkness).
    marks: Vec<(f64, f64, f64, f64)>,
    hair: f64,
}

fn draw_params(label: usize, rng: &mut Rng) -> FaceParams {
    let base = EXPRESSIONS[label];
    let k = 0.6 + 0.6 * rng.random::<f64>();
    let mut jitter = |v: f64, sd: f64| v * k + sd * standard_normal(rng);
    let detail = |v: f64, r: f64| ((v * k) * (0.8 + 0.4 * r)).clamp(0.0, 1.0);
    let mut e = Expression {
        brow_tilt: jitter(base.brow_tilt, 0.08),
        brow_raise: jitter(base.brow_raise, 0.4),
        eye_open: 1.0 + (base.eye_open - 1.0) * k,
        mouth_curve: jitter(base.mouth_curve, 0.006),
        mouth_open: jitter(base.mouth_open, 0.1).max(0.0),
        mouth_asym: base.mouth_asym * k,
        ..base
    };
    e.eye_open *= 1.0 + 0.1 * standard_normal(rng);
    for v in [
        &mut e.teeth,
        &mut e.forehead_lines,
        &mut e.frown_lines,
        &mut e.nose_wrinkle,
        &mut e.crow_feet,
        &mut e.sclera,
        &mut e.dimple,
    ] {
        *v = detail(*v, rng.random());
    }
    FaceParams {
        cx: 24.0 + 1.5 * standard_normal(rng),
        cy: 25.0 + 1.5 * standard_normal(rng),
        scale: 1.0 + 0.06 * standard_normal(rng),
        skin: 0.55 + 0.2 * rng.random::<f64>(),
        background: 0.1 + 0.3 * rng.random::<f64>(),
        light: 0.15 * standard_normal(rng),
        expr: e,
        noise: 0.02 + 0.02 * rng.random::<f64>(),
        marks: (0..12)
            .map(|_| {
                let (x, y) = (24.0 * rng.random::<f64>() - 12.0, 30.0 * rng.random::<f64>() - 16.0);
                (x, y, 1.2 + 0.8 * rng.random::<f64>(), 0.35 + 0.25 * rng.random::<f64>())
            })
            .collect(),
        hair: 0.05 + 0.15 * rng.random::<f64>(),
    }
}

/// 1 inside (x < 0), 0 outside, with a ramp of width `edge`.
fn coverage(edge: f64, x: f64) -> f64 {
    (0.5 - x / edge).clamp(0.0, 1.0)
}

fn segment_distance(px: f64, py: f64, (ax, ay): (f64, f64), (bx, by): (f64, f64)) -> f64 {
    let (dx, dy) = (bx - ax, by - ay);
    let t = (((px - ax) * dx + (py - ay) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    (px - ax - t * dx).hypot(py - ay - t * dy)
}

/// Blends `v` toward `ink` along a stroke of half-width `half`.
fn stroke(v: &mut f64, dist: f64, half: f64, ink: f64, strength: f64) {
    let w = coverage(1.0, dist - half) * strength;
    *v = *v * (1.0 - w) + ink * w;
}

fn shade_pixel(p: &FaceParams, fx: f64, fy: f64) -> f64 {
    let e = &p.expr;
    let mut v = p.background;
    let r = ((fx / 17.0).powi(2) + (fy / 21.0).powi(2)).sqrt();
    let face = coverage(1.0, (r - 1.0) * 17.0);
    let skin = p.skin * (1.0 + p.light * fx / 17.0);
    v = v * (1.0 - face) + skin * face;
    // Fringe of hair strands across the top of the face.
    let hairline = -17.0 + 1.5 * (fx * 1.3).sin().abs();
    if r < 1.05 && fy < hairline {
        let strand = 0.5 + 0.5 * (fx * 2.2 + fy * 0.4).sin();
        v = p.hair * (0.7 + 0.6 * strand);
    }
    let line_ink = skin * 0.55;
    for &(mx, my, mr, dark) in &p.marks {
        if r < 0.95 {
            stroke(&mut v, (fx - mx).hypot(fy - my), mr - 0.5, skin * (1.0 - dark), 1.0);
        }
    }

    if e.forehead_lines > 0.0 {
        for (i, y0) in [-15.5, -17.5, -19.5].into_iter().enumerate() {
            let half_width = 7.0 - i as f64;
            if fx.abs() < half_width {
                let yc = y0 - e.brow_raise * 0.3 + 0.04 * fx * fx;
                stroke(&mut v, (fy - yc).abs(), 0.3, line_ink, e.forehead_lines);
            }
        }
    }
    if e.frown_lines > 0.0 {
        for side in [-1.0, 1.0] {
            let d = segment_distance(fx, fy, (side * 1.6, -12.0), (side * 1.1, -7.5));
            stroke(&mut v, d, 0.35, line_ink, e.frown_lines);
        }
    }
    for side in [-1.0, 1.0] {
        let ex = fx - side * 7.5;
        let ey = fy + 5.0;
        let er = ((ex / 3.2).powi(2) + (ey / (1.6 * e.eye_open)).powi(2)).sqrt();
        let w = coverage(1.0, (er - 1.0) * 2.0);
        // Visible sclera turns the eye into a bright ring around a dark iris.
        let iris = coverage(1.0, ex.hypot(ey) - 1.5);
        let eye = 0.08 * (1.0 - e.sclera) + (0.92 * (1.0 - iris) + 0.05 * iris) * e.sclera;
        v = v * (1.0 - w) + eye * w;
        let by = -10.0 - e.brow_raise + e.brow_tilt * (-side * ex).clamp(-4.0, 4.0) * 0.8;
        if ex.abs() < 4.5 {
            stroke(&mut v, (fy - by).abs(), 0.9, 0.15, 1.0);
        }
        if e.crow_feet > 0.0 {
            let o = (side * 11.2, -5.0);
            for dy in [-1.6, 0.0, 1.6] {
                let d = segment_distance(fx, fy, o, (side * 13.6, -5.0 + dy * 1.4));
                stroke(&mut v, d, 0.25, line_ink, e.crow_feet);
            }
        }
    }
    if fx.abs() < 1.2 && (-3.0..5.0).contains(&fy) {
        v *= 0.88;
    }
    if e.nose_wrinkle > 0.0 && fx.abs() < 5.0 && (-4.0..0.0).contains(&fy) {
        v *= 1.0 - 0.25 * e.nose_wrinkle * (0.5 + 0.5 * (fy * 2.4).sin());
    }
    let my = fy - 10.0;
    if fx.abs() < 7.0 {
        let centre = -e.mouth_curve * fx * fx + e.mouth_asym * fx.abs() * 3.0 * (fx / 7.0);
        let half = 0.7 + 1.8 * e.mouth_open * (1.0 - (fx / 7.0).powi(2));
        let d = (my - centre).abs() - half;
        let inside = coverage(1.0, d);
        let mut ink = 0.1;
        // Upper teeth: a bright band with dark gaps in the upper half of the opening.
        if e.teeth > 0.0 && half > 1.2 && my < centre && (fx * 1.25).rem_euclid(2.0) > 0.35 {
            ink = 0.1 + 0.75 * e.teeth;
        }
        v = v * (1.0 - inside) + ink * inside;
    }
    if e.dimple > 0.0 {
        let tip = (7.6, 10.0 - e.mouth_asym * 7.0 * 3.0);
        let d = segment_distance(fx, fy, tip, (8.6, tip.1 - 1.6));
        stroke(&mut v, d, 0.35, line_ink, e.dimple);
    }
    v
}

fn render(p: &FaceParams, rng: &mut Rng) -> GrayImage {
    let mut img = vec![0.0; IMAGE_SIDE * IMAGE_SIDE];
    for y in 0..IMAGE_SIDE {
        for x in 0..IMAGE_SIDE {
            let (fx, fy) = ((x as f64 - p.cx) / p.scale, (y as f64 - p.cy) / p.scale);
            let v = shade_pixel(p, fx, fy) + p.noise * standard_normal(rng);
            // 8-bit quantization, as in a real CSV dataset
            img[y * IMAGE_SIDE + x] = (v.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        }
    }
    GrayImage::new(IMAGE_SIDE, IMAGE_SIDE, img).expect("valid image")
}

/// `per_class` faces per class, the last `test_per_class` of each class in
/// the test split. Rows are interleaved by class.
pub fn synthetic_faces(per_class: usize, test_per_class: usize, seed: u64) -> LabeledDataset {
    let stream = SeedStream::new(seed).child("faces");
    let rows: Vec<(GrayImage, usize, Split)> = (0..per_class * NUM_CLASSES)
        .into_par_iter()
        .map(|i| {
            let label = i % NUM_CLASSES;
            let k = i / NUM_CLASSES;
            let mut rng = stream.indexed(i as u64).to_rng();
            let p = draw_params(label, &mut rng);
            let split = if k >= per_class - test_per_class { Split::Test } else { Split::Train };
            (render(&p, &mut rng), label, split)
        })
        .collect();
    let mut ds = LabeledDataset::default();
    for (img, l, s) in rows {
        ds.images.push(img);
        ds.labels.push(l);
        ds.split.push(s);
    }
    ds
}

struct ConvLayer {
    /// out × in × k × k
    weights: Vec<f64>,
    bias: Vec<f64>,
    cin: usize,
    cout: usize,
    k: usize,
}

impl ConvLayer {
    fn random(cin: usize, cout: usize, k: usize, rng: &mut Rng) -> Self {
        let scale = (2.0 / (cin * k * k) as f64).sqrt();
        let mut weights: Vec<f64> = (0..cout * cin * k * k).map(|_| scale * standard_normal(rng)).collect();
        // zero-mean filters respond to structure, not brightness
        for f in weights.chunks_mut(cin * k * k) {
            let m = f.iter().sum::<f64>() / f.len() as f64;
            for v in f {
                *v -= m;
            }
        }
        ConvLayer {
            weights,
            bias: (0..cout).map(|_| 0.01 * standard_normal(rng)).collect(),
            cin,
            cout,
            k,
        }
    }

    /// Valid convolution + ReLU over `cin` planes of `h × w`.
    fn forward(&self, input: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
        let (oh, ow) = (h - self.k + 1, w - self.k + 1);
        let mut out = vec![0.0; self.cout * oh * ow];
        for o in 0..self.cout {
            for y in 0..oh {
                for x in 0..ow {
                    let mut s = self.bias[o];
                    for c in 0..self.cin {
                        for dy in 0..self.k {
                            let wrow = &self.weights[((o * self.cin + c) * self.k + dy) * self.k..][..self.k];
                            let irow = &input[(c * h + y + dy) * w + x..][..self.k];
                            s += wrow.iter().zip(irow).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                    out[(o * oh + y) * ow + x] = s.max(0.0);
                }
            }
        }
        (out, oh, ow)
    }
}

fn avg_pool(input: &[f64], c: usize, h: usize, w: usize, cells: usize) -> (Vec<f64>, usize, usize) {
    let mut out = vec![0.0; c * cells * cells];
    for ch in 0..c {
        for gy in 0..cells {
            for gx in 0..cells {
                let (y0, y1) = (gy * h / cells, (gy + 1) * h / cells);
                let (x0, x1) = (gx * w / cells, (gx + 1) * w / cells);
                let mut s = 0.0;
                for y in y0..y1 {
                    for x in x0..x1 {
                        s += input[(ch * h + y) * w + x];
                    }
                }
                out[(ch * cells + gy) * cells + gx] = s / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
    }
    (out, cells, cells)
}

/// Fixed random network: conv5×5(16) → ReLU → pool to 11×11 → conv3×3(64) →
/// ReLU → pool to 4×4, giving 1024 features per image.
pub struct SurrogateNet {
    l1: ConvLayer,
    l2: ConvLayer,
}

pub const SURROGATE_DIM: usize = 64 * 16;

impl SurrogateNet {
    pub fn new(seed: u64) -> Self {
        let mut rng = SeedStream::new(seed).rng("surrogate-net");
        SurrogateNet {
            l1: ConvLayer::random(1, 16, 5, &mut rng),
            l2: ConvLayer::random(16, 64, 3, &mut rng),
        }
    }

    pub fn embed(&self, img: &GrayImage) -> Vec<f64> {
        let (a, h, w) = self.l1.forward(img.pixels(), img.height(), img.width());
        let (a, h, w) = avg_pool(&a, 16, h, w, 11);
        let (a, h, w) = self.l2.forward(&a, h, w);
        avg_pool(&a, 64, h, w, 4).0
    }
}

pub fn surrogate_deep_features(ds: &LabeledDataset, seed: u64) -> DeepFeatureTable {
    let net = SurrogateNet::new(seed);
    let rows: Vec<Vec<f64>> = ds.images.par_iter().map(|im| net.embed(im)).collect();
    let n = rows.len();
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    let m = Matrix::from_vec(n, SURROGATE_DIM, data).expect("finite activations");
    DeepFeatureTable::new((0..n).map(|i| i.to_string()).collect(), m).expect("unique ids")
}

pub const FIXTURE_CSV: &str = "fer_tiny.csv";
pub const FIXTURE_DEEP: &str = "fer_tiny_deep.hyf";

/// Writes the tiny dataset, its deep features and example configs into `dir`.
pub fn export_fixtures(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ds = synthetic_faces(FIXTURE_PER_CLASS, FIXTURE_TEST_PER_CLASS, FIXTURE_SEED);
    let csv_path = dir.join(FIXTURE_CSV);
    let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_fer_csv(&ds, std::io::BufWriter::new(f)).at(Stage::Report)?;
    let table = surrogate_deep_features(&ds, FIXTURE_SEED);
    write_deep_features(&table, dir.join(FIXTURE_DEEP)).at(Stage::Report)?;
    let mut cfg = super::config::RunConfig {
        dataset: super::config::DatasetSpec::FerCsv {
            path: FIXTURE_CSV.into(),
        },
        deep_features: Some(FIXTURE_DEEP.into()),
        out: "runs/fer_tiny".into(),
        ..Default::default()
    };
    let p = dir.join("fer_tiny_config.json");
    std::fs::write(&p, cfg.to_json()).map_err(|e| Error::io(&p, e))?;
    cfg.dataset = super::config::DatasetSpec::SignalInNoise {
        n: 600,
        seed: 0,
        test_every: 5,
    };
    cfg.deep_features = None;
    cfg.sources = vec![super::config::FeatureSource::Pixels];
    cfg.out = "runs/signal_in_noise".into();
    let p = dir.join("signal_in_noise_config.json");
    std::fs::write(&p, cfg.to_json()).map_err(|e| Error::io(&p, e))?;
    Ok(())
}
