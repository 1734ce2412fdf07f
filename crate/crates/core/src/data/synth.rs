//! Synthetic signature corpus for desk-scale runs.
//!
//! Every person owns a style: a smooth Catmull-Rom curve through seeded
//! control points. Samples are that curve, perturbed and rendered
//! anti-aliased in dark ink on a white canvas:
//!
//! - genuine: own style, small control-point jitter, fluent stroke;
//! - simple forgery: another person's style, small jitter;
//! - skilled forgery: own style, larger jitter;
//! - opposite-hand forgery: own style, larger jitter plus shear and vertical
//!   rescaling.
//!
//! Forgeries of every kind are drawn with a slower, shakier hand: a heavier
//! stroke with a perpendicular tremor. That is what makes the genuine/forged
//! decision learnable without knowing the claimed writer.

use std::path::{Path, PathBuf};

use crate::data::catalog::{DatasetCatalog, SampleKind, SampleRef};
use crate::data::image::write_pgm;
use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const MANIFEST_NAME: &str = "dataset.manifest";

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub persons: usize,
    pub genuine: usize,
    pub simple: usize,
    pub skilled: usize,
    pub opposite: usize,
    pub height: usize,
    pub width: usize,
    pub control_points: usize,
    /// Stroke width in pixels for genuine samples.
    pub stroke_width: f64,
    /// Control-point jitter (fraction of the canvas) for genuine and simple samples.
    pub genuine_jitter: f64,
    /// Control-point jitter for skilled and opposite-hand forgeries.
    pub skilled_jitter: f64,
    /// Tremor amplitude of forged strokes, in pixels.
    pub tremor: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::new(4, 54, 72, 0)
    }
}

impl SynthConfig {
    /// Per-kind counts (27, 36, 6, 3): enough for the 25 + 25 training draw.
    pub fn new(persons: usize, height: usize, width: usize, seed: u64) -> Self {
        let scale = height as f64 / 54.0;
        Self {
            persons,
            genuine: 27,
            simple: 36,
            skilled: 6,
            opposite: 3,
            height,
            width,
            control_points: 8,
            stroke_width: (1.6 * scale).max(1.0),
            genuine_jitter: 0.015,
            skilled_jitter: 0.045,
            tremor: (0.9 * scale).max(0.6),
            seed,
        }
    }

    pub fn count(&self, kind: SampleKind) -> usize {
        match kind {
            SampleKind::Genuine => self.genuine,
            SampleKind::Simple => self.simple,
            SampleKind::Skilled => self.skilled,
            SampleKind::Opposite => self.opposite,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.persons == 0 || self.height < 8 || self.width < 8 {
            return Err(Error::Config(
                "synthetic corpus needs at least one person and an 8x8 canvas".into(),
            ));
        }
        if self.simple > 0 && self.persons < 2 {
            return Err(Error::Config(
                "simple forgeries borrow another person's style; need at least 2 persons".into(),
            ));
        }
        if self.control_points < 2 {
            return Err(Error::Config("need at least 2 control points".into()));
        }
        Ok(())
    }
}

pub fn person_id(index: usize) -> String {
    format!("p{index:03}")
}

fn kind_stream(kind: SampleKind) -> u64 {
    match kind {
        SampleKind::Genuine => 0,
        SampleKind::Simple => 1,
        SampleKind::Skilled => 2,
        SampleKind::Opposite => 3,
    }
}

/// Control points of a person's style, in unit canvas coordinates.
fn style(cfg: &SynthConfig, person: usize) -> Vec<(f64, f64)> {
    let mut rng = Rng::new(cfg.seed).fork(0).fork(person as u64);
    let k = cfg.control_points;
    (0..k)
        .map(|i| {
            let x = 0.1 + 0.8 * i as f64 / (k - 1) as f64 + rng.uniform(-0.05, 0.05);
            let y = rng.uniform(0.2, 0.8);
            (x, y)
        })
        .collect()
}

fn catmull_rom(p: &[(f64, f64)], steps: usize) -> Vec<(f64, f64)> {
    let at = |i: isize| p[i.clamp(0, p.len() as isize - 1) as usize];
    let mut out = Vec::with_capacity(p.len() * steps);
    for i in 0..p.len() as isize - 1 {
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            let (t2, t3) = (t * t, t * t * t);
            let blend = |a: f64, b: f64, c: f64, d: f64| {
                0.5 * (2.0 * b + (c - a) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2 + (3.0 * b - a - 3.0 * c + d) * t3)
            };
            out.push((blend(p0.0, p1.0, p2.0, p3.0), blend(p0.1, p1.1, p2.1, p3.1)));
        }
    }
    out.push(*p.last().expect("at least two points"));
    out
}

/// Renders sample `index` of `kind` for `person`. Pure in its arguments.
pub fn render_sample(cfg: &SynthConfig, person: usize, kind: SampleKind, index: usize) -> Result<Tensor<f32>> {
    cfg.validate()?;
    let mut rng = Rng::new(cfg.seed)
        .fork(1)
        .fork(person as u64)
        .fork(kind_stream(kind))
        .fork(index as u64);
    let owner = if kind == SampleKind::Simple {
        (person + 1 + rng.below(cfg.persons - 1)) % cfg.persons
    } else {
        person
    };
    let forged = kind != SampleKind::Genuine;
    let jitter = match kind {
        SampleKind::Genuine | SampleKind::Simple => cfg.genuine_jitter,
        SampleKind::Skilled => cfg.skilled_jitter,
        SampleKind::Opposite => cfg.skilled_jitter * 1.5,
    };
    let (shear, y_scale) = if kind == SampleKind::Opposite {
        (rng.uniform(-0.3, 0.3), rng.uniform(0.7, 1.3))
    } else {
        (0.0, 1.0)
    };
    let (dx, dy) = (0.02 * rng.normal(), 0.02 * rng.normal());

    let (h, w) = (cfg.height as f64, cfg.width as f64);
    let control: Vec<(f64, f64)> = style(cfg, owner)
        .into_iter()
        .map(|(x, y)| {
            let x = x + jitter * rng.normal() + dx;
            let y = y + jitter * rng.normal() + dy;
            let y = 0.5 + (y - 0.5) * y_scale;
            let x = x + shear * (y - 0.5);
            (x * (w - 1.0), y * (h - 1.0))
        })
        .collect();
    let mut path = catmull_rom(&control, 24);

    if forged {
        let amp = cfg.tremor * if kind == SampleKind::Opposite { 1.5 } else { 1.0 };
        let wavelength = rng.uniform(2.5, 4.0) * (h / 54.0).max(1.0);
        let phase = rng.uniform(0.0, std::f64::consts::TAU);
        let smooth = path.clone();
        let mut arc = 0.0;
        for i in 0..smooth.len() {
            let prev = smooth[i.saturating_sub(1)];
            let next = smooth[(i + 1).min(smooth.len() - 1)];
            if i > 0 {
                arc += ((smooth[i].0 - prev.0).powi(2) + (smooth[i].1 - prev.1).powi(2)).sqrt();
            }
            let (tx, ty) = (next.0 - prev.0, next.1 - prev.1);
            let norm = (tx * tx + ty * ty).sqrt().max(1e-9);
            let off = amp * (std::f64::consts::TAU * arc / wavelength + phase).sin();
            path[i] = (smooth[i].0 - off * ty / norm, smooth[i].1 + off * tx / norm);
        }
    }

    let half = 0.5 * cfg.stroke_width * if forged { 1.35 } else { 1.0 };
    let mut coverage = vec![0.0f64; cfg.height * cfg.width];
    for seg in path.windows(2) {
        let ((x0, y0), (x1, y1)) = (seg[0], seg[1]);
        let reach = half + 1.0;
        let r_lo = (y0.min(y1) - reach).floor().max(0.0) as usize;
        let r_hi = ((y0.max(y1) + reach).ceil().max(0.0) as usize).min(cfg.height - 1);
        let c_lo = (x0.min(x1) - reach).floor().max(0.0) as usize;
        let c_hi = ((x0.max(x1) + reach).ceil().max(0.0) as usize).min(cfg.width - 1);
        let (sx, sy) = (x1 - x0, y1 - y0);
        let len2 = (sx * sx + sy * sy).max(1e-12);
        for r in r_lo..=r_hi {
            for c in c_lo..=c_hi {
                let (px, py) = (c as f64, r as f64);
                let t = (((px - x0) * sx + (py - y0) * sy) / len2).clamp(0.0, 1.0);
                let d = ((px - x0 - t * sx).powi(2) + (py - y0 - t * sy).powi(2)).sqrt();
                let cov = (half + 0.5 - d).clamp(0.0, 1.0);
                let cell = &mut coverage[r * cfg.width + c];
                *cell = cell.max(cov);
            }
        }
    }
    let pixels = coverage.iter().map(|&c| (1.0 - 0.9 * c) as f32).collect();
    Tensor::from_vec(&[1, cfg.height, cfg.width], pixels)
}

/// Renders the corpus into `out_dir/images/` and writes `out_dir/dataset.manifest`.
pub fn synth_generate(cfg: &SynthConfig, out_dir: &Path, exec: &Executor) -> Result<DatasetCatalog> {
    cfg.validate()?;
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;

    let mut jobs = Vec::new();
    for person in 0..cfg.persons {
        for kind in SampleKind::ALL {
            for index in 0..cfg.count(kind) {
                jobs.push((person, kind, index));
            }
        }
    }
    let entries = exec.try_map(&jobs, |&(person, kind, index)| -> Result<SampleRef> {
        let id = person_id(person);
        let path: PathBuf = images.join(format!("{id}_{kind}_{index:02}.pgm"));
        write_pgm(&path, &render_sample(cfg, person, kind, index)?)?;
        Ok(SampleRef {
            path,
            person: id,
            kind,
        })
    })?;
    let catalog = DatasetCatalog::new(entries)?;
    let comments = [
        format!("seed = {}", cfg.seed),
        format!(
            "synthetic persons = {} canvas = {}x{} counts = {}/{}/{}/{}",
            cfg.persons, cfg.height, cfg.width, cfg.genuine, cfg.simple, cfg.skilled, cfg.opposite
        ),
    ];
    DatasetCatalog::write_annotated(&out_dir.join(MANIFEST_NAME), catalog.entries(), &comments)?;
    Ok(catalog)
}
