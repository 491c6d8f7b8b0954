//! Seeded synthetic skull slices.
//!
//! Each image is a noisy bright annulus (the calvarium) around a mid-grey
//! interior on a dark background. Every fracture type has its own
//! rendering at its own location on the ring, so label sets are
//! recoverable from pixels:
//!
//! | label                  | rendering                                         | where          |
//! |------------------------|---------------------------------------------------|----------------|
//! | `linear`               | one thin radial gap across the ring               | upper right    |
//! | `depressed`            | inward dent of the ring                           | left           |
//! | `linear_non_depressed` | one thin oblique gap, ring otherwise intact       | upper left     |
//! | `facial`               | outward-displaced bone segment, gaps at its ends  | bottom third   |
//! | `comminuted`           | four gaps radiating from one impact point         | top            |
//!
//! Image `i` with `i % 6 == 0` is intact (`not_fractured`). Otherwise its
//! first fracture type is `TYPES[i % 6 - 1]` (round-robin) and a second,
//! different type is added with probability 1/2.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use image::{GrayImage, Luma};

use crate::data::labels::{write_labels_csv, LabelFile, LabelMatrix, FRACTURE, NOT_FRACTURED, N_LABELS};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const SYNTH_SIZE: u32 = 200;

const LINEAR: usize = 2;
const DEPRESSED: usize = 3;
const LINEAR_NON_DEPRESSED: usize = 4;
const FACIAL: usize = 5;
const COMMINUTED: usize = 6;
const TYPES: [usize; 5] = [LINEAR, DEPRESSED, LINEAR_NON_DEPRESSED, FACIAL, COMMINUTED];

const CENTRE: f64 = 100.0;
const OUTER_RADIUS: f64 = 78.0;
const THICKNESS: f64 = 14.0;

const BACKGROUND: f64 = 12.0;
const INTERIOR: f64 = 60.0;
const BONE: f64 = 200.0;
const GAP: f64 = 22.0;

/// Label rows for `n` images, following the documented schedule.
pub fn synthetic_labels(n: usize, rng: &mut Rng) -> LabelMatrix {
    let mut m = LabelMatrix::empty(N_LABELS);
    for i in 0..n {
        let mut row = [0u8; N_LABELS];
        let slot = i % 6;
        if slot == 0 {
            row[NOT_FRACTURED] = 1;
        } else {
            let first = TYPES[slot - 1];
            row[FRACTURE] = 1;
            row[first] = 1;
            if rng.bernoulli(0.5) {
                let others: Vec<usize> = TYPES.iter().copied().filter(|&t| t != first).collect();
                row[others[rng.below(others.len())]] = 1;
            }
        }
        m.push_row(&row).expect("constructed rows are binary");
    }
    m
}

fn angle_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    if d > PI {
        d - 2.0 * PI
    } else {
        d
    }
}

/// Distance from `p` to the segment `a`–`b`.
fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let t = (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / (vx * vx + vy * vy)).clamp(0.0, 1.0);
    let (qx, qy) = (a.0 + t * vx, a.1 + t * vy);
    ((p.0 - qx).powi(2) + (p.1 - qy).powi(2)).sqrt()
}

fn polar(r: f64, theta: f64) -> (f64, f64) {
    (CENTRE + r * theta.cos(), CENTRE + r * theta.sin())
}

/// Renders one 200×200 grayscale slice for a 7-column label row.
pub fn render_slice(labels: &[u8], rng: &mut Rng) -> GrayImage {
    let jitter = |rng: &mut Rng| rng.uniform(-2.0, 2.0).to_radians();
    let has = |t: usize| labels.get(t) == Some(&1);

    let linear_at = (-30f64).to_radians() + jitter(rng);
    let dent_at = PI + jitter(rng);
    let oblique_at = (-150f64).to_radians() + jitter(rng);
    let facial_at = PI / 2.0 + jitter(rng);
    let impact_at = -PI / 2.0 + jitter(rng);
    let gain = rng.uniform(0.98, 1.02);

    let mut segments: Vec<((f64, f64), (f64, f64), f64)> = Vec::new();
    if has(LINEAR) {
        segments.push((polar(OUTER_RADIUS - THICKNESS - 4.0, linear_at), polar(OUTER_RADIUS + 4.0, linear_at), 3.5));
    }
    if has(LINEAR_NON_DEPRESSED) {
        let mid = polar(OUTER_RADIUS - THICKNESS / 2.0, oblique_at);
        let dir = oblique_at + 35f64.to_radians();
        let (dx, dy) = (dir.cos() * 16.0, dir.sin() * 16.0);
        segments.push(((mid.0 - dx, mid.1 - dy), (mid.0 + dx, mid.1 + dy), 3.5));
    }
    if has(COMMINUTED) {
        let p = polar(OUTER_RADIUS - THICKNESS / 2.0, impact_at);
        for spread in [-55f64, -18.0, 18.0, 55.0] {
            let dir = impact_at + PI + spread.to_radians();
            segments.push((p, (p.0 + 24.0 * dir.cos(), p.1 + 24.0 * dir.sin()), 1.8));
        }
    }
    let facial_half = 12f64.to_radians();
    if has(FACIAL) {
        for side in [-1.0, 1.0] {
            let a = facial_at + side * facial_half;
            segments.push((polar(OUTER_RADIUS - THICKNESS - 2.0, a), polar(OUTER_RADIUS + 12.0, a), 2.0));
        }
    }

    let dent_half = 22f64.to_radians();
    GrayImage::from_fn(SYNTH_SIZE, SYNTH_SIZE, |x, y| {
        let p = (x as f64 + 0.5, y as f64 + 0.5);
        let (dx, dy) = (p.0 - CENTRE, p.1 - CENTRE);
        let r = (dx * dx + dy * dy).sqrt();
        let theta = dy.atan2(dx);

        let mut shift = 0.0;
        if has(DEPRESSED) {
            let d = angle_diff(theta, dent_at).abs();
            if d < dent_half {
                shift -= 14.0 * (0.5 * PI * d / dent_half).cos().powi(2);
            }
        }
        if has(FACIAL) && angle_diff(theta, facial_at).abs() < facial_half {
            shift += 9.0;
        }
        let outer = OUTER_RADIUS + shift;
        let inner = outer - THICKNESS;

        let (mut value, noise) = if r < inner {
            (INTERIOR, 5.0)
        } else if r <= outer {
            (BONE, 8.0)
        } else {
            (BACKGROUND, 4.0)
        };
        if r >= inner - 4.0 && segments.iter().any(|&(a, b, hw)| segment_distance(p, a, b) < hw) {
            value = GAP;
        }
        let v = gain * value + rng.normal(0.0, noise);
        Luma([v.round().clamp(0.0, 255.0) as u8])
    })
}

/// Writes `n` slices plus `labels.csv` into `out_dir` and returns the label table.
pub fn generate_synthetic(n: usize, seed: u64, out_dir: &Path) -> Result<LabelFile> {
    if n == 0 {
        return Err(Error::invalid("synthetic dataset size must be at least 1"));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rng = Rng::new(seed);
    let labels = synthetic_labels(n, &mut rng);
    let mut filenames = Vec::with_capacity(n);
    let mut study_ids = Vec::with_capacity(n);
    for i in 0..n {
        let name = format!("synth_{i:05}.png");
        let img = render_slice(labels.row(i), &mut rng);
        let path = out_dir.join(&name);
        img.save(&path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(&path, io),
            other => Error::Ingestion {
                path: path.clone(),
                reason: other.to_string(),
            },
        })?;
        filenames.push(name);
        study_ids.push(format!("study_{i:05}"));
    }
    let file = LabelFile {
        labels,
        filenames,
        study_ids,
    };
    write_labels_csv(&out_dir.join("labels.csv"), &file)?;
    Ok(file)
}
