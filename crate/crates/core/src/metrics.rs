//! Reconstruction quality: image error, object segmentation and matching
//! against ground truth.

use std::collections::VecDeque;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, EctError, Result};
use crate::grid::{Grid, PermittivityField};

/// `‖x - x_true‖ / ‖x_true‖`.
pub fn relative_image_error(x: &Array1<f64>, x_true: &Array1<f64>) -> Result<f64> {
    check_len(x_true.len(), x.len())?;
    let n = x_true.dot(x_true).sqrt();
    if n == 0.0 {
        return Err(EctError::Config("reference image is all zero".into()));
    }
    let d = x - x_true;
    Ok(d.dot(&d).sqrt() / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Objects are above the threshold.
    #[default]
    Bright,
    /// Objects are below the threshold.
    Dark,
}

/// Components smaller than this are treated as artifacts.
pub const MIN_OBJECT_PIXELS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectReport {
    pub label: usize,
    pub pixel_count: usize,
    pub mean_intensity: f64,
    /// (row, col) in lattice units.
    pub centroid: (f64, f64),
    pub matched_truth: Option<usize>,
    /// ROI indices of the member pixels.
    #[serde(skip)]
    pub pixels: Vec<usize>,
}

/// 4-connected components beyond `threshold`, largest first.
pub fn segment_objects(x: &Array1<f64>, grid: &Grid, threshold: f64, polarity: Polarity) -> Result<Vec<ObjectReport>> {
    check_len(grid.roi_len(), x.len())?;
    let n2 = grid.n2();
    let hit = |k: usize| match polarity {
        Polarity::Bright => x[k] > threshold,
        Polarity::Dark => x[k] < threshold,
    };
    let mut seen = vec![false; x.len()];
    let mut comps: Vec<Vec<usize>> = Vec::new();
    for start in 0..x.len() {
        if seen[start] || !hit(start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(k) = queue.pop_front() {
            comp.push(k);
            let p = grid.roi_pixels()[k];
            let (r, c) = (p / n2, p % n2);
            let nbs = [
                (r > 0).then(|| p - n2),
                (r + 1 < grid.n1()).then(|| p + n2),
                (c > 0).then(|| p - 1),
                (c + 1 < n2).then(|| p + 1),
            ];
            for q in nbs.into_iter().flatten() {
                if let Some(kq) = grid.roi_index(q) {
                    if !seen[kq] && hit(kq) {
                        seen[kq] = true;
                        queue.push_back(kq);
                    }
                }
            }
        }
        if comp.len() >= MIN_OBJECT_PIXELS {
            comp.sort_unstable();
            comps.push(comp);
        }
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    Ok(comps
        .into_iter()
        .enumerate()
        .map(|(label, pixels)| {
            let n = pixels.len() as f64;
            let (mut sr, mut sc, mut si) = (0.0, 0.0, 0.0);
            for &k in &pixels {
                let p = grid.roi_pixels()[k];
                sr += (p / n2) as f64;
                sc += (p % n2) as f64;
                si += x[k];
            }
            ObjectReport {
                label,
                pixel_count: pixels.len(),
                mean_intensity: si / n,
                centroid: (sr / n, sc / n),
                matched_truth: None,
                pixels,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthMatch {
    pub truth_label: usize,
    pub truth_area: usize,
    pub truth_permittivity: f64,
    pub recon_label: Option<usize>,
    pub recon_area: usize,
    /// `|area_recon - area_truth| / area_truth`; 1 when nothing matched.
    pub size_error: f64,
    pub recon_mean_intensity: Option<f64>,
    pub recon_permittivity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub threshold: f64,
    pub polarity: Polarity,
    pub truth_objects: Vec<ObjectReport>,
    pub recon_objects: Vec<ObjectReport>,
    pub matches: Vec<TruthMatch>,
    /// One reconstructed object matched by two or more truth objects.
    pub merged: bool,
    /// One truth object is the nearest for two or more reconstructed objects.
    pub split: bool,
    pub max_size_error: f64,
    pub relative_image_error: f64,
}

impl EvaluationReport {
    /// Every truth object found, each in its own reconstructed object.
    pub fn resolved(&self) -> bool {
        !self.merged && self.matches.iter().all(|m| m.recon_label.is_some())
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn nearest(target: (f64, f64), objs: &[ObjectReport]) -> Option<usize> {
    objs.iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| dist2(target, a.centroid).total_cmp(&dist2(target, b.centroid)))
        .map(|(i, _)| i)
}

/// Segments truth and reconstruction alike and matches every truth object to
/// the reconstructed object with the nearest centroid.
pub fn evaluate_against_truth(
    recon: &Array1<f64>,
    truth: &PermittivityField,
    grid: &Grid,
    threshold: f64,
    polarity: Polarity,
) -> Result<EvaluationReport> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(EctError::Config(format!("threshold must lie in (0, 1), got {threshold}")));
    }
    let xt = truth.normalized(grid);
    check_len(xt.len(), recon.len())?;
    let truth_objects = segment_objects(&xt, grid, threshold, polarity)?;
    if truth_objects.is_empty() {
        return Err(EctError::Config("ground truth contains no objects at this threshold".into()));
    }
    let mut recon_objects = segment_objects(recon, grid, threshold, polarity)?;
    let mut matches = Vec::new();
    let mut hits = vec![0usize; recon_objects.len()];
    for t in &truth_objects {
        let true_eps = truth.denormalize_value(t.mean_intensity);
        let m = match nearest(t.centroid, &recon_objects) {
            Some(j) => {
                hits[j] += 1;
                let r = &mut recon_objects[j];
                if r.matched_truth.is_none() {
                    r.matched_truth = Some(t.label);
                }
                TruthMatch {
                    truth_label: t.label,
                    truth_area: t.pixel_count,
                    truth_permittivity: true_eps,
                    recon_label: Some(r.label),
                    recon_area: r.pixel_count,
                    size_error: (r.pixel_count as f64 - t.pixel_count as f64).abs() / t.pixel_count as f64,
                    recon_mean_intensity: Some(r.mean_intensity),
                    recon_permittivity: Some(truth.denormalize_value(r.mean_intensity)),
                }
            }
            None => TruthMatch {
                truth_label: t.label,
                truth_area: t.pixel_count,
                truth_permittivity: true_eps,
                recon_label: None,
                recon_area: 0,
                size_error: 1.0,
                recon_mean_intensity: None,
                recon_permittivity: None,
            },
        };
        matches.push(m);
    }
    let mut claims = vec![0usize; truth_objects.len()];
    for r in &recon_objects {
        if let Some(i) = nearest(r.centroid, &truth_objects) {
            claims[i] += 1;
        }
    }
    let max_size_error = matches.iter().map(|m| m.size_error).fold(0.0, f64::max);
    Ok(EvaluationReport {
        threshold,
        polarity,
        merged: hits.iter().any(|&h| h >= 2),
        split: claims.iter().any(|&c| c >= 2),
        relative_image_error: relative_image_error(recon, &xt)?,
        truth_objects,
        recon_objects,
        matches,
        max_size_error,
    })
}
