//! Sensor cross-section: pixel lattice, imaging region, electrode ring and
//! phantom rasterization.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, EctError, Result};

/// Classification of a lattice pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelClass {
    /// Pixel centre lies strictly inside the imaging disc.
    Roi,
    /// Outside the disc but 4-adjacent to an ROI pixel; electrodes live here.
    Boundary,
    /// Everything else (wall annulus).
    Exterior,
}

/// Pixel lattice with a circular imaging region (ROI).
///
/// Pixel `(r, c)` has its centre at continuous coordinates `(r + 0.5, c + 0.5)`.
/// Image vectors used by the reconstruction code are indexed by ROI pixel, in
/// row-major lattice order.
#[derive(Debug, Clone)]
pub struct Grid {
    n1: usize,
    n2: usize,
    pitch: f64,
    center: (f64, f64),
    roi_radius_px: f64,
    class: Vec<PixelClass>,
    roi_of_pixel: Vec<Option<usize>>,
    roi_pixels: Vec<usize>,
}

pub const MIN_GRID_DIM: usize = 8;

impl Grid {
    /// Builds an `n1 x n2` lattice with unit pitch. The ROI radius is
    /// `roi_radius_frac * min(n1, n2)` pixels.
    pub fn new(n1: usize, n2: usize, roi_radius_frac: f64) -> Result<Self> {
        Self::with_pitch(n1, n2, roi_radius_frac, 1.0)
    }

    pub fn with_pitch(n1: usize, n2: usize, roi_radius_frac: f64, pitch: f64) -> Result<Self> {
        if n1 < MIN_GRID_DIM || n2 < MIN_GRID_DIM {
            return Err(EctError::Config(format!(
                "grid {n1}x{n2} is too small (minimum {MIN_GRID_DIM}x{MIN_GRID_DIM})"
            )));
        }
        if !(roi_radius_frac > 0.0 && roi_radius_frac <= 0.5) {
            return Err(EctError::Config(format!(
                "roi_radius_frac must lie in (0, 0.5], got {roi_radius_frac}"
            )));
        }
        if !(pitch > 0.0 && pitch.is_finite()) {
            return Err(EctError::Config(format!("pitch must be positive, got {pitch}")));
        }
        let center = (n1 as f64 / 2.0, n2 as f64 / 2.0);
        let radius = roi_radius_frac * n1.min(n2) as f64;
        let r2 = radius * radius;

        let mut class = vec![PixelClass::Exterior; n1 * n2];
        let mut roi_of_pixel = vec![None; n1 * n2];
        let mut roi_pixels = Vec::new();
        for r in 0..n1 {
            for c in 0..n2 {
                let dr = r as f64 + 0.5 - center.0;
                let dc = c as f64 + 0.5 - center.1;
                if dr * dr + dc * dc < r2 {
                    let p = r * n2 + c;
                    class[p] = PixelClass::Roi;
                    roi_of_pixel[p] = Some(roi_pixels.len());
                    roi_pixels.push(p);
                }
            }
        }
        if roi_pixels.is_empty() {
            return Err(EctError::Config("imaging region contains no pixels".into()));
        }
        for r in 0..n1 {
            for c in 0..n2 {
                let p = r * n2 + c;
                if class[p] == PixelClass::Roi {
                    continue;
                }
                let touches = neighbors4(n1, n2, r, c).any(|q| class[q] == PixelClass::Roi);
                if touches {
                    class[p] = PixelClass::Boundary;
                }
            }
        }
        Ok(Self {
            n1,
            n2,
            pitch,
            center,
            roi_radius_px: radius,
            class,
            roi_of_pixel,
            roi_pixels,
        })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn n_pixels(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Centre in continuous pixel coordinates `(row, col)`.
    pub fn center(&self) -> (f64, f64) {
        self.center
    }

    /// ROI radius in metres.
    pub fn roi_radius(&self) -> f64 {
        self.roi_radius_px * self.pitch
    }

    /// ROI radius in pixels.
    pub fn roi_radius_px(&self) -> f64 {
        self.roi_radius_px
    }

    pub fn class(&self, pixel: usize) -> PixelClass {
        self.class[pixel]
    }

    pub fn classes(&self) -> &[PixelClass] {
        &self.class
    }

    pub fn roi_len(&self) -> usize {
        self.roi_pixels.len()
    }

    /// Lattice index of each ROI pixel.
    pub fn roi_pixels(&self) -> &[usize] {
        &self.roi_pixels
    }

    pub fn roi_index(&self, pixel: usize) -> Option<usize> {
        self.roi_of_pixel[pixel]
    }

    pub fn roi_mask(&self) -> Vec<bool> {
        self.class.iter().map(|&c| c == PixelClass::Roi).collect()
    }

    pub fn row_col(&self, pixel: usize) -> (usize, usize) {
        (pixel / self.n2, pixel % self.n2)
    }

    /// Offset of a pixel centre from the grid centre, as `(x, y)` in pixels
    /// with `x` to the right and `y` up.
    pub fn offset_xy(&self, pixel: usize) -> (f64, f64) {
        let (r, c) = self.row_col(pixel);
        let x = c as f64 + 0.5 - self.center.1;
        let y = self.center.0 - (r as f64 + 0.5);
        (x, y)
    }

    /// Counter-clockwise angle of a pixel centre in `[0, 2π)`.
    pub fn angle(&self, pixel: usize) -> f64 {
        let (x, y) = self.offset_xy(pixel);
        let a = y.atan2(x);
        if a < 0.0 {
            a + 2.0 * PI
        } else {
            a
        }
    }

    /// Scatters an ROI vector into a full `n1 x n2` image, zero outside the ROI.
    pub fn to_image(&self, x: &Array1<f64>) -> Result<Array2<f64>> {
        check_len(self.roi_len(), x.len())?;
        let mut img = Array2::zeros((self.n1, self.n2));
        let flat = img.as_slice_mut().expect("standard layout");
        for (k, &p) in self.roi_pixels.iter().enumerate() {
            flat[p] = x[k];
        }
        Ok(img)
    }

    /// Gathers the ROI pixels of a full image.
    pub fn from_image(&self, img: &Array2<f64>) -> Result<Array1<f64>> {
        check_len(self.n_pixels(), img.len())?;
        Ok(self
            .roi_pixels
            .iter()
            .map(|&p| img[(p / self.n2, p % self.n2)])
            .collect())
    }
}

/// 4-neighbours of `(r, c)` inside an `n1 x n2` lattice.
pub fn neighbors4(n1: usize, n2: usize, r: usize, c: usize) -> impl Iterator<Item = usize> {
    let up = (r > 0).then(|| (r - 1) * n2 + c);
    let down = (r + 1 < n1).then(|| (r + 1) * n2 + c);
    let left = (c > 0).then(|| r * n2 + c - 1);
    let right = (c + 1 < n2).then(|| r * n2 + c + 1);
    [up, down, left, right].into_iter().flatten()
}

/// Electrodes as sets of lattice pixels held at a fixed potential.
#[derive(Debug, Clone)]
pub struct ElectrodeLayout {
    n1: usize,
    n2: usize,
    arcs: Vec<Vec<usize>>,
    owner: Vec<Option<usize>>,
    coverage_frac: f64,
    v_c: f64,
}

pub const MAX_ELECTRODES: usize = 32;

impl ElectrodeLayout {
    /// Places `n` equal, equally spaced electrodes on the boundary ring of the
    /// ROI. Electrode `k` covers angles `[2πk/n, 2πk/n + coverage_frac·2π/n)`.
    pub fn place(grid: &Grid, n: usize, coverage_frac: f64, v_c: f64) -> Result<Self> {
        if !(2..=MAX_ELECTRODES).contains(&n) {
            return Err(EctError::Config(format!(
                "electrode count must be in 2..={MAX_ELECTRODES}, got {n}"
            )));
        }
        if !(coverage_frac > 0.0 && coverage_frac < 1.0) {
            return Err(EctError::Config(format!(
                "coverage_frac must lie in (0, 1), got {coverage_frac}"
            )));
        }
        let pitch_angle = 2.0 * PI / n as f64;
        let span = coverage_frac * pitch_angle;
        let mut arcs: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
        for p in 0..grid.n_pixels() {
            if grid.class(p) != PixelClass::Boundary {
                continue;
            }
            let a = grid.angle(p);
            let k = ((a / pitch_angle).floor() as usize).min(n - 1);
            if a - k as f64 * pitch_angle < span {
                arcs[k].push((a, p));
            }
        }
        let arcs: Vec<Vec<usize>> = arcs
            .into_iter()
            .map(|mut arc| {
                arc.sort_by(|a, b| a.0.total_cmp(&b.0));
                arc.into_iter().map(|(_, p)| p).collect()
            })
            .collect();
        if let Some(k) = arcs.iter().position(Vec::is_empty) {
            return Err(EctError::Config(format!(
                "electrode {k} covers no boundary pixels; grid too coarse for {n} electrodes"
            )));
        }
        let layout = Self::from_arcs(grid.n1(), grid.n2(), arcs, v_c)?;
        Ok(Self {
            coverage_frac,
            ..layout
        })
    }

    /// Builds a layout from explicit pixel sets. Electrodes must be pairwise
    /// disjoint and no two electrodes may share a lattice edge.
    pub fn from_arcs(n1: usize, n2: usize, arcs: Vec<Vec<usize>>, v_c: f64) -> Result<Self> {
        if arcs.len() < 2 {
            return Err(EctError::Config("at least two electrodes are required".into()));
        }
        if !(v_c.is_finite() && v_c != 0.0) {
            return Err(EctError::Config(format!("excitation potential must be nonzero, got {v_c}")));
        }
        let mut owner = vec![None; n1 * n2];
        for (k, arc) in arcs.iter().enumerate() {
            if arc.is_empty() {
                return Err(EctError::Config(format!("electrode {k} is empty")));
            }
            for &p in arc {
                if p >= n1 * n2 {
                    return Err(EctError::Config(format!("electrode {k} pixel {p} is off the lattice")));
                }
                if let Some(other) = owner[p] {
                    return Err(EctError::Config(format!(
                        "electrodes {other} and {k} overlap at pixel {p}"
                    )));
                }
                owner[p] = Some(k);
            }
        }
        for (k, arc) in arcs.iter().enumerate() {
            for &p in arc {
                for q in neighbors4(n1, n2, p / n2, p % n2) {
                    if let Some(other) = owner[q] {
                        if other != k {
                            return Err(EctError::Config(format!(
                                "electrodes {k} and {other} touch (pixels {p}, {q}); reduce coverage"
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self {
            n1,
            n2,
            arcs,
            owner,
            coverage_frac: f64::NAN,
            v_c,
        })
    }

    pub fn n_electrodes(&self) -> usize {
        self.arcs.len()
    }

    /// Number of independent electrode pairs, `n(n-1)/2`.
    pub fn n_pairs(&self) -> usize {
        let n = self.arcs.len();
        n * (n - 1) / 2
    }

    /// Pair ordering `(0,1), (0,2), …, (n-2,n-1)`.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        pair_index(self.n_electrodes())
    }

    pub fn arcs(&self) -> &[Vec<usize>] {
        &self.arcs
    }

    pub fn owner(&self, pixel: usize) -> Option<usize> {
        self.owner[pixel]
    }

    pub fn coverage_frac(&self) -> f64 {
        self.coverage_frac
    }

    pub fn v_c(&self) -> f64 {
        self.v_c
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }
}

pub fn pair_index(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

/// Per-pixel relative permittivity together with the two calibration states
/// that define the normalized image.
///
/// `eps_empty` maps to `x = 0` and `eps_full` to `x = 1`. The two values may
/// come in either order: a high-permittivity background imaged for
/// low-permittivity bubbles uses `eps_empty > eps_full`.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityField {
    pub eps: Array2<f64>,
    pub eps_empty: f64,
    pub eps_full: f64,
}

impl PermittivityField {
    pub fn uniform(n1: usize, n2: usize, value: f64, eps_empty: f64, eps_full: f64) -> Self {
        Self {
            eps: Array2::from_elem((n1, n2), value),
            eps_empty,
            eps_full,
        }
    }

    /// Field with `roi_eps` inside the ROI and `wall_eps` elsewhere.
    pub fn roi_uniform(grid: &Grid, roi_eps: f64, wall_eps: f64, eps_empty: f64, eps_full: f64) -> Self {
        let mut f = Self::uniform(grid.n1(), grid.n2(), wall_eps, eps_empty, eps_full);
        let flat = f.eps.as_slice_mut().expect("standard layout");
        for &p in grid.roi_pixels() {
            flat[p] = roi_eps;
        }
        f
    }

    /// Builds a field from a normalized ROI image. Values are clamped to
    /// `[0, 1]` before denormalizing; pixels outside the ROI get `wall_eps`.
    pub fn from_normalized(
        grid: &Grid,
        x: &Array1<f64>,
        wall_eps: f64,
        eps_empty: f64,
        eps_full: f64,
    ) -> Result<Self> {
        check_len(grid.roi_len(), x.len())?;
        let mut f = Self::uniform(grid.n1(), grid.n2(), wall_eps, eps_empty, eps_full);
        let flat = f.eps.as_slice_mut().expect("standard layout");
        for (k, &p) in grid.roi_pixels().iter().enumerate() {
            flat[p] = denormalize(x[k].clamp(0.0, 1.0), eps_empty, eps_full);
        }
        Ok(f)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.eps.dim()
    }

    /// Normalized ROI image `x = (ε - ε_empty)/(ε_full - ε_empty)`.
    pub fn normalized(&self, grid: &Grid) -> Array1<f64> {
        let flat = self.eps.as_slice().expect("standard layout");
        grid.roi_pixels()
            .iter()
            .map(|&p| normalize(flat[p], self.eps_empty, self.eps_full))
            .collect()
    }

    pub fn normalize_value(&self, eps: f64) -> f64 {
        normalize(eps, self.eps_empty, self.eps_full)
    }

    pub fn denormalize_value(&self, x: f64) -> f64 {
        denormalize(x, self.eps_empty, self.eps_full)
    }
}

pub fn normalize(eps: f64, eps_empty: f64, eps_full: f64) -> f64 {
    (eps - eps_empty) / (eps_full - eps_empty)
}

pub fn denormalize(x: f64, eps_empty: f64, eps_full: f64) -> f64 {
    eps_empty + x * (eps_full - eps_empty)
}

/// A phantom inclusion. Coordinates are relative to the ROI centre in units
/// of the ROI radius, `x` to the right and `y` up; angles are in degrees,
/// counter-clockwise from the `+x` axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Disc {
        center: [f64; 2],
        radius: f64,
        eps: f64,
    },
    AnnularArc {
        #[serde(default)]
        center: [f64; 2],
        inner_radius: f64,
        outer_radius: f64,
        start_deg: f64,
        end_deg: f64,
        eps: f64,
    },
}

impl Shape {
    pub fn eps(&self) -> f64 {
        match self {
            Shape::Disc { eps, .. } | Shape::AnnularArc { eps, .. } => *eps,
        }
    }

    fn validate(&self) -> Result<()> {
        let (center, reach) = match self {
            Shape::Disc { center, radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(EctError::Config(format!("disc radius must be positive, got {radius}")));
                }
                (center, *radius)
            }
            Shape::AnnularArc {
                center,
                inner_radius,
                outer_radius,
                ..
            } => {
                if !(*inner_radius >= 0.0 && outer_radius > inner_radius) {
                    return Err(EctError::Config(format!(
                        "annular arc needs 0 <= inner < outer, got {inner_radius}, {outer_radius}"
                    )));
                }
                (center, *outer_radius)
            }
        };
        let d = center[0].hypot(center[1]);
        if d + reach > 1.0 + 1e-12 {
            return Err(EctError::Config(format!(
                "shape {self:?} extends outside the imaging region"
            )));
        }
        Ok(())
    }

    /// Pixel-centre containment test in ROI-relative coordinates.
    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Shape::Disc { center, radius, .. } => {
                let dx = x - center[0];
                let dy = y - center[1];
                dx * dx + dy * dy < radius * radius
            }
            Shape::AnnularArc {
                center,
                inner_radius,
                outer_radius,
                start_deg,
                end_deg,
                ..
            } => {
                let dx = x - center[0];
                let dy = y - center[1];
                let r2 = dx * dx + dy * dy;
                if r2 < inner_radius * inner_radius || r2 >= outer_radius * outer_radius {
                    return false;
                }
                let a = dy.atan2(dx).to_degrees().rem_euclid(360.0);
                let start = start_deg.rem_euclid(360.0);
                let sweep = end_deg - start_deg;
                if sweep >= 360.0 {
                    return true;
                }
                (a - start).rem_euclid(360.0) < sweep.rem_euclid(360.0)
            }
        }
    }
}

/// Ground-truth permittivity layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub background_eps: f64,
    /// Permittivity outside the ROI (sensor wall); defaults to the background.
    #[serde(default)]
    pub wall_eps: Option<f64>,
    #[serde(default)]
    pub shapes: Vec<Shape>,
}

impl PhantomSpec {
    pub fn wall(&self) -> f64 {
        self.wall_eps.unwrap_or(self.background_eps)
    }
}

/// Rasterizes a phantom by pixel-centre sampling. Later shapes overwrite
/// earlier ones.
pub fn make_phantom(grid: &Grid, spec: &PhantomSpec, eps_empty: f64, eps_full: f64) -> Result<PermittivityField> {
    let (lo, hi) = (eps_empty.min(eps_full), eps_empty.max(eps_full));
    if lo == hi {
        return Err(EctError::Config("calibration permittivities must differ".into()));
    }
    let in_range = |e: f64| e >= lo - 1e-12 && e <= hi + 1e-12;
    if !in_range(spec.background_eps) {
        return Err(EctError::Config(format!(
            "background permittivity {} outside [{lo}, {hi}]",
            spec.background_eps
        )));
    }
    for s in &spec.shapes {
        s.validate()?;
        if !in_range(s.eps()) {
            return Err(EctError::Config(format!(
                "shape permittivity {} outside [{lo}, {hi}]",
                s.eps()
            )));
        }
    }
    let mut field = PermittivityField::roi_uniform(grid, spec.background_eps, spec.wall(), eps_empty, eps_full);
    let scale = grid.roi_radius_px();
    let flat = field.eps.as_slice_mut().expect("standard layout");
    for &p in grid.roi_pixels() {
        let (x, y) = grid.offset_xy(p);
        let (x, y) = (x / scale, y / scale);
        for s in &spec.shapes {
            if s.contains(x, y) {
                flat[p] = s.eps();
            }
        }
    }
    Ok(field)
}
