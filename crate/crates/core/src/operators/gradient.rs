use ndarray::Array1;

use crate::error::{check_len, Result};
use crate::grid::Grid;

/// Forward neighbour of an ROI pixel along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// Neighbour is the ROI pixel with this index.
    Interior(u32),
    /// Neighbour lies outside the ROI, where the image is pinned to zero.
    Exterior,
    /// No neighbour: the pixel sits on the last lattice row/column and the
    /// difference is defined to be zero.
    Absent,
}

/// Horizontal (`G1`) and vertical (`G2`) forward-difference transforms on
/// the ROI pixels. Both produce one value per ROI pixel:
/// `g1[k] = x[right(k)] - x[k]`, `g2[k] = x[below(k)] - x[k]`.
#[derive(Debug, Clone)]
pub struct GradientTransforms {
    n1: usize,
    n2: usize,
    pixels: Vec<usize>,
    right: Vec<Edge>,
    down: Vec<Edge>,
}

/// Gradient components and their per-pixel magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientPair {
    pub g1: Array1<f64>,
    pub g2: Array1<f64>,
    pub g: Array1<f64>,
}

impl GradientPair {
    pub fn from_components(g1: Array1<f64>, g2: Array1<f64>) -> Self {
        let g = magnitude(&g1, &g2);
        Self { g1, g2, g }
    }
}

/// Element-wise `sqrt(a² + b²)`.
pub fn magnitude(a: &Array1<f64>, b: &Array1<f64>) -> Array1<f64> {
    a.iter().zip(b.iter()).map(|(&u, &v)| (u * u + v * v).sqrt()).collect()
}

impl GradientTransforms {
    pub fn new(grid: &Grid) -> Self {
        Self::from_mask(grid.n1(), grid.n2(), &grid.roi_mask())
    }

    /// Transforms over an arbitrary pixel mask on an `n1 x n2` lattice.
    pub fn from_mask(n1: usize, n2: usize, mask: &[bool]) -> Self {
        assert_eq!(mask.len(), n1 * n2, "mask size");
        let mut index = vec![u32::MAX; n1 * n2];
        let mut pixels = Vec::new();
        for (p, &m) in mask.iter().enumerate() {
            if m {
                index[p] = pixels.len() as u32;
                pixels.push(p);
            }
        }
        let edge = |q: Option<usize>| match q {
            None => Edge::Absent,
            Some(q) if mask[q] => Edge::Interior(index[q]),
            Some(_) => Edge::Exterior,
        };
        let right = pixels
            .iter()
            .map(|&p| edge((p % n2 + 1 < n2).then(|| p + 1)))
            .collect();
        let down = pixels
            .iter()
            .map(|&p| edge((p / n2 + 1 < n1).then(|| p + n2)))
            .collect();
        Self {
            n1,
            n2,
            pixels,
            right,
            down,
        }
    }

    /// Number of image unknowns.
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn pixels(&self) -> &[usize] {
        &self.pixels
    }

    pub fn right_edges(&self) -> &[Edge] {
        &self.right
    }

    pub fn down_edges(&self) -> &[Edge] {
        &self.down
    }

    fn forward(edges: &[Edge], x: &Array1<f64>) -> Array1<f64> {
        edges
            .iter()
            .enumerate()
            .map(|(k, e)| match *e {
                Edge::Interior(q) => x[q as usize] - x[k],
                Edge::Exterior => -x[k],
                Edge::Absent => 0.0,
            })
            .collect()
    }

    fn adjoint_into(edges: &[Edge], y: &Array1<f64>, out: &mut Array1<f64>) {
        for (k, e) in edges.iter().enumerate() {
            match *e {
                Edge::Interior(q) => {
                    out[k] -= y[k];
                    out[q as usize] += y[k];
                }
                Edge::Exterior => out[k] -= y[k],
                Edge::Absent => {}
            }
        }
    }

    pub fn g1(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        check_len(self.len(), x.len())?;
        Ok(Self::forward(&self.right, x))
    }

    pub fn g2(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        check_len(self.len(), x.len())?;
        Ok(Self::forward(&self.down, x))
    }

    pub fn g1_t(&self, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_len(self.len(), y.len())?;
        let mut out = Array1::zeros(self.len());
        Self::adjoint_into(&self.right, y, &mut out);
        Ok(out)
    }

    pub fn g2_t(&self, y: &Array1<f64>) -> Result<Array1<f64>> {
        check_len(self.len(), y.len())?;
        let mut out = Array1::zeros(self.len());
        Self::adjoint_into(&self.down, y, &mut out);
        Ok(out)
    }

    /// `G1ᵀ g1 + G2ᵀ g2`.
    pub fn adjoint(&self, g1: &Array1<f64>, g2: &Array1<f64>) -> Result<Array1<f64>> {
        check_len(self.len(), g1.len())?;
        check_len(self.len(), g2.len())?;
        let mut out = Array1::zeros(self.len());
        Self::adjoint_into(&self.right, g1, &mut out);
        Self::adjoint_into(&self.down, g2, &mut out);
        Ok(out)
    }

    /// `g1 = G1 x`, `g2 = G2 x` and the magnitude vector.
    pub fn apply(&self, x: &Array1<f64>) -> Result<GradientPair> {
        Ok(GradientPair::from_components(self.g1(x)?, self.g2(x)?))
    }

    /// Sparse entries `(row, col, value)` of `G1` or `G2`.
    pub fn entries(&self, vertical: bool) -> Vec<(usize, usize, i64)> {
        let edges = if vertical { &self.down } else { &self.right };
        let mut out = Vec::new();
        for (k, e) in edges.iter().enumerate() {
            match *e {
                Edge::Interior(q) => {
                    out.push((k, k, -1));
                    out.push((k, q as usize, 1));
                }
                Edge::Exterior => out.push((k, k, -1)),
                Edge::Absent => {}
            }
        }
        out
    }
}

/// Isotropic total variation `Σ_k sqrt(g1[k]² + g2[k]²)`.
pub fn tv_norm(t: &GradientTransforms, x: &Array1<f64>) -> Result<f64> {
    Ok(t.apply(x)?.g.sum())
}

/// Weighted total variation `Σ_k w[k] · sqrt(g1[k]² + g2[k]²)`.
pub fn weighted_tv_norm(t: &GradientTransforms, x: &Array1<f64>, w: &Array1<f64>) -> Result<f64> {
    check_len(t.len(), w.len())?;
    Ok(t.apply(x)?.g.dot(w))
}
