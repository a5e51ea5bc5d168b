use ndarray::Array1;

use super::gradient::{Edge, GradientTransforms};
use crate::error::{check_len, EctError, Result};

/// Lattices larger than this switch from the banded factorization to CG.
pub const DIRECT_LIMIT: usize = 256 * 256;

const RESIDUAL_TOL: f64 = 1e-8;

/// Integer sparse matrix in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<i64>,
}

impl CsrMatrix {
    pub fn get(&self, r: usize, c: usize) -> i64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .position(|&cc| cc == c)
            .map_or(0, |k| self.vals[range.start + k])
    }

    pub fn mul(&self, x: &Array1<f64>) -> Array1<f64> {
        (0..self.n)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.vals[k] as f64 * x[self.cols[k]])
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Backend {
    Banded { bw: usize, factor: Vec<f64> },
    Cg { max_iter: usize },
}

/// `L = G1ᵀG1 + G2ᵀG2` and its inverse.
///
/// `L` is assembled in integer arithmetic from the difference stencil. With
/// the image pinned to zero outside the ROI it is positive definite, so the
/// least-squares inverse of the gradient transforms is unique.
#[derive(Debug, Clone)]
pub struct LaplacianSolver {
    transforms: GradientTransforms,
    l: CsrMatrix,
    backend: Backend,
}

fn assemble(t: &GradientTransforms) -> CsrMatrix {
    let n = t.len();
    let mut rows: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    let mut add = |r: usize, c: usize, v: i64| {
        if let Some(e) = rows[r].iter_mut().find(|e| e.0 == c) {
            e.1 += v;
        } else {
            rows[r].push((c, v));
        }
    };
    for edges in [t.right_edges(), t.down_edges()] {
        for (k, e) in edges.iter().enumerate() {
            match *e {
                Edge::Interior(q) => {
                    let q = q as usize;
                    add(k, k, 1);
                    add(q, q, 1);
                    add(k, q, -1);
                    add(q, k, -1);
                }
                Edge::Exterior => add(k, k, 1),
                Edge::Absent => {}
            }
        }
    }
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for mut row in rows {
        row.sort_unstable_by_key(|e| e.0);
        for (c, v) in row {
            if v != 0 {
                cols.push(c);
                vals.push(v);
            }
        }
        row_ptr.push(cols.len());
    }
    CsrMatrix { n, row_ptr, cols, vals }
}

fn band_cholesky(a: &CsrMatrix) -> Result<(usize, Vec<f64>)> {
    let n = a.n;
    let mut bw = 0;
    for r in 0..n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            bw = bw.max(r.abs_diff(a.cols[k]));
        }
    }
    let w = bw + 1;
    // Row i stores columns i-bw ..= i at offsets 0 ..= bw.
    let mut f = vec![0.0; n * w];
    for r in 0..n {
        for k in a.row_ptr[r]..a.row_ptr[r + 1] {
            let c = a.cols[k];
            if c <= r {
                f[r * w + c + bw - r] = a.vals[k] as f64;
            }
        }
    }
    for i in 0..n {
        let j0 = i.saturating_sub(bw);
        for j in j0..=i {
            let k0 = j0.max(j.saturating_sub(bw));
            let mut sum = f[i * w + j + bw - i];
            for k in k0..j {
                sum -= f[i * w + k + bw - i] * f[j * w + k + bw - j];
            }
            if i == j {
                if !(sum > 1e-10 * a.get(i, i) as f64) {
                    return Err(EctError::Numerical {
                        iteration: 0,
                        reason: format!("Laplacian is not positive definite (pivot {i})"),
                    });
                }
                f[i * w + bw] = sum.sqrt();
            } else {
                f[i * w + j + bw - i] = sum / f[j * w + bw];
            }
        }
    }
    Ok((bw, f))
}

impl LaplacianSolver {
    /// Banded Cholesky for lattices up to [`DIRECT_LIMIT`] pixels, conjugate
    /// gradients beyond.
    pub fn new(t: &GradientTransforms) -> Result<Self> {
        let (n1, n2) = t.shape();
        if n1 * n2 > DIRECT_LIMIT {
            Self::with_cg(t)
        } else {
            Self::with_direct(t)
        }
    }

    pub fn with_direct(t: &GradientTransforms) -> Result<Self> {
        if t.is_empty() {
            return Err(EctError::Config("gradient transforms have no pixels".into()));
        }
        let l = assemble(t);
        let (bw, factor) = band_cholesky(&l)?;
        Ok(Self {
            transforms: t.clone(),
            l,
            backend: Backend::Banded { bw, factor },
        })
    }

    pub fn with_cg(t: &GradientTransforms) -> Result<Self> {
        if t.is_empty() {
            return Err(EctError::Config("gradient transforms have no pixels".into()));
        }
        let l = assemble(t);
        let max_iter = 10 * l.n + 100;
        Ok(Self {
            transforms: t.clone(),
            l,
            backend: Backend::Cg { max_iter },
        })
    }

    pub fn transforms(&self) -> &GradientTransforms {
        &self.transforms
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.l
    }

    pub fn len(&self) -> usize {
        self.l.n
    }

    pub fn is_empty(&self) -> bool {
        self.l.n == 0
    }

    /// Solves `L x = b`.
    pub fn solve(&self, b: &Array1<f64>) -> Result<Array1<f64>> {
        check_len(self.l.n, b.len())?;
        let x = match &self.backend {
            Backend::Banded { bw, factor } => self.banded_solve(*bw, factor, b),
            Backend::Cg { max_iter } => self.cg_solve(*max_iter, b)?,
        };
        let bn = b.dot(b).sqrt();
        if bn > 0.0 {
            let r = &self.l.mul(&x) - b;
            let rel = r.dot(&r).sqrt() / bn;
            if !(rel <= RESIDUAL_TOL) {
                return Err(EctError::Numerical {
                    iteration: 0,
                    reason: format!("Laplacian solve residual {rel:.3e}"),
                });
            }
        }
        Ok(x)
    }

    fn banded_solve(&self, bw: usize, f: &[f64], b: &Array1<f64>) -> Array1<f64> {
        let n = self.l.n;
        let w = bw + 1;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(bw)..i {
                s -= f[i * w + k + bw - i] * y[k];
            }
            y[i] = s / f[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..(i + bw + 1).min(n) {
                s -= f[k * w + i + bw - k] * y[k];
            }
            y[i] = s / f[i * w + bw];
        }
        Array1::from(y)
    }

    fn cg_solve(&self, max_iter: usize, b: &Array1<f64>) -> Result<Array1<f64>> {
        let n = self.l.n;
        let diag: Array1<f64> = (0..n).map(|r| self.l.get(r, r) as f64).collect();
        let mut x = Array1::zeros(n);
        let mut r = b.clone();
        let bn = b.dot(b).sqrt();
        if bn == 0.0 {
            return Ok(x);
        }
        let mut z = &r / &diag;
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        for it in 0..max_iter {
            let ap = self.l.mul(&p);
            let alpha = rz / p.dot(&ap);
            x.scaled_add(alpha, &p);
            r.scaled_add(-alpha, &ap);
            if r.dot(&r).sqrt() <= 1e-12 * bn {
                return Ok(x);
            }
            z = &r / &diag;
            let rz_new = r.dot(&z);
            if !rz_new.is_finite() {
                return Err(EctError::Numerical {
                    iteration: it,
                    reason: "conjugate gradient breakdown".into(),
                });
            }
            p = &z + &(&p * (rz_new / rz));
            rz = rz_new;
        }
        Err(EctError::Numerical {
            iteration: max_iter,
            reason: "conjugate gradient did not converge".into(),
        })
    }

    /// Least-squares image for a gradient pair: `x = L⁻¹(G1ᵀ g1 + G2ᵀ g2)`.
    pub fn ls_invert(&self, g1: &Array1<f64>, g2: &Array1<f64>) -> Result<Array1<f64>> {
        let rhs = self.transforms.adjoint(g1, g2)?;
        self.solve(&rhs)
    }
}
