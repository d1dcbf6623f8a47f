//! Tensor-product spline interpolation on rectilinear grids, degree 1
//! (multilinear) or 3 (cubic with not-a-knot end conditions).
//!
//! Each axis is reduced to a linear operator from sample values to point
//! values, so a tensor interpolant is a sequence of one-dimensional
//! contractions. Queries outside the sample hull are rejected.

use crate::error::{Error, Result};

/// One interpolation axis: sample coordinates plus, for cubic splines, the
/// dense map from sample values to spline second derivatives.
#[derive(Debug, Clone, PartialEq)]
struct Axis {
    coords: Vec<f64>,
    /// `s x s` row-major, `M = C y`; empty for degree 1.
    second_derivs: Vec<f64>,
}

impl Axis {
    fn new(coords: Vec<f64>, degree: usize) -> Result<Self> {
        let s = coords.len();
        if s < degree + 1 {
            return Err(Error::TooFewSamples { count: s, degree });
        }
        if coords.windows(2).any(|w| w[0].is_nan() || w[1].is_nan() || w[1] <= w[0]) {
            return Err(Error::NonMonotoneCoords);
        }
        let second_derivs = if degree == 3 { not_a_knot_operator(&coords) } else { Vec::new() };
        Ok(Axis { coords, second_derivs })
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    /// Interval `j` with `x_j <= x <= x_{j+1}`.
    fn locate(&self, x: f64) -> Result<usize> {
        let (lo, hi) = (self.coords[0], self.coords[self.len() - 1]);
        if !(x >= lo && x <= hi) {
            return Err(Error::Extrapolation { value: x, lo, hi });
        }
        let j = self.coords.partition_point(|&c| c <= x);
        Ok(j.saturating_sub(1).min(self.len() - 2))
    }

    /// Weights `w` such that the interpolant at `x` equals `sum_k w_k y_k`.
    fn weights(&self, x: f64, out: &mut [f64]) -> Result<()> {
        let j = self.locate(x)?;
        out.iter_mut().for_each(|v| *v = 0.0);
        let h = self.coords[j + 1] - self.coords[j];
        let a = (self.coords[j + 1] - x) / h;
        let b = (x - self.coords[j]) / h;
        out[j] += a;
        out[j + 1] += b;
        if !self.second_derivs.is_empty() {
            let s = self.len();
            let ca = (a * a * a - a) * h * h / 6.0;
            let cb = (b * b * b - b) * h * h / 6.0;
            if ca != 0.0 || cb != 0.0 {
                for k in 0..s {
                    out[k] += ca * self.second_derivs[j * s + k] + cb * self.second_derivs[(j + 1) * s + k];
                }
            }
        }
        Ok(())
    }
}

/// Dense operator mapping sample values to the second derivatives of the
/// not-a-knot cubic spline through them.
fn not_a_knot_operator(x: &[f64]) -> Vec<f64> {
    let s = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let mut sys = vec![0.0; s * s];
    let mut rhs = vec![0.0; s * s];
    // third derivative continuous across x_1 and x_{s-2}
    sys[0] = -h[1];
    sys[1] = h[0] + h[1];
    sys[2] = -h[0];
    let last = (s - 1) * s;
    sys[last + s - 3] = -h[s - 2];
    sys[last + s - 2] = h[s - 3] + h[s - 2];
    sys[last + s - 1] = -h[s - 3];
    for j in 1..s - 1 {
        sys[j * s + j - 1] = h[j - 1];
        sys[j * s + j] = 2.0 * (h[j - 1] + h[j]);
        sys[j * s + j + 1] = h[j];
        rhs[j * s + j - 1] = 6.0 / h[j - 1];
        rhs[j * s + j] = -6.0 / h[j - 1] - 6.0 / h[j];
        rhs[j * s + j + 1] = 6.0 / h[j];
    }
    solve_dense(&mut sys, &mut rhs, s, s);
    rhs
}

/// Gaussian elimination with partial pivoting; overwrites `b` (n x nrhs) with
/// the solution.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize, nrhs: usize) {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).expect("nonempty");
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            for c in 0..nrhs {
                b.swap(col * nrhs + c, piv * nrhs + c);
            }
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            for c in 0..nrhs {
                b[r * nrhs + c] -= f * b[col * nrhs + c];
            }
        }
    }
    for col in (0..n).rev() {
        let d = a[col * n + col];
        for c in 0..nrhs {
            let mut v = b[col * nrhs + c];
            for k in col + 1..n {
                v -= a[col * n + k] * b[k * nrhs + c];
            }
            b[col * nrhs + c] = v / d;
        }
    }
}

/// Tensor-product spline interpolant through values on a rectilinear grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridInterpolant {
    degree: usize,
    axes: Vec<Axis>,
    /// First direction fastest.
    values: Vec<f64>,
}

impl GridInterpolant {
    pub fn new(coords: Vec<Vec<f64>>, values: Vec<f64>, degree: usize) -> Result<Self> {
        if degree != 1 && degree != 3 {
            return Err(Error::InvalidInterpDegree(degree));
        }
        if coords.is_empty() || coords.len() > 3 {
            return Err(Error::InvalidDimension(coords.len()));
        }
        let expected: usize = coords.iter().map(Vec::len).product();
        if values.len() != expected {
            return Err(Error::DimensionMismatch(format!("{} values for a grid of {expected} points", values.len())));
        }
        let axes = coords.into_iter().map(|c| Axis::new(c, degree)).collect::<Result<Vec<_>>>()?;
        Ok(GridInterpolant { degree, axes, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn eval_point(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("{}D point for a {}D grid", point.len(), self.dim())));
        }
        let weights = self
            .axes
            .iter()
            .zip(point)
            .map(|(ax, &x)| {
                let mut w = vec![0.0; ax.len()];
                ax.weights(x, &mut w)?;
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut data = self.values.clone();
        let mut shape: Vec<usize> = self.axes.iter().map(Axis::len).collect();
        for (d, w) in weights.iter().enumerate() {
            data = contract(&data, &shape, d, w, 1);
            shape[d] = 1;
        }
        Ok(data[0])
    }

    pub fn evaluate(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        points.iter().map(|p| self.eval_point(p)).collect()
    }

    /// Values at every point of the tensor grid `queries[0] x queries[1] x ...`,
    /// first direction fastest.
    pub fn evaluate_grid(&self, queries: &[Vec<f64>]) -> Result<Vec<f64>> {
        if queries.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("{}D query grid for a {}D grid", queries.len(), self.dim())));
        }
        let mut data = self.values.clone();
        let mut shape: Vec<usize> = self.axes.iter().map(Axis::len).collect();
        for (d, (ax, q)) in self.axes.iter().zip(queries).enumerate() {
            let s = ax.len();
            let mut w = vec![0.0; q.len() * s];
            for (i, &x) in q.iter().enumerate() {
                ax.weights(x, &mut w[i * s..(i + 1) * s])?;
            }
            data = contract(&data, &shape, d, &w, q.len());
            shape[d] = q.len();
        }
        Ok(data)
    }
}

/// Applies `w` (`rows x shape[axis]`, row-major) along `axis`.
fn contract(data: &[f64], shape: &[usize], axis: usize, w: &[f64], rows: usize) -> Vec<f64> {
    let inner: usize = shape[..axis].iter().product();
    let outer: usize = shape[axis + 1..].iter().product();
    let s = shape[axis];
    let mut out = vec![0.0; inner * rows * outer];
    for b in 0..outer {
        for i in 0..rows {
            let wr = &w[i * s..(i + 1) * s];
            let dst = &mut out[inner * (i + rows * b)..inner * (i + 1 + rows * b)];
            for (k, &wk) in wr.iter().enumerate() {
                if wk == 0.0 {
                    continue;
                }
                let src = &data[inner * (k + s * b)..inner * (k + 1 + s * b)];
                for (o, &v) in dst.iter_mut().zip(src) {
                    *o += wk * v;
                }
            }
        }
    }
    out
}

pub fn build_interpolant(coords: Vec<Vec<f64>>, values: Vec<f64>, degree: usize) -> Result<GridInterpolant> {
    GridInterpolant::new(coords, values, degree)
}
