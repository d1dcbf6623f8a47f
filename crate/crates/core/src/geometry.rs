//! Single-patch spline geometry maps `(0,1)^n -> Omega` and the pulled-back
//! diffusion coefficient of the Laplacian.
//!
//! The geometry lives in its own spline space, independent of the analysis
//! space. Rational (NURBS) maps store one positive weight per control point.

use crate::error::{Error, Result};
use crate::splines::{basis_and_derivs, find_span};
use std::fmt::Write as _;
use std::path::Path;

const SINGULAR_TOL: f64 = 1e-14;
const BUMP_AMPLITUDE: f64 = 0.015;

/// Nonzero geometry basis functions of one direction at one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct DirBasis {
    pub first: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

/// Point, Jacobian and Jacobian determinant of the map at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct MapEval {
    pub point: Vec<f64>,
    /// Row-major `n x n`, entry `(i, j) = d phi_i / d xhat_j`.
    pub jacobian: Vec<f64>,
    pub det: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchMap {
    dim: usize,
    degrees: Vec<usize>,
    knots: Vec<Vec<f64>>,
    /// `dim` coordinates per control point, first direction fastest.
    control: Vec<f64>,
    weights: Option<Vec<f64>>,
}

impl PatchMap {
    pub fn new(
        degrees: Vec<usize>,
        knots: Vec<Vec<f64>>,
        control: Vec<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let dim = degrees.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        if knots.len() != dim {
            return Err(Error::InvalidGeometry(format!("expected {dim} knot vectors, got {}", knots.len())));
        }
        let mut count = 1;
        for (d, (kv, &p)) in knots.iter().zip(&degrees).enumerate() {
            if p < 1 {
                return Err(Error::InvalidDegree(p));
            }
            if kv.len() < 2 * p + 2 {
                return Err(Error::InvalidGeometry(format!("knot vector {d} too short for degree {p}")));
            }
            if kv.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidGeometry(format!("knot vector {d} is decreasing")));
            }
            let n = kv.len();
            if kv[..=p].iter().any(|&k| k != 0.0) || kv[n - p - 1..].iter().any(|&k| k != 1.0) {
                return Err(Error::InvalidGeometry(format!("knot vector {d} is not open on [0, 1]")));
            }
            count *= n - p - 1;
        }
        if control.len() != count * dim {
            return Err(Error::InvalidGeometry(format!(
                "expected {count} control points ({} values), got {} values",
                count * dim,
                control.len()
            )));
        }
        if let Some(w) = &weights {
            if w.len() != count {
                return Err(Error::InvalidGeometry(format!("expected {count} weights, got {}", w.len())));
            }
            if w.iter().any(|&v| v.is_nan() || v <= 0.0) {
                return Err(Error::InvalidGeometry("weights must be strictly positive".into()));
            }
        }
        Ok(PatchMap { dim, degrees, knots, control, weights })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn knots(&self) -> &[Vec<f64>] {
        &self.knots
    }

    pub fn control_points(&self) -> &[f64] {
        &self.control
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    pub fn is_rational(&self) -> bool {
        self.weights.is_some()
    }

    /// Control points per direction.
    pub fn counts(&self) -> Vec<usize> {
        self.knots.iter().zip(&self.degrees).map(|(k, p)| k.len() - p - 1).collect()
    }

    /// Geometry basis along direction `dir` at coordinate `x` (no domain check).
    pub fn dir_basis(&self, dir: usize, x: f64) -> DirBasis {
        let p = self.degrees[dir];
        let span = find_span(&self.knots[dir], p, x);
        let mut values = vec![0.0; p + 1];
        let mut derivs = vec![0.0; p + 1];
        basis_and_derivs(&self.knots[dir], p, span, x, &mut values, &mut derivs);
        DirBasis { first: span - p, values, derivs }
    }

    /// Evaluates point and Jacobian from precomputed per-direction bases.
    pub fn eval_with(&self, bases: &[&DirBasis]) -> MapEval {
        let n = self.dim;
        let counts = self.counts();
        let local: Vec<usize> = bases.iter().map(|b| b.values.len()).collect();
        let total: usize = local.iter().product();
        // homogeneous accumulation: sum N w P and sum N w, plus their derivatives
        let mut pw = [0.0; 3];
        let mut dpw = [[0.0; 3]; 3];
        let mut w = 0.0;
        let mut dw = [0.0; 3];
        let mut grad = [0.0; 3];
        for a in 0..total {
            let mut rem = a;
            let mut flat = 0;
            let mut stride = 1;
            let mut val = 1.0;
            let mut loc = [0usize; 3];
            for d in 0..n {
                loc[d] = rem % local[d];
                rem /= local[d];
                flat += (bases[d].first + loc[d]) * stride;
                stride *= counts[d];
                val *= bases[d].values[loc[d]];
            }
            for (j, g) in grad.iter_mut().enumerate().take(n) {
                *g = (0..n)
                    .map(|d| if d == j { bases[d].derivs[loc[d]] } else { bases[d].values[loc[d]] })
                    .product();
            }
            let wt = self.weights.as_ref().map_or(1.0, |ws| ws[flat]);
            let cp = &self.control[flat * n..flat * n + n];
            w += val * wt;
            for j in 0..n {
                dw[j] += grad[j] * wt;
            }
            for i in 0..n {
                pw[i] += val * wt * cp[i];
                for j in 0..n {
                    dpw[i][j] += grad[j] * wt * cp[i];
                }
            }
        }
        let point: Vec<f64> = (0..n).map(|i| pw[i] / w).collect();
        let mut jacobian = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                jacobian[i * n + j] = (dpw[i][j] - point[i] * dw[j]) / w;
            }
        }
        let det = det(n, &jacobian);
        MapEval { point, jacobian, det }
    }

    pub fn eval(&self, xhat: &[f64]) -> Result<MapEval> {
        self.check_domain(xhat)?;
        let bases: Vec<DirBasis> = xhat.iter().enumerate().map(|(d, &x)| self.dir_basis(d, x)).collect();
        let refs: Vec<&DirBasis> = bases.iter().collect();
        Ok(self.eval_with(&refs))
    }

    fn check_domain(&self, xhat: &[f64]) -> Result<()> {
        if xhat.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("point has {} coordinates, map has {}", xhat.len(), self.dim)));
        }
        match xhat.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            Some(&value) => Err(Error::OutOfDomain { value }),
            None => Ok(()),
        }
    }

    /// Inserts knot `u` once in direction `dir`, leaving the map unchanged.
    pub fn insert_knot(&mut self, dir: usize, u: f64) -> Result<()> {
        if !(0.0 < u && u < 1.0) {
            return Err(Error::OutOfDomain { value: u });
        }
        let n = self.dim;
        let p = self.degrees[dir];
        let kv = &self.knots[dir];
        let k = find_span(kv, p, u);
        let counts = self.counts();
        let mut new_counts = counts.clone();
        new_counts[dir] += 1;
        let old_len = counts[dir];
        let alpha: Vec<f64> = (0..=old_len)
            .map(|i| {
                if i + p <= k {
                    1.0
                } else if i > k {
                    0.0
                } else {
                    (u - kv[i]) / (kv[i + p] - kv[i])
                }
            })
            .collect();
        let total_new: usize = new_counts.iter().product();
        let mut control = vec![0.0; total_new * n];
        let mut weights = vec![0.0; total_new];
        let strides = |c: &[usize]| {
            let mut s = vec![1; n];
            for d in 1..n {
                s[d] = s[d - 1] * c[d - 1];
            }
            s
        };
        let old_strides = strides(&counts);
        let new_strides = strides(&new_counts);
        let old_w = |idx: usize| self.weights.as_ref().map_or(1.0, |w| w[idx]);
        for flat in 0..total_new {
            let mut multi = vec![0; n];
            let mut rem = flat;
            for d in 0..n {
                multi[d] = rem % new_counts[d];
                rem /= new_counts[d];
            }
            let i = multi[dir];
            let idx_of = |j: usize| -> usize {
                (0..n).map(|d| if d == dir { j } else { multi[d] } * old_strides[d]).sum()
            };
            let (a, lo, hi) = (alpha[i], i.checked_sub(1), (i < old_len).then_some(i));
            // Q_i = a P_i + (1 - a) P_{i-1} in homogeneous coordinates
            let mut hw = 0.0;
            let mut hp = [0.0; 3];
            if let Some(j) = hi {
                if a != 0.0 {
                    let idx = idx_of(j);
                    let wj = old_w(idx);
                    hw += a * wj;
                    for c in 0..n {
                        hp[c] += a * wj * self.control[idx * n + c];
                    }
                }
            }
            if let Some(j) = lo {
                if a != 1.0 {
                    let idx = idx_of(j);
                    let wj = old_w(idx);
                    hw += (1.0 - a) * wj;
                    for c in 0..n {
                        hp[c] += (1.0 - a) * wj * self.control[idx * n + c];
                    }
                }
            }
            debug_assert_eq!(flat, (0..n).map(|d| multi[d] * new_strides[d]).sum::<usize>());
            weights[flat] = hw;
            for c in 0..n {
                control[flat * n + c] = hp[c] / hw;
            }
        }
        let mut knots = self.knots[dir].clone();
        knots.insert(k + 1, u);
        self.knots[dir] = knots;
        self.control = control;
        if self.weights.is_some() {
            self.weights = Some(weights);
        }
        Ok(())
    }

    /// Raises the degree of direction `dir` by one. Only single-segment
    /// (Bezier) directions are supported.
    pub fn elevate_degree(&mut self, dir: usize) -> Result<()> {
        let p = self.degrees[dir];
        if self.knots[dir].len() != 2 * p + 2 {
            return Err(Error::InvalidGeometry("degree elevation needs a single-segment direction".into()));
        }
        let n = self.dim;
        let counts = self.counts();
        let mut new_counts = counts.clone();
        new_counts[dir] += 1;
        let total_new: usize = new_counts.iter().product();
        let mut control = vec![0.0; total_new * n];
        let mut weights = vec![0.0; total_new];
        let stride = |c: &[usize], d: usize| c[..d].iter().product::<usize>();
        for flat in 0..total_new {
            let mut multi = vec![0; n];
            let mut rem = flat;
            for d in 0..n {
                multi[d] = rem % new_counts[d];
                rem /= new_counts[d];
            }
            let i = multi[dir];
            let old = |j: usize| -> usize { (0..n).map(|d| if d == dir { j } else { multi[d] } * stride(&counts, d)).sum() };
            // Q_i = t P_{i-1} + (1 - t) P_i with t = i / (p + 1), homogeneous
            let t = i as f64 / (p + 1) as f64;
            let mut hw = 0.0;
            let mut hp = [0.0; 3];
            for (j, f) in [(i.checked_sub(1), t), ((i <= p).then_some(i), 1.0 - t)] {
                if let Some(j) = j {
                    if f != 0.0 {
                        let idx = old(j);
                        let wj = self.weights.as_ref().map_or(1.0, |w| w[idx]);
                        hw += f * wj;
                        for c in 0..n {
                            hp[c] += f * wj * self.control[idx * n + c];
                        }
                    }
                }
            }
            weights[flat] = hw;
            for c in 0..n {
                control[flat * n + c] = hp[c] / hw;
            }
        }
        self.degrees[dir] = p + 1;
        self.knots[dir] = [vec![0.0; p + 2], vec![1.0; p + 2]].concat();
        self.control = control;
        if self.weights.is_some() {
            self.weights = Some(weights);
        }
        Ok(())
    }

    /// Serializes to the line-oriented text format read by [`PatchMap::from_text`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# single-patch spline geometry");
        let _ = writeln!(s, "dim {}", self.dim);
        let degs: Vec<String> = self.degrees.iter().map(|d| d.to_string()).collect();
        let _ = writeln!(s, "degrees {}", degs.join(" "));
        for kv in &self.knots {
            let ks: Vec<String> = kv.iter().map(|k| format!("{k:e}")).collect();
            let _ = writeln!(s, "knots {}", ks.join(" "));
        }
        let _ = writeln!(s, "rational {}", if self.is_rational() { "yes" } else { "no" });
        let count = self.control.len() / self.dim;
        let _ = writeln!(s, "points {count}");
        for i in 0..count {
            let mut line: Vec<String> =
                self.control[i * self.dim..(i + 1) * self.dim].iter().map(|c| format!("{c:e}")).collect();
            if let Some(w) = &self.weights {
                line.push(format!("{:e}", w[i]));
            }
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (no, line) = lines.next().ok_or(Error::Parse { line: 0, message: format!("missing `{key}`") })?;
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or("");
            if !key.is_empty() && head != key {
                return Err(Error::Parse { line: no, message: format!("expected `{key}`, found `{head}`") });
            }
            let mut rest: Vec<String> = parts.map(str::to_string).collect();
            if key.is_empty() {
                rest.insert(0, head.to_string());
            }
            Ok((no, rest))
        };
        let num = |no: usize, s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| Error::Parse { line: no, message: format!("invalid number `{s}`") })
        };
        let int = |no: usize, s: &str| -> Result<usize> {
            s.parse::<usize>().map_err(|_| Error::Parse { line: no, message: format!("invalid integer `{s}`") })
        };
        let (no, v) = next("dim")?;
        let dim = int(no, v.first().map(String::as_str).unwrap_or(""))?;
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        let (no, v) = next("degrees")?;
        let degrees = v.iter().map(|s| int(no, s)).collect::<Result<Vec<_>>>()?;
        let mut knots = Vec::with_capacity(dim);
        for _ in 0..dim {
            let (no, v) = next("knots")?;
            knots.push(v.iter().map(|s| num(no, s)).collect::<Result<Vec<_>>>()?);
        }
        let (no, v) = next("rational")?;
        let rational = match v.first().map(String::as_str) {
            Some("yes") => true,
            Some("no") => false,
            _ => return Err(Error::Parse { line: no, message: "expected `yes` or `no`".into() }),
        };
        let (no, v) = next("points")?;
        let count = int(no, v.first().map(String::as_str).unwrap_or(""))?;
        let per_line = dim + usize::from(rational);
        let mut control = Vec::with_capacity(count * dim);
        let mut weights = Vec::with_capacity(count);
        for _ in 0..count {
            let (no, v) = next("")?;
            if v.len() != per_line {
                return Err(Error::Parse { line: no, message: format!("expected {per_line} values, got {}", v.len()) });
            }
            for s in &v[..dim] {
                control.push(num(no, s)?);
            }
            if rational {
                weights.push(num(no, &v[dim])?);
            }
        }
        PatchMap::new(degrees, knots, control, rational.then_some(weights))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        PatchMap::from_text(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

pub fn map_point(g: &PatchMap, xhat: &[f64]) -> Result<Vec<f64>> {
    Ok(g.eval(xhat)?.point)
}

pub fn jacobian(g: &PatchMap, xhat: &[f64]) -> Result<Vec<f64>> {
    Ok(g.eval(xhat)?.jacobian)
}

/// `K = |det J| J^{-1} J^{-T}` at a parameter point.
pub fn pullback_coefficient(g: &PatchMap, xhat: &[f64]) -> Result<Vec<f64>> {
    let ev = g.eval(xhat)?;
    coefficient_from_jacobian(g.dim(), &ev.jacobian, ev.det)
}

pub(crate) fn coefficient_from_jacobian(n: usize, jac: &[f64], det_j: f64) -> Result<Vec<f64>> {
    if det_j.is_nan() || det_j.abs() < SINGULAR_TOL {
        return Err(Error::SingularJacobian { det: det_j });
    }
    let inv = inverse(n, jac, det_j);
    let scale = det_j.abs();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = (0..n).map(|l| inv[i * n + l] * inv[j * n + l]).sum::<f64>() * scale;
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

pub(crate) fn det(n: usize, a: &[f64]) -> f64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] - a[1] * a[2],
        _ => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
    }
}

/// Inverse of a 1x1, 2x2 or 3x3 row-major matrix via the adjugate.
pub(crate) fn inverse(n: usize, a: &[f64], det: f64) -> Vec<f64> {
    match n {
        1 => vec![1.0 / a[0]],
        2 => vec![a[3] / det, -a[1] / det, -a[2] / det, a[0] / det],
        _ => {
            let c = |r0: usize, c0: usize, r1: usize, c1: usize| a[r0 * 3 + c0] * a[r1 * 3 + c1] - a[r0 * 3 + c1] * a[r1 * 3 + c0];
            vec![
                c(1, 1, 2, 2) / det,
                -c(0, 1, 2, 2) / det,
                c(0, 1, 1, 2) / det,
                -c(1, 0, 2, 2) / det,
                c(0, 0, 2, 2) / det,
                -c(0, 0, 1, 2) / det,
                c(1, 0, 2, 1) / det,
                -c(0, 0, 2, 1) / det,
                c(0, 0, 1, 1) / det,
            ]
        }
    }
}

/// Names accepted by [`builtin_geometry`].
pub const BUILTIN_GEOMETRIES: [&str; 4] = ["identity", "quarter_annulus", "quarter_annulus_bumps", "bent_box"];

/// Built-in test geometries.
///
/// * `identity` – degree-1 map of the unit square/cube onto itself (any `n`).
/// * `quarter_annulus` – exact degree-2 NURBS quarter annulus with radii 1 and
///   2; direction 0 is radial, direction 1 angular (counter-clockwise from the
///   positive x axis).
/// * `quarter_annulus_bumps` – the quarter annulus degree-elevated to 4 in the
///   angular direction, after which the three inner control points of the
///   outer arc are scaled radially by `1 + 0.015 (-1)^k`, `k = 1..3`. The map
///   stays a single smooth Bezier patch; the inner arc and the straight edges
///   are unchanged.
/// * `bent_box` – degree-2 Bezier volume on a 3x3x3 control grid. Control point
///   `(i, j, k)` starts at `(a, b, c) = (i, j, k) / 2`, is rotated about the
///   vertical axis through `(0.5, 0.5)` by `0.5 c` radians (twist) and lifted
///   by `0.3 * 4 a (1 - a)` in `z` (bend).
pub fn builtin_geometry(name: &str, n: usize) -> Result<PatchMap> {
    match (name, n) {
        ("identity", 1..=3) => Ok(identity(n)),
        ("quarter_annulus", 2) => Ok(quarter_annulus()),
        ("quarter_annulus_bumps", 2) => quarter_annulus_bumps(),
        ("bent_box", 3) => Ok(bent_box()),
        ("identity", _) => Err(Error::InvalidDimension(n)),
        (g, _) if BUILTIN_GEOMETRIES.contains(&g) => {
            Err(Error::InvalidGeometry(format!("geometry `{g}` is not available in {n}D")))
        }
        _ => Err(Error::UnknownGeometry(name.to_string())),
    }
}

fn identity(n: usize) -> PatchMap {
    let count = 1 << n;
    let mut control = Vec::with_capacity(count * n);
    for corner in 0..count {
        for d in 0..n {
            control.push(((corner >> d) & 1) as f64);
        }
    }
    PatchMap::new(vec![1; n], vec![vec![0.0, 0.0, 1.0, 1.0]; n], control, None).expect("valid identity map")
}

fn quarter_annulus() -> PatchMap {
    let radii = [1.0, 1.5, 2.0];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let dirs = [(1.0, 0.0, 1.0), (1.0, 1.0, s), (0.0, 1.0, 1.0)];
    let mut control = Vec::with_capacity(18);
    let mut weights = Vec::with_capacity(9);
    for &(dx, dy, w) in &dirs {
        for &r in &radii {
            control.push(r * dx);
            control.push(r * dy);
            weights.push(w);
        }
    }
    let k = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    PatchMap::new(vec![2, 2], vec![k.clone(), k], control, Some(weights)).expect("valid annulus")
}

fn quarter_annulus_bumps() -> Result<PatchMap> {
    let mut g = quarter_annulus();
    for _ in 0..2 {
        g.elevate_degree(1)?;
    }
    let counts = g.counts();
    let outer = counts[0] - 1;
    for k in 1..counts[1] - 1 {
        let idx = outer + k * counts[0];
        let factor = 1.0 + BUMP_AMPLITUDE * if k % 2 == 0 { 1.0 } else { -1.0 };
        g.control[2 * idx] *= factor;
        g.control[2 * idx + 1] *= factor;
    }
    Ok(g)
}

fn bent_box() -> PatchMap {
    let mut control = Vec::with_capacity(81);
    for k in 0..3 {
        for j in 0..3 {
            for i in 0..3 {
                let (a, b, c) = (i as f64 / 2.0, j as f64 / 2.0, k as f64 / 2.0);
                let theta = 0.5 * c;
                let (sn, cs) = theta.sin_cos();
                let (x, y) = (a - 0.5, b - 0.5);
                control.push(0.5 + cs * x - sn * y);
                control.push(0.5 + sn * x + cs * y);
                control.push(c + 0.3 * 4.0 * a * (1.0 - a));
            }
        }
    }
    let k = vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
    PatchMap::new(vec![2; 3], vec![k; 3], control, None).expect("valid bent box")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn affine(a: &[f64], b: &[f64]) -> PatchMap {
        let n = b.len();
        let count = 1 << n;
        let mut control = Vec::new();
        for corner in 0..count {
            let x: Vec<f64> = (0..n).map(|d| ((corner >> d) & 1) as f64).collect();
            for i in 0..n {
                control.push(b[i] + (0..n).map(|j| a[i * n + j] * x[j]).sum::<f64>());
            }
        }
        PatchMap::new(vec![1; n], vec![vec![0.0, 0.0, 1.0, 1.0]; n], control, None).unwrap()
    }

    /// Dense oracle: literal `J^{-1} J^{-T} / |det(J^{-1})|` with Gauss-Jordan inversion.
    fn oracle_coefficient(n: usize, j: &[f64]) -> Vec<f64> {
        let mut aug = vec![0.0; n * 2 * n];
        for r in 0..n {
            for c in 0..n {
                aug[r * 2 * n + c] = j[r * n + c];
            }
            aug[r * 2 * n + n + r] = 1.0;
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| aug[a * 2 * n + col].abs().total_cmp(&aug[b * 2 * n + col].abs())).unwrap();
            for c in 0..2 * n {
                aug.swap(col * 2 * n + c, piv * 2 * n + c);
            }
            let d = aug[col * 2 * n + col];
            for c in 0..2 * n {
                aug[col * 2 * n + c] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = aug[r * 2 * n + col];
                    for c in 0..2 * n {
                        aug[r * 2 * n + c] -= f * aug[col * 2 * n + c];
                    }
                }
            }
        }
        let inv: Vec<f64> = (0..n * n).map(|k| aug[(k / n) * 2 * n + n + k % n]).collect();
        let det_inv = det(n, &inv);
        let mut k = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                k[r * n + c] = (0..n).map(|l| inv[r * n + l] * inv[c * n + l]).sum::<f64>() / det_inv.abs();
            }
        }
        k
    }

    #[test]
    fn identity_map_is_identity() {
        for n in 1..=3 {
            let g = builtin_geometry("identity", n).unwrap();
            let x: Vec<f64> = (0..n).map(|d| 0.1 + 0.2 * d as f64).collect();
            let ev = g.eval(&x).unwrap();
            for d in 0..n {
                assert!((ev.point[d] - x[d]).abs() < 1e-15);
                for e in 0..n {
                    assert!((ev.jacobian[d * n + e] - f64::from(u8::from(d == e))).abs() < 1e-15);
                }
            }
            let k = pullback_coefficient(&g, &x).unwrap();
            for d in 0..n {
                assert!((k[d * n + d] - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn affine_jacobian_is_constant() {
        let a = [1.5, 0.3, -0.2, 0.8];
        let g = affine(&a, &[0.4, -1.0]);
        for x in [[0.0, 0.0], [0.3, 0.9], [1.0, 1.0]] {
            let jac = jacobian(&g, &x).unwrap();
            for i in 0..4 {
                assert!((jac[i] - a[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scaling_cancels_in_2d() {
        let g = affine(&[3.0, 0.0, 0.0, 3.0], &[0.0, 0.0]);
        let k = pullback_coefficient(&g, &[0.5, 0.5]).unwrap();
        assert!((k[0] - 1.0).abs() < 1e-14 && k[1].abs() < 1e-14 && (k[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn random_affine_matches_dense_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for n in [2usize, 3] {
            for _ in 0..20 {
                let mut a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                for d in 0..n {
                    a[d * n + d] += 2.5;
                }
                let b: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
                let g = affine(&a, &b);
                let x: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
                let k = pullback_coefficient(&g, &x).unwrap();
                let want = oracle_coefficient(n, &a);
                for i in 0..n * n {
                    assert!((k[i] - want[i]).abs() < 1e-12, "{k:?} vs {want:?}");
                }
            }
        }
    }

    #[test]
    fn quarter_annulus_radii() {
        let g = builtin_geometry("quarter_annulus", 2).unwrap();
        let r = |x: &[f64]| {
            let p = map_point(&g, x).unwrap();
            p[0].hypot(p[1])
        };
        assert!((r(&[0.0, 0.0]) - 1.0).abs() < 1e-14);
        assert!((r(&[1.0, 1.0]) - 2.0).abs() < 1e-14);
        for i in 0..=50 {
            let t = i as f64 / 50.0;
            assert!((r(&[0.0, t]) - 1.0).abs() < 1e-12);
            assert!((r(&[1.0, t]) - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bumps_keep_inner_arc_and_straight_edges() {
        let g = builtin_geometry("quarter_annulus_bumps", 2).unwrap();
        let base = builtin_geometry("quarter_annulus", 2).unwrap();
        for i in 0..=40 {
            let t = i as f64 / 40.0;
            let p = map_point(&g, &[0.0, t]).unwrap();
            assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
            let q = map_point(&g, &[t, 0.0]).unwrap();
            let q0 = map_point(&base, &[t, 0.0]).unwrap();
            assert!((q[0] - q0[0]).abs() < 1e-12 && q[1].abs() < 1e-12);
        }
        // outer arc really is perturbed
        let p = map_point(&g, &[1.0, 0.3]).unwrap();
        assert!((p[0].hypot(p[1]) - 2.0).abs() > 1e-3);
    }

    #[test]
    fn degree_elevation_preserves_map() {
        for (name, n) in [("quarter_annulus", 2), ("bent_box", 3)] {
            let base = builtin_geometry(name, n).unwrap();
            let mut g = base.clone();
            g.elevate_degree(n - 1).unwrap();
            g.elevate_degree(0).unwrap();
            assert_eq!(g.degrees()[0], 3);
            for &x in &[[0.1, 0.2, 0.3], [0.5, 0.5, 0.5], [0.97, 0.31, 1.0]] {
                let a = base.eval(&x[..n]).unwrap();
                let b = g.eval(&x[..n]).unwrap();
                for i in 0..n {
                    assert!((a.point[i] - b.point[i]).abs() < 1e-13);
                }
                for i in 0..n * n {
                    assert!((a.jacobian[i] - b.jacobian[i]).abs() < 1e-12);
                }
            }
        }
        let mut g = builtin_geometry("quarter_annulus", 2).unwrap();
        g.insert_knot(0, 0.5).unwrap();
        assert!(g.elevate_degree(0).is_err());
    }

    #[test]
    fn knot_insertion_preserves_map() {
        let base = builtin_geometry("quarter_annulus", 2).unwrap();
        let mut g = base.clone();
        g.insert_knot(1, 0.3).unwrap();
        g.insert_knot(0, 0.6).unwrap();
        g.insert_knot(1, 0.3).unwrap();
        for &x in &[[0.1, 0.2], [0.5, 0.5], [0.97, 0.31], [1.0, 1.0]] {
            let a = base.eval(&x).unwrap();
            let b = g.eval(&x).unwrap();
            for i in 0..2 {
                assert!((a.point[i] - b.point[i]).abs() < 1e-13);
            }
            for i in 0..4 {
                assert!((a.jacobian[i] - b.jacobian[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn determinant_sign_constant() {
        for (name, n, samples) in [("quarter_annulus", 2, 60), ("quarter_annulus_bumps", 2, 60), ("bent_box", 3, 20)] {
            let g = builtin_geometry(name, n).unwrap();
            let total = (samples + 1usize).pow(n as u32);
            for flat in 0..total {
                let x: Vec<f64> =
                    crate::splines::multi_index(flat, samples + 1, n).iter().map(|&i| i as f64 / samples as f64).collect();
                let ev = g.eval(&x).unwrap();
                assert!(ev.det > 1e-3, "{name} at {x:?}: det = {}", ev.det);
            }
        }
    }

    #[test]
    fn unknown_and_mismatched_geometries() {
        assert!(matches!(builtin_geometry("torus", 2), Err(Error::UnknownGeometry(_))));
        assert!(builtin_geometry("bent_box", 2).is_err());
        assert!(builtin_geometry("quarter_annulus", 3).is_err());
    }

    #[test]
    fn rejects_bad_construction_and_domain() {
        let k = vec![0.0, 0.0, 1.0, 1.0];
        assert!(PatchMap::new(vec![1, 1], vec![k.clone(), k.clone()], vec![0.0; 6], None).is_err());
        assert!(PatchMap::new(vec![1, 1], vec![k.clone(), k.clone()], vec![0.0; 8], Some(vec![1.0, 1.0, 0.0, 1.0])).is_err());
        let g = builtin_geometry("identity", 2).unwrap();
        assert!(matches!(g.eval(&[1.5, 0.0]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn singular_jacobian_rejected() {
        let g = affine(&[1.0, 2.0, 2.0, 4.0], &[0.0, 0.0]);
        assert!(matches!(pullback_coefficient(&g, &[0.5, 0.5]), Err(Error::SingularJacobian { .. })));
    }

    #[test]
    fn text_round_trip() {
        for (name, n) in [("quarter_annulus_bumps", 2), ("bent_box", 3)] {
            let g = builtin_geometry(name, n).unwrap();
            let back = PatchMap::from_text(&g.to_text()).unwrap();
            assert_eq!(g, back);
        }
        assert!(matches!(PatchMap::from_text("dim 2\ndegrees x 1\n"), Err(Error::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn jacobian_matches_finite_differences(x in 0.01f64..0.99, y in 0.01f64..0.99, z in 0.01f64..0.99) {
            for (name, n) in [("quarter_annulus_bumps", 2usize), ("bent_box", 3)] {
                let g = builtin_geometry(name, n).unwrap();
                let pt = [x, y, z];
                let xhat = &pt[..n];
                let jac = jacobian(&g, xhat).unwrap();
                let step = 1e-6;
                for j in 0..n {
                    let mut plus = xhat.to_vec();
                    let mut minus = xhat.to_vec();
                    plus[j] += step;
                    minus[j] -= step;
                    let fp = map_point(&g, &plus).unwrap();
                    let fm = map_point(&g, &minus).unwrap();
                    for i in 0..n {
                        let fd = (fp[i] - fm[i]) / (2.0 * step);
                        prop_assert!((fd - jac[i * n + j]).abs() < 1e-6);
                    }
                }
                let k = pullback_coefficient(&g, xhat).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        prop_assert!((k[i * n + j] - k[j * n + i]).abs() <= 1e-13 * k[i * n + i].abs().max(1.0));
                    }
                }
                // SPD: leading principal minors positive
                prop_assert!(k[0] > 0.0);
                prop_assert!(det(n, &k) > 0.0);
                if n == 3 {
                    prop_assert!(k[0] * k[4] - k[1] * k[3] > 0.0);
                }
            }
        }
    }
}
