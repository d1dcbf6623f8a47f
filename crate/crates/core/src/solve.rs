//! Poisson verification workflow: load vectors, Dirichlet data by boundary L2
//! projection, Jacobi-preconditioned conjugate gradients and relative L2/H1
//! errors against a manufactured solution.

use crate::assembly::ElementTables;
use crate::error::{Error, Result};
use crate::geometry::{inverse, PatchMap};
use crate::quadrature::GaussRule;
use crate::sparse::{CsrMatrix, TripletMatrix};
use crate::splines::{multi_index, TensorSpace};
use std::f64::consts::PI;
use std::sync::Arc;

type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Exact solution `u`, its gradient and the load `f = -Δu`, all on physical
/// coordinates. The Dirichlet datum is the trace of `u`.
#[derive(Clone)]
pub struct ManufacturedCase {
    dim: usize,
    u: ScalarField,
    grad: VectorField,
    f: ScalarField,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase").field("dim", &self.dim).finish_non_exhaustive()
    }
}

impl ManufacturedCase {
    pub fn new(
        dim: usize,
        u: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ManufacturedCase { dim, u: Arc::new(u), grad: Arc::new(grad), f: Arc::new(f) }
    }

    /// `u = prod_d sin(k pi x_d)`, `f = n k^2 pi^2 u`.
    pub fn sine(dim: usize, k: f64) -> Self {
        let w = k * PI;
        ManufacturedCase::new(
            dim,
            move |x| x.iter().map(|&xi| (w * xi).sin()).product(),
            move |x| {
                (0..x.len())
                    .map(|d| {
                        x.iter()
                            .enumerate()
                            .map(|(e, &xi)| if e == d { w * (w * xi).cos() } else { (w * xi).sin() })
                            .product()
                    })
                    .collect()
            },
            move |x| x.len() as f64 * w * w * x.iter().map(|&xi| (w * xi).sin()).product::<f64>(),
        )
    }

    /// The oscillatory benchmark `prod_d sin(20 pi x_d)`.
    pub fn oscillatory(dim: usize) -> Self {
        ManufacturedCase::sine(dim, 20.0)
    }

    /// A smooth, non-oscillatory solution `prod_d sin(pi x_d)`.
    pub fn smooth(dim: usize) -> Self {
        ManufacturedCase::sine(dim, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn u(&self, x: &[f64]) -> f64 {
        (self.u)(x)
    }

    pub fn grad_u(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Coefficient vector of a discrete field together with solver statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub coeffs: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// `b_i = int f(phi(x)) N_i(x) |det D phi(x)| dx` over the reference domain.
pub fn assemble_load(
    space: &TensorSpace,
    geometry: &PatchMap,
    rule: &GaussRule,
    f: &dyn Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    let tables = ElementTables::new(space, geometry, rule)?;
    let n = space.dim();
    let nloc = tables.local_size();
    let mut vals = vec![0.0; nloc];
    let mut grads = vec![0.0; n * nloc];
    let mut b = vec![0.0; space.num_dofs()];
    for flat in 0..space.num_elements() {
        let el = multi_index(flat, space.nel(), n);
        let dofs = space.element_dofs(&el);
        for q in 0..tables.points_per_element() {
            let (ev, w) = tables.point(&el, q, &mut vals, &mut grads);
            let fw = f(&ev.point) * w * ev.det.abs();
            for (a, &i) in dofs.iter().enumerate() {
                b[i] += fw * vals[a];
            }
        }
    }
    Ok(b)
}

/// Global L2 projection of a physical field onto the spline space.
pub fn l2_project(space: &TensorSpace, geometry: &PatchMap, rule: &GaussRule, g: &dyn Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
    let tables = ElementTables::new(space, geometry, rule)?;
    let n = space.dim();
    let nloc = tables.local_size();
    let mut vals = vec![0.0; nloc];
    let mut grads = vec![0.0; n * nloc];
    let mut mass = TripletMatrix::with_capacity(space.num_dofs(), space.num_dofs(), space.num_elements() * nloc * nloc);
    let mut rhs = vec![0.0; space.num_dofs()];
    for flat in 0..space.num_elements() {
        let el = multi_index(flat, space.nel(), n);
        let dofs = space.element_dofs(&el);
        let mut local = vec![0.0; nloc * nloc];
        for q in 0..tables.points_per_element() {
            let (ev, w) = tables.point(&el, q, &mut vals, &mut grads);
            let jw = w * ev.det.abs();
            let gv = g(&ev.point) * jw;
            for a in 0..nloc {
                rhs[dofs[a]] += gv * vals[a];
                for b in 0..nloc {
                    local[a * nloc + b] += jw * vals[a] * vals[b];
                }
            }
        }
        for a in 0..nloc {
            for b in 0..nloc {
                mass.push(dofs[a], dofs[b], local[a * nloc + b]);
            }
        }
    }
    Ok(conjugate_gradient(&mass.to_csr(), &rhs, 1e-14, 10 * space.num_dofs().max(10))?.coeffs)
}

/// Flat indices of all dofs on the boundary of the parameter domain.
pub fn boundary_dofs(space: &TensorSpace) -> Vec<usize> {
    let last = space.dofs_per_dir() - 1;
    (0..space.num_dofs()).filter(|&i| space.multi_index(i).iter().any(|&k| k == 0 || k == last)).collect()
}

/// Interior system after eliminating boundary dofs.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Global index of each reduced unknown.
    pub interior: Vec<usize>,
    pub boundary: Vec<usize>,
    /// Projected Dirichlet coefficients, aligned with `boundary`.
    pub boundary_values: Vec<f64>,
    pub num_dofs: usize,
}

impl ReducedSystem {
    /// Full coefficient vector from interior unknowns.
    pub fn expand(&self, interior_values: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.num_dofs];
        for (&i, &v) in self.interior.iter().zip(interior_values) {
            full[i] = v;
        }
        for (&i, &v) in self.boundary.iter().zip(&self.boundary_values) {
            full[i] = v;
        }
        full
    }
}

/// Boundary coefficients by L2 projection of `g` onto the trace space of all
/// faces together (one boundary mass matrix).
pub fn project_boundary(
    space: &TensorSpace,
    geometry: &PatchMap,
    rule: &GaussRule,
    g: &dyn Fn(&[f64]) -> f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = space.dim();
    let boundary = boundary_dofs(space);
    let mut local_index = vec![usize::MAX; space.num_dofs()];
    for (k, &i) in boundary.iter().enumerate() {
        local_index[i] = k;
    }
    let nb = boundary.len();
    let mut mass = TripletMatrix::new(nb, nb);
    let mut rhs = vec![0.0; nb];
    let kv = space.knots();
    let p1 = kv.degree() + 1;
    let nel = kv.nel();
    let last = space.dofs_per_dir() - 1;
    let bp = kv.breakpoints();
    let m = rule.len();
    for dir in 0..n {
        for side in [0usize, 1] {
            let x_fixed = side as f64;
            let tangent: Vec<usize> = (0..n).filter(|&d| d != dir).collect();
            let face_elems = nel.pow(tangent.len() as u32);
            let nloc = p1.pow(tangent.len() as u32);
            for fe in 0..face_elems {
                let tel = multi_index(fe, nel, tangent.len());
                let mut dofs = vec![0usize; nloc];
                let mut local = vec![0.0; nloc * nloc];
                let mut local_rhs = vec![0.0; nloc];
                for a in 0..nloc {
                    let la = multi_index(a, p1, tangent.len());
                    let mut multi = vec![0; n];
                    multi[dir] = side * last;
                    for (t, &d) in tangent.iter().enumerate() {
                        multi[d] = tel[t] + la[t];
                    }
                    dofs[a] = local_index[space.flat_index(&multi)];
                }
                for q in 0..m.pow(tangent.len() as u32) {
                    let qi = multi_index(q, m, tangent.len());
                    let mut xhat = vec![x_fixed; n];
                    let mut w = 1.0;
                    let mut tvals = Vec::with_capacity(tangent.len());
                    for (t, &d) in tangent.iter().enumerate() {
                        let (xs, ws) = rule.mapped(bp[tel[t]], bp[tel[t] + 1]);
                        xhat[d] = xs[qi[t]];
                        w *= ws[qi[t]];
                        let mut v = vec![0.0; p1];
                        let mut dv = vec![0.0; p1];
                        kv.eval_on_element(tel[t], xhat[d], &mut v, &mut dv);
                        tvals.push(v);
                    }
                    let ev = geometry.eval(&xhat)?;
                    let cols: Vec<Vec<f64>> =
                        tangent.iter().map(|&d| (0..n).map(|i| ev.jacobian[i * n + d]).collect()).collect();
                    let measure = match cols.len() {
                        0 => 1.0,
                        1 => cols[0].iter().map(|c| c * c).sum::<f64>().sqrt(),
                        _ => {
                            let (a, b) = (&cols[0], &cols[1]);
                            let c = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
                            c.iter().map(|v| v * v).sum::<f64>().sqrt()
                        }
                    };
                    let jw = w * measure;
                    let gv = g(&ev.point);
                    let basis: Vec<f64> = (0..nloc)
                        .map(|a| multi_index(a, p1, tangent.len()).iter().enumerate().map(|(t, &l)| tvals[t][l]).product())
                        .collect();
                    for a in 0..nloc {
                        local_rhs[a] += jw * gv * basis[a];
                        for b in 0..nloc {
                            local[a * nloc + b] += jw * basis[a] * basis[b];
                        }
                    }
                }
                for a in 0..nloc {
                    rhs[dofs[a]] += local_rhs[a];
                    for b in 0..nloc {
                        mass.push(dofs[a], dofs[b], local[a * nloc + b]);
                    }
                }
            }
        }
    }
    let values = conjugate_gradient(&mass.to_csr(), &rhs, 1e-14, 10 * nb.max(10))?.coeffs;
    Ok((boundary, values))
}

/// Eliminates Dirichlet dofs: `A_II u_I = b_I - A_IB u_B`.
pub fn apply_dirichlet(
    matrix: &CsrMatrix,
    rhs: &[f64],
    space: &TensorSpace,
    geometry: &PatchMap,
    rule: &GaussRule,
    g: &dyn Fn(&[f64]) -> f64,
) -> Result<ReducedSystem> {
    let (boundary, boundary_values) = project_boundary(space, geometry, rule, g)?;
    let total = space.num_dofs();
    if matrix.nrows() != total || rhs.len() != total {
        return Err(Error::DimensionMismatch(format!("system of size {} for {total} dofs", matrix.nrows())));
    }
    let mut fixed = vec![None; total];
    for (&i, &v) in boundary.iter().zip(&boundary_values) {
        fixed[i] = Some(v);
    }
    let interior: Vec<usize> = (0..total).filter(|&i| fixed[i].is_none()).collect();
    let mut reduced_index = vec![usize::MAX; total];
    for (k, &i) in interior.iter().enumerate() {
        reduced_index[i] = k;
    }
    let mut trip = TripletMatrix::with_capacity(interior.len(), interior.len(), matrix.nnz());
    let mut reduced_rhs = Vec::with_capacity(interior.len());
    for (k, &i) in interior.iter().enumerate() {
        let (cols, vals) = matrix.row(i);
        let mut b = rhs[i];
        for (&c, &v) in cols.iter().zip(vals) {
            match fixed[c] {
                Some(uc) => b -= v * uc,
                None => trip.push(k, reduced_index[c], v),
            }
        }
        reduced_rhs.push(b);
    }
    Ok(ReducedSystem {
        matrix: trip.to_csr(),
        rhs: reduced_rhs,
        interior,
        boundary,
        boundary_values,
        num_dofs: total,
    })
}

/// Jacobi-preconditioned conjugate gradients. Stops when the true relative
/// residual `||A x - b|| / ||b||` drops below `tol`.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<DiscreteSolution> {
    let n = b.len();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix, rhs of length {n}", a.nrows(), a.ncols())));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(DiscreteSolution { coeffs: x, iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut ax = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut residual = 1.0;
    while iterations < max_iter {
        a.mul_vec(&p, &mut ax);
        let pap = dot(&p, &ax);
        if pap.is_nan() || pap <= 0.0 {
            return Err(Error::NotConverged { iterations, residual });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        iterations += 1;
        if norm(&r) / bnorm < tol {
            // confirm with the true residual and restart from it if the
            // recurrence has drifted
            a.mul_vec(&x, &mut ax);
            for i in 0..n {
                r[i] = b[i] - ax[i];
            }
            residual = norm(&r) / bnorm;
            if residual < tol {
                return Ok(DiscreteSolution { coeffs: x, iterations, residual });
            }
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    a.mul_vec(&x, &mut ax);
    residual = norm(&b.iter().zip(&ax).map(|(b, ax)| b - ax).collect::<Vec<_>>()) / bnorm;
    Err(Error::NotConverged { iterations, residual })
}

/// Solves a reduced system to relative residual `tol` (at most `10 N` iterations)
/// and expands the result to all dofs.
pub fn solve(system: &ReducedSystem, tol: f64) -> Result<DiscreteSolution> {
    let max_iter = 10 * system.rhs.len().max(1);
    let sol = conjugate_gradient(&system.matrix, &system.rhs, tol, max_iter)?;
    Ok(DiscreteSolution { coeffs: system.expand(&sol.coeffs), ..sol })
}

/// Relative errors of a discrete field against the exact solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeErrors {
    pub l2: f64,
    /// Full H1 norm (value and gradient).
    pub h1: f64,
}

/// Relative L2 and H1 errors over the physical domain using `rule` on every
/// element.
pub fn compute_errors(
    space: &TensorSpace,
    geometry: &PatchMap,
    coeffs: &[f64],
    case: &ManufacturedCase,
    rule: &GaussRule,
) -> Result<RelativeErrors> {
    if coeffs.len() != space.num_dofs() {
        return Err(Error::DimensionMismatch(format!("{} coefficients for {} dofs", coeffs.len(), space.num_dofs())));
    }
    let tables = ElementTables::new(space, geometry, rule)?;
    let n = space.dim();
    let nloc = tables.local_size();
    let mut vals = vec![0.0; nloc];
    let mut grads = vec![0.0; n * nloc];
    let (mut e0, mut e1, mut u0, mut u1) = (0.0, 0.0, 0.0, 0.0);
    for flat in 0..space.num_elements() {
        let el = multi_index(flat, space.nel(), n);
        let dofs = space.element_dofs(&el);
        for q in 0..tables.points_per_element() {
            let (ev, w) = tables.point(&el, q, &mut vals, &mut grads);
            let jw = w * ev.det.abs();
            let uh: f64 = dofs.iter().zip(&vals).map(|(&i, v)| coeffs[i] * v).sum();
            let ref_grad: Vec<f64> =
                (0..n).map(|d| dofs.iter().enumerate().map(|(a, &i)| coeffs[i] * grads[d * nloc + a]).sum()).collect();
            // physical gradient: J^{-T} times the reference gradient
            let inv = inverse(n, &ev.jacobian, ev.det);
            let u = case.u(&ev.point);
            let gu = case.grad_u(&ev.point);
            for i in 0..n {
                let gh: f64 = (0..n).map(|k| inv[k * n + i] * ref_grad[k]).sum();
                e1 += jw * (gu[i] - gh).powi(2);
                u1 += jw * gu[i] * gu[i];
            }
            e0 += jw * (u - uh).powi(2);
            u0 += jw * u * u;
        }
    }
    Ok(RelativeErrors { l2: (e0 / u0).sqrt(), h1: ((e0 + e1) / (u0 + u1)).sqrt() })
}

/// `max |A_ij - B_ij|` over the union of both patterns.
pub fn matrix_max_diff(a: &CsrMatrix, b: &CsrMatrix) -> Result<f64> {
    a.max_abs_diff(b)
}
