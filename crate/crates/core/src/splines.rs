//! Univariate and tensor-product B-spline spaces on open uniform knot vectors.
//!
//! All indices are 0-based. A knot vector with `nel` elements and degree `p`
//! carries `nel + p` basis functions; on element `e` the nonzero functions are
//! `e, e + 1, ..., e + p`.

use crate::error::{Error, Result};

/// Locates the knot span containing `x` in a general open knot vector.
///
/// Returns the index `k` with `knots[k] <= x < knots[k + 1]`, clamped so that
/// `x = 1` falls into the last nonempty span.
pub(crate) fn find_span(knots: &[f64], degree: usize, x: f64) -> usize {
    let n = knots.len() - degree - 1;
    if x >= knots[n] {
        return n - 1;
    }
    if x <= knots[degree] {
        return degree;
    }
    let (mut lo, mut hi) = (degree, n);
    let mut mid = (lo + hi) / 2;
    while x < knots[mid] || x >= knots[mid + 1] {
        if x < knots[mid] {
            hi = mid;
        } else {
            lo = mid;
        }
        mid = (lo + hi) / 2;
    }
    mid
}

/// Values and first derivatives of the `degree + 1` basis functions that are
/// nonzero on knot span `span` (Cox-de Boor with the triangular table).
pub(crate) fn basis_and_derivs(
    knots: &[f64],
    degree: usize,
    span: usize,
    x: f64,
    values: &mut [f64],
    derivs: &mut [f64],
) {
    let p = degree;
    // ndu[j][r]: lower triangle holds knot differences, upper the basis values
    let mut ndu = vec![0.0; (p + 1) * (p + 1)];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0] = 1.0;
    for j in 1..=p {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j * (p + 1) + r] = right[r + 1] + left[j - r];
            let temp = ndu[r * (p + 1) + j - 1] / ndu[j * (p + 1) + r];
            ndu[r * (p + 1) + j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j * (p + 1) + j] = saved;
    }
    for r in 0..=p {
        values[r] = ndu[r * (p + 1) + p];
    }
    // first derivative: p * (N_{r,p-1} / (u_{r+p} - u_r) - N_{r+1,p-1} / (u_{r+p+1} - u_{r+1}))
    for r in 0..=p {
        let mut d = 0.0;
        if r >= 1 {
            d += ndu[(r - 1) * (p + 1) + p - 1] / ndu[p * (p + 1) + r - 1];
        }
        if r < p {
            d -= ndu[r * (p + 1) + p - 1] / ndu[p * (p + 1) + r];
        }
        derivs[r] = d * p as f64;
    }
}

/// Open uniform knot vector on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    nel: usize,
    knots: Vec<f64>,
}

/// Nonzero basis functions at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisEval {
    /// Element index; the nonzero functions are `span..=span + degree`.
    pub span: usize,
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
}

impl KnotVector {
    pub fn open_uniform(degree: usize, nel: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidDegree(degree));
        }
        if nel < 1 {
            return Err(Error::InvalidElementCount(nel));
        }
        let mut knots = Vec::with_capacity(nel + 2 * degree + 1);
        knots.extend(std::iter::repeat_n(0.0, degree));
        knots.extend((0..=nel).map(|i| i as f64 / nel as f64));
        knots.extend(std::iter::repeat_n(1.0, degree));
        Ok(KnotVector { degree, nel, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nel(&self) -> usize {
        self.nel
    }

    /// Element size `h = 1 / nel`.
    pub fn h(&self) -> f64 {
        1.0 / self.nel as f64
    }

    /// Number of basis functions, `nel + p`.
    pub fn dim(&self) -> usize {
        self.nel + self.degree
    }

    /// Full knot sequence including the repeated end knots.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Distinct breakpoints `i / nel`.
    pub fn breakpoints(&self) -> &[f64] {
        &self.knots[self.degree..=self.degree + self.nel]
    }

    /// Element containing `x`; `x = 1` belongs to the last element.
    pub fn element_of(&self, x: f64) -> usize {
        ((x * self.nel as f64).floor() as usize).min(self.nel - 1)
    }

    pub fn eval(&self, x: f64) -> Result<BasisEval> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfDomain { value: x });
        }
        let span = self.element_of(x);
        let mut values = vec![0.0; self.degree + 1];
        let mut derivs = vec![0.0; self.degree + 1];
        self.eval_on_element(span, x, &mut values, &mut derivs);
        Ok(BasisEval { span, values, derivs })
    }

    /// Evaluates the functions of element `element` at `x` without domain checks.
    pub(crate) fn eval_on_element(&self, element: usize, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        basis_and_derivs(&self.knots, self.degree, element + self.degree, x, values, derivs);
    }
}

/// Convenience wrapper matching the free-function form of the construction.
pub fn make_open_uniform_knots(degree: usize, nel: usize) -> Result<KnotVector> {
    KnotVector::open_uniform(degree, nel)
}

/// Tensor-product B-spline space with identical knot vectors in every direction.
///
/// Flat dof indices are lexicographic with the first direction fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSpace {
    dim: usize,
    knots: KnotVector,
}

impl TensorSpace {
    pub fn new(dim: usize, knots: KnotVector) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(TensorSpace { dim, knots })
    }

    pub fn uniform(dim: usize, degree: usize, nel: usize) -> Result<Self> {
        TensorSpace::new(dim, KnotVector::open_uniform(degree, nel)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.knots.degree
    }

    pub fn nel(&self) -> usize {
        self.knots.nel
    }

    /// Basis functions per direction.
    pub fn dofs_per_dir(&self) -> usize {
        self.knots.dim()
    }

    /// Total dof count `(nel + p)^n`.
    pub fn num_dofs(&self) -> usize {
        self.dofs_per_dir().pow(self.dim as u32)
    }

    pub fn num_elements(&self) -> usize {
        self.nel().pow(self.dim as u32)
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        flat_index(multi, self.dofs_per_dir())
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        multi_index(flat, self.dofs_per_dir(), self.dim)
    }

    /// Flat indices of the `(p + 1)^n` dofs supported on an element, in the
    /// same lexicographic order as the local basis.
    pub fn element_dofs(&self, element: &[usize]) -> Vec<usize> {
        let p1 = self.degree() + 1;
        let n = self.dofs_per_dir();
        let local = p1.pow(self.dim as u32);
        (0..local)
            .map(|a| {
                let mut rem = a;
                let mut flat = 0;
                let mut stride = 1;
                for &e in element {
                    flat += (e + rem % p1) * stride;
                    rem /= p1;
                    stride *= n;
                }
                flat
            })
            .collect()
    }

    /// Interior dof lattice used by the surrogate method.
    pub fn interior_lattice(&self) -> Result<InteriorLattice> {
        InteriorLattice::new(self)
    }
}

pub(crate) fn flat_index(multi: &[usize], extent: usize) -> usize {
    multi.iter().rev().fold(0, |acc, &i| acc * extent + i)
}

pub(crate) fn multi_index(mut flat: usize, extent: usize, dim: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(dim);
    for _ in 0..dim {
        out.push(flat % extent);
        flat /= extent;
    }
    out
}

/// Interior dofs `{2p, ..., nel + p - 1 - 2p}` per direction, identified with
/// a uniform parameter grid `t_k = k / (L - 1)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorLattice {
    dim: usize,
    offset: usize,
    len: usize,
    dofs_per_dir: usize,
}

impl InteriorLattice {
    pub fn new(space: &TensorSpace) -> Result<Self> {
        let p = space.degree();
        let nel = space.nel();
        if nel <= 3 * p + 1 {
            return Err(Error::MeshTooCoarse { nel, degree: p, bound: 3 * p + 1 });
        }
        Ok(InteriorLattice { dim: space.dim(), offset: 2 * p, len: nel - 3 * p, dofs_per_dir: space.dofs_per_dir() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per direction, `L = nel - 3p`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Total lattice size `L^n`.
    pub fn size(&self) -> usize {
        self.len.pow(self.dim as u32)
    }

    /// First interior dof index per direction (`2p`).
    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Interior dof indices along one direction.
    pub fn dof_indices(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }

    /// Parameter coordinate of lattice position `k`.
    pub fn coord(&self, k: usize) -> f64 {
        k as f64 / (self.len - 1) as f64
    }

    pub fn coords(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.coord(k)).collect()
    }

    /// Whether a dof (given per direction) lies in the lattice.
    pub fn contains_dof(&self, multi: &[usize]) -> bool {
        multi.iter().all(|&i| i >= self.offset && i < self.offset + self.len)
    }

    /// Flat dof index of a lattice multi-index.
    pub fn dof_of(&self, lattice_multi: &[usize]) -> usize {
        lattice_multi
            .iter()
            .rev()
            .fold(0, |acc, &k| acc * self.dofs_per_dir + k + self.offset)
    }
}

pub fn interior_lattice(space: &TensorSpace) -> Result<InteriorLattice> {
    InteriorLattice::new(space)
}
