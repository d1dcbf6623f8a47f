//! Galerkin assembly of the reference-domain stiffness matrix
//! `a(w, v) = int grad w^T K grad v`, over all elements or over a mask of
//! active elements.
//!
//! Elements are swept column by column along the first direction. Every
//! global entry accumulates its element contributions in sweep order, so an
//! entry whose support is fully active is bitwise identical between masked
//! and unmasked assembly.

use crate::error::{Error, Result};
use crate::geometry::{coefficient_from_jacobian, DirBasis, MapEval, PatchMap};
use crate::quadrature::GaussRule;
use crate::sparse::CsrMatrix;
use crate::splines::{multi_index, TensorSpace};
use rayon::prelude::*;

/// Active elements for masked quadrature.
///
/// An element is active when any of its indices lies in the near-boundary set
/// or all of its indices lie in the interior set (which contains the
/// near-boundary set). A column along the first direction whose index is a
/// near-boundary index is therefore fully active.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementMask {
    dim: usize,
    nel: usize,
    boundary: Vec<usize>,
    interior: Vec<usize>,
    in_boundary: Vec<bool>,
    in_interior: Vec<bool>,
    all: Vec<usize>,
}

impl ElementMask {
    /// Builds a mask from 0-based index sets. `interior` is merged with
    /// `boundary`; both are sorted and deduplicated.
    pub fn new(dim: usize, nel: usize, boundary: &[usize], interior: &[usize]) -> Result<Self> {
        if let Some(&bad) = boundary.iter().chain(interior).find(|&&i| i >= nel) {
            return Err(Error::InvalidElement { index: vec![bad], nel });
        }
        let mut in_boundary = vec![false; nel];
        let mut in_interior = vec![false; nel];
        for &i in boundary {
            in_boundary[i] = true;
            in_interior[i] = true;
        }
        for &i in interior {
            in_interior[i] = true;
        }
        let collect = |flags: &[bool]| flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect();
        Ok(ElementMask {
            dim,
            nel,
            boundary: collect(&in_boundary),
            interior: collect(&in_interior),
            in_boundary,
            in_interior,
            all: (0..nel).collect(),
        })
    }

    /// Every element active.
    pub fn full(dim: usize, nel: usize) -> Self {
        let all: Vec<usize> = (0..nel).collect();
        ElementMask::new(dim, nel, &all, &all).expect("indices in range")
    }

    pub fn boundary_set(&self) -> &[usize] {
        &self.boundary
    }

    /// Interior set including the near-boundary indices.
    pub fn interior_set(&self) -> &[usize] {
        &self.interior
    }

    pub fn is_active(&self, element: &[usize]) -> bool {
        element.iter().any(|&e| self.in_boundary[e]) || element.iter().all(|&e| self.in_interior[e])
    }

    /// Active indices along the second direction for 2D column `e0`.
    pub fn column_mask(&self, e0: usize) -> &[usize] {
        if self.in_boundary[e0] {
            &self.all
        } else if self.in_interior[e0] {
            &self.interior
        } else {
            &self.boundary
        }
    }

    pub fn num_active(&self) -> usize {
        (0..self.nel.pow(self.dim as u32)).filter(|&f| self.is_active(&multi_index(f, self.nel, self.dim))).count()
    }
}

/// Per-direction basis tables at the Gauss points of every element.
///
/// The analysis knot vector is identical in all directions, so its table is
/// shared; the geometry has one table per direction.
pub(crate) struct ElementTables<'a> {
    pub space: &'a TensorSpace,
    pub geometry: &'a PatchMap,
    pub m: usize,
    pub p1: usize,
    /// `[e][k]` quadrature weights along one direction.
    pub weights: Vec<f64>,
    /// `[e][k][a]`
    pub values: Vec<f64>,
    pub derivs: Vec<f64>,
    /// `[d][e * m + k]`
    pub geo: Vec<Vec<DirBasis>>,
}

impl<'a> ElementTables<'a> {
    pub fn new(space: &'a TensorSpace, geometry: &'a PatchMap, rule: &GaussRule) -> Result<Self> {
        if geometry.dim() != space.dim() {
            return Err(Error::DimensionMismatch(format!(
                "geometry is {}D, space is {}D",
                geometry.dim(),
                space.dim()
            )));
        }
        let kv = space.knots();
        let nel = kv.nel();
        let m = rule.len();
        let p1 = kv.degree() + 1;
        let bp = kv.breakpoints();
        let mut nodes = Vec::with_capacity(nel * m);
        let mut weights = Vec::with_capacity(nel * m);
        let mut values = vec![0.0; nel * m * p1];
        let mut derivs = vec![0.0; nel * m * p1];
        for e in 0..nel {
            let (xs, ws) = rule.mapped(bp[e], bp[e + 1]);
            for k in 0..m {
                let off = (e * m + k) * p1;
                kv.eval_on_element(e, xs[k], &mut values[off..off + p1], &mut derivs[off..off + p1]);
            }
            nodes.extend(xs);
            weights.extend(ws);
        }
        let geo = (0..space.dim()).map(|d| nodes.iter().map(|&x| geometry.dir_basis(d, x)).collect()).collect();
        Ok(ElementTables { space, geometry, m, p1, weights, values, derivs, geo })
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn points_per_element(&self) -> usize {
        self.m.pow(self.dim() as u32)
    }

    pub fn local_size(&self) -> usize {
        self.p1.pow(self.dim() as u32)
    }

    /// Fills per-qp data for quadrature point `q` of `element`: the geometry
    /// evaluation, the reference weight, basis values `vals[a]` and reference
    /// gradients `grads[i * nloc + a]`.
    pub fn point(&self, element: &[usize], q: usize, vals: &mut [f64], grads: &mut [f64]) -> (MapEval, f64) {
        let n = self.dim();
        let (m, p1) = (self.m, self.p1);
        let nloc = self.local_size();
        let mut ks = [0usize; 3];
        let mut rem = q;
        let mut weight = 1.0;
        let mut bases: [&DirBasis; 3] = [&self.geo[0][0]; 3];
        for d in 0..n {
            ks[d] = rem % m;
            rem /= m;
            let idx = element[d] * m + ks[d];
            weight *= self.weights[idx];
            bases[d] = &self.geo[d][idx];
        }
        let ev = self.geometry.eval_with(&bases[..n]);
        let off = |d: usize| (element[d] * m + ks[d]) * p1;
        for a in 0..nloc {
            let mut r = a;
            let mut loc = [0usize; 3];
            for l in loc.iter_mut().take(n) {
                *l = r % p1;
                r /= p1;
            }
            let mut v = 1.0;
            for d in 0..n {
                v *= self.values[off(d) + loc[d]];
            }
            vals[a] = v;
            for i in 0..n {
                let mut g = 1.0;
                for d in 0..n {
                    g *= if d == i { self.derivs[off(d) + loc[d]] } else { self.values[off(d) + loc[d]] };
                }
                grads[i * nloc + a] = g;
            }
        }
        (ev, weight)
    }

    /// Dense local stiffness, row-major `nloc x nloc`, exactly symmetric.
    pub fn local_stiffness(&self, element: &[usize], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let nloc = self.local_size();
        let mut vals = vec![0.0; nloc];
        let mut grads = vec![0.0; n * nloc];
        let mut kgrad = vec![0.0; n * nloc];
        out.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..self.points_per_element() {
            let (ev, w) = self.point(element, q, &mut vals, &mut grads);
            let coeff = coefficient_from_jacobian(n, &ev.jacobian, ev.det)?;
            for i in 0..n {
                for a in 0..nloc {
                    kgrad[i * nloc + a] = w * (0..n).map(|j| coeff[i * n + j] * grads[j * nloc + a]).sum::<f64>();
                }
            }
            for a in 0..nloc {
                for b in a..nloc {
                    let mut s = 0.0;
                    for i in 0..n {
                        s += grads[i * nloc + a] * kgrad[i * nloc + b];
                    }
                    out[a * nloc + b] += s;
                }
            }
        }
        for a in 0..nloc {
            for b in 0..a {
                out[a * nloc + b] = out[b * nloc + a];
            }
        }
        Ok(())
    }
}

/// Local stiffness matrix of one element and its global dof indices.
pub fn local_stiffness(
    space: &TensorSpace,
    geometry: &PatchMap,
    rule: &GaussRule,
    element: &[usize],
) -> Result<(Vec<f64>, Vec<usize>)> {
    if element.len() != space.dim() || element.iter().any(|&e| e >= space.nel()) {
        return Err(Error::InvalidElement { index: element.to_vec(), nel: space.nel() });
    }
    let tables = ElementTables::new(space, geometry, rule)?;
    let nloc = tables.local_size();
    let mut local = vec![0.0; nloc * nloc];
    tables.local_stiffness(element, &mut local)?;
    Ok((local, space.element_dofs(element)))
}

/// Zero matrix carrying the full tensor-product band pattern: row `i` couples
/// to every dof within `p` in each direction.
pub fn stiffness_pattern(space: &TensorSpace) -> CsrMatrix {
    let n = space.dofs_per_dir();
    let p = space.degree();
    let dim = space.dim();
    let total = space.num_dofs();
    let lo: Vec<usize> = (0..n).map(|i| i.saturating_sub(p)).collect();
    let hi: Vec<usize> = (0..n).map(|i| (i + p).min(n - 1)).collect();
    let mut row_ptr = Vec::with_capacity(total + 1);
    let mut cols = Vec::with_capacity(total * (2 * p + 1).pow(dim as u32));
    row_ptr.push(0);
    for flat in 0..total {
        let mut m = [0usize; 3];
        let mut rem = flat;
        for v in m.iter_mut().take(dim) {
            *v = rem % n;
            rem /= n;
        }
        let (r1, r2) = match dim {
            1 => ((0, 0), (0, 0)),
            2 => ((lo[m[1]], hi[m[1]]), (0, 0)),
            _ => ((lo[m[1]], hi[m[1]]), (lo[m[2]], hi[m[2]])),
        };
        for c2 in r2.0..=r2.1 {
            for c1 in r1.0..=r1.1 {
                let base = (c2 * n + c1) * n;
                cols.extend((lo[m[0]]..=hi[m[0]]).map(|c0| base + c0));
            }
        }
        row_ptr.push(cols.len());
    }
    CsrMatrix::from_pattern(total, total, row_ptr, cols)
}

/// Elements of column `e0` (first index fixed) in sweep order, remaining
/// directions lexicographic with the second direction fastest.
fn column_elements<'m>(space: &TensorSpace, e0: usize, mask: Option<&'m ElementMask>) -> impl Iterator<Item = [usize; 3]> + 'm {
    let nel = space.nel();
    let dim = space.dim();
    let count = nel.pow(dim as u32 - 1);
    (0..count)
        .map(move |r| [e0, r % nel, if dim == 3 { r / nel } else { 0 }])
        .filter(move |el| mask.is_none_or(|m| m.is_active(&el[..dim])))
}

/// Adds a local matrix; the element's columns within one row are contiguous
/// runs of `p + 1` entries along the first direction.
fn scatter(matrix: &mut CsrMatrix, dofs: &[usize], local: &[f64], p1: usize) {
    let nloc = dofs.len();
    for (a, &i) in dofs.iter().enumerate() {
        for run in (0..nloc).step_by(p1) {
            let start = matrix.position(i, dofs[run]).expect("entry in tensor pattern");
            let vals = &mut matrix.values_mut()[start..start + p1];
            for (v, l) in vals.iter_mut().zip(&local[a * nloc + run..a * nloc + run + p1]) {
                *v += l;
            }
        }
    }
}

/// Dof indices and dense local matrices of one element column.
type ColumnMatrices = Vec<(Vec<usize>, Vec<f64>)>;

/// Assembles the stiffness matrix over all elements (`mask = None`) or over
/// the active elements of `mask`. Entries not touched by any active element
/// stay as explicit zeros in the band pattern.
pub fn assemble_stiffness(
    space: &TensorSpace,
    geometry: &PatchMap,
    rule: &GaussRule,
    mask: Option<&ElementMask>,
) -> Result<CsrMatrix> {
    assemble_stiffness_threaded(space, geometry, rule, mask, 1)
}

/// As [`assemble_stiffness`], computing element matrices of up to `threads`
/// columns concurrently. Columns are scattered in sweep order, so the result
/// does not depend on the thread count.
pub fn assemble_stiffness_threaded(
    space: &TensorSpace,
    geometry: &PatchMap,
    rule: &GaussRule,
    mask: Option<&ElementMask>,
    threads: usize,
) -> Result<CsrMatrix> {
    if let Some(m) = mask {
        if m.nel != space.nel() || m.dim != space.dim() {
            return Err(Error::DimensionMismatch("element mask does not match the space".into()));
        }
    }
    let tables = ElementTables::new(space, geometry, rule)?;
    let nloc = tables.local_size();
    let mut matrix = stiffness_pattern(space);
    let nel = space.nel();
    if threads <= 1 {
        let mut local = vec![0.0; nloc * nloc];
        for e0 in 0..nel {
            for el in column_elements(space, e0, mask) {
                let el = &el[..space.dim()];
                tables.local_stiffness(el, &mut local)?;
                scatter(&mut matrix, &space.element_dofs(el), &local, tables.p1);
            }
        }
        return Ok(matrix);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let columns: Vec<usize> = (0..nel).collect();
    for batch in columns.chunks(threads) {
        let buffers: Vec<Result<ColumnMatrices>> = pool.install(|| {
            batch
                .par_iter()
                .map(|&e0| {
                    column_elements(space, e0, mask)
                        .map(|el| {
                            let el = &el[..space.dim()];
                            let mut local = vec![0.0; nloc * nloc];
                            tables.local_stiffness(el, &mut local)?;
                            Ok((space.element_dofs(el), local))
                        })
                        .collect()
                })
                .collect()
        });
        for buf in buffers {
            for (dofs, local) in buf? {
                scatter(&mut matrix, &dofs, &local, tables.p1);
            }
        }
    }
    Ok(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builtin_geometry;
    use crate::quadrature::gauss_rule;

    #[test]
    fn q1_element_on_unit_square() {
        let space = TensorSpace::uniform(2, 1, 1).unwrap();
        let g = builtin_geometry("identity", 2).unwrap();
        let (k, dofs) = local_stiffness(&space, &g, &gauss_rule(2).unwrap(), &[0, 0]).unwrap();
        assert_eq!(dofs, vec![0, 1, 2, 3]);
        // oracle: int over [0,1]^2 of grad N_a . grad N_b for bilinear corner functions
        // diagonal 2/3, edge neighbours -1/6, opposite corners -1/3
        let want = [
            [2.0 / 3.0, -1.0 / 6.0, -1.0 / 6.0, -1.0 / 3.0],
            [-1.0 / 6.0, 2.0 / 3.0, -1.0 / 3.0, -1.0 / 6.0],
            [-1.0 / 6.0, -1.0 / 3.0, 2.0 / 3.0, -1.0 / 6.0],
            [-1.0 / 3.0, -1.0 / 6.0, -1.0 / 6.0, 2.0 / 3.0],
        ];
        for a in 0..4 {
            for b in 0..4 {
                assert!((k[a * 4 + b] - want[a][b]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn local_matrix_symmetric_with_zero_row_sums() {
        let space = TensorSpace::uniform(2, 3, 6).unwrap();
        let g = builtin_geometry("quarter_annulus_bumps", 2).unwrap();
        let rule = gauss_rule(4).unwrap();
        let (k, _) = local_stiffness(&space, &g, &rule, &[2, 5]).unwrap();
        let nloc = 16;
        let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for a in 0..nloc {
            let s: f64 = k[a * nloc..(a + 1) * nloc].iter().sum();
            assert!(s.abs() < 1e-12 * scale.max(1.0));
            for b in 0..nloc {
                assert_eq!(k[a * nloc + b], k[b * nloc + a]);
            }
        }
        assert!(local_stiffness(&space, &g, &rule, &[6, 0]).is_err());
    }

    #[test]
    fn full_mask_equals_no_mask() {
        let space = TensorSpace::uniform(2, 2, 9).unwrap();
        let g = builtin_geometry("quarter_annulus", 2).unwrap();
        let rule = gauss_rule(3).unwrap();
        let a = assemble_stiffness(&space, &g, &rule, None).unwrap();
        let b = assemble_stiffness(&space, &g, &rule, Some(&ElementMask::full(2, 9))).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stiffness_is_symmetric_with_constant_kernel() {
        for (name, dim, nel) in [("quarter_annulus_bumps", 2, 12), ("bent_box", 3, 5)] {
            let space = TensorSpace::uniform(dim, 2, nel).unwrap();
            let g = builtin_geometry(name, dim).unwrap();
            let a = assemble_stiffness(&space, &g, &gauss_rule(3).unwrap(), None).unwrap();
            assert!(a.is_symmetric_bitwise());
            let dmax = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for s in a.row_sums() {
                assert!(s.abs() <= 1e-12 * dmax, "{name}: row sum {s}");
            }
            assert!(a.diagonal().iter().all(|&d| d > 0.0));
        }
    }

    #[test]
    fn boundary_only_mask_keeps_boundary_rows_exact() {
        let (p, nel) = (2, 14);
        let space = TensorSpace::uniform(2, p, nel).unwrap();
        let g = builtin_geometry("quarter_annulus_bumps", 2).unwrap();
        let rule = gauss_rule(3).unwrap();
        let full = assemble_stiffness(&space, &g, &rule, None).unwrap();
        let bset: Vec<usize> = (0..2 * p).chain(nel - 2 * p..nel).collect();
        let mask = ElementMask::new(2, nel, &bset, &[]).unwrap();
        let part = assemble_stiffness(&space, &g, &rule, Some(&mask)).unwrap();
        let n = space.dofs_per_dir();
        for (r, c, v) in full.iter() {
            let mr = space.multi_index(r);
            let mc = space.multi_index(c);
            let outside = |m: &[usize]| m.iter().any(|&i| i < 2 * p || i + 2 * p >= n);
            if outside(&mr) || outside(&mc) {
                assert_eq!(part.get(r, c).to_bits(), v.to_bits(), "({r},{c})");
            }
        }
        assert!(full.max_abs_diff(&part).unwrap() > 0.0);
    }

    #[test]
    fn threaded_assembly_matches_serial() {
        let space = TensorSpace::uniform(3, 2, 6).unwrap();
        let g = builtin_geometry("bent_box", 3).unwrap();
        let rule = gauss_rule(3).unwrap();
        let a = assemble_stiffness(&space, &g, &rule, None).unwrap();
        let b = assemble_stiffness_threaded(&space, &g, &rule, None, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn quadrature_sufficiency_on_identity() {
        let space = TensorSpace::uniform(2, 3, 8).unwrap();
        let g = builtin_geometry("identity", 2).unwrap();
        let a = assemble_stiffness(&space, &g, &gauss_rule(4).unwrap(), None).unwrap();
        let b = assemble_stiffness(&space, &g, &gauss_rule(5).unwrap(), None).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-10);
    }

    #[test]
    fn column_mask_in_2d() {
        let mask = ElementMask::new(2, 10, &[0, 9], &[4, 5]).unwrap();
        assert_eq!(mask.column_mask(0).len(), 10);
        assert_eq!(mask.column_mask(4), &[0, 4, 5, 9]);
        assert_eq!(mask.column_mask(2), &[0, 9]);
        assert!(mask.is_active(&[4, 5]));
        assert!(!mask.is_active(&[4, 3]));
        assert!(mask.is_active(&[3, 9]));
        assert!(ElementMask::new(2, 10, &[10], &[]).is_err());
    }
}
