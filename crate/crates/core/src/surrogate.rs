//! Surrogate stiffness assembly.
//!
//! Quadrature runs only on the near-boundary elements and on small element
//! patches around a coarse set of sample rows. Every off-diagonal entry that
//! couples two interior lattice dofs is then replaced by the value of a spline
//! interpolant of its stencil function, i.e. of the map `x_i -> A[i, i + shift]`
//! sampled every `M` lattice points. The diagonal is recovered from the
//! zero row-sum condition, so the result is symmetric and annihilates
//! constants exactly like the true stiffness matrix.
//!
//! Index sets are 0-based. [`to_one_based`] converts them for display.

use crate::assembly::{assemble_stiffness_threaded, ElementMask};
use crate::error::{Error, Result};
use crate::geometry::PatchMap;
use crate::interpolation::GridInterpolant;
use crate::quadrature::GaussRule;
use crate::sparse::CsrMatrix;
use crate::splines::{multi_index, InteriorLattice, TensorSpace};
use rayon::prelude::*;

/// Skip parameter `M` and interpolation degree `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SurrogateConfig {
    skip: usize,
    degree: usize,
}

impl SurrogateConfig {
    pub fn new(skip: usize, degree: usize) -> Result<Self> {
        if skip < 1 {
            return Err(Error::InvalidSkip);
        }
        if degree != 1 && degree != 3 {
            return Err(Error::InvalidInterpDegree(degree));
        }
        Ok(SurrogateConfig { skip, degree })
    }

    pub fn skip(&self) -> usize {
        self.skip
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Sampling length `H = M h`.
    pub fn sampling_length(&self, space: &TensorSpace) -> f64 {
        self.skip as f64 * space.knots().h()
    }
}

pub fn to_one_based(set: &[usize]) -> Vec<usize> {
    set.iter().map(|i| i + 1).collect()
}

fn check_mask_preconditions(p: usize, nel: usize) -> Result<()> {
    if p < 1 {
        return Err(Error::InvalidDegree(p));
    }
    if nel <= 4 * p {
        return Err(Error::MeshTooCoarse { nel, degree: p, bound: 4 * p });
    }
    Ok(())
}

/// Near-boundary element indices: the first and last `2p` elements.
pub fn boundary_mask(p: usize, nel: usize) -> Result<Vec<usize>> {
    check_mask_preconditions(p, nel)?;
    Ok((0..2 * p).chain(nel - 2 * p..nel).collect())
}

/// Element indices (per direction) needed to sample the stencil functions,
/// united with the near-boundary indices.
///
/// With `K = nel - 3p - 1`, patch `k` covers elements `kM + p ..= kM + 2p`
/// for `0 <= k <= K / M`, plus a closing patch `K + p ..= K + 2p`. Each patch
/// is the support of the sample row whose lattice index is `kM` (or `K`).
pub fn interior_mask(p: usize, skip: usize, nel: usize) -> Result<Vec<usize>> {
    check_mask_preconditions(p, nel)?;
    if skip < 1 {
        return Err(Error::InvalidSkip);
    }
    let k_last = nel - 3 * p - 1;
    let mut flags = vec![false; nel];
    let starts = (0..=k_last / skip).map(|k| k * skip).chain(std::iter::once(k_last));
    for s in starts {
        for e in s + p..=s + 2 * p {
            flags[e] = true;
        }
    }
    for e in boundary_mask(p, nel)? {
        flags[e] = true;
    }
    Ok(flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect())
}

/// Element mask used by the surrogate's quadrature pass.
pub fn element_mask(space: &TensorSpace, skip: usize) -> Result<ElementMask> {
    let (p, nel) = (space.degree(), space.nel());
    ElementMask::new(space.dim(), nel, &boundary_mask(p, nel)?, &interior_mask(p, skip, nel)?)
}

/// Lattice positions sampled along one direction: every `M`-th point plus the
/// last point.
pub fn sample_indices(len: usize, skip: usize, degree: usize) -> Result<Vec<usize>> {
    if len < 2 {
        return Err(Error::TooFewSamples { count: len, degree });
    }
    if skip < 1 {
        return Err(Error::InvalidSkip);
    }
    let mut s: Vec<usize> = (0..len).step_by(skip).collect();
    if *s.last().expect("nonempty") != len - 1 {
        s.push(len - 1);
    }
    if s.len() < degree + 1 {
        return Err(Error::TooFewSamples { count: s.len(), degree });
    }
    Ok(s)
}

/// Flat dof indices of the sample rows (all lattice points whose per-direction
/// positions lie in `samples`), ascending.
///
/// With `truncate`, only rows below `(2p + 1)(nel + p)` are returned; these
/// already determine the per-direction sample supports and are enough for
/// [`interior_set_from_rows`].
pub fn active_row_subset(space: &TensorSpace, lattice: &InteriorLattice, samples: &[usize], truncate: bool) -> Vec<usize> {
    let dim = lattice.dim();
    let count = samples.len().pow(dim as u32);
    let limit = (2 * space.degree() + 1) * space.dofs_per_dir();
    let mut rows: Vec<usize> = (0..count)
        .map(|flat| {
            let pos: Vec<usize> = multi_index(flat, samples.len(), dim).iter().map(|&k| samples[k]).collect();
            lattice.dof_of(&pos)
        })
        .filter(|&r| !truncate || r < limit)
        .collect();
    rows.sort_unstable();
    rows
}

/// First-direction element indices covered by the supports of `rows`, united
/// with the near-boundary set. Independent route to [`interior_mask`].
pub fn interior_set_from_rows(space: &TensorSpace, rows: &[usize]) -> Result<Vec<usize>> {
    let (p, nel) = (space.degree(), space.nel());
    let mut flags = vec![false; nel];
    for &r in rows {
        let i0 = space.multi_index(r)[0];
        for e in i0.saturating_sub(p)..=i0.min(nel - 1) {
            flags[e] = true;
        }
    }
    for e in boundary_mask(p, nel)? {
        flags[e] = true;
    }
    Ok(flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect())
}

/// Offset `delta` between coupled dofs and its flat counterpart.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftIndex {
    pub offset: Vec<isize>,
    pub flat: isize,
}

/// All `(2p + 1)^n` shifts, lexicographic with the first direction fastest.
pub fn all_shifts(space: &TensorSpace) -> Vec<ShiftIndex> {
    let p = space.degree() as isize;
    let dim = space.dim();
    let width = 2 * space.degree() + 1;
    let n = space.dofs_per_dir() as isize;
    (0..width.pow(dim as u32))
        .map(|k| {
            let offset: Vec<isize> = multi_index(k, width, dim).iter().map(|&i| i as isize - p).collect();
            let flat = offset.iter().rev().fold(0, |acc, &d| acc * n + d);
            ShiftIndex { offset, flat }
        })
        .collect()
}

/// Number of stencils that are interpolated (strictly positive flat shift).
pub fn count_interpolated_stencils(p: usize, dim: usize) -> usize {
    ((2 * p + 1).pow(dim as u32) - 1) / 2
}

/// Stencil function values at the sample rows for one shift.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilSampleGrid {
    pub shift: ShiftIndex,
    pub samples: Vec<usize>,
    /// Parameter coordinates of the sample positions (identical per direction).
    pub coords: Vec<f64>,
    /// `samples.len()^n` values, first direction fastest.
    pub values: Vec<f64>,
}

pub fn extract_stencil_samples(
    partial: &CsrMatrix,
    shift: &ShiftIndex,
    lattice: &InteriorLattice,
    samples: &[usize],
) -> StencilSampleGrid {
    let dim = lattice.dim();
    let count = samples.len().pow(dim as u32);
    let values = (0..count)
        .map(|flat| {
            let pos: Vec<usize> = multi_index(flat, samples.len(), dim).iter().map(|&k| samples[k]).collect();
            let row = lattice.dof_of(&pos);
            let col = row as isize + shift.flat;
            assert!(col >= 0 && (col as usize) < partial.ncols(), "shift leaves the dof grid");
            partial.get(row, col as usize)
        })
        .collect();
    StencilSampleGrid {
        shift: shift.clone(),
        samples: samples.to_vec(),
        coords: samples.iter().map(|&k| lattice.coord(k)).collect(),
        values,
    }
}

/// Surrogate stencil values on the whole lattice, first direction fastest.
pub fn interpolate_stencil(samples: &StencilSampleGrid, degree: usize, lattice: &InteriorLattice) -> Result<Vec<f64>> {
    let dim = lattice.dim();
    let interp = GridInterpolant::new(vec![samples.coords.clone(); dim], samples.values.clone(), degree)?;
    interp.evaluate_grid(&vec![lattice.coords(); dim])
}

/// Assembles the surrogate stiffness matrix.
pub fn assemble_surrogate(
    space: &TensorSpace,
    geometry: &PatchMap,
    rule: &GaussRule,
    cfg: &SurrogateConfig,
) -> Result<CsrMatrix> {
    assemble_surrogate_threaded(space, geometry, rule, cfg, 1)
}

pub fn assemble_surrogate_threaded(
    space: &TensorSpace,
    geometry: &PatchMap,
    rule: &GaussRule,
    cfg: &SurrogateConfig,
    threads: usize,
) -> Result<CsrMatrix> {
    let lattice = space.interior_lattice()?;
    let samples = sample_indices(lattice.len(), cfg.skip(), cfg.degree())?;
    let mask = element_mask(space, cfg.skip())?;
    let partial = assemble_stiffness_threaded(space, geometry, rule, Some(&mask), threads)?;

    // symmetry lets the lower half mirror the upper half
    let every_shift = all_shifts(space);
    let band = every_shift.len();
    // (ordinal among all shifts, shift); interior rows carry the full band, so
    // the ordinal is also the entry's offset within its row
    let shifts: Vec<(usize, ShiftIndex)> = every_shift.into_iter().enumerate().filter(|(_, s)| s.flat > 0).collect();
    let stencil = |s: &ShiftIndex| -> Result<Vec<f64>> {
        interpolate_stencil(&extract_stencil_samples(&partial, s, &lattice, &samples), cfg.degree(), &lattice)
    };
    let surrogates: Vec<Vec<f64>> = if threads <= 1 {
        shifts.iter().map(|(_, s)| stencil(s)).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| shifts.par_iter().map(|(_, s)| stencil(s)).collect::<Result<_>>())?
    };

    let mut result = partial;
    let dim = space.dim();
    let len = lattice.len();
    for ((ordinal, shift), values) in shifts.iter().zip(&surrogates) {
        // lattice positions k with k + offset still inside the lattice
        let mut lo = [0usize; 3];
        let mut hi = [1usize; 3];
        for d in 0..dim {
            let off = shift.offset[d];
            lo[d] = (-off).max(0) as usize;
            hi[d] = len - off.max(0) as usize;
        }
        let i0 = lattice.dof_of(&lo[..dim]);
        let j0 = (i0 as isize + shift.flat) as usize;
        assert_eq!(result.position(i0, j0), Some(result.row_ptr()[i0] + ordinal), "band pattern expected");
        assert_eq!(result.position(j0, i0), Some(result.row_ptr()[j0] + band - 1 - ordinal), "band pattern expected");
        for k2 in lo[2]..hi[2] {
            for k1 in lo[1]..hi[1] {
                for k0 in lo[0]..hi[0] {
                    let k = [k0, k1, k2];
                    let v = values[(k2 * len + k1) * len + k0];
                    let i = lattice.dof_of(&k[..dim]);
                    let j = (i as isize + shift.flat) as usize;
                    let upper = result.row_ptr()[i] + ordinal;
                    let lower = result.row_ptr()[j] + band - 1 - ordinal;
                    result.values_mut()[upper] = v;
                    result.values_mut()[lower] = v;
                }
            }
        }
    }
    enforce_zero_row_sums(&mut result);
    Ok(result)
}

/// Sets every diagonal entry to minus the sum of the off-diagonal entries of
/// its row.
pub fn enforce_zero_row_sums(matrix: &mut CsrMatrix) {
    for r in 0..matrix.nrows() {
        let start = matrix.row_ptr()[r];
        let end = matrix.row_ptr()[r + 1];
        let mut off = 0.0;
        let mut diag = None;
        for k in start..end {
            if matrix.col_indices()[k] == r {
                diag = Some(k);
            } else {
                off += matrix.values()[k];
            }
        }
        let k = diag.expect("diagonal in pattern");
        matrix.values_mut()[k] = -off;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_stiffness;
    use crate::geometry::builtin_geometry;
    use crate::quadrature::gauss_rule;

    #[test]
    fn boundary_masks() {
        assert_eq!(to_one_based(&boundary_mask(2, 39).unwrap()), vec![1, 2, 3, 4, 36, 37, 38, 39]);
        let want: Vec<usize> = (1..=6).chain(34..=39).collect();
        assert_eq!(to_one_based(&boundary_mask(3, 39).unwrap()), want);
        assert_eq!(to_one_based(&boundary_mask(1, 5).unwrap()), vec![1, 2, 4, 5]);
        assert!(matches!(boundary_mask(2, 8), Err(Error::MeshTooCoarse { .. })));
    }

    #[test]
    fn interior_masks() {
        assert_eq!(
            to_one_based(&interior_mask(2, 10, 39).unwrap()),
            vec![1, 2, 3, 4, 5, 13, 14, 15, 23, 24, 25, 33, 34, 35, 36, 37, 38, 39]
        );
        assert_eq!(interior_mask(2, 1, 39).unwrap(), (0..39).collect::<Vec<_>>());
        let mut want: Vec<usize> = vec![1, 2, 3, 4, 3, 4, 5, 35, 36, 37, 36, 37, 38, 39];
        want.sort_unstable();
        want.dedup();
        assert_eq!(to_one_based(&interior_mask(2, 32, 39).unwrap()), want);
        assert!(interior_mask(2, 0, 39).is_err());
    }

    #[test]
    fn interior_mask_matches_sample_supports() {
        for (p, skip, nel) in [(2, 10, 39), (2, 32, 39), (3, 7, 40), (1, 3, 17), (2, 1, 20)] {
            let space = TensorSpace::uniform(2, p, nel).unwrap();
            let lat = space.interior_lattice().unwrap();
            let s = sample_indices(lat.len(), skip, 1).unwrap();
            let want = interior_mask(p, skip, nel).unwrap();
            for truncate in [false, true] {
                let rows = active_row_subset(&space, &lat, &s, truncate);
                assert_eq!(interior_set_from_rows(&space, &rows).unwrap(), want, "p={p} M={skip} nel={nel}");
            }
        }
    }

    #[test]
    fn sample_index_sets() {
        assert_eq!(sample_indices(33, 10, 3).unwrap(), vec![0, 10, 20, 30, 32]);
        assert_eq!(sample_indices(33, 1, 3).unwrap(), (0..33).collect::<Vec<_>>());
        assert_eq!(sample_indices(5, 4, 1).unwrap(), vec![0, 4]);
        assert!(matches!(sample_indices(5, 4, 3), Err(Error::TooFewSamples { count: 2, degree: 3 })));
    }

    #[test]
    fn sample_rows() {
        let space = TensorSpace::uniform(2, 2, 39).unwrap();
        let lat = space.interior_lattice().unwrap();
        let s = sample_indices(lat.len(), 10, 3).unwrap();
        let rows = active_row_subset(&space, &lat, &s, false);
        assert_eq!(rows.len(), 25);
        assert_eq!(space.multi_index(rows[0]), vec![4, 4]);
        let full: Vec<usize> = (0..lat.len()).collect();
        assert_eq!(active_row_subset(&space, &lat, &full, false).len(), 33 * 33);
    }

    #[test]
    fn stencil_counts() {
        assert_eq!(count_interpolated_stencils(2, 2), 12);
        assert_eq!(count_interpolated_stencils(2, 3), 62);
        assert_eq!(count_interpolated_stencils(1, 2), 4);
        let space = TensorSpace::uniform(3, 2, 10).unwrap();
        let shifts = all_shifts(&space);
        assert_eq!(shifts.len(), 125);
        assert_eq!(shifts.iter().filter(|s| s.flat > 0).count(), 62);
        assert_eq!(shifts.iter().filter(|s| s.flat == 0).count(), 1);
    }

    #[test]
    fn samples_match_full_assembly() {
        let space = TensorSpace::uniform(2, 2, 24).unwrap();
        let g = builtin_geometry("quarter_annulus_bumps", 2).unwrap();
        let rule = gauss_rule(3).unwrap();
        let full = assemble_stiffness(&space, &g, &rule, None).unwrap();
        let mask = element_mask(&space, 5).unwrap();
        let partial = assemble_stiffness(&space, &g, &rule, Some(&mask)).unwrap();
        let lat = space.interior_lattice().unwrap();
        let s = sample_indices(lat.len(), 5, 3).unwrap();
        for shift in all_shifts(&space) {
            let grid = extract_stencil_samples(&partial, &shift, &lat, &s);
            let reference = extract_stencil_samples(&full, &shift, &lat, &s);
            for (a, b) in grid.values.iter().zip(&reference.values) {
                assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
            }
            if shift.flat == 0 {
                assert!(grid.values.iter().all(|&v| v > 0.0));
            }
        }
    }

    #[test]
    fn identity_stencils_are_constant() {
        let space = TensorSpace::uniform(2, 2, 20).unwrap();
        let g = builtin_geometry("identity", 2).unwrap();
        let a = assemble_stiffness(&space, &g, &gauss_rule(3).unwrap(), None).unwrap();
        let lat = space.interior_lattice().unwrap();
        let s = sample_indices(lat.len(), 3, 3).unwrap();
        for shift in all_shifts(&space) {
            let grid = extract_stencil_samples(&a, &shift, &lat, &s);
            let first = grid.values[0];
            assert!(grid.values.iter().all(|v| (v - first).abs() < 1e-12));
        }
    }

    #[test]
    fn full_sampling_reproduces_input() {
        let space = TensorSpace::uniform(2, 2, 16).unwrap();
        let g = builtin_geometry("quarter_annulus", 2).unwrap();
        let a = assemble_stiffness(&space, &g, &gauss_rule(3).unwrap(), None).unwrap();
        let lat = space.interior_lattice().unwrap();
        let s: Vec<usize> = (0..lat.len()).collect();
        let shift = &all_shifts(&space)[14];
        let grid = extract_stencil_samples(&a, shift, &lat, &s);
        assert_eq!(interpolate_stencil(&grid, 3, &lat).unwrap(), grid.values);
    }

    #[test]
    fn unit_skip_is_exact() {
        for p in [2, 3] {
            let space = TensorSpace::uniform(2, p, 20).unwrap();
            let g = builtin_geometry("quarter_annulus_bumps", 2).unwrap();
            let rule = gauss_rule(p + 1).unwrap();
            let a = assemble_stiffness(&space, &g, &rule, None).unwrap();
            let s = assemble_surrogate(&space, &g, &rule, &SurrogateConfig::new(1, 3).unwrap()).unwrap();
            assert!(a.max_abs_diff(&s).unwrap() <= 1e-12 * a.max_abs());
        }
    }

    #[test]
    fn curved_geometry_surrogate_is_close_but_not_exact() {
        let space = TensorSpace::uniform(2, 2, 40).unwrap();
        let g = builtin_geometry("quarter_annulus_bumps", 2).unwrap();
        let rule = gauss_rule(3).unwrap();
        let a = assemble_stiffness(&space, &g, &rule, None).unwrap();
        let s = assemble_surrogate(&space, &g, &rule, &SurrogateConfig::new(5, 3).unwrap()).unwrap();
        let diff = a.max_abs_diff(&s).unwrap();
        assert!(diff > 0.0 && diff < 1e-1 * a.max_abs(), "diff = {diff}");
        assert!(s.is_symmetric_bitwise());
    }

    #[test]
    fn finer_sampling_is_more_accurate_at_defaults() {
        let space = TensorSpace::uniform(2, 2, 159).unwrap();
        let g = builtin_geometry("quarter_annulus_bumps", 2).unwrap();
        let rule = gauss_rule(3).unwrap();
        let a = assemble_stiffness(&space, &g, &rule, None).unwrap();
        let diff = |m| a.max_abs_diff(&assemble_surrogate(&space, &g, &rule, &SurrogateConfig::new(m, 3).unwrap()).unwrap()).unwrap();
        let (d5, d10, d20) = (diff(5), diff(10), diff(20));
        assert!(d5 <= d20 && d10 <= d20, "{d5} {d10} {d20}");
        assert!((1e-5..=1e-2).contains(&d10));
    }

    #[test]
    fn config_validation() {
        assert!(SurrogateConfig::new(0, 3).is_err());
        assert!(SurrogateConfig::new(10, 2).is_err());
        let space = TensorSpace::uniform(2, 2, 7).unwrap();
        let g = builtin_geometry("identity", 2).unwrap();
        let cfg = SurrogateConfig::new(2, 1).unwrap();
        assert!(matches!(assemble_surrogate(&space, &g, &gauss_rule(3).unwrap(), &cfg), Err(Error::MeshTooCoarse { .. })));
        assert!((cfg.sampling_length(&space) - 2.0 / 7.0).abs() < 1e-15);
    }
}
