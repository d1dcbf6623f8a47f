//! Compressed sparse row storage, triplet accumulation and Matrix Market I/O.

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

/// Unsorted `(row, col, value)` accumulator. Duplicates are summed on
/// finalization in insertion order.
#[derive(Debug, Clone, Default)]
pub struct TripletMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletMatrix { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, capacity: usize) -> Self {
        TripletMatrix { nrows, ncols, entries: Vec::with_capacity(capacity) }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        // stable: duplicates keep insertion order, so the summation is deterministic
        order.sort_by_key(|&k| (self.entries[k].0, self.entries[k].1));
        let mut row_ptr = vec![0; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(order.len());
        let mut values: Vec<f64> = Vec::with_capacity(order.len());
        let mut last: Option<(usize, usize)> = None;
        for k in order {
            let (r, c, v) = self.entries[k];
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..self.nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with a prescribed pattern; each row's columns must be sorted
    /// and unique.
    pub fn from_pattern(nrows: usize, ncols: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Self {
        debug_assert_eq!(row_ptr.len(), nrows + 1);
        debug_assert!((0..nrows).all(|r| col_idx[row_ptr[r]..row_ptr[r + 1]].windows(2).all(|w| w[0] < w[1])));
        let values = vec![0.0; col_idx.len()];
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix { nrows: n, ncols: n, row_ptr: (0..=n).collect(), col_idx: (0..n).collect(), values: vec![1.0; n] }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Stored entries, including explicit zeros.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[range.clone()], &self.values[range])
    }

    /// Storage position of `(r, c)`, if structurally present.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.col_idx[start..self.row_ptr[r + 1]].binary_search(&c).ok().map(|k| start + k)
    }

    /// Entry `(r, c)`; structurally absent entries read as zero.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.nrows) {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yr = s;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Whether `A == A^T` bit for bit on the union of both patterns.
    pub fn is_symmetric_bitwise(&self) -> bool {
        self.nrows == self.ncols && self.iter().all(|(r, c, v)| self.get(c, r).to_bits() == v.to_bits() || (v == 0.0 && self.get(c, r) == 0.0))
    }

    /// Row sums `sum_j A_ij`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    /// `max |A_ij - B_ij|` over the union of both sparsity patterns.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> Result<f64> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.nrows, self.ncols, other.nrows, other.ncols
            )));
        }
        let mut max: f64 = 0.0;
        for r in 0..self.nrows {
            let (ca, va) = self.row(r);
            let (cb, vb) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ca.len() || j < cb.len() {
                let d = match (ca.get(i), cb.get(j)) {
                    (Some(&a), Some(&b)) if a == b => {
                        i += 1;
                        j += 1;
                        va[i - 1] - vb[j - 1]
                    }
                    (Some(&a), Some(&b)) if a < b => {
                        i += 1;
                        va[i - 1]
                    }
                    (Some(_), None) => {
                        i += 1;
                        va[i - 1]
                    }
                    _ => {
                        j += 1;
                        vb[j - 1]
                    }
                };
                max = max.max(d.abs());
            }
        }
        Ok(max)
    }

    /// Writes Matrix Market coordinate format with 17 significant digits.
    /// With `symmetric`, only the lower triangle is written.
    pub fn to_matrix_market(&self, symmetric: bool) -> String {
        let entries: Vec<(usize, usize, f64)> = self.iter().filter(|&(r, c, _)| !symmetric || r >= c).collect();
        let mut s = String::with_capacity(entries.len() * 40 + 64);
        let kind = if symmetric { "symmetric" } else { "general" };
        let _ = writeln!(s, "%%MatrixMarket matrix coordinate real {kind}");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, entries.len());
        for (r, c, v) in entries {
            let _ = writeln!(s, "{} {} {:.16e}", r + 1, c + 1, v);
        }
        s
    }

    pub fn write_matrix_market(&self, path: impl AsRef<Path>, symmetric: bool) -> Result<()> {
        std::fs::write(path, self.to_matrix_market(symmetric))?;
        Ok(())
    }

    /// Reads Matrix Market coordinate real/integer data, general or symmetric.
    pub fn read_matrix_market(reader: impl Read) -> Result<CsrMatrix> {
        let mut lines = BufReader::new(reader).lines().enumerate();
        let perr = |line: usize, message: &str| Error::Parse { line, message: message.to_string() };
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
        let header = header?.to_lowercase();
        let tokens: Vec<&str> = header.split_whitespace().collect();
        if tokens.len() < 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" || tokens[2] != "coordinate" {
            return Err(perr(1, "expected `%%MatrixMarket matrix coordinate ...` header"));
        }
        if tokens[3] != "real" && tokens[3] != "integer" {
            return Err(perr(1, "only real or integer fields are supported"));
        }
        let symmetric = match tokens[4] {
            "general" => false,
            "symmetric" => true,
            _ => return Err(perr(1, "only general or symmetric storage is supported")),
        };
        let mut size: Option<(usize, usize, usize)> = None;
        let mut trip = TripletMatrix::new(0, 0);
        let mut read = 0;
        for (no, line) in lines {
            let no = no + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match size {
                None => {
                    if parts.len() != 3 {
                        return Err(perr(no, "expected `rows cols entries`"));
                    }
                    let p = |s: &str| s.parse::<usize>().map_err(|_| perr(no, "invalid size"));
                    let (r, c, n) = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
                    size = Some((r, c, n));
                    trip = TripletMatrix::with_capacity(r, c, if symmetric { 2 * n } else { n });
                }
                Some((nr, nc, _)) => {
                    if parts.len() != 3 {
                        return Err(perr(no, "expected `row col value`"));
                    }
                    let r = parts[0].parse::<usize>().map_err(|_| perr(no, "invalid row"))?;
                    let c = parts[1].parse::<usize>().map_err(|_| perr(no, "invalid column"))?;
                    let v = parts[2].parse::<f64>().map_err(|_| perr(no, "invalid value"))?;
                    if r == 0 || c == 0 || r > nr || c > nc {
                        return Err(perr(no, "index out of range"));
                    }
                    trip.push(r - 1, c - 1, v);
                    if symmetric && r != c {
                        trip.push(c - 1, r - 1, v);
                    }
                    read += 1;
                }
            }
        }
        let (_, _, n) = size.ok_or_else(|| perr(0, "missing size line"))?;
        if read != n {
            return Err(perr(0, &format!("expected {n} entries, found {read}")));
        }
        Ok(trip.to_csr())
    }

    pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
        CsrMatrix::read_matrix_market(std::fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn duplicates_summed_in_order() {
        let mut t = TripletMatrix::new(3, 3);
        t.push(2, 1, 1.0);
        t.push(0, 0, 0.5);
        t.push(2, 1, 2.0);
        t.push(1, 2, -1.0);
        let a = t.to_csr();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(2, 1), 3.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.row_ptr(), &[0, 1, 2, 3]);
    }

    #[test]
    fn max_abs_diff_over_union() {
        let mut t = TripletMatrix::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 2.0);
        let a = t.to_csr();
        let mut t = TripletMatrix::new(2, 2);
        t.push(0, 0, 1.5);
        t.push(1, 0, -3.0);
        let b = t.to_csr();
        assert_eq!(a.max_abs_diff(&b).unwrap(), 3.0);
        assert_eq!(a.max_abs_diff(&a).unwrap(), 0.0);
        assert!(a.max_abs_diff(&CsrMatrix::identity(3)).is_err());
    }

    #[test]
    fn symmetric_export_stores_lower_triangle() {
        let mut t = TripletMatrix::new(2, 2);
        t.push(0, 0, 2.0);
        t.push(0, 1, -1.0);
        t.push(1, 0, -1.0);
        t.push(1, 1, 2.0);
        let a = t.to_csr();
        let text = a.to_matrix_market(true);
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n"));
        let back = CsrMatrix::read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(CsrMatrix::read_matrix_market("%%MatrixMarket matrix array real general\n".as_bytes()).is_err());
        let bad = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(matches!(CsrMatrix::read_matrix_market(bad.as_bytes()), Err(Error::Parse { line: 3, .. })));
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(CsrMatrix::read_matrix_market(short.as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn matrix_market_round_trip_is_bit_exact(
            entries in proptest::collection::vec((0usize..6, 0usize..6, proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO), 0..40)
        ) {
            let mut t = TripletMatrix::new(6, 6);
            for &(r, c, v) in &entries {
                t.push(r, c, v);
            }
            let a = t.to_csr();
            let back = CsrMatrix::read_matrix_market(a.to_matrix_market(false).as_bytes()).unwrap();
            prop_assert_eq!(a.nnz(), back.nnz());
            for ((r0, c0, v0), (r1, c1, v1)) in a.iter().zip(back.iter()) {
                prop_assert_eq!((r0, c0), (r1, c1));
                prop_assert_eq!(v0.to_bits(), v1.to_bits());
            }
        }
    }
}
