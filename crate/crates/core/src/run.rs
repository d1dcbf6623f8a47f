//! Batch driver: standard versus surrogate assembly, solves, errors, timings
//! and machine-readable output.

use crate::assembly::assemble_stiffness_threaded;
use crate::error::{Error, Result};
use crate::geometry::{builtin_geometry, PatchMap, BUILTIN_GEOMETRIES};
use crate::quadrature::gauss_rule;
use crate::solve::{apply_dirichlet, assemble_load, compute_errors, matrix_max_diff, solve, ManufacturedCase};
use crate::sparse::CsrMatrix;
use crate::splines::TensorSpace;
use crate::surrogate::{assemble_surrogate_threaded, sample_indices, SurrogateConfig};
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

/// Manufactured solution used for verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solution {
    /// `prod_d sin(20 pi x_d)`
    Oscillatory,
    /// `prod_d sin(pi x_d)`
    Smooth,
}

impl Solution {
    pub fn case(self, dim: usize) -> ManufacturedCase {
        match self {
            Solution::Oscillatory => ManufacturedCase::oscillatory(dim),
            Solution::Smooth => ManufacturedCase::smooth(dim),
        }
    }
}

impl fmt::Display for Solution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Solution::Oscillatory => "oscillatory",
            Solution::Smooth => "smooth",
        })
    }
}

impl FromStr for Solution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oscillatory" => Ok(Solution::Oscillatory),
            "smooth" => Ok(Solution::Smooth),
            _ => Err(Error::Config(format!("unknown solution `{s}` (expected oscillatory or smooth)"))),
        }
    }
}

/// Parameters of one verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    /// Elements per direction (knots per direction minus one).
    pub nel: usize,
    pub degree: usize,
    pub interp_degree: usize,
    pub skip: usize,
    /// Built-in geometry name or path to a geometry file.
    pub geometry: String,
    /// Gauss points per direction for assembly; `None` means `degree + 1`.
    pub quad_points: Option<usize>,
    pub tol: f64,
    pub threads: usize,
    pub solution: Solution,
    pub dump_matrices: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::defaults(2)
    }
}

impl RunConfig {
    /// Demo defaults: `p = 2`, `q = 3`, `M = 10`, 160 knots per direction in
    /// 2D and 40 in 3D.
    pub fn defaults(dim: usize) -> Self {
        let (nel, geometry) = if dim == 3 { (39, "bent_box") } else { (159, "quarter_annulus_bumps") };
        RunConfig {
            dim,
            nel,
            degree: 2,
            interp_degree: 3,
            skip: 10,
            geometry: geometry.to_string(),
            quad_points: None,
            tol: 1e-12,
            threads: 1,
            solution: Solution::Oscillatory,
            dump_matrices: None,
        }
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points.unwrap_or(self.degree + 1)
    }

    /// Checks every precondition of the pipeline without doing any work.
    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.dim) {
            return Err(Error::InvalidDimension(self.dim));
        }
        let space = TensorSpace::uniform(self.dim, self.degree, self.nel)?;
        let cfg = SurrogateConfig::new(self.skip, self.interp_degree)?;
        if self.nel <= 4 * self.degree {
            return Err(Error::MeshTooCoarse { nel: self.nel, degree: self.degree, bound: 4 * self.degree });
        }
        sample_indices(space.interior_lattice()?.len(), cfg.skip(), cfg.degree())?;
        gauss_rule(self.quad_points())?;
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("solver tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        self.load_geometry()?;
        Ok(())
    }

    /// Resolves `geometry` to a built-in map or a geometry file.
    pub fn load_geometry(&self) -> Result<PatchMap> {
        let g = if BUILTIN_GEOMETRIES.contains(&self.geometry.as_str()) || !Path::new(&self.geometry).exists() {
            builtin_geometry(&self.geometry, self.dim)?
        } else {
            PatchMap::load(&self.geometry)?
        };
        if g.dim() != self.dim {
            return Err(Error::InvalidGeometry(format!("geometry `{}` is {}D, run is {}D", self.geometry, g.dim(), self.dim)));
        }
        Ok(g)
    }

    /// Applies one `key=value` setting; keys match the long CLI flags.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "dim" => self.dim = num(key, value)?,
            "nel" => self.nel = num(key, value)?,
            "knots" => {
                let knots: usize = num(key, value)?;
                self.nel = knots.checked_sub(1).filter(|&n| n > 0).ok_or(Error::InvalidElementCount(0))?;
            }
            "degree" => self.degree = num(key, value)?,
            "interp-degree" => self.interp_degree = num(key, value)?,
            "skip" => self.skip = num(key, value)?,
            "geometry" => self.geometry = value.to_string(),
            "quad-points" => self.quad_points = Some(num(key, value)?),
            "tol" => self.tol = num(key, value)?,
            "threads" => self.threads = num(key, value)?,
            "solution" => self.solution = value.parse()?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

/// Outcome of [`run`]. Times are wall-clock seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub config: RunConfig,
    pub num_dofs: usize,
    pub t_assembly_std: f64,
    pub t_assembly_surr: f64,
    pub t_solve_std: f64,
    pub t_solve_surr: f64,
    pub iterations_std: usize,
    pub iterations_surr: usize,
    pub l2_std: f64,
    pub h1_std: f64,
    pub l2_surr: f64,
    pub h1_surr: f64,
    /// `max |A - A_surr|`
    pub max_diff: f64,
    /// `max |A|`
    pub a_max: f64,
}

impl RunReport {
    /// Assembly speed-up `t_std / t_surr`.
    pub fn speedup(&self) -> f64 {
        self.t_assembly_std / self.t_assembly_surr
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Relative error in standard IGA")?;
        writeln!(f, "L2-norm: {:.6e}", self.l2_std)?;
        writeln!(f, "H1-norm: {:.6e}", self.h1_std)?;
        writeln!(f)?;
        writeln!(f, "||A-A_surr||_max = {:.6e}", self.max_diff)?;
        writeln!(f)?;
        writeln!(f, "Relative error in surrogate IGA")?;
        writeln!(f, "L2-norm: {:.6e}", self.l2_surr)?;
        writeln!(f, "H1-norm: {:.6e}", self.h1_surr)?;
        writeln!(f)?;
        write!(f, "Assembly speed-up: {:.2}", self.speedup())
    }
}

/// Runs the pipeline silently.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    run_logged(config, &mut std::io::sink())
}

/// Runs the pipeline, writing progress lines to `log`: standard assembly and
/// solve first, then surrogate assembly and solve, then errors.
pub fn run_logged(config: &RunConfig, log: &mut dyn Write) -> Result<RunReport> {
    run_with_matrices(config, log).map(|(report, _, _)| report)
}

/// As [`run_logged`], also returning the standard and the surrogate matrix.
pub fn run_with_matrices(config: &RunConfig, log: &mut dyn Write) -> Result<(RunReport, CsrMatrix, CsrMatrix)> {
    config.validate()?;
    writeln!(log, "Initializing problem...")?;
    let space = TensorSpace::uniform(config.dim, config.degree, config.nel)?;
    let geometry = config.load_geometry()?;
    let rule = gauss_rule(config.quad_points())?;
    let err_rule = gauss_rule(config.degree + 2)?;
    let cfg = SurrogateConfig::new(config.skip, config.interp_degree)?;
    let case = config.solution.case(config.dim);
    let load = assemble_load(&space, &geometry, &rule, &|x| case.f(x))?;
    let g = |x: &[f64]| case.u(x);

    writeln!(log, "Assembling standard IGA matrix...")?;
    let t = Instant::now();
    let a = assemble_stiffness_threaded(&space, &geometry, &rule, None, config.threads)?;
    let t_assembly_std = t.elapsed().as_secs_f64();
    writeln!(log, "Standard assembly time: {t_assembly_std:.6} s")?;

    writeln!(log, "Solving standard IGA problem...")?;
    let t = Instant::now();
    let sol_std = solve(&apply_dirichlet(&a, &load, &space, &geometry, &rule, &g)?, config.tol)?;
    let t_solve_std = t.elapsed().as_secs_f64();
    writeln!(log, "Standard solve time: {t_solve_std:.6} s")?;

    writeln!(log, "Assembling surrogate IGA matrix...")?;
    let t = Instant::now();
    let a_surr = assemble_surrogate_threaded(&space, &geometry, &rule, &cfg, config.threads)?;
    let t_assembly_surr = t.elapsed().as_secs_f64();
    writeln!(log, "Surrogate assembly time: {t_assembly_surr:.6} s")?;

    writeln!(log, "Solving surrogate IGA problem...")?;
    let t = Instant::now();
    let sol_surr = solve(&apply_dirichlet(&a_surr, &load, &space, &geometry, &rule, &g)?, config.tol)?;
    let t_solve_surr = t.elapsed().as_secs_f64();
    writeln!(log, "Surrogate solve time: {t_solve_surr:.6} s")?;

    writeln!(log, "Computing errors...")?;
    let e_std = compute_errors(&space, &geometry, &sol_std.coeffs, &case, &err_rule)?;
    let e_surr = compute_errors(&space, &geometry, &sol_surr.coeffs, &case, &err_rule)?;

    if let Some(dir) = &config.dump_matrices {
        dump_matrices(dir, &a, &a_surr)?;
    }

    let report = RunReport {
        config: config.clone(),
        num_dofs: space.num_dofs(),
        t_assembly_std,
        t_assembly_surr,
        t_solve_std,
        t_solve_surr,
        iterations_std: sol_std.iterations,
        iterations_surr: sol_surr.iterations,
        l2_std: e_std.l2,
        h1_std: e_std.h1,
        l2_surr: e_surr.l2,
        h1_surr: e_surr.h1,
        max_diff: matrix_max_diff(&a, &a_surr)?,
        a_max: a.max_abs(),
    };
    Ok((report, a, a_surr))
}

/// Writes `A.mtx` and `A_surrogate.mtx` (symmetric Matrix Market) into `dir`.
pub fn dump_matrices(dir: &Path, a: &CsrMatrix, a_surr: &CsrMatrix) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    a.write_matrix_market(dir.join("A.mtx"), true)?;
    a_surr.write_matrix_market(dir.join("A_surrogate.mtx"), true)
}

/// Column order of every CSV file produced by this crate.
pub const CSV_COLUMNS: [&str; 25] = [
    "dim",
    "nel",
    "degree",
    "interp_degree",
    "skip",
    "geometry",
    "quad_points",
    "solution",
    "threads",
    "dofs",
    "t_assembly_std",
    "t_assembly_surr",
    "speedup",
    "t_solve_std",
    "t_solve_surr",
    "iterations_std",
    "iterations_surr",
    "l2_std",
    "h1_std",
    "l2_surr",
    "h1_surr",
    "max_diff",
    "a_max",
    "status",
    "message",
];

fn csv_row(config: &RunConfig, outcome: &Result<RunReport>) -> Vec<String> {
    let mut row = vec![
        config.dim.to_string(),
        config.nel.to_string(),
        config.degree.to_string(),
        config.interp_degree.to_string(),
        config.skip.to_string(),
        config.geometry.clone(),
        config.quad_points().to_string(),
        config.solution.to_string(),
        config.threads.to_string(),
    ];
    match outcome {
        Ok(r) => {
            row.push(r.num_dofs.to_string());
            for v in [r.t_assembly_std, r.t_assembly_surr, r.speedup(), r.t_solve_std, r.t_solve_surr] {
                row.push(format!("{v:.6}"));
            }
            row.push(r.iterations_std.to_string());
            row.push(r.iterations_surr.to_string());
            for v in [r.l2_std, r.h1_std, r.l2_surr, r.h1_surr, r.max_diff, r.a_max] {
                row.push(format!("{v:.9e}"));
            }
            row.push("ok".into());
            row.push(String::new());
        }
        Err(e) => {
            row.extend(std::iter::repeat_n(String::new(), CSV_COLUMNS.len() - row.len() - 2));
            row.push("error".into());
            row.push(e.to_string());
        }
    }
    row
}

/// Writes a header and one row per outcome.
pub fn write_csv(out: impl Write, rows: &[(RunConfig, Result<RunReport>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for (config, outcome) in rows {
        w.write_record(csv_row(config, outcome)).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a sweep file: blocks of `key=value` lines separated by blank lines,
/// `#` starting a comment. Each block starts from the defaults of its `dim`.
pub fn parse_sweep(text: &str) -> Result<Vec<RunConfig>> {
    let mut blocks: Vec<Vec<(usize, &str, &str)>> = vec![Vec::new()];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            // comment-only lines do not split blocks
            if raw.trim().is_empty() && !blocks.last().unwrap().is_empty() {
                blocks.push(Vec::new());
            }
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: n + 1, message: format!("expected key=value, got `{line}`") })?;
        blocks.last_mut().unwrap().push((n + 1, k.trim(), v.trim()));
    }
    blocks
        .into_iter()
        .filter(|b| !b.is_empty())
        .map(|block| {
            let dim = match block.iter().find(|(_, k, _)| *k == "dim") {
                Some((line, _, v)) => {
                    v.parse().map_err(|_| Error::Parse { line: *line, message: format!("invalid dim `{v}`") })?
                }
                None => 2,
            };
            let mut config = RunConfig::defaults(dim);
            for (line, k, v) in block {
                config.set(k, v).map_err(|e| Error::Parse { line, message: e.to_string() })?;
            }
            Ok(config)
        })
        .collect()
}

/// Runs every configuration; failures are recorded per row and do not stop
/// the sweep.
pub fn sweep(configs: &[RunConfig]) -> Vec<(RunConfig, Result<RunReport>)> {
    configs.iter().map(|c| (c.clone(), run(c))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(skip: usize, geometry: &str) -> RunConfig {
        RunConfig { nel: 40, skip, geometry: geometry.into(), ..RunConfig::defaults(2) }
    }

    #[test]
    fn defaults_match_the_demo() {
        let c = RunConfig::defaults(2);
        assert_eq!((c.nel, c.degree, c.interp_degree, c.skip, c.quad_points()), (159, 2, 3, 10, 3));
        assert_eq!(RunConfig::defaults(3).nel, 39);
        c.validate().unwrap();
        RunConfig::defaults(3).validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_config_errors() {
        let base = RunConfig::defaults(2);
        for bad in [
            RunConfig { dim: 4, ..base.clone() },
            RunConfig { nel: 8, ..base.clone() },
            RunConfig { interp_degree: 2, ..base.clone() },
            RunConfig { skip: 0, ..base.clone() },
            RunConfig { geometry: "bent_box".into(), ..base.clone() },
            RunConfig { geometry: "torus".into(), ..base.clone() },
            RunConfig { quad_points: Some(11), ..base.clone() },
            RunConfig { tol: 0.0, ..base.clone() },
            RunConfig { threads: 0, ..base.clone() },
            RunConfig { nel: 12, skip: 10, ..base.clone() },
        ] {
            let e = run(&bad).unwrap_err();
            assert!(e.is_config_error(), "{bad:?}: {e}");
        }
    }

    #[test]
    fn skip_one_reproduces_the_standard_run() {
        let r = run(&small(1, "quarter_annulus")).unwrap();
        assert!(r.max_diff <= 1e-12 * r.a_max);
        assert_eq!(format!("{:.6e}{:.6e}", r.l2_std, r.h1_std), format!("{:.6e}{:.6e}", r.l2_surr, r.h1_surr));
    }

    #[test]
    fn identity_geometry_is_exact_for_any_skip() {
        for skip in [2, 5, 10] {
            let r = run(&small(skip, "identity")).unwrap();
            assert!(r.max_diff <= 1e-12 * r.a_max, "M={skip}: {}", r.max_diff);
        }
    }

    #[test]
    fn report_listing_has_all_fields() {
        let mut log = Vec::new();
        let r = run_logged(&small(4, "quarter_annulus_bumps"), &mut log).unwrap();
        let log = String::from_utf8(log).unwrap();
        for line in ["Standard assembly time", "Standard solve time", "Surrogate assembly time", "Surrogate solve time"] {
            assert!(log.contains(line));
        }
        let listing = r.to_string();
        assert_eq!(listing.matches("L2-norm").count(), 2);
        assert!(listing.contains("||A-A_surr||_max") && listing.contains("Assembly speed-up"));
        assert!((r.speedup() - r.t_assembly_std / r.t_assembly_surr).abs() < 1e-12);
    }

    #[test]
    fn single_threaded_runs_are_deterministic() {
        let c = small(4, "quarter_annulus_bumps");
        let (a, b) = (run(&c).unwrap(), run(&c).unwrap());
        assert_eq!((a.l2_std, a.h1_std, a.l2_surr, a.h1_surr, a.max_diff), (b.l2_std, b.h1_std, b.l2_surr, b.h1_surr, b.max_diff));
        let threaded = run(&RunConfig { threads: 3, ..c }).unwrap();
        assert_eq!(threaded.max_diff, a.max_diff);
        assert_eq!(threaded.l2_surr, a.l2_surr);
    }

    #[test]
    fn sweep_parsing() {
        let text = "# skip study\nskip=5\nnel=30\n\n\nskip=10 # comment\nsolution = smooth\n\ndim=3\n";
        let configs = parse_sweep(text).unwrap();
        assert_eq!(configs.len(), 3);
        assert_eq!((configs[0].skip, configs[0].nel), (5, 30));
        assert_eq!((configs[1].skip, configs[1].nel, configs[1].solution), (10, 159, Solution::Smooth));
        assert_eq!((configs[2].nel, configs[2].geometry.as_str()), (39, "bent_box"));
        assert!(parse_sweep("").unwrap().is_empty());
        assert!(matches!(parse_sweep("skip=5\nbogus\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_sweep("colour=red\n"), Err(Error::Parse { line: 1, .. })));
        assert_eq!(parse_sweep("knots=40").unwrap()[0].nel, 39);
    }

    #[test]
    fn empty_sweep_writes_header_only() {
        let mut out = Vec::new();
        write_csv(&mut out, &sweep(&[])).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), format!("{}\n", CSV_COLUMNS.join(",")));
    }

    #[test]
    fn sweep_records_failures_and_continues() {
        let configs = vec![small(10, "quarter_annulus_bumps"), small(5, "quarter_annulus_bumps"), small(2, "quarter_annulus_bumps")];
        let bad = RunConfig { nel: 6, ..small(2, "quarter_annulus") };
        let mut all = configs.clone();
        all.insert(1, bad);
        let rows = sweep(&all);
        assert!(rows[1].1.is_err());
        let diffs: Vec<f64> = rows.iter().filter_map(|(_, r)| r.as_ref().ok()).map(|r| r.max_diff).collect();
        assert_eq!(diffs.len(), 3);
        // coarser sampling, larger defect
        assert!(diffs[0] >= diffs[1] && diffs[1] >= diffs[2], "{diffs:?}");
        let mut out = Vec::new();
        write_csv(&mut out, &rows).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(|r| r.len() == CSV_COLUMNS.len()));
        assert_eq!(&records[1][23], "error");
        assert_eq!(&records[0][23], "ok");
    }

    #[test]
    fn matrices_are_dumped() {
        let dir = std::env::temp_dir().join(format!("iga-dump-{}", std::process::id()));
        let c = RunConfig { dump_matrices: Some(dir.clone()), ..small(4, "quarter_annulus") };
        let r = run(&c).unwrap();
        let a = CsrMatrix::load_matrix_market(dir.join("A.mtx")).unwrap();
        let s = CsrMatrix::load_matrix_market(dir.join("A_surrogate.mtx")).unwrap();
        assert_eq!(a.max_abs_diff(&s).unwrap(), r.max_diff);
        std::fs::remove_dir_all(dir).unwrap();
    }
}
