use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_iga-surrogate"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("iga-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn single_run_prints_listing_and_csv() {
    let dir = scratch("run");
    let csv = dir.join("out.csv");
    let out = bin()
        .args(["--nel", "30", "--skip", "5", "--csv"])
        .arg(&csv)
        .arg("--dump-matrices")
        .arg(dir.join("mtx"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    for needle in ["Standard assembly time", "Surrogate solve time", "L2-norm", "H1-norm", "||A-A_surr||_max", "Assembly speed-up"] {
        assert!(stdout.contains(needle), "missing `{needle}`");
    }
    let table = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("dim,nel,degree,interp_degree,skip,geometry"));
    assert!(lines[1].starts_with("2,30,2,3,5,quarter_annulus_bumps,3,oscillatory,1,"));
    assert!(dir.join("mtx/A.mtx").exists() && dir.join("mtx/A_surrogate.mtx").exists());
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn configuration_errors_exit_with_two() {
    for args in [
        vec!["--skip", "0"],
        vec!["--dim", "4"],
        vec!["--interp-degree", "2"],
        vec!["--geometry", "teapot"],
        vec!["--nel", "8"],
        vec!["--solution", "wavy"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    }
}

#[test]
fn sweep_writes_one_row_per_block() {
    let dir = scratch("sweep");
    let file = dir.join("sweep.txt");
    std::fs::write(&file, "nel=30\nskip=2\n\nnel=30\nskip=5\ngeometry=identity\n\nnel=5\n").unwrap();
    let out = bin().arg("--sweep").arg(&file).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].contains(",ok,") && rows[2].contains(",identity,") && rows[3].contains(",error,"));

    std::fs::write(&file, "# nothing to run\n").unwrap();
    let csv = dir.join("empty.csv");
    let out = bin().arg("--sweep").arg(&file).arg("--csv").arg(&csv).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 1);

    std::fs::write(&file, "nel 30\n").unwrap();
    assert_eq!(bin().arg("--sweep").arg(&file).output().unwrap().status.code(), Some(2));
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn geometry_files_are_accepted() {
    let dir = scratch("geom");
    let path = dir.join("annulus.txt");
    iga_surrogate::geometry::builtin_geometry("quarter_annulus", 2).unwrap().save(&path).unwrap();
    let out = bin().args(["--nel", "24", "--skip", "1", "--geometry"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    std::fs::remove_dir_all(dir).unwrap();
}
