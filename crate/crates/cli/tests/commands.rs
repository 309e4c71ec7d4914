//! End-to-end runs of the `nelson-lab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn run(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nelson-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Data rows of a table, split on commas, header first.
fn rows(path: PathBuf) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(table: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = table[0].iter().position(|h| h == name).unwrap();
    table[1..].iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn kernels_outputs_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["kernels", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("kernels");

    let profiles = rows(dir.join("profiles.csv"));
    let constants = rows(dir.join("constants.csv"));
    let value = |q: &str| -> f64 { constants.iter().find(|r| r[0] == q).unwrap()[1].parse().unwrap() };
    assert_eq!(column(&profiles, "t")[0], 0.0);
    assert_eq!(column(&profiles, "rho_origin")[0], -value("e_ren"));
    assert!((value("e_ren") - value("e_ren_direct")).abs() < 1e-10 * value("e_ren").abs());
    let bound = value("gamma_lower_bound");
    assert!((bound - (-0.09 * value("gamma_bound_exponent")).exp()).abs() < 1e-12);

    let c = column(&rows(dir.join("c_tau.csv")), "c_tau");
    assert!(c.windows(2).all(|w| w[1] < w[0]));

    let m = manifest(&dir);
    assert_eq!(m["status"], "ok");
    let outputs = m["outputs"].as_array().unwrap();
    assert!(outputs.len() >= 5);
    for o in outputs {
        let bytes = std::fs::read(dir.join(o["file"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        assert_eq!(o["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn zero_coupling_estimate_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["estimate", "--seed", "4", "--n-paths", "200", "--set", "model.g=0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let t = rows(tmp.path().join("estimate/energy.csv"));
    assert_eq!(t.len(), 2);
    assert_eq!(column(&t, "energy"), vec![0.0]);
}

#[test]
fn same_seed_gives_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["estimate", "--seed", "11", "--n-paths", "300", "--set", "model.big_t=2", "--set", "model.tau=1"];
    let mut files = Vec::new();
    for (k, workers) in ["1", "3"].iter().enumerate() {
        let out_dir = tmp.path().join(k.to_string());
        let mut a = args.to_vec();
        a.extend(["--workers", workers]);
        assert_eq!(run(&out_dir, &a).status.code(), Some(0));
        files.push(std::fs::read(out_dir.join("estimate/energy.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn unusable_output_directory_fails_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, b"x").unwrap();
    let out = run(&blocker, &["kernels", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("output directory"));
}

#[test]
fn missing_seed_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["kernels"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn module_errors_land_in_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    // Passes config validation but exceeds the Fock basis size guard.
    let out = run(tmp.path(), &["fock", "--seed", "1", "--set", "fock.n_max=40"]);
    assert_eq!(out.status.code(), Some(2));
    let m = manifest(&tmp.path().join("fock"));
    assert_eq!(m["status"], "failed");
    assert!(m["error"]["message"].as_str().unwrap().contains("exceeds"), "{}", m["error"]);
}

#[test]
fn estimate_options_write_their_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &[
            "estimate", "--seed", "2", "--n-paths", "200", "--set", "grid.dt=0.1", "--set", "sweeps.horizons=[1.0, 1.5, 2.0]",
            "--extrapolate", "--growth", "--dump-paths", "3", "--momentum", "0.5,0,0",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("estimate");
    assert_eq!(rows(dir.join("energy.csv")).len(), 4);
    for f in ["extrapolation.csv", "growth.csv", "momentum.csv", "energy_vs_inv_t.dat", "paths.bin"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let dump = nelson_core::paths::read_paths(std::fs::File::open(dir.join("paths.bin")).unwrap()).unwrap();
    use nelson_core::estimator::{ensemble_seed, Purpose};
    assert_eq!(dump.seed, ensemble_seed(2, Purpose::Energy, 4.0));
    assert_eq!(dump.paths.len(), 3);
    for (index, path) in &dump.paths {
        let again = nelson_core::paths::sample_path(dump.grid, nelson_core::rng::RandomStream::new(dump.seed, *index));
        assert_eq!(again.increments(), path.increments());
    }
}
