use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hlab_cli::experiments::{BUNCHING_HEADER, CONJUGACY_HEADER, HOLONOMY_HEADER, SECTION_HEADER};

fn hlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hlab")).args(args).output().expect("hlab binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn manifest_value(dir: &Path, key: &str) -> Option<String> {
    let mut rdr = csv::Reader::from_path(dir.join("manifest.csv")).unwrap();
    rdr.records().map(Result::unwrap).find(|r| &r[0] == key).map(|r| r[1].to_string())
}

#[test]
fn golden_headers() {
    assert_eq!(HOLONOMY_HEADER.join(","), "d_in,d_out,bucket");
    assert_eq!(CONJUGACY_HEADER.join(","), "p1,p2,p3,h1,h2,h3,tail,resid");
    assert_eq!(BUNCHING_HEADER.join(","), "x1,x2,mu,nu,gamma,gammahat,nuhat,muhat");
    assert_eq!(SECTION_HEADER.join(","), "x,value");
}

#[test]
fn cat_holonomy_writes_samples_and_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(
        tmp.path(),
        "[system]\nkind = \"linear_anosov\"\n[experiment]\nkind = \"holonomy\"\n[numeric]\nn_pairs = 80\ngrid = 4\n",
    );
    let res = hlab(&["holonomy", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(header(&out.join("holonomy_samples.csv")), "d_in,d_out,bucket");
    assert_eq!(header(&out.join("fit_summary.csv")), "key,value");
    assert_eq!(manifest_value(&out, "experiment").as_deref(), Some("holonomy"));
    let fit = fs::read_to_string(out.join("fit_summary.csv")).unwrap();
    assert!(fit.contains("verdict:Eu,pass"), "{fit}");
}

#[test]
fn bunching_on_a_three_torus_adds_a_coordinate() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = write_config(tmp.path(), "[system]\nkind = \"perturbed_skew\"\n[numeric]\ngrid = 2\n");
    let res = hlab(&["bunching", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(header(&out.join("bunching.csv")), "x1,x2,x3,mu,nu,gamma,gammahat,nuhat,muhat");
}

#[test]
fn unknown_system_kind_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[system]\nkind = \"henon\"\n[experiment]\nkind = \"bunching\"\n");
    let res = hlab(&["run", "--config", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    let err = String::from_utf8_lossy(&res.stderr);
    assert!(err.contains("system.kind"), "{err}");
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn unknown_fields_and_out_of_range_values_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[numeric]\ngird = 4\n");
    assert_eq!(hlab(&["bunching", "--config", &cfg]).status.code(), Some(2));
    let cfg = write_config(tmp.path(), "[numeric]\nt_steps = 4\n");
    let res = hlab(&["suspension", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("numeric.t_steps"));
}

#[test]
fn oversized_perturbation_is_rejected_at_load() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[system]\nkind = \"perturbed_anosov\"\ndelta = 0.5\n");
    let res = hlab(&["bunching", "--config", &cfg, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("system.delta"));
}

#[test]
fn unknown_gallery_is_a_config_error() {
    let res = hlab(&["gallery", "mandelbrot"]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("mandelbrot"));
}

#[test]
fn subcommand_and_config_kind_must_agree() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[experiment]\nkind = \"section\"\n");
    assert_eq!(hlab(&["bunching", "--config", &cfg]).status.code(), Some(2));
}

#[test]
fn rerun_verifies_and_tampering_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out_s = out.to_str().unwrap();
    let cfg = write_config(tmp.path(), "[experiment]\nkind = \"leafexp\"\n[numeric]\nk_max = 10\n");

    assert_eq!(hlab(&["run", "--config", &cfg, "--out", out_s]).status.code(), Some(0));
    assert_eq!(manifest_value(&out, "verified_against_previous").as_deref(), Some("false"));
    let first = fs::read(out.join("leafexp.csv")).unwrap();

    assert_eq!(hlab(&["run", "--config", &cfg, "--out", out_s]).status.code(), Some(0));
    assert_eq!(manifest_value(&out, "verified_against_previous").as_deref(), Some("true"));
    assert_eq!(fs::read(out.join("leafexp.csv")).unwrap(), first);

    // Corrupt the recorded hash: the next run must refuse and leave the files alone.
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    let recorded = manifest_value(&out, "artifact:leafexp.csv").unwrap();
    fs::write(out.join("manifest.csv"), manifest.replace(&recorded, &"0".repeat(64))).unwrap();
    let res = hlab(&["run", "--config", &cfg, "--out", out_s]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("leafexp.csv"));
    assert_eq!(manifest_value(&out, "artifact:leafexp.csv").unwrap(), "0".repeat(64));

    // A different seed is a different configuration, so nothing is compared.
    assert_eq!(hlab(&["run", "--config", &cfg, "--out", out_s, "--seed", "9"]).status.code(), Some(0));
    assert_eq!(manifest_value(&out, "seed").as_deref(), Some("9"));
}

#[test]
fn plots_are_written_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let res = hlab(&["gallery", "slanted-conjugacy", "--out", out.to_str().unwrap(), "--plots"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("verdicts.csv").exists());
    assert!(fs::read_dir(&out).unwrap().any(|e| e.unwrap().path().extension().is_some_and(|x| x == "svg")));
}
