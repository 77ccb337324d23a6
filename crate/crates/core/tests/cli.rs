use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spinbus::config::OptimumDocument;
use spinbus::optimize::PointRecord;

fn spinbus(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinbus"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn csv_column(text: &str, name: &str) -> Vec<f64> {
    let mut lines = text.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

const OPTIMIZE: &str = r#"
command = "optimize"
[layout]
chain_length = 3
pair_count = 2
[strategy]
kind = "s1"
j0 = { start = 0.1, end = 0.3, step = 0.1 }
fields = { start = 0.0, end = 0.4, step = 0.2 }
tau = { start = 1.0, end = 60.0, step = 0.5 }
policy = { kind = "haar-mean", samples = 2, seed = 3 }
refine = true
"#;

const FIDELITY: &str = r#"
command = "fidelity"
[layout]
chain_length = 3
pair_count = 2
[params]
j0 = 0.3
h0 = 0.2
h = [0.3, -0.2]
[run]
time_range = { start = 0.0, end = 40.0, step = 0.25 }
"#;

#[test]
fn every_command_runs_from_the_shipped_configs() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for name in ["evolve", "fidelity", "optimize", "noise", "twoway"] {
        let out = tempfile::tempdir().unwrap();
        let r = spinbus(&configs.join(format!("{name}.toml")), out.path(), &[]);
        assert!(r.status.success(), "{name}: {}", String::from_utf8_lossy(&r.stderr));
        let stdout = String::from_utf8(r.stdout).unwrap();
        assert!(stdout.starts_with(name), "{stdout}");
        let produced = files(out.path());
        assert_eq!(produced.len(), 2);
        assert!(produced.iter().all(|(f, _)| f.starts_with(name)));
    }
}

#[test]
fn outputs_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "opt.toml", OPTIMIZE);
    let mut runs = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        let r = spinbus(&cfg, &out, &["--workers", workers]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        runs.push((r.stdout, files(&out)));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn optimum_json_round_trips_and_matches_landscape() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "opt.toml", OPTIMIZE);
    let out = dir.path().join("o");
    assert!(spinbus(&cfg, &out, &[]).status.success());
    let found = files(&out);
    let json = &found.iter().find(|(f, _)| f.ends_with(".json")).unwrap().1;
    let csv = String::from_utf8(found.iter().find(|(f, _)| f.ends_with(".csv")).unwrap().1.clone()).unwrap();
    let doc: OptimumDocument = serde_json::from_slice(json).unwrap();
    let again: OptimumDocument = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
    assert_eq!(doc, again);
    let best_in_csv = csv_column(&csv, "F").into_iter().fold(0.0, f64::max);
    assert!((doc.best.fidelity - best_in_csv).abs() <= 1e-12 * best_in_csv.max(doc.best.fidelity));
    assert!(doc.failures.is_empty());
}

#[test]
fn noiseless_dephasing_run_reproduces_unitary_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let r = spinbus(&write(dir.path(), "f.toml", FIDELITY), &out, &[]);
    assert!(r.status.success());
    let best: PointRecord = serde_json::from_slice(
        &files(&out).into_iter().find(|(f, _)| f.ends_with(".json")).unwrap().1,
    )
    .unwrap();

    let noise = format!("{}\n[noise]\ngammas = [0.0, 1e-3]\ntau = {}\n", FIDELITY.replace("command = \"fidelity\"", "command = \"noise\""), best.tau);
    let nout = dir.path().join("n");
    let r = spinbus(&write(dir.path(), "n.toml", &noise), &nout, &[]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = files(&nout).into_iter().find(|(f, _)| f.ends_with(".csv")).unwrap().1;
    let f = csv_column(&String::from_utf8(csv).unwrap(), "F_mean");
    assert!((f[0] - best.fidelity).abs() < 1e-6, "{} vs {}", f[0], best.fidelity);
    assert!(f[1] < f[0]);
}

#[test]
fn seed_flag_overrides_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let text = FIDELITY.replace("[run]", "[run]\npolicy = { kind = \"haar-mean\", samples = 2, seed = 1 }");
    let cfg = write(dir.path(), "f.toml", &text);
    let run = |seed: &str, tag: &str| {
        let out = dir.path().join(tag);
        assert!(spinbus(&cfg, &out, &["--seed", seed]).status.success());
        files(&out)
    };
    let a = run("5", "a");
    assert_eq!(a, run("5", "b"));
    assert_ne!(a, run("6", "c"));
}

#[test]
fn exit_codes_distinguish_config_and_numerical_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let code = |cfg: &Path, extra: &[&str]| spinbus(cfg, &out, extra).status.code();

    assert_eq!(code(&dir.path().join("missing.toml"), &[]), Some(2));
    let unknown = write(dir.path(), "u.toml", &FIDELITY.replace("j0 = 0.3", "j0 = 0.3\nspeed = 1"));
    assert_eq!(code(&unknown, &[]), Some(2));
    let mismatched = write(dir.path(), "m.toml", &FIDELITY.replace("h = [0.3, -0.2]", "h = [0.3]"));
    assert_eq!(code(&mismatched, &[]), Some(2));
    let ok = write(dir.path(), "ok.toml", FIDELITY);
    assert_eq!(code(&ok, &["--workers", "0"]), Some(2));
    assert_eq!(code(&ok, &[]), Some(0));

    let unstable = format!(
        "{}\n[noise]\ngammas = [1000.0]\nintegrator = \"rk4\"\ndt = 1000.0\ntau = 5.0\n",
        FIDELITY.replace("command = \"fidelity\"", "command = \"noise\"")
    );
    assert_eq!(code(&write(dir.path(), "x.toml", &unstable), &[]), Some(3));
}
