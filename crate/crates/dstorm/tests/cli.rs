use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
seeds = 2
iterations = 40
record_every = 10

[topology]
kind = "ring"
agents = 4

[problem]
kind = "quadratic"
dim = 3
samples_per_agent = 10
lambda = 0.01

[[runs]]
method = "v2"
batch = 2
initial_batch = 4

[[runs]]
method = "dsgt"
batch = 2
initial_batch = 4
"#;

fn dstorm(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dstorm"));
    cmd.args(args).env_remove("DSTORM_OUT_DIR").env_remove("DSTORM_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.toml");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn validate_prints_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dstorm(&["validate", &cfg], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let resolved = text(&out.stdout);
    assert!(resolved.contains("rounds = ") && resolved.contains("alpha = ") && !resolved.contains("auto"));
}

#[test]
fn exit_codes_by_category() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), &CONFIG.replace("iterations = 40", "iterations = 40\ncolour = 1"));
    let out = dstorm(&["validate", &bad], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("unknown field"));

    let bound =
        write_config(dir.path(), &format!("{CONFIG}\n[[runs]]\nname = \"x\"\nmethod = \"v1-sg\"\nalpha = 1e9\n"));
    let out = dstorm(&["run", &bound], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("α ≤"));

    let out = dstorm(&["validate", dir.path().join("missing.toml").to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(4));

    let diverging = write_config(
        dir.path(),
        &format!(
            "{CONFIG}\n[[runs]]\nname = \"big\"\nmethod = \"v2\"\nschedule = \"fixed\"\nalpha = 9.0\nbeta = 0.5\n"
        ),
    );
    let out_dir = dir.path().join("div");
    let out = dstorm(&["run", &diverging], &[("DSTORM_OUT_DIR", &out_dir)]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
    assert!(out_dir.join("summary_by_iteration.csv").exists());
    assert!(out_dir.join("v2/seed-0.checkpoint.json").exists());
}

#[test]
fn run_honours_env_and_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let one = dstorm(&["run", &cfg], &[("DSTORM_OUT_DIR", &a), ("DSTORM_THREADS", Path::new("1"))]);
    assert!(one.status.success(), "{}", text(&one.stderr));
    let four = dstorm(&["run", &cfg, "--threads", "4", "--out", b.to_str().unwrap()], &[]);
    assert!(four.status.success(), "{}", text(&four.stderr));
    for f in [
        "status.csv",
        "summary_by_iteration.csv",
        "summary_by_samples.csv",
        "config.resolved.toml",
        "v2/seed-1.csv",
        "dsgt/seed-0.checkpoint.json",
        "v2/seed-0.output.txt",
    ] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let bad = dstorm(&["run", &cfg], &[("DSTORM_OUT_DIR", &a), ("DSTORM_THREADS", Path::new("zero"))]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn resume_continues_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let half = write_config(dir.path(), &CONFIG.replace("iterations = 40", "iterations = 20"));
    let out = dstorm(&["run", &half], &[("DSTORM_OUT_DIR", &dir.path().join("half"))]);
    assert!(out.status.success());
    let ckpt = dir.path().join("half/v2/seed-1.checkpoint.json");
    let resumed_dir = dir.path().join("resumed");
    let out = dstorm(&["resume", ckpt.to_str().unwrap(), "--iters", "20", "--out", resumed_dir.to_str().unwrap()], &[]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let cfg = write_config(dir.path(), CONFIG);
    let out = dstorm(&["run", &cfg], &[("DSTORM_OUT_DIR", &dir.path().join("full"))]);
    assert!(out.status.success());
    assert_eq!(
        fs::read(resumed_dir.join("seed-1.k40.checkpoint.json")).unwrap(),
        fs::read(dir.path().join("full/v2/seed-1.checkpoint.json")).unwrap()
    );
    let tail = fs::read_to_string(resumed_dir.join("seed-1.k20-40.csv")).unwrap();
    let full = fs::read_to_string(dir.path().join("full/v2/seed-1.csv")).unwrap();
    let full_lines: Vec<&str> = full.lines().collect();
    let tail_lines: Vec<&str> = tail.lines().collect();
    assert_eq!(tail_lines[0], full_lines[0]);
    assert_eq!(&tail_lines[1..], &full_lines[full_lines.len() - 2..]);

    let mut corrupted = fs::read_to_string(&ckpt).unwrap();
    corrupted = corrupted.replacen("\"k\":20", "\"k\":21", 1);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, corrupted).unwrap();
    let out = dstorm(&["resume", bad.to_str().unwrap(), "--iters", "1"], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("digest mismatch"));
}

#[test]
fn spectral_reports_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let adj = dir.path().join("adj.txt");
    let w = dir.path().join("w.txt");
    let out = dstorm(
        &[
            "spectral",
            "ring:8",
            "--weights",
            "uniform",
            "--export-graph",
            adj.to_str().unwrap(),
            "--export-matrix",
            w.to_str().unwrap(),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", text(&out.stderr));
    let report = text(&out.stdout);
    let value = |key: &str| -> f64 {
        report.lines().find(|l| l.starts_with(key)).unwrap().split_whitespace().last().unwrap().parse().unwrap()
    };
    // Uniform ring-8: rho = (1 + 2 cos(2 pi / 8)) / 3.
    let rho = (1.0 + 2.0 * (std::f64::consts::PI / 4.0).cos()) / 3.0;
    assert!((value("rho ") - rho).abs() < 1e-12);
    assert_eq!(value("recommended T"), (2.0 / (1.0 - rho).sqrt()).ceil());
    assert!(value("rho_tilde(T)") < 0.3);

    let again = dstorm(&["spectral", &format!("file:{}", adj.display()), "--weights", "uniform"], &[]);
    assert_eq!(text(&again.stdout), report);
    assert_eq!(fs::read_to_string(&w).unwrap().lines().count(), 8);

    for bad in ["ring", "hexagon:5", "ladder:5", "ring:x", "ring:8:3"] {
        let out = dstorm(&["spectral", bad], &[]);
        assert_eq!(out.status.code(), Some(2), "{bad}");
    }
    let out = dstorm(&["spectral", "random:8:0.5:3", "--rounds", "2"], &[]);
    assert!(out.status.success());
    assert!(text(&out.stdout).contains("T                 2"));
}
