use std::path::Path;
use std::process::{Command, Output};

const SAMPLE: &str = "(x1 (x2 0.9 0.1) ($ (x3 0.2 0.3) 0.5))\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dtderand"))
        .current_dir(dir)
        .args(args)
        .env_remove("DTDERAND_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sample.dt"), SAMPLE).unwrap();
    std::fs::write(dir.path().join("c.dt"), "7/16\n").unwrap();
    dir
}

#[test]
fn distance_prints_exact_fraction() {
    let dir = setup();
    let o = run(dir.path(), &["distance", "--r", "sample.dt", "--d", "c.dt"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "539/6400\n");
    let o = run(
        dir.path(),
        &["oracle", "l2", "--r", "sample.dt", "--d", "c.dt"],
    );
    assert_eq!(stdout(&o), "539/6400\n");
}

#[test]
fn exit_codes() {
    let dir = setup();
    assert_eq!(run(dir.path(), &[]).status.code(), Some(2));
    assert_eq!(
        run(dir.path(), &["derandomize", "--input", "sample.dt"])
            .status
            .code(),
        Some(2)
    );
    let bad_eps = run(
        dir.path(),
        &["derandomize", "--input", "sample.dt", "--eps", "1/2"],
    );
    assert_eq!(bad_eps.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_eps.stderr).contains("eps"));
    let missing = run(dir.path(), &["fourier", "--input", "nope.dt"]);
    assert_eq!(missing.status.code(), Some(1));
    let neg = run(
        dir.path(),
        &[
            "find", "--metric", "l2", "--source", "sample.dt", "--budget", "-1",
        ],
    );
    assert_eq!(neg.status.code(), Some(1));
    let bayes = run(
        dir.path(),
        &[
            "find", "--metric", "bayes", "--source", "sample.dt", "--budget", "1",
        ],
    );
    assert_eq!(bayes.status.code(), Some(1));
}

#[test]
fn report_has_digests_and_fractions() {
    let dir = setup();
    let o = run(
        dir.path(),
        &[
            "derandomize",
            "--input",
            "sample.dt",
            "--eps",
            "1/8",
            "--report",
            "r.json",
            "--output",
            "d.dt",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(rep["subcommand"], "derandomize");
    assert_eq!(rep["inputs"]["sample.dt"].as_str().unwrap().len(), 64);
    assert_eq!(rep["result"]["guarantee"], "1/8");
    assert_eq!(rep["result"]["pipeline_eps"], "1/32");
    assert!(rep["wall_time_ms"].is_u64());
    let out = std::fs::read_to_string(dir.path().join("d.dt")).unwrap();
    assert!(!out.contains('$'));
    let o = run(dir.path(), &["distance", "--r", "sample.dt", "--d", "d.dt"]);
    assert_eq!(
        stdout(&o),
        rep["result"]["error"].as_str().unwrap().to_string() + "\n"
    );
}

#[test]
fn online_and_influence() {
    let dir = setup();
    let o = run(
        dir.path(),
        &[
            "online", "--input", "sample.dt", "--eps", "1/4", "--delta", "1/4", "--x", "000",
        ],
    );
    let text = stdout(&o);
    assert!(text.starts_with("output 9/10\nqueried x1 x2\n"), "{text}");
    let o = run(dir.path(), &["influence", "--input", "sample.dt"]);
    assert_eq!(stdout(&o), "x1 2/5\nx2 2/5\nx3 1/40\ntotal 33/40\n");
    std::fs::write(dir.path().join("fx.dt"), "(x1 0.4 ($ 0 1))\n").unwrap();
    let o = run(
        dir.path(),
        &["influence", "--input", "fx.dt", "--var", "1", "--paper"],
    );
    assert_eq!(stdout(&o), "x1 1/10 paper 1/2\n");
}

#[test]
fn nisan_and_generators() {
    let dir = setup();
    std::fs::write(dir.path().join("f.dt"), "(x1 (x2 0 1) (x3 1 0))\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "gen", "noisy", "--input", "f.dt", "--flip", "1/4", "--output", "r.dt",
        ],
    );
    assert!(o.status.success());
    let o = run(dir.path(), &["nisan", "--input", "r.dt"]);
    let text = stdout(&o);
    assert!(text.contains("exact true"), "{text}");
    assert!(text.contains("(x1 (x2 0 1) (x3 1 0))"), "{text}");

    let o = run(
        dir.path(),
        &["gen", "index", "--n", "8", "--output", "idx.dt"],
    );
    assert!(o.status.success());
    let o = run(
        dir.path(),
        &[
            "find", "--metric", "l2", "--source", "idx.dt", "--budget", "4",
        ],
    );
    assert!(stdout(&o).starts_with("error 1/64\n"));

    let a = run(dir.path(), &["gen", "random", "--n", "5", "--seed", "9"]);
    let b = Command::new(env!("CARGO_BIN_EXE_dtderand"))
        .current_dir(dir.path())
        .args(["gen", "random", "--n", "5"])
        .env("DTDERAND_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn poly_source_and_table() {
    let dir = setup();
    std::fs::write(dir.path().join("p.txt"), "∅ : 1/2\n1 : 1/4\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "find", "--metric", "poly", "--source", "p.txt", "--budget", "1",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("error 1/4\n"));
    std::fs::write(dir.path().join("wide.txt"), "∅ : 1/2\n1 : 1\n").unwrap();
    let o = run(
        dir.path(),
        &[
            "find", "--metric", "poly", "--source", "wide.txt", "--budget", "1",
        ],
    );
    assert_eq!(o.status.code(), Some(1));

    let a = stdout(&run(dir.path(), &["prg-table"]));
    let b = stdout(&run(dir.path(), &["prg", "table"]));
    assert_eq!(a, b);
    assert!(a.lines().nth(1).unwrap().contains("x^2 + x + 1"));
}
