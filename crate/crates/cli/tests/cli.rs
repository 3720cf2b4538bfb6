use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaysplit")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SCALAR: &str = "dim = 1\nr = 0.1\nM = 1.0\n\n[[terms]]\nlag = 0.1\nmatrix = -1.0\n";

fn scenario(dir: &Path, suites: &str, sweep: &str) -> std::path::PathBuf {
    let text = format!(
        "r_sweep = [{sweep}]\nseed = 3\nk_f = 5.0\nsuites = [{suites}]\noutput_dir = \"{}\"\n\n\
         [sampling]\nsamples = 10\npairs = 20\nverify_samples = 3\ngronwall_instances = 18\ngrowth_pairs = 3\ngrowth_delays = 10\n\n\
         [kernel]\n{}",
        dir.join("out").display(),
        SCALAR.replace("[[terms]]", "[[kernel.terms]]")
    );
    let path = dir.join("scenario.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn constants_prints_the_reference_values() {
    let out = run(&["constants", "--M", "1", "--r", "0.1"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let k2: f64 = text.lines().find_map(|l| l.strip_prefix("K2_r = ")).unwrap().parse().unwrap();
    assert!((k2 - 10.09).abs() < 0.01, "{text}");
    assert!(text.contains("gap = "));
}

#[test]
fn hypothesis_violation_exits_two() {
    assert_eq!(code(&run(&["constants", "--M", "1", "--r", "0.5"])), 2);
    assert_eq!(code(&run(&["sweep", "--M", "1", "--r", "0.1,0.4"])), 2);
    assert_eq!(code(&run(&["special"])), 2);
    assert_eq!(code(&run(&["special", "--preset", "delay", "--M", "4", "--r", "0.1"])), 2);
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    fs::write(&path, "suites = [\"constants\"]\nunknown = 1\n").unwrap();
    assert_eq!(code(&run(&["run", path.to_str().unwrap()])), 2);
    assert_eq!(code(&run(&["run", dir.path().join("missing.toml").to_str().unwrap()])), 2);
    let out = run(&["constants", "--M", "1"]);
    assert_eq!(code(&out), 2, "clap usage errors also exit 2");
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let out = run(&["sweep", "--M", "1", "--r", "0.1,0.01,0.001", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&out), 0);
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("r,lambda_r,mu_r,alpha,beta,K1,K2,gamma,K,proj_bound,gap,L_r\n"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn special_kernel_file_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let kernel = dir.path().join("k.toml");
    fs::write(&kernel, SCALAR).unwrap();
    let csv = dir.path().join("phi.csv");
    let out = run(&["special", "--kernel", kernel.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("group_ok = true"));
    assert!(fs::read_to_string(&csv).unwrap().lines().count() > 100);
}

#[test]
fn gronwall_and_growth_pass() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let out = run(&["gronwall", "--instances", "27", "--seed", "5", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("failed = 0"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 28);

    let out = run(&["growth", "--random", "--pairs", "3", "--r", "0.1", "--delays", "10"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    let out = run(&["growth", "--preset", "rotation", "--r", "0.1", "--pairs", "2", "--delays", "10"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn split_and_verify_pass_at_reference_delay() {
    let out = run(&["split", "--preset", "delay", "--r", "0.1", "--samples", "20", "--pairs", "30"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("delta_ok = true"));
    let out = run(&["verify", "--preset", "rotation", "--r", "0.1", "--samples", "4"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn small_delay_forward_bound_fails_with_exit_one() {
    let out = run(&["verify", "--preset", "delay", "--r", "0.001", "--samples", "2"]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("forward_ok = false"));
}

#[test]
fn scenario_run_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(
        dir.path(),
        "\"constants\", \"special\", \"split\", \"verify\", \"gronwall\", \"growth\"",
        "0.1, 0.05",
    );
    let first = run(&["run", path.to_str().unwrap()]);
    assert_eq!(code(&first), 0, "{}", stdout(&first));
    let out = dir.path().join("out");
    let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let before: Vec<Vec<u8>> = names.iter().map(|n| fs::read(out.join(n)).unwrap()).collect();

    let other = dir.path().join("again");
    let second = run(&["run", path.to_str().unwrap(), "--out", other.to_str().unwrap()]);
    assert_eq!(code(&second), 0);
    assert_eq!(stdout(&first), stdout(&second));
    for (n, bytes) in names.iter().zip(&before) {
        assert_eq!(&fs::read(other.join(n)).unwrap(), bytes, "{n:?}");
    }
    assert!(names.iter().any(|n| n == "summary.txt"));
}

#[test]
fn empty_scenario_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = scenario(dir.path(), "", "");
    let out = run(&["run", path.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out), "passed = 0\nfailed = 0\n");
    assert!(!dir.path().join("out").exists());
}
