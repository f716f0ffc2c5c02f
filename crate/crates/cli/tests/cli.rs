//! End-to-end tests of the `fraceig` binary: outputs, error reporting,
//! and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fraceig::eigensolve::{first_eigenpair, SolveOpts};
use fraceig::geometry::{build_mesh, DomainSpec, Params, SetMask};
use fraceig::kernel::assemble_kernel;

const BIN: &str = env!("CARGO_BIN_EXE_fraceig");

fn run(config: &str, out_dir: &Path, cmd: &str, extra: &[&str]) -> Output {
    let cfg_path = out_dir.join("config.cfg");
    fs::write(&cfg_path, config).unwrap();
    Command::new(BIN)
        .arg(cmd)
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(out_dir)
        .args(extra)
        .output()
        .expect("binary runs")
}

const BASE_CONFIG: &str = "\
[problem]
s = 0.5
p = 2.0
alpha = 0.5
R = 2.0

[geometry]
omega = interval 0 1
h = 0.1

[dirichlet]
set = interval 1 2
";

fn second_field(csv: &str) -> f64 {
    csv.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap()
}

#[test]
fn eig_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(BASE_CONFIG, dir.path(), "eig", &[]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let eig = fs::read_to_string(dir.path().join("eig.csv")).unwrap();
    assert!(eig.starts_with("lambda,iterations,residual,converged"));
    let lambda = second_field(&eig);

    let params = Params { n: 1, s: 0.5, p: 2.0, alpha: 0.5, r: 2.0 };
    let mesh = build_mesh(&DomainSpec::Interval { a: 0.0, b: 1.0 }, &params, 0.1).unwrap();
    let mask = SetMask::from_predicate(&mesh, |x| x[0] > 1.0 && x[0] < 2.0).unwrap();
    let op = assemble_kernel(&mesh, &mask, 0.5, 2.0).unwrap();
    let expect = first_eigenpair(&op, None, &SolveOpts::default()).unwrap().lambda;
    assert!(
        (lambda - expect).abs() <= 1e-12 * expect,
        "CLI {lambda} vs library {expect}"
    );

    // companion outputs exist and carry headers
    for (name, header) in [
        ("eigenfunction.csv", "node_index,x,y,u"),
        ("mask.csv", "cell_index,x,y,selected"),
    ] {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with(header), "{name} header");
    }
    let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("command = eig"));
    assert!(manifest.contains("problem.s = 0.5"));
    assert!(manifest.contains("dirichlet.set = interval 1 2"));
}

#[test]
fn invalid_s_fails_with_code_1_and_names_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let bad = BASE_CONFIG.replace("s = 0.5", "s = 1.2");
    let out = run(&bad, dir.path(), "eig", &[]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("s must be in (0,1)"),
        "stderr does not explain the s bound: {stderr}"
    );
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let out = Command::new(BIN).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn minimize_reaches_the_exhaustive_minimum() {
    let dir = tempfile::tempdir().unwrap();
    let config = "\
[problem]
s = 0.5
p = 2.0
alpha = 0.75
R = 1.5

[geometry]
omega = interval 0 1
h = 0.25
";
    let out = run(config, dir.path(), "minimize", &[]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let lambda = second_field(&fs::read_to_string(dir.path().join("eig.csv")).unwrap());

    // exhaustive oracle over all 3-cell masks
    let params = Params { n: 1, s: 0.5, p: 2.0, alpha: 0.75, r: 1.5 };
    let mesh = build_mesh(&DomainSpec::Interval { a: 0.0, b: 1.0 }, &params, 0.25).unwrap();
    let cells: Vec<usize> = mesh.candidate_cells().collect();
    let mut best = f64::INFINITY;
    for a in 0..cells.len() {
        for b in (a + 1)..cells.len() {
            for c in (b + 1)..cells.len() {
                let mask = SetMask::from_cells(&mesh, [cells[a], cells[b], cells[c]]).unwrap();
                let op = assemble_kernel(&mesh, &mask, 0.5, 2.0).unwrap();
                best = best.min(
                    first_eigenpair(&op, None, &SolveOpts::default()).unwrap().lambda,
                );
            }
        }
    }
    assert!(
        (lambda - best).abs() <= 1e-9,
        "CLI minimize {lambda} vs exhaustive {best}"
    );

    // history is monotone nonincreasing
    let hist = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    let lambdas: Vec<f64> = hist
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!lambdas.is_empty());
    for w in lambdas.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    for dir in [dir_a.path(), dir_b.path()] {
        let out = run(BASE_CONFIG, dir, "maximize", &["--seed", "7"]);
        assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in [
        "eig.csv",
        "eigenfunction.csv",
        "mask.csv",
        "history.csv",
        "manifest.txt",
    ] {
        let a = fs::read(dir_a.path().join(name)).unwrap();
        let b = fs::read(dir_b.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn surround_and_sweep_produce_expected_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!(
        "{BASE_CONFIG}\n[experiment]\npoints = 0 0 1 0\neps = 0.3\ns_list = 0.6 0.7\n"
    );
    let out = run(&config, dir.path(), "surround", &[]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let sur = fs::read_to_string(dir.path().join("surround.csv")).unwrap();
    assert!(sur.starts_with("x,y,eps,measure_in_ball,covered"));
    assert_eq!(sur.lines().count(), 3);

    let out = run(&config, dir.path(), "sweep", &[]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("s,h,lambda_plus_proxy,lambda_annulus,lambda_minus_R"));
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn decay_and_rate_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = "\
[problem]
s = 0.5
p = 2.0
alpha = 0.5
R = 12.0

[geometry]
omega = interval 0 1
h = 0.25

[dirichlet]
set = interval 1.5 2

[experiment]
radius = 0.5
k_list = 3 5 9
s_list = 0.5 0.7
";
    let out = run(config, dir.path(), "decay", &[]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let decay = fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert_eq!(decay.lines().count(), 4);
    let fit = fs::read_to_string(dir.path().join("decay_fit.csv")).unwrap();
    assert!(fit.starts_with("slope,expected"));

    let out = run(config, dir.path(), "rate", &[]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rate = fs::read_to_string(dir.path().join("rate.csv")).unwrap();
    assert!(rate.starts_with("s,lambda,ratio"));
    assert_eq!(rate.lines().count(), 3);
}

#[test]
fn weights_export_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{BASE_CONFIG}\n[output]\nexport_weights = true\n");
    let out = run(&config, dir.path(), "eig", &[]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let weights = fs::read_to_string(dir.path().join("weights.csv")).unwrap();
    assert!(weights.starts_with("e,f,w"));
    assert!(weights.lines().count() > 1);
}
