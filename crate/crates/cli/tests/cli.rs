use std::path::PathBuf;
use std::process::{Command, Output};

fn instance(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "instances", &format!("{name}.json")].iter().collect();
    p.display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cstar-fiber")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(name)
}

#[test]
fn check_trivial_base_passes() {
    let o = run(&["check", &instance("trivial_base")]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).ends_with("RESULT: PASS\n"));
}

#[test]
fn bundle_rtp_has_dimension_four() {
    let o = run(&["rtp", &instance("bundle"), "H", "K"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains(" rtp=4"), "{s}");
    assert!(s.contains("== fiberwise decomposition of H ⊗ K [PASS]"));
}

#[test]
fn function_algebras_fiber_product() {
    let o = run(&["fiber", &instance("functions"), "A", "B"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("fiber=6"), "{s}");
    assert!(s.contains("== commutant description of A ∗ B [PASS]"));
    assert!(s.contains("vacuous on finite sets"));
}

#[test]
fn every_shipped_suite_passes_except_the_negative_one() {
    for name in ["trivial_base", "bundle", "functions", "fibered", "gns"] {
        let o = run(&["suite", &instance(name)]);
        assert_eq!(o.status.code(), Some(0), "{name}:\n{}", stdout(&o));
    }
    let o = run(&["suite", &instance("not_absorbing")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("ρ_β(𝔅†)A ⊄ A"));
}

#[test]
fn verification_errors_exit_two() {
    let o = run(&["fiber", &instance("not_absorbing"), "A", "A"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("b_algebras.A"));
}

#[test]
fn input_errors_exit_three_with_locations() {
    let o = run(&["check", "/nonexistent/instance.json"]);
    assert_eq!(o.status.code(), Some(3));
    let o = run(&["rtp", &instance("bundle"), "H", "missing"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("modules: unknown name 'missing'"));
    let o = run(&["--tol-residual", "2", "check", &instance("bundle")]);
    assert_eq!(o.status.code(), Some(3));

    let bad = tmp("bad_reference.json");
    std::fs::write(
        &bad,
        r#"{"version": "cstar-fiber/1", "bases": {"u": "trivial"},
            "modules": {"H": {"span": {"base": "u", "alpha": ["nope"]}}}}"#,
    )
    .unwrap();
    let o = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("modules.H.alpha[0] -> matrices: unknown name 'nope'"));

    std::fs::write(&bad, "{\"version\": \"cstar-fiber/1\",\n \"matrices\": 3}").unwrap();
    let o = run(&["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn output_is_byte_identical_across_runs() {
    let (j1, j2) = (tmp("run1.json"), tmp("run2.json"));
    let args = |j: &PathBuf| {
        vec!["--dump-bases".to_string(), "--json-out".into(), j.display().to_string(), "suite".into(), instance("gns")]
    };
    let a1 = args(&j1);
    let a2 = args(&j2);
    let o1 = run(&a1.iter().map(String::as_str).collect::<Vec<_>>());
    let o2 = run(&a2.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(o1.stdout, o2.stdout);
    assert_eq!(std::fs::read(&j1).unwrap(), std::fs::read(&j2).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&j1).unwrap()).unwrap();
    assert_eq!(v["passed"], serde_json::Value::Bool(true));
    assert!(v["bases"]["gns/m2.j"].is_array());
}

#[test]
fn commutant_and_gns_dump_bases() {
    let o = run(&["commutant", &instance("gns"), "pauli"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("basis commutant (1 elements)"), "{s}");
    let o = run(&["gns", &instance("gns"), "m2"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("basis b_dag (4 elements)"));
    assert!(s.contains("basis j (1 elements)"));
}

#[test]
fn ind_by_a_unitary() {
    let o = run(&["--dump-bases", "ind", &instance("gns"), "U", "D2"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("basis ind (2 elements)"));
}

#[test]
fn generated_instances_are_deterministic_and_pass() {
    for seed in ["0", "1", "7"] {
        let a = run(&["generate", "--seed", seed]);
        let b = run(&["generate", "--seed", seed]);
        assert_eq!(a.stdout, b.stdout);
        let path = tmp(&format!("generated_{seed}.json"));
        std::fs::write(&path, &a.stdout).unwrap();
        let o = run(&["suite", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "seed {seed}:\n{}", stdout(&o));
    }
}
