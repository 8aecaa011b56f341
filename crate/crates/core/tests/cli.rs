use std::process::Command;

fn neep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_neep"))
}

#[test]
fn list_and_decode() {
    let out = neep().arg("list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 17);

    let out = neep()
        .args(["decode", "sqrt + - * * x x sin x y y y x y x x y"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("sqrt(((x*y)-x)+(x*sin(y)))\n"));
}

#[test]
fn exit_codes() {
    let out = neep().args(["decode", "+ $ x"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("symbol 1"));

    let out = neep()
        .args(["run", "--method", "gpp", "--problem", "Nguyen6"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("valid methods"));

    let out = neep().args(["run", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_into_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = neep()
        .args(["run", "--method", "pso-neep", "--problem", "Nguyen7", "--trials", "2"])
        .args(["--pop", "8", "--generations", "3", "--seed", "1", "--workers", "1"])
        .env("NEEP_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for file in ["summary.csv", "trace.csv", "trials.csv", "summary.json", "config.toml"] {
        assert!(dir.path().join(file).exists(), "{file} missing");
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("method,benchmark,median,std,rank,verdict,p_value\npso-neep,Nguyen7,"));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 4);
}

#[test]
fn csv_benchmark_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("concrete.csv");
    let mut text = String::from("c1,c2,c3,c4,c5,c6,c7,c8,strength\n");
    for i in 0..40 {
        let row: Vec<String> = (0..8).map(|j| ((i * 7 + j * 3) % 11).to_string()).collect();
        text += &format!("{},{}\n", row.join(","), i % 5);
    }
    std::fs::write(&data, text).unwrap();
    let out = neep()
        .args(["run", "--method", "gep", "--problem", "Concrete", "--trials", "1"])
        .args(["--pop", "10", "--generations", "2", "--workers", "1"])
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("res"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trials = std::fs::read_to_string(dir.path().join("res/trials.csv")).unwrap();
    assert!(trials.lines().nth(1).unwrap().starts_with("gep,Concrete,0,"));
}
