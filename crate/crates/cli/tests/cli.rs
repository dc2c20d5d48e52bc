use std::process::{Command, Output};

fn snlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snlp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn model_file(name: &str, text: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("snlp-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn atom_law_row() {
    let m = model_file("brownian.json", "{\"sigma\": 1, \"gamma\": 0}");
    let o = snlp(&["law", "--id", "lt_atom_exp", "--model", m.to_str().unwrap(), "a=1", "b=2", "c=0", "x=1.5"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "law,a,b,c,x,atom,rate\nlt_atom_exp,1,2,0,1.5,0.666666666667,1\n");
}

#[test]
fn scale_at_origin() {
    let m = model_file("bm.txt", "sigma = 1\ngamma = 0\n");
    let o = snlp(&["scale", "--model", m.to_str().unwrap(), "q=0", "x=0"]);
    assert_eq!(stdout(&o), "x,W,Z,dWdq\n0,0,1,0\n");
}

#[test]
fn loopsoup_worked_value() {
    let o = snlp(&["loopsoup", "q=0", "b=2", "c=0", "levels=1", "weights=1"]);
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let cells: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
    assert!((cells[0] - 2f64.ln()).abs() < 1e-11 && (cells[1] - 2f64.ln()).abs() < 1e-11);
}

#[test]
fn list_covers_every_law() {
    let o = snlp(&["law", "--list"]);
    let text = stdout(&o);
    for law in snlp_core::laws::LAWS {
        assert!(text.lines().any(|l| l.starts_with(&format!("{},", law.id))), "{}", law.id);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(snlp(&["law", "--id", "lt_exit_up", "a=1", "b=2", "c=0", "zz=1"]).status.code(), Some(2));
    assert_eq!(snlp(&["law", "--id", "no_such_law"]).status.code(), Some(2));
    assert_eq!(snlp(&["scale", "--model", "/nonexistent/model.json", "x=1"]).status.code(), Some(2));
    assert_eq!(snlp(&["law", "--id", "lt_exit_up", "a=3", "b=2", "c=0"]).status.code(), Some(2));
    assert_eq!(snlp(&["frobnicate"]).status.code(), Some(2));
    let overflow = snlp(&["scale", "q=1", "x=800"]);
    assert_eq!(overflow.status.code(), Some(1));
    assert!(!overflow.stderr.is_empty());
}

#[test]
fn conformance_quick_passes_and_is_reproducible() {
    let a = snlp(&["conformance", "--quick"]);
    let b = snlp(&["conformance", "--quick"]);
    assert_eq!(a.status.code(), Some(0), "{}", stdout(&a));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).lines().skip(1).all(|l| l.ends_with(",pass")));
}

#[test]
fn mc_verify_reproducible_files() {
    let dir = model_file("unused", "");
    let (p1, p2) = (dir.with_file_name("mc1.csv"), dir.with_file_name("mc2.csv"));
    for p in [&p1, &p2] {
        let o = snlp(&[
            "mc-verify",
            "--id",
            "lt_exit_up",
            "--paths",
            "2000",
            "--dt",
            "1e-3",
            "--out",
            p.to_str().unwrap(),
            "a=1",
            "b=2",
            "c=0",
            "x=1.5",
            "p=1",
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (t1, t2) = (std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    assert_eq!(t1, t2);
    assert!(String::from_utf8(t1).unwrap().starts_with("law,quantity,analytic,mc_mean,mc_stderr,z_score\n"));
}

#[test]
fn omega_exit_table_is_symmetric_for_brownian() {
    let o = snlp(&["omega", "b=2", "h=0.01", "value=0.5", "what=exit"]);
    let rows: Vec<Vec<f64>> =
        stdout(&o).lines().skip(1).map(|l| l.split(',').map(|s| s.parse().unwrap()).collect()).collect();
    let n = rows.len();
    for i in 0..n {
        assert!((rows[i][1] - rows[n - 1 - i][2]).abs() < 1e-9);
    }
}

#[test]
fn json_format() {
    let o = snlp(&["scale", "q=0", "x=1", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v[0]["W"], serde_json::json!(2.0));
}
