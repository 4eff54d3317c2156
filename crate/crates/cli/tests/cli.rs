use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name)
}

fn mfic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfic")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn compress_matches_golden_at_fixed_smin() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.ctab");
    let o = mfic(&["compress", path_str(&data("running.inst")), "--smin", "2", "--stats", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("c0: tuples=11 c_tup=100.00% c_rate=36.36% itemsets=5 avg_len=3.40 avg_freq=2.20"), "{text}");
    assert_eq!(fs::read_to_string(out).unwrap(), fs::read_to_string(data("running_smin2.ctab")).unwrap());
}

#[test]
fn compress_defaults_to_stdout_with_stats_on_stderr() {
    let o = mfic(&["compress", path_str(&data("running.inst")), "--stats", "--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), fs::read_to_string(data("running_default.ctab")).unwrap());
    assert!(String::from_utf8_lossy(&o.stderr).contains("total: tuples=11 c_tup=90.91%"));
}

#[test]
fn solve_counts_running_solutions_under_both_propagators() {
    for prop in ["str2", "str-mfic"] {
        let o = mfic(&["solve", path_str(&data("running.inst")), "--prop", prop, "--all"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        assert!(text.contains("status: sat\n11 solutions\n"), "{prop}: {text}");
    }
    let o = mfic(&["solve", path_str(&data("running_smin2.ctab")), "--prop", "str-mfic", "--all"]);
    assert!(stdout(&o).contains("11 solutions"));
}

#[test]
fn solve_first_prints_assignment() {
    let o = mfic(&["solve", path_str(&data("running.inst")), "--prop", "str2", "--heuristic", "lex"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("solution: x0=0 x1=0 x2=0 x3=0 x4=2\n"));
}

#[test]
fn exit_codes() {
    let unsat = mfic(&["solve", path_str(&data("empty.inst")), "--prop", "str2"]);
    assert_eq!(unsat.status.code(), Some(10));
    assert!(stdout(&unsat).starts_with("status: unsat"));
    let limit = mfic(&["solve", path_str(&data("running.inst")), "--prop", "str2", "--all", "--nodes", "3"]);
    assert_eq!(limit.status.code(), Some(20));
    assert_eq!(mfic(&["solve", path_str(&data("running.inst")), "--prop", "nope"]).status.code(), Some(2));
    assert_eq!(mfic(&["compress", path_str(&data("running.inst")), "--smin", "2", "--metric", "area", "--k-ratio", "0.2"]).status.code(), Some(2));
    assert_eq!(mfic(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mfic(&["solve", "/nonexistent.inst", "--prop", "str2"]).status.code(), Some(1));
    assert_eq!(mfic(&["gen", "--vars", "2", "--dom", "2", "--arity", "2", "--constraints", "1", "--tuples", "5"]).status.code(), Some(1));
}

#[test]
fn gen_is_deterministic() {
    let args = ["gen", "--vars", "6", "--dom", "3", "--arity", "3", "--constraints", "4", "--tuples", "10", "--seed", "9"];
    let a = mfic(&args);
    let b = mfic(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).matches("\ntable ").count(), 4);
}

#[test]
fn bench_writes_csv_and_propagators_agree() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..4 {
        let out = dir.path().join(format!("g{seed}.inst"));
        let seed = seed.to_string();
        let o = mfic(&[
            "gen", "--vars", "7", "--dom", "3", "--arity", "3", "--constraints", "5", "--tuples", "14", "--seed", &seed,
            "-o", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    fs::copy(data("running.inst"), dir.path().join("run.inst")).unwrap();
    let csv = dir.path().join("stats.csv");
    let o = mfic(&["bench", dir.path().to_str().unwrap(), "--out", csv.to_str().unwrap(), "--all"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "instance,method,c_tup_pct,c_rate_pct,n_itemsets,avg_len,avg_freq,solved,nodes,time_s");
    assert_eq!(lines.len(), 1 + 5 * 2);
    for pair in lines[1..].chunks(2) {
        let a: Vec<&str> = pair[0].split(',').collect();
        let b: Vec<&str> = pair[1].split(',').collect();
        assert_eq!((a[0], a[1], b[1]), (b[0], "str2", "str-mfic"));
        // identical search trees under equivalent propagators
        assert_eq!(a[8], b[8]);
    }

    // per-file solution counts agree between the two propagators
    for entry in fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|x| x == "inst") {
            let s2 = stdout(&mfic(&["solve", p.to_str().unwrap(), "--prop", "str2", "--all"]));
            let sm = stdout(&mfic(&["solve", p.to_str().unwrap(), "--prop", "str-mfic", "--all"]));
            assert_eq!(s2.lines().nth(1), sm.lines().nth(1), "{}", p.display());
        }
    }
}

#[test]
fn bench_to_stdout_with_selected_props() {
    let o = mfic(&["bench", path_str(&data("running.inst")), "--out", "-", "--props", "str-mfic", "--smin", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("running,str-mfic,100.00,36.36,5,3.40,2.20,1,"), "{row}");
    assert_eq!(text.lines().count(), 2);
}
