use std::path::PathBuf;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_batchpoll")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn scratch(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("batchpoll-cli-{}-{name}", std::process::id()))
}

fn write_model(name: &str, json: &str) -> PathBuf {
    let p = scratch(name);
    std::fs::write(&p, json).unwrap();
    p
}

const TWO_QUEUE: &str = r#"{
  "n": 2,
  "lambda": 0.2,
  "discipline": "lg",
  "queues": [
    {"service": {"family": "exponential", "mean": 1.0}, "switch": {"family": "exponential", "mean": 1.0}},
    {"service": {"family": "exponential", "mean": 1.0}, "switch": {"family": "exponential", "mean": 1.0}}
  ],
  "batch": [{"k": [1, 1], "p": 1.0}]
}"#;

#[test]
fn solve_symmetric_builtin() {
    let out = stdout(&["solve", "--model", "sym2"]);
    assert_eq!(out.lines().next().unwrap(), "discipline,quantity,target,value");
    assert!(out.lines().any(|l| l == "exhaustive,E(T),all,6"), "{out}");
}

#[test]
fn solve_model_file_with_discipline_override() {
    let p = write_model("two.json", TWO_QUEUE);
    let lg = stdout(&["solve", "--model", p.to_str().unwrap()]);
    assert!(lg.lines().any(|l| l == "locally-gated,E(T),all,6.33333333333"), "{lg}");
    let gg = stdout(&["solve", "--model", p.to_str().unwrap(), "--discipline", "gg"]);
    assert!(gg.lines().any(|l| l == "globally-gated,E(T),all,7.38095238095"), "{gg}");
    std::fs::remove_file(p).ok();
}

#[test]
fn exhaustive_is_best_for_model_b() {
    let t: Vec<f64> = ["ex", "lg", "gg"]
        .iter()
        .map(|d| {
            let out = stdout(&["solve", "--model", "model_b", "--rho", "0.6", "--discipline", d]);
            let last = rows(&out).pop().unwrap();
            assert_eq!(last[1], "E(T)");
            last[3].parse().unwrap()
        })
        .collect();
    assert!(t[0] < t[1] && t[0] < t[2], "{t:?}");
}

#[test]
fn invalid_model_exits_with_code_2() {
    let bad = TWO_QUEUE.replace("[1, 1]", "[0, 0]");
    let p = write_model("zero.json", &bad);
    let out = run(&["solve", "--model", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    std::fs::remove_file(p).ok();
    assert_eq!(run(&["solve", "--model", "no_such_model"]).status.code(), Some(2));
    assert_eq!(run(&["solve"]).status.code(), Some(2));
}

#[test]
fn unstable_model_exits_with_code_3() {
    let p = write_model("unstable.json", &TWO_QUEUE.replace("0.2", "0.6"));
    assert_eq!(run(&["solve", "--model", p.to_str().unwrap()]).status.code(), Some(3));
    std::fs::remove_file(p).ok();
}

#[test]
fn symmetric_experiment_matches_closed_forms() {
    let out = stdout(&["experiment", "sym2", "--lambda", "0.4", "--b-grid", "1", "--s-grid", "1"]);
    let r = &rows(&out)[0];
    assert_eq!(r[4..7], ["6", "6.33333333333", "7.38095238095"]);
    assert_eq!(r[7..10], r[4..7]);
    assert_eq!(r[10], "ex");
    assert_eq!(r[11], "ok");
    let all = stdout(&["experiment", "sym2"]);
    assert!(rows(&all).iter().all(|r| r[11] == "ok" || r[11] == "unstable"), "{all}");
}

#[test]
fn region_corners() {
    let out = stdout(&["experiment", "region", "--b-grid", "0.25,2", "--s-grid", "4,0.1"]);
    let r = rows(&out);
    assert_eq!((r[0][1].as_str(), r[0][2].as_str(), r[0][4].as_str()), ("0.25", "4", "ex"));
    assert_eq!((r[3][1].as_str(), r[3][2].as_str()), ("2", "0.1"));
    assert_ne!(r[3][4], "ex");
}

#[test]
fn models_abc_table() {
    let out = stdout(&["experiment", "models-abc", "--rho-grid", "0.3,0.7"]);
    let r = rows(&out);
    assert_eq!(r.len(), 6);
    assert!(r[..2].iter().all(|r| r[0] == "model_a" && r[5] == "lg"), "{out}");
    assert!(r[2..4].iter().all(|r| r[0] == "model_b" && r[5] == "ex"), "{out}");
    assert!(r[4..].iter().all(|r| r[0] == "model_c"));
    assert_eq!(run(&["experiment", "models-abc", "--rho-grid", "1.2"]).status.code(), Some(2));
}

#[test]
fn lst_output() {
    let out = stdout(&["lst", "--model", "sym2", "--omega", "0,0.5", "--batch", "1,1"]);
    let r = rows(&out);
    assert_eq!(r[0], ["0", "1"]);
    let v: f64 = r[1][1].parse().unwrap();
    assert!(v > 0.0 && v < 1.0);
    assert_eq!(run(&["lst", "--model", "sym2", "--omega", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["lst", "--model", "sym2", "--omega", "1", "--batch", "0,0"]).status.code(), Some(2));
}

#[test]
fn simulation_is_reproducible_and_traced() {
    let trace = scratch("trace.csv");
    let args = ["simulate", "--model", "sym2", "--reps", "2", "--batches", "3000", "--seed", "9", "--omega", "0.5"];
    let mut traced = args.to_vec();
    traced.extend(["--trace", trace.to_str().unwrap()]);
    let a = stdout(&traced);
    let b = stdout(&args);
    assert_eq!(a, b);
    assert!(a.lines().any(|l| l.starts_with("LST,0.5,")));
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "replication,batch_id,arrival_time,completion_time,sojourn,last_queue");
    assert!(lines.count() > 4000);
    std::fs::remove_file(trace).ok();
    assert_eq!(run(&["simulate", "--model", "sym2", "--reps", "0"]).status.code(), Some(2));
}

#[test]
fn output_file_option() {
    let p = scratch("solve.csv");
    let out = stdout(&["solve", "--model", "vacation", "-o", p.to_str().unwrap()]);
    assert!(out.is_empty());
    assert!(std::fs::read_to_string(&p).unwrap().starts_with("discipline,quantity,target,value\n"));
    std::fs::remove_file(p).ok();
}
