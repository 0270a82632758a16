mod common;

use serde_json::Value;
use twoway::cli::{decimal, regime_map_csv, run, CommandOutcome};

fn call(args: &[&str]) -> CommandOutcome {
    run(std::iter::once("twoway").chain(args.iter().copied()))
}

fn json(args: &[&str]) -> Value {
    let out = call(args);
    assert_eq!(out.code, 0, "{}", out.stderr);
    serde_json::from_str(&out.stdout).expect("stdout is JSON")
}

fn exact(v: &Value) -> &str {
    v["exact"].as_str().unwrap()
}

#[test]
fn capacity_command() {
    let v = json(&["capacity", "--n", "2", "--m", "1", "--nb", "1", "--mb", "1", "--lambda", "1/2"]);
    assert_eq!((exact(&v["inner"]), exact(&v["outer"])), ("3", "3"));
    assert_eq!(v["matched"], true);
    assert_eq!(v["inner"]["decimal"], "3.0");
    let v = json(&["capacity", "--n", "2", "--m", "1", "--nb", "1", "--mb", "1", "--lambda", "0"]);
    assert_eq!(exact(&v["inner"]), exact(&v["c_no"]));
    assert_eq!(exact(&v["outer"]), exact(&v["c_no"]));
    let v = json(&["capacity", "--n", "1", "--m", "3", "--nb", "1", "--mb", "1", "--lambda", "1/2"]);
    assert_eq!(exact(&v["inner"]), "3");
    assert_eq!(v["netgain"], "Gain");
}

#[test]
fn malformed_rational_is_a_usage_error() {
    for bad in ["1/0", "x", "3/2", "-1/2"] {
        let out = call(&["capacity", "--n", "2", "--m", "1", "--nb", "1", "--mb", "1", "--lambda", bad]);
        assert_eq!(out.code, 2, "{bad}");
        assert!(out.stdout.is_empty());
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(call(&["capacity", "--n", "two"]).code, 2);
    assert_eq!(call(&["frobnicate"]).code, 2);
}

#[test]
fn simulate_type1() {
    let v = json(&["simulate", "type1", "--n", "1", "--m", "3", "--nb", "1", "--mb", "1", "--lambda", "1/2", "--exhaustive"]);
    assert_eq!(v["status"], "PASS");
    assert_eq!(v["messages_tested"], 64);
    assert_eq!(v["exhaustive"], true);
    assert_eq!(exact(&v["rate"]["forward_sum"]), "3");
    assert_eq!(v["budget_ok"], true);
}

#[test]
fn simulate_four_message() {
    let v = json(&["simulate", "fourmsg"]);
    assert_eq!(v["status"], "PASS");
    assert_eq!(v["messages_tested"], 64);
    assert_eq!((exact(&v["rate"]["forward_sum"]), exact(&v["rate"]["backward_sum"])), ("2", "1"));
    let corners = v["corners"].as_array().unwrap();
    assert_eq!((exact(&corners[0]["r_sum"]), exact(&corners[0]["rt_sum"])), ("3", "0"));
    assert_eq!((exact(&corners[1]["r_sum"]), exact(&corners[1]["rt_sum"])), ("0", "1"));
    assert!(corners.iter().all(|c| c["status"] == "PASS"));
    let out = call(&["simulate", "fourmsg", "--nb", "1", "--mb", "1"]);
    assert_eq!(out.code, 2);
}

#[test]
fn simulate_regime_mismatch() {
    let out = call(&["simulate", "type1", "--n", "2", "--m", "1", "--nb", "1", "--mb", "1", "--lambda", "1/2"]);
    assert_eq!(out.code, 2);
    assert!(out.stdout.is_empty());
    assert!(out.stderr.contains("TypeI"));
}

#[test]
fn simulate_seeded_sampling_and_files() {
    let dir = std::env::temp_dir().join(format!("twoway-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let dump = dir.join("dump.jsonl");
    let spec = dir.join("spec.json");
    let v = json(&[
        "simulate", "type2", "--n", "2", "--m", "1", "--nb", "1", "--mb", "1", "--lambda", "1/2", "--seed", "5",
        "--dump", dump.to_str().unwrap(), "--spec-out", spec.to_str().unwrap(),
    ]);
    assert_eq!(v["exhaustive"], false);
    assert_eq!(v["status"], "PASS");
    let lines = std::fs::read_to_string(&dump).unwrap();
    assert_eq!(lines.lines().count(), 2);
    let s: Value = serde_json::from_str(&std::fs::read_to_string(&spec).unwrap()).unwrap();
    assert_eq!(s["kind"], "TypeII");
    assert!(twoway::schemes::spec_from_json(&s).is_ok());
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn netgain_rows() {
    let out = call(&["netgain"]);
    assert_eq!(out.code, 0);
    let rows: Vec<&str> = out.stdout.lines().collect();
    assert_eq!(rows[0], "lambda,fb_gain,indep_gain");
    assert_eq!(rows.len(), 12);
    assert!(rows.contains(&"0.0,0.0,0.0"));
    assert!(rows.contains(&"0.5,1.0,0.5"));
    assert!(rows.contains(&"1.0,1.0,1.0"));
    assert_eq!(call(&["netgain", "--lambda-steps", "1"]).code, 2);
    let out = call(&["netgain", "--n", "3", "--m", "2", "--lambda-steps", "3"]);
    assert_eq!(out.stdout, "lambda,fb_gain,indep_gain\n0.0,0.0,0.0\n0.5,0.0,0.5\n1.0,0.0,1.0\n");
}

#[test]
fn regime_map_points() {
    let csv = regime_map_csv(6, 6, 6, 6, common::frac(1, 2));
    let label = |n: usize, m: usize, nb: usize, mb: usize| -> String {
        let prefix = format!("{n},{m},{nb},{mb},");
        let line = csv.lines().find(|l| l.starts_with(&prefix)).unwrap();
        line.split(',').nth(6).unwrap().to_string()
    };
    assert_eq!(label(1, 3, 1, 1), "Gain");
    assert_eq!(label(2, 2, 1, 5), "NoGain");
    assert_eq!(label(3, 1, 3, 1), "Open");
}

#[test]
fn regime_map_golden() {
    let out = call(&["regime-map", "--max-n", "6", "--max-m", "6"]);
    assert_eq!(out.code, 0);
    assert_eq!(out.stdout, include_str!("golden/regime_map_6.csv"));
}

#[test]
fn pair_command() {
    let dir = std::env::temp_dir().join(format!("twoway-pair-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p.to_str().unwrap().to_string()
    };
    let f = write("f1", "2 1\n");
    let b = write("b1", "1 1\n");
    let v = json(&["pair", "--forwards", &f, "--backwards", &b, "--lambda", "1/2"]);
    assert_eq!(exact(&v["total_net_gain"]), "1/2");
    assert_eq!(v["total_net_gain"]["decimal"], "0.5");

    let f = write("f2", "3 2\n4 3\n");
    let v = json(&["pair", "--forwards", &f, "--backwards", &f, "--lambda", "1"]);
    assert_eq!(exact(&v["total_net_gain"]), "0");

    let f = write("f3", "1 3\n3 2\n");
    let b = write("b3", "4 4\n1 1\n");
    let v = json(&["pair", "--forwards", &f, "--backwards", &b, "--lambda", "1/2"]);
    assert_eq!(v["pairs"][0]["backward"], 1);
    assert_eq!(v["pairs"][1]["backward"], 0);
    assert_eq!(exact(&v["total_net_gain"]), "1/2");

    let bad = write("bad", "2 x\n");
    assert_eq!(call(&["pair", "--forwards", &bad, "--backwards", &b, "--lambda", "1/2"]).code, 2);
    let one = write("one", "2 1\n");
    assert_eq!(call(&["pair", "--forwards", &one, "--backwards", &b, "--lambda", "1/2"]).code, 2);
    assert_eq!(call(&["pair", "--forwards", "/nonexistent/x", "--backwards", &b, "--lambda", "1/2"]).code, 2);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn weak_command() {
    let v = json(&["weak", "--rt-target", "1"]);
    assert_eq!((exact(&v["lambda"]), exact(&v["lambda_t"]), exact(&v["r_sum_bound"])), ("0", "1/4", "3/2"));
    let v = json(&["weak", "--lambda", "0", "--lambda-t", "0"]);
    assert_eq!((exact(&v["r_sum_bound"]), exact(&v["rt_sum_bound"])), ("2", "0"));
    let v = json(&["weak", "--rt-target", "0"]);
    assert_eq!(exact(&v["r_sum_bound"]), "3");
    let out = call(&["weak", "--rt-target", "2"]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn decimal_rendering() {
    use twoway::channel::Rational;
    assert_eq!(decimal(&Rational::new(1, 2)), "0.5");
    assert_eq!(decimal(&Rational::from_integer(3)), "3.0");
    assert_eq!(decimal(&Rational::new(1, 3)), "0.333333333333");
    assert_eq!(decimal(&Rational::new(-5, 4)), "-1.25");
}
