mod common;

use std::sync::Arc;

use common::*;
use paraverify_core::checker::{reachable_states, DEFAULT_STATE_LIMIT};
use paraverify_core::corpus::CORPUS;
use paraverify_core::param::ParamInvariant;
use paraverify_core::pipeline::*;
use paraverify_core::protocol::{concretize_relaxed, parse_protocol, Concretization};

fn run(name: &str) -> PipelineRun {
    run_pipeline(name, spec(name), &PipelineConfig::default())
}

#[test]
fn mux_is_verified() {
    let r = run("mux");
    assert_eq!(r.report.outcome, Outcome::Verified);
    assert_eq!(r.report.reference_sizes, "NODE=3");
    assert_eq!(r.merged.len(), 2);
    let text = emit_report(&r.report, ReportFormat::Text);
    assert!(text.contains("2 parameterized invariants"), "{text}");
    let texts: Vec<&str> = r.report.invariants.iter().map(|i| i.text.as_str()).collect();
    assert!(texts.contains(&"forall n1:NODE. ~(lock = false & st[n1] = Critical)"), "{texts:?}");
    let sizes: Vec<&str> = r.report.final_check.iter().map(|s| s.sizes.as_str()).collect();
    assert_eq!(sizes, ["NODE=3", "NODE=4", "NODE=5"]);
    assert!(r.report.final_check.iter().all(|s| s.status == SizeStatus::Passed));
}

#[test]
fn trivial_property_needs_no_ctis() {
    let src = CORPUS[0].source.replace(": !(st[i] = Critical & st[j] = Critical);", ": true;");
    let r = run_pipeline("mux_true", Arc::new(parse_protocol(&src).unwrap()), &PipelineConfig::default());
    assert_eq!(r.report.outcome, Outcome::Verified);
    assert_eq!(r.report.counts.ctis_found, 0);
    assert!(r.concrete.is_empty());
}

#[test]
fn broken_mutex_is_unsafe() {
    let r = run("mux_broken");
    assert_eq!(r.report.outcome, Outcome::Unsafe);
    assert_eq!(r.report.outcome.exit_code(), 1);
    let v = r.report.violation.unwrap();
    assert_eq!(v.state.matches("Critical").count(), 2, "{}", v.state);
}

#[test]
fn safety_alone_is_not_inductive() {
    let s = spec("mux");
    let r = run("mux");
    let safety = ParamInvariant::from_property(&s, &s.properties[0]);
    let res = final_inductive_check(&s, &[safety], &[Concretization(vec![1]), Concretization(vec![2])], &r.checker)
        .unwrap();
    assert_eq!(res[0].status, SizeStatus::Skipped);
    assert_eq!(res[1].status, SizeStatus::Failed);
    assert!(res[1].rule.as_deref().unwrap().starts_with("crit("));
    assert!(res[1].witness.as_deref().unwrap().contains("Critical"));
}

#[test]
fn explicit_final_sizes() {
    let cfg = PipelineConfig { final_sizes: Some(vec![1, 2, 3]), ..PipelineConfig::default() };
    let r = run_pipeline("mux", spec("mux"), &cfg);
    assert_eq!(r.report.outcome, Outcome::Verified);
    assert_eq!(r.report.final_check[0].status, SizeStatus::Skipped);
    assert!(r.report.final_check[0].note.is_some());
}

#[test]
fn json_round_trip_is_byte_identical() {
    let r = run("toy_quorum");
    let a = emit_report(&r.report, ReportFormat::Json);
    let back: VerificationReport = serde_json::from_str(&a).unwrap();
    assert_eq!(emit_report(&back, ReportFormat::Json), a);
    assert_eq!(back.schema, REPORT_SCHEMA);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["outcome"], "verified");
    assert!(v["timings"]["total_ms"].is_number());
    assert_eq!(r.report.without_timings().timings.total_ms, 0.0);
}

/// Safe at the reference size, unsafe from two nodes on.
const GROWS_UNSAFE: &str = "type NODE;
var a    : array[NODE] of boolean;
var seen : boolean;
var err  : boolean;
init { forall n : NODE . a[n] = false; seen = false; err = false; }
rule set(i : NODE)  guard a[i] = false               action a[i] := true, seen := true;
rule mark(i : NODE) guard a[i] = false & seen = true action err := true;
invariant noerr : !(err = true);
";

#[test]
fn failure_beyond_the_reference_is_not_verified() {
    let r = run_pipeline("grows", Arc::new(parse_protocol(GROWS_UNSAFE).unwrap()), &PipelineConfig::default());
    assert_eq!(r.report.reference_sizes, "NODE=1");
    assert_eq!(r.report.outcome, Outcome::UnresolvedCti);
    let failed: Vec<&SizeResult> =
        r.report.final_check.iter().filter(|s| s.status == SizeStatus::Failed).collect();
    assert!(!failed.is_empty());
    assert!(failed[0].rule.as_deref().unwrap().starts_with("mark("), "{:?}", failed[0]);
    let text = emit_report(&r.report, ReportFormat::Text);
    assert!(text.contains("failed: rule mark("), "{text}");
}

#[test]
fn time_limit_is_a_resource_outcome() {
    let cfg = PipelineConfig { time_limit: Some(std::time::Duration::ZERO), ..PipelineConfig::default() };
    let r = run_pipeline("two_phase_commit", spec("two_phase_commit"), &cfg);
    assert_eq!(r.report.outcome, Outcome::ResourceLimit);
    assert_eq!(r.report.outcome.exit_code(), 2);
    assert!(r.report.message.is_some());
}

#[test]
fn verified_invariants_hold_on_reachable_states() {
    for e in CORPUS.iter().filter(|e| e.safe) {
        let s = spec(e.name);
        let r = run(e.name);
        assert_eq!(r.report.outcome, Outcome::Verified, "{}", e.name);
        for bump in 0..=1 {
            let sizes = Concretization(r.reference.0.iter().map(|n| n + bump).collect());
            let p = concretize_relaxed(&s, &sizes).unwrap();
            let reach = reachable_states(&p, DEFAULT_STATE_LIMIT).unwrap();
            for inv in &r.merged {
                let g = inv.expand(&s, &sizes);
                for st in reach.iter() {
                    assert!(eval_formula(&p, &g, st), "{}: {} at {}", e.name, inv.render(&s), sizes.render(&s));
                }
            }
        }
    }
}
