//! End-to-end inference: CTI discovery at the reference instance,
//! generalization, promotion, merging and the final multi-size check.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::checker::{check_inductive, CheckError, Checker, DEFAULT_STATE_LIMIT};
use crate::cti::{
    block_assertion, build_ind_obligation, candidate_invariant, solve_obligation, BlockedAssertionStore, EquationSet,
};
use crate::formula::{ConcreteInvariant, GroundFormula};
use crate::generalize::{generalize, GeneralizeContext, GeneralizePath, Strategy};
use crate::merge::{merge_invariants, MergeError, MergeOptions, MergeStats};
use crate::param::{promote, GroupDecision, ParamError, ParamInvariant, ParamInvariantView};
use crate::protocol::{joint_min_concretization, rule_representatives, Concretization, ProtocolSpec};
use crate::symmetry::{get_symmetry_invs, provisional_quant_info};

pub const REPORT_SCHEMA: &str = "paraverify-report/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub strategy: Strategy,
    pub heuristic: bool,
    pub symmetry: bool,
    /// Uniform sizes for the final check; `None` means reference, +1, +2.
    pub final_sizes: Option<Vec<u8>>,
    /// Largest size for bounded implication; `None` means reference + 2.
    pub impl_bound: Option<u8>,
    pub state_limit: usize,
    /// Node budget of a single obligation solve.
    pub search_limit: u64,
    /// Abort once this many concrete invariants have been learned.
    pub max_invariants: usize,
    pub time_limit: Option<Duration>,
    pub strengthen: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            strategy: Strategy::Decreasing,
            heuristic: true,
            symmetry: true,
            final_sizes: None,
            impl_bound: None,
            state_limit: DEFAULT_STATE_LIMIT,
            search_limit: 50_000_000,
            max_invariants: 5_000,
            time_limit: None,
            strengthen: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Verified,
    UnresolvedCti,
    ResourceLimit,
    Unsafe,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Verified => 0,
            Outcome::UnresolvedCti | Outcome::Unsafe => 1,
            Outcome::ResourceLimit => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Verified => "verified",
            Outcome::UnresolvedCti => "unresolved-cti",
            Outcome::ResourceLimit => "resource-limit",
            Outcome::Unsafe => "unsafe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Counts {
    pub parameterized_invariants: usize,
    pub concrete_invariants: usize,
    pub checker_calls: u64,
    pub checker_cache_hits: u64,
    /// Checker calls made while generalizing.
    pub generalize_calls: u64,
    pub solver_calls: u64,
    pub ctis_found: u64,
    /// Obligations discarded because the rule leaves the invariant untouched.
    pub ctis_trivial: u64,
    pub blocked_assertions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub invariant: String,
    pub rule: String,
    pub target: String,
    pub solution: Vec<String>,
    pub path: GeneralizePath,
    pub checker_calls: usize,
    pub promoted: String,
    pub groups: Vec<GroupDecision>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeStatus {
    Passed,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeResult {
    pub sizes: String,
    pub status: SizeStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unresolved {
    pub rule: String,
    pub invariant: String,
    pub solution: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub property: String,
    pub sizes: String,
    pub state: String,
}

/// Wall-clock milliseconds per phase. Excluded from determinism checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timings {
    pub model_check_ms: f64,
    pub cti_ms: f64,
    pub generalize_ms: f64,
    pub promote_ms: f64,
    pub merge_ms: f64,
    pub final_check_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigView {
    pub strategy: Strategy,
    pub heuristic: bool,
    pub symmetry: bool,
    pub strengthen: bool,
    pub impl_bound: u8,
    pub state_limit: usize,
    /// Safety properties are analysed together against one blocking store.
    pub properties_jointly: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema: String,
    pub protocol: String,
    pub outcome: Outcome,
    pub config: ConfigView,
    pub reference_sizes: String,
    pub invariants: Vec<ParamInvariantView>,
    pub counts: Counts,
    pub provenance: Vec<Provenance>,
    pub merge: MergeStats,
    /// Implication between quantified invariants is checked up to this size only.
    pub implication: String,
    pub final_check: Vec<SizeResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unresolved: Option<Unresolved>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub violation: Option<Violation>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
    pub timings: Timings,
}

impl VerificationReport {
    /// The report with all timing fields zeroed.
    pub fn without_timings(&self) -> VerificationReport {
        VerificationReport { timings: Timings::default(), ..self.clone() }
    }
}

/// Everything a run produced, including the structured invariants.
pub struct PipelineRun {
    pub report: VerificationReport,
    pub reference: Concretization,
    pub concrete: Vec<ConcreteInvariant>,
    pub promoted: Vec<ParamInvariant>,
    pub pre_merge: Vec<ParamInvariant>,
    pub merged: Vec<ParamInvariant>,
    pub checker: Arc<Checker>,
    /// Every obligation handed to the solver, in order.
    pub obligations: Vec<ObligationRecord>,
    /// The blocking store when discovery ended.
    pub store: BlockedAssertionStore,
    /// Inputs of every generalization, for replay.
    pub generalizations: Vec<GeneralizeInput>,
}

#[derive(Debug, Clone)]
pub struct GeneralizeInput {
    pub solution: EquationSet,
    pub context: GeneralizeContext,
}

/// One solver query made during discovery.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObligationRecord {
    /// Index into the reference instance's ground rules.
    pub rule: usize,
    pub invariant: ConcreteInvariant,
    /// Length of the store prefix in force for this query.
    pub blocked: usize,
}

#[derive(Debug, thiserror::Error)]
enum Abort {
    #[error("{0}")]
    Resource(String),
    #[error("{0}")]
    Input(String),
}

impl From<CheckError> for Abort {
    fn from(e: CheckError) -> Self {
        if e.is_resource() {
            Abort::Resource(e.to_string())
        } else {
            Abort::Input(e.to_string())
        }
    }
}

impl From<ParamError> for Abort {
    fn from(e: ParamError) -> Self {
        match e {
            ParamError::Check(c) => c.into(),
            other => Abort::Input(other.to_string()),
        }
    }
}

impl From<MergeError> for Abort {
    fn from(e: MergeError) -> Self {
        if e.is_resource() {
            Abort::Resource(e.to_string())
        } else {
            Abort::Input(e.to_string())
        }
    }
}

fn ms(d: Duration) -> f64 {
    (d.as_secs_f64() * 1e6).round() / 1e3
}

struct Target {
    inv: ConcreteInvariant,
    label: String,
}

/// Runs the whole pipeline on `spec` (named `name` in the report).
pub fn run_pipeline(name: &str, spec: Arc<ProtocolSpec>, cfg: &PipelineConfig) -> PipelineRun {
    let started = Instant::now();
    let reference = joint_min_concretization(&spec);
    let bound = cfg.impl_bound.unwrap_or_else(|| reference.0.iter().copied().max().unwrap_or(1) + 2);
    let checker = Arc::new(Checker::new(spec.clone(), cfg.state_limit));
    let mut st = State {
        spec: spec.clone(),
        cfg: cfg.clone(),
        reference: reference.clone(),
        checker: checker.clone(),
        started,
        counts: Counts::default(),
        timings: Timings::default(),
        provenance: Vec::new(),
        concrete: Vec::new(),
        promoted: Vec::new(),
        pre_merge: Vec::new(),
        merged: Vec::new(),
        obligations: Vec::new(),
        store: BlockedAssertionStore::new(),
        generalizations: Vec::new(),
        merge: MergeStats::default(),
        final_check: Vec::new(),
        unresolved: None,
        violation: None,
    };
    let result = st.run(bound);
    let (outcome, message) = match result {
        Ok(o) => (o, None),
        Err(Abort::Resource(m)) => (Outcome::ResourceLimit, Some(m)),
        Err(Abort::Input(m)) => (Outcome::UnresolvedCti, Some(m)),
    };
    st.timings.total_ms = ms(started.elapsed());
    let (calls, hits) = checker.query_counts();
    st.counts.checker_calls = calls;
    st.counts.checker_cache_hits = hits;
    st.counts.concrete_invariants = st.concrete.len();
    st.counts.parameterized_invariants = st.merged.len();
    info!(protocol = name, outcome = outcome.as_str(), "pipeline finished");
    let report = VerificationReport {
        schema: REPORT_SCHEMA.into(),
        protocol: name.into(),
        outcome,
        config: ConfigView {
            strategy: cfg.strategy,
            heuristic: cfg.heuristic,
            symmetry: cfg.symmetry,
            strengthen: cfg.strengthen,
            impl_bound: bound,
            state_limit: cfg.state_limit,
            properties_jointly: true,
        },
        reference_sizes: reference.render(&spec),
        invariants: st.merged.iter().map(|i| i.view(&spec)).collect(),
        counts: st.counts.clone(),
        provenance: st.provenance.clone(),
        merge: st.merge.clone(),
        implication: format!("bounded, sizes <= {bound}"),
        final_check: st.final_check.clone(),
        unresolved: st.unresolved.clone(),
        violation: st.violation.clone(),
        message,
        timings: st.timings.clone(),
    };
    PipelineRun {
        report,
        reference,
        concrete: st.concrete,
        promoted: st.promoted,
        pre_merge: st.pre_merge,
        merged: st.merged,
        obligations: st.obligations,
        store: st.store,
        generalizations: st.generalizations,
        checker,
    }
}

struct State {
    spec: Arc<ProtocolSpec>,
    cfg: PipelineConfig,
    reference: Concretization,
    checker: Arc<Checker>,
    started: Instant,
    counts: Counts,
    timings: Timings,
    provenance: Vec<Provenance>,
    concrete: Vec<ConcreteInvariant>,
    promoted: Vec<ParamInvariant>,
    pre_merge: Vec<ParamInvariant>,
    merged: Vec<ParamInvariant>,
    obligations: Vec<ObligationRecord>,
    store: BlockedAssertionStore,
    generalizations: Vec<GeneralizeInput>,
    merge: MergeStats,
    final_check: Vec<SizeResult>,
    unresolved: Option<Unresolved>,
    violation: Option<Violation>,
}

impl State {
    fn check_time(&self) -> Result<(), Abort> {
        match self.cfg.time_limit {
            Some(t) if self.started.elapsed() > t => Err(Abort::Resource(format!("time limit of {t:?} exceeded"))),
            _ => Ok(()),
        }
    }

    fn run(&mut self, bound: u8) -> Result<Outcome, Abort> {
        let spec = self.spec.clone();
        let t0 = Instant::now();
        let p = self.checker.protocol(&self.reference)?;
        for gp in &p.properties {
            let r = self.checker.check(&self.reference, &gp.inv)?;
            if !r.holds() {
                let state = r.witness.as_ref().map(|w| p.render_state(w)).unwrap_or_default();
                self.violation = Some(Violation {
                    property: gp.label(),
                    sizes: self.reference.render(&spec),
                    state,
                });
                self.timings.model_check_ms = ms(t0.elapsed());
                return Ok(Outcome::Unsafe);
            }
        }
        self.timings.model_check_ms = ms(t0.elapsed());

        if !self.discover(&p)? {
            return Ok(Outcome::UnresolvedCti);
        }

        let t0 = Instant::now();
        let mut provenance_promoted = Vec::new();
        for inv in self.concrete.clone() {
            self.check_time()?;
            let pr = promote(&spec, &inv, &self.reference, &self.checker)?;
            provenance_promoted.push((pr.invariant.render(&spec), pr.groups.clone()));
            self.promoted.push(pr.invariant);
        }
        for (prov, (text, groups)) in self.provenance.iter_mut().zip(provenance_promoted) {
            prov.promoted = text;
            prov.groups = groups;
        }
        self.timings.promote_ms = ms(t0.elapsed());

        let t0 = Instant::now();
        self.pre_merge = spec.properties.iter().map(|pr| ParamInvariant::from_property(&spec, pr)).collect();
        self.pre_merge.extend(self.promoted.iter().cloned());
        let opts = MergeOptions { bound, strengthen: self.cfg.strengthen };
        let (merged, mstats) =
            merge_invariants(&spec, &self.pre_merge, opts, std::slice::from_ref(&self.reference), &self.checker)?;
        self.merged = merged;
        self.merge = mstats;
        self.timings.merge_ms = ms(t0.elapsed());

        let t0 = Instant::now();
        let sizes = match &self.cfg.final_sizes {
            Some(list) => list.iter().map(|n| Concretization::uniform(&spec, *n)).collect(),
            None => (0..3).map(|d| self.reference.grown(d)).collect::<Vec<_>>(),
        };
        let results = final_inductive_check(&spec, &self.merged, &sizes, &self.checker)?;
        self.timings.final_check_ms = ms(t0.elapsed());
        let failed = results.iter().any(|r| r.status == SizeStatus::Failed);
        let any_passed = results.iter().any(|r| r.status == SizeStatus::Passed);
        self.final_check = results;
        Ok(if !failed && any_passed { Outcome::Verified } else { Outcome::UnresolvedCti })
    }

    /// The CTI worklist. Returns false when some CTI could not be generalized.
    fn discover(&mut self, p: &crate::protocol::ConcreteProtocol) -> Result<bool, Abort> {
        let spec = self.spec.clone();
        let mut store = BlockedAssertionStore::new();
        let mut known = Vec::new();
        for gp in &p.properties {
            store.insert(&gp.inv);
            known.push(gp.inv.canonical());
        }
        let mut ctx = GeneralizeContext::new(known, self.cfg.strategy, self.cfg.heuristic, self.reference.clone());
        let mut queue: VecDeque<Target> = spec
            .properties
            .iter()
            .enumerate()
            .filter_map(|(i, _)| p.properties.iter().find(|gp| gp.property == i))
            .map(|gp| Target { inv: gp.inv.canonical(), label: gp.label() })
            .collect();
        let mut cti_time = Duration::ZERO;
        let mut gen_time = Duration::ZERO;
        while let Some(target) = queue.pop_front() {
            let fixed = target.inv.param_values(&spec);
            for (ri, rule) in spec.rules.iter().enumerate() {
                for args in rule_representatives(rule, &self.reference, &fixed) {
                    let Some(gi) = p.rules.iter().position(|g| g.rule == ri && g.args == args) else {
                        continue;
                    };
                    loop {
                        self.check_time()?;
                        let t0 = Instant::now();
                        let ob = build_ind_obligation(p, gi, &target.inv).map_err(|e| Abort::Input(e.to_string()))?;
                        let Some(ob) = ob else {
                            self.counts.ctis_trivial += 1;
                            cti_time += t0.elapsed();
                            break;
                        };
                        self.counts.solver_calls += 1;
                        self.obligations.push(ObligationRecord {
                            rule: gi,
                            invariant: target.inv.clone(),
                            blocked: store.len(),
                        });
                        let sol = solve_obligation(p, &ob, &store, self.cfg.search_limit)
                            .map_err(|e| Abort::Resource(e.to_string()))?;
                        cti_time += t0.elapsed();
                        let Some(sol) = sol else { break };
                        self.counts.ctis_found += 1;
                        self.generalizations.push(GeneralizeInput { solution: sol.clone(), context: ctx.clone() });
                        let t0 = Instant::now();
                        let cand = candidate_invariant(&sol).map_err(|e| Abort::Input(e.to_string()))?;
                        let outcome = generalize(&sol, &ctx, &self.checker)?;
                        gen_time += t0.elapsed();
                        self.counts.generalize_calls += outcome.calls as u64;
                        let Some(inv) = outcome.invariant else {
                            self.unresolved = Some(Unresolved {
                                rule: p.rules[gi].label(),
                                invariant: target.label.clone(),
                                solution: sol.render(&spec),
                            });
                            self.store = store;
                            self.timings.cti_ms = ms(cti_time);
                            self.timings.generalize_ms = ms(gen_time);
                            debug!(candidate = %cand.render(&spec), "no invariant found");
                            return Ok(false);
                        };
                        debug!(invariant = %inv.render(&spec), rule = %p.rules[gi].label(), "learned");
                        let images = if self.cfg.symmetry {
                            let q = provisional_quant_info(&spec, &inv, &self.reference);
                            get_symmetry_invs(&spec, &inv, &q, &self.reference)
                                .map_err(|e| Abort::Input(e.to_string()))?
                        } else {
                            vec![]
                        };
                        block_assertion(&inv, &images, &mut store);
                        ctx.add_known(inv.clone());
                        self.provenance.push(Provenance {
                            invariant: inv.render(&spec),
                            rule: p.rules[gi].label(),
                            target: target.label.clone(),
                            solution: sol.render(&spec),
                            path: outcome.path,
                            checker_calls: outcome.calls,
                            promoted: String::new(),
                            groups: vec![],
                        });
                        self.concrete.push(inv.clone());
                        if self.concrete.len() > self.cfg.max_invariants {
                            return Err(Abort::Resource(format!(
                                "more than {} concrete invariants",
                                self.cfg.max_invariants
                            )));
                        }
                        queue.push_back(Target { label: inv.render(&spec), inv });
                    }
                }
            }
        }
        self.counts.blocked_assertions = store.len();
        self.store = store;
        self.timings.cti_ms = ms(cti_time);
        self.timings.generalize_ms = ms(gen_time);
        Ok(true)
    }
}

/// Checks the conjunction of `invs` for inductiveness at every size vector.
/// Sizes too small to give every binder its own value are skipped.
pub fn final_inductive_check(
    spec: &ProtocolSpec,
    invs: &[ParamInvariant],
    sizes: &[Concretization],
    checker: &Checker,
) -> Result<Vec<SizeResult>, CheckError> {
    let mut need = vec![1u8; spec.param_types.len()];
    for inv in invs {
        for (t, m) in inv.min_sizes(spec).into_iter().enumerate() {
            need[t] = need[t].max(m);
        }
    }
    let mut out = Vec::new();
    for s in sizes {
        let label = s.render(spec);
        if s.0.iter().zip(&need).any(|(have, need)| have < need) {
            out.push(SizeResult {
                sizes: label,
                status: SizeStatus::Skipped,
                rule: None,
                witness: None,
                note: Some("below the binder minimum".into()),
            });
            continue;
        }
        let p = checker.protocol(s)?;
        let formulas: Vec<GroundFormula> = invs.iter().map(|i| i.expand(spec, s)).collect();
        let r = check_inductive(&p, &formulas, checker.state_limit())?;
        out.push(if r.holds() {
            SizeResult { sizes: label, status: SizeStatus::Passed, rule: None, witness: None, note: None }
        } else {
            SizeResult {
                sizes: label,
                status: SizeStatus::Failed,
                rule: r.rule.clone(),
                witness: r.witness.as_ref().map(|w| p.render_state(w)),
                note: None,
            }
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Text,
}

pub fn emit_report(r: &VerificationReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(r).expect("report is serializable");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(r),
    }
}

fn render_text(r: &VerificationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("protocol: {}\n", r.protocol));
    out.push_str(&format!("outcome: {}\n", r.outcome.as_str()));
    out.push_str(&format!("reference sizes: {}\n", r.reference_sizes));
    if let Some(v) = &r.violation {
        out.push_str(&format!("violation of {} at {}: {}\n", v.property, v.sizes, v.state));
    }
    if let Some(u) = &r.unresolved {
        out.push_str(&format!("unresolved CTI: rule {} against {}\n", u.rule, u.invariant));
        out.push_str(&format!("  solution: {}\n", u.solution.join(", ")));
    }
    if let Some(m) = &r.message {
        out.push_str(&format!("note: {m}\n"));
    }
    if r.violation.is_none() {
        out.push_str(&format!("{} parameterized invariants\n", r.counts.parameterized_invariants));
        for inv in &r.invariants {
            out.push_str(&format!("  {}\n", inv.text));
        }
    }
    let c = &r.counts;
    out.push_str(&format!(
        "concrete invariants: {}, CTIs: {} ({} trivial obligations skipped), solver calls: {}\n",
        c.concrete_invariants, c.ctis_found, c.ctis_trivial, c.solver_calls
    ));
    out.push_str(&format!(
        "checker calls: {} ({} cache hits, {} while generalizing)\n",
        c.checker_calls, c.checker_cache_hits, c.generalize_calls
    ));
    for s in &r.final_check {
        let status = match s.status {
            SizeStatus::Passed => "passed".to_string(),
            SizeStatus::Skipped => format!("skipped ({})", s.note.clone().unwrap_or_default()),
            SizeStatus::Failed => format!(
                "failed: rule {} from {}",
                s.rule.clone().unwrap_or_else(|| "init".into()),
                s.witness.clone().unwrap_or_default()
            ),
        };
        out.push_str(&format!("final check {}: {}\n", s.sizes, status));
    }
    out.push_str(&format!("time: {:.1} ms\n", r.timings.total_ms));
    out
}
