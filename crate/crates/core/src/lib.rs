//! Parameterized invariant inference for symmetric protocols.
//!
//! A protocol family is analysed at one small reference instance: CTIs are
//! found by a finite-domain solver, shrunk to minimal clause invariants,
//! lifted to quantified form and finally checked for inductiveness at
//! several sizes.

pub mod checker;
pub mod corpus;
pub mod cti;
pub mod formula;
pub mod generalize;
pub mod merge;
pub mod param;
pub mod pipeline;
pub mod protocol;
pub mod search;
pub mod symmetry;

pub use checker::{CheckError, CheckResult, Checker, Verdict};
pub use cti::{BlockedAssertionStore, EquationSet, IndObligation};
pub use formula::{ConcreteInvariant, GroundFormula, GroundVar, Literal};
pub use generalize::{GeneralizeContext, Strategy};
pub use param::{ParamInvariant, Quantifier};
pub use pipeline::{
    emit_report, run_pipeline, GeneralizeInput, ObligationRecord, Outcome, PipelineConfig, PipelineRun, ReportFormat,
    VerificationReport,
};
pub use protocol::{parse_protocol, Concretization, ConcreteProtocol, ProtocolSpec};
