//! Protocol language: syntax tree, parser, printer and concretization.

mod ast;
mod concretize;
mod instances;
mod parser;
mod printer;

pub use ast::*;
pub use concretize::{
    binder_assignments, concretize, concretize_relaxed, distinct_requirement, ground_property_body,
    ConcreteProtocol, ConcretizeError, Concretization, GLit, GVal, GroundProperty, GroundRule,
};
pub use instances::{
    enumerate_instance_pairs, fixed_property_instance, joint_min_concretization, min_concretization,
    overlap_signature, rule_representatives, SlotPattern,
};
pub use parser::{parse_protocol, ParseError, ParseErrorKind};
pub use printer::print_protocol;
