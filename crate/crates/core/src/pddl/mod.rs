//! Planning-domain language: parsing, grounding and state transitions.
//!
//! Supported subset: `:strips`, `:typing`, `:equality`,
//! `:negative-preconditions` and integer fluents with `assign` / `increase` /
//! `decrease` effects and `=`, `<`, `<=`, `>`, `>=` comparisons.

mod domain;
mod error;
mod ground;
mod print;
mod problem;
pub mod sexpr;
mod state;

pub use domain::{
    parse_domain, AssignOp, CmpOp, Condition, DomainDef, Effect, NumExpr, ObjectId, OperatorSchema, Signature, Term,
    TypeDef, TypeId, TypedParam, OBJECT_TYPE,
};
pub use error::PddlError;
pub use ground::{ActionDisplay, Args, GroundAction, GroundEffects, RelaxedAction, RelaxedTable};
pub use problem::{parse_problem, GoalSpec, ProblemDef};
pub use state::{AtomId, FluentId, State};
