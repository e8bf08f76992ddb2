//! A small s-expression policy language. A program binds roles to graph
//! nodes once, builds an ordered list of steps, and on every call returns
//! the next unfinished step's instruction.

mod interp;
mod lexer;
mod parser;

pub mod corpus;

use serde::{Deserialize, Serialize};

use crate::graph::NodeId;

pub use interp::{evaluate_policy, eval_predicate, eval_query, Env};
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_program;

/// 1-based line and column (in characters).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DslError {
    #[error("{pos}: expected {}, found {found}", expected.join(" or "))]
    Parse { pos: Pos, expected: Vec<String>, found: String },
    #[error("{pos}: `{form}` takes {expected}, got {found}")]
    Arity { pos: Pos, form: String, expected: String, found: usize },
    #[error("{pos}: unknown form `{form}`")]
    UnknownForm { pos: Pos, form: String },
    #[error("variable `{0}` is unbound")]
    UnboundVariable(String),
    #[error("query for `{0}` matched several nodes; wrap it in (first ...)")]
    AmbiguousBinding(String),
    #[error("`{var}` is bound to node {node}, which is no longer in the graph")]
    StaleNode { var: String, node: NodeId },
    #[error("task memory record `{0}` is malformed")]
    CorruptMemory(String),
}

impl DslError {
    /// Source position for static errors.
    pub fn pos(&self) -> Option<Pos> {
        match self {
            DslError::Parse { pos, .. } | DslError::Arity { pos, .. } | DslError::UnknownForm { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Filter {
    Class(String),
    Attr(String, String),
    In(String),
    On(String),
    Near(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    Objects(Vec<Filter>),
    First(Box<Query>),
    ContainerOf(String),
    EmptyContainers(String),
    Other(Box<Query>, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pred {
    In(String, String),
    On(String, String),
    Near(String, String),
    Holding(String),
    HandEmpty,
    Done(String),
    And(Vec<Pred>),
    Or(Vec<Pred>),
    Not(Box<Pred>),
    True,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub guard: Pred,
    pub template: String,
    pub focus: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub id: String,
    pub goal: Pred,
    pub actions: Vec<Action>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Builder {
    Step(Step),
    If { cond: Pred, then: Vec<Builder>, otherwise: Vec<Builder> },
    ForEach { var: String, query: Query, steps: Vec<Step> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub var: String,
    pub query: Query,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannerProgram {
    pub name: String,
    pub bindings: Vec<Binding>,
    pub plan: Vec<Builder>,
}

impl PlannerProgram {
    /// Every step definition in source order, across all branches.
    pub fn steps(&self) -> Vec<&Step> {
        fn walk<'a>(items: &'a [Builder], out: &mut Vec<&'a Step>) {
            for b in items {
                match b {
                    Builder::Step(s) => out.push(s),
                    Builder::If { then, otherwise, .. } => {
                        walk(then, out);
                        walk(otherwise, out);
                    }
                    Builder::ForEach { steps, .. } => out.extend(steps),
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.plan, &mut out);
        out
    }

    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps().into_iter().find(|s| s.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PlannerOutput {
    pub subtask_instruction: String,
    pub relevant_objects: std::collections::BTreeSet<NodeId>,
    pub done: bool,
    pub emitted_step: Option<String>,
}

impl PlannerOutput {
    pub fn finished() -> Self {
        Self { done: true, ..Self::default() }
    }
}
