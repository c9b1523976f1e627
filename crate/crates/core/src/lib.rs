//! Desk-scale workbench for finite presites: finite categories,
//! pretopologies and their operators, sheaves on finite sites, gluing data,
//! axiom suites, inference-rule closures and charts-and-atlases completions.

pub mod atlas;
pub mod axioms;
pub mod closure;
pub mod fincat;
pub mod fixtures;
pub mod glue;
pub mod sheafkit;
pub mod site;

use thiserror::Error;

/// Errors raised while reading workspace files.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkspaceError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("unresolved name `{0}`")]
    UnresolvedName(String),
}
