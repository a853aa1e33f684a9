use std::fmt;

use hlab_core::LabError;

/// Process exit code for a configuration problem.
pub const EXIT_CONFIG: u8 = 2;
/// Process exit code for a solver or output failure.
pub const EXIT_SOLVER: u8 = 3;

/// Why a run stopped, tagged with the module that reported it.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub module: &'static str,
    pub message: String,
}

impl Failure {
    pub fn config(module: &'static str, message: impl Into<String>) -> Self {
        Failure { code: EXIT_CONFIG, module, message: message.into() }
    }

    pub fn solver(module: &'static str, message: impl Into<String>) -> Self {
        Failure { code: EXIT_SOLVER, module, message: message.into() }
    }

    pub fn from_lab(module: &'static str, e: LabError) -> Self {
        let code = if e.is_config() { EXIT_CONFIG } else { EXIT_SOLVER };
        Failure { code, module, message: e.to_string() }
    }

    pub fn io(e: impl fmt::Display) -> Self {
        Failure::solver("lab", format!("cannot write artifacts: {e}"))
    }

    pub fn context(mut self, ctx: &str) -> Self {
        self.message = format!("{} ({ctx})", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = if self.code == EXIT_CONFIG { "configuration error" } else { "solver error" };
        write!(f, "{kind} in {}: {}", self.module, self.message)
    }
}

impl std::error::Error for Failure {}
