//! Command implementations behind the `rigidity-lab` binary.

pub mod commands;
pub mod report;

pub use report::ReportDocument;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const PARSE: i32 = 1;
    pub const INVALID: i32 = 2;
    pub const NOT_CONFIGURATION: i32 = 3;
    pub const FAILURE: i32 = 4;
    /// A numerical check (derivative oracle, growth bound) did not pass.
    pub const CHECK_FAILED: i32 = 5;
    pub const UNRESOLVABLE: i32 = 6;
    pub const UNDECIDED: i32 = 10;
    pub const USAGE: i32 = 64;
}

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "RIGIDITY_LAB_THREADS";
