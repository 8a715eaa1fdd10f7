//! Report documents, failure classes and the exit-code contract.

use std::fmt::Write as _;
use std::process::ExitCode;

use matchforge::axioms::AxiomError;
use matchforge::choice::ChoiceError;
use matchforge::engine::EngineError;
use matchforge::instance::InstanceError;
use matchforge::matroid::MatroidError;
use matchforge::GuardError;
use serde::Serialize;
use serde_json::Value;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_INSTANCE: u8 = 2;
pub const EXIT_GUARD: u8 = 3;
pub const EXIT_WITNESS: u8 = 4;
pub const EXIT_INCOMPATIBLE: u8 = 5;

#[derive(Copy, Clone, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Why a command could not produce a verdict.
#[derive(Debug)]
pub enum Failure {
    /// Unreadable or invalid input, including unknown names.
    Instance(String),
    Guard(String),
    /// A rule broke its contract, or a bug.
    Internal(String),
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Instance(_) => "instance",
            Failure::Guard(_) => "guard",
            Failure::Internal(_) => "internal",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Instance(m) | Failure::Guard(m) | Failure::Internal(m) => m,
        }
    }

    fn exit(&self) -> u8 {
        match self {
            Failure::Instance(_) => EXIT_INSTANCE,
            Failure::Guard(_) => EXIT_GUARD,
            Failure::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<GuardError> for Failure {
    fn from(e: GuardError) -> Self {
        match e {
            GuardError::Exceeded { .. } => Failure::Guard(e.to_string()),
            GuardError::BadOverride { .. } => Failure::Instance(e.to_string()),
        }
    }
}

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        Failure::Instance(e.to_string())
    }
}

impl From<MatroidError> for Failure {
    fn from(e: MatroidError) -> Self {
        match e {
            MatroidError::Guard(g) => g.into(),
            MatroidError::Domain { .. } => Failure::Internal(e.to_string()),
            _ => Failure::Instance(e.to_string()),
        }
    }
}

impl From<ChoiceError> for Failure {
    fn from(e: ChoiceError) -> Self {
        match e {
            ChoiceError::Guard(g) => g.into(),
            ChoiceError::Matroid(m) => m.into(),
            ChoiceError::GroundMismatch { .. } => Failure::Internal(e.to_string()),
            _ => Failure::Instance(e.to_string()),
        }
    }
}

impl From<AxiomError> for Failure {
    fn from(e: AxiomError) -> Self {
        match e {
            AxiomError::Guard(g) => g.into(),
            AxiomError::Matroid(m) => m.into(),
            _ => Failure::Instance(e.to_string()),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Guard(g) => g.into(),
            EngineError::Choice(c) => c.into(),
            EngineError::Axiom(a) => a.into(),
            EngineError::Matroid(m) => m.into(),
            _ => Failure::Internal(e.to_string()),
        }
    }
}

/// One pass/fail line.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    /// Registered name, e.g. `path-independence`.
    pub name: String,
    /// The property's name in prose.
    pub title: String,
    /// Institution or other sub-object the check ran on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scope: Option<String>,
    pub passed: bool,
    /// Set when a check has more outcomes than pass and fail.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Failing this check means the axioms admit nothing somewhere.
    #[serde(skip)]
    pub incompatible: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, title: impl Into<String>, passed: bool) -> Self {
        Check {
            name: name.into(),
            title: title.into(),
            scope: None,
            passed,
            outcome: None,
            witness: None,
            detail: None,
            incompatible: false,
        }
    }

    pub fn scope(mut self, scope: impl Into<String>) -> Self {
        self.scope = Some(scope.into());
        self
    }

    pub fn witness(mut self, w: impl Serialize) -> Self {
        self.witness = Some(serde_json::to_value(w).expect("witness serializes"));
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }

    pub fn outcome(mut self, o: impl Into<String>) -> Self {
        self.outcome = Some(o.into());
        self
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Witness,
    Incompatible,
    Error,
}

#[derive(Debug, Serialize)]
struct ErrorInfo {
    kind: &'static str,
    message: String,
}

/// The document every command except `gen` emits.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub command: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching: Option<Vec<usize>>,
    /// Contract names of `matching`, in the same order.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching_names: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<ErrorInfo>,
    /// Pre-rendered text for `--format text`, beyond the check lines.
    #[serde(skip)]
    pub text: String,
}

impl Report {
    pub fn new(command: impl Into<String>) -> Self {
        Report {
            command: command.into(),
            status: Status::Pass,
            checks: Vec::new(),
            matching: None,
            matching_names: None,
            trace: None,
            error: None,
            text: String::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn failed(command: impl Into<String>, failure: &Failure) -> Self {
        let mut r = Report::new(command);
        r.status = Status::Error;
        r.error = Some(ErrorInfo {
            kind: failure.kind(),
            message: failure.message().to_owned(),
        });
        r
    }

    fn settle(&mut self) -> u8 {
        if self.status == Status::Error {
            return self.error.as_ref().map_or(EXIT_INTERNAL, |e| match e.kind {
                "instance" => EXIT_INSTANCE,
                "guard" => EXIT_GUARD,
                _ => EXIT_INTERNAL,
            });
        }
        if self.checks.iter().any(|c| !c.passed && c.incompatible) {
            self.status = Status::Incompatible;
            EXIT_INCOMPATIBLE
        } else if self.checks.iter().any(|c| !c.passed) {
            self.status = Status::Witness;
            EXIT_WITNESS
        } else {
            self.status = Status::Pass;
            EXIT_OK
        }
    }

    fn render_text(&self) -> String {
        let mut out = self.text.clone();
        for c in &self.checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            let _ = write!(out, "{mark} {} ({})", c.name, c.title);
            if let Some(s) = &c.scope {
                let _ = write!(out, " at {s}");
            }
            if let Some(o) = &c.outcome {
                let _ = write!(out, ": {o}");
            }
            out.push('\n');
            if let Some(d) = &c.detail {
                let _ = writeln!(out, "    {d}");
            }
            if let Some(w) = &c.witness {
                if !c.passed {
                    let _ = writeln!(out, "    witness: {w}");
                }
            }
        }
        if let Some(e) = &self.error {
            let _ = writeln!(out, "error ({}): {}", e.kind, e.message);
        }
        out
    }

    /// Prints the report and returns the exit code.
    pub fn emit(mut self, format: Format) -> ExitCode {
        let code = self.settle();
        match format {
            Format::Json => println!("{}", serde_json::to_string_pretty(&self).expect("report serializes")),
            Format::Text => {
                let text = self.render_text();
                if self.status == Status::Error {
                    eprint!("{text}");
                } else {
                    print!("{text}");
                }
            }
        }
        ExitCode::from(code)
    }
}

/// Exit code for a failure outside any report.
pub fn exit_for(failure: &Failure) -> u8 {
    failure.exit()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settled(checks: Vec<Check>) -> (u8, Status) {
        let mut r = Report::new("test");
        r.checks = checks;
        let code = r.settle();
        (code, r.status)
    }

    #[test]
    fn exit_codes_follow_the_worst_check() {
        assert_eq!(settled(vec![]), (EXIT_OK, Status::Pass));
        assert_eq!(settled(vec![Check::new("a", "a", true)]), (EXIT_OK, Status::Pass));
        let fail = Check::new("b", "b", false);
        assert_eq!(settled(vec![Check::new("a", "a", true), fail.clone()]), (EXIT_WITNESS, Status::Witness));
        let mut incompatible = fail.clone();
        incompatible.incompatible = true;
        assert_eq!(settled(vec![fail, incompatible]), (EXIT_INCOMPATIBLE, Status::Incompatible));
    }

    #[test]
    fn failures_map_to_their_codes() {
        for (f, code) in [
            (Failure::Instance(String::new()), EXIT_INSTANCE),
            (Failure::Guard(String::new()), EXIT_GUARD),
            (Failure::Internal(String::new()), EXIT_INTERNAL),
        ] {
            let mut r = Report::failed("test", &f);
            assert_eq!(r.settle(), code);
            assert_eq!(exit_for(&f), code);
        }
    }
}
