use std::fmt::Write as _;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Warn,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Warn => "warn",
        }
    }

    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub status: Status,
    pub measured: String,
    pub threshold: String,
    /// The estimate being checked, written as a formula.
    pub anchor: &'static str,
    pub runtime: Duration,
}

#[derive(Debug, Clone, Default)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub const HEADER: &'static str = "check\tstatus\tmeasured\tthreshold\tanchor";

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Machine-readable form; runtimes are left out so reruns compare equal.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for c in &self.checks {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                c.name,
                c.status.as_str(),
                clean(&c.measured),
                clean(&c.threshold),
                c.anchor
            )
            .expect("writing to a string");
        }
        out
    }

    pub fn summary(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            writeln!(
                out,
                "{:<width$}  {:<4}  {}  (threshold {}; {:.2}s)",
                c.name,
                c.status.as_str().to_uppercase(),
                c.measured,
                c.threshold,
                c.runtime.as_secs_f64()
            )
            .expect("writing to a string");
        }
        let failed = self.checks.iter().filter(|c| c.status == Status::Fail).count();
        writeln!(out, "{} checks, {failed} failed", self.checks.len()).expect("writing to a string");
        out
    }
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n'], " ")
}
