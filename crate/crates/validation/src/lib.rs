//! Runner for the workspace acceptance suite.
//!
//! Each criterion is a closure returning `Ok(detail)` or `Err(detail)`. A
//! panic counts as a failure and does not stop the remaining criteria. Every
//! criterion prints exactly one line:
//!
//! ```text
//! criterion  6 FAIL convergence: nlms +15.40 dB, rls -2.01 dB, lms +17.07 dB (3.2 s)
//! ```

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "criterion {:>2} {} {}: {} ({:.1} s)",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

#[derive(Debug, Default)]
pub struct Suite {
    verdicts: Vec<Verdict>,
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>()
        .cloned()
        .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn run(&mut self, id: u32, title: &'static str, f: impl FnOnce() -> Result<String, String>) -> &Verdict {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| Err(format!("panic: {}", panic_message(p))));
        let (passed, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        let v = Verdict {
            id,
            title,
            passed,
            detail,
            elapsed: start.elapsed(),
        };
        println!("{v}");
        self.verdicts.push(v);
        self.verdicts.last().expect("just pushed")
    }

    pub fn verdicts(&self) -> &[Verdict] {
        &self.verdicts
    }

    pub fn failed(&self) -> usize {
        self.verdicts.iter().filter(|v| !v.passed).count()
    }

    /// Prints the tally and returns the process exit status.
    pub fn finish(&self) -> i32 {
        let total = self.verdicts.len();
        println!("acceptance: {}/{} criteria passed", total - self.failed(), total);
        i32::from(self.failed() > 0)
    }
}

/// `Ok(detail)` when `cond` holds, `Err(detail)` otherwise.
pub fn verdict(cond: bool, detail: String) -> Result<String, String> {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}
