//! Emits line-level traces in the snooping tracer's raw log format for the
//! bank's reference executions.
//!
//! Line numbers come from the actual solution source, located by statement
//! text, so traces of renamed or re-commented variants stay faithful.

use crate::pysrc;
use crate::pyvalue::PyValue;

/// Clock origin for synthetic timestamps, in microseconds since midnight.
const CLOCK_ORIGIN_US: u64 = 12 * 3_600_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceFault(pub String);

pub struct Recorder {
    names: Vec<(String, String)>,
    raw: Vec<String>,
    keys: Vec<String>,
    clock_us: u64,
    out: String,
    vars: Vec<(String, String)>,
    events: u64,
}

fn hms(us: u64) -> String {
    let secs = us / 1_000_000;
    format!(
        "{:02}:{:02}:{:02}.{:06}",
        (secs / 3600) % 24,
        (secs / 60) % 60,
        secs % 60,
        us % 1_000_000
    )
}

impl Recorder {
    /// `names` maps `@key@` placeholders in statement templates to the
    /// variant's identifiers.
    pub fn new(source: &str, path: &str, names: &[(&str, &str)]) -> Self {
        let raw: Vec<String> = source.lines().map(|l| l.trim_end().to_string()).collect();
        let keys = raw
            .iter()
            .map(|l| pysrc::strip_comment(l).trim().to_string())
            .collect();
        let mut rec = Recorder {
            names: names
                .iter()
                .map(|(k, v)| (format!("@{k}@"), v.to_string()))
                .collect(),
            raw,
            keys,
            clock_us: CLOCK_ORIGIN_US,
            out: String::new(),
            vars: Vec::new(),
            events: 0,
        };
        rec.out.push_str(&format!("Source path:... {path}\n"));
        rec
    }

    pub fn subst(&self, template: &str) -> String {
        let mut s = template.to_string();
        for (k, v) in &self.names {
            s = s.replace(k.as_str(), v);
        }
        s
    }

    fn tick(&mut self) -> String {
        self.events += 1;
        self.clock_us += 40 + (self.events * 37) % 113;
        hms(self.clock_us)
    }

    fn find(&self, stmt: &str) -> Result<usize, TraceFault> {
        let want = self.subst(stmt);
        self.keys
            .iter()
            .position(|k| *k == want)
            .ok_or_else(|| TraceFault(format!("statement not found in source: {want}")))
    }

    fn event(&mut self, kind: &str, idx: usize) {
        let ts = self.tick();
        let line = format!("{ts} {kind:<9} {:>4} {}\n", idx + 1, self.raw[idx]);
        self.out.push_str(&line);
    }

    pub fn starting(&mut self, name: &str, value: &PyValue) {
        let name = self.subst(name);
        let repr = value.repr();
        self.out.push_str(&format!("Starting var:.. {name} = {repr}\n"));
        self.vars.push((name, repr));
    }

    /// Emits the `call` event on the `def` line of `fn_name`.
    pub fn call(&mut self, fn_name: &str) -> Result<(), TraceFault> {
        let prefix = format!("def {fn_name}(");
        let idx = self
            .keys
            .iter()
            .position(|k| k.starts_with(&prefix))
            .ok_or_else(|| TraceFault(format!("no definition of {fn_name}")))?;
        self.event("call", idx);
        Ok(())
    }

    pub fn line(&mut self, stmt: &str) -> Result<(), TraceFault> {
        let idx = self.find(stmt)?;
        self.event("line", idx);
        Ok(())
    }

    /// Records a binding; prints nothing when the value is unchanged.
    pub fn set(&mut self, name: &str, value: &PyValue) {
        let name = self.subst(name);
        let repr = value.repr();
        match self.vars.iter_mut().find(|(n, _)| *n == name) {
            Some((_, old)) if *old == repr => {}
            Some((_, old)) => {
                *old = repr.clone();
                self.out.push_str(&format!("Modified var:.. {name} = {repr}\n"));
            }
            None => {
                self.out.push_str(&format!("New var:....... {name} = {repr}\n"));
                self.vars.push((name, repr));
            }
        }
    }

    /// Emits the line and return events of `stmt` and the return value.
    pub fn ret(&mut self, stmt: &str, value: &PyValue) -> Result<(), TraceFault> {
        let idx = self.find(stmt)?;
        self.event("line", idx);
        self.event("return", idx);
        self.out
            .push_str(&format!("Return value:.. {}\n", value.repr()));
        Ok(())
    }

    /// Return events on the last `return` statement, for coarse traces that
    /// skip the body.
    pub fn ret_last(&mut self, value: &PyValue) -> Result<(), TraceFault> {
        let idx = self
            .keys
            .iter()
            .rposition(|k| k.starts_with("return"))
            .ok_or_else(|| TraceFault("no return statement".into()))?;
        self.event("return", idx);
        self.out
            .push_str(&format!("Return value:.. {}\n", value.repr()));
        Ok(())
    }

    pub fn finish(mut self) -> String {
        let elapsed = self.clock_us - CLOCK_ORIGIN_US + 61;
        self.out.push_str(&format!(
            "Elapsed time: 00:00:{:02}.{:06}\n",
            elapsed / 1_000_000,
            elapsed % 1_000_000
        ));
        self.out
    }
}
