use serde::Serialize;

/// One numerically evaluated inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    /// `"<"`, `"<="`, `">"` or `">="`, read as `measured <relation> bound`.
    pub relation: &'static str,
    pub pass: bool,
}

impl BoundCheck {
    pub fn lt(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, bound, "<", measured < bound)
    }

    pub fn le(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, bound, "<=", measured <= bound)
    }

    pub fn gt(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, bound, ">", measured > bound)
    }

    pub fn ge(name: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self::new(name, measured, bound, ">=", measured >= bound)
    }

    fn new(name: impl Into<String>, measured: f64, bound: f64, relation: &'static str, pass: bool) -> Self {
        BoundCheck { name: name.into(), measured, bound, relation, pass }
    }
}

pub fn all_pass(checks: &[BoundCheck]) -> bool {
    checks.iter().all(|c| c.pass)
}

pub fn first_failure(checks: &[BoundCheck]) -> Option<&BoundCheck> {
    checks.iter().find(|c| !c.pass)
}
