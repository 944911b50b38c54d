//! Machine-readable well-posedness report (TOML, `schema = 1`).

use serde::{Deserialize, Serialize};

use evopiezo_core::wellposedness::{ConditionResult, Status, Verdict, WellposednessReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionRow {
    pub name: String,
    pub status: String,
    pub witness: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
}

/// Serialized form of a [`WellposednessReport`] plus the oracle comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: u32,
    /// `full` or `quasistatic`.
    pub mode: String,
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu_star: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_verdict: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_min_eig: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_agree: Option<bool>,
    /// Why the oracle was not run, if it was not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_note: Option<String>,
    #[serde(default)]
    pub condition: Vec<ConditionRow>,
}

impl Report {
    pub fn from_wellposedness(mode: &str, r: &WellposednessReport) -> Self {
        Self {
            schema: SCHEMA_VERSION,
            mode: mode.to_string(),
            verdict: r.verdict.as_str().to_string(),
            nu_star: r.nu_star,
            c0: r.c0,
            oracle_verdict: None,
            oracle_min_eig: r.oracle_min_eig,
            oracle_agree: None,
            oracle_note: None,
            condition: r.conditions.iter().map(row).collect(),
        }
    }

    pub fn verdict(&self) -> Option<Verdict> {
        Verdict::parse(&self.verdict)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionRow> {
        self.condition.iter().find(|c| c.name == name)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report fields are always representable")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let r: Report = toml::from_str(text).map_err(|e| e.message().to_string())?;
        if r.schema != SCHEMA_VERSION {
            return Err(format!("unsupported report schema {}", r.schema));
        }
        if r.verdict().is_none() {
            return Err(format!("unknown verdict \"{}\"", r.verdict));
        }
        if let Some(c) = r
            .condition
            .iter()
            .find(|c| Status::parse(&c.status).is_none())
        {
            return Err(format!("unknown status \"{}\" for {}", c.status, c.name));
        }
        Ok(r)
    }
}

fn row(c: &ConditionResult) -> ConditionRow {
    ConditionRow {
        name: c.name.clone(),
        status: c.status.as_str().to_string(),
        witness: c.witness,
        cell: c.cell,
        nu: c.nu,
    }
}
