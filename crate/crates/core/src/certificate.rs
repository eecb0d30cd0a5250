//! Pass/fail records shared by every checker.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The property does not apply to this input (e.g. curvature of segment sections).
    NotApplicable,
}

/// Outcome of one numerical certificate: the verdict, the measured margin
/// (positive means "inside the passing region" unless `detail` says otherwise)
/// and, on failure, a witness point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub status: Status,
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Certificate {
    pub fn new(name: impl Into<String>, passed: bool, margin: f64) -> Self {
        Self {
            name: name.into(),
            status: if passed { Status::Pass } else { Status::Fail },
            margin,
            witness: None,
            detail: String::new(),
        }
    }

    pub fn not_applicable(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: Status::NotApplicable,
            margin: 0.0,
            witness: None,
            detail: detail.into(),
        }
    }

    pub fn with_witness(mut self, w: Vec<f64>) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn failed(&self) -> bool {
        self.status == Status::Fail
    }
}
