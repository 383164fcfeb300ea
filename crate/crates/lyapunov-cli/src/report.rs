//! Report structures and their JSON/CSV projections.

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    /// Effective configuration after flag overrides.
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl RunReport {
    pub fn new(command: &str, config: ExperimentConfig) -> Self {
        RunReport {
            command: command.to_string(),
            config,
            bounds: None,
            solve: None,
            verify: None,
            sweep: None,
            timings: None,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("report serialization: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    /// CSV projection; only defined for sweep reports.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let rows = self.sweep.as_ref().ok_or_else(|| {
            CliError::Config("csv format is only available for the sweep command".into())
        })?;
        let mut out = String::from(SweepRow::CSV_HEADER);
        out.push('\n');
        for row in rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize)]
pub struct BoundsReport {
    pub omega: f64,
    #[serde(rename = "Omega")]
    pub big_omega: f64,
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied: Option<bool>,
}

#[derive(Debug, Serialize)]
pub struct StartSummary {
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub starts: usize,
    pub converged_count: usize,
    pub distinct_count: usize,
    pub min_residual: f64,
    pub per_start: Vec<StartSummary>,
    /// `H`-fixed point of the best start, sampled at the quadrature nodes.
    pub solution: Vec<f64>,
    /// `𝓛`-fixed point `g = f/D` at the same nodes.
    pub l_solution: Vec<f64>,
    /// Normalization `D = (𝓛f)(0)`; also the eigenvalue pairing `f = D·g`.
    pub denominator: f64,
    pub l_residual: f64,
}

#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub field: String,
    pub compatibility_residual: f64,
    pub compatibility_tol: f64,
    pub compatibility_pass: bool,
    pub consistency_residual: f64,
    pub consistency_tol: f64,
    pub consistency_pass: bool,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub sweep_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(rename = "Omega", skip_serializing_if = "Option::is_none")]
    pub big_omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub satisfied: bool,
    pub distinct_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_residual: Option<f64>,
    /// Present only when the point failed; the sweep keeps going.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "sweep_value,omega,Omega,ratio,satisfied,distinct_count,min_residual";

    pub fn to_csv_line(&self) -> String {
        fn num(v: Option<f64>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{}",
            self.sweep_value,
            num(self.omega),
            num(self.big_omega),
            num(self.ratio),
            self.satisfied,
            self.distinct_count,
            num(self.min_residual),
        )
    }
}

#[derive(Debug, Serialize)]
pub struct Timings {
    pub total_ms: f64,
}
