//! Run summaries in CSV and JSON.
//!
//! CSV has one header line and one data line. Per-level values are joined
//! with `/` in level order, as in `64/8`. Without adaptivity the header is
//! [`CSV_HEADER`]; adaptive runs use [`CSV_HEADER_ADAPTIVE`], which inserts
//! the indicator columns after `cond`. Times are seconds with 3 decimals.

use std::path::Path;

use serde::{Deserialize, Serialize};

pub const CSV_HEADER: &str = "problem,levels,N,n,n_gamma,n_f,Nc,its,cond,converged,setup,pcg,solve";
pub const CSV_HEADER_ADAPTIVE: &str =
    "problem,levels,N,n,n_gamma,n_f,Nc,its,cond,converged,omega_levels,omega,added,setup,pcg,solve";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintCounts {
    /// Corner rows (one per dof of each corner node).
    pub corner: usize,
    pub edge: usize,
    pub face: usize,
    pub adaptive: usize,
}

impl ConstraintCounts {
    pub fn total(&self) -> usize {
        self.corner + self.edge + self.face + self.adaptive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem: String,
    pub levels: usize,
    /// Subdomains per level.
    pub subdomains: Vec<usize>,
    pub n: usize,
    /// Interface dofs of level 1.
    pub n_gamma: usize,
    /// Face globs per level. Above level 1 they depend on the partitioner.
    pub n_f: Vec<usize>,
    /// Coarse dofs per level.
    pub coarse_dofs: Vec<usize>,
    pub constraints: Vec<ConstraintCounts>,
    pub iterations: usize,
    pub cond: f64,
    pub converged: bool,
    pub final_residual: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_levels: Option<Vec<f64>>,
    /// Product of the per-level indicators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Adaptive rows kept per level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added: Option<Vec<usize>>,
    /// Some pair exhausted its eigenvector budget.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capped: Option<bool>,
    pub setup_time: f64,
    pub pcg_time: f64,
    pub solve_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("/")
}

impl SolveReport {
    pub fn csv_header(&self) -> &'static str {
        if self.omega.is_some() {
            CSV_HEADER_ADAPTIVE
        } else {
            CSV_HEADER
        }
    }

    pub fn csv_row(&self) -> String {
        let mut f = vec![
            self.problem.replace(',', ";"),
            self.levels.to_string(),
            join(&self.subdomains),
            self.n.to_string(),
            self.n_gamma.to_string(),
            join(&self.n_f),
            join(&self.coarse_dofs),
            self.iterations.to_string(),
            format!("{:.4}", self.cond),
            self.converged.to_string(),
        ];
        if let Some(w) = self.omega {
            let levels: Vec<String> = self.omega_levels.iter().flatten().map(|x| format!("{x:.4}")).collect();
            f.push(levels.join("/"));
            f.push(format!("{w:.4}"));
            f.push(join(self.added.as_deref().unwrap_or(&[])));
        }
        f.push(format!("{:.3}", self.setup_time));
        f.push(format!("{:.3}", self.pcg_time));
        f.push(format!("{:.3}", self.solve_time));
        f.join(",")
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", self.csv_header(), self.csv_row())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

pub fn emit_report(r: &SolveReport, format: Format, path: &Path) -> std::io::Result<()> {
    let text = match format {
        Format::Csv => r.to_csv(),
        Format::Json => r.to_json(),
    };
    std::fs::write(path, text)
}

/// Several reports as one table; rows are grouped by header so runs with and
/// without adaptivity stay separate.
pub fn table(reports: &[SolveReport]) -> String {
    let mut out = String::new();
    for header in [CSV_HEADER, CSV_HEADER_ADAPTIVE] {
        let rows: Vec<String> = reports.iter().filter(|r| r.csv_header() == header).map(|r| r.csv_row()).collect();
        if rows.is_empty() {
            continue;
        }
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(header);
        out.push('\n');
        for r in rows {
            out.push_str(&r);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SolveReport {
        SolveReport {
            problem: "cube".into(),
            levels: 3,
            subdomains: vec![64, 8],
            n: 1000,
            n_gamma: 300,
            n_f: vec![144, 12],
            coarse_dofs: vec![500, 60],
            constraints: vec![ConstraintCounts { corner: 300, edge: 200, face: 0, adaptive: 0 }; 2],
            iterations: 17,
            cond: 4.21,
            converged: true,
            final_residual: 1e-9,
            omega_levels: None,
            omega: None,
            added: None,
            capped: None,
            setup_time: 0.123,
            pcg_time: 0.05,
            solve_time: 0.173,
        }
    }

    #[test]
    fn csv_matches_header() {
        let r = sample();
        let csv = r.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        let row = lines.next().unwrap();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.contains(",64/8,"));
        assert!(row.ends_with("0.123,0.050,0.173"));
    }

    #[test]
    fn adaptive_columns_only_when_present() {
        let mut r = sample();
        assert!(!r.to_json().contains("omega"));
        r.omega_levels = Some(vec![1.8, 1.9]);
        r.omega = Some(1.8 * 1.9);
        r.added = Some(vec![12, 3]);
        assert_eq!(r.csv_header(), CSV_HEADER_ADAPTIVE);
        assert_eq!(r.csv_row().split(',').count(), CSV_HEADER_ADAPTIVE.split(',').count());
    }

    #[test]
    fn json_round_trip() {
        let r = sample();
        assert_eq!(SolveReport::from_json(&r.to_json()).unwrap(), r);
    }
}
