use crate::error::{Error, Result};
use crate::metrics::MetricsReport;

/// Serializes `report` as pretty JSON. Key order follows the struct layout,
/// floats use the shortest representation that round-trips exactly.
pub fn write_report(report: &MetricsReport) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(report).expect("report is always serializable");
    out.push(b'\n');
    out
}

pub fn read_report(bytes: &[u8]) -> Result<MetricsReport> {
    let report: MetricsReport =
        serde_json::from_slice(bytes).map_err(|e| Error::parse("report", e.to_string()))?;
    if report.schema != crate::metrics::REPORT_SCHEMA {
        return Err(Error::parse("schema", format!("unsupported version {}", report.schema)));
    }
    Ok(report)
}
