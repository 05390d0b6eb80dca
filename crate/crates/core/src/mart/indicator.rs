use serde::{Deserialize, Serialize};

use super::{DataMart, MartError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub name: String,
    pub value: f64,
    /// Mart and aggregation the value was computed from.
    pub derivation: String,
}

/// Change in the total count between two values of a year dimension.
/// Recomputing from the same mart always yields the same value.
pub fn year_over_year(mart: &DataMart, year_dimension: &str, from: i32, to: i32) -> Result<Indicator, MartError> {
    let before = mart.slice(year_dimension, &from.to_string())?.total();
    let after = mart.slice(year_dimension, &to.to_string())?.total();
    Ok(Indicator {
        name: format!("{}:{year_dimension}:{from}..{to}", mart.name()),
        value: after as f64 - before as f64,
        derivation: format!(
            "mart {} at snapshot {}: sum of cells with {year_dimension}={to} minus sum with {year_dimension}={from}",
            mart.name(),
            mart.snapshot_id()
        ),
    })
}
