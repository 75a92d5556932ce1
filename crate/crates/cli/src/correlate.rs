//! Pearson correlation between sweep distances and external ratings.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use csec_core::features::pearson;

use crate::error::CliError;

#[derive(Debug, Clone, Deserialize)]
struct ResultRow {
    simulator: String,
    agent_level: String,
    speed_level: String,
    d_hoof: f64,
    d_h2d: f64,
    d_track: f64,
    d_combined: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    /// Number of cells present in both files.
    pub n: usize,
    pub hoof: f64,
    pub h2d: f64,
    pub track: f64,
    pub combined: f64,
}

type Key = (String, String, String);

/// Ratings keyed by cell. The score column may be called `mos` or
/// `rating`.
fn read_ratings(text: &str) -> Result<HashMap<Key, f64>, CliError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| CliError::validation(format!("ratings: {e}")))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(s), Some(a), Some(v)) = (col("simulator"), col("agent_level"), col("speed_level")) else {
        return Err(CliError::validation("ratings need simulator, agent_level and speed_level columns"));
    };
    let score = col("mos")
        .or_else(|| col("rating"))
        .ok_or_else(|| CliError::validation("ratings need a mos or rating column"))?;
    let mut out = HashMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::validation(format!("ratings: {e}")))?;
        let field = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
        let value: f64 = field(score)
            .parse()
            .map_err(|_| CliError::validation(format!("ratings line {}: bad score {:?}", i + 2, field(score))))?;
        out.insert((field(s), field(a), field(v)), value);
    }
    Ok(out)
}

pub fn correlate_text(results: &str, ratings: &str) -> Result<Correlations, CliError> {
    let ratings = read_ratings(ratings)?;
    let mut rdr = csv::Reader::from_reader(results.as_bytes());
    let mut cols: [Vec<f64>; 4] = Default::default();
    let mut mos = Vec::new();
    for row in rdr.deserialize::<ResultRow>() {
        let row = row.map_err(|e| CliError::validation(format!("results: {e}")))?;
        if let Some(&m) = ratings.get(&(row.simulator, row.agent_level, row.speed_level)) {
            for (c, v) in cols.iter_mut().zip([row.d_hoof, row.d_h2d, row.d_track, row.d_combined]) {
                c.push(v);
            }
            mos.push(m);
        }
    }
    let r = |xs: &[f64]| pearson(xs, &mos).map_err(|e| CliError::validation(format!("correlation: {e}")));
    Ok(Correlations {
        n: mos.len(),
        hoof: r(&cols[0])?,
        h2d: r(&cols[1])?,
        track: r(&cols[2])?,
        combined: r(&cols[3])?,
    })
}

pub fn correlate_files(results: &Path, ratings: &Path) -> Result<Correlations, CliError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| CliError::validation(format!("cannot read {}: {e}", p.display())))
    };
    correlate_text(&read(results)?, &read(ratings)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RESULTS: &str = "simulator,agent_level,speed_level,n_agents,speed_scale,d_hoof,d_h2d,d_track,d_combined,rank
csec,Few,Slow,5,0.5,1,2,1,1,1
csec,Few,Same,5,1,2,4,3,2,2
csec,Same,Slow,10,0.5,3,6,2,3,3
csec,Same,Same,10,1,4,8,5,4,4
";

    #[test]
    fn joins_on_cell_keys() {
        // listed out of order, plus one cell absent from the results
        let ratings = "simulator,agent_level,speed_level,mos\ncsec,Same,Same,1\ncsec,Few,Slow,4\ncsec,Few,Same,3\ncsec,Same,Slow,2\nboids,Few,Slow,5\n";
        let c = correlate_text(RESULTS, ratings).unwrap();
        assert_eq!(c.n, 4);
        assert!((c.hoof + 1.0).abs() < 1e-12);
        assert!((c.h2d + 1.0).abs() < 1e-12);
        // track = [1, 3, 2, 5] against mos = [4, 3, 2, 1]: sxy = -5.5, sxx = 8.75, syy = 5
        assert!((c.track - (-5.5 / (8.75f64 * 5.0).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn rating_column_alias() {
        let ratings = "simulator,agent_level,speed_level,rating\ncsec,Few,Slow,1\ncsec,Few,Same,2\ncsec,Same,Slow,3\ncsec,Same,Same,4\n";
        assert!((correlate_text(RESULTS, ratings).unwrap().combined - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_matches_is_a_validation_error() {
        let ratings = "simulator,agent_level,speed_level,mos\ncsec,Few,Slow,1\n";
        assert_eq!(correlate_text(RESULTS, ratings).unwrap_err().exit_code(), 2);
        assert!(correlate_text(RESULTS, "a,b\n1,2\n").is_err());
    }
}
