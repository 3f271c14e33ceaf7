use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::EpisodeTrace;

/// Absolute lag-0 Pearson correlation. `degenerate` marks a constant input,
/// for which the value is reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    pub degenerate: bool,
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

fn centered_sums(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).fold((0.0, 0.0, 0.0), |(sxy, sxx, syy), (&a, &b)| {
        let (da, db) = (a - mx, b - my);
        (sxy + da * db, sxx + da * da, syy + db * db)
    })
}

pub fn abs_correlation(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            array: "correlation input".into(),
        });
    }
    let degenerate = Correlation {
        value: 0.0,
        degenerate: true,
    };
    if is_constant(x) || is_constant(y) {
        return Ok(degenerate);
    }
    let (sxy, sxx, syy) = centered_sums(x, y);
    let denom = sxx.sqrt() * syy.sqrt();
    if !(denom > 0.0) {
        return Ok(degenerate);
    }
    Ok(Correlation {
        value: (sxy.abs() / denom).min(1.0),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// The policy's own steering predictions.
    #[default]
    Prediction,
    /// Road curvature at the preview point.
    Curvature,
}

impl std::str::FromStr for Reference {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prediction" => Ok(Reference::Prediction),
            "curvature" => Ok(Reference::Curvature),
            other => Err(Error::InvalidArgument(format!("unknown correlation reference `{other}`"))),
        }
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-neuron |corr| for each run, with aggregates over all (run, neuron)
/// pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub reference: Reference,
    /// `runs[r][i]`: neuron `i` in run `r`.
    pub runs: Vec<Vec<Correlation>>,
    /// Mean over runs, one row per neuron.
    pub per_neuron: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl CorrelationTable {
    pub fn from_runs(reference: Reference, runs: Vec<Vec<Correlation>>) -> Result<Self> {
        let m = runs.first().ok_or(Error::Empty("correlation runs"))?.len();
        if let Some(bad) = runs.iter().find(|r| r.len() != m) {
            return Err(Error::LengthMismatch {
                left: m,
                right: bad.len(),
            });
        }
        let per_neuron = (0..m)
            .map(|i| runs.iter().map(|r| r[i].value).sum::<f64>() / runs.len() as f64)
            .collect();
        let all: Vec<f64> = runs.iter().flatten().map(|c| c.value).collect();
        let (mean, std) = mean_std(&all);
        Ok(CorrelationTable {
            reference,
            runs,
            per_neuron,
            mean,
            std,
        })
    }

    pub fn m(&self) -> usize {
        self.per_neuron.len()
    }

    pub fn degenerate_count(&self) -> usize {
        self.runs.iter().flatten().filter(|c| c.degenerate).count()
    }
}

pub fn correlation_table(traces: &[EpisodeTrace], reference: Reference) -> Result<CorrelationTable> {
    if traces.is_empty() {
        return Err(Error::Empty("traces"));
    }
    let runs = traces
        .iter()
        .map(|tr| {
            let r = match reference {
                Reference::Prediction => tr.predictions(),
                Reference::Curvature => tr.curvature(),
            };
            (0..tr.m()).map(|i| abs_correlation(&tr.hidden(i), &r)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    CorrelationTable::from_runs(reference, runs)
}
