//! On-disk layout of an episode: `trace.csv` with the scalar channels and
//! hidden units, `meta.json`, and optionally `frames/NNNNN.png`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::road::Season;
use super::rollout::{EpisodeTrace, TraceStep};
use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};
use crate::perception::write_png;

pub const TRACE_FILE: &str = "trace.csv";
pub const META_FILE: &str = "meta.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceMeta {
    road_seed: u64,
    season: Season,
    road_length: f64,
    seed: u64,
    noise_variance: f64,
    crashed: bool,
    final_s: f64,
    m: usize,
}

pub fn trace_header(m: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "s", "d", "psi", "pred", "expert", "kappa"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((0..m).map(|i| format!("h_{i}")));
    h
}

pub fn encode_trace_csv(trace: &EpisodeTrace) -> Result<Vec<u8>> {
    let m = trace.m();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trace_header(m))?;
    for st in &trace.steps {
        if st.h.len() != m {
            return Err(Error::Dimension {
                context: "trace hidden state",
                expected: m,
                actual: st.h.len(),
            });
        }
        let mut rec = vec![st.t.to_string()];
        rec.extend(
            [st.s, st.d, st.psi, st.pred, st.expert, st.kappa]
                .iter()
                .chain(&st.h)
                .map(|v| v.to_string()),
        );
        w.write_record(rec)?;
    }
    w.into_inner().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_trace(dir: &Path, trace: &EpisodeTrace, frames: bool) -> Result<()> {
    write_atomic(&dir.join(TRACE_FILE), &encode_trace_csv(trace)?)?;
    let meta = TraceMeta {
        road_seed: trace.road_seed,
        season: trace.season,
        road_length: trace.road_length,
        seed: trace.seed,
        noise_variance: trace.noise_variance,
        crashed: trace.crashed,
        final_s: trace.final_s,
        m: trace.m(),
    };
    write_atomic(&dir.join(META_FILE), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    if frames {
        for (t, f) in trace.frames.iter().enumerate() {
            write_png(&dir.join("frames").join(format!("{t:05}.png")), f.height, f.width, &f.data)?;
        }
    }
    Ok(())
}

/// Reads a trace written by [`write_trace`]. Frames and feature vectors are
/// not stored and come back empty.
pub fn read_trace(dir: &Path) -> Result<EpisodeTrace> {
    let meta: TraceMeta = serde_json::from_str(&read_to_string(&dir.join(META_FILE))?)?;
    let text = read_to_string(&dir.join(TRACE_FILE))?;
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header != trace_header(meta.m) {
        return Err(Error::Format(format!("unexpected trace header {header:?}")));
    }
    let mut steps = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("column {}: {e}", header[i])))
        };
        steps.push(TraceStep {
            t: rec[0].parse().map_err(|e| Error::Format(format!("column t: {e}")))?,
            s: num(1)?,
            d: num(2)?,
            psi: num(3)?,
            pred: num(4)?,
            expert: num(5)?,
            kappa: num(6)?,
            h: (7..7 + meta.m).map(num).collect::<Result<_>>()?,
            features: Vec::new(),
        });
    }
    Ok(EpisodeTrace {
        road_seed: meta.road_seed,
        season: meta.season,
        road_length: meta.road_length,
        seed: meta.seed,
        noise_variance: meta.noise_variance,
        steps,
        frames: Vec::new(),
        crashed: meta.crashed,
        final_s: meta.final_s,
    })
}
