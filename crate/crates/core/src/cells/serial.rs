//! JSON document for one cell: `{format_version, kind, m, n, dt, arrays}`
//! with every parameter array flattened row-major.
//!
//! `serde_json` writes the shortest decimal that parses back to the same
//! `f64`, so round trips are bit-exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Cell, CellKind, CellParameters, GatedParameters};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellDocument {
    pub format_version: u32,
    pub kind: CellKind,
    pub m: usize,
    pub n: usize,
    pub dt: f64,
    pub arrays: BTreeMap<String, Vec<f64>>,
}

impl<T: Scalar> Cell<T> {
    pub fn to_document(&self) -> CellDocument {
        let arrays = self
            .tensors()
            .into_iter()
            .map(|(name, t)| (name.to_string(), t.iter().map(|v| v.as_f64()).collect()))
            .collect();
        CellDocument {
            format_version: FORMAT_VERSION,
            kind: self.kind(),
            m: self.m(),
            n: self.n(),
            dt: self.dt().as_f64(),
            arrays,
        }
    }

    pub fn from_document(doc: &CellDocument) -> Result<Self> {
        if doc.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version {}",
                doc.format_version
            )));
        }
        let mut cell = if doc.kind.is_gated() {
            Cell::Gated(GatedParameters::zeros(doc.kind, doc.m, doc.n)?)
        } else {
            Cell::Bio(CellParameters::zeros(doc.kind, doc.m, doc.n, T::lit(doc.dt))?)
        };
        let expected: Vec<&str> = cell.tensors().into_iter().map(|(n, _)| n).collect();
        if let Some(extra) = doc.arrays.keys().find(|k| !expected.contains(&k.as_str())) {
            return Err(Error::Format(format!("unexpected array `{extra}` for {}", doc.kind)));
        }
        for (name, dst) in cell.tensors_mut() {
            let src = doc
                .arrays
                .get(name)
                .ok_or_else(|| Error::Format(format!("missing array `{name}`")))?;
            if src.len() != dst.len() {
                return Err(Error::Format(format!(
                    "array `{name}` has length {}, expected {}",
                    src.len(),
                    dst.len()
                )));
            }
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = T::lit(s);
            }
        }
        cell.validate()?;
        Ok(cell)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: CellDocument = serde_json::from_str(s)?;
        Self::from_document(&doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(seed in any::<u64>(), kind_idx in 0usize..9, m in 1usize..5, n in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kind = CellKind::ALL[kind_idx];
            let mut cell = Cell::<f64>::init(kind, m, n, 0.37, &mut rng).unwrap();
            // awkward magnitudes
            if let Some((_, t)) = cell.tensors_mut().into_iter().find(|(_, t)| !t.is_empty()) {
                t[0] = 1.0e-300 * 3.3;
                if t.len() > 1 { t[1] = -123456789.123456789e10; }
            }
            let back = Cell::<f64>::from_json(&cell.to_json().unwrap()).unwrap();
            for ((_, a), (_, b)) in cell.tensors().into_iter().zip(back.tensors()) {
                let a: Vec<u64> = a.iter().map(|v| v.to_bits()).collect();
                let b: Vec<u64> = b.iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(a, b);
            }
            prop_assert_eq!(cell.dt().to_bits(), back.dt().to_bits());
        }
    }

    #[test]
    fn rejects_wrong_lengths_and_unknown_arrays() {
        let cell = Cell::<f64>::zeros(CellKind::LcSa, 2, 1, 1.0).unwrap();
        let mut doc = cell.to_document();
        doc.arrays.get_mut("g").unwrap().pop();
        assert!(Cell::<f64>::from_document(&doc).is_err());

        let mut doc = cell.to_document();
        doc.arrays.insert("zeta".into(), vec![]);
        assert!(Cell::<f64>::from_document(&doc).is_err());

        let mut doc = cell.to_document();
        doc.format_version = 99;
        assert!(Cell::<f64>::from_document(&doc).is_err());

        let json = cell.to_json().unwrap().replacen("\"m\"", "\"bogus\": 1, \"m\"", 1);
        assert!(Cell::<f64>::from_json(&json).is_err());
    }

    #[test]
    fn document_layout() {
        let cell = Cell::<f64>::zeros(CellKind::LrcNa, 2, 3, 0.5).unwrap();
        let v: serde_json::Value = serde_json::from_str(&cell.to_json().unwrap()).unwrap();
        assert_eq!(v["kind"], "LRC_NA");
        assert_eq!(v["m"], 2);
        assert_eq!(v["n"], 3);
        assert_eq!(v["dt"], 0.5);
        assert_eq!(v["format_version"], 1);
        assert_eq!(v["arrays"]["a"].as_array().unwrap().len(), 5);
        assert_eq!(v["arrays"]["g"].as_array().unwrap().len(), 10);
    }
}
