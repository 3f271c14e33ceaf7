//! Model checkpoints: the cell parameter document plus head, readout and
//! optimizer moments in one JSON file.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{GradientSet, PolicyModel};
use super::optim::AdamState;
use crate::cells::{Cell, CellDocument, FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};
use crate::perception::{ConvHead, ConvHeadConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadDocument {
    pub config: ConvHeadConfig,
    pub arrays: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerDocument {
    pub step: u64,
    pub first_moment: BTreeMap<String, Vec<f64>>,
    pub second_moment: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub cell: CellDocument,
    pub head: Option<HeadDocument>,
    pub readout_w: Vec<f64>,
    pub readout_b: f64,
    pub optimizer: Option<OptimizerDocument>,
    pub epoch: Option<usize>,
    pub val_mse: Option<f64>,
}

fn to_map<'a, T: Scalar + 'a>(arrays: impl IntoIterator<Item = (String, &'a Vec<T>)>) -> BTreeMap<String, Vec<f64>> {
    arrays
        .into_iter()
        .map(|(n, a)| (n, a.iter().map(|v| v.as_f64()).collect()))
        .collect()
}

fn fill<T: Scalar>(dst: Vec<(String, &mut Vec<T>)>, src: &BTreeMap<String, Vec<f64>>, what: &str) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::Format(format!(
            "{what}: expected {} arrays, found {}",
            dst.len(),
            src.len()
        )));
    }
    for (name, a) in dst {
        let v = src
            .get(&name)
            .ok_or_else(|| Error::Format(format!("{what}: missing array {name}")))?;
        if v.len() != a.len() {
            return Err(Error::Format(format!(
                "{what}: array {name} has {} entries, expected {}",
                v.len(),
                a.len()
            )));
        }
        *a = v.iter().map(|&x| T::lit(x)).collect();
    }
    Ok(())
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(model: &PolicyModel<T>, optimizer: Option<&AdamState<T>>) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            cell: model.cell.to_document(),
            head: model.head.as_ref().map(|h| HeadDocument {
                config: h.config.clone(),
                arrays: to_map(h.tensors()),
            }),
            readout_w: model.readout_w.iter().map(|v| v.as_f64()).collect(),
            readout_b: model.readout_b[0].as_f64(),
            optimizer: optimizer.map(|o| OptimizerDocument {
                step: o.t,
                first_moment: to_map(o.m.arrays()),
                second_moment: to_map(o.v.arrays()),
            }),
            epoch: None,
            val_mse: None,
        }
    }

    pub fn model<T: Scalar>(&self) -> Result<PolicyModel<T>> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint format version {}",
                self.format_version
            )));
        }
        let cell = Cell::from_document(&self.cell)?;
        let head = match &self.head {
            Some(doc) => {
                let mut h = ConvHead::zeros(doc.config.clone())?;
                fill(h.tensors_mut(), &doc.arrays, "head")?;
                Some(h)
            }
            None => None,
        };
        let model = PolicyModel {
            head,
            cell,
            readout_w: self.readout_w.iter().map(|&v| T::lit(v)).collect(),
            readout_b: vec![T::lit(self.readout_b)],
        };
        model.validate()?;
        Ok(model)
    }

    pub fn optimizer_state<T: Scalar>(&self, model: &PolicyModel<T>) -> Result<Option<AdamState<T>>> {
        let Some(doc) = &self.optimizer else {
            return Ok(None);
        };
        let mut m = GradientSet::zeros_like(model);
        let mut v = GradientSet::zeros_like(model);
        fill(m.arrays_mut(), &doc.first_moment, "first moment")?;
        fill(v.arrays_mut(), &doc.second_moment, "second moment")?;
        Ok(Some(AdamState { t: doc.step, m, v }))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }
}
