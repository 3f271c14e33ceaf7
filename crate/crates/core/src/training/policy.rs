//! A trained model driving the simulator.

use crate::cells::HiddenState;
use crate::error::Result;
use crate::perception::Frame;
use crate::scalar::Scalar;
use crate::simulator::{DrivingPolicy, PolicyOutput, RoadProfile, VehicleState};

use super::model::PolicyModel;

/// Runs the model online, carrying the hidden state across frames.
#[derive(Debug, Clone)]
pub struct ModelPolicy<T> {
    pub model: PolicyModel<T>,
    state: HiddenState<T>,
}

impl<T: Scalar> ModelPolicy<T> {
    pub fn new(model: PolicyModel<T>) -> Self {
        let state = model.cell.zero_state();
        ModelPolicy { model, state }
    }

    pub fn state(&self) -> &HiddenState<T> {
        &self.state
    }
}

impl<T: Scalar> DrivingPolicy for ModelPolicy<T> {
    fn reset(&mut self) {
        self.state = self.model.cell.zero_state();
    }

    fn act(&mut self, frame: &Frame<f64>, _road: &RoadProfile, _state: &VehicleState) -> Result<PolicyOutput> {
        let input: Vec<T> = frame.data.iter().map(|&v| T::lit(v)).collect();
        let x = self.model.features(&[input])?.pop().expect("one frame");
        let next = self.model.cell.step(&self.state, &x)?;
        let steering = self.model.readout(&next.h).as_f64();
        self.state = next;
        Ok(PolicyOutput {
            steering,
            features: x.iter().map(|v| v.as_f64()).collect(),
            hidden: self.state.h.iter().map(|v| v.as_f64()).collect(),
        })
    }
}
