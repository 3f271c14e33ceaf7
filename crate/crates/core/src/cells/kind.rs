use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Every recurrent cell the crate can build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellKind {
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "GRU")]
    Gru,
    #[serde(rename = "MGU")]
    Mgu,
    #[serde(rename = "CTRNN")]
    CtRnn,
    #[serde(rename = "LTC")]
    Ltc,
    #[serde(rename = "LC_NA")]
    LcNa,
    #[serde(rename = "LC_SA")]
    LcSa,
    #[serde(rename = "LRC_NA")]
    LrcNa,
    #[serde(rename = "LRC_SA")]
    LrcSa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Synapse {
    Electrical,
    Chemical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Neural,
    Synaptic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacitance {
    Fixed,
    Liquid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Gated,
    Bio {
        synapse: Synapse,
        activation: Activation,
        capacitance: Capacitance,
    },
}

/// Storage layout of the activation slope/offset arrays `a`, `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationLayout {
    /// Electrical synapses with neural activation: the update term is linear in `y`.
    Absent,
    /// One `(a_j, b_j)` pair per presynaptic source, length `m + n`.
    PerSource,
    /// One `(a_ji, b_ji)` pair per synapse, shape `(m + n) x m`.
    PerSynapse,
}

impl CellKind {
    pub const ALL: [CellKind; 9] = [
        CellKind::Lstm,
        CellKind::Gru,
        CellKind::Mgu,
        CellKind::CtRnn,
        CellKind::Ltc,
        CellKind::LcNa,
        CellKind::LcSa,
        CellKind::LrcNa,
        CellKind::LrcSa,
    ];

    pub const BIO: [CellKind; 6] = [
        CellKind::CtRnn,
        CellKind::Ltc,
        CellKind::LcNa,
        CellKind::LcSa,
        CellKind::LrcNa,
        CellKind::LrcSa,
    ];

    pub fn family(self) -> Family {
        use Activation::*;
        use Capacitance::*;
        use Synapse::*;
        let bio = |synapse, activation, capacitance| Family::Bio {
            synapse,
            activation,
            capacitance,
        };
        match self {
            CellKind::Lstm | CellKind::Gru | CellKind::Mgu => Family::Gated,
            CellKind::CtRnn => bio(Electrical, Neural, Fixed),
            CellKind::LcNa => bio(Electrical, Neural, Liquid),
            CellKind::LcSa => bio(Electrical, Synaptic, Liquid),
            CellKind::Ltc => bio(Chemical, Synaptic, Fixed),
            CellKind::LrcNa => bio(Chemical, Neural, Liquid),
            CellKind::LrcSa => bio(Chemical, Synaptic, Liquid),
        }
    }

    pub fn is_gated(self) -> bool {
        self.family() == Family::Gated
    }

    pub fn synapse(self) -> Option<Synapse> {
        match self.family() {
            Family::Bio { synapse, .. } => Some(synapse),
            Family::Gated => None,
        }
    }

    pub fn has_liquid_capacitance(self) -> bool {
        matches!(
            self.family(),
            Family::Bio {
                capacitance: Capacitance::Liquid,
                ..
            }
        )
    }

    pub fn activation_layout(self) -> ActivationLayout {
        match self.family() {
            Family::Gated => ActivationLayout::Absent,
            Family::Bio {
                synapse: Synapse::Electrical,
                activation: Activation::Neural,
                ..
            } => ActivationLayout::Absent,
            Family::Bio {
                activation: Activation::Neural,
                ..
            } => ActivationLayout::PerSource,
            Family::Bio {
                activation: Activation::Synaptic,
                ..
            } => ActivationLayout::PerSynapse,
        }
    }

    /// Number of `(m + n) x m` weight blocks of a gated cell.
    pub fn gate_blocks(self) -> Option<usize> {
        match self {
            CellKind::Lstm => Some(4),
            CellKind::Gru => Some(3),
            CellKind::Mgu => Some(2),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellKind::Lstm => "LSTM",
            CellKind::Gru => "GRU",
            CellKind::Mgu => "MGU",
            CellKind::CtRnn => "CTRNN",
            CellKind::Ltc => "LTC",
            CellKind::LcNa => "LC_NA",
            CellKind::LcSa => "LC_SA",
            CellKind::LrcNa => "LRC_NA",
            CellKind::LrcSa => "LRC_SA",
        }
    }
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        let norm = if norm == "CT_RNN" { "CTRNN".to_string() } else { norm };
        CellKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown cell kind `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples_match_the_unified_family() {
        use Activation::*;
        use Capacitance::*;
        use Synapse::*;
        let expect = [
            (CellKind::CtRnn, Electrical, Neural, Fixed),
            (CellKind::LcNa, Electrical, Neural, Liquid),
            (CellKind::LcSa, Electrical, Synaptic, Liquid),
            (CellKind::Ltc, Chemical, Synaptic, Fixed),
            (CellKind::LrcNa, Chemical, Neural, Liquid),
            (CellKind::LrcSa, Chemical, Synaptic, Liquid),
        ];
        for (kind, s, a, c) in expect {
            assert_eq!(
                kind.family(),
                Family::Bio {
                    synapse: s,
                    activation: a,
                    capacitance: c
                }
            );
        }
        for kind in [CellKind::Lstm, CellKind::Gru, CellKind::Mgu] {
            assert!(kind.is_gated());
        }
    }

    #[test]
    fn names_round_trip() {
        for kind in CellKind::ALL {
            assert_eq!(kind.name().parse::<CellKind>().unwrap(), kind);
            let json = serde_json::to_string(&kind).unwrap();
            assert_eq!(json, format!("\"{}\"", kind.name()));
        }
        assert_eq!("lrc-sa".parse::<CellKind>().unwrap(), CellKind::LrcSa);
        assert_eq!("CT-RNN".parse::<CellKind>().unwrap(), CellKind::CtRnn);
        assert!("GCU".parse::<CellKind>().is_err());
    }
}
