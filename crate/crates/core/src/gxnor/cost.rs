//! Expected per-neuron operation counts for a neuron with `M` inputs under
//! five computing architectures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// Real weights, real activations: multiply + accumulate.
    FullPrecision,
    /// Binary weights: accumulate `±x`.
    Bwn,
    /// Ternary weights: accumulate only when the weight is non-zero.
    Twn,
    /// Binary weights and activations: XNOR + one bitcount.
    Bnn,
    /// Ternary weights and activations: XNOR + bitcount only on lanes where
    /// both operands are non-zero.
    Gxnor,
}

impl Architecture {
    pub const ALL: [Architecture; 5] = [
        Architecture::FullPrecision,
        Architecture::Bwn,
        Architecture::Twn,
        Architecture::Bnn,
        Architecture::Gxnor,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Architecture::FullPrecision => "Full-precision NN",
            Architecture::Bwn => "BWN",
            Architecture::Twn => "TWN",
            Architecture::Bnn => "BNN/XNOR",
            Architecture::Gxnor => "GXNOR",
        }
    }
}

/// Probability distribution over the discrete states of an operand.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDistribution {
    states: Vec<(f64, f64)>,
}

impl StateDistribution {
    /// `(state, probability)` pairs; probabilities must be non-negative and
    /// sum to 1.
    pub fn new(states: Vec<(f64, f64)>) -> Result<Self> {
        if states.iter().any(|&(_, p)| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::Input("state probabilities must be non-negative".into()));
        }
        let total: f64 = states.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("state probabilities sum to {total}, not 1")));
        }
        Ok(Self { states })
    }

    pub fn uniform(values: &[f64]) -> Self {
        let p = 1.0 / values.len() as f64;
        Self {
            states: values.iter().map(|&v| (v, p)).collect(),
        }
    }

    pub fn uniform_ternary() -> Self {
        Self::uniform(&[-1.0, 0.0, 1.0])
    }

    pub fn uniform_binary() -> Self {
        Self::uniform(&[-1.0, 1.0])
    }

    /// A continuous operand that is never exactly zero.
    pub fn nonzero() -> Self {
        Self { states: vec![(1.0, 1.0)] }
    }

    /// Empirical frequencies of `values`.
    pub fn empirical(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("cannot build a distribution from no samples".into()));
        }
        let zeros = values.iter().filter(|&&v| v == 0.0).count();
        let n = values.len() as f64;
        Self::new(vec![(0.0, zeros as f64 / n), (1.0, (values.len() - zeros) as f64 / n)])
    }

    pub fn p_nonzero(&self) -> f64 {
        self.states.iter().filter(|&&(v, _)| v != 0.0).map(|&(_, p)| p).sum()
    }
}

/// Expected count with the range it can take for a single neuron.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpCount {
    pub expected: f64,
    pub min: f64,
    pub max: f64,
}

impl OpCount {
    fn fixed(v: f64) -> Self {
        Self { expected: v, min: v, max: v }
    }

    /// `full` operations gated by an event of probability `p`.
    fn gated(full: f64, p: f64) -> Self {
        Self {
            expected: p * full,
            min: if p >= 1.0 { full } else { 0.0 },
            max: if p > 0.0 { full } else { 0.0 },
        }
    }

    /// Render with `M` standing for the fan-in, e.g. `M`, `0~M`, `0/1`.
    pub fn symbolic(&self, fan_in: f64) -> String {
        let term = |v: f64| {
            if v == fan_in && v != 1.0 && v != 0.0 {
                "M".to_string()
            } else {
                format!("{v}")
            }
        };
        if self.min == self.max {
            term(self.min)
        } else if self.min == 0.0 && self.max == 1.0 {
            "0/1".to_string()
        } else {
            format!("{}~{}", term(self.min), term(self.max))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub architecture: Architecture,
    pub fan_in: usize,
    pub multiplications: OpCount,
    pub accumulations: OpCount,
    pub xnor: OpCount,
    pub bitcount: OpCount,
    pub resting_probability: f64,
}

impl CostEstimate {
    pub fn resting_percent(&self) -> String {
        format!("{:.1}%", 100.0 * self.resting_probability)
    }
}

/// Expected operations for one output neuron with `fan_in` inputs, assuming
/// independent operand states. Only event-driven architectures (TWN, GXNOR)
/// rest; the others always run every lane.
pub fn count_ops(
    architecture: Architecture,
    fan_in: usize,
    weights: &StateDistribution,
    activations: &StateDistribution,
) -> Result<CostEstimate> {
    if fan_in == 0 {
        return Err(Error::Input("fan-in must be at least 1".into()));
    }
    let m = fan_in as f64;
    let zero = OpCount::fixed(0.0);
    let (mul, acc, xnor, bitcount, resting) = match architecture {
        Architecture::FullPrecision => (OpCount::fixed(m), OpCount::fixed(m), zero, zero, 0.0),
        Architecture::Bwn => (zero, OpCount::fixed(m), zero, zero, 0.0),
        Architecture::Twn => {
            let p = weights.p_nonzero();
            (zero, OpCount::gated(m, p), zero, zero, 1.0 - p)
        }
        Architecture::Bnn => (zero, zero, OpCount::fixed(m), OpCount::fixed(1.0), 0.0),
        Architecture::Gxnor => {
            let p = weights.p_nonzero() * activations.p_nonzero();
            let any_active = 1.0 - (1.0 - p).powi(fan_in.min(i32::MAX as usize) as i32);
            let bitcount = OpCount {
                expected: any_active,
                min: if p >= 1.0 { 1.0 } else { 0.0 },
                max: if p > 0.0 { 1.0 } else { 0.0 },
            };
            (zero, zero, OpCount::gated(m, p), bitcount, 1.0 - p)
        }
    };
    Ok(CostEstimate {
        architecture,
        fan_in,
        multiplications: mul,
        accumulations: acc,
        xnor,
        bitcount,
        resting_probability: resting,
    })
}
