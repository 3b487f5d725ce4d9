//! Check reports, witnesses and the bit-stable JSON encoding used for output.

use std::io;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::HermitianMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Certified,
    Falsified,
    Inconclusive,
}

/// Evidence attached to a falsified (or borderline) check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Symmetry {
        point: Vec<f64>,
        permutation: Vec<usize>,
        deviation: f64,
    },
    FiniteDifference {
        order: Vec<u32>,
        x0: Vec<f64>,
        value: f64,
        /// Mollification width, `None` for the raw function.
        epsilon: Option<f64>,
    },
    Negativity {
        point: Vec<f64>,
        value: f64,
    },
    Monotonicity {
        point: Vec<f64>,
        coordinate: usize,
        increment: f64,
        value_before: f64,
        value_after: f64,
    },
    GramInequality {
        x: Vec<f64>,
        y: Vec<f64>,
        lhs: f64,
        rhs: f64,
    },
    Spectral {
        family: String,
        trial: usize,
        matrix: HermitianMatrix,
        min_eigenvalue: f64,
    },
    Rank {
        rank: usize,
        expected: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// The headline number of the check (max deviation, most negative difference, ...).
    pub statistic: f64,
    pub tolerance: f64,
    pub seed: Option<u64>,
    pub samples: usize,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, verdict: Verdict, statistic: f64, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            verdict,
            witness: None,
            statistic,
            tolerance,
            seed: None,
            samples: 0,
            elapsed: Duration::ZERO,
        }
    }

    pub fn with_witness(mut self, witness: Option<Witness>) -> Self {
        self.witness = witness;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_elapsed(mut self, elapsed: Duration) -> Self {
        self.elapsed = elapsed;
        self
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn is_falsified(&self) -> bool {
        self.verdict == Verdict::Falsified
    }
}

/// Compact JSON formatter writing every float with 17 significant digits.
#[derive(Clone, Copy, Debug, Default)]
pub struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` with [`SignificantDigits`].
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&[0.2f64, 1.0, -0.9801]).unwrap();
        assert_eq!(s, "[2.0000000000000001e-1,1.0000000000000000e0,-9.8009999999999997e-1]");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.2, 1.0, -0.9801]);
    }

    #[test]
    fn non_finite_becomes_null() {
        assert_eq!(to_json(&f64::NAN).unwrap(), "null");
    }

    #[test]
    fn elapsed_is_not_serialized() {
        let r = CheckReport::new("x", Verdict::Certified, 0.0, 1e-9).with_elapsed(Duration::from_secs(3));
        assert!(!to_json(&r).unwrap().contains("elapsed"));
    }
}
