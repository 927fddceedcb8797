//! Exact bitwise-mutation transition probabilities between Hamming-weight
//! classes.
//!
//! Standard bitwise mutation flips each of the `n` bits independently with
//! probability `1/n`. For strings grouped by Hamming weight the transition
//! probability from weight `m` to weight `w` is
//!
//! ```text
//! P(m -> w) = sum_j C(m, j) * C(n-m, w-m+j) * (1/n)^(2j+w-m) * (1-1/n)^(n-2j-(w-m))
//! ```
//!
//! where `j` counts one-bits flipped to zero and `w-m+j` counts zero-bits
//! flipped to one. Individual summands span hundreds of orders of magnitude
//! once `n` reaches the hundreds, so every summand is evaluated in log space
//! with one final exponentiation, and summands are accumulated in descending
//! magnitude to keep the result reproducible bit for bit.

use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Probabilities below this threshold are treated as absent.
///
/// IEEE doubles cannot usefully resolve mass this small, and downstream
/// consumers (shortcut detection, coefficient schemes) treat it as zero.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// A single weight-to-weight transition request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightKernelQuery {
    /// Bit-string length.
    pub n: usize,
    /// Hamming weight of the source string.
    pub source_weight: usize,
    /// Hamming weight of the target string.
    pub target_weight: usize,
}

impl WeightKernelQuery {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter(
                "bit-string length must be at least 1".into(),
            ));
        }
        if self.source_weight > self.n || self.target_weight > self.n {
            return Err(Error::InvalidParameter(format!(
                "weights ({}, {}) exceed the bit-string length {}",
                self.source_weight, self.target_weight, self.n
            )));
        }
        Ok(())
    }
}

/// Reusable kernel for a fixed bit-string length.
///
/// Holds the log-factorial table plus the two per-bit log probabilities, so
/// generators that need a whole triangular matrix of transitions pay for the
/// table once.
#[derive(Debug, Clone)]
pub struct MutationKernel {
    n: usize,
    ln_factorial: Vec<f64>,
    ln_flip: f64,
    ln_keep: f64,
}

impl MutationKernel {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "bit-string length must be at least 1".into(),
            ));
        }
        let mut ln_factorial = Vec::with_capacity(n + 1);
        let mut acc = CompensatedSum::new();
        ln_factorial.push(0.0);
        for i in 1..=n {
            acc.add((i as f64).ln());
            ln_factorial.push(acc.value());
        }
        let rate = 1.0 / n as f64;
        Ok(Self {
            n,
            ln_factorial,
            ln_flip: rate.ln(),
            // ln(0) = -inf for n = 1; the keep exponent is zero whenever all
            // bits flip, and such terms skip this factor entirely.
            ln_keep: (1.0 - rate).ln(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn ln_choose(&self, a: usize, b: usize) -> f64 {
        self.ln_factorial[a] - self.ln_factorial[b] - self.ln_factorial[a - b]
    }

    /// Probability that one mutation maps a weight-`from` string to weight `to`.
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        debug_assert!(from <= self.n && to <= self.n);
        let n = self.n;
        let ones = from;
        let zeros = n - from;

        // j one-bits flip down, i = to - from + j zero-bits flip up.
        let j_min = from.saturating_sub(to);
        let j_max = ones.min(n - to);
        if j_min > j_max {
            return 0.0;
        }

        let mut terms = Vec::with_capacity(j_max - j_min + 1);
        for j in j_min..=j_max {
            let i = to + j - from;
            debug_assert!(i <= zeros);
            let flips = j + i;
            let keeps = n - flips;
            let mut ln_term = self.ln_choose(ones, j) + self.ln_choose(zeros, i);
            ln_term += flips as f64 * self.ln_flip;
            if keeps > 0 {
                ln_term += keeps as f64 * self.ln_keep;
            }
            terms.push(ln_term.exp());
        }

        terms.sort_unstable_by(|a, b| b.partial_cmp(a).expect("kernel terms are finite"));
        let mut acc = CompensatedSum::new();
        for t in terms {
            acc.add(t);
        }
        let p = acc.value();
        if p < PROBABILITY_FLOOR {
            0.0
        } else {
            p.min(1.0)
        }
    }
}

/// One-shot form of [`MutationKernel::transition`].
pub fn weight_transition(query: WeightKernelQuery) -> Result<f64> {
    query.validate()?;
    Ok(MutationKernel::new(query.n)?.transition(query.source_weight, query.target_weight))
}
