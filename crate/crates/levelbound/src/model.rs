//! Fitness-level transition models.
//!
//! A [`LevelModel`] partitions the search space into levels `S_0..S_K`
//! ordered by fitness, with `S_0` the optimal set, and stores for every
//! non-optimal level `k` the transition probabilities `q(k, l)` into each
//! strictly better level `l < k`. An elitist algorithm never moves to a
//! worse level, so the self-loop mass is implicit as the row residual and
//! only the strictly-improving entries are kept.
//!
//! Models are either `Exact` (`q_lo = q_hi`, a single known chain) or
//! `Bounded` (entrywise probability intervals). Conditional improvement
//! ratios `r(k, l) = q(k, l) / sum_j q(k, j)` can be attached, either loaded
//! from a file or derived with [`derive_ratios`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::MutationKernel;
use crate::sum::{compensated_total, CompensatedSum};

/// Absolute slack used by all normalization checks in this module.
const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Largest bit-string length accepted by the built-in generators.
///
/// Far beyond this the kernel's log-space evaluation would spend its time
/// producing zeros; see [`crate::kernel::PROBABILITY_FLOOR`].
pub const MAX_GENERATOR_BITS: usize = 1024;

/// Whether a model carries exact probabilities or entrywise intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Exact,
    Bounded,
}

/// Lower-triangular probability matrix: row `k` in `1..=K` holds entries
/// for targets `l` in `0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMatrix {
    rows: Vec<Vec<f64>>,
}

impl TriMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::RowShape {
                    level: i + 1,
                    expected: i + 1,
                    got: row.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn levels(&self) -> usize {
        self.rows.len()
    }

    /// Entry `q(k, l)`, `1 <= k <= K`, `0 <= l < k`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.rows[k - 1][l]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k - 1]
    }

    /// `sum_{j < k} q(k, j)`: the total improvement mass of level `k`.
    pub fn row_mass(&self, k: usize) -> f64 {
        compensated_total(self.row(k))
    }

    /// `sum_{j <= l} q(k, j)`.
    pub fn prefix_mass(&self, k: usize, l: usize) -> f64 {
        compensated_total(&self.row(k)[..=l])
    }

    /// All prefix masses at once: entry `[k-1][l]` equals
    /// `prefix_mass(k, l)` bit for bit, at O(1) lookup cost.
    pub(crate) fn prefix_table(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut acc = CompensatedSum::new();
                row.iter()
                    .map(|&v| {
                        acc.add(v);
                        acc.value()
                    })
                    .collect()
            })
            .collect()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Lower-triangular ratio matrix: row `k` in `1..=K` holds entries for
/// targets `l` in `1..k` (the `l = 0` column is determined by the row's
/// normalization and is never used by the recursions).
#[derive(Debug, Clone, PartialEq)]
pub struct RatioMatrix {
    rows: Vec<Vec<f64>>,
}

impl RatioMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i {
                return Err(Error::RowShape {
                    level: i + 1,
                    expected: i,
                    got: row.len(),
                });
            }
        }
        Ok(Self { rows })
    }

    pub fn levels(&self) -> usize {
        self.rows.len()
    }

    /// Entry `r(k, l)`, `1 <= l < k <= K`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.rows[k - 1][l - 1]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k - 1]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// A fitness-level transition model.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelModel {
    label: String,
    kind: ModelKind,
    q_lo: TriMatrix,
    q_hi: TriMatrix,
    ratio_lo: Option<RatioMatrix>,
    ratio_hi: Option<RatioMatrix>,
}

impl LevelModel {
    /// Builds and validates a model. All type invariants are checked here;
    /// every other constructor funnels through this one.
    pub fn new(
        label: impl Into<String>,
        kind: ModelKind,
        q_lo: TriMatrix,
        q_hi: TriMatrix,
        ratios: Option<(RatioMatrix, RatioMatrix)>,
    ) -> Result<Self> {
        let (ratio_lo, ratio_hi) = match ratios {
            Some((lo, hi)) => (Some(lo), Some(hi)),
            None => (None, None),
        };
        let model = Self {
            label: label.into(),
            kind,
            q_lo,
            q_hi,
            ratio_lo,
            ratio_hi,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let k_levels = self.q_lo.levels();
        if k_levels == 0 {
            return Err(Error::InvalidParameter(
                "a model needs at least one non-optimal level".into(),
            ));
        }
        if self.q_hi.levels() != k_levels {
            return Err(Error::DimensionMismatch {
                expected: k_levels,
                got: self.q_hi.levels(),
            });
        }

        for k in 1..=k_levels {
            for l in 0..k {
                let lo = self.q_lo.get(k, l);
                let hi = self.q_hi.get(k, l);
                if !lo.is_finite() || !hi.is_finite() {
                    return Err(Error::NonFiniteEntry {
                        level: k,
                        target: l,
                    });
                }
                if lo < 0.0 || lo > hi || hi > 1.0 {
                    return Err(Error::ProbabilityOrder {
                        level: k,
                        target: l,
                        lo,
                        hi,
                    });
                }
                if self.kind == ModelKind::Exact && lo != hi {
                    return Err(Error::ExactBoundsDiffer {
                        level: k,
                        target: l,
                    });
                }
            }
            let lo_mass = self.q_lo.row_mass(k);
            if lo_mass > 1.0 + NORMALIZATION_TOLERANCE {
                return Err(Error::RowMassExceedsOne {
                    level: k,
                    sum: lo_mass,
                });
            }
            if self.q_hi.row_mass(k) <= 0.0 {
                return Err(Error::NoImprovementMass { level: k });
            }
        }

        match (&self.ratio_lo, &self.ratio_hi) {
            (None, None) => {}
            (Some(lo), Some(hi)) => self.validate_ratios(lo, hi)?,
            _ => return Err(Error::RatioPairIncomplete),
        }
        Ok(())
    }

    fn validate_ratios(&self, lo: &RatioMatrix, hi: &RatioMatrix) -> Result<()> {
        let k_levels = self.levels();
        if lo.levels() != k_levels || hi.levels() != k_levels {
            return Err(Error::DimensionMismatch {
                expected: k_levels,
                got: lo.levels().min(hi.levels()),
            });
        }
        for k in 1..=k_levels {
            for l in 1..k {
                let rl = lo.get(k, l);
                let rh = hi.get(k, l);
                if !rl.is_finite() || !rh.is_finite() {
                    return Err(Error::NonFiniteEntry {
                        level: k,
                        target: l,
                    });
                }
                if rl < 0.0 || rl > rh || rh > 1.0 {
                    return Err(Error::ProbabilityOrder {
                        level: k,
                        target: l,
                        lo: rl,
                        hi: rh,
                    });
                }
                if self.kind == ModelKind::Exact && rl != rh {
                    return Err(Error::ExactBoundsDiffer {
                        level: k,
                        target: l,
                    });
                }
            }

            // The stored rows start at l = 1; fold in the implied l = 0
            // column before checking that the row brackets a distribution.
            let hi_mass = self.q_hi.row_mass(k);
            let lo_mass = self.q_lo.row_mass(k);
            let mut sum_lo = compensated_total(lo.row(k));
            let mut sum_hi = compensated_total(hi.row(k));
            match self.kind {
                ModelKind::Exact => {
                    sum_lo += self.q_lo.get(k, 0) / hi_mass;
                    sum_hi = sum_lo;
                    if (sum_lo - 1.0).abs() > NORMALIZATION_TOLERANCE {
                        return Err(Error::RatioSum {
                            level: k,
                            sum_lo,
                            sum_hi,
                        });
                    }
                }
                ModelKind::Bounded => {
                    sum_lo += self.q_lo.get(k, 0) / hi_mass;
                    if lo_mass > 0.0 {
                        sum_hi += (self.q_hi.get(k, 0) / lo_mass).min(1.0);
                        if sum_hi < 1.0 - NORMALIZATION_TOLERANCE {
                            return Err(Error::RatioSum {
                                level: k,
                                sum_lo,
                                sum_hi,
                            });
                        }
                    }
                    if sum_lo > 1.0 + NORMALIZATION_TOLERANCE {
                        return Err(Error::RatioSum {
                            level: k,
                            sum_lo,
                            sum_hi,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of non-optimal levels `K`.
    pub fn levels(&self) -> usize {
        self.q_lo.levels()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn is_exact(&self) -> bool {
        self.kind == ModelKind::Exact
    }

    pub fn q_lo(&self) -> &TriMatrix {
        &self.q_lo
    }

    pub fn q_hi(&self) -> &TriMatrix {
        &self.q_hi
    }

    pub fn has_ratios(&self) -> bool {
        self.ratio_lo.is_some()
    }

    pub fn ratio_lo(&self) -> Option<&RatioMatrix> {
        self.ratio_lo.as_ref()
    }

    pub fn ratio_hi(&self) -> Option<&RatioMatrix> {
        self.ratio_hi.as_ref()
    }
}

/// Derives the conditional-ratio matrices for a model that lacks them.
///
/// Exact models get `r(k, l) = q(k, l) / sum_j q(k, j)`. Bounded models get
/// the conservative interval built from opposite-side bounds,
/// `r_lo = q_lo / sum q_hi` and `r_hi = min(1, q_hi / sum q_lo)`; a bounded
/// level whose lower improvement mass is zero has no finite ratio upper
/// bound and is reported as an error.
pub fn derive_ratios(model: &LevelModel) -> Result<LevelModel> {
    if model.has_ratios() {
        return Err(Error::RatiosAlreadyPresent);
    }
    let (lo, hi) = derive_ratio_matrices(model)?;
    LevelModel::new(
        model.label.clone(),
        model.kind,
        model.q_lo.clone(),
        model.q_hi.clone(),
        Some((lo, hi)),
    )
}

/// Ratio derivation without re-wrapping the model; used internally by the
/// bound computations when a model has no stored ratios.
pub(crate) fn derive_ratio_matrices(model: &LevelModel) -> Result<(RatioMatrix, RatioMatrix)> {
    let k_levels = model.levels();
    let mut lo_rows = Vec::with_capacity(k_levels);
    let mut hi_rows = Vec::with_capacity(k_levels);
    for k in 1..=k_levels {
        let hi_mass = model.q_hi.row_mass(k);
        let lo_mass = model.q_lo.row_mass(k);
        let mut lo_row = Vec::with_capacity(k - 1);
        let mut hi_row = Vec::with_capacity(k - 1);
        match model.kind {
            ModelKind::Exact => {
                for l in 1..k {
                    let r = model.q_lo.get(k, l) / hi_mass;
                    lo_row.push(r);
                    hi_row.push(r);
                }
            }
            ModelKind::Bounded => {
                if lo_mass <= 0.0 {
                    return Err(Error::RatioUndefined { level: k });
                }
                for l in 1..k {
                    lo_row.push(model.q_lo.get(k, l) / hi_mass);
                    hi_row.push((model.q_hi.get(k, l) / lo_mass).min(1.0));
                }
            }
        }
        lo_rows.push(lo_row);
        hi_rows.push(hi_row);
    }
    Ok((
        RatioMatrix::from_rows(lo_rows)?,
        RatioMatrix::from_rows(hi_rows)?,
    ))
}

/// Initial distribution over levels `0..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct StartDistribution {
    weights: Vec<f64>,
}

impl StartDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter(
                "start distribution needs at least the optimal level".into(),
            ));
        }
        for (k, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "start weight for level {k} is {w}; weights must be non-negative"
                )));
            }
        }
        let sum = compensated_total(&weights);
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::StartNotNormalized { sum });
        }
        Ok(Self { weights })
    }

    /// Point mass on a single level.
    pub fn point(levels: usize, level: usize) -> Result<Self> {
        if level > levels {
            return Err(Error::StartLevelOutOfRange { level, levels });
        }
        let mut weights = vec![0.0; levels + 1];
        weights[level] = 1.0;
        Self::new(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight on level `k`, `0 <= k <= K`.
    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn levels(&self) -> usize {
        self.weights.len() - 1
    }
}

fn check_generator_length(n: usize, minimum: usize, what: &str) -> Result<()> {
    if n < minimum {
        return Err(Error::InvalidParameter(format!(
            "{what} requires n >= {minimum}, got {n}"
        )));
    }
    if n > MAX_GENERATOR_BITS {
        return Err(Error::InvalidParameter(format!(
            "{what} caps n at {MAX_GENERATOR_BITS}, got {n}"
        )));
    }
    Ok(())
}

/// Exact level model of the (1+1) EA maximizing the one-bit-counting
/// function on `n` bits.
///
/// Level `k` holds the strings with `k` zero bits, so `K = n` and level 0 is
/// the all-ones optimum. Every strict level improvement is accepted by
/// elitist selection, hence `q(k, l)` is the plain mutation kernel between
/// the corresponding weight classes.
pub fn onemax_model(n: usize) -> Result<LevelModel> {
    check_generator_length(n, 2, "onemax_model")?;
    let kernel = MutationKernel::new(n)?;
    let mut rows = Vec::with_capacity(n);
    for k in 1..=n {
        let from = n - k;
        let row: Vec<f64> = (0..k).map(|l| kernel.transition(from, n - l)).collect();
        rows.push(row);
    }
    let q = TriMatrix::from_rows(rows)?;
    LevelModel::new(
        format!("onemax(n={n})"),
        ModelKind::Exact,
        q.clone(),
        q,
        None,
    )
}

/// Hamming weights belonging to each level of the two-peak landscape on `n`
/// bits: level 0 holds both optima (weights 0 and `n`), levels `1..=n/2`
/// hold the weights `n-1` down to `n/2`, and levels `n/2+1..=n-1` hold the
/// deceptive branch weights `1..=n/2-1` in increasing distance from its
/// local tip.
pub fn twomax1_level_weights(n: usize, k: usize) -> Vec<usize> {
    if k == 0 {
        vec![0, n]
    } else if k <= n / 2 {
        vec![n - k]
    } else {
        vec![k - n / 2]
    }
}

/// Exact level model of the (1+1) EA maximizing the two-peak variant with a
/// deceptive branch (`n` even). `K = n - 1`.
pub fn twomax1_model(n: usize) -> Result<LevelModel> {
    check_generator_length(n, 4, "twomax1_model")?;
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "twomax1_model requires even n, got {n}"
        )));
    }
    let kernel = MutationKernel::new(n)?;
    let k_levels = n - 1;
    let mut rows = Vec::with_capacity(k_levels);
    for k in 1..=k_levels {
        let from = twomax1_level_weights(n, k)[0];
        let mut row = Vec::with_capacity(k);
        for l in 0..k {
            let mut acc = CompensatedSum::new();
            for w in twomax1_level_weights(n, l) {
                acc.add(kernel.transition(from, w));
            }
            row.push(acc.value().min(1.0));
        }
        rows.push(row);
    }
    let q = TriMatrix::from_rows(rows)?;
    LevelModel::new(
        format!("twomax1(n={n})"),
        ModelKind::Exact,
        q.clone(),
        q,
        None,
    )
}

// ---------------------------------------------------------------------------
// File format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelFile {
    label: String,
    #[serde(rename = "K")]
    k: usize,
    kind: ModelKind,
    q_lo: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_hi: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_lo: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_hi: Option<Vec<Vec<f64>>>,
}

/// Parses a model from its JSON representation.
///
/// The object carries `label`, `K`, `kind` (`"exact"` or `"bounded"`),
/// `q_lo`/`q_hi` as arrays of `K` rows (row `k-1` has `k` entries for
/// targets `0..k`), and optionally `r_lo`/`r_hi` (row `k-1` has `k-1`
/// entries for targets `1..k`). `q_hi` may be omitted for exact models.
pub fn model_from_json(text: &str) -> Result<LevelModel> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.q_lo.len() != file.k {
        return Err(Error::DimensionMismatch {
            expected: file.k,
            got: file.q_lo.len(),
        });
    }
    let q_lo = TriMatrix::from_rows(file.q_lo)?;
    let q_hi = match file.q_hi {
        Some(rows) => {
            if rows.len() != file.k {
                return Err(Error::DimensionMismatch {
                    expected: file.k,
                    got: rows.len(),
                });
            }
            TriMatrix::from_rows(rows)?
        }
        None => {
            if file.kind == ModelKind::Bounded {
                return Err(Error::InvalidParameter(
                    "bounded models must supply q_hi".into(),
                ));
            }
            q_lo.clone()
        }
    };
    let ratios = match (file.r_lo, file.r_hi) {
        (None, None) => None,
        (Some(lo), Some(hi)) => Some((RatioMatrix::from_rows(lo)?, RatioMatrix::from_rows(hi)?)),
        _ => return Err(Error::RatioPairIncomplete),
    };
    LevelModel::new(file.label, file.kind, q_lo, q_hi, ratios)
}

/// Serializes a model to the JSON schema accepted by [`model_from_json`].
pub fn model_to_json(model: &LevelModel) -> String {
    let file = ModelFile {
        label: model.label.clone(),
        k: model.levels(),
        kind: model.kind,
        q_lo: model.q_lo.rows().to_vec(),
        q_hi: match model.kind {
            ModelKind::Exact => None,
            ModelKind::Bounded => Some(model.q_hi.rows().to_vec()),
        },
        r_lo: model.ratio_lo.as_ref().map(|m| m.rows().to_vec()),
        r_hi: model.ratio_hi.as_ref().map(|m| m.rows().to_vec()),
    };
    serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
}

/// Loads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<LevelModel> {
    let text = std::fs::read_to_string(path)?;
    model_from_json(&text)
}

/// Writes a model to disk in the JSON schema.
pub fn save_model(model: &LevelModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_json(model))?;
    Ok(())
}
