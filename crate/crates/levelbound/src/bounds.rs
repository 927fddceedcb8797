//! Hitting-time bound computations on a fitness-level model.
//!
//! For an elitist algorithm with level transition probabilities
//! `q(k, l)` the mean number of generations to reach the optimal level
//! satisfies the first-step recursion
//!
//! ```text
//! m_k = (1 + sum_{l=1}^{k-1} q(k,l) m_l) / sum_{l<k} q(k,l)
//! ```
//!
//! which [`exact_hitting_time`] solves by forward substitution. When only
//! interval data is available the same recursion run on the adversarial
//! interval sides yields the tightest lower and upper *metric bounds*
//! ([`metric_bound`]). Linear bounds rewrite the metric recursion as
//!
//! ```text
//! d_k = 1 / p_k + sum_{l=1}^{k-1} c_{k,l} / p_l
//! ```
//!
//! with `p_l` the improvement mass of level `l` and coefficients
//! `c_{k,l} in [0,1]`; the available coefficient schemes
//! ([`Scheme`]) range from the trivial all-zero / all-one choices through a
//! single scalar, a per-target-level vector, the full recursive triangle,
//! and two explicit closed forms (aggregated product and path sum).
//!
//! Every vector emitted by this module is certified before it is returned:
//! a lower bound must have per-level drift at most 1 and an upper bound at
//! least 1 ([`verify_drift`]), evaluating intervals adversarially for
//! bounded models. A vector that fails its certificate is never returned;
//! the operation reports [`Error::CertificationFailed`] instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{derive_ratio_matrices, LevelModel, RatioMatrix, StartDistribution};
use crate::sum::CompensatedSum;

/// Tolerance for the drift certificates: lower bounds need
/// `drift <= 1 + DRIFT_TOLERANCE`, upper bounds `drift >= 1 - DRIFT_TOLERANCE`.
pub const DRIFT_TOLERANCE: f64 = 1e-9;

/// Largest level count for which path-sum coefficients are evaluated; the
/// number of summands grows combinatorially with the level gap, so the
/// scheme exists only as a small-instance oracle.
pub const PATH_SUM_MAX_LEVELS: usize = 12;

/// Which side of the hitting time a bound sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Lower,
    Upper,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Lower => "lower",
            Direction::Upper => "upper",
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coefficient scheme for a linear bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// All cross-level coefficients zero; the waiting time of the start
    /// level alone. Lower bounds only.
    Zero,
    /// All cross-level coefficients one; the sum of per-level waiting
    /// times. Upper bounds only.
    One,
    /// One scalar coefficient, the extreme of `q(k,l) / sum_{j<=l} q(k,j)`
    /// over all level pairs.
    Viscosity,
    /// One coefficient per target level, extremized over source levels
    /// only; bounds the probability of ever visiting the target.
    VisitProbability,
    /// The full lower-triangular coefficient set from the equality
    /// recursion; the tightest linear scheme.
    Full,
    /// Explicit product form over aggregated targets. Lower bounds only.
    Product,
    /// Explicit sum over all decreasing index paths; combinatorial cost,
    /// capped at [`PATH_SUM_MAX_LEVELS`] levels.
    PathSum,
}

impl Scheme {
    pub const ALL: [Scheme; 7] = [
        Scheme::Zero,
        Scheme::One,
        Scheme::Viscosity,
        Scheme::VisitProbability,
        Scheme::Full,
        Scheme::Product,
        Scheme::PathSum,
    ];

    /// Name used by the command-line interface and report columns.
    pub fn cli_name(self) -> &'static str {
        match self {
            Scheme::Zero => "type0",
            Scheme::One => "type1",
            Scheme::Viscosity => "c",
            Scheme::VisitProbability => "cl",
            Scheme::Full => "ckl",
            Scheme::Product => "product",
            Scheme::PathSum => "pathsum",
        }
    }

    pub fn from_cli_name(name: &str) -> Option<Scheme> {
        Scheme::ALL.iter().copied().find(|s| s.cli_name() == name)
    }

    pub fn supports(self, direction: Direction) -> bool {
        match self {
            Scheme::Zero => direction == Direction::Lower,
            Scheme::One => direction == Direction::Upper,
            Scheme::Product => direction == Direction::Lower,
            _ => true,
        }
    }

    fn require(self, direction: Direction) -> Result<()> {
        if self.supports(direction) {
            Ok(())
        } else {
            Err(Error::SchemeDirection {
                scheme: self.cli_name(),
                direction,
            })
        }
    }
}

/// What produced a bound vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    /// Exact level-chain hitting time (exact models only).
    Exact,
    /// Metric recursion at equality.
    Metric,
    /// Linear bound under the named coefficient scheme.
    Linear(Scheme),
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Metric => "metric",
            Provenance::Linear(scheme) => scheme.cli_name(),
        }
    }
}

/// Distances `d_1..d_K` (in generations) bounding the hitting time per
/// start level, certified by drift at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundVector {
    distances: Vec<f64>,
    direction: Direction,
    provenance: Provenance,
    label: String,
}

impl BoundVector {
    pub fn levels(&self) -> usize {
        self.distances.len()
    }

    /// Distance for start level `k`, `1 <= k <= K`.
    pub fn level(&self, k: usize) -> f64 {
        self.distances[k - 1]
    }

    pub fn final_level(&self) -> f64 {
        *self.distances.last().expect("bound vectors are non-empty")
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// A copy with every distance scaled; the result is *not* certified.
    /// Useful for probing how far a certificate can be pushed.
    pub fn scaled(&self, factor: f64) -> BoundVector {
        BoundVector {
            distances: self.distances.iter().map(|d| d * factor).collect(),
            ..self.clone()
        }
    }
}

/// Per-level drift of a candidate bound vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub direction: Direction,
    pub tolerance: f64,
    pub levels: Vec<DriftEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftEntry {
    pub level: usize,
    pub drift: f64,
    pub pass: bool,
}

impl DriftReport {
    pub fn pass(&self) -> bool {
        self.levels.iter().all(|e| e.pass)
    }

    pub fn first_failure(&self) -> Option<&DriftEntry> {
        self.levels.iter().find(|e| !e.pass)
    }
}

/// Coefficients backing a linear bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub form: CoefficientForm,
    pub direction: Direction,
    /// Number of entries clamped into `[0, 1]`; zero on exact level-based
    /// models.
    pub clamp_events: usize,
    /// Level pairs skipped because their denominator mass was zero.
    pub flagged: Vec<(usize, usize)>,
    /// Number of scalar/per-level coefficients that had to be tightened to
    /// the slack-aware certified value on a bounded model; zero on exact
    /// models, where the plain conditional-entry ratio always certifies.
    pub conservative_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientForm {
    Scalar(f64),
    /// One coefficient per target level `1..K`; entry `l-1` belongs to
    /// target `l`.
    PerLevel(Vec<f64>),
    /// Row `k-1` holds coefficients for targets `1..k`, as in
    /// [`RatioMatrix`].
    Full(Vec<Vec<f64>>),
}

impl CoefficientSet {
    /// Coefficient applied to the pair `(k, l)`, `1 <= l < k`.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        match &self.form {
            CoefficientForm::Scalar(c) => *c,
            CoefficientForm::PerLevel(per) => per[l - 1],
            CoefficientForm::Full(rows) => rows[k - 1][l - 1],
        }
    }

    /// The scalar value, for schemes that produce one.
    pub fn scalar(&self) -> Option<f64> {
        match self.form {
            CoefficientForm::Scalar(c) => Some(c),
            _ => None,
        }
    }
}

/// Level pairs whose conditional entry probability falls below a threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortcutReport {
    pub epsilon: f64,
    pub entries: Vec<ShortcutEntry>,
    /// Pairs excluded because `sum_{j<=l} q_lo(k,j)` was zero.
    pub zero_denominator_pairs: usize,
    /// Pairs excluded because `q_hi(k,l)` itself was zero; with no mass at
    /// all there is no transition to skip.
    pub zero_numerator_pairs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortcutEntry {
    pub level_from: usize,
    pub target: usize,
    pub ratio: f64,
}

impl ShortcutReport {
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.entries
            .iter()
            .map(|e| (e.level_from, e.target))
            .collect()
    }

    pub fn contains(&self, level_from: usize, target: usize) -> bool {
        self.entries
            .iter()
            .any(|e| e.level_from == level_from && e.target == target)
    }
}

/// Every bound the module can compute for one model, for side-by-side
/// reporting.
#[derive(Debug, Clone)]
pub struct SchemeComparison {
    pub label: String,
    pub levels: usize,
    /// Present for exact models only.
    pub exact: Option<BoundVector>,
    /// Metric bounds and all legal linear scheme/direction pairs.
    pub bounds: Vec<BoundVector>,
}

impl SchemeComparison {
    pub fn find(&self, provenance: Provenance, direction: Direction) -> Option<&BoundVector> {
        self.bounds
            .iter()
            .find(|b| b.provenance() == provenance && b.direction() == direction)
    }

    pub fn linear(&self, scheme: Scheme, direction: Direction) -> Option<&BoundVector> {
        self.find(Provenance::Linear(scheme), direction)
    }
}

// ---------------------------------------------------------------------------
// Internal helpers
// ---------------------------------------------------------------------------

/// Improvement masses `p_k = sum_{l<k} q(k,l)` for the side of the interval
/// that the given direction must use, checked to be positive.
fn improvement_masses(model: &LevelModel, direction: Direction) -> Result<Vec<f64>> {
    let matrix = match direction {
        Direction::Lower => model.q_hi(),
        Direction::Upper => model.q_lo(),
    };
    let mut masses = Vec::with_capacity(model.levels());
    for k in 1..=model.levels() {
        let mass = matrix.row_mass(k);
        if mass <= 0.0 {
            // q_hi masses are positive by the model invariants, so this can
            // only fire for the q_lo side of a bounded model.
            return Err(Error::RatioUndefined { level: k });
        }
        masses.push(mass);
    }
    Ok(masses)
}

fn ratio_matrices(model: &LevelModel) -> Result<(RatioMatrix, RatioMatrix)> {
    match (model.ratio_lo(), model.ratio_hi()) {
        (Some(lo), Some(hi)) => Ok((lo.clone(), hi.clone())),
        _ => derive_ratio_matrices(model),
    }
}

fn certify(model: &LevelModel, bound: &BoundVector) -> Result<()> {
    let report = verify_drift(model, bound)?;
    if let Some(fail) = report.first_failure() {
        return Err(Error::CertificationFailed {
            direction: bound.direction,
            level: fail.level,
            drift: fail.drift,
        });
    }
    // Exact hitting times double as both bounds; check the other side too.
    if bound.provenance == Provenance::Exact {
        let flipped = BoundVector {
            direction: Direction::Upper,
            ..bound.clone()
        };
        let report = verify_drift(model, &flipped)?;
        if let Some(fail) = report.first_failure() {
            return Err(Error::CertificationFailed {
                direction: Direction::Upper,
                level: fail.level,
                drift: fail.drift,
            });
        }
    }
    for (i, &d) in bound.distances.iter().enumerate() {
        if !d.is_finite() || d <= 0.0 {
            return Err(Error::CertificationFailed {
                direction: bound.direction,
                level: i + 1,
                drift: d,
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Exact mean hitting time of the level chain of an exact model, by forward
/// substitution in ascending level order.
pub fn exact_hitting_time(model: &LevelModel) -> Result<BoundVector> {
    if !model.is_exact() {
        return Err(Error::ExactModelRequired);
    }
    let q = model.q_lo();
    let mut times = Vec::with_capacity(model.levels());
    for k in 1..=model.levels() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0);
        for l in 1..k {
            acc.add(q.get(k, l) * times[l - 1]);
        }
        times.push(acc.value() / q.row_mass(k));
    }
    let bound = BoundVector {
        distances: times,
        direction: Direction::Lower,
        provenance: Provenance::Exact,
        label: model.label().to_string(),
    };
    certify(model, &bound)?;
    Ok(bound)
}

/// Tightest bound expressible from the level data alone: the waiting-time
/// recursion with conditional ratios, run at equality. For exact models
/// both directions coincide with [`exact_hitting_time`].
pub fn metric_bound(model: &LevelModel, direction: Direction) -> Result<BoundVector> {
    let masses = improvement_masses(model, direction)?;
    let (ratio_lo, ratio_hi) = ratio_matrices(model)?;
    let ratios = match direction {
        Direction::Lower => &ratio_lo,
        Direction::Upper => &ratio_hi,
    };
    let mut distances = Vec::with_capacity(model.levels());
    for k in 1..=model.levels() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0 / masses[k - 1]);
        for l in 1..k {
            acc.add(ratios.get(k, l) * distances[l - 1]);
        }
        distances.push(acc.value());
    }
    let bound = BoundVector {
        distances,
        direction,
        provenance: Provenance::Metric,
        label: model.label().to_string(),
    };
    certify(model, &bound)?;
    Ok(bound)
}

/// Per-pair data for the scalar and per-level coefficient schemes.
///
/// `spec_ratio` is the plain conditional-entry ratio
/// `q(k,l) / sum_{j<=l} q(k,j)` on the conservative interval sides. The
/// drift certificate of the assembled bound additionally charges the
/// interval slack of the levels between `l` and `k`, which the
/// slack-aware denominator
///
/// ```text
/// Lower:  D(k,l) = sum_{j<k} q_hi(k,j) - sum_{j=l+1}^{k-1} q_lo(k,j)
/// Upper:  D(k,l) = sum_{j<k} q_lo(k,j) - sum_{j=l+1}^{k-1} q_hi(k,j)
/// ```
///
/// accounts for; on exact models it coincides with the prefix mass. A
/// scalar (or per-level) coefficient `c` certifies exactly when
/// `c * D(k,l) <= q_lo(k,l)` for lower bounds (mirrored for upper) at
/// every pair, so when the spec ratio breaks that condition on a bounded
/// model the scheme falls back to extremizing `numerator / D`.
struct PairTables<'a> {
    direction: Direction,
    numerator: &'a crate::model::TriMatrix,
    spec_prefix: Vec<Vec<f64>>,
    slack_denominator: Vec<Vec<f64>>,
}

impl<'a> PairTables<'a> {
    fn new(model: &'a LevelModel, direction: Direction) -> Self {
        let (numer_matrix, spec_matrix, other_matrix) = match direction {
            Direction::Lower => (model.q_lo(), model.q_hi(), model.q_lo()),
            Direction::Upper => (model.q_hi(), model.q_lo(), model.q_hi()),
        };
        let spec_prefix = spec_matrix.prefix_table();
        let other_prefix = other_matrix.prefix_table();
        let slack_denominator = (1..=model.levels())
            .map(|k| {
                // spec-side row mass minus the other side's mass above l:
                // (spec_mass - other_mass) + other_prefix(k, l).
                let spec_mass = spec_prefix[k - 1][k - 1];
                let other_mass = other_prefix[k - 1][k - 1];
                (0..k)
                    .map(|l| (spec_mass - other_mass) + other_prefix[k - 1][l])
                    .collect()
            })
            .collect();
        Self {
            direction,
            numerator: numer_matrix,
            spec_prefix,
            slack_denominator,
        }
    }

    /// Spec ratio, `None` when the prefix mass is zero (flagged pairs).
    fn spec_ratio(&self, k: usize, l: usize) -> Option<f64> {
        let denom = self.spec_prefix[k - 1][l];
        (denom > 0.0).then(|| self.numerator.get(k, l) / denom)
    }

    /// Whether coefficient `c` satisfies the pair's certificate condition,
    /// with one-ulp headroom so exact binding pairs never trip it.
    fn certifies(&self, c: f64, k: usize, l: usize) -> bool {
        let slack = self.slack_denominator[k - 1][l];
        let numer = self.numerator.get(k, l);
        match self.direction {
            Direction::Lower => c * slack <= numer * (1.0 + 1e-12),
            // A non-positive slack denominator cannot be repaired by any
            // coefficient; leave it to the final drift certificate.
            Direction::Upper => slack <= 0.0 || c * slack >= numer * (1.0 - 1e-12),
        }
    }

    /// Slack-aware ratio used by the fallback extremization.
    fn certified_ratio(&self, k: usize, l: usize) -> Option<f64> {
        let slack = self.slack_denominator[k - 1][l];
        (slack > 0.0).then(|| self.numerator.get(k, l) / slack)
    }
}

/// Extremizes `ratio` over the given pairs (min for lower, max for upper).
fn extremize(direction: Direction, pairs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut extreme: Option<f64> = None;
    for ratio in pairs.flatten() {
        extreme = Some(match (extreme, direction) {
            (None, _) => ratio,
            (Some(e), Direction::Lower) => e.min(ratio),
            (Some(e), Direction::Upper) => e.max(ratio),
        });
    }
    extreme
}

/// Computes the coefficients for a scheme/direction pair.
pub fn scheme_coefficients(
    model: &LevelModel,
    scheme: Scheme,
    direction: Direction,
) -> Result<CoefficientSet> {
    scheme.require(direction)?;
    let k_levels = model.levels();
    let mut clamp_events = 0usize;
    let mut conservative_fallbacks = 0usize;
    let mut flagged = Vec::new();

    let form = match scheme {
        Scheme::Zero => CoefficientForm::Scalar(0.0),
        Scheme::One => CoefficientForm::Scalar(1.0),
        Scheme::Viscosity => {
            let tables = PairTables::new(model, direction);
            let all_pairs = || (2..=k_levels).flat_map(|k| (1..k).map(move |l| (k, l)));
            for (k, l) in all_pairs() {
                if tables.spec_ratio(k, l).is_none() {
                    flagged.push((k, l));
                }
            }
            let default = match direction {
                Direction::Lower => 0.0,
                Direction::Upper => 1.0,
            };
            let mut c = extremize(direction, all_pairs().map(|(k, l)| tables.spec_ratio(k, l)))
                .unwrap_or(default);
            if all_pairs().any(|(k, l)| !tables.certifies(c, k, l)) {
                c = extremize(
                    direction,
                    all_pairs().map(|(k, l)| tables.certified_ratio(k, l)),
                )
                .unwrap_or(default);
                conservative_fallbacks += 1;
            }
            if c > 1.0 {
                c = 1.0;
                clamp_events += 1;
            }
            CoefficientForm::Scalar(c)
        }
        Scheme::VisitProbability => {
            let tables = PairTables::new(model, direction);
            let mut per = Vec::with_capacity(k_levels.saturating_sub(1));
            for l in 1..k_levels {
                let sources = || (l + 1)..=k_levels;
                for k in sources() {
                    if tables.spec_ratio(k, l).is_none() {
                        flagged.push((k, l));
                    }
                }
                let default = match direction {
                    Direction::Lower => 0.0,
                    Direction::Upper => 1.0,
                };
                let mut c = extremize(direction, sources().map(|k| tables.spec_ratio(k, l)))
                    .unwrap_or(default);
                if sources().any(|k| !tables.certifies(c, k, l)) {
                    c = extremize(direction, sources().map(|k| tables.certified_ratio(k, l)))
                        .unwrap_or(default);
                    conservative_fallbacks += 1;
                }
                if c > 1.0 {
                    c = 1.0;
                    clamp_events += 1;
                }
                per.push(c);
            }
            CoefficientForm::PerLevel(per)
        }
        Scheme::Full => {
            let (ratio_lo, ratio_hi) = ratio_matrices(model)?;
            let ratios = match direction {
                Direction::Lower => &ratio_lo,
                Direction::Upper => &ratio_hi,
            };
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k_levels);
            for k in 1..=k_levels {
                let mut row = Vec::with_capacity(k - 1);
                for l in 1..k {
                    let mut acc = CompensatedSum::new();
                    acc.add(ratios.get(k, l));
                    for j in (l + 1)..k {
                        acc.add(ratios.get(k, j) * rows[j - 1][l - 1]);
                    }
                    let mut c = acc.value();
                    if c > 1.0 {
                        c = 1.0;
                        clamp_events += 1;
                    }
                    row.push(c);
                }
                rows.push(row);
            }
            CoefficientForm::Full(rows)
        }
        Scheme::Product => {
            // c_{k,l} = prod_{i=l+1..k} r over the aggregated target
            // S_[l, i-1], with the conservative interval sides. For fixed
            // l the product extends by one factor per source level, so the
            // whole triangle costs O(K^2) with prefix tables.
            let lo_prefix = model.q_lo().prefix_table();
            let hi_prefix = model.q_hi().prefix_table();
            let mut rows: Vec<Vec<f64>> =
                (1..=k_levels).map(|k| Vec::with_capacity(k - 1)).collect();
            for l in 1..k_levels {
                let mut product = 1.0;
                for k in (l + 1)..=k_levels {
                    let aggregated = (lo_prefix[k - 1][k - 1] - lo_prefix[k - 1][l - 1]).max(0.0);
                    product *= aggregated / hi_prefix[k - 1][k - 1];
                    let mut c = product;
                    if c > 1.0 {
                        c = 1.0;
                        clamp_events += 1;
                    }
                    rows[k - 1].push(c);
                }
            }
            CoefficientForm::Full(rows)
        }
        Scheme::PathSum => {
            if k_levels > PATH_SUM_MAX_LEVELS {
                return Err(Error::PathSumLevelCap { levels: k_levels });
            }
            let (ratio_lo, ratio_hi) = ratio_matrices(model)?;
            let ratios = match direction {
                Direction::Lower => &ratio_lo,
                Direction::Upper => &ratio_hi,
            };
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k_levels);
            for k in 1..=k_levels {
                let mut row = Vec::with_capacity(k - 1);
                for l in 1..k {
                    let mut c = path_sum(ratios, k, l);
                    if c > 1.0 {
                        c = 1.0;
                        clamp_events += 1;
                    }
                    row.push(c);
                }
                rows.push(row);
            }
            CoefficientForm::Full(rows)
        }
    };

    flagged.sort_unstable();
    flagged.dedup();
    Ok(CoefficientSet {
        form,
        direction,
        clamp_events,
        flagged,
        conservative_fallbacks,
    })
}

/// Sum over every strictly decreasing index path from `k` to `l` of the
/// product of ratios along the path.
pub(crate) fn path_sum(ratios: &RatioMatrix, k: usize, l: usize) -> f64 {
    fn descend(
        ratios: &RatioMatrix,
        from: usize,
        target: usize,
        weight: f64,
        acc: &mut CompensatedSum,
    ) {
        acc.add(weight * ratios.get(from, target));
        for mid in (target + 1)..from {
            descend(ratios, mid, target, weight * ratios.get(from, mid), acc);
        }
    }
    let mut acc = CompensatedSum::new();
    descend(ratios, k, l, 1.0, &mut acc);
    acc.value()
}

/// Linear bound `d_k = 1/p_k + sum_l c_{k,l} / p_l` for the given scheme.
pub fn linear_bound(
    model: &LevelModel,
    scheme: Scheme,
    direction: Direction,
) -> Result<BoundVector> {
    let coefficients = scheme_coefficients(model, scheme, direction)?;
    linear_bound_with(model, scheme, &coefficients)
}

/// Assembles a linear bound from an already-computed coefficient set.
pub fn linear_bound_with(
    model: &LevelModel,
    scheme: Scheme,
    coefficients: &CoefficientSet,
) -> Result<BoundVector> {
    let direction = coefficients.direction;
    let masses = improvement_masses(model, direction)?;
    let mut distances = Vec::with_capacity(model.levels());
    for k in 1..=model.levels() {
        let mut acc = CompensatedSum::new();
        acc.add(1.0 / masses[k - 1]);
        for l in 1..k {
            acc.add(coefficients.get(k, l) / masses[l - 1]);
        }
        distances.push(acc.value());
    }
    let bound = BoundVector {
        distances,
        direction,
        provenance: Provenance::Linear(scheme),
        label: model.label().to_string(),
    };
    certify(model, &bound)?;
    Ok(bound)
}

/// Evaluates the per-level drift of a candidate bound vector.
///
/// For level `k` the drift is `p_k d_k - sum_{l=1}^{k-1} q(k,l) d_l`. For
/// bounded models each term takes its adversarial interval side: a lower
/// certificate must survive `q_hi` on the positive term and `q_lo` on the
/// negative term, and an upper certificate the mirror image.
pub fn verify_drift(model: &LevelModel, bound: &BoundVector) -> Result<DriftReport> {
    if bound.levels() != model.levels() {
        return Err(Error::DimensionMismatch {
            expected: model.levels(),
            got: bound.levels(),
        });
    }
    let direction = bound.direction();
    let (positive, negative) = match direction {
        Direction::Lower => (model.q_hi(), model.q_lo()),
        Direction::Upper => (model.q_lo(), model.q_hi()),
    };
    let mut levels = Vec::with_capacity(model.levels());
    for k in 1..=model.levels() {
        let mut acc = CompensatedSum::new();
        acc.add(positive.row_mass(k) * bound.level(k));
        for l in 1..k {
            acc.add(-(negative.get(k, l) * bound.level(l)));
        }
        let drift = acc.value();
        let pass = match direction {
            Direction::Lower => drift <= 1.0 + DRIFT_TOLERANCE,
            Direction::Upper => drift >= 1.0 - DRIFT_TOLERANCE,
        };
        levels.push(DriftEntry {
            level: k,
            drift,
            pass,
        });
    }
    Ok(DriftReport {
        direction,
        tolerance: DRIFT_TOLERANCE,
        levels,
    })
}

/// Scans for level pairs `(k, l)` whose conditional entry probability
/// `q_hi(k,l) / sum_{j<=l} q_lo(k,j)` is positive but below `epsilon`:
/// levels the algorithm skips with probability close to one.
pub fn detect_shortcuts(model: &LevelModel, epsilon: f64) -> Result<ShortcutReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "shortcut threshold must lie in (0, 1), got {epsilon}"
        )));
    }
    let mut entries = Vec::new();
    let mut zero_denominator_pairs = 0usize;
    let mut zero_numerator_pairs = 0usize;
    let lo_prefix = model.q_lo().prefix_table();
    for k in 2..=model.levels() {
        // Entry l of the prefix row is sum_{j<=l} q_lo(k, j); the row has
        // k entries, so this covers exactly the targets 1..k.
        for (l, &denominator) in lo_prefix[k - 1].iter().enumerate().skip(1) {
            if denominator <= 0.0 {
                zero_denominator_pairs += 1;
                continue;
            }
            let numerator = model.q_hi().get(k, l);
            if numerator <= 0.0 {
                zero_numerator_pairs += 1;
                continue;
            }
            let ratio = numerator / denominator;
            if ratio < epsilon {
                entries.push(ShortcutEntry {
                    level_from: k,
                    target: l,
                    ratio,
                });
            }
        }
    }
    entries.sort_by_key(|e| (e.level_from, e.target));
    Ok(ShortcutReport {
        epsilon,
        entries,
        zero_denominator_pairs,
        zero_numerator_pairs,
    })
}

/// Expected bound under a random initial level: `sum_k start_k * d_k`,
/// with the optimal level contributing zero.
pub fn aggregate_start(bound: &BoundVector, start: &StartDistribution) -> Result<f64> {
    if start.levels() != bound.levels() {
        return Err(Error::DimensionMismatch {
            expected: bound.levels() + 1,
            got: start.levels() + 1,
        });
    }
    let mut acc = CompensatedSum::new();
    for k in 1..=bound.levels() {
        acc.add(start.weight(k) * bound.level(k));
    }
    Ok(acc.value())
}

/// Relative slack for the sandwich check in [`compare_schemes`]; float
/// noise at the equality points (full scheme versus exact) stays orders of
/// magnitude below this.
const SANDWICH_TOLERANCE: f64 = 1e-9;

/// Computes the exact hitting time (when available), both metric bounds,
/// and every legal scheme/direction pair, and checks that on exact models
/// all lower bounds sit at or below the exact values and all upper bounds
/// at or above.
pub fn compare_schemes(model: &LevelModel) -> Result<SchemeComparison> {
    let exact = if model.is_exact() {
        Some(exact_hitting_time(model)?)
    } else {
        None
    };
    let mut bounds = Vec::new();
    bounds.push(metric_bound(model, Direction::Lower)?);
    bounds.push(metric_bound(model, Direction::Upper)?);
    for scheme in Scheme::ALL {
        if scheme == Scheme::PathSum && model.levels() > PATH_SUM_MAX_LEVELS {
            continue;
        }
        for direction in [Direction::Lower, Direction::Upper] {
            if scheme.supports(direction) {
                bounds.push(linear_bound(model, scheme, direction)?);
            }
        }
    }

    if let Some(exact) = &exact {
        for bound in &bounds {
            for k in 1..=model.levels() {
                let e = exact.level(k);
                let d = bound.level(k);
                let ok = match bound.direction() {
                    Direction::Lower => d <= e * (1.0 + SANDWICH_TOLERANCE),
                    Direction::Upper => d >= e * (1.0 - SANDWICH_TOLERANCE),
                };
                if !ok {
                    let (lower, upper) = match bound.direction() {
                        Direction::Lower => (d, f64::INFINITY),
                        Direction::Upper => (f64::NEG_INFINITY, d),
                    };
                    return Err(Error::SandwichViolation {
                        level: k,
                        lower,
                        exact: e,
                        upper,
                    });
                }
            }
        }
    }

    Ok(SchemeComparison {
        label: model.label().to_string(),
        levels: model.levels(),
        exact,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{onemax_model, twomax1_model, LevelModel, ModelKind, TriMatrix};

    fn unit_model(p: f64) -> LevelModel {
        let q = TriMatrix::from_rows(vec![vec![p]]).unwrap();
        LevelModel::new(format!("unit(p={p})"), ModelKind::Exact, q.clone(), q, None).unwrap()
    }

    /// Bounded widening of an exact model by a relative margin.
    fn widen(model: &LevelModel, margin: f64) -> LevelModel {
        let lo: Vec<Vec<f64>> = model
            .q_lo()
            .rows()
            .iter()
            .map(|row| row.iter().map(|&p| p * (1.0 - margin)).collect())
            .collect();
        let hi: Vec<Vec<f64>> = model
            .q_hi()
            .rows()
            .iter()
            .map(|row| row.iter().map(|&p| (p * (1.0 + margin)).min(1.0)).collect())
            .collect();
        LevelModel::new(
            format!("{}~{margin}", model.label()),
            ModelKind::Bounded,
            TriMatrix::from_rows(lo).unwrap(),
            TriMatrix::from_rows(hi).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn guaranteed_step_has_unit_hitting_time() {
        let bound = exact_hitting_time(&unit_model(1.0)).unwrap();
        assert_eq!(bound.distances(), &[1.0]);
    }

    #[test]
    fn onemax_two_bits_hitting_time() {
        let bound = exact_hitting_time(&onemax_model(2).unwrap()).unwrap();
        assert!((bound.level(1) - 4.0).abs() < 1e-12);
        assert!((bound.level(2) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn exact_requires_exact_kind() {
        let bounded = widen(&onemax_model(3).unwrap(), 0.01);
        assert!(matches!(
            exact_hitting_time(&bounded),
            Err(Error::ExactModelRequired)
        ));
    }

    #[test]
    fn metric_single_level_is_reciprocal() {
        let model = unit_model(0.125);
        for direction in [Direction::Lower, Direction::Upper] {
            let bound = metric_bound(&model, direction).unwrap();
            assert!((bound.level(1) - 8.0).abs() < 1e-12);
        }
    }

    #[test]
    fn metric_equals_exact_on_exact_models() {
        for model in [onemax_model(16).unwrap(), twomax1_model(16).unwrap()] {
            let exact = exact_hitting_time(&model).unwrap();
            for direction in [Direction::Lower, Direction::Upper] {
                let metric = metric_bound(&model, direction).unwrap();
                for k in 1..=model.levels() {
                    let rel = (metric.level(k) - exact.level(k)).abs() / exact.level(k);
                    assert!(rel < 1e-10, "{direction} k={k} rel={rel}");
                }
            }
        }
    }

    #[test]
    fn metric_brackets_the_true_chain_for_bounded_models() {
        // The margin stays below the point where the conservative ratio
        // cap min(1, q_hi / sum q_lo) starts binding; past it the metric
        // upper recursion no longer certifies at drift 1 and errors.
        let base = onemax_model(6).unwrap();
        let exact = exact_hitting_time(&base).unwrap();
        let bounded = widen(&base, 0.02);
        let lower = metric_bound(&bounded, Direction::Lower).unwrap();
        let upper = metric_bound(&bounded, Direction::Upper).unwrap();
        for k in 1..=base.levels() {
            assert!(lower.level(k) <= exact.level(k));
            assert!(upper.level(k) >= exact.level(k));
        }
    }

    #[test]
    fn onemax_viscosity_coefficient_stays_large() {
        let floor = (-1.0f64).exp();
        for n in [8usize, 17, 33, 64] {
            let model = onemax_model(n).unwrap();
            let c = scheme_coefficients(&model, Scheme::Viscosity, Direction::Lower)
                .unwrap()
                .scalar()
                .unwrap();
            assert!(c >= floor, "n={n}: c={c} below 1/e");
            assert!(c <= 1.0);
        }
    }

    #[test]
    fn twomax1_viscosity_coefficient_collapses() {
        // The scalar coefficient is pinned by the cross-branch pair
        // (n/2 + 1, 1); evaluate that ratio directly as the oracle.
        let model = twomax1_model(10).unwrap();
        let c = scheme_coefficients(&model, Scheme::Viscosity, Direction::Lower)
            .unwrap()
            .scalar()
            .unwrap();
        let k = 6;
        let expected = model.q_lo().get(k, 1) / model.q_hi().prefix_mass(k, 1);
        assert!((c - expected).abs() <= 1e-15);
        assert!(c < 1e-5, "c={c}");
    }

    #[test]
    fn stored_ratios_reproduce_derived_results() {
        let plain = onemax_model(6).unwrap();
        let with_ratios = crate::model::derive_ratios(&plain).unwrap();
        assert!(with_ratios.has_ratios());
        for direction in [Direction::Lower, Direction::Upper] {
            let a = metric_bound(&plain, direction).unwrap();
            let b = metric_bound(&with_ratios, direction).unwrap();
            assert_eq!(a.distances(), b.distances());
            let fa = scheme_coefficients(&plain, Scheme::Full, direction).unwrap();
            let fb = scheme_coefficients(&with_ratios, Scheme::Full, direction).unwrap();
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn full_equals_path_sum_on_small_exact_models() {
        for model in [onemax_model(8).unwrap(), twomax1_model(8).unwrap()] {
            for direction in [Direction::Lower, Direction::Upper] {
                let full = scheme_coefficients(&model, Scheme::Full, direction).unwrap();
                let path = scheme_coefficients(&model, Scheme::PathSum, direction).unwrap();
                for k in 2..=model.levels() {
                    for l in 1..k {
                        let a = full.get(k, l);
                        let b = path.get(k, l);
                        assert!((a - b).abs() < 1e-10, "{direction} ({k},{l}): {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn product_coefficients_match_their_direct_definition() {
        // Oracle: evaluate the factor product for each pair from scratch.
        let model = twomax1_model(10).unwrap();
        let set = scheme_coefficients(&model, Scheme::Product, Direction::Lower).unwrap();
        for k in 2..=model.levels() {
            for l in 1..k {
                let mut product = 1.0;
                for i in (l + 1)..=k {
                    let aggregated: f64 = (l..i).map(|j| model.q_lo().get(i, j)).sum();
                    product *= aggregated / model.q_hi().row_mass(i);
                }
                let got = set.get(k, l);
                assert!(
                    (got - product).abs() <= 1e-12 * product.max(1e-30),
                    "({k},{l}): {got} vs {product}"
                );
            }
        }
    }

    #[test]
    fn product_never_exceeds_the_recursive_coefficients() {
        let model = twomax1_model(12).unwrap();
        let product = scheme_coefficients(&model, Scheme::Product, Direction::Lower).unwrap();
        let full = scheme_coefficients(&model, Scheme::Full, Direction::Lower).unwrap();
        for k in 2..=model.levels() {
            for l in 1..k {
                assert!(
                    product.get(k, l) <= full.get(k, l) * (1.0 + 1e-12),
                    "({k},{l})"
                );
            }
        }
    }

    #[test]
    fn path_sum_respects_level_cap() {
        let model = onemax_model(13).unwrap();
        assert!(matches!(
            scheme_coefficients(&model, Scheme::PathSum, Direction::Lower),
            Err(Error::PathSumLevelCap { levels: 13 })
        ));
    }

    #[test]
    fn product_rejects_upper_direction() {
        let model = onemax_model(4).unwrap();
        assert!(matches!(
            linear_bound(&model, Scheme::Product, Direction::Upper),
            Err(Error::SchemeDirection { .. })
        ));
        assert!(matches!(
            linear_bound(&model, Scheme::Zero, Direction::Upper),
            Err(Error::SchemeDirection { .. })
        ));
        assert!(matches!(
            linear_bound(&model, Scheme::One, Direction::Lower),
            Err(Error::SchemeDirection { .. })
        ));
    }

    #[test]
    fn trivial_lower_bound_on_two_bits() {
        let bound =
            linear_bound(&onemax_model(2).unwrap(), Scheme::Zero, Direction::Lower).unwrap();
        assert!((bound.level(1) - 4.0).abs() < 1e-12);
        assert!((bound.level(2) - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn exact_model_coefficients_never_clamp_or_fall_back() {
        for model in [onemax_model(12).unwrap(), twomax1_model(12).unwrap()] {
            for scheme in [
                Scheme::Viscosity,
                Scheme::VisitProbability,
                Scheme::Full,
                Scheme::Product,
            ] {
                for direction in [Direction::Lower, Direction::Upper] {
                    if !scheme.supports(direction) {
                        continue;
                    }
                    let set = scheme_coefficients(&model, scheme, direction).unwrap();
                    assert_eq!(set.clamp_events, 0, "{scheme:?} {direction}");
                    assert_eq!(set.conservative_fallbacks, 0, "{scheme:?} {direction}");
                    assert!(set.flagged.is_empty());
                }
            }
        }
    }

    #[test]
    fn bounded_scalar_scheme_tightens_to_the_certified_ratio() {
        // On this interval model the plain conditional-entry ratio,
        // c = min q_lo(k,l) / sum_{j<=l} q_hi(k,j) = 0.18/0.39, fails the
        // adversarial drift certificate at level 3 because the slack of
        // the in-between level is charged against the bound. The scheme
        // falls back to the slack-aware denominator, whose binding pair
        // is (3,1): 0.09 / (0.39 - 0.18) = 3/7.
        let q_lo = TriMatrix::from_rows(vec![vec![0.48], vec![0.09, 0.28], vec![0.04, 0.09, 0.18]])
            .unwrap();
        let q_hi = TriMatrix::from_rows(vec![vec![0.52], vec![0.11, 0.32], vec![0.06, 0.11, 0.22]])
            .unwrap();
        let model = LevelModel::new("mild", ModelKind::Bounded, q_lo, q_hi, None).unwrap();

        let scalar = scheme_coefficients(&model, Scheme::Viscosity, Direction::Lower).unwrap();
        assert_eq!(scalar.conservative_fallbacks, 1);
        assert!((scalar.scalar().unwrap() - 0.09 / 0.21).abs() < 1e-15);

        for scheme in [Scheme::Viscosity, Scheme::VisitProbability] {
            let bound = linear_bound(&model, scheme, Direction::Lower).unwrap();
            assert!(verify_drift(&model, &bound).unwrap().pass());
        }
    }

    #[test]
    fn drift_of_exact_hitting_time_is_one() {
        let model = twomax1_model(10).unwrap();
        let bound = exact_hitting_time(&model).unwrap();
        let report = verify_drift(&model, &bound).unwrap();
        for entry in &report.levels {
            assert!((entry.drift - 1.0).abs() < 1e-10, "level {}", entry.level);
        }
    }

    #[test]
    fn trivial_bound_drift_on_two_bits() {
        // d = (4, 4/3): drift at level 2 is 0.75 * 4/3 - 0.5 * 4 = -1.
        let model = onemax_model(2).unwrap();
        let bound = linear_bound(&model, Scheme::Zero, Direction::Lower).unwrap();
        let report = verify_drift(&model, &bound).unwrap();
        assert!((report.levels[1].drift + 1.0).abs() < 1e-12);
        assert!(report.pass());
    }

    #[test]
    fn inflated_lower_bound_fails_drift() {
        let model = onemax_model(8).unwrap();
        let metric = metric_bound(&model, Direction::Lower).unwrap();
        let pushed = metric.scaled(1.5);
        let report = verify_drift(&model, &pushed).unwrap();
        assert!(!report.pass());
    }

    #[test]
    fn drift_dimension_mismatch() {
        let model = onemax_model(4).unwrap();
        let other = exact_hitting_time(&onemax_model(5).unwrap()).unwrap();
        assert!(matches!(
            verify_drift(&model, &other),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn onemax_has_no_shortcuts() {
        let report = detect_shortcuts(&onemax_model(10).unwrap(), 1e-3).unwrap();
        assert!(report.entries.is_empty());
        assert_eq!(report.zero_denominator_pairs, 0);
    }

    #[test]
    fn twomax1_shortcut_scan_matches_direct_ratios() {
        // Oracle: recompute every pair ratio straight from the q matrix and
        // apply the threshold independently.
        let model = twomax1_model(10).unwrap();
        let eps = 1e-3;
        let report = detect_shortcuts(&model, eps).unwrap();
        let mut expected = Vec::new();
        for k in 2..=model.levels() {
            for l in 1..k {
                let denom: f64 = (0..=l).map(|j| model.q_lo().get(k, j)).sum();
                let ratio = model.q_hi().get(k, l) / denom;
                if ratio > 0.0 && ratio < eps {
                    expected.push((k, l));
                }
            }
        }
        assert_eq!(report.pairs(), expected);
        // The cross-branch escape pairs are the extreme cases.
        assert!(report.contains(6, 1));
        assert!(report.contains(6, 2));
    }

    #[test]
    fn twomax1_exhibits_the_two_figure_shortcuts() {
        // Both landscape shortcuts (the escape from the deceptive tip over
        // levels 1..=5 and the branch hop from level 9 over level 6) show up
        // once the threshold admits their conditional ratios.
        let model = twomax1_model(10).unwrap();
        let report = detect_shortcuts(&model, 0.16).unwrap();
        for l in 1..=5 {
            assert!(report.contains(6, l), "missing (6,{l})");
        }
        assert!(report.contains(9, 6));
    }

    #[test]
    fn zero_denominator_pairs_are_flagged_and_skipped() {
        // Level 3 reaches only level 2; the pair (3,1) has no mass at or
        // below its target and must be skipped, not treated as ratio 0.
        let q = TriMatrix::from_rows(vec![vec![1.0], vec![0.3, 0.2], vec![0.0, 0.0, 0.5]]).unwrap();
        let model = LevelModel::new("gap", ModelKind::Exact, q.clone(), q, None).unwrap();

        let c = scheme_coefficients(&model, Scheme::Viscosity, Direction::Lower).unwrap();
        assert_eq!(c.flagged, vec![(3, 1)]);
        assert!((c.scalar().unwrap() - 0.4).abs() < 1e-15);

        let per = scheme_coefficients(&model, Scheme::VisitProbability, Direction::Lower).unwrap();
        assert_eq!(per.flagged, vec![(3, 1)]);
        assert!((per.get(2, 1) - 0.4).abs() < 1e-15);
        assert!((per.get(3, 2) - 1.0).abs() < 1e-15);

        // Both assembled bounds still certify at drift at most 1.
        for scheme in [Scheme::Viscosity, Scheme::VisitProbability] {
            let bound = linear_bound(&model, scheme, Direction::Lower).unwrap();
            assert!(verify_drift(&model, &bound).unwrap().pass());
        }

        // The shortcut scan counts the same pair separately.
        let report = detect_shortcuts(&model, 1e-3).unwrap();
        assert_eq!(report.zero_denominator_pairs, 1);
        assert!(report.entries.is_empty());
    }

    #[test]
    fn shortcuts_force_small_scalar_and_per_level_coefficients() {
        // Whenever the scan reports pairs below a threshold, both the
        // scalar coefficient and the per-target coefficients of the
        // reported targets sit below the same threshold.
        let model = twomax1_model(10).unwrap();
        let eps = 1e-2;
        let report = detect_shortcuts(&model, eps).unwrap();
        assert!(!report.entries.is_empty());
        let c = scheme_coefficients(&model, Scheme::Viscosity, Direction::Lower)
            .unwrap()
            .scalar()
            .unwrap();
        assert!(c < eps, "c={c}");
        let per = scheme_coefficients(&model, Scheme::VisitProbability, Direction::Lower).unwrap();
        for entry in &report.entries {
            let cl = per.get(entry.level_from, entry.target);
            assert!(cl < eps, "c_{} = {cl}", entry.target);
        }
    }

    #[test]
    fn underflowed_threshold_reports_nothing() {
        for model in [onemax_model(10).unwrap(), twomax1_model(10).unwrap()] {
            let report = detect_shortcuts(&model, 1e-320).unwrap();
            assert!(report.entries.is_empty());
        }
    }

    #[test]
    fn shortcut_threshold_must_be_a_probability() {
        let model = onemax_model(4).unwrap();
        assert!(detect_shortcuts(&model, 0.0).is_err());
        assert!(detect_shortcuts(&model, 1.0).is_err());
        assert!(detect_shortcuts(&model, f64::NAN).is_err());
    }

    #[test]
    fn start_aggregation() {
        let model = onemax_model(2).unwrap();
        let exact = exact_hitting_time(&model).unwrap();
        // Uniform over the 4 strings: levels (0,1,2) carry (1/4, 1/2, 1/4).
        let start = StartDistribution::new(vec![0.25, 0.5, 0.25]).unwrap();
        let expected = aggregate_start(&exact, &start).unwrap();
        assert!((expected - 3.0).abs() < 1e-12);

        let on_top = StartDistribution::point(2, 2).unwrap();
        assert_eq!(aggregate_start(&exact, &on_top).unwrap(), exact.level(2));
        let at_optimum = StartDistribution::point(2, 0).unwrap();
        assert_eq!(aggregate_start(&exact, &at_optimum).unwrap(), 0.0);

        let wrong = StartDistribution::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            aggregate_start(&exact, &wrong),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn comparison_orders_lower_schemes() {
        let comparison = compare_schemes(&twomax1_model(16).unwrap()).unwrap();
        let k = comparison.levels;
        let exact = comparison.exact.as_ref().unwrap().level(k);
        let zero = comparison
            .linear(Scheme::Zero, Direction::Lower)
            .unwrap()
            .level(k);
        let c = comparison
            .linear(Scheme::Viscosity, Direction::Lower)
            .unwrap()
            .level(k);
        let cl = comparison
            .linear(Scheme::VisitProbability, Direction::Lower)
            .unwrap()
            .level(k);
        let ckl = comparison
            .linear(Scheme::Full, Direction::Lower)
            .unwrap()
            .level(k);
        assert!(zero <= c + 1e-12);
        assert!(c <= cl + 1e-12);
        assert!(cl <= ckl + 1e-12);
        assert!(ckl <= exact * (1.0 + 1e-9));
    }

    #[test]
    fn full_scheme_recovers_exact_time_on_level_based_models() {
        let comparison = compare_schemes(&onemax_model(16).unwrap()).unwrap();
        let exact = comparison.exact.as_ref().unwrap();
        for direction in [Direction::Lower, Direction::Upper] {
            let full = comparison.linear(Scheme::Full, direction).unwrap();
            for k in 1..=comparison.levels {
                let rel = (full.level(k) - exact.level(k)).abs() / exact.level(k);
                assert!(rel < 1e-9, "{direction} k={k} rel={rel}");
            }
        }
    }

    #[test]
    fn single_level_comparison_degenerates_to_reciprocal() {
        let comparison = compare_schemes(&unit_model(0.2)).unwrap();
        for bound in &comparison.bounds {
            assert!(
                (bound.level(1) - 5.0).abs() < 1e-12,
                "{:?}",
                bound.provenance()
            );
        }
    }

    #[test]
    fn wide_interval_upper_certificates_can_fail() {
        // A bounded model whose intervals are wide enough that the
        // adversarial drift check rejects the all-ones upper scheme.
        let q_lo = TriMatrix::from_rows(vec![vec![0.2], vec![0.05, 0.05]]).unwrap();
        let q_hi = TriMatrix::from_rows(vec![vec![0.4], vec![0.1, 0.5]]).unwrap();
        let model = LevelModel::new("wide", ModelKind::Bounded, q_lo, q_hi, None).unwrap();
        match linear_bound(&model, Scheme::One, Direction::Upper) {
            Err(Error::CertificationFailed { direction, .. }) => {
                assert_eq!(direction, Direction::Upper);
            }
            other => panic!("expected certification failure, got {other:?}"),
        }
    }

    #[test]
    fn bounded_full_scheme_is_certified() {
        // Narrow intervals keep every upper coefficient below the [0,1]
        // clamp, so the equality recursion certifies on both sides.
        let bounded = widen(&twomax1_model(8).unwrap(), 0.002);
        for direction in [Direction::Lower, Direction::Upper] {
            let set = scheme_coefficients(&bounded, Scheme::Full, direction).unwrap();
            assert_eq!(set.clamp_events, 0, "{direction}");
            let bound = linear_bound(&bounded, Scheme::Full, direction).unwrap();
            assert!(verify_drift(&bounded, &bound).unwrap().pass());
        }
    }

    #[test]
    fn metric_upper_reports_when_the_ratio_cap_binds() {
        // Wide intervals force the capped conditional ratio below the
        // adversarial drift requirement; the vector is withheld.
        let bounded = widen(&onemax_model(6).unwrap(), 0.2);
        match metric_bound(&bounded, Direction::Upper) {
            Err(Error::CertificationFailed { direction, .. }) => {
                assert_eq!(direction, Direction::Upper);
            }
            other => panic!("expected certification failure, got {other:?}"),
        }
        // The lower recursion bakes its normalizer into the ratios and
        // stays at drift exactly 1 no matter how wide the intervals are.
        assert!(metric_bound(&bounded, Direction::Lower).is_ok());
    }
}
