//! Ground-truth engines for validating level models and bounds.
//!
//! [`enumerate_chain`] builds the exact transition chain of the (1+1)
//! algorithm over all `2^n` bit strings, solves the absorbing-chain linear
//! system for every state's mean hitting time, and aggregates transitions by
//! fitness level. Because an elitist chain never moves to a worse level, the
//! state space ordered by level is block lower triangular and each level's
//! block solves independently by dense Gaussian elimination.
//!
//! [`path_sum_coefficient`] is the brute-force counterpart to the recursive
//! full coefficient scheme, and [`monte_carlo`] simulates the algorithm
//! directly with a documented, splittable pseudo-random generator.

use crate::bounds::{path_sum, Direction, PATH_SUM_MAX_LEVELS};
use crate::error::{Error, Result};
use crate::model::{
    derive_ratio_matrices, onemax_model, twomax1_level_weights, twomax1_model, LevelModel,
};
use crate::sum::CompensatedSum;

/// Largest bit-string length accepted by [`enumerate_chain`].
pub const MAX_ENUMERATION_BITS: usize = 14;

/// Generations after which a simulation run aborts; absorption is almost
/// sure, so hitting this cap signals a broken model rather than bad luck.
pub const GENERATION_CAP: u64 = 1_000_000_000;

/// Benchmark instance: which function the (1+1) algorithm maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Problem {
    /// Count of one bits; the all-ones string is the unique optimum.
    OneMax { n: usize },
    /// Two optima (all-zeros and all-ones) with a deceptive branch below
    /// weight `n/2`; `n` must be even.
    TwoMax1 { n: usize },
}

impl Problem {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Problem::OneMax { n } => {
                if n < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "onemax requires n >= 2, got {n}"
                    )));
                }
            }
            Problem::TwoMax1 { n } => {
                if n < 4 || !n.is_multiple_of(2) {
                    return Err(Error::InvalidParameter(format!(
                        "twomax1 requires even n >= 4, got {n}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        match *self {
            Problem::OneMax { n } | Problem::TwoMax1 { n } => n,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Problem::OneMax { .. } => "onemax",
            Problem::TwoMax1 { .. } => "twomax1",
        }
    }

    /// Number of non-optimal levels.
    pub fn level_count(&self) -> usize {
        match *self {
            Problem::OneMax { n } => n,
            Problem::TwoMax1 { n } => n - 1,
        }
    }

    /// Fitness of a string given its Hamming weight.
    pub fn fitness_of_weight(&self, weight: usize) -> usize {
        match *self {
            Problem::OneMax { .. } => weight,
            Problem::TwoMax1 { n } => {
                if weight == 0 || weight == n {
                    n
                } else if weight >= n / 2 {
                    weight
                } else {
                    n / 2 - weight
                }
            }
        }
    }

    /// Level index of a string given its Hamming weight (0 is optimal).
    pub fn level_of_weight(&self, weight: usize) -> usize {
        match *self {
            Problem::OneMax { n } => n - weight,
            Problem::TwoMax1 { n } => n - self.fitness_of_weight(weight),
        }
    }

    /// Hamming weights that make up a level.
    pub fn level_weights(&self, level: usize) -> Vec<usize> {
        match *self {
            Problem::OneMax { n } => vec![n - level],
            Problem::TwoMax1 { n } => twomax1_level_weights(n, level),
        }
    }

    /// The matching exact level model from the built-in generators.
    pub fn generator_model(&self) -> Result<LevelModel> {
        self.validate()?;
        match *self {
            Problem::OneMax { n } => onemax_model(n),
            Problem::TwoMax1 { n } => twomax1_model(n),
        }
    }
}

/// Exact full-state-space analysis of a problem instance.
#[derive(Debug, Clone)]
pub struct ChainOracleResult {
    pub problem: Problem,
    /// Mean hitting time per state, indexed by the state's bit pattern.
    pub state_hitting: Vec<f64>,
    /// Level index per state.
    pub state_level: Vec<usize>,
    /// Level-aggregated transition probabilities `q(k, l)`, row `k-1`
    /// holding targets `0..k`.
    pub level_transitions: Vec<Vec<f64>>,
    /// Mean hitting time per level `1..=K` (constant within a level for
    /// these landscapes).
    pub level_hitting: Vec<f64>,
    /// Largest relative spread of hitting times within one level.
    pub max_level_spread: f64,
}

impl ChainOracleResult {
    /// Level-aggregated transition probability `q(k, l)`.
    pub fn q(&self, k: usize, l: usize) -> f64 {
        self.level_transitions[k - 1][l]
    }

    /// Mean hitting time of level `k >= 1`.
    pub fn level_time(&self, k: usize) -> f64 {
        self.level_hitting[k - 1]
    }
}

/// Enumerates the full `2^n` elitist chain and solves it exactly.
pub fn enumerate_chain(problem: &Problem) -> Result<ChainOracleResult> {
    problem.validate()?;
    let n = problem.n();
    if n > MAX_ENUMERATION_BITS {
        return Err(Error::StateSpaceTooLarge {
            n,
            max: MAX_ENUMERATION_BITS,
        });
    }
    let states = 1usize << n;
    let k_levels = problem.level_count();

    // Mutation probability by Hamming distance.
    let rate = 1.0 / n as f64;
    let hamming_prob: Vec<f64> = (0..=n)
        .map(|h| rate.powi(h as i32) * (1.0 - rate).powi((n - h) as i32))
        .collect();

    let fitness: Vec<usize> = (0..states)
        .map(|x| problem.fitness_of_weight((x as u32).count_ones() as usize))
        .collect();
    let state_level: Vec<usize> = (0..states)
        .map(|x| problem.level_of_weight((x as u32).count_ones() as usize))
        .collect();

    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); k_levels + 1];
    for x in 0..states {
        by_level[state_level[x]].push(x);
    }

    // Solve level blocks in ascending order: from level k the chain only
    // reaches levels <= k, so lower levels are already known.
    let mut state_hitting = vec![0.0_f64; states];
    for (k, members) in by_level.iter().enumerate().skip(1) {
        let size = members.len();
        let mut index_of = std::collections::HashMap::with_capacity(size);
        for (i, &x) in members.iter().enumerate() {
            index_of.insert(x, i);
        }

        // (I - P_kk) m = 1 + sum over strictly better non-optimal states.
        let mut matrix = vec![0.0_f64; size * size];
        let mut rhs = vec![0.0_f64; size];
        for (row, &x) in members.iter().enumerate() {
            let mut off_level = CompensatedSum::new();
            let mut rhs_acc = CompensatedSum::new();
            rhs_acc.add(1.0);
            for y in 0..states {
                if y == x || fitness[y] < fitness[x] {
                    continue;
                }
                let p = hamming_prob[(x ^ y).count_ones() as usize];
                let level_y = state_level[y];
                if level_y == k {
                    matrix[row * size + index_of[&y]] -= p;
                    off_level.add(p);
                } else {
                    off_level.add(p);
                    if level_y > 0 {
                        rhs_acc.add(p * state_hitting[y]);
                    }
                }
            }
            // Diagonal of I - P_kk with the effective self-loop folded in:
            // 1 - (1 - sum of accepted moves away from x).
            matrix[row * size + row] += off_level.value();
            rhs[row] = rhs_acc.value();
        }

        solve_dense(&mut matrix, &mut rhs, size)?;
        for (i, &x) in members.iter().enumerate() {
            state_hitting[x] = rhs[i];
        }
    }

    // Aggregate transitions by level and check they are state-independent.
    let mut level_transitions = Vec::with_capacity(k_levels);
    for (k, members) in by_level.iter().enumerate().skip(1) {
        let mut row = vec![0.0_f64; k];
        for (i, &x) in members.iter().enumerate() {
            let mut sums = vec![CompensatedSum::new(); k];
            for y in 0..states {
                let l = state_level[y];
                if l < k {
                    sums[l].add(hamming_prob[(x ^ y).count_ones() as usize]);
                }
            }
            for (l, acc) in sums.iter().enumerate() {
                let value = acc.value();
                if i == 0 {
                    row[l] = value;
                } else if (row[l] - value).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "level {k} is not level-based: q({k},{l}) varies across states"
                    )));
                }
            }
        }
        level_transitions.push(row);
    }

    let mut level_hitting = Vec::with_capacity(k_levels);
    let mut max_level_spread = 0.0_f64;
    for (k, members) in by_level.iter().enumerate().skip(1) {
        let first = state_hitting[members[0]];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &x in members {
            lo = lo.min(state_hitting[x]);
            hi = hi.max(state_hitting[x]);
        }
        let spread = (hi - lo) / first.abs().max(f64::MIN_POSITIVE);
        max_level_spread = max_level_spread.max(spread);
        if spread > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "hitting times vary within level {k} (relative spread {spread})"
            )));
        }
        level_hitting.push(first);
    }

    for x in 0..states {
        let optimal = state_level[x] == 0;
        if optimal != (state_hitting[x] == 0.0) {
            return Err(Error::InvalidParameter(format!(
                "state {x} breaks the zero-time-iff-optimal invariant"
            )));
        }
    }

    Ok(ChainOracleResult {
        problem: *problem,
        state_hitting,
        state_level,
        level_transitions,
        level_hitting,
        max_level_spread,
    })
}

/// Dense Gaussian elimination with partial pivoting; `matrix` is row-major
/// `size x size` and `rhs` is overwritten with the solution.
fn solve_dense(matrix: &mut [f64], rhs: &mut [f64], size: usize) -> Result<()> {
    for col in 0..size {
        let mut pivot_row = col;
        let mut pivot_val = matrix[col * size + col].abs();
        for row in (col + 1)..size {
            let v = matrix[row * size + col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val == 0.0 {
            return Err(Error::InvalidParameter(
                "singular within-level block; the chain is not absorbing".into(),
            ));
        }
        if pivot_row != col {
            for j in 0..size {
                matrix.swap(col * size + j, pivot_row * size + j);
            }
            rhs.swap(col, pivot_row);
        }
        let inv = 1.0 / matrix[col * size + col];
        for row in (col + 1)..size {
            let factor = matrix[row * size + col] * inv;
            if factor == 0.0 {
                continue;
            }
            matrix[row * size + col] = 0.0;
            for j in (col + 1)..size {
                matrix[row * size + j] -= factor * matrix[col * size + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for col in (0..size).rev() {
        let mut acc = rhs[col];
        for j in (col + 1)..size {
            acc -= matrix[col * size + j] * rhs[j];
        }
        rhs[col] = acc / matrix[col * size + col];
    }
    Ok(())
}

/// Explicit path-sum coefficient for an exact model: the sum over every
/// strictly decreasing index path from `k` to `l` of the product of
/// conditional ratios along the path. Brute force; equals the recursive
/// full-scheme coefficient.
pub fn path_sum_coefficient(
    model: &LevelModel,
    k: usize,
    l: usize,
    direction: Direction,
) -> Result<f64> {
    if !model.is_exact() {
        return Err(Error::ExactModelRequired);
    }
    if model.levels() > PATH_SUM_MAX_LEVELS {
        return Err(Error::PathSumLevelCap {
            levels: model.levels(),
        });
    }
    if !(1 <= l && l < k && k <= model.levels()) {
        return Err(Error::InvalidParameter(format!(
            "path sum needs 1 <= l < k <= K, got (k={k}, l={l})"
        )));
    }
    let (ratio_lo, ratio_hi) = derive_ratio_matrices(model)?;
    let ratios = match direction {
        Direction::Lower => ratio_lo,
        Direction::Upper => ratio_hi,
    };
    Ok(path_sum(&ratios, k, l))
}

/// Sample statistics of simulated hitting times.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub problem: Problem,
    pub start_level: usize,
    pub runs: u64,
    pub seed: u64,
    pub mean: f64,
    pub std_dev: f64,
}

impl SimulationResult {
    /// Standard error of the sample mean.
    pub fn standard_error(&self) -> f64 {
        self.std_dev / (self.runs as f64).sqrt()
    }
}

/// SplitMix64 step; the documented generator behind all simulation
/// randomness.
#[derive(Debug, Clone)]
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    /// The SplitMix64 output finalizer.
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Stream `run` of the master `seed`. The start state is double-mixed
    /// so that streams of neighboring runs do not walk overlapping state
    /// sequences; results are independent of execution order.
    fn for_run(seed: u64, run: u64) -> Self {
        Self {
            state: Self::mix(
                seed.wrapping_add(Self::mix(run.wrapping_add(1).wrapping_mul(Self::GAMMA))),
            ),
        }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        Self::mix(self.state)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in `0..bound`.
    fn next_below(&mut self, bound: usize) -> usize {
        // Bit-mask rejection keeps the draw exactly uniform.
        let mask = (bound as u64).next_power_of_two() - 1;
        loop {
            let v = self.next_u64() & mask;
            if (v as usize) < bound {
                return v as usize;
            }
        }
    }
}

/// Bit string stored as 64-bit words.
#[derive(Debug, Clone)]
struct BitString {
    words: Vec<u64>,
    n: usize,
}

impl BitString {
    fn zeros(n: usize) -> Self {
        Self {
            words: vec![0; n.div_ceil(64)],
            n,
        }
    }

    fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    fn flip(&mut self, bit: usize) {
        self.words[bit / 64] ^= 1 << (bit % 64);
    }

    fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn n(&self) -> usize {
        self.n
    }
}

/// Uniformly random string of the given Hamming weight: a partial
/// Fisher-Yates shuffle picks the one-bit positions.
fn random_state_of_weight(n: usize, weight: usize, rng: &mut SplitMix64) -> BitString {
    let mut positions: Vec<usize> = (0..n).collect();
    let mut string = BitString::zeros(n);
    for i in 0..weight {
        let j = i + rng.next_below(n - i);
        positions.swap(i, j);
        string.set(positions[i]);
    }
    string
}

/// Simulates the (1+1) algorithm from a uniformly random state of the start
/// level until an optimum is hit, `runs` times, and reports sample
/// statistics. Fully reproducible from `seed`.
pub fn monte_carlo(
    problem: &Problem,
    start_level: usize,
    runs: u64,
    seed: u64,
) -> Result<SimulationResult> {
    problem.validate()?;
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be at least 1".into()));
    }
    let k_levels = problem.level_count();
    if start_level > k_levels {
        return Err(Error::StartLevelOutOfRange {
            level: start_level,
            levels: k_levels,
        });
    }
    let n = problem.n();
    let f_max = problem.fitness_of_weight(n);
    let rate = 1.0 / n as f64;

    let mut samples = Vec::with_capacity(runs as usize);
    for run in 0..runs {
        let mut rng = SplitMix64::for_run(seed, run);
        let weights = problem.level_weights(start_level);
        let weight = weights[rng.next_below(weights.len())];
        let mut current = random_state_of_weight(n, weight, &mut rng);
        let mut current_fitness = problem.fitness_of_weight(current.weight());

        let mut generations = 0u64;
        while current_fitness < f_max {
            if generations >= GENERATION_CAP {
                return Err(Error::GenerationCapExceeded {
                    run,
                    cap: GENERATION_CAP,
                });
            }
            let mut offspring = current.clone();
            for bit in 0..current.n() {
                if rng.next_f64() < rate {
                    offspring.flip(bit);
                }
            }
            let offspring_fitness = problem.fitness_of_weight(offspring.weight());
            if offspring_fitness >= current_fitness {
                current = offspring;
                current_fitness = offspring_fitness;
            }
            generations += 1;
        }
        samples.push(generations as f64);
    }

    let mut total = CompensatedSum::new();
    for &s in &samples {
        total.add(s);
    }
    let mean = total.value() / runs as f64;
    let std_dev = if runs > 1 {
        let mut squares = CompensatedSum::new();
        for &s in &samples {
            squares.add((s - mean) * (s - mean));
        }
        (squares.value() / (runs - 1) as f64).sqrt()
    } else {
        0.0
    };

    Ok(SimulationResult {
        problem: *problem,
        start_level,
        runs,
        seed,
        mean,
        std_dev,
    })
}
