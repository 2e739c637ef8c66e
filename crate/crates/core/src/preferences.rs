//! Preference elicitation: turning human answers into weight vectors and
//! aggregating several of them into an interval weight vector.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for `Σw = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Strength assigned to a binary "i over j" answer.
pub const PAIRWISE_STRENGTH: f64 = 2.0;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::NotOnSimplex("empty weight vector".into()));
        }
        if let Some(x) = w.iter().find(|x| !x.is_finite() || **x < -SIMPLEX_TOL) {
            return Err(Error::NotOnSimplex(format!("entry {x} is negative")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::NotOnSimplex(format!("entries sum to {sum}")));
        }
        Ok(WeightVector(w.into_iter().map(|x| x.max(0.0)).collect()))
    }

    /// The `i`-th unit vector in dimension `n`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        WeightVector(w)
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(w, x)| w * x).sum()
    }

    fn normalized(values: &[f64]) -> Result<Self> {
        let sum: f64 = values.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return Err(Error::DegeneratePreference(
                "weights must have a positive finite sum".into(),
            ));
        }
        WeightVector::new(values.iter().map(|v| v / sum).collect())
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;
    fn try_from(w: Vec<f64>) -> Result<Self> {
        WeightVector::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Per-objective weight intervals `[w̲ᵢ, w̄ᵢ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInterval", into = "RawInterval")]
pub struct IntervalWeightVector {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawInterval {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<RawInterval> for IntervalWeightVector {
    type Error = Error;
    fn try_from(r: RawInterval) -> Result<Self> {
        IntervalWeightVector::new(r.lower, r.upper)
    }
}

impl From<IntervalWeightVector> for RawInterval {
    fn from(i: IntervalWeightVector) -> Self {
        RawInterval {
            lower: i.lower,
            upper: i.upper,
        }
    }
}

impl IntervalWeightVector {
    /// Fails if a bound leaves `[0, 1]`, if `lower > upper` anywhere, or if
    /// the box misses the simplex.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidPreference("empty interval vector".into()));
        }
        for (i, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            if !(0.0..=1.0).contains(&l) || !(0.0..=1.0).contains(&u) || l > u {
                return Err(Error::InvalidPreference(format!(
                    "objective {i}: interval [{l}, {u}] must satisfy 0 ≤ lower ≤ upper ≤ 1"
                )));
            }
        }
        let lo: f64 = lower.iter().sum();
        let hi: f64 = upper.iter().sum();
        if lo > 1.0 + SIMPLEX_TOL || hi < 1.0 - SIMPLEX_TOL {
            return Err(Error::InfeasibleInterval);
        }
        Ok(IntervalWeightVector { lower, upper })
    }

    /// A degenerate interval holding a single weight vector.
    pub fn point(w: &WeightVector) -> Self {
        IntervalWeightVector {
            lower: w.as_slice().to_vec(),
            upper: w.as_slice().to_vec(),
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, w: &WeightVector) -> bool {
        w.len() == self.len()
            && w.as_slice()
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= l - SIMPLEX_TOL && *x <= u + SIMPLEX_TOL)
    }

    /// Componentwise inclusion of intervals.
    pub fn is_within(&self, other: &IntervalWeightVector) -> bool {
        self.len() == other.len()
            && (0..self.len()).all(|i| other.lower[i] <= self.lower[i] && self.upper[i] <= other.upper[i])
    }
}

/// Parses `"0.2:0.7,0.5:0.9"`.
impl FromStr for IntervalWeightVector {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for part in s.split(',') {
            let (l, u) = part
                .split_once(':')
                .ok_or_else(|| Error::InvalidPreference(format!("expected lo:hi, got `{part}`")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidPreference(format!("`{x}`: {e}")))
            };
            lower.push(parse(l)?);
            upper.push(parse(u)?);
        }
        IntervalWeightVector::new(lower, upper)
    }
}

impl fmt::Display for IntervalWeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l}:{u}")?;
        }
        Ok(())
    }
}

/// A positive reciprocal matrix of pairwise importance ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    a: Vec<Vec<f64>>,
}

impl PairwiseMatrix {
    pub fn new(a: Vec<Vec<f64>>) -> Result<Self> {
        let n = a.len();
        if n < 2 {
            return Err(Error::InvalidPreference("pairwise matrix needs n ≥ 2".into()));
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            if (row[i] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidPreference(format!("a[{i}][{i}] = {} ≠ 1", row[i])));
            }
            for (j, &x) in row.iter().enumerate() {
                if !(x > 0.0) || !x.is_finite() {
                    return Err(Error::InvalidPreference(format!("a[{i}][{j}] = {x} is not positive")));
                }
                if (a[j][i] * x - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidPreference(format!("a[{j}][{i}] is not 1/a[{i}][{j}]")));
                }
            }
        }
        Ok(PairwiseMatrix { a })
    }

    /// The consistent matrix `aᵢⱼ = vᵢ / vⱼ` for a positive vector `v`.
    pub fn consistent(v: &[f64]) -> Result<Self> {
        PairwiseMatrix::new(
            v.iter()
                .map(|vi| v.iter().map(|vj| vi / vj).collect())
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.a
    }
}

/// One answer to "do you prefer objective `i` or objective `j`?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseChoice {
    pub i: usize,
    pub j: usize,
    pub preferred: usize,
}

impl PairwiseChoice {
    pub fn new(i: usize, j: usize, preferred: usize) -> Self {
        PairwiseChoice { i, j, preferred }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    PowerIteration,
    /// Power iteration did not converge; weights come from row geometric means.
    GeometricMeanFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseWeights {
    pub weights: WeightVector,
    pub method: EigenMethod,
    pub iterations: usize,
}

pub fn weights_from_direct(values: &[f64]) -> Result<WeightVector> {
    if values.len() < 2 {
        return Err(Error::InvalidPreference("need at least two objectives".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidPreference(format!("direct weight {v} is negative")));
    }
    WeightVector::normalized(values)
}

pub fn weights_from_likert(ratings: &[u32]) -> Result<WeightVector> {
    if ratings.len() < 2 {
        return Err(Error::InvalidPreference("need at least two objectives".into()));
    }
    if let Some(r) = ratings.iter().find(|r| !(1..=5).contains(*r)) {
        return Err(Error::InvalidPreference(format!("Likert rating {r} outside 1..=5")));
    }
    let values: Vec<f64> = ratings.iter().map(|&r| r as f64).collect();
    WeightVector::normalized(&values)
}

/// Builds the reciprocal matrix from one binary choice per unordered pair.
pub fn pairwise_matrix_from_choices(choices: &[PairwiseChoice], n: usize) -> Result<PairwiseMatrix> {
    if n < 2 {
        return Err(Error::InvalidPreference("need at least two objectives".into()));
    }
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for c in choices {
        if c.i >= n || c.j >= n || c.i == c.j {
            return Err(Error::InvalidPreference(format!("bad pair ({}, {})", c.i, c.j)));
        }
        if c.preferred != c.i && c.preferred != c.j {
            return Err(Error::InvalidPreference(format!(
                "preferred objective {} is not in pair ({}, {})",
                c.preferred, c.i, c.j
            )));
        }
        if a[c.i][c.j] != 0.0 {
            return Err(Error::InvalidPreference(format!("duplicate pair ({}, {})", c.i, c.j)));
        }
        let (win, lose) = if c.preferred == c.i { (c.i, c.j) } else { (c.j, c.i) };
        a[win][lose] = PAIRWISE_STRENGTH;
        a[lose][win] = 1.0 / PAIRWISE_STRENGTH;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if a[i][j] == 0.0 {
                return Err(Error::InvalidPreference(format!("missing pair ({i}, {j})")));
            }
        }
    }
    PairwiseMatrix::new(a)
}

/// Principal-eigenvector weights by power iteration.
pub fn weights_from_pairwise(matrix: &PairwiseMatrix) -> Result<PairwiseWeights> {
    power_iteration(matrix, POWER_MAX_ITER)
}

fn power_iteration(matrix: &PairwiseMatrix, max_iter: usize) -> Result<PairwiseWeights> {
    let n = matrix.n();
    let mut x = vec![1.0 / n as f64; n];
    for it in 1..=max_iter {
        let mut y: Vec<f64> = matrix
            .rows()
            .iter()
            .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
            .collect();
        let sum: f64 = y.iter().sum();
        y.iter_mut().for_each(|v| *v /= sum);
        let delta = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = y;
        if delta < POWER_TOL {
            return Ok(PairwiseWeights {
                weights: renormalize(x)?,
                method: EigenMethod::PowerIteration,
                iterations: it,
            });
        }
    }
    Ok(PairwiseWeights {
        weights: geometric_mean_weights(matrix)?,
        method: EigenMethod::GeometricMeanFallback,
        iterations: max_iter,
    })
}

/// Normalized geometric means of the rows.
pub fn geometric_mean_weights(matrix: &PairwiseMatrix) -> Result<WeightVector> {
    let n = matrix.n() as f64;
    let g: Vec<f64> = matrix
        .rows()
        .iter()
        .map(|row| (row.iter().map(|v| v.ln()).sum::<f64>() / n).exp())
        .collect();
    WeightVector::normalized(&g)
}

fn renormalize(x: Vec<f64>) -> Result<WeightVector> {
    WeightVector::normalized(&x)
}

/// Componentwise min/max over a set of weight vectors.
pub fn aggregate_to_interval(ws: &[WeightVector]) -> Result<IntervalWeightVector> {
    let first = ws
        .first()
        .ok_or_else(|| Error::InvalidPreference("no weight vectors to aggregate".into()))?;
    let n = first.len();
    let mut lower = first.as_slice().to_vec();
    let mut upper = first.as_slice().to_vec();
    for w in &ws[1..] {
        if w.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
        for i in 0..n {
            lower[i] = lower[i].min(w[i]);
            upper[i] = upper[i].max(w[i]);
        }
    }
    IntervalWeightVector::new(lower, upper)
}

/// Elicitation payload, `{"method": ..., "data": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "data", rename_all = "snake_case")]
pub enum Elicitation {
    Direct(Vec<f64>),
    Likert(Vec<u32>),
    PairwiseNames(PairwiseData),
    /// Same arithmetic as `PairwiseNames`; the options shown to the person
    /// are optimal routes rather than objective names.
    PairwiseRoutes(PairwiseData),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseData {
    pub n: usize,
    pub choices: Vec<PairwiseChoice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationResult {
    pub weights: WeightVector,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PairwiseMetadata>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMetadata {
    pub strength: f64,
    pub method: EigenMethod,
    pub iterations: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl Elicitation {
    pub fn weights(&self) -> Result<ElicitationResult> {
        match self {
            Elicitation::Direct(v) => Ok(ElicitationResult {
                weights: weights_from_direct(v)?,
                metadata: None,
            }),
            Elicitation::Likert(r) => Ok(ElicitationResult {
                weights: weights_from_likert(r)?,
                metadata: None,
            }),
            Elicitation::PairwiseNames(d) | Elicitation::PairwiseRoutes(d) => {
                let matrix = pairwise_matrix_from_choices(&d.choices, d.n)?;
                let pw = weights_from_pairwise(&matrix)?;
                Ok(ElicitationResult {
                    weights: pw.weights,
                    metadata: Some(PairwiseMetadata {
                        strength: PAIRWISE_STRENGTH,
                        method: pw.method,
                        iterations: pw.iterations,
                        matrix: matrix.a,
                    }),
                })
            }
        }
    }
}
