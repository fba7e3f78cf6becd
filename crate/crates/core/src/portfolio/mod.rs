//! Portfolio dominance and efficiency over scenario panels, plus the CRRA
//! pricing diagnostics.
//!
//! Efficiency is an existence question over the whole simplex. The search
//! here covers a lattice and a batch of random points, so an
//! "efficient" verdict only means no dominating portfolio was found at that
//! resolution.

mod pricing;

use std::io::Read;

use nalgebra::DMatrix;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dominance::{sd_dominates_returns, DominanceError, EmpiricalDistribution, Orientation, SDResult};
use crate::rng;

pub use pricing::{
    arbitrage_diagnostic, crra_sdf, expected_return_decomposition, fundamental_pricing_check, ArbitrageReport,
    Market, PricingInputs, PricingResiduals, ReturnDecomposition, SdfSeries,
};

/// Largest lattice `is_sd_efficient` will enumerate.
pub const MAX_LATTICE: usize = 5_000_000;

const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PortfolioError {
    #[error("panel needs at least one scenario and one asset")]
    EmptyPanel,
    #[error("panel entries must be finite")]
    NonFinite,
    #[error("scenario probabilities must be positive and sum to 1")]
    BadProbabilities,
    #[error("expected {expected} values, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("weights must be nonnegative and sum to 1")]
    NotOnSimplex,
    #[error("grid resolution must be at least 1")]
    BadResolution,
    #[error("lattice has more than {MAX_LATTICE} points; lower the resolution")]
    LatticeTooLarge,
    #[error("pricing input `{0}` must be strictly positive and finite")]
    NonPositive(&'static str),
    #[error("pricing series lengths differ")]
    SeriesLength,
    #[error("pricing series need at least two periods")]
    TooShort,
    #[error("risk aversion must be finite and nonnegative")]
    BadRiskAversion,
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Dominance(#[from] DominanceError),
}

/// Scenario returns, one row per scenario and one column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsPanel {
    labels: Vec<String>,
    returns: DMatrix<f64>,
    probabilities: Vec<f64>,
}

impl ReturnsPanel {
    pub fn new(labels: Vec<String>, returns: DMatrix<f64>, probabilities: Vec<f64>) -> Result<Self, PortfolioError> {
        if returns.nrows() == 0 || returns.ncols() == 0 {
            return Err(PortfolioError::EmptyPanel);
        }
        if labels.len() != returns.ncols() {
            return Err(PortfolioError::Dimension {
                expected: returns.ncols(),
                got: labels.len(),
            });
        }
        if probabilities.len() != returns.nrows() {
            return Err(PortfolioError::Dimension {
                expected: returns.nrows(),
                got: probabilities.len(),
            });
        }
        if returns.iter().any(|v| !v.is_finite()) {
            return Err(PortfolioError::NonFinite);
        }
        let total: f64 = probabilities.iter().sum();
        if probabilities.iter().any(|p| !(p.is_finite() && *p > 0.0)) || (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(PortfolioError::BadProbabilities);
        }
        Ok(Self {
            labels,
            returns,
            probabilities,
        })
    }

    pub fn equally_likely(labels: Vec<String>, returns: DMatrix<f64>) -> Result<Self, PortfolioError> {
        let t = returns.nrows().max(1);
        Self::new(labels, returns, vec![1.0 / t as f64; t])
    }

    /// Reads a CSV with one column per asset and a header row. A column
    /// named `probability` (or `prob`), if present, holds scenario weights;
    /// otherwise scenarios are equally likely.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, PortfolioError> {
        let csv_err = |e: csv::Error| PortfolioError::Csv(e.to_string());
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let prob_col = header.iter().position(|h| h == "probability" || h == "prob");
        let labels: Vec<String> = header
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != prob_col)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut values = Vec::new();
        let mut probs = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| PortfolioError::Csv(format!("row {}: `{field}` is not a number", line + 1)))?;
                if Some(i) == prob_col {
                    probs.push(v);
                } else {
                    values.push(v);
                }
            }
        }
        let n = labels.len();
        if n == 0 || values.is_empty() {
            return Err(PortfolioError::EmptyPanel);
        }
        let returns = DMatrix::from_row_slice(values.len() / n, n, &values);
        match prob_col {
            Some(_) => Self::new(labels, returns, probs),
            None => Self::equally_likely(labels, returns),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn scenarios(&self) -> usize {
        self.returns.nrows()
    }

    pub fn assets(&self) -> usize {
        self.returns.ncols()
    }
}

/// A point of the simplex: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PortfolioWeights(Vec<f64>);

impl PortfolioWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self, PortfolioError> {
        let total: f64 = weights.iter().sum();
        if weights.is_empty()
            || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (total - 1.0).abs() > SIMPLEX_TOL
        {
            return Err(PortfolioError::NotOnSimplex);
        }
        Ok(Self(weights))
    }

    /// Everything in asset `i`.
    pub fn pure(n: usize, i: usize) -> Self {
        assert!(i < n, "asset index out of range");
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self(w)
    }

    pub fn equal(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
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
}

fn check_len(panel: &ReturnsPanel, w: &PortfolioWeights) -> Result<(), PortfolioError> {
    if w.len() != panel.assets() {
        return Err(PortfolioError::Dimension {
            expected: panel.assets(),
            got: w.len(),
        });
    }
    Ok(())
}

/// Distribution of the portfolio return `r_t' lambda` under the scenario
/// probabilities.
pub fn portfolio_return_dist(
    panel: &ReturnsPanel,
    lambda: &PortfolioWeights,
) -> Result<EmpiricalDistribution, PortfolioError> {
    check_len(panel, lambda)?;
    let values: Vec<f64> = panel
        .returns
        .row_iter()
        .map(|r| r.iter().zip(lambda.as_slice()).map(|(a, w)| a * w).sum())
        .collect();
    Ok(EmpiricalDistribution::new(&values, &panel.probabilities, Orientation::Return)?)
}

/// Whether portfolio `lambda` dominates `tau` at order `k`.
pub fn portfolio_dominates(
    panel: &ReturnsPanel,
    lambda: &PortfolioWeights,
    tau: &PortfolioWeights,
    k: usize,
) -> Result<SDResult, PortfolioError> {
    let a = portfolio_return_dist(panel, lambda)?;
    let b = portfolio_return_dist(panel, tau)?;
    Ok(sd_dominates_returns(&a, &b, k)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Efficiency {
    /// No dominating portfolio among the searched candidates.
    EfficientAtResolution,
    Inefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyReport {
    pub subject: PortfolioWeights,
    pub verdict: Efficiency,
    /// Lexicographically smallest dominating candidate found.
    pub dominating: Option<PortfolioWeights>,
    pub dominance: Option<SDResult>,
    pub order: usize,
    pub grid_resolution: usize,
    pub random_tries: usize,
    pub seed: u64,
    pub candidates: usize,
}

/// All simplex points with coordinates in multiples of `1/resolution`.
pub fn simplex_lattice(n: usize, resolution: usize) -> Result<Vec<PortfolioWeights>, PortfolioError> {
    if resolution == 0 {
        return Err(PortfolioError::BadResolution);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // C(resolution + n - 1, n - 1) without overflow
    let mut size = 1.0_f64;
    for i in 1..n {
        size = size * (resolution + i) as f64 / i as f64;
    }
    if size > MAX_LATTICE as f64 {
        return Err(PortfolioError::LatticeTooLarge);
    }
    let mut out = Vec::with_capacity(size.round() as usize);
    let mut counts = vec![0usize; n];
    fill(&mut counts, 0, resolution, resolution, &mut out);
    Ok(out)
}

fn fill(counts: &mut [usize], i: usize, left: usize, res: usize, out: &mut Vec<PortfolioWeights>) {
    if i + 1 == counts.len() {
        counts[i] = left;
        out.push(PortfolioWeights(counts.iter().map(|&c| c as f64 / res as f64).collect()));
        return;
    }
    for c in 0..=left {
        counts[i] = c;
        fill(counts, i + 1, left - c, res, out);
    }
}

/// Uniform point on the simplex from substream `index` of `seed`.
pub fn dirichlet_point(n: usize, seed: u64, index: u64) -> PortfolioWeights {
    let mut rng = rng::substream(seed, index);
    let e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = e.iter().sum();
    PortfolioWeights(e.into_iter().map(|v| v / total).collect())
}

/// Searches the lattice and `random_tries` uniform points for a portfolio
/// that dominates `tau` at order `k`.
pub fn is_sd_efficient(
    panel: &ReturnsPanel,
    tau: &PortfolioWeights,
    k: usize,
    grid_resolution: usize,
    random_tries: usize,
    seed: u64,
) -> Result<EfficiencyReport, PortfolioError> {
    check_len(panel, tau)?;
    let n = panel.assets();
    let mut candidates = simplex_lattice(n, grid_resolution)?;
    candidates.extend((0..random_tries as u64).map(|i| dirichlet_point(n, seed, i)));
    let subject = portfolio_return_dist(panel, tau)?;
    let results = candidates
        .par_iter()
        .map(|lambda| {
            let d = portfolio_return_dist(panel, lambda)?;
            Ok(sd_dominates_returns(&d, &subject, k)?)
        })
        .collect::<Result<Vec<SDResult>, PortfolioError>>()?;
    let best = candidates
        .iter()
        .zip(results)
        .filter(|(_, r)| r.dominates)
        .min_by(|a, b| a.0.partial_cmp(b.0).expect("weights are finite"));
    let (verdict, dominating, dominance) = match best {
        Some((l, r)) => (Efficiency::Inefficient, Some(l.clone()), Some(r)),
        None => (Efficiency::EfficientAtResolution, None, None),
    };
    Ok(EfficiencyReport {
        subject: tau.clone(),
        verdict,
        dominating,
        dominance,
        order: k,
        grid_resolution,
        random_tries,
        seed,
        candidates: candidates.len(),
    })
}
