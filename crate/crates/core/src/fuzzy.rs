//! Intuitionistic-fuzzy sample scoring. Each training sample gets a score in
//! [0,1] built from a membership degree (kernel-space closeness to its own
//! class center) and a non-membership degree (fraction of opposite-class
//! neighbors), plus the scalar class-imbalance weights d₊, d₋.
//!
//! The score computation is exact: a full Gaussian kernel over the training
//! fold. Neighborhood tests are evaluated on squared Euclidean distances via
//! a monotone threshold, so only the same-class blocks ever need `exp`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct IFConfig {
    /// Gaussian kernel width: K(a,b) = exp(-‖a-b‖²/mu²).
    pub mu: f64,
    /// Neighborhood radius in kernel-induced distance; None selects the
    /// median pairwise kernel distance of the fold.
    pub alpha: Option<f64>,
    /// Slack added to the class radius so the farthest sample keeps a
    /// nonzero membership.
    pub delta: f64,
}

impl IFConfig {
    pub fn new(mu: f64) -> IFConfig {
        IFConfig {
            mu,
            alpha: None,
            delta: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) {
            return Err(Error::NonPositiveMu(self.mu));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!(
                "radius slack delta must be positive, got {}",
                self.delta
            )));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return Err(Error::Config(format!(
                    "neighborhood radius alpha must be positive, got {a}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleWeighting {
    pub scores: Vec<f64>,
    pub d_pos: f64,
    pub d_neg: f64,
}

/// K(x1, x2) = exp(-‖x1-x2‖²/mu²).
pub fn gaussian_kernel(x1: &[f64], x2: &[f64], mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::NonPositiveMu(mu));
    }
    debug_assert_eq!(x1.len(), x2.len());
    let d2: f64 = x1
        .iter()
        .zip(x2)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((-d2 / (mu * mu)).exp())
}

/// Kernel-space distance from sample `i` to the mean embedding of
/// `same_class`: sqrt(K_ii - (2/m)·Σⱼ K_ij + (1/m²)·Σⱼₗ K_jl).
pub fn kernel_distance_to_center(i: usize, same_class: &[usize], k: &DMatrix<f64>) -> Result<f64> {
    if same_class.is_empty() {
        return Err(Error::EmptyClass);
    }
    let m = same_class.len() as f64;
    let kii = k[(i, i)];
    let row: f64 = same_class.iter().map(|&j| k[(i, j)]).sum();
    let mut block = 0.0;
    for &j in same_class {
        for &l in same_class {
            block += k[(j, l)];
        }
    }
    Ok((kii - 2.0 * row / m + block / (m * m)).max(0.0).sqrt())
}

/// Squared Euclidean distances between all rows of x, via the Gram matrix.
fn squared_distance_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d2 = x * x.transpose();
    let sq: Vec<f64> = (0..n).map(|i| d2[(i, i)]).collect();
    d2.as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, col)| {
            let sj = sq[j];
            for (i, v) in col.iter_mut().enumerate() {
                *v = (sq[i] + sj - 2.0 * *v).max(0.0);
            }
        });
    d2
}

fn lower_median(mut vals: Vec<f64>) -> f64 {
    let mid = (vals.len() - 1) / 2;
    let (_, med, _) =
        vals.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite distances"));
    *med
}

fn median_from_d2(d2: &DMatrix<f64>, mu: f64) -> f64 {
    let n = d2.nrows();
    let mut tri = Vec::with_capacity(n * (n - 1) / 2);
    for j in 0..n {
        for i in 0..j {
            tri.push(d2[(i, j)]);
        }
    }
    let med_d2 = lower_median(tri);
    (2.0 - 2.0 * (-med_d2 / (mu * mu)).exp()).max(0.0).sqrt()
}

/// Median pairwise kernel distance of the dataset, the default neighborhood
/// radius. Uses the lower median for even pair counts.
pub fn median_kernel_distance(ds: &Dataset, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::NonPositiveMu(mu));
    }
    if ds.n() < 2 {
        return Err(Error::DegenerateInputs("need at least two samples".into()));
    }
    Ok(median_from_d2(&squared_distance_matrix(&ds.x), mu))
}

/// Intuitionistic-fuzzy score per training sample, in the original sample
/// order. For sample i of class c:
///   membership  μᵢ = 1 - distᵢ/(r_c + δ), r_c = max same-class center distance;
///   non-membership νᵢ = (1-μᵢ)·ρᵢ, ρᵢ = opposite-class fraction of the
///     α-neighborhood of i (i itself excluded; 0 when the neighborhood is empty);
///   score sᵢ = μᵢ if νᵢ = 0; 0 if μᵢ ≤ νᵢ; else (1-νᵢ)/(2-μᵢ-νᵢ).
pub fn if_scores(ds: &Dataset, cfg: &IFConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (pos, neg) = ds.class_indices();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }
    let n = ds.n();
    let mu2 = cfg.mu * cfg.mu;
    let d2 = squared_distance_matrix(&ds.x);

    let alpha = match cfg.alpha {
        Some(a) => a,
        None => median_from_d2(&d2, cfg.mu),
    };

    // Membership ignores the neighborhood; it needs exp only on the two
    // same-class blocks.
    let mut membership = vec![0.0; n];
    for idx in [&pos, &neg] {
        let m = idx.len() as f64;
        let row_sums: Vec<f64> = idx
            .par_iter()
            .map(|&i| idx.iter().map(|&j| (-d2[(i, j)] / mu2).exp()).sum())
            .collect();
        let block: f64 = row_sums.iter().sum();
        let dists: Vec<f64> = row_sums
            .iter()
            .map(|&s| (1.0 - 2.0 * s / m + block / (m * m)).max(0.0).sqrt())
            .collect();
        let radius = dists.iter().cloned().fold(0.0, f64::max);
        for (slot, &dist) in idx.iter().zip(&dists) {
            membership[*slot] = 1.0 - dist / (radius + cfg.delta);
        }
    }

    // Kernel distance ≤ alpha is equivalent to a squared-Euclidean threshold,
    // so neighborhood counts never touch exp.
    let q = 1.0 - alpha * alpha / 2.0;
    let everything_within = q <= 0.0;
    let t = if everything_within { f64::INFINITY } else { -mu2 * q.ln() };

    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let yi = ds.y[i];
            let mut cnt_all = 0usize;
            let mut cnt_opp = 0usize;
            for j in 0..n {
                if j == i {
                    continue;
                }
                if d2[(i, j)] <= t {
                    cnt_all += 1;
                    if ds.y[j] != yi {
                        cnt_opp += 1;
                    }
                }
            }
            let rho = if cnt_all == 0 {
                0.0
            } else {
                cnt_opp as f64 / cnt_all as f64
            };
            let mu_i = membership[i];
            let nu_i = (1.0 - mu_i) * rho;
            if nu_i == 0.0 {
                mu_i
            } else if mu_i <= nu_i {
                0.0
            } else {
                (1.0 - nu_i) / (2.0 - mu_i - nu_i)
            }
        })
        .collect();
    Ok(scores)
}

/// Class-imbalance weights under the minority-positive convention:
/// d₊ = 1, d₋ = l_p/l_n.
pub fn class_weights(y: &[i8]) -> Result<(f64, f64)> {
    let lp = y.iter().filter(|&&v| v > 0).count();
    let ln = y.len() - lp;
    if lp == 0 || ln == 0 {
        return Err(Error::SingleClass);
    }
    if lp > ln {
        return Err(Error::PositiveNotMinority);
    }
    Ok((1.0, lp as f64 / ln as f64))
}

/// IF scores plus class weights in one record.
pub fn sample_weighting(ds: &Dataset, cfg: &IFConfig) -> Result<SampleWeighting> {
    let scores = if_scores(ds, cfg)?;
    let (d_pos, d_neg) = class_weights(&ds.y)?;
    Ok(SampleWeighting {
        scores,
        d_pos,
        d_neg,
    })
}
