//! Evaluation harness: confusion-matrix metrics, cross-validated grid
//! search over the hyperparameter axes each variant actually uses, and the
//! rank-based significance tests (Friedman, Nemenyi, sign test) used to
//! compare classifiers across a dataset collection.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{normalize, stratified_kfold, Dataset};
use crate::error::{Error, Result};
use crate::featuremap::{init_featuremap, Activation};
use crate::fuzzy::{class_weights, if_scores, IFConfig};
use crate::graph::{embed_from_scatter, embed_matrix, lda_scatters, lfda_weights, GraphSpec};
use crate::linalg::mirror_symmetric;
use crate::solver::{
    assemble_parts, build_design, solve_weighted, ModelKind, SolveParts,
};

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }
}

pub fn confusion(y_true: &[i8], y_pred: &[i8]) -> Result<Confusion> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    let mut c = Confusion::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t > 0, p > 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
        }
    }
    Ok(c)
}

/// Scalar summaries of a confusion matrix. `auc` is the balanced accuracy
/// (sensitivity + specificity)/2; `roc_auc` (rank-based) is computed
/// separately from decision scores and reported for reference only.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub auc: f64,
    pub g_mean: f64,
    pub f_measure: f64,
    /// False when no positive prediction was made, leaving precision (and
    /// with it the F-measure) undefined; both are reported as 0 then.
    pub precision_defined: bool,
}

pub fn metrics(c: &Confusion) -> Result<Metrics> {
    let pos = c.tp + c.fn_;
    let neg = c.tn + c.fp;
    if pos == 0 || neg == 0 {
        return Err(Error::EmptyClassInTest);
    }
    let sensitivity = c.tp as f64 / pos as f64;
    let specificity = c.tn as f64 / neg as f64;
    let accuracy = (c.tp + c.tn) as f64 / c.total() as f64;
    let auc = (sensitivity + specificity) / 2.0;
    let g_mean = (sensitivity * specificity).sqrt();
    let predicted_pos = c.tp + c.fp;
    let precision_defined = predicted_pos > 0;
    let f_measure = if precision_defined {
        let precision = c.tp as f64 / predicted_pos as f64;
        if precision + sensitivity > 0.0 {
            2.0 * precision * sensitivity / (precision + sensitivity)
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(Metrics {
        accuracy,
        sensitivity,
        specificity,
        auc,
        g_mean,
        f_measure,
        precision_defined,
    })
}

/// Rank-based ROC area with tied scores averaged. Reported alongside the
/// balanced-accuracy `auc`, never used for model selection.
pub fn roc_auc(y_true: &[i8], scores: &[f64]) -> Result<f64> {
    if y_true.len() != scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels but {} scores",
            y_true.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n_pos = y_true.iter().filter(|&&v| v > 0).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::EmptyClassInTest);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if y_true[idx] > 0 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Per-dataset ranks (1 = best, ties share the average rank) and their
/// column means. `table[i][j]` is the score of model j on dataset i.
#[derive(Clone, Debug)]
pub struct RankTable {
    pub ranks: Vec<Vec<f64>>,
    pub average: Vec<f64>,
}

pub fn average_ranks(table: &[Vec<f64>]) -> Result<RankTable> {
    if table.is_empty() || table[0].is_empty() {
        return Err(Error::DegenerateInputs("empty score table".into()));
    }
    let d = table[0].len();
    let mut ranks = Vec::with_capacity(table.len());
    for row in table {
        if row.len() != d {
            return Err(Error::DimensionMismatch(
                "ragged score table".into(),
            ));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        let mut r = vec![0.0; d];
        let mut i = 0;
        while i < d {
            let mut j = i;
            while j + 1 < d && row[order[j + 1]] == row[order[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &idx in &order[i..=j] {
                r[idx] = avg;
            }
            i = j + 1;
        }
        ranks.push(r);
    }
    let k = table.len() as f64;
    let average = (0..d)
        .map(|j| ranks.iter().map(|r| r[j]).sum::<f64>() / k)
        .collect();
    Ok(RankTable { ranks, average })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub ff: f64,
    /// True when the F-statistic denominator K(d-1) - χ² is non-positive,
    /// which sends F to infinity.
    pub ff_infinite: bool,
    pub datasets: usize,
    pub models: usize,
}

/// F-statistic transform of a Friedman χ² for d models on k datasets.
pub fn f_statistic(chi2: f64, d: usize, k: usize) -> (f64, bool) {
    let denom = k as f64 * (d as f64 - 1.0) - chi2;
    if denom <= 0.0 {
        (f64::INFINITY, true)
    } else {
        ((k as f64 - 1.0) * chi2 / denom, false)
    }
}

pub fn friedman(table: &[Vec<f64>]) -> Result<FriedmanResult> {
    let rt = average_ranks(table)?;
    let d = rt.average.len();
    let k = table.len();
    if d < 2 || k < 2 {
        return Err(Error::DegenerateInputs(format!(
            "friedman needs at least 2 models and 2 datasets, got {d} and {k}"
        )));
    }
    let df = d as f64;
    let kf = k as f64;
    let sum_sq: f64 = rt.average.iter().map(|r| r * r).sum();
    let chi2 = 12.0 * kf / (df * (df + 1.0)) * (sum_sq - df * (df + 1.0) * (df + 1.0) / 4.0);
    let (ff, ff_infinite) = f_statistic(chi2, d, k);
    Ok(FriedmanResult {
        chi2,
        ff,
        ff_infinite,
        datasets: k,
        models: d,
    })
}

/// Two-tailed Studentized-range quantiles q_α/√2 tables for the Nemenyi
/// test, d = 2..=10.
const NEMENYI_Q_05: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const NEMENYI_Q_10: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

/// Critical difference of average ranks: CD = q_α √(d(d+1)/(6k)).
pub fn nemenyi_cd(d: usize, k: usize, alpha: f64) -> Result<f64> {
    if !(2..=10).contains(&d) {
        return Err(Error::UnsupportedD(d));
    }
    if k == 0 {
        return Err(Error::DegenerateInputs("no datasets".into()));
    }
    let q = if (alpha - 0.05).abs() < 1e-12 {
        NEMENYI_Q_05[d - 2]
    } else if (alpha - 0.10).abs() < 1e-12 {
        NEMENYI_Q_10[d - 2]
    } else {
        return Err(Error::Config(format!(
            "nemenyi table covers alpha 0.05 and 0.10, got {alpha}"
        )));
    };
    Ok(q * (d as f64 * (d as f64 + 1.0) / (6.0 * k as f64)).sqrt())
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SignTestResult {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    /// wins + ties/2.
    pub effective_wins: f64,
    /// K/2 + 1.96·√K/2 at the 5% level.
    pub threshold: f64,
    pub significant: bool,
}

/// Pairwise sign test: the first model beats the second significantly when
/// its effective wins reach K/2 + 1.96√K/2.
pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTestResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {} scores",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::DegenerateInputs("no paired scores".into()));
    }
    let mut wins = 0;
    let mut ties = 0;
    let mut losses = 0;
    for (&x, &y) in a.iter().zip(b) {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite);
        }
        match x.total_cmp(&y) {
            std::cmp::Ordering::Greater => wins += 1,
            std::cmp::Ordering::Equal => ties += 1,
            std::cmp::Ordering::Less => losses += 1,
        }
    }
    let k = a.len() as f64;
    let effective_wins = wins as f64 + ties as f64 / 2.0;
    let threshold = k / 2.0 + 1.96 * k.sqrt() / 2.0;
    Ok(SignTestResult {
        wins,
        ties,
        losses,
        effective_wins,
        threshold,
        significant: effective_wins >= threshold,
    })
}

/// Hyperparameter axes. Variants that ignore an axis get it collapsed to a
/// single placeholder value so the cross-product stays small.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSpec {
    pub h_l: Vec<usize>,
    pub c: Vec<f64>,
    pub mu: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec {
            h_l: (0..11).map(|i| 3 + 20 * i).collect(),
            c: (-5..=5).map(|i| 10f64.powi(i)).collect(),
            mu: (-5..=5).map(|i| 2f64.powi(i)).collect(),
            theta: (-5..=4).map(|i| 10f64.powi(i)).collect(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.h_l.is_empty() || self.c.is_empty() || self.mu.is_empty() || self.theta.is_empty()
        {
            return Err(Error::Config("grid axes must be non-empty".into()));
        }
        if self.h_l.iter().any(|&h| h == 0) {
            return Err(Error::Config("hidden width 0 in grid".into()));
        }
        if self.c.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("non-positive C in grid".into()));
        }
        if self.mu.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config("non-positive mu in grid".into()));
        }
        if self.theta.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Config("negative theta in grid".into()));
        }
        Ok(())
    }

    /// Collapses the axes the variant ignores and removes duplicates while
    /// keeping first-seen order.
    pub fn effective(&self, variant: ModelKind) -> GridSpec {
        fn dedup_f64(v: &[f64]) -> Vec<f64> {
            let mut out: Vec<f64> = Vec::new();
            for &x in v {
                if !out.iter().any(|&y| y == x) {
                    out.push(x);
                }
            }
            out
        }
        let mut h_l: Vec<usize> = Vec::new();
        for &h in &self.h_l {
            if !h_l.contains(&h) {
                h_l.push(h);
            }
        }
        GridSpec {
            h_l,
            c: dedup_f64(&self.c),
            mu: if variant.uses_if() || variant == ModelKind::GeIfrvflCil2 {
                dedup_f64(&self.mu)
            } else {
                vec![1.0]
            },
            theta: if variant.uses_graph() {
                dedup_f64(&self.theta)
            } else {
                vec![0.0]
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridCell {
    pub h_l: usize,
    pub c: f64,
    pub mu: f64,
    pub theta: f64,
    /// Mean test AUC (balanced accuracy) across folds.
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub g_mean: f64,
    pub f_measure: f64,
    pub roc_auc: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub dataset: String,
    pub variant: ModelKind,
    pub best: GridCell,
    pub cells: Vec<GridCell>,
    pub folds: usize,
    pub seed: u64,
}

/// Feature-map seed for a given hidden width, derived from the master seed
/// so every width gets an independent stream but reruns are identical.
pub fn fm_seed(master: u64, h_l: usize) -> u64 {
    master
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(h_l as u64)
}

struct FoldPrep {
    train: Dataset,
    test_x: DMatrix<f64>,
    test_y: Vec<i8>,
}

/// Everything reusable for one (fold, h_l) pair.
struct WidthPrep {
    z: DMatrix<f64>,
    z_test: DMatrix<f64>,
    ztz: Option<DMatrix<f64>>,
}

/// Cross-validated grid search. For every fold the training split is
/// min-max normalized (the scaler is reused on the test split), the feature
/// map per hidden width is shared across all (C, mu, theta) cells, the
/// weighted Gram blocks are shared across the (C, theta) plane, and each
/// cell costs one Cholesky solve. Ties are broken toward smaller h_l, then
/// smaller C, theta, and mu.
pub fn grid_search(
    ds: &Dataset,
    variant: ModelKind,
    grids: &GridSpec,
    k: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    grids.validate()?;
    let grid = grids.effective(variant);
    let folds = stratified_kfold(ds, k, seed)?;

    let preps: Vec<FoldPrep> = folds
        .iter()
        .map(|(train_idx, test_idx)| {
            let (train, nrm) = normalize(&ds.subset(train_idx));
            let test = nrm.apply(&ds.subset(test_idx));
            FoldPrep {
                train,
                test_x: test.x,
                test_y: test.y,
            }
        })
        .collect();

    let d_per_fold: Vec<(f64, f64)> = if variant.uses_cil() {
        preps
            .iter()
            .map(|p| class_weights(&p.train.y))
            .collect::<Result<_>>()?
    } else {
        vec![(1.0, 1.0); preps.len()]
    };

    // scores[fold][mu_index]
    let mut score_cache: Vec<HashMap<usize, Vec<f64>>> =
        (0..preps.len()).map(|_| HashMap::new()).collect();

    let mut cells: Vec<GridCell> = Vec::new();
    for &h_l in &grid.h_l {
        let fms: Vec<_> = preps
            .iter()
            .map(|p| init_featuremap(p.train.p(), h_l, Activation::default(), fm_seed(seed, h_l)))
            .collect::<Result<_>>()?;
        let width_preps: Vec<WidthPrep> = preps
            .iter()
            .zip(&fms)
            .map(|(p, fm)| {
                let z = build_design(&p.train.x, fm, variant)?;
                let z_test = build_design(&p.test_x, fm, variant)?;
                let ztz = if variant == ModelKind::GeIfrvflCil1 {
                    let mut m = z.transpose() * &z;
                    mirror_symmetric(&mut m);
                    Some(m)
                } else {
                    None
                };
                Ok(WidthPrep { z, z_test, ztz })
            })
            .collect::<Result<_>>()?;

        for (mu_idx, &mu) in grid.mu.iter().enumerate() {
            // Per-fold sample scores, parts, and graph for this mu.
            let mut fold_parts: Vec<SolveParts> = Vec::with_capacity(preps.len());
            let mut fold_graphs: Vec<Option<DMatrix<f64>>> = Vec::with_capacity(preps.len());
            for (f, (p, wp)) in preps.iter().zip(&width_preps).enumerate() {
                let scores: &Vec<f64> = if variant.uses_if() {
                    score_cache[f]
                        .entry(mu_idx)
                        .or_insert(if_scores(&p.train, &IFConfig::new(mu))?)
                } else {
                    score_cache[f].entry(0).or_insert(vec![1.0; p.train.n()])
                };
                fold_parts.push(assemble_parts(&wp.z, &p.train.y, scores, d_per_fold[f])?);
                let g = match variant {
                    ModelKind::GeIfrvflCil1 => {
                        let spec = GraphSpec::lda();
                        let (g_i, g_p) = lda_scatters(&wp.z, &p.train.y, wp.ztz.as_ref())?;
                        Some(embed_from_scatter(g_i, g_p, &spec)?.g)
                    }
                    ModelKind::GeIfrvflCil2 => {
                        let spec = GraphSpec::lfda(mu);
                        let pair = lfda_weights(&wp.z, &p.train.y, spec.sigma)?;
                        Some(embed_matrix(&wp.z, &pair, &spec)?.g)
                    }
                    _ => None,
                };
                fold_graphs.push(g);
            }

            for &c in &grid.c {
                for &theta in &grid.theta {
                    let mut sums = [0.0f64; 6];
                    for f in 0..preps.len() {
                        let beta =
                            solve_weighted(&fold_parts[f], fold_graphs[f].as_ref(), c, theta)?;
                        let raw = &width_preps[f].z_test * &beta;
                        let pred: Vec<i8> =
                            raw.iter().map(|&s| if s >= 0.0 { 1 } else { -1 }).collect();
                        let m = metrics(&confusion(&preps[f].test_y, &pred)?)?;
                        let scores_vec: Vec<f64> = raw.iter().copied().collect();
                        let ra = roc_auc(&preps[f].test_y, &scores_vec)?;
                        sums[0] += m.auc;
                        sums[1] += m.sensitivity;
                        sums[2] += m.specificity;
                        sums[3] += m.g_mean;
                        sums[4] += m.f_measure;
                        sums[5] += ra;
                    }
                    let nf = preps.len() as f64;
                    cells.push(GridCell {
                        h_l,
                        c,
                        mu,
                        theta,
                        auc: sums[0] / nf,
                        sensitivity: sums[1] / nf,
                        specificity: sums[2] / nf,
                        g_mean: sums[3] / nf,
                        f_measure: sums[4] / nf,
                        roc_auc: sums[5] / nf,
                    });
                }
            }
        }
        if !variant.uses_if() {
            // Unit scores are mu-independent; drop the cache between widths
            // anyway to keep memory flat.
            for cache in &mut score_cache {
                cache.clear();
            }
        }
    }

    let best = cells
        .iter()
        .min_by(|a, b| {
            (-a.auc, a.h_l, a.c, a.theta, a.mu)
                .partial_cmp(&(-b.auc, b.h_l, b.c, b.theta, b.mu))
                .unwrap()
        })
        .ok_or_else(|| Error::DegenerateInputs("empty grid".into()))?
        .clone();

    Ok(GridSearchResult {
        dataset: ds.name.clone(),
        variant,
        best,
        cells,
        folds: k,
        seed,
    })
}

/// One benchmark row: a dataset's best cell per variant.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchRow {
    pub dataset: String,
    pub results: Vec<(ModelKind, GridCell)>,
}

/// Table layout shared by the CSV and markdown writers: one row per dataset
/// with (AUC, h_l) and (C, mu, theta) of the winning cell per variant, then
/// an average-AUC row and an average-rank row.
pub fn results_csv(rows: &[BenchRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::DegenerateInputs("no benchmark rows".into()));
    }
    let variants: Vec<ModelKind> = rows[0].results.iter().map(|(v, _)| *v).collect();
    let mut out = String::from("dataset");
    for v in &variants {
        out.push_str(&format!(",{0}_auc,{0}_h_l,{0}_c,{0}_mu,{0}_theta", v.tag()));
    }
    out.push('\n');
    for row in rows {
        out.push_str(&row.dataset);
        for (_, cell) in &row.results {
            out.push_str(&format!(
                ",{},{},{},{},{}",
                cell.auc, cell.h_l, cell.c, cell.mu, cell.theta
            ));
        }
        out.push('\n');
    }
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.results.iter().map(|(_, c)| c.auc).collect())
        .collect();
    out.push_str("average_auc");
    for j in 0..variants.len() {
        let mean = table.iter().map(|r| r[j]).sum::<f64>() / table.len() as f64;
        out.push_str(&format!(",{mean},,,,"));
    }
    out.push('\n');
    let rt = average_ranks(&table)?;
    out.push_str("average_rank");
    for r in &rt.average {
        out.push_str(&format!(",{r},,,,"));
    }
    out.push('\n');
    Ok(out)
}

pub fn results_markdown(rows: &[BenchRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::DegenerateInputs("no benchmark rows".into()));
    }
    let variants: Vec<ModelKind> = rows[0].results.iter().map(|(v, _)| *v).collect();
    let mut out = String::from("| dataset |");
    for v in &variants {
        out.push_str(&format!(" {} |", v.tag()));
    }
    out.push('\n');
    out.push_str("| --- |");
    for _ in &variants {
        out.push_str(" --- |");
    }
    out.push('\n');
    for row in rows {
        out.push_str(&format!("| {} |", row.dataset));
        for (_, cell) in &row.results {
            out.push_str(&format!(
                " {:.4} (h={}) (C={:.0e}, mu={}, th={:.0e}) |",
                cell.auc, cell.h_l, cell.c, cell.mu, cell.theta
            ));
        }
        out.push('\n');
    }
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.results.iter().map(|(_, c)| c.auc).collect())
        .collect();
    out.push_str("| average AUC |");
    for j in 0..variants.len() {
        let mean = table.iter().map(|r| r[j]).sum::<f64>() / table.len() as f64;
        out.push_str(&format!(" {mean:.4} |"));
    }
    out.push('\n');
    let rt = average_ranks(&table)?;
    out.push_str("| average rank |");
    for r in &rt.average {
        out.push_str(&format!(" {r:.4} |"));
    }
    out.push('\n');
    Ok(out)
}
