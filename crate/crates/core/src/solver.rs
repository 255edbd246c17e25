//! Closed-form training of the randomized-network family. All five variants
//! share one normal-equation solve
//!
//!   [ (c0/C)(I + θG) + Zᵀdiag(w)Z ] β = Zᵀ(w ⊙ y)
//!
//! with c0 = 1/d₊ + 1/d₋ and per-sample weights w_i = (1 + d₊/d₋)s_i on the
//! positive class and (1 + d₋/d₊)s_i on the negative class. The data-dependent
//! blocks are independent of C and θ, so `SolveParts` can be assembled once
//! and reused across a (C, θ) grid; each grid cell then costs one Cholesky.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Normalizer};
use crate::error::{Error, Result};
use crate::featuremap::{enhance, hidden_map, FeatureMapParams};
use crate::fuzzy::{class_weights, if_scores, IFConfig};
use crate::graph::{embed_matrix, embed_matrix_lda, lfda_weights, EmbedMatrix, GraphKind, GraphSpec};
use crate::linalg::{mirror_symmetric, SpdSolver};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    GeIfrvflCil1,
    GeIfrvflCil2,
    Ifrvfl,
    Rvfl,
    Elm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::GeIfrvflCil1,
        ModelKind::GeIfrvflCil2,
        ModelKind::Ifrvfl,
        ModelKind::Rvfl,
        ModelKind::Elm,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::GeIfrvflCil1 => "ge-ifrvfl-cil-1",
            ModelKind::GeIfrvflCil2 => "ge-ifrvfl-cil-2",
            ModelKind::Ifrvfl => "ifrvfl",
            ModelKind::Rvfl => "rvfl",
            ModelKind::Elm => "elm",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::Config(format!("unknown model tag '{s}'")))
    }

    /// Graph regularizer present.
    pub fn uses_graph(self) -> bool {
        matches!(self, ModelKind::GeIfrvflCil1 | ModelKind::GeIfrvflCil2)
    }

    /// Intuitionistic-fuzzy sample scores (otherwise S = I).
    pub fn uses_if(self) -> bool {
        matches!(
            self,
            ModelKind::GeIfrvflCil1 | ModelKind::GeIfrvflCil2 | ModelKind::Ifrvfl
        )
    }

    /// Imbalance class weights d₋ = l₊/l₋ (otherwise d = (1, 1)).
    pub fn uses_cil(self) -> bool {
        matches!(self, ModelKind::GeIfrvflCil1 | ModelKind::GeIfrvflCil2)
    }

    /// Direct input-to-output links, i.e. Z = [X H] instead of Z = H.
    pub fn direct_links(self) -> bool {
        self != ModelKind::Elm
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: ModelKind,
    pub c: f64,
    pub theta: f64,
    pub mu: f64,
    pub graph: Option<GraphSpec>,
}

impl TrainConfig {
    /// Fills the graph slot to match the variant; the LFDA locality scale is
    /// tied to the kernel parameter mu by default.
    pub fn new(variant: ModelKind, c: f64, theta: f64, mu: f64) -> TrainConfig {
        let graph = match variant {
            ModelKind::GeIfrvflCil1 => Some(GraphSpec::lda()),
            ModelKind::GeIfrvflCil2 => Some(GraphSpec::lfda(mu)),
            _ => None,
        };
        TrainConfig {
            variant,
            c,
            theta,
            mu,
            graph,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("C must be positive, got {}", self.c)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::Config(format!(
                "theta must be non-negative, got {}",
                self.theta
            )));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::Config(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        match (self.variant.uses_graph(), &self.graph) {
            (true, Some(spec)) => {
                let want = match self.variant {
                    ModelKind::GeIfrvflCil1 => GraphKind::Lda,
                    _ => GraphKind::Lfda,
                };
                if spec.kind != want {
                    return Err(Error::ConfigMismatch(format!(
                        "variant {} requires a {:?} graph, got {:?}",
                        self.variant.tag(),
                        want,
                        spec.kind
                    )));
                }
                spec.validate()?;
            }
            (true, None) => {
                return Err(Error::ConfigMismatch(format!(
                    "variant {} requires a graph spec",
                    self.variant.tag()
                )));
            }
            (false, Some(_)) => {
                return Err(Error::ConfigMismatch(format!(
                    "variant {} takes no graph spec",
                    self.variant.tag()
                )));
            }
            (false, None) => {
                if self.theta != 0.0 {
                    return Err(Error::ConfigMismatch(format!(
                        "variant {} has no graph, so theta must be 0",
                        self.variant.tag()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// C- and θ-independent pieces of the normal equations.
#[derive(Clone, Debug)]
pub struct SolveParts {
    /// Zᵀ diag(w) Z, mirrored symmetric.
    pub a: DMatrix<f64>,
    /// Zᵀ (w ⊙ y).
    pub rhs: DVector<f64>,
    /// 1/d₊ + 1/d₋; divide by C for the regularizer scale.
    pub c0_unit: f64,
}

/// w_i = (1 + d₊/d₋)s_i on positives, (1 + d₋/d₊)s_i on negatives.
pub fn sample_weights(y: &[i8], scores: &[f64], d: (f64, f64)) -> Result<Vec<f64>> {
    if y.len() != scores.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels but {} scores",
            y.len(),
            scores.len()
        )));
    }
    if !(d.0 > 0.0 && d.1 > 0.0) {
        return Err(Error::Config(format!(
            "class weights must be positive, got ({}, {})",
            d.0, d.1
        )));
    }
    let w_pos = 1.0 + d.0 / d.1;
    let w_neg = 1.0 + d.1 / d.0;
    Ok(y.iter()
        .zip(scores)
        .map(|(&yi, &si)| if yi > 0 { w_pos * si } else { w_neg * si })
        .collect())
}

pub fn assemble_parts(
    z: &DMatrix<f64>,
    y: &[i8],
    scores: &[f64],
    d: (f64, f64),
) -> Result<SolveParts> {
    if z.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "Z has {} rows but y has {} labels",
            z.nrows(),
            y.len()
        )));
    }
    let w = sample_weights(y, scores, d)?;
    let mut zw = z.clone();
    for (i, &wi) in w.iter().enumerate() {
        for v in zw.row_mut(i).iter_mut() {
            *v *= wi;
        }
    }
    let mut a = z.transpose() * &zw;
    mirror_symmetric(&mut a);
    let wy = DVector::from_fn(y.len(), |i, _| if y[i] > 0 { w[i] } else { -w[i] });
    let rhs = z.transpose() * wy;
    Ok(SolveParts {
        a,
        rhs,
        c0_unit: 1.0 / d.0 + 1.0 / d.1,
    })
}

/// Solves the normal equations for one (C, θ) cell.
pub fn solve_weighted(
    parts: &SolveParts,
    g: Option<&DMatrix<f64>>,
    c: f64,
    theta: f64,
) -> Result<DVector<f64>> {
    let dim = parts.a.nrows();
    if let Some(g) = g {
        if g.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "graph matrix is {:?} but the design width is {dim}",
                g.shape()
            )));
        }
    }
    let scale = parts.c0_unit / c;
    let mut lhs = parts.a.clone();
    for i in 0..dim {
        lhs[(i, i)] += scale;
    }
    if theta != 0.0 {
        let g = g.ok_or_else(|| {
            Error::ConfigMismatch("theta > 0 requires a graph matrix".into())
        })?;
        let st = scale * theta;
        lhs.zip_apply(g, |l, gi| *l += st * gi);
    }
    mirror_symmetric(&mut lhs);
    let solver = SpdSolver::new(lhs)?;
    let beta = solver.solve(&parts.rhs);
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("solution is not finite".into()));
    }
    Ok(beta)
}

/// Z per variant: [X H] with direct links, H alone for ELM.
pub fn build_design(x: &DMatrix<f64>, fm: &FeatureMapParams, kind: ModelKind) -> Result<DMatrix<f64>> {
    let h = hidden_map(x, fm)?;
    if kind.direct_links() {
        enhance(x, &h)
    } else {
        Ok(h)
    }
}

/// Graph regularizer on the design matrix, when the variant has one.
pub fn graph_for(z: &DMatrix<f64>, y: &[i8], cfg: &TrainConfig) -> Result<Option<EmbedMatrix>> {
    match (&cfg.graph, cfg.variant) {
        (Some(spec), ModelKind::GeIfrvflCil1) => {
            Ok(Some(embed_matrix_lda(z, y, spec, None)?))
        }
        (Some(spec), ModelKind::GeIfrvflCil2) => {
            let pair = lfda_weights(z, y, spec.sigma)?;
            Ok(Some(embed_matrix(z, &pair, spec)?))
        }
        _ => Ok(None),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModel {
    pub fm: FeatureMapParams,
    pub beta: DVector<f64>,
    pub config: TrainConfig,
    pub normalizer: Option<Normalizer>,
}

impl TrainedModel {
    pub fn with_normalizer(mut self, nrm: Normalizer) -> TrainedModel {
        self.normalizer = Some(nrm);
        self
    }

    fn design_width(&self) -> usize {
        if self.config.variant.direct_links() {
            self.fm.p() + self.fm.h_l()
        } else {
            self.fm.h_l()
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        let text = fs::read_to_string(path)?;
        let model: TrainedModel = serde_json::from_str(&text)?;
        model.config.validate()?;
        if model.beta.len() != model.design_width() {
            return Err(Error::ConfigMismatch(format!(
                "beta has {} entries but the feature map implies {}",
                model.beta.len(),
                model.design_width()
            )));
        }
        Ok(model)
    }
}

/// Training entry point with the sample weighting precomputed. Grid search
/// and the timing harness use this to keep scoring out of the solve path.
pub fn fit_with_weights(
    ds: &Dataset,
    cfg: &TrainConfig,
    fm: &FeatureMapParams,
    scores: &[f64],
    d: (f64, f64),
) -> Result<TrainedModel> {
    cfg.validate()?;
    if fm.p() != ds.p() {
        return Err(Error::DimensionMismatch(format!(
            "feature map expects {} inputs but the dataset has {}",
            fm.p(),
            ds.p()
        )));
    }
    let z = build_design(&ds.x, fm, cfg.variant)?;
    let g = graph_for(&z, &ds.y, cfg)?;
    let parts = assemble_parts(&z, &ds.y, scores, d)?;
    let beta = solve_weighted(&parts, g.as_ref().map(|em| &em.g), cfg.c, cfg.theta)?;
    Ok(TrainedModel {
        fm: fm.clone(),
        beta,
        config: cfg.clone(),
        normalizer: None,
    })
}

/// Full training path: derives the variant's sample scores and class weights
/// from the data, then solves.
pub fn fit(ds: &Dataset, cfg: &TrainConfig, fm: &FeatureMapParams) -> Result<TrainedModel> {
    cfg.validate()?;
    let scores = if cfg.variant.uses_if() {
        if_scores(ds, &IFConfig::new(cfg.mu))?
    } else {
        vec![1.0; ds.n()]
    };
    let d = if cfg.variant.uses_cil() {
        class_weights(&ds.y)?
    } else {
        (1.0, 1.0)
    };
    fit_with_weights(ds, cfg, fm, &scores, d)
}

/// Residuals of the optimality system at a candidate β. The slack variables
/// are reconstructed from the primal constraints (ξ = Y - Zβ) and the duals
/// from the slack conditions (α = l S ξ), so the stationarity row is the
/// informative one; the other four confirm the reconstruction identities.
#[derive(Clone, Copy, Debug)]
pub struct KKTWitness {
    pub stationarity: f64,
    pub slack_pos: f64,
    pub slack_neg: f64,
    pub primal_pos: f64,
    pub primal_neg: f64,
}

impl KKTWitness {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.slack_pos)
            .max(self.slack_neg)
            .max(self.primal_pos)
            .max(self.primal_neg)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn kkt_residual(
    z: &DMatrix<f64>,
    y: &[i8],
    scores: &[f64],
    d: (f64, f64),
    c: f64,
    theta: f64,
    g: Option<&DMatrix<f64>>,
    beta: &DVector<f64>,
) -> Result<KKTWitness> {
    let n = z.nrows();
    let dim = z.ncols();
    if y.len() != n || scores.len() != n {
        return Err(Error::DimensionMismatch(
            "labels and scores must match the design rows".into(),
        ));
    }
    if beta.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "beta has {} entries but the design width is {dim}",
            beta.len()
        )));
    }
    let l_pos = c * d.0;
    let l_neg = c * d.1;
    let zb = z * beta;
    let mut xi = DVector::zeros(n);
    let mut alpha = DVector::zeros(n);
    for i in 0..n {
        let yi = if y[i] > 0 { 1.0 } else { -1.0 };
        xi[i] = yi - zb[i];
        let l = if y[i] > 0 { l_pos } else { l_neg };
        alpha[i] = l * scores[i] * xi[i];
    }

    let mut stat = beta.clone();
    if theta != 0.0 {
        let g = g.ok_or_else(|| {
            Error::ConfigMismatch("theta > 0 requires a graph matrix".into())
        })?;
        stat += g * beta * theta;
    }
    stat -= z.transpose() * &alpha;
    let stationarity = stat.amax();

    let mut slack_pos: f64 = 0.0;
    let mut slack_neg: f64 = 0.0;
    let mut primal_pos: f64 = 0.0;
    let mut primal_neg: f64 = 0.0;
    for i in 0..n {
        let yi = if y[i] > 0 { 1.0 } else { -1.0 };
        let l = if y[i] > 0 { l_pos } else { l_neg };
        let slack = (l * scores[i] * xi[i] - alpha[i]).abs();
        let primal = (zb[i] - yi + xi[i]).abs();
        if y[i] > 0 {
            slack_pos = slack_pos.max(slack);
            primal_pos = primal_pos.max(primal);
        } else {
            slack_neg = slack_neg.max(slack);
            primal_neg = primal_neg.max(primal);
        }
    }
    Ok(KKTWitness {
        stationarity,
        slack_pos,
        slack_neg,
        primal_pos,
        primal_neg,
    })
}

/// Witness for a fitted model on its (already normalized) training data.
pub fn kkt_witness_for(
    model: &TrainedModel,
    ds: &Dataset,
    scores: &[f64],
    d: (f64, f64),
) -> Result<KKTWitness> {
    let z = build_design(&ds.x, &model.fm, model.config.variant)?;
    let g = graph_for(&z, &ds.y, &model.config)?;
    kkt_residual(
        &z,
        &ds.y,
        scores,
        d,
        model.config.c,
        model.config.theta,
        g.as_ref().map(|em| &em.g),
        &model.beta,
    )
}

/// Raw decision values for a batch of raw-feature rows. The model's stored
/// normalizer (if any) is applied first.
pub fn decision_scores(model: &TrainedModel, x_raw: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x_raw.ncols() != model.fm.p() {
        return Err(Error::DimensionMismatch(format!(
            "rows have {} features but the model expects {}",
            x_raw.ncols(),
            model.fm.p()
        )));
    }
    let x = match &model.normalizer {
        Some(nrm) => {
            let mut m = x_raw.clone();
            for i in 0..m.nrows() {
                let mut row: Vec<f64> = m.row(i).iter().copied().collect();
                nrm.apply_row(&mut row);
                for (j, v) in row.into_iter().enumerate() {
                    m[(i, j)] = v;
                }
            }
            m
        }
        None => x_raw.clone(),
    };
    let z = build_design(&x, &model.fm, model.config.variant)?;
    Ok(&z * &model.beta)
}

pub fn decision_score(model: &TrainedModel, row: &[f64]) -> Result<f64> {
    let x = DMatrix::from_row_slice(1, row.len(), row);
    Ok(decision_scores(model, &x)?[0])
}

/// Sign of the decision value; a value of exactly zero maps to +1.
pub fn predict(model: &TrainedModel, x_raw: &DMatrix<f64>) -> Result<Vec<i8>> {
    let scores = decision_scores(model, x_raw)?;
    Ok(scores.iter().map(|&s| if s >= 0.0 { 1 } else { -1 }).collect())
}

pub fn predict_row(model: &TrainedModel, row: &[f64]) -> Result<i8> {
    Ok(if decision_score(model, row)? >= 0.0 { 1 } else { -1 })
}
