//! Frozen random hidden layer: W and b drawn once from U[-1, 1], applied as
//! H = Φ(XW + 1bᵀ), and the concatenation Z = [X H] that gives the model its
//! direct input-to-output links.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-v).exp()),
            Activation::Relu => v.max(0.0),
            Activation::Tanh => v.tanh(),
        }
    }

    pub fn parse(s: &str) -> Result<Activation> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(Error::Config(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FeatureMapParams {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
    pub activation: Activation,
    pub seed: u64,
}

impl FeatureMapParams {
    pub fn p(&self) -> usize {
        self.w.nrows()
    }

    pub fn h_l(&self) -> usize {
        self.w.ncols()
    }
}

/// Samples W (p×h_l) and b (h_l) i.i.d. uniform on [-1, 1]. The fill order is
/// fixed (W column-major, then b), so the same seed always yields the same map.
pub fn init_featuremap(p: usize, h_l: usize, activation: Activation, seed: u64) -> Result<FeatureMapParams> {
    if p < 1 || h_l < 1 {
        return Err(Error::InvalidWidth);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w_data: Vec<f64> = (0..p * h_l).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    let b_data: Vec<f64> = (0..h_l).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    Ok(FeatureMapParams {
        w: DMatrix::from_vec(p, h_l, w_data),
        b: DVector::from_vec(b_data),
        activation,
        seed,
    })
}

/// H = Φ(XW + 1bᵀ), applied elementwise.
pub fn hidden_map(x: &DMatrix<f64>, fm: &FeatureMapParams) -> Result<DMatrix<f64>> {
    if x.ncols() != fm.p() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} columns but the feature map expects {}",
            x.ncols(),
            fm.p()
        )));
    }
    let mut h = x * &fm.w;
    for j in 0..h.ncols() {
        let bj = fm.b[j];
        for i in 0..h.nrows() {
            h[(i, j)] = fm.activation.apply(h[(i, j)] + bj);
        }
    }
    Ok(h)
}

/// Z = [X H]: raw features first, hidden features after.
pub fn enhance(x: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.nrows() != h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "cannot concatenate {} feature rows with {} hidden rows",
            x.nrows(),
            h.nrows()
        )));
    }
    let n = x.nrows();
    let p = x.ncols();
    let hl = h.ncols();
    let mut z = DMatrix::zeros(n, p + hl);
    z.view_mut((0, 0), (n, p)).copy_from(x);
    z.view_mut((0, p), (n, hl)).copy_from(h);
    Ok(z)
}
