//! Graph-embedding regularizer. Builds intrinsic/penalty similarity graphs
//! over the concatenated feature matrix Z (class-based LDA weights, or
//! locality-scaled LFDA weights), forms their Laplacians, and produces the
//! symmetric PSD matrix G = sym(G_p⁻¹ G_i) used in the ‖G^{1/2}β‖² penalty.
//!
//! For LDA the Laplacian quadratic forms collapse to class scatter matrices,
//! so `lda_scatters` assembles G_i/G_p in O(N·dim²) without materializing
//! any N×N matrix; `embed_matrix` keeps the generic chain for LFDA and for
//! cross-checking.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::mirror_symmetric;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Lda,
    Lfda,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GraphSpec {
    pub kind: GraphKind,
    /// Locality scale for LFDA affinities; ignored for LDA.
    pub sigma: f64,
    /// Relative ridge added to G_p before inversion.
    pub eps: f64,
}

impl GraphSpec {
    pub fn lda() -> GraphSpec {
        GraphSpec {
            kind: GraphKind::Lda,
            sigma: 1.0,
            eps: 1e-6,
        }
    }

    pub fn lfda(sigma: f64) -> GraphSpec {
        GraphSpec {
            kind: GraphKind::Lfda,
            sigma,
            eps: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == GraphKind::Lfda && !(self.sigma > 0.0) {
            return Err(Error::NonPositiveSigma(self.sigma));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::Config(format!(
                "graph ridge eps must be non-negative, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GraphPair {
    pub delta_int: DMatrix<f64>,
    pub delta_pen: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct EmbedMatrix {
    pub g: DMatrix<f64>,
    pub spec: GraphSpec,
    /// Smallest eigenvalue of the symmetrized G_p⁻¹G_i before clipping;
    /// diagnostic for how non-normal the raw product was.
    pub min_eigenvalue: f64,
}

fn class_sizes(y: &[i8]) -> Result<(f64, f64)> {
    let lp = y.iter().filter(|&&v| v > 0).count();
    let ln = y.len() - lp;
    if lp == 0 || ln == 0 {
        return Err(Error::SingleClass);
    }
    Ok((lp as f64, ln as f64))
}

/// Class-based graph weights: Δ^int_ij = 1/l_c on same-class pairs (diagonal
/// included), 0 otherwise; Δ^pen_ij = 1/N - 1/l_c on same-class pairs, 1/N
/// otherwise.
pub fn lda_weights(y: &[i8]) -> Result<GraphPair> {
    let (lp, ln) = class_sizes(y)?;
    let n = y.len();
    let inv_n = 1.0 / n as f64;
    let mut delta_int = DMatrix::zeros(n, n);
    let mut delta_pen = DMatrix::zeros(n, n);
    for i in 0..n {
        let li = if y[i] > 0 { lp } else { ln };
        for j in 0..n {
            if y[i] == y[j] {
                delta_int[(i, j)] = 1.0 / li;
                delta_pen[(i, j)] = inv_n - 1.0 / li;
            } else {
                delta_pen[(i, j)] = inv_n;
            }
        }
    }
    Ok(GraphPair {
        delta_int,
        delta_pen,
    })
}

/// Locality-scaled class weights: same-class entries of the LDA weights are
/// multiplied by the affinity η_ij = exp(-‖z_j-z_i‖²/(2σ²)); different-class
/// penalty entries stay 1/N.
pub fn lfda_weights(z: &DMatrix<f64>, y: &[i8], sigma: f64) -> Result<GraphPair> {
    if !(sigma > 0.0) {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let (lp, ln) = class_sizes(y)?;
    if z.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "Z has {} rows but y has {} labels",
            z.nrows(),
            y.len()
        )));
    }
    let n = y.len();
    let inv_n = 1.0 / n as f64;
    let two_sigma2 = 2.0 * sigma * sigma;
    let mut delta_int = DMatrix::zeros(n, n);
    let mut delta_pen = DMatrix::zeros(n, n);
    for i in 0..n {
        let li = if y[i] > 0 { lp } else { ln };
        for j in 0..n {
            if y[i] == y[j] {
                let d2 = (z.row(i) - z.row(j)).norm_squared();
                let eta = (-d2 / two_sigma2).exp();
                delta_int[(i, j)] = eta / li;
                delta_pen[(i, j)] = eta * (inv_n - 1.0 / li);
            } else {
                delta_pen[(i, j)] = inv_n;
            }
        }
    }
    Ok(GraphPair {
        delta_int,
        delta_pen,
    })
}

/// L = D - Δ with D the diagonal of row sums. Rows of L sum to zero.
pub fn laplacian(delta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = delta.shape();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    let tol = 1e-10;
    let mut max_dev: f64 = 0.0;
    for i in 0..rows {
        for j in (i + 1)..rows {
            max_dev = max_dev.max((delta[(i, j)] - delta[(j, i)]).abs());
        }
    }
    if max_dev > tol {
        return Err(Error::NotSymmetric { max_dev, tol });
    }
    let mut l = -delta.clone();
    for i in 0..rows {
        l[(i, i)] += delta.row(i).sum();
    }
    Ok(l)
}

/// Shared tail of both construction routes: ridge the penalty scatter,
/// solve G_p'·G_raw = G_i, symmetrize, and clip negative eigenvalues.
pub fn embed_from_scatter(
    g_i: DMatrix<f64>,
    g_p: DMatrix<f64>,
    spec: &GraphSpec,
) -> Result<EmbedMatrix> {
    spec.validate()?;
    let dim = g_p.nrows();
    if g_p.ncols() != dim || g_i.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(
            "scatter matrices must be square and equally sized".into(),
        ));
    }
    let ridge = spec.eps * g_p.trace() / dim as f64;
    let mut g_p_ridged = g_p;
    for i in 0..dim {
        g_p_ridged[(i, i)] += ridge;
    }
    let lu = g_p_ridged.lu();
    let mut raw = lu.solve(&g_i).ok_or(Error::SingularPenalty)?;
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularPenalty);
    }
    let rt = raw.transpose();
    raw += rt;
    raw *= 0.5;
    let eig = raw.symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.min();
    let clipped = DVector::from_fn(dim, |i, _| eig.eigenvalues[i].max(0.0));
    let mut g = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    mirror_symmetric(&mut g);
    Ok(EmbedMatrix {
        g,
        spec: *spec,
        min_eigenvalue,
    })
}

/// Generic chain: G_i = ZᵀLZ and G_p = ZᵀUZ from the full N×N Laplacians.
pub fn embed_matrix(z: &DMatrix<f64>, pair: &GraphPair, spec: &GraphSpec) -> Result<EmbedMatrix> {
    if z.nrows() != pair.delta_int.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "Z has {} rows but the graph has {}",
            z.nrows(),
            pair.delta_int.nrows()
        )));
    }
    let l = laplacian(&pair.delta_int)?;
    let u = laplacian(&pair.delta_pen)?;
    let g_i = z.transpose() * (&l * z);
    let g_p = z.transpose() * (&u * z);
    embed_from_scatter(g_i, g_p, spec)
}

/// LDA scatter shortcut. The intrinsic Laplacian of the class weights is
/// I - Δ^int, and the penalty Laplacian is Δ^int - (1/N)𝟙𝟙ᵀ, so
///   ZᵀLZ = ZᵀZ - Σ_c l_c m_c m_cᵀ   (within-class scatter)
///   ZᵀUZ = Σ_c l_c m_c m_cᵀ - N m̄m̄ᵀ (between-class scatter)
/// with m_c the class means and m̄ the global mean of Z's rows. Pass a
/// precomputed ZᵀZ to skip the Gram product.
pub fn lda_scatters(
    z: &DMatrix<f64>,
    y: &[i8],
    ztz: Option<&DMatrix<f64>>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (lp, ln) = class_sizes(y)?;
    if z.nrows() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "Z has {} rows but y has {} labels",
            z.nrows(),
            y.len()
        )));
    }
    let n = y.len();
    let dim = z.ncols();
    let mut sum_pos = DVector::zeros(dim);
    let mut sum_neg = DVector::zeros(dim);
    for i in 0..n {
        if y[i] > 0 {
            sum_pos += z.row(i).transpose();
        } else {
            sum_neg += z.row(i).transpose();
        }
    }
    let m_pos = &sum_pos / lp;
    let m_neg = &sum_neg / ln;
    let m_all = (&sum_pos + &sum_neg) / n as f64;

    let mut ztz_owned;
    let ztz = match ztz {
        Some(m) => m,
        None => {
            ztz_owned = z.transpose() * z;
            mirror_symmetric(&mut ztz_owned);
            &ztz_owned
        }
    };

    let class_part = &m_pos * m_pos.transpose() * lp + &m_neg * m_neg.transpose() * ln;
    let mut g_i = ztz - &class_part;
    let mut g_p = class_part - &m_all * m_all.transpose() * n as f64;
    mirror_symmetric(&mut g_i);
    mirror_symmetric(&mut g_p);
    Ok((g_i, g_p))
}

/// LDA embedding via the scatter shortcut.
pub fn embed_matrix_lda(
    z: &DMatrix<f64>,
    y: &[i8],
    spec: &GraphSpec,
    ztz: Option<&DMatrix<f64>>,
) -> Result<EmbedMatrix> {
    let (g_i, g_p) = lda_scatters(z, y, ztz)?;
    embed_from_scatter(g_i, g_p, spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_gaussians;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).amax() <= tol
    }

    #[test]
    fn lda_weights_three_samples() {
        let pair = lda_weights(&[1, 1, -1]).unwrap();
        let int_expected = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 1.0]);
        let pen_expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                -1.0 / 6.0, -1.0 / 6.0, 1.0 / 3.0,
                -1.0 / 6.0, -1.0 / 6.0, 1.0 / 3.0,
                1.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0,
            ],
        );
        assert!(close(&pair.delta_int, &int_expected, 1e-15));
        assert!(close(&pair.delta_pen, &pen_expected, 1e-15));
        assert!(matches!(lda_weights(&[1, 1, 1]), Err(Error::SingleClass)));
    }

    #[test]
    fn lfda_duplicate_rows_match_lda() {
        let z = DMatrix::from_row_slice(3, 2, &[0.4, 0.6, 0.4, 0.6, -1.0, 0.0]);
        let lda = lda_weights(&[1, 1, -1]).unwrap();
        let lfda = lfda_weights(&z, &[1, 1, -1], 0.5).unwrap();
        assert_eq!(lfda.delta_int[(0, 1)], lda.delta_int[(0, 1)]);
        assert_eq!(lfda.delta_pen[(0, 1)], lda.delta_pen[(0, 1)]);
    }

    #[test]
    fn lfda_limits_to_lda_at_huge_sigma() {
        let ds = synth_gaussians(4, 8, 3, 1.0, 3);
        let lda = lda_weights(&ds.y).unwrap();
        let lfda = lfda_weights(&ds.x, &ds.y, 1e8).unwrap();
        assert!(close(&lfda.delta_int, &lda.delta_int, 1e-6));
        assert!(close(&lfda.delta_pen, &lda.delta_pen, 1e-6));
    }

    #[test]
    fn lfda_unit_ratio_affinity() {
        let sigma = 0.7;
        let d = (2.0_f64 * sigma * sigma).sqrt();
        let z = DMatrix::from_row_slice(3, 1, &[0.0, d, 10.0]);
        let pair = lfda_weights(&z, &[1, 1, -1], sigma).unwrap();
        let expected = (-1.0f64).exp() / 2.0;
        assert!((pair.delta_int[(0, 1)] - expected).abs() < 1e-12);
        assert!(matches!(
            lfda_weights(&z, &[1, 1, -1], 0.0),
            Err(Error::NonPositiveSigma(_))
        ));
    }

    #[test]
    fn laplacian_textbook_two_node_graph() {
        let delta = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let l = laplacian(&delta).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(close(&l, &expected, 1e-15));
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let pair = lda_weights(&[1, 1, -1]).unwrap();
        let l = laplacian(&pair.delta_int).unwrap();
        let ones = DVector::from_element(3, 1.0);
        assert!((&l * ones).amax() < 1e-14);
    }

    #[test]
    fn laplacian_matches_double_loop() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut delta = DMatrix::from_fn(3, 3, |_, _| rng.gen_range(0.0..1.0));
        mirror_symmetric(&mut delta);
        let l = laplacian(&delta).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut expected = -delta[(i, j)];
                if i == j {
                    expected += (0..3).map(|k| delta[(i, k)]).sum::<f64>();
                }
                assert!((l[(i, j)] - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn laplacian_rejects_bad_shapes() {
        assert!(matches!(
            laplacian(&DMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(matches!(laplacian(&asym), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn zero_intrinsic_graph_gives_zero_embedding() {
        let ds = synth_gaussians(3, 5, 2, 1.0, 7);
        let mut pair = lda_weights(&ds.y).unwrap();
        pair.delta_int = DMatrix::zeros(ds.n(), ds.n());
        let em = embed_matrix(&ds.x, &pair, &GraphSpec::lda()).unwrap();
        assert!(em.g.amax() < 1e-12);
    }

    #[test]
    fn scatter_tail_reduces_to_psd_projection_of_l() {
        // With G_p = I and eps = 0 the chain is just symmetrize-and-clip.
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -3.0, -1.0, 1.0]);
        let spec = GraphSpec {
            kind: GraphKind::Lda,
            sigma: 1.0,
            eps: 0.0,
        };
        let em = embed_from_scatter(l.clone(), DMatrix::identity(2, 2), &spec).unwrap();
        // sym(L) = [[1,-2],[-2,1]] has eigenvalues 3 (for [1,-1]) and -1 (for [1,1]).
        let expected = DMatrix::from_row_slice(2, 2, &[1.5, -1.5, -1.5, 1.5]);
        assert!(close(&em.g, &expected, 1e-12));
        assert!((em.min_eigenvalue - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn embedding_matches_independent_chain_and_is_psd() {
        let ds = synth_gaussians(2, 2, 3, 1.5, 11);
        let pair = lda_weights(&ds.y).unwrap();
        let spec = GraphSpec::lda();
        let em = embed_matrix(&ds.x, &pair, &spec).unwrap();

        // Independent dense evaluation of every step.
        let n = ds.n();
        let dim = ds.p();
        let lap = |delta: &DMatrix<f64>| {
            let mut l = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    l[(i, j)] = -delta[(i, j)];
                    if i == j {
                        for k in 0..n {
                            l[(i, i)] += delta[(i, k)];
                        }
                    }
                }
            }
            l
        };
        let form = |m: &DMatrix<f64>| {
            let mut out = DMatrix::<f64>::zeros(dim, dim);
            for a in 0..dim {
                for b in 0..dim {
                    for i in 0..n {
                        for j in 0..n {
                            out[(a, b)] += ds.x[(i, a)] * m[(i, j)] * ds.x[(j, b)];
                        }
                    }
                }
            }
            out
        };
        let g_i = form(&lap(&pair.delta_int));
        let mut g_p = form(&lap(&pair.delta_pen));
        let ridge = spec.eps * g_p.trace() / dim as f64;
        for i in 0..dim {
            g_p[(i, i)] += ridge;
        }
        // Invert the ridged penalty scatter through its eigensystem; the
        // cofactor-formula inverse loses too much accuracy on this
        // rank-one-plus-ridge structure to serve as a reference.
        let pe = g_p.symmetric_eigen();
        let inv_vals = DVector::from_fn(dim, |i, _| 1.0 / pe.eigenvalues[i]);
        let g_p_inv = &pe.eigenvectors
            * DMatrix::from_diagonal(&inv_vals)
            * pe.eigenvectors.transpose();
        let raw: DMatrix<f64> = g_p_inv * g_i;
        let sym = (&raw + raw.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let clipped = DVector::from_fn(dim, |i, _| eig.eigenvalues[i].max(0.0));
        let expected =
            &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
        // The ridged penalty scatter is ill-conditioned, so the two
        // inversion routes agree relatively, not absolutely.
        let scale = expected.amax().max(1.0);
        assert!(
            (&em.g - &expected).amax() / scale < 1e-8,
            "chain mismatch: {:e}",
            (&em.g - &expected).amax() / scale
        );

        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..100 {
            let beta = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
            let q = (beta.transpose() * &em.g * &beta)[(0, 0)];
            assert!(q >= -1e-10 * scale, "quadratic form went negative: {q}");
        }
    }

    #[test]
    fn lda_scatter_route_matches_generic_chain() {
        let ds = synth_gaussians(5, 12, 4, 1.0, 23);
        let spec = GraphSpec::lda();
        let pair = lda_weights(&ds.y).unwrap();
        let generic = embed_matrix(&ds.x, &pair, &spec).unwrap();
        let fast = embed_matrix_lda(&ds.x, &ds.y, &spec, None).unwrap();
        let scale = generic.g.amax().max(1.0);
        assert!(
            (&generic.g - &fast.g).amax() / scale < 1e-8,
            "scatter shortcut diverged from the Laplacian chain"
        );
    }

    #[test]
    fn embedding_is_permutation_invariant() {
        use rand::seq::SliceRandom;
        let ds = synth_gaussians(4, 9, 3, 1.0, 31);
        let spec = GraphSpec::lfda(0.8);
        let pair = lfda_weights(&ds.x, &ds.y, spec.sigma).unwrap();
        let base = embed_matrix(&ds.x, &pair, &spec).unwrap();

        let mut perm: Vec<usize> = (0..ds.n()).collect();
        perm.shuffle(&mut ChaCha20Rng::seed_from_u64(8));
        let shuffled = ds.subset(&perm);
        let pair_p = lfda_weights(&shuffled.x, &shuffled.y, spec.sigma).unwrap();
        let permuted = embed_matrix(&shuffled.x, &pair_p, &spec).unwrap();
        assert!(close(&base.g, &permuted.g, 1e-8));
    }

    #[test]
    fn intrinsic_laplacian_is_psd() {
        let ds = synth_gaussians(6, 10, 2, 1.0, 13);
        for pair in [
            lda_weights(&ds.y).unwrap(),
            lfda_weights(&ds.x, &ds.y, 0.6).unwrap(),
        ] {
            let l = laplacian(&pair.delta_int).unwrap();
            let mut rng = ChaCha20Rng::seed_from_u64(0);
            for _ in 0..50 {
                let v = DVector::from_fn(ds.n(), |_, _| rng.gen_range(-1.0..1.0));
                let q = (v.transpose() * &l * &v)[(0, 0)];
                assert!(q >= -1e-10);
            }
        }
    }

    #[test]
    fn embedding_is_symmetric_and_clipped() {
        let ds = synth_gaussians(5, 9, 3, 2.0, 41);
        let em = embed_matrix_lda(&ds.x, &ds.y, &GraphSpec::lda(), None).unwrap();
        for i in 0..ds.p() {
            for j in 0..ds.p() {
                assert_eq!(em.g[(i, j)].to_bits(), em.g[(j, i)].to_bits());
            }
        }
        let eigs = em.g.clone().symmetric_eigen().eigenvalues;
        let scale = eigs.amax().max(1.0);
        assert!(eigs.min() >= -1e-9 * scale);
    }
}
