use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use super::{GeometryError, SimilarityTransform};

/// Weighted least-squares similarity (or rigid, when `with_scale` is false)
/// mapping `src` onto `dst`, minimizing `Σ wᵢ‖dstᵢ − (sR srcᵢ + t)‖²`.
///
/// Weights default to uniform when `weights` is `None`.
pub fn fit_umeyama(
    src: &[Point3<f64>],
    dst: &[Point3<f64>],
    weights: Option<&[f64]>,
    with_scale: bool,
) -> Result<SimilarityTransform, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::DegenerateConfiguration(format!(
            "{} source points vs {} destination points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < 3 {
        return Err(GeometryError::DegenerateConfiguration(format!(
            "need at least 3 correspondences, got {}",
            src.len()
        )));
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    if let Some(w) = weights {
        if w.len() != src.len() || w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(GeometryError::DegenerateConfiguration("weights must be finite and nonnegative".into()));
        }
    }
    let total: f64 = (0..src.len()).map(weight).sum();
    if total <= 0.0 {
        return Err(GeometryError::DegenerateConfiguration("all weights are zero".into()));
    }

    let mut mu_src = Vector3::zeros();
    let mut mu_dst = Vector3::zeros();
    for i in 0..src.len() {
        mu_src += weight(i) * src[i].coords;
        mu_dst += weight(i) * dst[i].coords;
    }
    mu_src /= total;
    mu_dst /= total;

    let mut cross = Matrix3::zeros();
    let mut src_scatter = Matrix3::zeros();
    for i in 0..src.len() {
        let w = weight(i);
        let s = src[i].coords - mu_src;
        let d = dst[i].coords - mu_dst;
        cross += w * d * s.transpose();
        src_scatter += w * s * s.transpose();
    }
    cross /= total;
    src_scatter /= total;

    // rank of the weighted centered source must be at least 2
    let mut eig = SymmetricEigen::new(src_scatter).eigenvalues;
    eig.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    let (l1, l2) = (eig[0].max(0.0), eig[1].max(0.0));
    if l1 <= 0.0 || l2.sqrt() <= 1e-10 * l1.sqrt() {
        return Err(GeometryError::DegenerateConfiguration(
            "weighted source points are collinear or coincident".into(),
        ));
    }
    let var_src = src_scatter.trace();

    let svd = cross.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let mut signs = Vector3::new(1.0, 1.0, 1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        signs[2] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&signs) * v_t;
    let scale = if with_scale {
        svd.singular_values.dot(&signs) / var_src
    } else {
        1.0
    };
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(GeometryError::DegenerateConfiguration(format!("non-positive scale {scale}")));
    }
    let translation = mu_dst - scale * (rotation * mu_src);
    Ok(SimilarityTransform::new(scale, rotation, translation))
}
