//! Small SO(3) / R^3 kernel: skew maps, the exponential map, projection back
//! onto the rotation group and the two matrix norms used by the analysis.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Tolerance for the orthonormality and determinant checks on rotations.
pub const ROTATION_TOL: f64 = 1e-9;
/// Tolerance for accepting a matrix as skew-symmetric in [`vee`].
pub const SKEW_TOL: f64 = 1e-9;
/// Below this angle the exponential map uses its Taylor series.
pub const SMALL_ANGLE: f64 = 1e-6;

pub fn e_x() -> Vec3 {
    Vec3::new(1.0, 0.0, 0.0)
}

pub fn e_y() -> Vec3 {
    Vec3::new(0.0, 1.0, 0.0)
}

pub fn e_z() -> Vec3 {
    Vec3::new(0.0, 0.0, 1.0)
}

/// Cross-product matrix: `hat(u) * w == u.cross(&w)`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds [`SKEW_TOL`].
pub fn vee(s: &Mat3) -> Result<Vec3> {
    let residual = (s + s.transpose()).abs().max();
    if residual > SKEW_TOL {
        return Err(Error::SymmetryViolation {
            residual,
            tolerance: SKEW_TOL,
        });
    }
    Ok(vee_unchecked(s))
}

/// Reads the skew entries of `s` without checking symmetry.
pub fn vee_unchecked(s: &Mat3) -> Vec3 {
    Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
}

/// Skew-symmetric part `(A - A^T) / 2`.
pub fn skew_part(a: &Mat3) -> Mat3 {
    (a - a.transpose()) * 0.5
}

/// Spectral norm `sqrt(lambda_max(A^T A))`.
pub fn spectral_norm(a: &Mat3) -> f64 {
    let ata = a.transpose() * a;
    let eig = SymmetricEigen::new(ata);
    eig.eigenvalues.max().max(0.0).sqrt()
}

pub fn frobenius_norm(a: &Mat3) -> f64 {
    (a.transpose() * a).trace().max(0.0).sqrt()
}

/// Symmetric eigenvalues sorted in descending order with matching unit eigenvectors.
pub fn sorted_symmetric_eigen(a: &Mat3) -> ([f64; 3], [Vec3; 3]) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = idx.map(|i| eig.eigenvalues[i]);
    let vectors = idx.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (values, vectors)
}

pub fn lambda_min_sym(a: &Mat3) -> f64 {
    sorted_symmetric_eigen(a).0[2]
}

pub fn lambda_max_sym(a: &Mat3) -> f64 {
    sorted_symmetric_eigen(a).0[0]
}

/// A 3x3 matrix known to lie on SO(3) within [`ROTATION_TOL`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Mat3);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Mat3::identity())
    }

    /// Wraps `m` after checking `m^T m = I` and `det m = 1`.
    pub fn new(m: Mat3) -> Result<Self> {
        let orth = (m.transpose() * m - Mat3::identity()).abs().max();
        let det = m.determinant();
        if !orth.is_finite() || orth > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::DegenerateMatrix(format!(
                "not a rotation: orthogonality residual {orth:.3e}, det {det:.12}"
            )));
        }
        Ok(Rotation(m))
    }

    /// Wraps `m` without checking. Callers promise `m` came from rotation arithmetic.
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rotation(m)
    }

    /// Rotation by `angle` radians about the unit `axis`.
    pub fn about_axis(axis: &Vec3, angle: f64) -> Self {
        so3_exp(&(axis.normalize() * angle))
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation) -> Self {
        Rotation(self.0 * other.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    /// Rotates by `v` in the body frame: `R * exp(hat(v))`.
    pub fn retract(&self, v: &Vec3) -> Self {
        Rotation(self.0 * so3_exp(v).0)
    }

    /// Geodesic angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        ((self.0.trace() - 1.0) * 0.5).clamp(-1.0, 1.0).acos()
    }

    /// Geodesic distance to another rotation.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        self.compose(&other.transpose()).angle()
    }

    pub fn orthogonality_residual(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).abs().max()
    }
}

impl From<Rotation> for Mat3 {
    fn from(r: Rotation) -> Mat3 {
        r.0
    }
}

/// Rodrigues formula; Taylor expansion below [`SMALL_ANGLE`].
pub fn so3_exp(v: &Vec3) -> Rotation {
    let theta = v.norm();
    let k = hat(v);
    let k2 = k * k;
    let (a, b) = if theta < SMALL_ANGLE {
        let t2 = theta * theta;
        (1.0 - t2 / 6.0, 0.5 - t2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Rotation(Mat3::identity() + k * a + k2 * b)
}

/// Nearest rotation in the Frobenius norm (orthogonal polar factor).
///
/// Computed with the Newton iteration `X <- (X + X^{-T}) / 2`, which converges
/// quadratically to the polar factor for any nonsingular start.
pub fn project_to_so3(m: &Mat3) -> Result<Rotation> {
    let det = m.determinant();
    if !(det > 0.0) || !det.is_finite() {
        return Err(Error::DegenerateMatrix(format!(
            "cannot project onto SO(3): det = {det:.3e}"
        )));
    }
    let mut x = *m;
    for _ in 0..100 {
        let inv_t = x
            .try_inverse()
            .ok_or_else(|| Error::DegenerateMatrix("singular iterate in polar projection".into()))?
            .transpose();
        let next = (x + inv_t) * 0.5;
        let delta = (next - x).abs().max();
        x = next;
        if delta < 1e-15 {
            break;
        }
    }
    Ok(Rotation(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-10.0f64..10.0).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
    }

    #[test]
    fn hat_of_unit_x() {
        let expected = Mat3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        assert_eq!(hat(&e_x()), expected);
        assert_eq!(hat(&Vec3::zeros()), Mat3::zeros());
    }

    #[test]
    fn hat_matches_cross_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let u = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let w = Vec3::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let cross = Vec3::new(
                u.y * w.z - u.z * w.y,
                u.z * w.x - u.x * w.z,
                u.x * w.y - u.y * w.x,
            );
            assert_abs_diff_eq!(hat(&u) * w, cross, epsilon = 1e-12);
        }
    }

    #[test]
    fn vee_examples() {
        assert_eq!(vee(&hat(&Vec3::new(1.0, 2.0, 3.0))).unwrap(), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        assert!(matches!(
            vee(&Mat3::identity()),
            Err(Error::SymmetryViolation { .. })
        ));
    }

    #[test]
    fn exp_examples() {
        assert_eq!(*so3_exp(&Vec3::zeros()).matrix(), Mat3::identity());
        let r = so3_exp(&Vec3::new(0.0, 0.0, FRAC_PI_2));
        assert_abs_diff_eq!(r.matrix().column(0).into_owned(), e_y(), epsilon = 1e-15);
        // Rodrigues oracle: R = I + sin(t) K + (1 - cos(t)) K^2 for unit axis
        let axis = Vec3::new(1.0, -2.0, 0.5).normalize();
        let t: f64 = 0.9;
        let k = hat(&axis);
        let oracle = Mat3::identity() + k * t.sin() + k * k * (1.0 - t.cos());
        assert_abs_diff_eq!(*so3_exp(&(axis * t)).matrix(), oracle, epsilon = 1e-14);
    }

    #[test]
    fn exp_small_angle_branch_is_continuous() {
        let v = Vec3::new(3e-7, -2e-7, 1e-7);
        let r = so3_exp(&v);
        let first_order = Mat3::identity() + hat(&v) + hat(&v) * hat(&v) * 0.5;
        assert_abs_diff_eq!(*r.matrix(), first_order, epsilon = 1e-18);
        assert!(Rotation::new(*r.matrix()).is_ok());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(*project_to_so3(&Mat3::identity()).unwrap().matrix(), Mat3::identity());
        assert_abs_diff_eq!(
            *project_to_so3(&(Mat3::identity() * 1.001)).unwrap().matrix(),
            Mat3::identity(),
            epsilon = 1e-14
        );
        assert!(project_to_so3(&(Mat3::identity() * -1.0)).is_err());
        assert!(project_to_so3(&Mat3::zeros()).is_err());
    }

    #[test]
    fn projection_matches_svd_polar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let axis = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let r = so3_exp(&(axis * 2.0));
            let noise = Mat3::from_fn(|_, _| rng.random_range(-1e-6..1e-6));
            let m = r.matrix() + noise;
            let svd = m.svd(true, true);
            let oracle = svd.u.unwrap() * svd.v_t.unwrap();
            let projected = project_to_so3(&m).unwrap();
            assert_abs_diff_eq!(*projected.matrix(), oracle, epsilon = 1e-12);
            assert!(frobenius_norm(&(projected.matrix() - r.matrix())) < 1e-5);
        }
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let a = Mat3::from_diagonal(&Vec3::new(1.0, -3.0, 2.0));
        assert_abs_diff_eq!(spectral_norm(&a), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(frobenius_norm(&a), 14f64.sqrt(), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn vee_hat_round_trip(v in vec3()) {
            prop_assert_eq!(vee(&hat(&v)).unwrap(), v);
            let s = hat(&v);
            prop_assert_eq!(hat(&vee(&s).unwrap()), s);
        }

        #[test]
        fn hat_anticommutes(u in vec3(), v in vec3()) {
            let lhs = hat(&u) * v;
            let rhs = -(hat(&v) * u);
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }

        #[test]
        fn exp_is_a_rotation_with_inverse(v in vec3()) {
            let r = so3_exp(&v);
            prop_assert!(Rotation::new(*r.matrix()).is_ok());
            let prod = r.matrix() * so3_exp(&(-v)).matrix();
            prop_assert!((prod - Mat3::identity()).abs().max() < 1e-12);
        }

        #[test]
        fn spectral_below_frobenius(a in vec3(), b in vec3()) {
            let d = so3_exp(&a).matrix() - so3_exp(&b).matrix();
            prop_assert!(spectral_norm(&d) <= frobenius_norm(&d) + 1e-12);
        }

        #[test]
        fn projection_is_idempotent(v in vec3()) {
            let r = so3_exp(&v);
            let p = project_to_so3(r.matrix()).unwrap();
            prop_assert!((p.matrix() - r.matrix()).abs().max() < 1e-12);
        }
    }
}
