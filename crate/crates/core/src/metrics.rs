//! Pose evaluation: 2D error, MPJPE, Procrustes-aligned MPJPE and PCK/AUC.

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

pub const PCK_MAX_MM: f64 = 50.0;
pub const DEFAULT_PCK_THRESHOLDS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no joints selected by the mask")]
    EmptyMask,
    #[error("input lengths differ")]
    LengthMismatch,
    #[error("degenerate configuration for Procrustes alignment")]
    DegenerateConfiguration,
}

fn check_lengths(a: usize, b: usize, mask: usize) -> Result<(), MetricError> {
    if a != b || a != mask {
        return Err(MetricError::LengthMismatch);
    }
    Ok(())
}

/// Per-joint Euclidean errors for masked-in joints, in input order.
pub fn joint_errors(pred: &[Vector3<f64>], gt: &[Vector3<f64>], mask: &[bool]) -> Result<Vec<f64>, MetricError> {
    check_lengths(pred.len(), gt.len(), mask.len())?;
    Ok(pred
        .iter()
        .zip(gt)
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((p, g), _)| (p - g).norm())
        .collect())
}

fn mean(errors: &[f64]) -> Result<f64, MetricError> {
    if errors.is_empty() {
        return Err(MetricError::EmptyMask);
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

pub fn mpjpe(pred: &[Vector3<f64>], gt: &[Vector3<f64>], mask: &[bool]) -> Result<f64, MetricError> {
    mean(&joint_errors(pred, gt, mask)?)
}

pub fn mean_2d_error(pred: &[Vector2<f64>], gt: &[Vector2<f64>], mask: &[bool]) -> Result<f64, MetricError> {
    check_lengths(pred.len(), gt.len(), mask.len())?;
    let errors: Vec<f64> = pred
        .iter()
        .zip(gt)
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((p, g), _)| (p - g).norm())
        .collect();
    mean(&errors)
}

/// `x -> scale * rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Similarity {
    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }
}

/// Least-squares similarity (or rigid, when `with_scale` is false) aligning
/// masked `pred` onto `gt`, with a proper rotation.
pub fn procrustes_transform(
    pred: &[Vector3<f64>],
    gt: &[Vector3<f64>],
    mask: &[bool],
    with_scale: bool,
) -> Result<Similarity, MetricError> {
    check_lengths(pred.len(), gt.len(), mask.len())?;
    let pairs: Vec<(Vector3<f64>, Vector3<f64>)> = pred
        .iter()
        .zip(gt)
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((p, g), _)| (*p, *g))
        .collect();
    if pairs.len() < 3 {
        return Err(MetricError::DegenerateConfiguration);
    }
    let n = pairs.len() as f64;
    let mp = pairs.iter().map(|(p, _)| p).sum::<Vector3<f64>>() / n;
    let mg = pairs.iter().map(|(_, g)| g).sum::<Vector3<f64>>() / n;

    // cross-covariance with pred on the left: H = sum (p - mp)(g - mg)^T
    let mut h = Matrix3::zeros();
    let mut var_p = 0.0;
    for (p, g) in &pairs {
        let (dp, dg) = (p - mp, g - mg);
        h += dp * dg.transpose();
        var_p += dp.norm_squared();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let s = svd.singular_values;
    let mut sorted = [s[0], s[1], s[2]];
    sorted.sort_by(|a, b| b.total_cmp(a));
    if !(sorted[0] > 0.0) || sorted[1] <= 1e-12 * sorted[0] {
        return Err(MetricError::DegenerateConfiguration);
    }

    let v = vt.transpose();
    let mut d = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        // flip the axis belonging to the smallest singular value
        let smallest = (0..3).min_by(|a, b| s[*a].total_cmp(&s[*b])).unwrap();
        d[(smallest, smallest)] = -1.0;
    }
    let rotation = v * d * u.transpose();
    let scale = if with_scale {
        (0..3).map(|i| s[i] * d[(i, i)]).sum::<f64>() / var_p
    } else {
        1.0
    };
    let translation = mg - rotation * mp * scale;
    Ok(Similarity {
        scale,
        rotation,
        translation,
    })
}

/// `pred` mapped by its optimal alignment onto `gt`. Unmasked joints are
/// transformed too.
pub fn procrustes_align(
    pred: &[Vector3<f64>],
    gt: &[Vector3<f64>],
    mask: &[bool],
    with_scale: bool,
) -> Result<Vec<Vector3<f64>>, MetricError> {
    let t = procrustes_transform(pred, gt, mask, with_scale)?;
    Ok(pred.iter().map(|p| t.apply(p)).collect())
}

pub fn pa_mpjpe(pred: &[Vector3<f64>], gt: &[Vector3<f64>], mask: &[bool]) -> Result<f64, MetricError> {
    mpjpe(&procrustes_align(pred, gt, mask, true)?, gt, mask)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PckCurve {
    pub thresholds: Vec<f64>,
    pub pck: Vec<f64>,
    pub auc: f64,
}

/// PCK at `n_thresholds` uniform thresholds over `[0, 50]` mm, and the
/// trapezoidal area under it normalised to `[0, 1]`.
pub fn pck_curve(errors: &[f64], n_thresholds: usize) -> Result<PckCurve, MetricError> {
    if errors.is_empty() {
        return Err(MetricError::EmptyMask);
    }
    let n = n_thresholds.max(2);
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let thresholds: Vec<f64> = (0..n).map(|i| PCK_MAX_MM * i as f64 / (n - 1) as f64).collect();
    let pck: Vec<f64> = thresholds
        .iter()
        .map(|t| sorted.partition_point(|e| e <= t) as f64 / sorted.len() as f64)
        .collect();
    let area: f64 = thresholds
        .windows(2)
        .zip(pck.windows(2))
        .map(|(t, p)| (t[1] - t[0]) * (p[0] + p[1]) / 2.0)
        .sum();
    Ok(PckCurve {
        thresholds,
        pck,
        auc: area / PCK_MAX_MM,
    })
}

pub fn pck_auc(pred: &[Vector3<f64>], gt: &[Vector3<f64>], mask: &[bool], n_thresholds: usize) -> Result<PckCurve, MetricError> {
    pck_curve(&joint_errors(pred, gt, mask)?, n_thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Rotation3, UnitQuaternion};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-80.0..80.0), rng.random_range(-80.0..80.0), rng.random_range(300.0..500.0)))
            .collect()
    }

    fn random_similarity(rng: &mut ChaCha8Rng) -> Similarity {
        let axis = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let rot = Rotation3::new(axis * rng.random_range(0.0..3.0));
        Similarity {
            scale: rng.random_range(0.5..2.0),
            rotation: *rot.matrix(),
            translation: Vector3::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0)),
        }
    }

    #[test]
    fn mpjpe_examples() {
        let gt = vec![Vector3::new(1.0, 2.0, 3.0); 4];
        let mask = [true; 4];
        assert_eq!(mpjpe(&gt, &gt, &mask).unwrap(), 0.0);
        let shifted: Vec<_> = gt.iter().map(|g| g + Vector3::new(3.0, 0.0, 4.0)).collect();
        assert!((mpjpe(&shifted, &gt, &mask).unwrap() - 5.0).abs() < 1e-12);
        let two = [Vector3::new(10.0, 0.0, 0.0), Vector3::new(0.0, 20.0, 0.0)];
        assert_eq!(mpjpe(&two, &[Vector3::zeros(); 2], &[true, true]).unwrap(), 15.0);
        assert_eq!(mpjpe(&two, &[Vector3::zeros(); 2], &[false, false]), Err(MetricError::EmptyMask));
        assert_eq!(mpjpe(&two, &[Vector3::zeros(); 2], &[true]), Err(MetricError::LengthMismatch));
    }

    #[test]
    fn mean_2d_examples() {
        let gt = vec![Vector2::new(5.0, 5.0); 3];
        assert_eq!(mean_2d_error(&gt, &gt, &[true; 3]).unwrap(), 0.0);
        let off: Vec<_> = gt.iter().map(|g| g + Vector2::new(1.0, 0.0)).collect();
        assert_eq!(mean_2d_error(&off, &gt, &[true; 3]).unwrap(), 1.0);
        let p = [Vector2::new(2.0, 0.0), Vector2::new(0.0, 4.0)];
        assert_eq!(mean_2d_error(&p, &[Vector2::zeros(); 2], &[true; 2]).unwrap(), 3.0);
    }

    #[test]
    fn procrustes_recovers_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let pred = cloud(&mut rng, 42);
            let sim = random_similarity(&mut rng);
            let gt: Vec<_> = pred.iter().map(|p| sim.apply(p)).collect();
            assert!(pa_mpjpe(&pred, &gt, &[true; 42]).unwrap() < 1e-9);
        }
        let pred = cloud(&mut rng, 10);
        let t = procrustes_transform(&pred, &pred, &[true; 10], true).unwrap();
        assert!((t.rotation - Matrix3::identity()).amax() < 1e-12);
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.translation.norm() < 1e-9);
    }

    #[test]
    fn procrustes_handles_reflection_and_degeneracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pred = cloud(&mut rng, 20);
        let mirrored: Vec<_> = pred.iter().map(|p| Vector3::new(-p.x, p.y, p.z)).collect();
        let t = procrustes_transform(&pred, &mirrored, &[true; 20], true).unwrap();
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-9);

        let line: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert_eq!(
            procrustes_transform(&line, &line, &[true; 5], true),
            Err(MetricError::DegenerateConfiguration)
        );
    }

    /// Exhaustive random search over similarities as the optimality oracle.
    #[test]
    fn procrustes_beats_random_similarities() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let gt = cloud(&mut rng, 42);
            let pred: Vec<_> = gt
                .iter()
                .map(|g| g + Vector3::new(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0)))
                .collect();
            let mask = [true; 42];
            let best = pa_mpjpe(&pred, &gt, &mask).unwrap();
            // also compare in the squared sense, which the alignment minimises
            let aligned = procrustes_align(&pred, &gt, &mask, true).unwrap();
            let sq = |a: &[Vector3<f64>]| a.iter().zip(&gt).map(|(p, g)| (p - g).norm_squared()).sum::<f64>();
            let best_sq = sq(&aligned);
            for _ in 0..20 {
                let q = UnitQuaternion::from_euler_angles(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05));
                let sim = Similarity {
                    scale: rng.random_range(0.95..1.05),
                    rotation: *q.to_rotation_matrix().matrix(),
                    translation: Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)),
                };
                let moved: Vec<_> = pred.iter().map(|p| sim.apply(p)).collect();
                assert!(best_sq <= sq(&moved) + 1e-6);
            }
            assert!(best <= mpjpe(&pred, &gt, &mask).unwrap() + 1e-9);
        }
    }

    #[test]
    fn pck_examples() {
        let c = pck_curve(&[0.0; 10], 100).unwrap();
        assert!(c.pck.iter().all(|p| *p == 1.0));
        assert!((c.auc - 1.0).abs() < 1e-12);
        let c = pck_curve(&[60.0; 10], 100).unwrap();
        assert_eq!(c.auc, 0.0);
        let c = pck_curve(&[25.0; 10], 100).unwrap();
        assert!((c.auc - 0.5).abs() <= 1.0 / 100.0);
        assert_eq!(pck_curve(&[], 100), Err(MetricError::EmptyMask));
    }

    proptest! {
        #[test]
        fn pck_properties(errors in prop::collection::vec(0.0f64..80.0, 1..60), n in 2usize..200) {
            let c = pck_curve(&errors, n).unwrap();
            prop_assert!(c.pck.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!((0.0..=1.0).contains(&c.auc));
        }

        #[test]
        fn constant_error_auc(e in 0.0f64..50.0, n in 10usize..300) {
            let c = pck_curve(&[e; 5], n).unwrap();
            prop_assert!((c.auc - (50.0 - e) / 50.0).abs() <= 1.0 / n as f64);
        }

        #[test]
        fn pa_never_exceeds_mpjpe(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = cloud(&mut rng, 42);
            let pred = cloud(&mut rng, 42);
            let mask = [true; 42];
            prop_assert!(pa_mpjpe(&pred, &gt, &mask).unwrap() <= mpjpe(&pred, &gt, &mask).unwrap() + 1e-9);
        }

        #[test]
        fn mpjpe_permutation_invariant(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = cloud(&mut rng, 12);
            let pred = cloud(&mut rng, 12);
            let mut idx: Vec<usize> = (0..12).collect();
            for i in (1..12).rev() { idx.swap(i, rng.random_range(0..=i)); }
            let pg: Vec<_> = idx.iter().map(|i| gt[*i]).collect();
            let pp: Vec<_> = idx.iter().map(|i| pred[*i]).collect();
            let a = mpjpe(&pred, &gt, &[true; 12]).unwrap();
            let b = mpjpe(&pp, &pg, &[true; 12]).unwrap();
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
