//! Synthetic tomato scenes, a noise-injectable detector stand-in and
//! COCO-style detection metrics over disc masks.
//!
//! Camera frame: x right, y up, z is depth away from the camera (mm). Masks
//! are the orthographic projections of the fruit onto the x-y plane.

use std::cmp::Ordering;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Scalar};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub const AP_THRESHOLDS: [f64; 10] = [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95];

/// Grid resolution per axis used to estimate occlusion fractions.
const OCCLUSION_GRID: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerceptionError {
    #[error("could not place {requested} tomatoes after {attempts} attempts")]
    PlacementFailed { requested: usize, attempts: usize },
    #[error("invalid scene parameters: {0}")]
    InvalidScene(String),
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("no matched detection/ground-truth pairs")]
    NoMatches,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = PerceptionError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ripeness {
    Ripe,
    Unripe,
}

impl Ripeness {
    pub fn flipped(self) -> Self {
        match self {
            Ripeness::Ripe => Ripeness::Unripe,
            Ripeness::Unripe => Ripeness::Ripe,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle<T> {
    pub center: [T; 2],
    pub radius: T,
}

impl<T: Scalar> Circle<T> {
    pub fn new(center: [T; 2], radius: T) -> Self {
        Self { center, radius }
    }

    pub fn area(&self) -> T {
        T::PI() * self.radius * self.radius
    }

    pub fn contains(&self, p: [T; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneObject<T> {
    /// mm
    pub center: [T; 3],
    /// mm
    pub radius: T,
    pub ripeness: Ripeness,
    /// Fraction of the projected disc hidden by nearer fruit.
    pub occlusion_fraction: T,
    /// mm
    pub pedicel: [T; 3],
}

impl<T: Scalar> SceneObject<T> {
    pub fn mask(&self) -> Circle<T> {
        Circle::new([self.center[0], self.center[1]], self.radius)
    }

    /// Top of the fruit in the camera plane.
    pub fn top(&self) -> [T; 3] {
        [self.center[0], self.center[1] + self.radius, self.center[2]]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection<T> {
    pub mask: Circle<T>,
    pub ripeness: Ripeness,
    pub score: T,
    /// mm
    pub center_keypoint: [T; 3],
    /// mm
    pub pedicel_keypoint: [T; 3],
}

/// Placement bounds for generated scenes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneParams<T> {
    /// Lower corner of the volume fruit centers are drawn from, mm.
    pub volume_min: [T; 3],
    /// Upper corner, mm.
    pub volume_max: [T; 3],
    pub radius_min: T,
    pub radius_max: T,
    /// Extra clearance between fruit surfaces, mm.
    pub min_gap: T,
    /// Pedicel height above the fruit top, mm.
    pub stem_offset: T,
    pub ripe_fraction: T,
    /// Rejection-sampling budget per fruit.
    pub max_attempts: usize,
}

impl<T: Scalar> Default for SceneParams<T> {
    fn default() -> Self {
        Self {
            volume_min: [lit(-150.0), lit(-100.0), lit(400.0)],
            volume_max: [lit(150.0), lit(100.0), lit(600.0)],
            radius_min: lit(20.0),
            radius_max: lit(30.0),
            min_gap: lit(2.0),
            stem_offset: lit(10.0),
            ripe_fraction: lit(0.6),
            max_attempts: 1000,
        }
    }
}

impl<T: Scalar> SceneParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PerceptionError::InvalidScene(m.into()));
        if (0..3).any(|i| !(self.volume_min[i] <= self.volume_max[i])) {
            return bad("volume_min must not exceed volume_max");
        }
        if !(self.radius_min > T::zero() && self.radius_min <= self.radius_max) {
            return bad("need 0 < radius_min <= radius_max");
        }
        if !(self.min_gap >= T::zero()) {
            return bad("min_gap must be non-negative");
        }
        if !(self.stem_offset >= T::zero() && self.stem_offset <= lit::<T>(1.5) * self.radius_min) {
            return bad("stem_offset must lie in [0, 1.5 * radius_min]");
        }
        if !(self.ripe_fraction >= T::zero() && self.ripe_fraction <= T::one()) {
            return bad("ripe_fraction must lie in [0, 1]");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be positive");
        }
        Ok(())
    }
}

fn uniform<T: Scalar, R: Rng + ?Sized>(rng: &mut R, lo: T, hi: T) -> T {
    lo + (hi - lo) * T::sample_unit(rng)
}

fn distance3<T: Scalar>(a: &[T; 3], b: &[T; 3]) -> T {
    let d: [T; 3] = std::array::from_fn(|i| a[i] - b[i]);
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Places `n` non-overlapping fruit by rejection sampling, then computes occlusion.
pub fn generate_scene<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    params: &SceneParams<T>,
    rng: &mut R,
) -> Result<Vec<SceneObject<T>>> {
    params.validate()?;
    if n == 0 {
        return Err(PerceptionError::InvalidArgument(
            "a scene needs at least one tomato".into(),
        ));
    }
    let mut objects: Vec<SceneObject<T>> = Vec::with_capacity(n);
    let mut attempts = 0;
    while objects.len() < n {
        if attempts >= params.max_attempts * n {
            return Err(PerceptionError::PlacementFailed {
                requested: n,
                attempts,
            });
        }
        attempts += 1;
        let center: [T; 3] =
            std::array::from_fn(|i| uniform(rng, params.volume_min[i], params.volume_max[i]));
        let radius = uniform(rng, params.radius_min, params.radius_max);
        let ripeness = if T::sample_unit(rng) < params.ripe_fraction {
            Ripeness::Ripe
        } else {
            Ripeness::Unripe
        };
        let clear = objects
            .iter()
            .all(|o| distance3(&o.center, &center) > o.radius + radius + params.min_gap);
        if clear {
            objects.push(SceneObject {
                center,
                radius,
                ripeness,
                occlusion_fraction: T::zero(),
                pedicel: [
                    center[0],
                    center[1] + radius + params.stem_offset,
                    center[2],
                ],
            });
        }
    }
    let fractions: Vec<T> = (0..objects.len())
        .map(|i| occlusion_fraction(&objects, i))
        .collect();
    for (o, f) in objects.iter_mut().zip(fractions) {
        o.occlusion_fraction = f;
    }
    Ok(objects)
}

/// Share of object `index`'s disc covered by discs of nearer objects (grid estimate).
pub fn occlusion_fraction<T: Scalar>(objects: &[SceneObject<T>], index: usize) -> T {
    let target = &objects[index];
    let blockers: Vec<Circle<T>> = objects
        .iter()
        .filter(|o| o.center[2] < target.center[2])
        .map(|o| o.mask())
        .filter(|c| circle_iou(c, &target.mask()) > T::zero())
        .collect();
    if blockers.is_empty() {
        return T::zero();
    }
    let disc = target.mask();
    let n = OCCLUSION_GRID;
    let (mut inside, mut covered) = (0usize, 0usize);
    for i in 0..n {
        for j in 0..n {
            let u = (T::from_usize(i).unwrap() + lit(0.5)) / T::from_usize(n).unwrap();
            let v = (T::from_usize(j).unwrap() + lit(0.5)) / T::from_usize(n).unwrap();
            let p = [
                disc.center[0] + disc.radius * (u + u - T::one()),
                disc.center[1] + disc.radius * (v + v - T::one()),
            ];
            if disc.contains(p) {
                inside += 1;
                if blockers.iter().any(|b| b.contains(p)) {
                    covered += 1;
                }
            }
        }
    }
    T::from_usize(covered).unwrap() / T::from_usize(inside.max(1)).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel<T> {
    /// Standard deviation of keypoint error along x and y, mm.
    pub keypoint_sigma: T,
    /// Standard deviation of keypoint error along depth, mm.
    #[serde(default)]
    pub depth_sigma: T,
    pub miss_rate: T,
    /// Expected false positives per scene.
    pub false_positive_rate: T,
    pub ripeness_confusion: T,
    /// Extra miss probability per unit of occlusion.
    pub occlusion_miss_gain: T,
}

impl<T: Scalar> Default for NoiseModel<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Scalar> NoiseModel<T> {
    pub fn zero() -> Self {
        Self {
            keypoint_sigma: T::zero(),
            depth_sigma: T::zero(),
            miss_rate: T::zero(),
            false_positive_rate: T::zero(),
            ripeness_confusion: T::zero(),
            occlusion_miss_gain: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PerceptionError::InvalidNoise(m.into()));
        if !(self.keypoint_sigma >= T::zero() && self.depth_sigma >= T::zero()) {
            return bad("keypoint sigmas must be non-negative");
        }
        if !(self.miss_rate >= T::zero() && self.miss_rate <= T::one()) {
            return bad("miss_rate must lie in [0, 1]");
        }
        if !(self.false_positive_rate >= T::zero() && self.false_positive_rate.is_finite()) {
            return bad("false_positive_rate must be finite and non-negative");
        }
        if !(self.ripeness_confusion >= T::zero() && self.ripeness_confusion < T::one()) {
            return bad("ripeness_confusion must lie in [0, 1)");
        }
        if !(self.occlusion_miss_gain >= T::zero()) {
            return bad("occlusion_miss_gain must be non-negative");
        }
        Ok(())
    }
}

/// Independent Gaussian perturbation: `sigma` on x and y, `depth_sigma` on z.
pub fn perturb_point<T: Scalar, R: Rng + ?Sized>(
    p: &[T; 3],
    sigma: T,
    depth_sigma: T,
    rng: &mut R,
) -> [T; 3] {
    [
        T::sample_normal(rng, p[0], sigma),
        T::sample_normal(rng, p[1], sigma),
        T::sample_normal(rng, p[2], depth_sigma),
    ]
}

/// Detector output for one scene. Surviving objects keep their true radius;
/// the mask follows the perturbed center keypoint.
pub fn simulate_detections<T: Scalar, R: Rng + ?Sized>(
    scene: &[SceneObject<T>],
    noise: &NoiseModel<T>,
    params: &SceneParams<T>,
    rng: &mut R,
) -> Result<Vec<Detection<T>>> {
    noise.validate()?;
    let half = lit::<T>(0.5);
    let mut detections = Vec::with_capacity(scene.len());
    for object in scene {
        let miss_p =
            (noise.miss_rate + noise.occlusion_miss_gain * object.occlusion_fraction).min(T::one());
        let missed = T::sample_unit(rng) < miss_p;
        let center_kp = perturb_point(&object.center, noise.keypoint_sigma, noise.depth_sigma, rng);
        let pedicel_kp = perturb_point(
            &object.pedicel,
            noise.keypoint_sigma,
            noise.depth_sigma,
            rng,
        );
        let flip = T::sample_unit(rng) < noise.ripeness_confusion;
        if missed {
            continue;
        }
        let shift = ((center_kp[0] - object.center[0]).powi(2)
            + (center_kp[1] - object.center[1]).powi(2))
        .sqrt();
        let score = (T::one() - half * object.occlusion_fraction - half * shift / object.radius)
            .max(T::zero())
            .min(T::one());
        detections.push(Detection {
            mask: Circle::new([center_kp[0], center_kp[1]], object.radius),
            ripeness: if flip {
                object.ripeness.flipped()
            } else {
                object.ripeness
            },
            score,
            center_keypoint: center_kp,
            pedicel_keypoint: pedicel_kp,
        });
    }

    let rate = noise.false_positive_rate.to_f64().unwrap_or(0.0);
    let extra = if rate > 0.0 {
        Poisson::new(rate)
            .map_err(|e| PerceptionError::InvalidNoise(e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    for _ in 0..extra {
        let center: [T; 3] =
            std::array::from_fn(|i| uniform(rng, params.volume_min[i], params.volume_max[i]));
        let radius = uniform(rng, params.radius_min, params.radius_max);
        let ripeness = if T::sample_unit(rng) < half {
            Ripeness::Ripe
        } else {
            Ripeness::Unripe
        };
        let score = lit::<T>(0.8) * T::sample_unit(rng);
        detections.push(Detection {
            mask: Circle::new([center[0], center[1]], radius),
            ripeness,
            score,
            center_keypoint: center,
            pedicel_keypoint: [
                center[0],
                center[1] + radius + params.stem_offset,
                center[2],
            ],
        });
    }
    Ok(detections)
}

/// Exact intersection-over-union of two discs.
pub fn circle_iou<T: Scalar>(a: &Circle<T>, b: &Circle<T>) -> T {
    let (r1, r2) = (a.radius, b.radius);
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    let d = (dx * dx + dy * dy).sqrt();
    let area1 = a.area();
    let area2 = b.area();
    let inter = if d >= r1 + r2 {
        T::zero()
    } else if d <= (r1 - r2).abs() {
        let r = r1.min(r2);
        T::PI() * r * r
    } else {
        let two = lit::<T>(2.0);
        let c1 = ((d * d + r1 * r1 - r2 * r2) / (two * d * r1))
            .max(-T::one())
            .min(T::one());
        let c2 = ((d * d + r2 * r2 - r1 * r1) / (two * d * r2))
            .max(-T::one())
            .min(T::one());
        let k = ((-d + r1 + r2) * (d + r1 - r2) * (d - r1 + r2) * (d + r1 + r2)).max(T::zero());
        r1 * r1 * c1.acos() + r2 * r2 * c2.acos() - lit::<T>(0.5) * k.sqrt()
    };
    let union = area1 + area2 - inter;
    if union > T::zero() {
        (inter / union).max(T::zero()).min(T::one())
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectionMetrics<T> {
    pub precision: T,
    pub recall: T,
    /// Mean AP over IoU 0.50:0.05:0.95.
    pub mask_ap: T,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// One image's ground truth and detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalImage<T> {
    pub ground_truth: Vec<SceneObject<T>>,
    pub detections: Vec<Detection<T>>,
}

fn score_order<T: Scalar>(dets: &[Detection<T>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&i, &j| {
        dets[j]
            .score
            .partial_cmp(&dets[i].score)
            .unwrap_or(Ordering::Equal)
    });
    order
}

/// Greedy score-descending matching within one image. Returns, per detection,
/// the index of the matched ground-truth object.
pub fn match_detections<T: Scalar>(
    gt: &[SceneObject<T>],
    dets: &[Detection<T>],
    iou_threshold: T,
    class_aware: bool,
) -> Vec<Option<usize>> {
    let mut taken = vec![false; gt.len()];
    let mut matches = vec![None; dets.len()];
    for di in score_order(dets) {
        let det = &dets[di];
        let mut best: Option<(usize, T)> = None;
        for (gi, g) in gt.iter().enumerate() {
            if taken[gi] || (class_aware && g.ripeness != det.ripeness) {
                continue;
            }
            let iou = circle_iou(&det.mask, &g.mask());
            if iou >= iou_threshold && best.is_none_or(|(_, b)| iou > b) {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            taken[gi] = true;
            matches[di] = Some(gi);
        }
    }
    matches
}

/// All-point interpolated average precision for one class at one threshold.
fn class_ap<T: Scalar>(images: &[EvalImage<T>], class: Ripeness, iou_threshold: T) -> Option<T> {
    let total_gt: usize = images
        .iter()
        .map(|im| {
            im.ground_truth
                .iter()
                .filter(|g| g.ripeness == class)
                .count()
        })
        .sum();
    if total_gt == 0 {
        return None;
    }
    // (score, is_tp, image index, detection index)
    let mut ranked: Vec<(T, bool, usize, usize)> = Vec::new();
    for (ii, im) in images.iter().enumerate() {
        let matches = match_detections(&im.ground_truth, &im.detections, iou_threshold, true);
        for (di, d) in im.detections.iter().enumerate() {
            if d.ripeness == class {
                ranked.push((d.score, matches[di].is_some(), ii, di));
            }
        }
    }
    ranked.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
    });
    let total = T::from_usize(total_gt).unwrap();
    let mut tp = 0usize;
    let mut points: Vec<(T, T)> = Vec::with_capacity(ranked.len());
    for (k, r) in ranked.iter().enumerate() {
        if r.1 {
            tp += 1;
        }
        let recall = T::from_usize(tp).unwrap() / total;
        let precision = T::from_usize(tp).unwrap() / T::from_usize(k + 1).unwrap();
        points.push((recall, precision));
    }
    // precision envelope from the right
    let mut ap = T::zero();
    let mut envelope = T::zero();
    let mut envelopes = vec![T::zero(); points.len()];
    for k in (0..points.len()).rev() {
        envelope = envelope.max(points[k].1);
        envelopes[k] = envelope;
    }
    let mut prev_recall = T::zero();
    for (k, &(recall, _)) in points.iter().enumerate() {
        ap = ap + (recall - prev_recall) * envelopes[k];
        prev_recall = recall;
    }
    Some(ap)
}

/// Mean AP over [`AP_THRESHOLDS`] and over the classes that have ground truth.
/// With no ground truth at all it is 1 when there are also no detections, else 0.
pub fn mask_ap<T: Scalar>(images: &[EvalImage<T>]) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    for &thr in &AP_THRESHOLDS {
        for class in [Ripeness::Ripe, Ripeness::Unripe] {
            if let Some(ap) = class_ap(images, class, lit(thr)) {
                sum = sum + ap;
                count += 1;
            }
        }
    }
    if count > 0 {
        sum / T::from_usize(count).unwrap()
    } else if images.iter().all(|im| im.detections.is_empty()) {
        T::one()
    } else {
        T::zero()
    }
}

/// Precision/recall at `iou_threshold` plus mask AP over a batch of images.
///
/// Precision with no detections is 0; recall with no ground truth is 1.
pub fn evaluate_batch<T: Scalar>(
    images: &[EvalImage<T>],
    iou_threshold: T,
) -> Result<DetectionMetrics<T>> {
    if !(iou_threshold > T::zero() && iou_threshold < T::one()) {
        return Err(PerceptionError::InvalidArgument(
            "iou_threshold must lie in (0, 1)".into(),
        ));
    }
    let (mut tp, mut n_det, mut n_gt) = (0usize, 0usize, 0usize);
    for im in images {
        let matches = match_detections(&im.ground_truth, &im.detections, iou_threshold, true);
        tp += matches.iter().filter(|m| m.is_some()).count();
        n_det += im.detections.len();
        n_gt += im.ground_truth.len();
    }
    let ratio = |num: usize, den: usize, empty: T| {
        if den == 0 {
            empty
        } else {
            T::from_usize(num).unwrap() / T::from_usize(den).unwrap()
        }
    };
    Ok(DetectionMetrics {
        precision: ratio(tp, n_det, T::zero()),
        recall: ratio(tp, n_gt, T::one()),
        mask_ap: mask_ap(images),
        true_positives: tp,
        false_positives: n_det - tp,
        false_negatives: n_gt - tp,
    })
}

pub fn evaluate<T: Scalar>(
    gt: &[SceneObject<T>],
    dets: &[Detection<T>],
    iou_threshold: T,
) -> Result<DetectionMetrics<T>> {
    evaluate_batch(
        &[EvalImage {
            ground_truth: gt.to_vec(),
            detections: dets.to_vec(),
        }],
        iou_threshold,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeypointErrors<T> {
    pub pairs: usize,
    /// mm
    pub center_mean: T,
    pub center_max: T,
    pub pedicel_mean: T,
    pub pedicel_max: T,
}

/// Keypoint errors over detections matched to ground truth at IoU >= 0.5, ignoring class.
pub fn keypoint_error<T: Scalar>(images: &[EvalImage<T>]) -> Result<KeypointErrors<T>> {
    let mut pairs = 0usize;
    let (mut c_sum, mut c_max, mut p_sum, mut p_max) = (T::zero(), T::zero(), T::zero(), T::zero());
    for im in images {
        let matches = match_detections(&im.ground_truth, &im.detections, lit(0.5), false);
        for (det, m) in im.detections.iter().zip(matches) {
            if let Some(gi) = m {
                let g = &im.ground_truth[gi];
                let ce = distance3(&det.center_keypoint, &g.center);
                let pe = distance3(&det.pedicel_keypoint, &g.pedicel);
                c_sum = c_sum + ce;
                p_sum = p_sum + pe;
                c_max = c_max.max(ce);
                p_max = p_max.max(pe);
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(PerceptionError::NoMatches);
    }
    let n = T::from_usize(pairs).unwrap();
    Ok(KeypointErrors {
        pairs,
        center_mean: c_sum / n,
        center_max: c_max,
        pedicel_mean: p_sum / n,
        pedicel_max: p_max,
    })
}

/// Generates `n_scenes` scenes of `per_scene` fruit and their simulated detections.
pub fn simulate_batch<T: Scalar, R: Rng + ?Sized>(
    n_scenes: usize,
    per_scene: usize,
    params: &SceneParams<T>,
    noise: &NoiseModel<T>,
    rng: &mut R,
) -> Result<Vec<EvalImage<T>>> {
    (0..n_scenes)
        .map(|_| {
            let ground_truth = generate_scene(per_scene, params, rng)?;
            let detections = simulate_detections(&ground_truth, noise, params, rng)?;
            Ok(EvalImage {
                ground_truth,
                detections,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn object(center: [f64; 3], radius: f64) -> SceneObject<f64> {
        SceneObject {
            center,
            radius,
            ripeness: Ripeness::Ripe,
            occlusion_fraction: 0.0,
            pedicel: [center[0], center[1] + radius + 10.0, center[2]],
        }
    }

    #[test]
    fn single_object_is_unoccluded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scene = generate_scene::<f64, _>(1, &SceneParams::default(), &mut rng).unwrap();
        assert_eq!(scene.len(), 1);
        assert_eq!(scene[0].occlusion_fraction, 0.0);
    }

    #[test]
    fn crowded_volume_fails_placement() {
        let params = SceneParams {
            volume_min: [0.0; 3],
            volume_max: [1.0; 3],
            max_attempts: 20,
            ..SceneParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = generate_scene::<f64, _>(2, &params, &mut rng).unwrap_err();
        assert!(matches!(
            err,
            PerceptionError::PlacementFailed { requested: 2, .. }
        ));
    }

    #[test]
    fn iou_trivial_cases() {
        let a = Circle::new([0.0, 0.0], 5.0);
        assert_eq!(circle_iou(&a, &a), 1.0);
        assert_eq!(circle_iou(&a, &Circle::new([20.0, 0.0], 5.0)), 0.0);
        let inner = Circle::new([0.0, 0.0], 2.5);
        assert_relative_eq!(circle_iou(&a, &inner), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn occluded_object_gets_fraction() {
        let near = object([0.0, 0.0, 400.0], 20.0);
        let far = object([0.0, 0.0, 500.0], 20.0);
        let scene = vec![near, far];
        assert_eq!(occlusion_fraction(&scene, 0), 0.0);
        assert_relative_eq!(occlusion_fraction(&scene, 1), 1.0);
    }

    #[test]
    fn empty_detections_conventions() {
        let gt = vec![object([0.0, 0.0, 500.0], 20.0)];
        let m = evaluate::<f64>(&gt, &[], 0.5).unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.mask_ap, 0.0);
        let m = evaluate::<f64>(&[], &[], 0.5).unwrap();
        assert_eq!(m.recall, 1.0);
    }

    #[test]
    fn keypoint_three_four_five() {
        let g = object([0.0, 0.0, 500.0], 20.0);
        let det = Detection {
            mask: g.mask(),
            ripeness: g.ripeness,
            score: 1.0,
            center_keypoint: [3.0, 4.0, 500.0],
            pedicel_keypoint: g.pedicel,
        };
        let errs = keypoint_error(&[EvalImage {
            ground_truth: vec![g],
            detections: vec![det],
        }])
        .unwrap();
        assert_relative_eq!(errs.center_mean, 5.0, epsilon = 1e-12);
        assert_eq!(errs.pedicel_mean, 0.0);
        assert_eq!(keypoint_error::<f64>(&[]), Err(PerceptionError::NoMatches));
    }

    #[test]
    fn miss_rate_one_drops_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let scene = generate_scene::<f64, _>(5, &SceneParams::default(), &mut rng).unwrap();
        let noise = NoiseModel {
            miss_rate: 1.0,
            ..NoiseModel::zero()
        };
        let dets = simulate_detections(&scene, &noise, &SceneParams::default(), &mut rng).unwrap();
        assert!(dets.is_empty());
    }

    #[test]
    fn lower_score_false_positive_does_not_steal_match() {
        let g = object([0.0, 0.0, 500.0], 20.0);
        let good = Detection {
            mask: g.mask(),
            ripeness: Ripeness::Ripe,
            score: 0.9,
            center_keypoint: g.center,
            pedicel_keypoint: g.pedicel,
        };
        let worse = Detection {
            mask: Circle::new([2.0, 0.0], 20.0),
            score: 0.3,
            ..good
        };
        let m = match_detections(&[g], &[worse, good], 0.5, true);
        assert_eq!(m, vec![None, Some(0)]);
    }
}
