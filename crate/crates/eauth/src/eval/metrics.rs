//! Error-rate computation: FAR/FRR threshold sweeps, EER, DET points,
//! APCER/BPCER/ACER, and threshold calibration.
//!
//! Conventions: higher scores mean "more genuine"; `FAR(t)` is the fraction
//! of impostor scores strictly above `t`, `FRR(t)` the fraction of genuine
//! scores at or below `t`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::PadDecision;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("score or decision lists must be non-empty")]
    EmptyScores,
    #[error("calibration target unreachable: {0}")]
    UnreachableTarget(String),
}

/// One DET operating point; serializes as `[far, frr, threshold]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", from = "[f64; 3]")]
pub struct DetPoint {
    pub far: f64,
    pub frr: f64,
    pub threshold: f64,
}

impl From<DetPoint> for [f64; 3] {
    fn from(p: DetPoint) -> [f64; 3] {
        [p.far, p.frr, p.threshold]
    }
}

impl From<[f64; 3]> for DetPoint {
    fn from(v: [f64; 3]) -> DetPoint {
        DetPoint {
            far: v[0],
            frr: v[1],
            threshold: v[2],
        }
    }
}

/// Error rates of one evaluation. Verification sweeps fill `far`/`frr`/`eer`
/// at the EER operating point; PAD evaluations also fill the
/// `apcer`/`bpcer`/`acer` triple (with `far = apcer`, `frr = bpcer` as the
/// presentation-attack analogues).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub far: f64,
    pub frr: f64,
    pub eer: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apcer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bpcer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acer: Option<f64>,
    /// Thresholds evaluated by the sweep, ascending.
    pub thresholds: Vec<f64>,
}

/// Sweep output: rates at the EER point plus the full DET curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rates: ErrorRates,
    pub eer_threshold: f64,
    pub det: Vec<DetPoint>,
}

fn count_at_most(sorted: &[f64], t: f64) -> usize {
    sorted.partition_point(|&s| s <= t)
}

/// Evaluates FAR and FRR at every distinct score, locating the EER point
/// (threshold minimizing `|FAR - FRR|`, ties broken toward the lower
/// threshold; EER reported as the midpoint of FAR and FRR there).
pub fn sweep_thresholds(
    genuine_scores: &[f64],
    impostor_scores: &[f64],
) -> Result<SweepResult, EvalError> {
    if genuine_scores.is_empty() || impostor_scores.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    let mut genuine = genuine_scores.to_vec();
    let mut impostor = impostor_scores.to_vec();
    genuine.sort_by(|a, b| a.total_cmp(b));
    impostor.sort_by(|a, b| a.total_cmp(b));

    let mut thresholds: Vec<f64> = genuine.iter().chain(impostor.iter()).cloned().collect();
    thresholds.sort_by(|a, b| a.total_cmp(b));
    thresholds.dedup();

    let n_gen = genuine.len() as f64;
    let n_imp = impostor.len() as f64;
    let det: Vec<DetPoint> = thresholds
        .iter()
        .map(|&t| DetPoint {
            far: (impostor.len() - count_at_most(&impostor, t)) as f64 / n_imp,
            frr: count_at_most(&genuine, t) as f64 / n_gen,
            threshold: t,
        })
        .collect();

    let best = det
        .iter()
        .min_by(|a, b| {
            (a.far - a.frr)
                .abs()
                .total_cmp(&(b.far - b.frr).abs())
                .then(a.threshold.total_cmp(&b.threshold))
        })
        .expect("non-empty by construction");

    Ok(SweepResult {
        rates: ErrorRates {
            far: best.far,
            frr: best.frr,
            eer: 0.5 * (best.far + best.frr),
            apcer: None,
            bpcer: None,
            acer: None,
            thresholds,
        },
        eer_threshold: best.threshold,
        det,
    })
}

/// APCER/BPCER/ACER from PAD decisions on attack and bona fide
/// presentations. `ACER = (APCER + BPCER) / 2` holds exactly.
pub fn compute_acer(
    attack_decisions: &[PadDecision],
    bonafide_decisions: &[PadDecision],
) -> Result<ErrorRates, EvalError> {
    if attack_decisions.is_empty() || bonafide_decisions.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    let apcer = attack_decisions
        .iter()
        .filter(|&&d| d == PadDecision::BonaFide)
        .count() as f64
        / attack_decisions.len() as f64;
    let bpcer = bonafide_decisions
        .iter()
        .filter(|&&d| d == PadDecision::Attack)
        .count() as f64
        / bonafide_decisions.len() as f64;
    let acer = (apcer + bpcer) / 2.0;
    Ok(ErrorRates {
        far: apcer,
        frr: bpcer,
        eer: acer,
        apcer: Some(apcer),
        bpcer: Some(bpcer),
        acer: Some(acer),
        thresholds: Vec::new(),
    })
}

/// Calibration target for [`calibrate_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationTarget {
    /// Threshold at the equal-error operating point; `value` is ignored.
    Eer,
    /// Smallest threshold with `FAR <= value`.
    FarAt,
    /// Largest threshold with `FRR <= value`.
    FrrAt,
}

/// Picks an operating threshold from held-out scores.
pub fn calibrate_threshold(
    genuine_scores: &[f64],
    impostor_scores: &[f64],
    target: CalibrationTarget,
    value: f64,
) -> Result<f64, EvalError> {
    let sweep = sweep_thresholds(genuine_scores, impostor_scores)?;
    match target {
        CalibrationTarget::Eer => Ok(sweep.eer_threshold),
        CalibrationTarget::FarAt => {
            if !(0.0..=1.0).contains(&value) {
                return Err(EvalError::UnreachableTarget(format!(
                    "far_at {value} outside [0, 1]"
                )));
            }
            sweep
                .det
                .iter()
                .find(|p| p.far <= value)
                .map(|p| p.threshold)
                .ok_or_else(|| EvalError::UnreachableTarget(format!("no threshold has FAR <= {value}")))
        }
        CalibrationTarget::FrrAt => {
            if !(0.0..=1.0).contains(&value) {
                return Err(EvalError::UnreachableTarget(format!(
                    "frr_at {value} outside [0, 1]"
                )));
            }
            // A threshold below every score has FRR 0; include it as a
            // candidate so frr_at 0 is always reachable.
            let below_all = sweep.det.first().map(|p| p.threshold - 1.0).unwrap();
            let candidate = sweep
                .det
                .iter()
                .rev()
                .find(|p| p.frr <= value)
                .map(|p| p.threshold);
            Ok(candidate.unwrap_or(below_all))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threshold_above_all_scores_gives_far0_frr1() {
        let sweep = sweep_thresholds(&[0.1, 0.2, 0.3], &[0.05, 0.15]).unwrap();
        let top = sweep.det.last().unwrap();
        assert_eq!(top.far, 0.0);
        assert_eq!(top.frr, 1.0);
    }

    #[test]
    fn separable_scores_have_zero_eer() {
        let sweep = sweep_thresholds(&[0.8, 0.9, 0.95], &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(sweep.rates.eer, 0.0);
        assert!(sweep.eer_threshold >= 0.3 && sweep.eer_threshold < 0.8);
    }

    #[test]
    fn identical_distributions_give_eer_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 4000;
        let genuine: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let impostor: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let sweep = sweep_thresholds(&genuine, &impostor).unwrap();
        // Permutation oracle: same distribution on both sides pins the EER
        // to 0.5 within sampling error ~ 1/sqrt(n).
        let tol = 1.0 / (n as f64).sqrt();
        assert!(
            (sweep.rates.eer - 0.5).abs() <= 2.0 * tol,
            "eer {}",
            sweep.rates.eer
        );
    }

    #[test]
    fn sweep_matches_quadratic_recount_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let genuine: Vec<f64> = (0..60).map(|_| rng.random_range(-1.0..1.0)).collect();
        let impostor: Vec<f64> = (0..80).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sweep = sweep_thresholds(&genuine, &impostor).unwrap();
        for p in &sweep.det {
            let far = impostor.iter().filter(|&&s| s > p.threshold).count() as f64
                / impostor.len() as f64;
            let frr = genuine.iter().filter(|&&s| s <= p.threshold).count() as f64
                / genuine.len() as f64;
            assert_eq!(p.far, far);
            assert_eq!(p.frr, frr);
        }
    }

    #[test]
    fn far_nonincreasing_frr_nondecreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let genuine: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
            let impostor: Vec<f64> = (0..30).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sweep = sweep_thresholds(&genuine, &impostor).unwrap();
            for pair in sweep.det.windows(2) {
                assert!(pair[1].far <= pair[0].far);
                assert!(pair[1].frr >= pair[0].frr);
            }
        }
    }

    #[test]
    fn acer_arithmetic() {
        use PadDecision::*;
        // APCER 4% (1 of 25 attacks accepted), BPCER 6% (3 of 50 rejected).
        let mut attacks = vec![Attack; 24];
        attacks.push(BonaFide);
        let mut bona = vec![BonaFide; 47];
        bona.extend([Attack, Attack, Attack]);
        let r = compute_acer(&attacks, &bona).unwrap();
        assert!((r.apcer.unwrap() - 0.04).abs() < 1e-15);
        assert!((r.bpcer.unwrap() - 0.06).abs() < 1e-15);
        assert!((r.acer.unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_degenerate_classifiers() {
        use PadDecision::*;
        let perfect = compute_acer(&[Attack; 10], &[BonaFide; 10]).unwrap();
        assert_eq!(perfect.acer.unwrap(), 0.0);

        // Classifier that calls everything an attack.
        let paranoid = compute_acer(&[Attack; 10], &[Attack; 10]).unwrap();
        assert_eq!(paranoid.apcer.unwrap(), 0.0);
        assert_eq!(paranoid.bpcer.unwrap(), 1.0);
        assert_eq!(paranoid.acer.unwrap(), 0.5);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(matches!(
            sweep_thresholds(&[], &[1.0]),
            Err(EvalError::EmptyScores)
        ));
        assert!(matches!(
            compute_acer(&[], &[PadDecision::BonaFide]),
            Err(EvalError::EmptyScores)
        ));
    }

    #[test]
    fn calibrate_eer_on_separable_scores() {
        let t = calibrate_threshold(
            &[0.8, 0.9],
            &[0.1, 0.2],
            CalibrationTarget::Eer,
            0.0,
        )
        .unwrap();
        let sweep = sweep_thresholds(&[0.8, 0.9], &[0.1, 0.2]).unwrap();
        let at = sweep.det.iter().find(|p| p.threshold == t).unwrap();
        assert_eq!(at.far, 0.0);
        assert_eq!(at.frr, 0.0);
    }

    #[test]
    fn far_at_zero_is_max_impostor_score() {
        let impostor = [0.3, 0.7, 0.5];
        let t = calibrate_threshold(&[0.9, 1.0], &impostor, CalibrationTarget::FarAt, 0.0)
            .unwrap();
        assert_eq!(t, 0.7);
    }

    #[test]
    fn calibration_consistency_within_one_over_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let genuine: Vec<f64> = (0..100).map(|_| 0.3 + rng.random_range(0.0..0.7)).collect();
        let impostor: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..0.7)).collect();
        for target_value in [0.05, 0.1, 0.25] {
            let t = calibrate_threshold(
                &genuine,
                &impostor,
                CalibrationTarget::FarAt,
                target_value,
            )
            .unwrap();
            let far = impostor.iter().filter(|&&s| s > t).count() as f64
                / impostor.len() as f64;
            assert!(far <= target_value + 1.0 / impostor.len() as f64);
        }
    }

    #[test]
    fn frr_at_zero_is_reachable() {
        let t = calibrate_threshold(&[0.5, 0.6], &[0.1], CalibrationTarget::FrrAt, 0.0)
            .unwrap();
        // All genuine scores must be above the returned threshold.
        assert!(t < 0.5);
    }

    #[test]
    fn out_of_range_target_is_unreachable() {
        assert!(matches!(
            calibrate_threshold(&[0.5], &[0.1], CalibrationTarget::FarAt, -0.5),
            Err(EvalError::UnreachableTarget(_))
        ));
    }
}
