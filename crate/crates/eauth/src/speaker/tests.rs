use super::*;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

fn toy_ubm(k: usize, d: usize, seed: u64) -> DiagGmm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DiagGmm {
        weights: vec![1.0 / k as f64; k],
        means: (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
        variances: (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(0.5..2.0)).collect())
            .collect(),
    }
}

fn toy_stats(k: usize, d: usize, seed: u64) -> BaumWelchStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BaumWelchStats {
        n: (0..k).map(|_| rng.random_range(1.0..30.0)).collect(),
        f: (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect(),
    }
}

#[test]
fn zero_t_matrix_gives_zero_ivector() {
    let ubm = toy_ubm(2, 2, 1);
    let tv = TotalVariabilityModel::new(DMatrix::zeros(4, 3), ubm.digest());
    let iv = extract_ivector(&toy_stats(2, 2, 2), &ubm, &tv, "s").unwrap();
    assert!(iv.w.iter().all(|&v| v.abs() < 1e-12));
}

#[test]
fn zero_frames_give_prior_mean() {
    let ubm = toy_ubm(2, 2, 3);
    let tv = train_tv_matrix(&[], &ubm, 3, 0, 5).unwrap();
    let stats = BaumWelchStats::zero(2, 2);
    let iv = extract_ivector(&stats, &ubm, &tv, "s").unwrap();
    assert!(iv.w.iter().all(|&v| v.abs() < 1e-12));
}

/// Independent posterior objective used by the optimizer oracle:
/// `J(w) = -1/2 |w|^2 + sum_k [ F_k' S_k^{-1} T_k w - 1/2 N_k (T_k w)' S_k^{-1} (T_k w) ]`.
fn posterior_objective(
    w: &[f64],
    stats: &BaumWelchStats,
    ubm: &DiagGmm,
    t: &DMatrix<f64>,
) -> f64 {
    let (k, d) = (ubm.num_components(), ubm.dim());
    let r = t.ncols();
    let mut j = -0.5 * w.iter().map(|x| x * x).sum::<f64>();
    for c in 0..k {
        for i in 0..d {
            let tw: f64 = (0..r).map(|q| t[(c * d + i, q)] * w[q]).sum();
            let inv_var = 1.0 / ubm.variances[c][i];
            j += stats.f[c][i] * inv_var * tw - 0.5 * stats.n[c] * tw * tw * inv_var;
        }
    }
    j
}

/// Gradient ascent with central-difference gradients and backtracking.
/// Deliberately avoids the closed-form solve it is checking.
fn maximize_objective(
    stats: &BaumWelchStats,
    ubm: &DiagGmm,
    t: &DMatrix<f64>,
    r: usize,
) -> Vec<f64> {
    let mut w = vec![0.0; r];
    let mut step = 0.5;
    let h = 1e-6;
    for _ in 0..5_000 {
        let mut grad = vec![0.0; r];
        for i in 0..r {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += h;
            wm[i] -= h;
            grad[i] = (posterior_objective(&wp, stats, ubm, t)
                - posterior_objective(&wm, stats, ubm, t))
                / (2.0 * h);
        }
        let gnorm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-10 {
            break;
        }
        let base = posterior_objective(&w, stats, ubm, t);
        let mut local = step;
        loop {
            let cand: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x + local * g).collect();
            if posterior_objective(&cand, stats, ubm, t) > base {
                w = cand;
                step = (local * 1.5).min(1.0);
                break;
            }
            local /= 2.0;
            if local < 1e-14 {
                return w;
            }
        }
    }
    w
}

#[test]
fn ivector_matches_numeric_posterior_maximizer() {
    for seed in 0..5u64 {
        let ubm = toy_ubm(2, 2, 100 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let t = DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let tv = TotalVariabilityModel::new(t.clone(), ubm.digest());
        let stats = toy_stats(2, 2, 300 + seed);

        let iv = extract_ivector(&stats, &ubm, &tv, "s").unwrap();
        let oracle = maximize_objective(&stats, &ubm, &t, 2);
        for (a, b) in iv.w.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6, "seed {seed}: {a} vs {b}");
        }
    }
}

#[test]
fn tv_training_recovers_one_factor_model() {
    // Generate stats from a known rank-1 model and check the trained T is
    // aligned with the truth up to sign.
    let ubm = toy_ubm(2, 2, 7);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let true_t = DMatrix::from_fn(4, 1, |_, _| rng.random_range(-1.0..1.0));

    let mut stats_set = Vec::new();
    for _ in 0..120 {
        let w: f64 = {
            let u1: f64 = rng.random_range(f64::EPSILON..1.0);
            let u2: f64 = rng.random_range(0.0..1.0);
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let n: Vec<f64> = (0..2).map(|_| rng.random_range(20.0..60.0)).collect();
        let mut f = vec![vec![0.0; 2]; 2];
        for c in 0..2 {
            for i in 0..2 {
                let clean = n[c] * true_t[(c * 2 + i, 0)] * w;
                let noise_scale = (n[c] * ubm.variances[c][i]).sqrt();
                let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                let eps = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                f[c][i] = clean + 0.1 * noise_scale * eps;
            }
        }
        stats_set.push(BaumWelchStats { n, f });
    }

    let tv = train_tv_matrix(&stats_set, &ubm, 1, 25, 99).unwrap();
    let learned: Vec<f64> = (0..4).map(|i| tv.matrix()[(i, 0)]).collect();
    let truth: Vec<f64> = (0..4).map(|i| true_t[(i, 0)]).collect();
    let cos = cosine_similarity(&learned, &truth).unwrap();
    assert!(cos.abs() >= 0.9, "|cos| = {}", cos.abs());
}

#[test]
fn zero_iters_returns_seeded_init() {
    let ubm = toy_ubm(2, 3, 11);
    let a = train_tv_matrix(&[], &ubm, 4, 0, 42).unwrap();
    let b = train_tv_matrix(&[], &ubm, 4, 0, 42).unwrap();
    assert_eq!(a, b);
    // Init scale is 0.1 sqrt(var;) entries must be small but not all zero.
    assert!(a.matrix().iter().any(|&v| v != 0.0));
    assert!(a.matrix().iter().all(|&v| v.abs() < 2.0));
}

#[test]
fn tv_training_is_deterministic() {
    let ubm = toy_ubm(2, 2, 13);
    let stats: Vec<BaumWelchStats> = (0..10).map(|i| toy_stats(2, 2, 400 + i)).collect();
    let a = train_tv_matrix(&stats, &ubm, 2, 3, 5).unwrap();
    let b = train_tv_matrix(&stats, &ubm, 2, 3, 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn cosine_basic_cases() {
    assert!((cosine_similarity(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.0).abs() < 1e-12);
    assert!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-15);
    assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
    assert!(matches!(
        cosine_similarity(&[1.0], &[1.0, 2.0]),
        Err(SpeakerError::DimensionMismatch { .. })
    ));
}

#[test]
fn cosine_matches_compensated_summation_oracle() {
    // Neumaier-compensated dot/norm oracle.
    fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for v in values {
            let t = sum + v;
            comp += if sum.abs() >= v.abs() {
                (sum - t) + v
            } else {
                (v - t) + sum
            };
            sum = t;
        }
        sum + comp
    }

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let a: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let got = cosine_similarity(&a, &b).unwrap();
        let dot = neumaier_sum(a.iter().zip(&b).map(|(x, y)| x * y));
        let na = neumaier_sum(a.iter().map(|x| x * x)).sqrt();
        let nb = neumaier_sum(b.iter().map(|x| x * x)).sqrt();
        let want = dot / (na * nb);
        assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn verify_uses_max_rule_and_is_order_free() {
    let probe = IVector {
        w: vec![1.0, 0.0],
        source_sample: "p".into(),
    };
    let mut enrolled: Vec<IVector> = vec![
        IVector {
            w: vec![0.0, 1.0],
            source_sample: "a".into(),
        },
        IVector {
            w: vec![1.0, 1.0],
            source_sample: "b".into(),
        },
        IVector {
            w: vec![-1.0, 0.0],
            source_sample: "c".into(),
        },
    ];
    let out = verify_against_templates(&probe, &enrolled, 0.5).unwrap();
    // Brute-force max over pairwise cosines.
    let expected = enrolled
        .iter()
        .map(|e| cosine_similarity(&probe.w, &e.w).unwrap())
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((out.score - expected).abs() < 1e-15);
    assert!(out.accepted);

    enrolled.reverse();
    let reversed = verify_against_templates(&probe, &enrolled, 0.5).unwrap();
    assert_eq!(out.score, reversed.score);
    assert_eq!(out.accepted, reversed.accepted);
}

#[test]
fn raising_threshold_never_turns_reject_into_accept() {
    let probe = IVector {
        w: vec![1.0, 0.2],
        source_sample: "p".into(),
    };
    let enrolled = vec![IVector {
        w: vec![0.9, 0.4],
        source_sample: "a".into(),
    }];
    let mut last_accept = true;
    for i in 0..20 {
        let threshold = -1.0 + 0.1 * i as f64;
        let out = verify_against_templates(&probe, &enrolled, threshold).unwrap();
        if !last_accept {
            assert!(!out.accepted, "accept reappeared at threshold {threshold}");
        }
        last_accept = out.accepted;
    }
}

#[test]
fn extractor_rejects_mismatched_ubm_digest() {
    let ubm = toy_ubm(2, 2, 1);
    let other = toy_ubm(2, 2, 2);
    let tv = TotalVariabilityModel::new(DMatrix::zeros(4, 2), other.digest());
    assert!(matches!(
        IvectorExtractor::new(&ubm, &tv),
        Err(SpeakerError::DigestMismatch { .. })
    ));
}

#[test]
fn background_training_and_probe_roundtrip() {
    use crate::audio::FrontendConfig;

    // Small synthetic corpus: two "speakers" with different tone stacks.
    let frontend = FrontendConfig {
        sample_rate: 8_000,
        n_ceps: 6,
        n_mels: 12,
        deltas: crate::audio::DeltaSpec::None,
        ..FrontendConfig::default()
    };
    let tone = |freqs: &[f64], seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 3 * 8_000usize;
        let drift: f64 = rng.random_range(0.98..1.02);
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / 8_000.0;
                let mut s = 0.0;
                for (j, f) in freqs.iter().enumerate() {
                    s += 0.2 * ((2.0 * std::f64::consts::PI * f * drift * t)
                        + j as f64)
                        .sin();
                }
                s
            })
            .collect();
        AudioBuffer::new(samples, 8_000).unwrap()
    };
    let speaker_a: Vec<AudioBuffer> = (0..4).map(|i| tone(&[400.0, 900.0], i)).collect();
    let speaker_b: Vec<AudioBuffer> = (0..4).map(|i| tone(&[1500.0, 2600.0], 100 + i)).collect();
    let mut corpus = speaker_a.clone();
    corpus.extend(speaker_b.iter().cloned());

    let cfg = SpeakerConfig {
        ubm_components: 4,
        ubm_iters: 5,
        ivector_dim: 4,
        tv_iters: 3,
        threshold: 0.5,
        min_voiced_s: 1.0,
        ubm_max_frames: 100_000,
    };
    let bg = SpeakerBackground::train(&corpus, &frontend, &cfg, 17).unwrap();

    let enroll: Vec<IVector> = speaker_a
        .iter()
        .enumerate()
        .map(|(i, b)| {
            bg.ivector_for(b, &frontend, cfg.min_voiced_s, &format!("a{i}"))
                .unwrap()
        })
        .collect();

    // A probe identical to an enrollment sample scores 1 within 1e-9.
    let probe = bg
        .ivector_for(&speaker_a[0], &frontend, cfg.min_voiced_s, "probe")
        .unwrap();
    let out = verify_against_templates(&probe, &enroll, 0.99).unwrap();
    assert!((out.score - 1.0).abs() < 1e-9);
    assert!(out.accepted);

    // A different speaker's probe scores strictly lower.
    let imp = bg
        .ivector_for(&speaker_b[0], &frontend, cfg.min_voiced_s, "imp")
        .unwrap();
    let imp_out = verify_against_templates(&imp, &enroll, 0.99).unwrap();
    assert!(imp_out.score < out.score);
}
