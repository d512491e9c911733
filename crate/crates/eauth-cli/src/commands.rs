//! Subcommand bodies: load config, call the library, print JSON.

use std::path::{Path, PathBuf};

use eauth::audio::wav;
use eauth::engine::EngineError;
use eauth::eval::{
    self, evaluate_fr, evaluate_fra, evaluate_kd, evaluate_vr, evaluate_vra, synth_typing,
    synth_voice, EvaluationReport, FrEvalOptions, FraEvalOptions, KdEvalOptions, VrEvalOptions,
    VraEvalOptions, SyntheticFaceProfile, SyntheticSpeakerProfile, SyntheticTypistProfile,
};
use eauth::face::pgm;
use eauth::types::{Instrument, Modality};

use crate::{
    load_config, open_engine, parse_instrument, parse_modality, read_payload, CliError,
    SimulateCommand,
};

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string(value).expect("serializable"));
}

pub(crate) fn cmd_serve(config: &Path) -> Result<(), CliError> {
    let engine = std::sync::Arc::new(open_engine(config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime
        .block_on(eauth::service::serve(engine))
        .map_err(CliError::from)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn cmd_enroll(
    config: &Path,
    learner: Option<String>,
    register: Option<String>,
    modality: &str,
    session: &str,
    fps: f64,
    no_finalize: bool,
    files: &[PathBuf],
) -> Result<(), CliError> {
    let modality = parse_modality(modality)?;
    let engine = open_engine(config)?;
    let learner_id = match (learner, register) {
        (Some(id), None) => id,
        (None, Some(name)) => {
            let identity = engine.register_learner(&name)?;
            print_json(&identity);
            identity.id
        }
        _ => {
            return Err(CliError::new(
                "UsageError",
                "pass exactly one of --learner or --register",
            ))
        }
    };

    let mut status = None;
    match modality {
        // Each face sample is one frame sequence built from all the files.
        Modality::Face => {
            let payload = read_payload(modality, files, fps)?;
            status = Some(engine.submit_enrollment(&learner_id, modality, session, &payload)?);
        }
        _ => {
            for file in files {
                let payload = read_payload(modality, std::slice::from_ref(file), fps)?;
                status =
                    Some(engine.submit_enrollment(&learner_id, modality, session, &payload)?);
            }
        }
    }
    let status = status.expect("at least one sample file is required");

    if status.complete && !no_finalize {
        let templates = engine.finalize_enrollment(&learner_id, modality)?;
        print_json(&serde_json::json!({
            "status": status,
            "templates": templates.len(),
        }));
    } else {
        print_json(&serde_json::json!({ "status": status }));
    }
    Ok(())
}

pub(crate) fn cmd_verify(
    config: &Path,
    learner: &str,
    modality: &str,
    activity: Option<&str>,
    fps: f64,
    files: &[PathBuf],
) -> Result<(), CliError> {
    let modality = parse_modality(modality)?;
    let engine = open_engine(config)?;
    let payload = read_payload(modality, files, fps)?;
    let outcome = engine.verify(learner, modality, &payload, activity)?;
    print_json(&outcome);
    Ok(())
}

pub(crate) fn cmd_pad(
    config: &Path,
    modality: &str,
    activity: Option<&str>,
    fps: f64,
    files: &[PathBuf],
) -> Result<(), CliError> {
    let modality = parse_modality(modality)?;
    let engine = open_engine(config)?;
    let payload = read_payload(modality, files, fps)?;
    let outcome = engine.pad_check(&payload, activity)?;
    print_json(&outcome);
    Ok(())
}

pub(crate) fn cmd_report(
    config: &Path,
    activity: &str,
    learner: Option<&str>,
) -> Result<(), CliError> {
    let engine = open_engine(config)?;
    if let Some(learner) = learner {
        engine.build_report(activity, learner)?;
    }
    // Print the persisted bytes verbatim; this is the same byte surface the
    // HTTP service serves.
    match engine.get_report_bytes(activity)? {
        Some(bytes) => {
            let mut out = bytes;
            out.push(b'\n');
            use std::io::Write;
            std::io::stdout().write_all(&out)?;
            Ok(())
        }
        None => Err(CliError::new(
            "ReportNotFound",
            format!("no report for activity '{activity}'"),
        )),
    }
}

pub(crate) fn cmd_simulate(sim: SimulateCommand) -> Result<(), CliError> {
    match sim {
        SimulateCommand::Voices {
            out,
            speakers,
            utterances,
            duration,
            sample_rate,
            seed,
            utterance_seed_base,
        } => {
            std::fs::create_dir_all(&out)?;
            let profiles =
                SyntheticSpeakerProfile::disjoint_population(speakers, sample_rate, seed);
            for (i, profile) in profiles.iter().enumerate() {
                for u in 0..utterances {
                    let buf = synth_voice(
                        profile,
                        duration,
                        utterance_seed_base + (i * 1000 + u) as u64,
                    );
                    let path = out.join(format!("spk{i:02}_utt{u:02}.wav"));
                    wav::write_wav_file(&buf, &path).map_err(EngineError::from)?;
                }
            }
            std::fs::write(
                out.join("profiles.json"),
                serde_json::to_vec_pretty(&profiles).expect("serializable"),
            )?;
            print_json(&serde_json::json!({
                "written": speakers * utterances,
                "dir": out,
            }));
        }
        SimulateCommand::Typing {
            out,
            typists,
            streams,
            keystrokes,
            seed,
            stream_seed_base,
        } => {
            std::fs::create_dir_all(&out)?;
            let profiles = SyntheticTypistProfile::separated_population(typists, seed);
            for (i, profile) in profiles.iter().enumerate() {
                for s in 0..streams {
                    let events =
                        synth_typing(profile, keystrokes, stream_seed_base + (i * 100 + s) as u64);
                    let path = out.join(format!("typist{i:02}_stream{s:02}.jsonl"));
                    std::fs::write(&path, eauth::keystroke::events_to_jsonl(&events))?;
                }
            }
            std::fs::write(
                out.join("profiles.json"),
                serde_json::to_vec_pretty(&profiles).expect("serializable"),
            )?;
            print_json(&serde_json::json!({"written": typists * streams, "dir": out}));
        }
        SimulateCommand::Faces {
            out,
            identities,
            frames,
            size,
            seed,
            frame_seed_base,
        } => {
            for i in 0..identities {
                let dir = out.join(format!("identity{i:02}"));
                std::fs::create_dir_all(&dir)?;
                let profile = SyntheticFaceProfile::new(eval::trial_seed(seed, i as u64), size);
                for f in 0..frames {
                    let img = profile.frame(frame_seed_base + f as u64);
                    pgm::write_pgm_file(&img, &dir.join(format!("frame{f:03}.pgm")))
                        .map_err(EngineError::from)?;
                }
            }
            print_json(&serde_json::json!({"written": identities * frames, "dir": out}));
        }
        SimulateCommand::Replay {
            input,
            output,
            seed,
        } => {
            let buf = wav::read_wav_file(&input).map_err(EngineError::from)?;
            let replayed = eval::simulate_replay_voice(&buf, seed);
            wav::write_wav_file(&replayed, &output).map_err(EngineError::from)?;
            print_json(&serde_json::json!({"output": output}));
        }
        SimulateCommand::Recapture {
            input,
            output,
            seed,
        } => {
            let img = pgm::read_pgm_file(&input).map_err(EngineError::from)?;
            let recaptured = eval::simulate_recapture_face(&img, seed);
            pgm::write_pgm_file(&recaptured, &output).map_err(EngineError::from)?;
            print_json(&serde_json::json!({"output": output}));
        }
        SimulateCommand::FacePadCorpus {
            out,
            count,
            size,
            seed,
        } => {
            std::fs::create_dir_all(&out)?;
            let mut manifest = Vec::new();
            for i in 0..count {
                let profile = SyntheticFaceProfile::new(eval::trial_seed(seed, i as u64), size);
                let bona = profile.frame(i as u64);
                let bona_name = format!("bona_{i:03}.pgm");
                pgm::write_pgm_file(&bona, &out.join(&bona_name)).map_err(EngineError::from)?;
                manifest.push(eauth::pad::face::ManifestEntry {
                    path: bona_name,
                    label: eauth::pad::face::PadLabel::BonaFide,
                    attack_kind: None,
                });

                let attack =
                    eval::simulate_recapture_face(&bona, eval::trial_seed(seed ^ 0xa77, i as u64));
                let attack_name = format!("attack_{i:03}.pgm");
                pgm::write_pgm_file(&attack, &out.join(&attack_name))
                    .map_err(EngineError::from)?;
                manifest.push(eauth::pad::face::ManifestEntry {
                    path: attack_name,
                    label: eauth::pad::face::PadLabel::Attack,
                    attack_kind: Some(if i % 2 == 0 {
                        eauth::pad::face::AttackKind::Print
                    } else {
                        eauth::pad::face::AttackKind::Replay
                    }),
                });
            }
            std::fs::write(
                out.join("manifest.json"),
                serde_json::to_vec_pretty(&manifest).expect("serializable"),
            )?;
            print_json(&serde_json::json!({"written": 2 * count, "dir": out}));
        }
    }
    Ok(())
}

fn evaluation_report(
    instrument: Instrument,
    speakers: Option<usize>,
    seed: u64,
    sample_rate: u32,
) -> Result<EvaluationReport, CliError> {
    let report = match instrument {
        Instrument::Vr => {
            let mut opts = VrEvalOptions {
                seed,
                ..VrEvalOptions::default()
            };
            opts.frontend.sample_rate = sample_rate;
            if let Some(n) = speakers {
                opts.n_speakers = n;
            }
            evaluate_vr(&opts).map_err(EngineError::from)?
        }
        Instrument::Kd => {
            let mut opts = KdEvalOptions {
                seed,
                ..KdEvalOptions::default()
            };
            if let Some(n) = speakers {
                opts.n_typists = n;
            }
            evaluate_kd(&opts).map_err(EngineError::from)?
        }
        Instrument::Fr => {
            let mut opts = FrEvalOptions {
                seed,
                ..FrEvalOptions::default()
            };
            if let Some(n) = speakers {
                opts.n_identities = n;
            }
            evaluate_fr(&opts).map_err(EngineError::from)?
        }
        Instrument::Fra => {
            let opts = FraEvalOptions {
                seed,
                ..FraEvalOptions::default()
            };
            evaluate_fra(&opts).map_err(EngineError::from)?
        }
        Instrument::Vra => {
            let mut opts = VraEvalOptions {
                seed,
                ..VraEvalOptions::default()
            };
            opts.frontend.sample_rate = sample_rate;
            if let Some(n) = speakers {
                opts.n_speakers = n;
            }
            evaluate_vra(&opts).map_err(EngineError::from)?
        }
    };
    Ok(report)
}

pub(crate) fn cmd_evaluate(
    instrument: &str,
    speakers: Option<usize>,
    seed: u64,
    sample_rate: u32,
    det_csv: Option<&Path>,
) -> Result<(), CliError> {
    let instrument = parse_instrument(instrument)?;
    let report = evaluation_report(instrument, speakers, seed, sample_rate)?;
    if let Some(path) = det_csv {
        std::fs::write(path, report.det_csv())?;
    }
    print_json(&report);
    Ok(())
}

pub(crate) fn cmd_calibrate(
    config_path: &Path,
    instrument: &str,
    target: &str,
    value: f64,
    speakers: Option<usize>,
    seed: u64,
) -> Result<(), CliError> {
    let instrument = parse_instrument(instrument)?;
    let mut config = load_config(config_path)?;
    let report = evaluation_report(instrument, speakers, seed, config.frontend.sample_rate)?;

    // Pick the operating threshold in score space from the DET points.
    let score_threshold = match target {
        "eer" => report.eer_threshold,
        "far-at" => report
            .det
            .iter()
            .find(|p| p.far <= value)
            .map(|p| p.threshold)
            .ok_or_else(|| CliError::new("UnreachableTarget", format!("no FAR <= {value}")))?,
        "frr-at" => report
            .det
            .iter()
            .rev()
            .find(|p| p.frr <= value)
            .map(|p| p.threshold)
            .unwrap_or_else(|| report.det.first().map(|p| p.threshold - 1.0).unwrap()),
        other => {
            return Err(CliError::new(
                "UsageError",
                format!("unknown target '{other}'"),
            ))
        }
    };

    // Map from the evaluation's score space into the instrument's config.
    let configured = match instrument {
        Instrument::Vr => {
            config.speaker.threshold = score_threshold;
            score_threshold
        }
        Instrument::Kd => {
            // KD evaluation scores are exp(-distance).
            let distance = -score_threshold.max(1e-12).ln();
            config.keystroke.threshold = distance;
            distance
        }
        Instrument::Fr => {
            config.face.threshold = score_threshold;
            score_threshold
        }
        _ => {
            return Err(CliError::new(
                "UsageError",
                "calibrate applies to verification instruments (vr, fr, kd)",
            ))
        }
    };

    config
        .save(config_path)
        .map_err(|m| CliError::new("ConfigError", m))?;
    print_json(&serde_json::json!({
        "instrument": instrument,
        "target": target,
        "threshold": configured,
        "eer": report.eer,
    }));
    Ok(())
}

pub(crate) fn cmd_train(
    config: &Path,
    instrument: &str,
    corpus: Option<&Path>,
    manifest: Option<&Path>,
    seed: u64,
) -> Result<(), CliError> {
    let instrument = parse_instrument(instrument)?;
    let mut engine = open_engine(config)?;
    match instrument {
        Instrument::Vr | Instrument::Vra => {
            let dir = corpus.ok_or_else(|| {
                CliError::new("UsageError", "--corpus is required for vr / vra training")
            })?;
            let mut wavs: Vec<PathBuf> = std::fs::read_dir(dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "wav"))
                .collect();
            wavs.sort();
            if wavs.is_empty() {
                return Err(CliError::new("UsageError", "corpus contains no WAV files"));
            }
            let buffers: Result<Vec<_>, _> = wavs.iter().map(|p| wav::read_wav_file(p)).collect();
            let buffers = buffers.map_err(EngineError::from)?;
            if instrument == Instrument::Vr {
                engine.train_speaker_background(&buffers, seed)?;
            } else {
                engine.train_pad_voice(&buffers, seed)?;
            }
            print_json(&serde_json::json!({
                "instrument": instrument,
                "utterances": buffers.len(),
            }));
        }
        Instrument::Fra => {
            let manifest = manifest.ok_or_else(|| {
                CliError::new("UsageError", "--manifest is required for fra training")
            })?;
            let features =
                eauth::pad::face::load_labeled_corpus(manifest, engine.config().pad_face.ref_sigma)?;
            let count = features.len();
            engine.train_pad_face(&features, seed)?;
            print_json(&serde_json::json!({
                "instrument": instrument,
                "examples": count,
            }));
        }
        other => {
            return Err(CliError::new(
                "UsageError",
                format!("instrument '{other}' has no trainable background model"),
            ))
        }
    }
    Ok(())
}
