//! Service configuration: data directory, front-end parameters, instrument
//! thresholds, fusion weights, and enrollment policies. Loaded from JSON
//! with environment overrides for the listen address and data directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::audio::FrontendConfig;
use crate::face::FaceConfig;
use crate::registry::EnrollmentPolicy;
use crate::speaker::SpeakerConfig;
use crate::trust::FusionConfig;
use crate::types::Modality;

pub const ENV_LISTEN: &str = "EAUTH_LISTEN";
pub const ENV_DATA_DIR: &str = "EAUTH_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeystrokeConfig {
    /// Scaled-distance acceptance threshold (accept strictly below).
    pub threshold: f64,
}

impl Default for KeystrokeConfig {
    fn default() -> Self {
        KeystrokeConfig { threshold: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadFaceConfig {
    /// Gaussian sigma of the low-pass reference.
    pub ref_sigma: f64,
    pub train_epochs: usize,
    pub train_lr: f64,
}

impl Default for PadFaceConfig {
    fn default() -> Self {
        PadFaceConfig {
            ref_sigma: 0.5,
            train_epochs: 300,
            train_lr: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PadVoiceConfig {
    pub components: usize,
    pub train_iters: usize,
}

impl Default for PadVoiceConfig {
    fn default() -> Self {
        PadVoiceConfig {
            components: 64,
            train_iters: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policies {
    pub voice: EnrollmentPolicy,
    pub face: EnrollmentPolicy,
    pub keystroke: EnrollmentPolicy,
}

impl Default for Policies {
    fn default() -> Self {
        Policies {
            voice: EnrollmentPolicy::default_for(Modality::Voice),
            face: EnrollmentPolicy::default_for(Modality::Face),
            keystroke: EnrollmentPolicy::default_for(Modality::Keystroke),
        }
    }
}

impl Policies {
    pub fn for_modality(&self, modality: Modality) -> &EnrollmentPolicy {
        match modality {
            Modality::Voice => &self.voice,
            Modality::Face => &self.face,
            Modality::Keystroke => &self.keystroke,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub listen: String,
    pub data_dir: PathBuf,
    pub frontend: FrontendConfig,
    pub speaker: SpeakerConfig,
    pub face: FaceConfig,
    pub keystroke: KeystrokeConfig,
    pub pad_face: PadFaceConfig,
    pub pad_voice: PadVoiceConfig,
    pub fusion: FusionConfig,
    pub policies: Policies,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:7878".to_string(),
            data_dir: PathBuf::from("data"),
            frontend: FrontendConfig::default(),
            speaker: SpeakerConfig::default(),
            face: FaceConfig::default(),
            keystroke: KeystrokeConfig::default(),
            pad_face: PadFaceConfig::default(),
            pad_voice: PadVoiceConfig::default(),
            fusion: FusionConfig::default(),
            policies: Policies::default(),
        }
    }
}

impl ServiceConfig {
    /// Loads from a JSON file, then applies `EAUTH_LISTEN` and
    /// `EAUTH_DATA_DIR` overrides.
    pub fn load(path: &Path) -> Result<ServiceConfig, String> {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("read {}: {e}", path.display()))?;
        let mut cfg: ServiceConfig =
            serde_json::from_str(&text).map_err(|e| format!("parse {}: {e}", path.display()))?;
        cfg.apply_env();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) {
        if let Ok(listen) = std::env::var(ENV_LISTEN) {
            self.listen = listen;
        }
        if let Ok(dir) = std::env::var(ENV_DATA_DIR) {
            self.data_dir = PathBuf::from(dir);
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.frontend.validate().map_err(|e| e.to_string())?;
        self.fusion.validate()?;
        if self.speaker.ivector_dim == 0 || self.speaker.ubm_components == 0 {
            return Err("speaker config needs positive dimensions".into());
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), String> {
        let json = serde_json::to_vec_pretty(self).expect("config serializes");
        std::fs::write(path, json).map_err(|e| format!("write {}: {e}", path.display()))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.data_dir.join("models")
    }

    pub fn speaker_background_path(&self) -> PathBuf {
        self.models_dir().join("speaker_background.json")
    }

    pub fn pad_face_model_path(&self) -> PathBuf {
        self.models_dir().join("pad_face.json")
    }

    pub fn pad_voice_model_path(&self) -> PathBuf {
        self.models_dir().join("pad_voice.json")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ServiceConfig::default().validate().unwrap();
    }

    #[test]
    fn load_applies_overrides_and_roundtrips() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("config.json");
        let mut cfg = ServiceConfig::default();
        cfg.keystroke.threshold = 2.25;
        cfg.save(&path).unwrap();
        let loaded = ServiceConfig::load(&path).unwrap();
        assert_eq!(loaded.keystroke.threshold, 2.25);
    }

    #[test]
    fn partial_config_files_fill_defaults() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, "{\"listen\": \"0.0.0.0:9000\"}").unwrap();
        let loaded = ServiceConfig::load(&path).unwrap();
        assert_eq!(loaded.listen, "0.0.0.0:9000");
        assert_eq!(loaded.speaker.ivector_dim, 400);
    }
}
