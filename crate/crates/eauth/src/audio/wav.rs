//! WAV I/O. The engine's wire contract for audio is 16-bit PCM mono; any
//! other layout is rejected rather than converted.

use std::io::Cursor;
use std::path::Path;

use super::{AudioBuffer, AudioError};

fn reader_to_buffer<R: std::io::Read>(
    reader: hound::WavReader<R>,
) -> Result<AudioBuffer, AudioError> {
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::MalformedWav(format!(
            "expected mono audio, got {} channels",
            spec.channels
        )));
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::MalformedWav(
            "expected 16-bit PCM samples".into(),
        ));
    }
    let samples: Result<Vec<i16>, _> = reader.into_samples::<i16>().collect();
    let samples =
        samples.map_err(|e| AudioError::MalformedWav(format!("sample decode failed: {e}")))?;
    let float = samples.iter().map(|&s| s as f64 / 32768.0).collect();
    AudioBuffer::new(float, spec.sample_rate)
}

pub fn read_wav_bytes(bytes: &[u8]) -> Result<AudioBuffer, AudioError> {
    let reader = hound::WavReader::new(Cursor::new(bytes))
        .map_err(|e| AudioError::MalformedWav(e.to_string()))?;
    reader_to_buffer(reader)
}

pub fn read_wav_file(path: &Path) -> Result<AudioBuffer, AudioError> {
    let reader =
        hound::WavReader::open(path).map_err(|e| AudioError::MalformedWav(e.to_string()))?;
    reader_to_buffer(reader)
}

pub fn write_wav_bytes(buf: &AudioBuffer) -> Result<Vec<u8>, AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut out = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut out, spec)
            .map_err(|e| AudioError::MalformedWav(e.to_string()))?;
        for &s in buf.samples() {
            let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
            writer
                .write_sample(v)
                .map_err(|e| AudioError::MalformedWav(e.to_string()))?;
        }
        writer
            .finalize()
            .map_err(|e| AudioError::MalformedWav(e.to_string()))?;
    }
    Ok(out.into_inner())
}

pub fn write_wav_file(buf: &AudioBuffer, path: &Path) -> Result<(), AudioError> {
    let bytes = write_wav_bytes(buf)?;
    std::fs::write(path, bytes)
        .map_err(|e| AudioError::MalformedWav(format!("write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_samples_to_quantization() {
        let buf = AudioBuffer::new(
            (0..1600)
                .map(|i| 0.5 * (i as f64 * 0.01).sin())
                .collect(),
            16_000,
        )
        .unwrap();
        let bytes = write_wav_bytes(&buf).unwrap();
        let back = read_wav_bytes(&bytes).unwrap();
        assert_eq!(back.sample_rate(), 16_000);
        assert_eq!(back.len(), buf.len());
        for (a, b) in buf.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1.0 / 32_000.0);
        }
    }

    #[test]
    fn garbage_bytes_are_malformed() {
        assert!(matches!(
            read_wav_bytes(b"not a wav"),
            Err(AudioError::MalformedWav(_))
        ));
    }
}
