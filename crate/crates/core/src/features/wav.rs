use std::io::Cursor;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{KwsError, Result};

/// Mono audio with samples normalized to `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(KwsError::Audio("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(KwsError::Audio("zero-length audio".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(KwsError::NonFinite("audio samples".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| KwsError::io(path, e))?;
    decode_wav(&bytes)
}

/// Parses an in-memory RIFF/WAVE file: 8/16/24/32-bit integer PCM or 32-bit
/// float, any channel count (downmixed by averaging).
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    let reader = WavReader::new(Cursor::new(bytes)).map_err(|e| KwsError::Wav(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels == 0 {
        return Err(KwsError::Wav("zero channels".into()));
    }
    let channels = spec.channels as usize;
    // Never trust the header for the allocation size.
    let cap = (reader.len() as usize).min(bytes.len());

    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| KwsError::Wav(e.to_string()))?,
        (SampleFormat::Int, bits @ (8 | 16 | 24 | 32)) => {
            let scale = 1.0 / (1u64 << (bits - 1)) as f64;
            let mut out = Vec::with_capacity(cap);
            for s in reader.into_samples::<i32>() {
                let s = s.map_err(|e| KwsError::Wav(e.to_string()))?;
                out.push((s as f64 * scale) as f32);
            }
            out
        }
        (fmt, bits) => {
            return Err(KwsError::Wav(format!("unsupported sample format {fmt:?}/{bits}-bit")));
        }
    };

    if interleaved.len() < channels {
        return Err(KwsError::Audio("zero-length audio".into()));
    }
    let samples: Vec<f32> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|c| (c.iter().map(|&s| s as f64).sum::<f64>() / channels as f64) as f32)
            .collect()
    };
    let samples = samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
    AudioClip::new(samples, spec.sample_rate)
}

/// Writes 16-bit mono PCM.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav_pcm16(clip)?;
    std::fs::write(path, bytes).map_err(|e| KwsError::io(path, e))
}

pub fn encode_wav_pcm16(clip: &AudioClip) -> Result<Vec<u8>> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::new());
    {
        let mut w = WavWriter::new(&mut buf, spec).map_err(|e| KwsError::Wav(e.to_string()))?;
        for &s in &clip.samples {
            let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(q).map_err(|e| KwsError::Wav(e.to_string()))?;
        }
        w.finalize().map_err(|e| KwsError::Wav(e.to_string()))?;
    }
    Ok(buf.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_bytes(spec: WavSpec, samples: &[i32]) -> Vec<u8> {
        let mut buf = Cursor::new(Vec::new());
        let mut w = WavWriter::new(&mut buf, spec).unwrap();
        for &s in samples {
            match spec.bits_per_sample {
                8 => w.write_sample(s as i8).unwrap(),
                16 => w.write_sample(s as i16).unwrap(),
                _ => w.write_sample(s).unwrap(),
            }
        }
        w.finalize().unwrap();
        buf.into_inner()
    }

    fn spec(channels: u16, bits: u16) -> WavSpec {
        WavSpec {
            channels,
            sample_rate: 16000,
            bits_per_sample: bits,
            sample_format: SampleFormat::Int,
        }
    }

    #[test]
    fn mono_16bit_length_and_rate() {
        let samples: Vec<i32> = (0..30480).map(|i| ((i % 200) as i32 - 100) * 50).collect();
        let clip = decode_wav(&wav_bytes(spec(1, 16), &samples)).unwrap();
        assert_eq!(clip.samples().len(), 30480);
        assert_eq!(clip.sample_rate(), 16000);
        assert_eq!(clip.samples()[0], -100.0 * 50.0 / 32768.0);
    }

    #[test]
    fn zero_payload_is_silence() {
        let clip = decode_wav(&wav_bytes(spec(1, 16), &[0; 500])).unwrap();
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_is_channel_mean() {
        let inter = [1000, 3000, -2000, 2000, 16384, 0];
        let clip = decode_wav(&wav_bytes(spec(2, 16), &inter)).unwrap();
        let want: Vec<f32> = inter
            .chunks(2)
            .map(|c| ((c[0] as f64 / 32768.0 + c[1] as f64 / 32768.0) / 2.0) as f32)
            .collect();
        assert_eq!(clip.samples(), &want[..]);
    }

    #[test]
    fn eight_bit_and_float() {
        let clip = decode_wav(&wav_bytes(spec(1, 8), &[-128, 0, 64])).unwrap();
        assert_eq!(clip.samples(), &[-1.0, 0.0, 0.5]);

        let mut buf = Cursor::new(Vec::new());
        let fspec = WavSpec {
            channels: 1,
            sample_rate: 8000,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::new(&mut buf, fspec).unwrap();
        for s in [0.25f32, -0.5] {
            w.write_sample(s).unwrap();
        }
        w.finalize().unwrap();
        let clip = decode_wav(&buf.into_inner()).unwrap();
        assert_eq!(clip.samples(), &[0.25, -0.5]);
        assert_eq!(clip.sample_rate(), 8000);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(decode_wav(&wav_bytes(spec(1, 16), &[])).is_err());
        assert!(decode_wav(b"RIFF\0\0\0\0WAVE").is_err());
        assert!(decode_wav(b"not a wav at all").is_err());
        assert!(read_wav("/nonexistent/file.wav").is_err());

        // A-law (format tag 6) fmt chunk.
        let mut bytes = wav_bytes(spec(1, 16), &[1, 2, 3]);
        bytes[20] = 6;
        assert!(decode_wav(&bytes).is_err());
    }

    #[test]
    fn pcm16_round_trip() {
        let clip = AudioClip::new(vec![0.0, 0.5, -0.5, 0.999], 16000).unwrap();
        let back = decode_wav(&encode_wav_pcm16(&clip).unwrap()).unwrap();
        for (a, b) in clip.samples().iter().zip(back.samples()) {
            assert!((a - b).abs() < 1.0 / 32000.0);
        }
    }
}
