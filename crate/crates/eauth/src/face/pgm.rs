//! Binary PGM (P5) reader and writer, the on-disk frame format.

use super::{FaceError, FrameImage};

/// Parses a binary PGM (`P5`) image with maxval 255. Comments (`#`) and
/// arbitrary whitespace in the header are accepted.
pub fn read_pgm_bytes(bytes: &[u8]) -> Result<FrameImage, FaceError> {
    let err = |m: &str| FaceError::MalformedPgm(m.into());
    let mut pos = 0usize;

    let mut next_token = |bytes: &[u8]| -> Result<String, FaceError> {
        // Skip whitespace and comment lines.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(FaceError::MalformedPgm("unexpected end of header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    if next_token(bytes)? != "P5" {
        return Err(err("not a P5 PGM"));
    }
    let width: usize = next_token(bytes)?.parse().map_err(|_| err("bad width"))?;
    let height: usize = next_token(bytes)?.parse().map_err(|_| err("bad height"))?;
    let maxval: usize = next_token(bytes)?.parse().map_err(|_| err("bad maxval"))?;
    if maxval != 255 {
        return Err(err("only maxval 255 is supported"));
    }
    // Exactly one whitespace byte separates the header from pixel data.
    pos += 1;
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(err("truncated pixel data"));
    }
    let pixels = bytes[pos..pos + need].iter().map(|&b| b as f64).collect();
    FrameImage::new(width, height, pixels)
}

pub fn read_pgm_file(path: &std::path::Path) -> Result<FrameImage, FaceError> {
    let bytes = std::fs::read(path)
        .map_err(|e| FaceError::MalformedPgm(format!("read {}: {e}", path.display())))?;
    read_pgm_bytes(&bytes)
}

pub fn write_pgm_bytes(img: &FrameImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&p| p.round().clamp(0.0, 255.0) as u8));
    out
}

pub fn write_pgm_file(img: &FrameImage, path: &std::path::Path) -> Result<(), FaceError> {
    std::fs::write(path, write_pgm_bytes(img))
        .map_err(|e| FaceError::MalformedPgm(format!("write {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let img = FrameImage::new(
            17,
            16,
            (0..17 * 16).map(|i| (i % 256) as f64).collect(),
        )
        .unwrap();
        let bytes = write_pgm_bytes(&img);
        let back = read_pgm_bytes(&bytes).unwrap();
        assert_eq!(img, back);
    }

    #[test]
    fn header_comments_are_skipped() {
        let mut bytes = b"P5\n# a comment\n16 16\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(7u8, 256));
        let img = read_pgm_bytes(&bytes).unwrap();
        assert_eq!(img.width(), 16);
        assert_eq!(img.get(3, 3), 7.0);
    }

    #[test]
    fn truncated_data_is_rejected() {
        let bytes = b"P5\n16 16\n255\nshort".to_vec();
        assert!(matches!(
            read_pgm_bytes(&bytes),
            Err(FaceError::MalformedPgm(_))
        ));
    }
}
