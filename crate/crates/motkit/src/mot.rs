//! MOTChallenge text format: `frame,id,bb_left,bb_top,bb_width,bb_height,conf`
//! with optional trailing world coordinates that are ignored on input. The
//! emitter writes pixel fields with 2 decimals and confidence with 6, so
//! emit(parse(file)) is stable at the declared precision.

use crate::geometry::{BBox, ImageDims};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MotError {
    #[error("{file}:{line}: expected at least 7 comma-separated fields, got {got}")]
    FieldCount { file: String, line: usize, got: usize },
    #[error("{file}:{line}: field {field} is not numeric: '{value}'")]
    BadNumber { file: String, line: usize, field: usize, value: String },
    #[error("{file}:{line}: {msg}")]
    BadValue { file: String, line: usize, msg: String },
    #[error("io error on {file}: {source}")]
    Io { file: String, source: std::io::Error },
}

/// One parsed line: frame, id (-1 allowed in detection files), normalized
/// center box, confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotRecord {
    pub frame: u32,
    pub id: i64,
    pub bbox: BBox,
    pub conf: f64,
}

/// Parse one comma-separated line. Pixel corners are converted to the
/// normalized center format using `dims`.
pub fn parse_mot_line(
    line: &str,
    dims: ImageDims,
    file: &str,
    line_no: usize,
) -> Result<MotRecord, MotError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() < 7 {
        return Err(MotError::FieldCount {
            file: file.into(),
            line: line_no,
            got: fields.len(),
        });
    }
    let num = |idx: usize| -> Result<f64, MotError> {
        fields[idx].parse::<f64>().map_err(|_| MotError::BadNumber {
            file: file.into(),
            line: line_no,
            field: idx + 1,
            value: fields[idx].into(),
        })
    };
    let frame_f = num(0)?;
    let id_f = num(1)?;
    if frame_f < 1.0 || frame_f.fract() != 0.0 {
        return Err(MotError::BadValue {
            file: file.into(),
            line: line_no,
            msg: format!("frame must be a positive integer, got '{}'", fields[0]),
        });
    }
    if id_f.fract() != 0.0 || (id_f < 1.0 && id_f != -1.0) {
        return Err(MotError::BadValue {
            file: file.into(),
            line: line_no,
            msg: format!("id must be a positive integer or -1, got '{}'", fields[1]),
        });
    }
    let left = num(2)?;
    let top = num(3)?;
    let w = num(4)?;
    let h = num(5)?;
    let conf = num(6)?;
    if w < 0.0 || h < 0.0 {
        return Err(MotError::BadValue {
            file: file.into(),
            line: line_no,
            msg: format!("negative box size {w}x{h}"),
        });
    }
    let fw = dims.width as f64;
    let fh = dims.height as f64;
    let bbox = BBox::new((left + w / 2.0) / fw, (top + h / 2.0) / fh, w / fw, h / fh)
        .map_err(|e| MotError::BadValue {
            file: file.into(),
            line: line_no,
            msg: e.to_string(),
        })?;
    Ok(MotRecord { frame: frame_f as u32, id: id_f as i64, bbox, conf })
}

/// Render one record back to a line (no trailing newline).
pub fn emit_mot_line(r: &MotRecord, dims: ImageDims) -> String {
    let fw = dims.width as f64;
    let fh = dims.height as f64;
    let w = r.bbox.w * fw;
    let h = r.bbox.h * fh;
    let left = r.bbox.cx * fw - w / 2.0;
    let top = r.bbox.cy * fh - h / 2.0;
    let mut s = String::new();
    let _ = write!(s, "{},{},{left:.2},{top:.2},{w:.2},{h:.2},{:.6}", r.frame, r.id, r.conf);
    s
}

pub fn read_mot_file(path: &Path, dims: ImageDims) -> Result<Vec<MotRecord>, MotError> {
    let file_name = path.display().to_string();
    let text = std::fs::read_to_string(path)
        .map_err(|source| MotError::Io { file: file_name.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_mot_line(line, dims, &file_name, i + 1)?);
    }
    Ok(out)
}

pub fn write_mot_file(
    path: &Path,
    records: &[MotRecord],
    dims: ImageDims,
) -> Result<(), MotError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&emit_mot_line(r, dims));
        text.push('\n');
    }
    std::fs::write(path, text)
        .map_err(|source| MotError::Io { file: path.display().to_string(), source })
}

/// Minimal `seqinfo.ini` with the image dimensions and length, so sequence
/// directories are self-describing.
pub fn write_seqinfo(
    dir: &Path,
    name: &str,
    dims: ImageDims,
    seq_length: u32,
) -> Result<(), MotError> {
    let text = format!(
        "[Sequence]\nname={name}\nimWidth={}\nimHeight={}\nseqLength={}\n",
        dims.width, dims.height, seq_length
    );
    let path = dir.join("seqinfo.ini");
    std::fs::write(&path, text)
        .map_err(|source| MotError::Io { file: path.display().to_string(), source })
}

pub const DEFAULT_DIMS: ImageDims = ImageDims { width: 1920, height: 1080 };

/// Read dims and declared length from `seqinfo.ini` in `dir` when present;
/// 1920x1080 and no length otherwise.
pub fn read_seqinfo(dir: &Path) -> (ImageDims, Option<u32>) {
    let path = dir.join("seqinfo.ini");
    let Ok(text) = std::fs::read_to_string(path) else {
        return (DEFAULT_DIMS, None);
    };
    let mut width = DEFAULT_DIMS.width;
    let mut height = DEFAULT_DIMS.height;
    let mut seq_length = None;
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k.trim() {
                "imWidth" => width = v.trim().parse().unwrap_or(width),
                "imHeight" => height = v.trim().parse().unwrap_or(height),
                "seqLength" => seq_length = v.trim().parse().ok(),
                _ => {}
            }
        }
    }
    (ImageDims { width, height }, seq_length)
}

/// Dims alone, for callers that do not need the sequence length.
pub fn read_seqinfo_dims(dir: &Path) -> ImageDims {
    read_seqinfo(dir).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_the_reference_line() {
        let dims = ImageDims::new(1920, 1080).unwrap();
        let r = parse_mot_line("1,2,100.00,200.00,50.00,80.00,0.900000", dims, "det.txt", 1)
            .unwrap();
        assert_eq!(r.frame, 1);
        assert_eq!(r.id, 2);
        assert!((r.conf - 0.9).abs() < 1e-12);
        // corners back in pixels: (100, 200) to (150, 280)
        let (x1, y1, x2, y2) = r.bbox.to_corners();
        assert!((x1 * 1920.0 - 100.0).abs() < 1e-9);
        assert!((y1 * 1080.0 - 200.0).abs() < 1e-9);
        assert!((x2 * 1920.0 - 150.0).abs() < 1e-9);
        assert!((y2 * 1080.0 - 280.0).abs() < 1e-9);
    }

    #[test]
    fn detection_id_minus_one_accepted() {
        let dims = DEFAULT_DIMS;
        let r = parse_mot_line("3,-1,10,10,5,5,0.5", dims, "det.txt", 4).unwrap();
        assert_eq!(r.id, -1);
    }

    #[test]
    fn trailing_world_coordinates_ignored() {
        let dims = DEFAULT_DIMS;
        let r = parse_mot_line("1,1,10,10,5,5,1,-1,-1,-1", dims, "gt.txt", 1).unwrap();
        assert_eq!(r.frame, 1);
    }

    #[test]
    fn bad_field_reported_with_position() {
        let dims = DEFAULT_DIMS;
        let err = parse_mot_line("1,2,abc,200,50,80,0.9", dims, "det.txt", 7).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("det.txt:7"), "{msg}");
        assert!(msg.contains("field 3"), "{msg}");
        assert!(msg.contains("abc"), "{msg}");

        let err = parse_mot_line("1,2,3", dims, "det.txt", 2).unwrap_err();
        assert!(err.to_string().contains("7"), "{err}");

        assert!(parse_mot_line("0,1,10,10,5,5,1", dims, "x", 1).is_err());
        assert!(parse_mot_line("1,0,10,10,5,5,1", dims, "x", 1).is_err());
        assert!(parse_mot_line("1,1,10,10,-5,5,1", dims, "x", 1).is_err());
    }

    #[test]
    fn emit_uses_declared_precision() {
        let dims = DEFAULT_DIMS;
        let r = parse_mot_line("12,7,100.00,200.00,50.00,80.00,0.912345", dims, "x", 1).unwrap();
        assert_eq!(emit_mot_line(&r, dims), "12,7,100.00,200.00,50.00,80.00,0.912345");
    }

    #[test]
    fn seqinfo_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let dims = ImageDims::new(1280, 720).unwrap();
        write_seqinfo(dir.path(), "seq01", dims, 42).unwrap();
        assert_eq!(read_seqinfo_dims(dir.path()), dims);
        assert_eq!(read_seqinfo_dims(Path::new("/nonexistent")), DEFAULT_DIMS);
    }

    proptest! {
        /// After one quantization to file precision, emit/parse round-trips
        /// byte-identically.
        #[test]
        fn emit_parse_emit_is_stable(
            frame in 1u32..10_000,
            id in 1i64..5_000,
            left in 0.0..1800.0f64,
            top in 0.0..1000.0f64,
            w in 0.5..400.0f64,
            h in 0.5..400.0f64,
            conf in 0.0..1.0f64,
        ) {
            let dims = DEFAULT_DIMS;
            let line = format!("{frame},{id},{left:.2},{top:.2},{w:.2},{h:.2},{conf:.6}");
            let rec = parse_mot_line(&line, dims, "p", 1).unwrap();
            let emitted = emit_mot_line(&rec, dims);
            let rec2 = parse_mot_line(&emitted, dims, "p", 1).unwrap();
            let emitted2 = emit_mot_line(&rec2, dims);
            prop_assert_eq!(&emitted, &emitted2);
            // and the first emit already equals the quantized input
            prop_assert_eq!(&emitted, &line);
        }
    }
}
