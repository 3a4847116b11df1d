use std::fs;
use std::path::Path;

use bftcn_core::metrics::frames_to_segments;

use super::{FormatError, io_err};

/// The two interchangeable label encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFileFormat {
    /// One class token per line, one line per frame.
    Frames,
    /// Lines of `start end token` with half-open, contiguous ranges.
    Segments,
}

/// Write per-frame labels in either encoding, mapping ids through `classes`.
pub fn write_labels(
    path: &Path,
    labels: &[usize],
    classes: &[String],
    format: LabelFileFormat,
) -> Result<(), FormatError> {
    let mut out = String::new();
    match format {
        LabelFileFormat::Frames => {
            for &y in labels {
                out.push_str(&classes[y]);
                out.push('\n');
            }
        }
        LabelFileFormat::Segments => {
            let segments = frames_to_segments(labels)
                .map_err(|_| FormatError::EmptyLabels { path: path.into() })?;
            for s in segments {
                out.push_str(&format!("{} {} {}\n", s.start, s.end, classes[s.label]));
            }
        }
    }
    fs::write(path, out).map_err(io_err(path))
}

/// Read labels in either encoding (auto-detected), mapping tokens through
/// `classes`. Segment files must start at frame 0 and be contiguous.
pub fn read_labels(path: &Path, classes: &[String]) -> Result<Vec<usize>, FormatError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    if lines.is_empty() {
        return Err(FormatError::EmptyLabels { path: path.into() });
    }

    let looks_segmental = {
        let fields: Vec<&str> = lines[0].1.split_whitespace().collect();
        fields.len() == 3
            && fields[0].parse::<usize>().is_ok()
            && fields[1].parse::<usize>().is_ok()
    };

    let class_id = |token: &str, _line: usize| -> Result<usize, FormatError> {
        classes.iter().position(|c| c == token).ok_or_else(|| FormatError::UnknownLabel {
            path: path.into(),
            token: token.to_string(),
            classes: classes.to_vec(),
        })
    };

    if !looks_segmental {
        let mut labels = Vec::with_capacity(lines.len());
        for (line_no, line) in lines {
            if line.split_whitespace().count() != 1 {
                return Err(FormatError::LabelParse {
                    path: path.into(),
                    line: line_no,
                    message: format!("expected a single class token, got {line:?}"),
                });
            }
            labels.push(class_id(line, line_no)?);
        }
        return Ok(labels);
    }

    let mut labels = Vec::new();
    let mut cursor = 0usize;
    for (line_no, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(FormatError::LabelParse {
                path: path.into(),
                line: line_no,
                message: format!("expected 'start end label', got {line:?}"),
            });
        }
        let parse_idx = |s: &str| -> Result<usize, FormatError> {
            s.parse().map_err(|_| FormatError::LabelParse {
                path: path.into(),
                line: line_no,
                message: format!("invalid frame index {s:?}"),
            })
        };
        let start = parse_idx(fields[0])?;
        let end = parse_idx(fields[1])?;
        if end <= start {
            return Err(FormatError::LabelParse {
                path: path.into(),
                line: line_no,
                message: format!("empty or inverted segment [{start}, {end})"),
            });
        }
        if start != cursor {
            return Err(FormatError::SegmentDiscontinuity {
                path: path.into(),
                line: line_no,
                expected: cursor,
                got: start,
            });
        }
        let id = class_id(fields[2], line_no)?;
        labels.extend(std::iter::repeat_n(id, end - start));
        cursor = end;
    }
    Ok(labels)
}
