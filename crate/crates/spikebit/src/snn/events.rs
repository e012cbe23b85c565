//! Event-camera stream ingestion: OR-binning of (t, x, y, polarity) events
//! into fixed-length binary frame sequences.

use crate::error::{Error, Result};
use crate::tensor::SpikeTrain;

/// One sensor event. Timestamps are nonnegative ticks; polarity is 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DvsEvent {
    pub t: u64,
    pub x: u32,
    pub y: u32,
    pub polarity: u8,
}

/// Parses newline-delimited `t x y polarity` records (decimal ASCII).
/// Blank lines are skipped.
pub fn parse_event_file(text: &str) -> Result<Vec<DvsEvent>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!(
                "line {}: expected 4 fields `t x y polarity`, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse =
            |s: &str, what: &str| -> Result<u64> {
                s.parse::<u64>().map_err(|_| {
                    Error::Parse(format!("line {}: bad {what} `{s}`", lineno + 1))
                })
            };
        out.push(DvsEvent {
            t: parse(fields[0], "timestamp")?,
            x: parse(fields[1], "x")? as u32,
            y: parse(fields[2], "y")? as u32,
            polarity: parse(fields[3], "polarity")? as u8,
        });
    }
    Ok(out)
}

/// Bins events into `timesteps` frames of shape `[2, height, width]`
/// (one channel per polarity). A cell is 1 if at least one event falls in
/// the bin; events at or beyond `timesteps * bin_width` are dropped.
pub fn events_to_frames(
    events: &[DvsEvent],
    timesteps: usize,
    bin_width: u64,
    height: usize,
    width: usize,
) -> Result<SpikeTrain> {
    if timesteps == 0 || bin_width == 0 {
        return Err(Error::InvalidArgument(
            "timesteps and bin_width must be >= 1".into(),
        ));
    }
    let mut train = SpikeTrain::zeros(vec![timesteps, 2, height, width])?;
    let frame_len = 2 * height * width;
    for ev in events {
        if ev.polarity > 1 {
            return Err(Error::EventOutOfRange(format!(
                "polarity {} not in {{0,1}}",
                ev.polarity
            )));
        }
        if ev.x as usize >= width || ev.y as usize >= height {
            return Err(Error::EventOutOfRange(format!(
                "coordinate ({}, {}) outside {}x{}",
                ev.x, ev.y, width, height
            )));
        }
        let bin = (ev.t / bin_width) as usize;
        if bin >= timesteps {
            continue; // beyond the covered window: dropped
        }
        let idx = bin * frame_len
            + (ev.polarity as usize) * height * width
            + (ev.y as usize) * width
            + ev.x as usize;
        train.set(idx, 1)?;
    }
    Ok(train)
}
