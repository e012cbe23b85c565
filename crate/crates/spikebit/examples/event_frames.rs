//! Event-stream ingestion: OR-binning `t x y polarity` records into frames.
//!
//! Run with: cargo run -p spikebit --example event_frames

use spikebit::snn::{events_to_frames, parse_event_file};

fn main() {
    // a small synthetic recording: a dot moving along the diagonal,
    // with an off-polarity event trailing it
    let recording = "\
0 0 0 1
120 1 1 1
130 0 0 0
250 2 2 1
380 3 3 1
390 2 2 0
505 3 3 1
9999 0 0 1
";
    let events = parse_event_file(recording).unwrap();
    println!("parsed {} events", events.len());

    let timesteps = 5;
    let bin_width = 125; // ticks per frame; the t=9999 event falls outside
    let train = events_to_frames(&events, timesteps, bin_width, 4, 4).unwrap();
    println!(
        "binned into {} frames of {:?} ({} spikes kept)\n",
        train.timesteps(),
        train.frame_shape(),
        train.ones_count()
    );

    for t in 0..train.timesteps() {
        let frame = train.frame(t).unwrap();
        println!("frame {t} (rows = y, `+` on-polarity, `-` off-polarity):");
        for y in 0..4 {
            let mut row = String::new();
            for x in 0..4 {
                let off = frame.data()[(y * 4 + x) as usize];
                let on = frame.data()[(16 + y * 4 + x) as usize];
                row.push(match (on == 1.0, off == 1.0) {
                    (true, true) => '#',
                    (true, false) => '+',
                    (false, true) => '-',
                    (false, false) => '.',
                });
            }
            println!("  {row}");
        }
    }
}
