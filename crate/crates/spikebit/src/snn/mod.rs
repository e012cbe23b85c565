//! Layer definitions and time-stepped leaky integrate-and-fire simulation.

mod events;
mod forward;
mod layer;
mod lif;

pub use events::{events_to_frames, parse_event_file, DvsEvent};
pub use forward::{forward, ActivityStats, LayerActivity};
pub use layer::{layer_apply, maxpool_apply, ChannelAffine, LayerSpec, NetworkSpec};
pub use lif::{lif_step, LifState};
