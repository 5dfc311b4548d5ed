//! File formats: event ingestion, stream grouping, result persistence and plots.

pub mod events;
pub mod grouping;
pub mod persist;
pub mod plot;

pub use events::{parse_events, parse_events_str, EventFormat, MalformedRecord, ParsedEvents, RawEvent};
pub use grouping::{
    default_icd9_rules, group_by_label, group_by_ranges, parse_rules_toml, CodeMatch, Grouped, GroupingOptions,
    GroupingRule,
};
pub use persist::{
    file_stem, read_curve, read_draws, read_summary, write_atomic, write_curve, write_draws, write_events,
    write_summary, DrawsTable, RunManifest, StreamManifest, SummaryTable,
};
pub use plot::{render_svg, PlotData};
