//! Configuration, field dumps and reports.

pub mod config;
pub mod field_dump;
pub mod report;

pub use config::{format_config, parse_config, ConfigError, RunConfig};
pub use field_dump::{dump_field, load_field, DumpError, FieldDump, FieldKind};
