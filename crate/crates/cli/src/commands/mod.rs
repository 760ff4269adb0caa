pub mod eval;
pub mod export;
pub mod sweep;
pub mod tournament;
pub mod train;

use poolflip::harness::{parse_specs, split_roster};
use poolflip::HeuristicSpec;

use crate::failure::CliResult;

/// Parses a comma/semicolon separated roster flag.
pub fn roster(list: &str) -> CliResult<Vec<HeuristicSpec>> {
    Ok(parse_specs(&split_roster(list))?)
}

macro_rules! overlay_fields {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl crate::config::Overlay for $ty {
            fn overlay(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}
pub(crate) use overlay_fields;
