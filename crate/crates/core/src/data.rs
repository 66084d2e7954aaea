//! Data files bundled into the library.

pub const SLOT_VALUES: &str = include_str!("../data/slot_values.json");
pub const COREF_LIST: &str = include_str!("../data/coref_list.json");
pub const LEXICON: &str = include_str!("../data/lexicon.json");
