//! Example configurations shipped with the crate.

/// `(name, TOML text)` for every bundled configuration.
pub const CONFIGS: &[(&str, &str)] = &[
    ("table2_junction", include_str!("../configs/table2_junction.toml")),
    ("operating_programs", include_str!("../configs/operating_programs.toml")),
    ("single_track", include_str!("../configs/single_track.toml")),
    ("crossover", include_str!("../configs/crossover.toml")),
    ("mm1_single_route", include_str!("../configs/mm1_single_route.toml")),
    ("validation", include_str!("../configs/validation.toml")),
];

pub fn get(name: &str) -> Option<&'static str> {
    CONFIGS.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    CONFIGS.iter().map(|(n, _)| *n)
}
