//! Bundled abstract-domain action-label vocabulary.
//!
//! Entity and block labels are flat tokens drawn from this 27-label
//! vocabulary of industrial behavioral actions; the lattice structure of the
//! source taxonomy is not modeled because only label sequences feed
//! similarity scoring. Labels outside the vocabulary are still embedded
//! (the term space is extended on the fly), so the file is a naming
//! convention rather than a hard gate.

/// One label per line; see `data/action_labels.txt`.
pub const ACTION_LABELS_RAW: &str = include_str!("../data/action_labels.txt");

pub fn action_labels() -> Vec<&'static str> {
    ACTION_LABELS_RAW
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}
