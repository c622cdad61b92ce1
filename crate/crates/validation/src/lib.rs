//! Acceptance suite for `pairrank` and `pairrank-cli`; the checks live in
//! `tests/acceptance.rs`. Kept in its own package so it runs after the unit
//! and integration tests of the other crates.
