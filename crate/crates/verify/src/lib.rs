//! Acceptance checks for the workspace. The suite lives in
//! `tests/acceptance.rs` and prints one PASS/FAIL line per criterion.
