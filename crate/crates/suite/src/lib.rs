//! End-to-end acceptance checks for the workspace live in `tests/`. This
//! package sits last in test order so the other suites always run first.
