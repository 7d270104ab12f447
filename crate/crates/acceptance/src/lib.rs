//! Acceptance criteria for `ebmt`, run as the `acceptance` test target.
//!
//! The suite is its own workspace member so that cargo runs it after every
//! other test binary of `ebmt`.
