//! Holds the `acceptance` test target. Run it with
//! `cargo test -p advssl-validation --test acceptance`.
