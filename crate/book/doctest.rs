// Every chapter becomes the doc comment of an empty module, so
// `cargo test --doc` runs the book's Rust listings against the current
// library. One module per chapter keeps failures traceable to a file.

#[cfg(doctest)]
#[doc = include_str!("src/introduction.md")]
pub mod introduction {}
#[cfg(doctest)]
#[doc = include_str!("src/vectors.md")]
pub mod vectors {}
#[cfg(doctest)]
#[doc = include_str!("src/sgd.md")]
pub mod sgd {}
#[cfg(doctest)]
#[doc = include_str!("src/adaptive.md")]
pub mod adaptive {}
#[cfg(doctest)]
#[doc = include_str!("src/adam.md")]
pub mod adam {}
#[cfg(doctest)]
#[doc = include_str!("src/problems.md")]
pub mod problems {}
#[cfg(doctest)]
#[doc = include_str!("src/harness.md")]
pub mod harness {}
#[cfg(doctest)]
#[doc = include_str!("src/cli.md")]
pub mod cli {}
#[cfg(doctest)]
#[doc = include_str!("../README.md")]
pub mod readme {}
