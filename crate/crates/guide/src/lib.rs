// mdbook cannot test snippets that depend on a local crate, so every
// chapter is pulled in here as module docs and `cargo test --doc` runs
// them. One module per chapter keeps failures traceable to a file.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/effective-rate.md")]
pub mod effective_rate {}

#[doc = include_str!("../../../book/src/collateral.md")]
pub mod collateral {}

#[doc = include_str!("../../../book/src/xva.md")]
pub mod xva {}

#[doc = include_str!("../../../book/src/pde.md")]
pub mod pde {}

#[doc = include_str!("../../../book/src/repo.md")]
pub mod repo {}

#[doc = include_str!("../../../book/src/allocation.md")]
pub mod allocation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
