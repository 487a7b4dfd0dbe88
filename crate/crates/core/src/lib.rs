//! Reliability and political-consistency probing of language-model answers
//! to voting-advice policy statements.
//!
//! The guide in `book/` walks through the pipeline; its code blocks are
//! compiled as doc-tests of this crate.

pub mod aggregate;
pub mod battery;
pub mod config;
pub mod corpus;
pub mod modelio;
pub mod pipeline;
pub mod promptkit;
pub mod report;
pub mod seed;
pub mod stancemap;
pub mod stats;
pub mod text;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/prompts.md")]
    mod prompts {}
    #[doc = include_str!("../../../book/src/responses.md")]
    mod responses {}
    #[doc = include_str!("../../../book/src/mapping.md")]
    mod mapping {}
    #[doc = include_str!("../../../book/src/significance.md")]
    mod significance {}
    #[doc = include_str!("../../../book/src/battery.md")]
    mod battery {}
    #[doc = include_str!("../../../book/src/agreement.md")]
    mod agreement {}
    #[doc = include_str!("../../../book/src/aggregation.md")]
    mod aggregation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/corpus-format.md")]
    mod corpus_format {}
}
