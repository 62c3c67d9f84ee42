//! Quality scoring and selection of dialogue-summary pseudolabels.
//!
//! For each unlabeled dialogue, k diverse candidate summaries are scored on three
//! axes: semantic invariance (spread of the candidate embeddings), coverage (how well
//! candidate nouns reach the dialogue's nouns) and faithfulness (sentence-level NLI
//! agreement). The three raw scores are turned into ranks, fused, and the best fraction
//! of dialogues is selected together with a representative pseudolabel. The evaluation
//! side provides ROUGE / embedding-F metrics and force-truth elimination curves.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod export;
pub mod fusion;
pub mod grid;
pub mod jsonl;
pub mod pipeline;
pub mod providers;
pub mod schema;
pub mod sicf;
pub mod text;
pub mod uncertainty;

pub use error::{Error, Result};
