//! Elicits prior and posterior probabilities from a chat model around a
//! verification step and turns them into revision records.
//!
//! Providers implement [`Provider`]. [`HttpProvider`] talks to a
//! chat-completion endpoint; [`MockProvider`] answers deterministically and
//! is what the tests and offline runs use.

mod error;
mod http;
mod mock;
mod parse;
mod prompts;
mod protocol;
mod provider;

pub use error::{CollectionError, Result};
pub use http::{extract_reply, HttpProvider};
pub use mock::{MockBehavior, MockConfig, MockProvider, MALFORMED_REPLY};
pub use parse::{parse_probability_response, uniform, ElicitationResult, SUM_BAND};
pub use prompts::{PromptSet, POSTERIOR_FILE, PRIOR_FILE};
pub use protocol::{
    collect_into, collect_records, read_problems, run_protocol, synthetic_problems,
    CollectionSummary, Problem, ProtocolConfig,
};
pub use provider::{
    backoff_delay, complete_with_retry, CompletionRequest, ElicitationContext, Provider, Stage,
};
