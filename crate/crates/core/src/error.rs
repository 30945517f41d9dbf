use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid item id {0:?}")]
    InvalidItemId(String),

    #[error("unknown task {0:?}")]
    UnknownTask(String),

    #[error("unknown item {item:?} in task {task:?}")]
    UnknownItem { task: String, item: String },

    #[error("no comparisons in scope")]
    EmptyScope,

    #[error("item {0:?} never appears in a comparison in scope")]
    ItemNotCompared(String),

    #[error(
        "comparison graph is disconnected ({components} components); merits are not identifiable"
    )]
    Disconnected { components: usize },

    #[error("all presented items have zero merit")]
    ZeroMerit,

    #[error("presented set is outside the model's domain: {0}")]
    OutsideDomain(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("session already finished")]
    SessionFinished,

    #[error("request {0} is not pending")]
    UnknownRequest(u64),

    #[error("winner slot {slot} is out of range for a {arity}-slot request")]
    SlotOutOfRange { slot: usize, arity: usize },

    #[error("model has no unique best item; designate the ground truth explicitly")]
    NoUniqueBest,

    #[error("likelihood-ratio test: {0}")]
    InvalidTest(String),

    #[error("sampler failure: {0}")]
    Sampler(String),

    #[error("{0}")]
    Domain(String),
}
