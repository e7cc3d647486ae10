pub mod cdf;
pub mod cli;
pub mod error;
pub mod lp;
pub mod partition;
pub mod records;
pub mod rng;
pub mod scalar;
pub mod simulate;
pub mod position_bias;
pub mod eodds;
pub mod eopp;
pub mod eval;
pub mod figures;
pub mod io;
pub mod reranker;

pub use error::{Error, Result};
pub use records::GroupId;

pub type Record = records::ImpressionRecord<f64>;
pub type Dataset = records::ValidatedDataset<f64>;
pub type Weights = position_bias::PositionWeights<f64>;
pub type Partition = partition::ScorePartition<f64>;
pub type EoppModel = eopp::EoppModel<f64>;
pub type EoddsModel = eodds::EoddsModel<f64>;
