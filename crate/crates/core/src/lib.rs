pub mod cli;
pub mod clustering;
pub mod disambig;
pub mod io;
pub mod metrics;
pub mod parser;
pub mod pipeline;
pub mod topology;
pub mod training;
pub mod tree;
pub mod treelstm;
