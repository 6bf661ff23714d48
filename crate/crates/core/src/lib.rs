pub mod config;
pub mod density;
pub mod engine;
pub mod expr;
pub mod interval;
pub mod montecarlo;
pub mod probbound;
pub mod region;
