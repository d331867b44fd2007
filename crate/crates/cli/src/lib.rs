pub mod acceptance;
pub mod config;
pub mod scenario;
