pub mod compress;
pub mod cost;
pub mod info;
pub mod judge;
pub mod melfront;
pub mod score;
pub mod sweep;
