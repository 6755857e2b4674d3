pub mod attention;
pub mod gradcheck;
pub mod metrics;
pub mod segment;
