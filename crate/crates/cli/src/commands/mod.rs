pub mod annotate;
pub mod average;
pub mod gcd;
pub mod layers;
