pub mod amplitude;
pub mod enumeration;
