pub mod description;
pub mod door;
pub mod gateway;
pub mod notify;
pub mod profile;
pub mod recognition;
pub mod vision;
