pub mod analytics;
pub mod api;
pub mod apk;
pub mod axml;
pub mod dex;
pub mod framework;
pub mod profile;
pub mod report;
pub mod somine;
