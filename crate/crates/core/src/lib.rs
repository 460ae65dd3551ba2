pub mod cie;
pub mod element;
pub mod gvk;
pub mod ere;
pub mod ingest;
pub mod monitor;
pub mod scene;
