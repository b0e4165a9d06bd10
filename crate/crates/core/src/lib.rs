pub mod clock;
pub mod fetch;
pub mod ingest;
pub mod labeling;
pub mod langid;
pub mod links;
pub mod model;
pub mod pipeline;
pub mod reporting;
pub mod store;
pub mod text;
pub mod verification;
